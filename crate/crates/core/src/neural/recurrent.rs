use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{step, step_backward, CellGrads, CellState, CellType, CellWeights, StepCache};
use super::params::{Gradients, Init, ParamId, ParameterStore};
use super::tensor::{nonzeros, Matrix};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Rows `1..n`.
    Forward,
    /// Rows `n..1`.
    Backward,
}

impl Direction {
    fn row(self, k: usize, n: usize) -> usize {
        match self {
            Direction::Forward => k,
            Direction::Backward => n - 1 - k,
        }
    }
}

/// Runs a cell over `seq` from the zero state. States are reported in
/// consumption order, so the last entry is the direction's final state.
pub fn run_direction(
    seq: &Matrix,
    weights: &CellWeights<'_>,
    direction: Direction,
) -> Result<Vec<CellState>, NeuralError> {
    Ok(unroll(seq, weights, direction)?.states)
}

/// Saved forward pass over one sequence.
#[derive(Debug, Clone)]
pub struct Unrolled {
    pub direction: Direction,
    /// `states[k]` is the state after consuming `k + 1` rows.
    pub states: Vec<CellState>,
    pub caches: Vec<StepCache>,
}

impl Unrolled {
    pub fn final_state(&self) -> &CellState {
        self.states.last().expect("unrolled sequences are non-empty")
    }
}

pub fn unroll(seq: &Matrix, wt: &CellWeights<'_>, direction: Direction) -> Result<Unrolled, NeuralError> {
    let n = seq.rows();
    if n == 0 {
        return Err(NeuralError::EmptySequence);
    }
    if seq.cols() != wt.input_dim {
        return Err(NeuralError::Shape(format!(
            "sequence has {} features, cell expects {}",
            seq.cols(),
            wt.input_dim
        )));
    }
    let mut states = Vec::with_capacity(n);
    let mut caches = Vec::with_capacity(n);
    let mut state = CellState::zeros(wt.hidden);
    for k in 0..n {
        let x = seq.row(direction.row(k, n));
        let (next, cache) = step(x, &nonzeros(x), &state, wt);
        states.push(next.clone());
        caches.push(cache);
        state = next;
    }
    Ok(Unrolled {
        direction,
        states,
        caches,
    })
}

/// Backpropagation through time from a gradient on the final hidden state.
pub fn unroll_backward(
    seq: &Matrix,
    wt: &CellWeights<'_>,
    run: &Unrolled,
    d_final_h: &[f64],
    grads: &mut CellGrads<'_>,
) {
    let n = seq.rows();
    let zero = CellState::zeros(wt.hidden);
    let mut dh = d_final_h.to_vec();
    let mut dc = vec![0.0; wt.hidden];
    for k in (0..n).rev() {
        let x = seq.row(run.direction.row(k, n));
        let prev = if k == 0 { &zero } else { &run.states[k - 1] };
        step_backward(
            x,
            &nonzeros(x),
            prev,
            &run.states[k],
            &run.caches[k],
            wt,
            &mut dh,
            &mut dc,
            grads,
        );
    }
}

/// One direction of a recurrent encoder with its own weight pack.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentLayer {
    pub cell: CellType,
    pub input_dim: usize,
    pub hidden: usize,
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

impl RecurrentLayer {
    /// Registers `W`, `U`, `b` under `prefix`. Weights are uniform on
    /// `±1/√hidden`, biases start at zero.
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        rng: &mut R,
        prefix: &str,
        cell: CellType,
        input_dim: usize,
        hidden: usize,
    ) -> Self {
        let g = cell.gates() * hidden;
        let bound = 1.0 / (hidden as f64).sqrt();
        let w = store.add(format!("{prefix}.W"), g, input_dim, Init::Uniform(bound), rng);
        let u = store.add(format!("{prefix}.U"), g, hidden, Init::Uniform(bound), rng);
        let b = store.add(format!("{prefix}.b"), g, 1, Init::Zeros, rng);
        Self {
            cell,
            input_dim,
            hidden,
            w,
            u,
            b,
        }
    }

    pub fn weights<'a>(&self, store: &'a ParameterStore) -> CellWeights<'a> {
        CellWeights {
            cell: self.cell,
            w: store.value(self.w),
            u: store.value(self.u),
            b: store.value(self.b),
            input_dim: self.input_dim,
            hidden: self.hidden,
        }
    }

    pub fn forward(
        &self,
        store: &ParameterStore,
        seq: &Matrix,
        direction: Direction,
    ) -> Result<Unrolled, NeuralError> {
        unroll(seq, &self.weights(store), direction)
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        seq: &Matrix,
        run: &Unrolled,
        d_final_h: &[f64],
        grads: &mut Gradients,
    ) {
        let mut gw = grads.get(self.w).to_vec();
        let mut gu = grads.get(self.u).to_vec();
        let mut gb = grads.get(self.b).to_vec();
        {
            let mut cg = CellGrads {
                w: &mut gw,
                u: &mut gu,
                b: &mut gb,
            };
            unroll_backward(seq, &self.weights(store), run, d_final_h, &mut cg);
        }
        grads.get_mut(self.w).copy_from_slice(&gw);
        grads.get_mut(self.u).copy_from_slice(&gu);
        grads.get_mut(self.b).copy_from_slice(&gb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
        let data = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    #[test]
    fn backward_equals_forward_on_reversed_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for cell in [CellType::Rnn, CellType::Lstm, CellType::Gru] {
            let mut store = ParameterStore::new();
            let layer = RecurrentLayer::new(&mut store, &mut rng, "l", cell, 4, 3);
            let seq = random_seq(&mut rng, 6, 4);
            let wt = layer.weights(&store);
            let bwd = run_direction(&seq, &wt, Direction::Backward).unwrap();
            let fwd = run_direction(&seq.reversed(), &wt, Direction::Forward).unwrap();
            assert_eq!(bwd, fwd);
        }
    }

    #[test]
    fn single_row_directions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParameterStore::new();
        let layer = RecurrentLayer::new(&mut store, &mut rng, "l", CellType::Lstm, 3, 2);
        let seq = random_seq(&mut rng, 1, 3);
        let wt = layer.weights(&store);
        assert_eq!(
            run_direction(&seq, &wt, Direction::Forward).unwrap(),
            run_direction(&seq, &wt, Direction::Backward).unwrap()
        );
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParameterStore::new();
        let layer = RecurrentLayer::new(&mut store, &mut rng, "l", CellType::Gru, 3, 2);
        let seq = Matrix::zeros(0, 3);
        assert!(matches!(
            run_direction(&seq, &layer.weights(&store), Direction::Forward),
            Err(NeuralError::EmptySequence)
        ));
    }
}
