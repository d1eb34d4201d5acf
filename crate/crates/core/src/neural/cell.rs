//! Single-step recurrent cells and their hand-derived backward passes.
//!
//! Weights are packed per cell: `W` is `(gates·h) × d`, `U` is `(gates·h) × h`
//! and `b` has `gates·h` entries. Gate blocks are stacked in the order
//! `[i, f, o, c̃]` for the LSTM, `[z, r, n]` for the GRU, and a single block
//! for the plain RNN.

use serde::{Deserialize, Serialize};

use super::tensor::{add_matvec, add_matvec_sparse, add_matvec_t, add_outer, add_outer_sparse, sigmoid};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellType {
    Rnn,
    Lstm,
    Gru,
}

impl CellType {
    pub fn gates(self) -> usize {
        match self {
            CellType::Rnn => 1,
            CellType::Lstm => 4,
            CellType::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellType::Rnn => "rnn",
            CellType::Lstm => "lstm",
            CellType::Gru => "gru",
        }
    }
}

impl std::str::FromStr for CellType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(CellType::Rnn),
            "lstm" => Ok(CellType::Lstm),
            "gru" => Ok(CellType::Gru),
            other => Err(format!("unknown cell type {other:?}")),
        }
    }
}

/// Recurrent state `(h, c)`. `c` is all zeros and unused for GRU and RNN.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Borrowed view of one cell's packed weights.
#[derive(Debug, Clone, Copy)]
pub struct CellWeights<'a> {
    pub cell: CellType,
    pub w: &'a [f64],
    pub u: &'a [f64],
    pub b: &'a [f64],
    pub input_dim: usize,
    pub hidden: usize,
}

impl<'a> CellWeights<'a> {
    pub fn new(
        cell: CellType,
        w: &'a [f64],
        u: &'a [f64],
        b: &'a [f64],
        input_dim: usize,
        hidden: usize,
    ) -> Result<Self, NeuralError> {
        let g = cell.gates() * hidden;
        if w.len() != g * input_dim || u.len() != g * hidden || b.len() != g {
            return Err(NeuralError::Shape(format!(
                "{} weights: W {} U {} b {} for d={input_dim} h={hidden}",
                cell.name(),
                w.len(),
                u.len(),
                b.len()
            )));
        }
        Ok(Self {
            cell,
            w,
            u,
            b,
            input_dim,
            hidden,
        })
    }

    fn check(&self, x: &[f64], state: &CellState) -> Result<(), NeuralError> {
        if x.len() != self.input_dim {
            return Err(NeuralError::Shape(format!(
                "input has {} entries, cell expects {}",
                x.len(),
                self.input_dim
            )));
        }
        if state.h.len() != self.hidden || state.c.len() != self.hidden {
            return Err(NeuralError::Shape(format!(
                "state size {} / {}, cell hidden size {}",
                state.h.len(),
                state.c.len(),
                self.hidden
            )));
        }
        Ok(())
    }

    /// `W x + b`, with `x` read only at `nz`.
    fn input_projection(&self, x: &[f64], nz: &[usize]) -> Vec<f64> {
        let mut a = self.b.to_vec();
        add_matvec_sparse(&mut a, self.w, x, nz);
        a
    }
}

/// Gradient accumulators for one cell's packed weights.
pub struct CellGrads<'a> {
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// LSTM gate activations saved by the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    /// `r ⊙ h_{t-1}`.
    pub rh: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepCache {
    Rnn,
    Lstm(LstmStep),
    Gru(GruStep),
}

pub fn lstm_cell_forward(
    x: &[f64],
    state: &CellState,
    weights: &CellWeights<'_>,
) -> Result<(CellState, LstmStep), NeuralError> {
    weights.check(x, state)?;
    let nz = super::tensor::nonzeros(x);
    Ok(lstm_step(x, &nz, state, weights))
}

fn lstm_step(x: &[f64], nz: &[usize], state: &CellState, wt: &CellWeights<'_>) -> (CellState, LstmStep) {
    let h = wt.hidden;
    let mut a = wt.input_projection(x, nz);
    add_matvec(&mut a, wt.u, &state.h);
    let i: Vec<f64> = a[..h].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = a[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
    let o: Vec<f64> = a[2 * h..3 * h].iter().map(|&v| sigmoid(v)).collect();
    let c_tilde: Vec<f64> = a[3 * h..].iter().map(|v| v.tanh()).collect();
    let c: Vec<f64> = (0..h).map(|k| f[k] * state.c[k] + i[k] * c_tilde[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h_new = (0..h).map(|k| o[k] * tanh_c[k]).collect();
    (
        CellState { h: h_new, c },
        LstmStep {
            i,
            f,
            o,
            c_tilde,
            tanh_c,
        },
    )
}

pub fn gru_cell_forward(
    x: &[f64],
    state: &CellState,
    weights: &CellWeights<'_>,
) -> Result<(CellState, GruStep), NeuralError> {
    weights.check(x, state)?;
    let nz = super::tensor::nonzeros(x);
    Ok(gru_step(x, &nz, state, weights))
}

fn gru_step(x: &[f64], nz: &[usize], state: &CellState, wt: &CellWeights<'_>) -> (CellState, GruStep) {
    let h = wt.hidden;
    let mut a = wt.input_projection(x, nz);
    // z and r see U h; the candidate sees U (r ⊙ h).
    add_matvec(&mut a[..2 * h], &wt.u[..2 * h * h], &state.h);
    let z: Vec<f64> = a[..h].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = a[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = (0..h).map(|k| r[k] * state.h[k]).collect();
    add_matvec(&mut a[2 * h..], &wt.u[2 * h * h..], &rh);
    let n: Vec<f64> = a[2 * h..].iter().map(|v| v.tanh()).collect();
    let h_new = (0..h).map(|k| z[k] * state.h[k] + (1.0 - z[k]) * n[k]).collect();
    (
        CellState {
            h: h_new,
            c: vec![0.0; h],
        },
        GruStep { z, r, n, rh },
    )
}

pub fn rnn_cell_forward(
    x: &[f64],
    state: &CellState,
    weights: &CellWeights<'_>,
) -> Result<CellState, NeuralError> {
    weights.check(x, state)?;
    let nz = super::tensor::nonzeros(x);
    Ok(rnn_step(x, &nz, state, weights))
}

fn rnn_step(x: &[f64], nz: &[usize], state: &CellState, wt: &CellWeights<'_>) -> CellState {
    let mut a = wt.input_projection(x, nz);
    add_matvec(&mut a, wt.u, &state.h);
    CellState {
        h: a.iter().map(|v| v.tanh()).collect(),
        c: vec![0.0; wt.hidden],
    }
}

/// One step of any cell type, with shapes assumed checked by the caller.
pub(crate) fn step(
    x: &[f64],
    nz: &[usize],
    state: &CellState,
    wt: &CellWeights<'_>,
) -> (CellState, StepCache) {
    match wt.cell {
        CellType::Lstm => {
            let (s, c) = lstm_step(x, nz, state, wt);
            (s, StepCache::Lstm(c))
        }
        CellType::Gru => {
            let (s, c) = gru_step(x, nz, state, wt);
            (s, StepCache::Gru(c))
        }
        CellType::Rnn => (rnn_step(x, nz, state, wt), StepCache::Rnn),
    }
}

/// Backward through one step.
///
/// `dh`/`dc` are the loss gradients with respect to this step's output
/// state; on return they hold the gradients with respect to the previous
/// state. Weight gradients are added to `grads`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_backward(
    x: &[f64],
    nz: &[usize],
    prev: &CellState,
    out: &CellState,
    cache: &StepCache,
    wt: &CellWeights<'_>,
    dh: &mut Vec<f64>,
    dc: &mut [f64],
    grads: &mut CellGrads<'_>,
) {
    let h = wt.hidden;
    let mut dh_prev = vec![0.0; h];
    match cache {
        StepCache::Lstm(s) => {
            let mut da = vec![0.0; 4 * h];
            for k in 0..h {
                let dct = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                da[k] = dct * s.c_tilde[k] * s.i[k] * (1.0 - s.i[k]);
                da[h + k] = dct * prev.c[k] * s.f[k] * (1.0 - s.f[k]);
                da[2 * h + k] = dh[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
                da[3 * h + k] = dct * s.i[k] * (1.0 - s.c_tilde[k] * s.c_tilde[k]);
                dc[k] = dct * s.f[k];
            }
            add_outer_sparse(grads.w, &da, x, nz);
            add_outer(grads.u, &da, &prev.h);
            grads.b.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
            add_matvec_t(&mut dh_prev, wt.u, &da);
        }
        StepCache::Gru(s) => {
            let mut da = vec![0.0; 3 * h];
            for k in 0..h {
                da[k] = dh[k] * (prev.h[k] - s.n[k]) * s.z[k] * (1.0 - s.z[k]);
                da[2 * h + k] = dh[k] * (1.0 - s.z[k]) * (1.0 - s.n[k] * s.n[k]);
                dh_prev[k] = dh[k] * s.z[k];
            }
            let mut drh = vec![0.0; h];
            add_matvec_t(&mut drh, &wt.u[2 * h * h..], &da[2 * h..]);
            for k in 0..h {
                da[h + k] = drh[k] * prev.h[k] * s.r[k] * (1.0 - s.r[k]);
                dh_prev[k] += drh[k] * s.r[k];
            }
            add_outer_sparse(grads.w, &da, x, nz);
            add_outer(&mut grads.u[..2 * h * h], &da[..2 * h], &prev.h);
            add_outer(&mut grads.u[2 * h * h..], &da[2 * h..], &s.rh);
            grads.b.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
            add_matvec_t(&mut dh_prev, &wt.u[..2 * h * h], &da[..2 * h]);
            dc.iter_mut().for_each(|v| *v = 0.0);
        }
        StepCache::Rnn => {
            let da: Vec<f64> = (0..h).map(|k| dh[k] * (1.0 - out.h[k] * out.h[k])).collect();
            add_outer_sparse(grads.w, &da, x, nz);
            add_outer(grads.u, &da, &prev.h);
            grads.b.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
            add_matvec_t(&mut dh_prev, wt.u, &da);
            dc.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    *dh = dh_prev;
}
