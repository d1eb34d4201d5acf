use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    /// Uniform on `[-bound, bound]`.
    Uniform(f64),
}

/// Named trainable tensors, each with a gradient accumulator of the same
/// shape.
///
/// Gradients from one backward pass are added with [`accumulate`]; a second
/// call without an intervening [`zero_grads`] is refused so that a batch is
/// never counted twice.
///
/// [`accumulate`]: ParameterStore::accumulate
/// [`zero_grads`]: ParameterStore::zero_grads
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: Vec<Param>,
    accumulated: bool,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> ParamId {
        let n = rows * cols;
        let value = match init {
            Init::Zeros => vec![0.0; n],
            Init::Uniform(b) => (0..n).map(|_| rng.gen_range(-b..=b)).collect(),
        };
        self.params.push(Param {
            name: name.into(),
            rows,
            cols,
            value,
            grad: vec![0.0; n],
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.accumulated = false;
    }

    /// A zeroed gradient buffer shaped like this store.
    pub fn gradient_buffer(&self) -> Gradients {
        Gradients {
            bufs: self.params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), NeuralError> {
        if self.accumulated {
            return Err(NeuralError::DoubleAccumulation);
        }
        if grads.bufs.len() != self.params.len()
            || grads.bufs.iter().zip(&self.params).any(|(g, p)| g.len() != p.len())
        {
            return Err(NeuralError::Shape("gradient buffer does not match store".into()));
        }
        for (p, g) in self.params.iter_mut().zip(&grads.bufs) {
            for (a, b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        self.accumulated = true;
        Ok(())
    }

    /// Flat copy of every value, in registration order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        if flat.len() != self.n_scalars() {
            return Err(NeuralError::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_scalars()
            )));
        }
        let mut off = 0;
        for p in &mut self.params {
            let n = p.len();
            p.value.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn records(&self) -> Vec<ParamRecord> {
        self.params
            .iter()
            .map(|p| ParamRecord {
                name: p.name.clone(),
                shape: [p.rows, p.cols],
                values: p.value.clone(),
            })
            .collect()
    }

    /// Overwrites values from `records`, which must name and shape every
    /// parameter exactly.
    pub fn load_records(&mut self, records: &[ParamRecord]) -> Result<(), NeuralError> {
        if records.len() != self.params.len() {
            return Err(NeuralError::Shape(format!(
                "{} stored parameters, model has {}",
                records.len(),
                self.params.len()
            )));
        }
        for (p, r) in self.params.iter().zip(records) {
            if p.name != r.name || [p.rows, p.cols] != r.shape || r.values.len() != p.len() {
                return Err(NeuralError::Shape(format!(
                    "parameter {:?} {:?} does not match stored {:?} {:?}",
                    p.name,
                    [p.rows, p.cols],
                    r.name,
                    r.shape
                )));
            }
        }
        for (p, r) in self.params.iter_mut().zip(records) {
            p.value.copy_from_slice(&r.values);
        }
        Ok(())
    }
}

/// Gradient scratch space, one buffer per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.bufs[id.0]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.bufs.iter_mut().flatten().for_each(|g| *g *= k);
    }
}

/// Serialized parameter: name, shape and row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    #[serde(with = "crate::decimal::vec")]
    pub values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_accumulation_is_refused() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParameterStore::new();
        let id = store.add("w", 2, 2, Init::Uniform(0.5), &mut rng);
        let mut g = store.gradient_buffer();
        g.get_mut(id)[0] = 1.0;
        store.accumulate(&g).unwrap();
        assert!(matches!(store.accumulate(&g), Err(NeuralError::DoubleAccumulation)));
        store.zero_grads();
        assert!(store.grad(id).iter().all(|&v| v == 0.0));
        store.accumulate(&g).unwrap();
        assert_eq!(store.grad(id)[0], 1.0);
    }

    #[test]
    fn uniform_init_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParameterStore::new();
        let id = store.add("w", 10, 10, Init::Uniform(0.25), &mut rng);
        assert!(store.value(id).iter().all(|v| v.abs() <= 0.25));
        let b = store.add("b", 10, 1, Init::Zeros, &mut rng);
        assert!(store.value(b).iter().all(|&v| v == 0.0));
    }
}
