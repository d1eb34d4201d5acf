use rand::Rng;

use super::params::{Gradients, Init, ParamId, ParameterStore};
use super::tensor::{add_matvec, add_matvec_t, add_outer};
use super::NeuralError;

/// Affine map `y = W x + b`, `W` of shape `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        rng: &mut R,
        prefix: &str,
        inputs: usize,
        outputs: usize,
    ) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let w = store.add(format!("{prefix}.W"), outputs, inputs, Init::Uniform(bound), rng);
        let b = store.add(format!("{prefix}.b"), outputs, 1, Init::Zeros, rng);
        Self { inputs, outputs, w, b }
    }

    pub fn forward(&self, store: &ParameterStore, x: &[f64]) -> Vec<f64> {
        let mut y = store.value(self.b).to_vec();
        add_matvec(&mut y, store.value(self.w), x);
        y
    }
}

/// Stack of [`Dense`] layers with ReLU between them and none after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Saved activations of one [`Mlp`] forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// `inputs[l]` is the input to layer `l`.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pub pre: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("non-empty mlp")
    }
}

impl Mlp {
    /// `dims` lists every width including the input, e.g. `[24, 8, 1]`.
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        rng: &mut R,
        prefix: &str,
        dims: &[usize],
    ) -> Result<Self, NeuralError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(NeuralError::Shape(format!(
                "mlp needs at least two positive widths, got {dims:?}"
            )));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| Dense::new(store, rng, &format!("{prefix}.{l}"), w[0], w[1]))
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn forward(&self, store: &ParameterStore, x: &[f64]) -> Result<MlpTrace, NeuralError> {
        if x.len() != self.input_dim() {
            return Err(NeuralError::Shape(format!(
                "mlp input has {} entries, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(store, &cur);
            inputs.push(cur);
            cur = if l + 1 < self.layers.len() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
        }
        Ok(MlpTrace { inputs, pre })
    }

    /// Adds parameter gradients for `d_out` and returns the input gradient.
    pub fn backward(
        &self,
        store: &ParameterStore,
        trace: &MlpTrace,
        d_out: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let mut d = d_out.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if l + 1 < self.layers.len() {
                for (dv, z) in d.iter_mut().zip(&trace.pre[l]) {
                    if *z <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
            add_outer(grads.get_mut(layer.w), &d, &trace.inputs[l]);
            grads
                .get_mut(layer.b)
                .iter_mut()
                .zip(&d)
                .for_each(|(g, v)| *g += v);
            let mut dx = vec![0.0; layer.inputs];
            add_matvec_t(&mut dx, store.value(layer.w), &d);
            d = dx;
        }
        d
    }
}

pub fn mlp_forward(store: &ParameterStore, x: &[f64], mlp: &Mlp) -> Result<Vec<f64>, NeuralError> {
    Ok(mlp.forward(store, x)?.output().to_vec())
}

/// Concatenates `[h_s | h_fwd | h_bwd]` in that fixed order. Either
/// recurrent part may be empty.
pub fn fusion_input(h_s: &[f64], h_fwd: &[f64], h_bwd: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(h_s.len() + h_fwd.len() + h_bwd.len());
    v.extend_from_slice(h_s);
    v.extend_from_slice(h_fwd);
    v.extend_from_slice(h_bwd);
    v
}

/// Scalar prediction of the fusion head over `[h_s | h_fwd | h_bwd]`.
pub fn fusion_forward(
    store: &ParameterStore,
    h_s: &[f64],
    h_fwd: &[f64],
    h_bwd: &[f64],
    head: &Mlp,
) -> Result<f64, NeuralError> {
    if head.output_dim() != 1 {
        return Err(NeuralError::Shape(format!(
            "fusion head must output one value, has {}",
            head.output_dim()
        )));
    }
    Ok(mlp_forward(store, &fusion_input(h_s, h_fwd, h_bwd), head)?[0])
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NeuralError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(NeuralError::Shape(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_final_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParameterStore::new();
        let mlp = Mlp::new(&mut store, &mut rng, "m", &[3, 4, 2]).unwrap();
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let last = mlp.layers.last().unwrap().b;
        store.value_mut(last).copy_from_slice(&[1.5, -2.0]);
        assert_eq!(mlp_forward(&store, &[9.0, -9.0, 1.0], &mlp).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn identity_layer_then_identity_applies_relu() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParameterStore::new();
        let mlp = Mlp::new(&mut store, &mut rng, "m", &[3, 3, 3]).unwrap();
        for layer in &mlp.layers {
            let w = store.value_mut(layer.w);
            w.fill(0.0);
            for k in 0..3 {
                w[k * 3 + k] = 1.0;
            }
        }
        let y = mlp_forward(&store, &[-1.0, 0.5, 2.0], &mlp).unwrap();
        assert_eq!(y, vec![0.0, 0.5, 2.0]);
    }

    #[test]
    fn fusion_order_matters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParameterStore::new();
        let head = Mlp::new(&mut store, &mut rng, "fc", &[4, 1]).unwrap();
        let a = fusion_forward(&store, &[1.0, 2.0], &[3.0], &[4.0], &head).unwrap();
        let b = fusion_forward(&store, &[3.0], &[1.0, 2.0], &[4.0], &head).unwrap();
        assert_ne!(a, b);
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let bias = head.layers[0].b;
        store.value_mut(bias)[0] = 0.25;
        assert_eq!(fusion_forward(&store, &[1.0, 2.0], &[3.0], &[4.0], &head).unwrap(), 0.25);
    }

    #[test]
    fn mse_values() {
        let (l, g) = mse_loss(&[2.0, 4.0], &[3.0, 3.0]).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g, vec![-1.0, 1.0]);
        assert!(mse_loss(&[], &[]).is_err());
    }
}
