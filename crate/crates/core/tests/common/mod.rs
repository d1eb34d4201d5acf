//! Shared test support: random small datasets, a central finite-difference
//! gradient checker, and straight-line reference implementations of the
//! recurrent cells written independently of the library's packed kernels.
#![allow(dead_code)]

pub mod oracle;

use std::fmt::Write as _;
use std::sync::Arc;

use leadtime::eventlog::{parse_log, Schema};
use leadtime::features::{encode_dataset, fit_encoder, parse_statics, Dataset, EncodedCase, Task};
use leadtime::neural::ParameterStore;
use leadtime::{ModelConfig, Predictor};
use rand::Rng;

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Worst relative error between `analytic` and central differences of
/// `loss` over every scalar of every parameter. Returns the error and the
/// offending parameter name.
pub fn fd_check<F>(store: &mut ParameterStore, analytic: &[f64], mut loss: F) -> (f64, String)
where
    F: FnMut(&ParameterStore) -> f64,
{
    let ids: Vec<_> = store.ids().collect();
    let mut worst = (0.0, String::new());
    let mut offset = 0;
    for id in ids {
        let name = store.param(id).name.clone();
        for k in 0..store.value(id).len() {
            let orig = store.value(id)[k];
            store.value_mut(id)[k] = orig + FD_EPS;
            let up = loss(store);
            store.value_mut(id)[k] = orig - FD_EPS;
            let down = loss(store);
            store.value_mut(id)[k] = orig;
            let numeric = (up - down) / (2.0 * FD_EPS);
            let e = rel_err(analytic[offset + k], numeric);
            if e > worst.0 {
                worst = (e, format!("{name}[{k}] analytic {} numeric {numeric}", analytic[offset + k]));
            }
        }
        offset += store.value(id).len();
    }
    worst
}

/// A random dataset of short traces with one numeric and one categorical
/// dynamic attribute and a mixed static table, built from CSV text.
pub fn random_dataset<R: Rng>(rng: &mut R, n_cases: usize, max_len: usize) -> Dataset {
    let mut log = String::from("case_id,activity,timestamp,d_load,d_crew\n");
    let mut statics = String::from("case_id,s_size,s_kind,y_production,y_postprocessing,y_procurement\n");
    let acts = ["cut", "weld", "inspect", "ship"];
    let crews = ["red", "blue", "green"];
    let kinds = ["k1", "k2", "k3"];
    for c in 0..n_cases {
        let len = rng.gen_range(1..=max_len);
        let mut t = 1_700_000_000i64 + rng.gen_range(0..10_000_000);
        for _ in 0..len {
            let dt = chrono::DateTime::from_timestamp(t, 0).unwrap();
            let _ = writeln!(
                log,
                "c{c},{},{},{:.3},{}",
                acts[rng.gen_range(0..acts.len())],
                dt.format("%Y-%m-%dT%H:%M:%SZ"),
                rng.gen_range(0.0..10.0),
                if rng.gen_bool(0.2) { "" } else { crews[rng.gen_range(0..crews.len())] },
            );
            t += rng.gen_range(60..400_000);
        }
        let prod: f64 = rng.gen_range(1.0..20.0);
        let post: f64 = rng.gen_range(1.0..10.0);
        let _ = writeln!(
            statics,
            "c{c},{:.2},{},{prod},{post},{}",
            rng.gen_range(10.0..500.0),
            kinds[rng.gen_range(0..kinds.len())],
            prod + post
        );
    }
    let log = parse_log(log.as_bytes(), &Schema::default()).unwrap();
    let statics = parse_statics(statics.as_bytes()).unwrap();
    Dataset::join(&log, &statics).unwrap()
}

/// Builds a predictor for `config` with an encoder fitted on `data`, and
/// the encoded cases for `task`.
pub fn predictor_for(data: &Dataset, config: ModelConfig, task: Task) -> (Predictor, Vec<EncodedCase>) {
    let encoder = Arc::new(fit_encoder(data).unwrap());
    let encoded = encode_dataset(data, &encoder, task, config.variant.blocks()).unwrap();
    let p = Predictor::build(config, encoder, task).unwrap();
    (p, encoded.cases)
}

/// Moves every parameter away from its initialization so that biases and
/// gates are exercised away from zero.
pub fn jitter<R: Rng>(store: &mut ParameterStore, rng: &mut R, scale: f64) {
    for p in store.iter_mut() {
        for v in p.value.iter_mut() {
            *v += rng.gen_range(-scale..scale);
        }
    }
}

// ---------------------------------------------------------------------------
// Reference cells. Weights are given per gate as row-major matrices.

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `M v` for an `rows × v.len()` row-major matrix.
fn mv(m: &[f64], v: &[f64]) -> Vec<f64> {
    let cols = v.len();
    m.chunks(cols).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Slices gate `g` out of a packed `(gates·h) × cols` matrix.
pub fn gate(packed: &[f64], g: usize, h: usize, cols: usize) -> &[f64] {
    &packed[g * h * cols..(g + 1) * h * cols]
}

pub struct RefLstm<'a> {
    pub wi: &'a [f64],
    pub wf: &'a [f64],
    pub wo: &'a [f64],
    pub wc: &'a [f64],
    pub ui: &'a [f64],
    pub uf: &'a [f64],
    pub uo: &'a [f64],
    pub uc: &'a [f64],
    pub bi: &'a [f64],
    pub bf: &'a [f64],
    pub bo: &'a [f64],
    pub bc: &'a [f64],
}

impl RefLstm<'_> {
    /// i = σ(W_i x + U_i h + b_i), f, o likewise, c̃ = tanh(W_c x + U_c h + b_c),
    /// c' = f ⊙ c + i ⊙ c̃, h' = o ⊙ tanh(c').
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pre = |w: &[f64], u: &[f64], b: &[f64]| -> Vec<f64> {
            let a = mv(w, x);
            let r = mv(u, h);
            (0..b.len()).map(|k| a[k] + r[k] + b[k]).collect()
        };
        let i: Vec<f64> = pre(self.wi, self.ui, self.bi).into_iter().map(sig).collect();
        let f: Vec<f64> = pre(self.wf, self.uf, self.bf).into_iter().map(sig).collect();
        let o: Vec<f64> = pre(self.wo, self.uo, self.bo).into_iter().map(sig).collect();
        let ct: Vec<f64> = pre(self.wc, self.uc, self.bc).into_iter().map(f64::tanh).collect();
        let c_new: Vec<f64> = (0..c.len()).map(|k| f[k] * c[k] + i[k] * ct[k]).collect();
        let h_new = (0..c.len()).map(|k| o[k] * c_new[k].tanh()).collect();
        (h_new, c_new)
    }
}

pub struct RefGru<'a> {
    pub wz: &'a [f64],
    pub wr: &'a [f64],
    pub wn: &'a [f64],
    pub uz: &'a [f64],
    pub ur: &'a [f64],
    pub un: &'a [f64],
    pub bz: &'a [f64],
    pub br: &'a [f64],
    pub bn: &'a [f64],
}

impl RefGru<'_> {
    /// z = σ(W_z x + U_z h + b_z), r likewise,
    /// n = tanh(W_n x + b_n + U_n (r ⊙ h)), h' = z ⊙ h + (1 − z) ⊙ n.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let wz = mv(self.wz, x);
        let uz = mv(self.uz, h);
        let wr = mv(self.wr, x);
        let ur = mv(self.ur, h);
        let z: Vec<f64> = (0..h.len()).map(|k| sig(wz[k] + uz[k] + self.bz[k])).collect();
        let r: Vec<f64> = (0..h.len()).map(|k| sig(wr[k] + ur[k] + self.br[k])).collect();
        let rh: Vec<f64> = (0..h.len()).map(|k| r[k] * h[k]).collect();
        let wn = mv(self.wn, x);
        let un = mv(self.un, &rh);
        (0..h.len())
            .map(|k| {
                let n = (wn[k] + self.bn[k] + un[k]).tanh();
                z[k] * h[k] + (1.0 - z[k]) * n
            })
            .collect()
    }
}

/// h' = tanh(W x + U h + b).
pub fn ref_rnn_step(w: &[f64], u: &[f64], b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
    let a = mv(w, x);
    let r = mv(u, h);
    (0..b.len()).map(|k| (a[k] + r[k] + b[k]).tanh()).collect()
}

// ---------------------------------------------------------------------------
// Gradient checks

fn flat(store: &ParameterStore, grads: &leadtime::neural::Gradients) -> Vec<f64> {
    store.ids().flat_map(|id| grads.get(id).to_vec()).collect()
}

/// Checks every parameter of a small predictor on a batch of short traces.
pub fn check_predictor_gradients(seed: u64, config: ModelConfig) -> (f64, String) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = random_dataset(&mut rng, 4, 5);
    let task = Task::ALL[(seed % 3) as usize];
    let (mut p, cases) = predictor_for(&data, ModelConfig { seed, ..config }, task);
    jitter(&mut p.store, &mut rng, 0.3);
    let batch: Vec<&EncodedCase> = cases.iter().collect();
    let tape = p.forward_batch(&batch).unwrap();
    let analytic = flat(&p.store, &p.gradients(&tape));
    let mut store = p.store.clone();
    let mut q = p.clone();
    fd_check(&mut store, &analytic, |s| {
        q.store.clone_from(s);
        q.forward_batch(&batch).unwrap().loss
    })
}

/// Checks a standalone static MLP under a squared-error loss.
pub fn check_mlp_gradients(seed: u64) -> (f64, String) {
    use leadtime::neural::{mse_loss, Mlp};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d_in = rng.gen_range(2..=6);
    let dims = [d_in, rng.gen_range(2..=6), rng.gen_range(2..=6), rng.gen_range(1..=3)];
    let mut store = ParameterStore::new();
    let mlp = Mlp::new(&mut store, &mut rng, "mlp", &dims).unwrap();
    jitter(&mut store, &mut rng, 0.2);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..d_in).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let ys: Vec<Vec<f64>> = (0..3).map(|_| (0..dims[3]).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let loss = |s: &ParameterStore| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(x, y)| mse_loss(mlp.forward(s, x).unwrap().output(), y).unwrap().0)
            .sum()
    };
    let mut grads = store.gradient_buffer();
    for (x, y) in xs.iter().zip(&ys) {
        let tr = mlp.forward(&store, x).unwrap();
        let (_, d) = mse_loss(tr.output(), y).unwrap();
        mlp.backward(&store, &tr, &d, &mut grads);
    }
    let analytic = flat(&store, &grads);
    fd_check(&mut store, &analytic, loss)
}

/// Checks a fusion head over `[h_s | h_fwd | h_bwd]` with a scalar output.
pub fn check_fusion_gradients(seed: u64) -> (f64, String) {
    use leadtime::neural::{fusion_forward, fusion_input, mse_loss, Mlp};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (s, h) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
    let bi = seed.is_multiple_of(2);
    let width = s + h + if bi { h } else { 0 };
    let mut store = ParameterStore::new();
    let hidden = rng.gen_range(2..=6);
    let head = Mlp::new(&mut store, &mut rng, "fc", &[width, hidden, 1]).unwrap();
    jitter(&mut store, &mut rng, 0.2);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let (hs, hf, hb) = (draw(s), draw(h), if bi { draw(h) } else { Vec::new() });
    let target = draw(1)[0];
    let loss = |st: &ParameterStore| {
        let p = fusion_forward(st, &hs, &hf, &hb, &head).unwrap();
        (p - target).powi(2)
    };
    let tr = head.forward(&store, &fusion_input(&hs, &hf, &hb)).unwrap();
    let (_, d) = mse_loss(tr.output(), &[target]).unwrap();
    let mut grads = store.gradient_buffer();
    head.backward(&store, &tr, &d, &mut grads);
    let analytic = flat(&store, &grads);
    fd_check(&mut store, &analytic, loss)
}
