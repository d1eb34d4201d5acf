//! Checks of library outputs against the reference cells and an
//! independent date-time library. Each returns the first mismatch found.

use leadtime::eventlog::{parse_log, Schema, Trace};
use leadtime::features::temporal_features;
use leadtime::neural::{
    gru_cell_forward, lstm_cell_forward, rnn_cell_forward, run_direction, CellState, CellType, CellWeights,
    Direction, Matrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gate, ref_rnn_step, RefGru, RefLstm};

pub const ORACLE_TOL: f64 = 1e-12;
pub const CELLS: [CellType; 3] = [CellType::Rnn, CellType::Lstm, CellType::Gru];

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Dense or one-hot-like sparse input.
fn input(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    if rng.gen_bool(0.5) {
        uniform(rng, d, 2.0)
    } else {
        (0..d).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect()
    }
}

struct Packed {
    w: Vec<f64>,
    u: Vec<f64>,
    b: Vec<f64>,
    d: usize,
    h: usize,
}

impl Packed {
    fn random(rng: &mut ChaCha8Rng, cell: CellType) -> Self {
        let d = rng.gen_range(1..=7);
        let h = rng.gen_range(1..=6);
        let g = cell.gates() * h;
        Self {
            w: uniform(rng, g * d, 1.0),
            u: uniform(rng, g * h, 1.0),
            b: uniform(rng, g, 1.0),
            d,
            h,
        }
    }

    fn weights(&self, cell: CellType) -> CellWeights<'_> {
        CellWeights::new(cell, &self.w, &self.u, &self.b, self.d, self.h).unwrap()
    }

    fn lstm(&self) -> RefLstm<'_> {
        let (d, h) = (self.d, self.h);
        RefLstm {
            wi: gate(&self.w, 0, h, d),
            wf: gate(&self.w, 1, h, d),
            wo: gate(&self.w, 2, h, d),
            wc: gate(&self.w, 3, h, d),
            ui: gate(&self.u, 0, h, h),
            uf: gate(&self.u, 1, h, h),
            uo: gate(&self.u, 2, h, h),
            uc: gate(&self.u, 3, h, h),
            bi: gate(&self.b, 0, h, 1),
            bf: gate(&self.b, 1, h, 1),
            bo: gate(&self.b, 2, h, 1),
            bc: gate(&self.b, 3, h, 1),
        }
    }

    fn gru(&self) -> RefGru<'_> {
        let (d, h) = (self.d, self.h);
        RefGru {
            wz: gate(&self.w, 0, h, d),
            wr: gate(&self.w, 1, h, d),
            wn: gate(&self.w, 2, h, d),
            uz: gate(&self.u, 0, h, h),
            ur: gate(&self.u, 1, h, h),
            un: gate(&self.u, 2, h, h),
            bz: gate(&self.b, 0, h, 1),
            br: gate(&self.b, 1, h, 1),
            bn: gate(&self.b, 2, h, 1),
        }
    }

    /// One step of the reference implementation; `c` is only used by LSTM.
    fn reference_step(&self, cell: CellType, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match cell {
            CellType::Lstm => self.lstm().step(x, h, c),
            CellType::Gru => (self.gru().step(x, h), c.to_vec()),
            CellType::Rnn => (ref_rnn_step(&self.w, &self.u, &self.b, x, h), c.to_vec()),
        }
    }
}

fn close(a: &[f64], b: &[f64], what: &str) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{what}: length {} vs {}", a.len(), b.len()));
    }
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > ORACLE_TOL {
            return Err(format!("{what}: {x} vs {y}"));
        }
    }
    Ok(())
}

/// Single library steps against the reference cell on `trials` random
/// weights, inputs and states.
pub fn check_cell_steps(cell: CellType, seed: u64, trials: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let p = Packed::random(&mut rng, cell);
        let x = input(&mut rng, p.d);
        let h = uniform(&mut rng, p.h, 1.0);
        let c = if cell == CellType::Lstm { uniform(&mut rng, p.h, 2.0) } else { vec![0.0; p.h] };
        let state = CellState { h: h.clone(), c: c.clone() };
        let w = p.weights(cell);
        let out = match cell {
            CellType::Lstm => lstm_cell_forward(&x, &state, &w).map(|(s, _)| s),
            CellType::Gru => gru_cell_forward(&x, &state, &w).map(|(s, _)| s),
            CellType::Rnn => rnn_cell_forward(&x, &state, &w),
        }
        .map_err(|e| e.to_string())?;
        let (rh, rc) = p.reference_step(cell, &x, &h, &c);
        close(&out.h, &rh, &format!("{cell:?} h"))?;
        if cell == CellType::Lstm {
            close(&out.c, &rc, "LSTM c")?;
        }
    }
    Ok(())
}

/// Unrolled forward runs against chained reference steps, and backward runs
/// against forward runs on the reversed sequence (exact equality).
pub fn check_unrolled_runs(cell: CellType, seed: u64, trials: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let p = Packed::random(&mut rng, cell);
        let n = rng.gen_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| input(&mut rng, p.d)).collect();
        let seq = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let w = p.weights(cell);
        let states = run_direction(&seq, &w, Direction::Forward).map_err(|e| e.to_string())?;
        let (mut h, mut c) = (vec![0.0; p.h], vec![0.0; p.h]);
        for (x, s) in rows.iter().zip(&states) {
            (h, c) = p.reference_step(cell, x, &h, &c);
            close(&s.h, &h, &format!("{cell:?} unrolled h"))?;
        }
        let back = run_direction(&seq, &w, Direction::Backward).map_err(|e| e.to_string())?;
        let fwd_rev = run_direction(&seq.reversed(), &w, Direction::Forward).map_err(|e| e.to_string())?;
        if back != fwd_rev {
            return Err(format!("{cell:?}: backward run differs from forward run on reversed input"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Temporal features against the `time` crate.

const FMT: &[time::format_description::FormatItem<'static>] =
    time::macros::format_description!("[year]-[month]-[day]T[hour]:[minute]:[second]Z");

fn oracle_unix(ts: &str) -> (i64, u8) {
    let t = time::PrimitiveDateTime::parse(ts, FMT).unwrap().assume_utc();
    (t.unix_timestamp(), t.weekday().number_days_from_monday())
}

fn random_stamp(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
        rng.gen_range(1995..2035),
        rng.gen_range(1..=12),
        rng.gen_range(1..=28),
        rng.gen_range(0..24),
        rng.gen_range(0..60),
        rng.gen_range(0..60)
    )
}

fn trace_from(stamps: &[String]) -> Trace {
    let mut csv = String::from("case_id,activity,timestamp\n");
    for (i, s) in stamps.iter().enumerate() {
        csv.push_str(&format!("c,a{i},{s}\n"));
    }
    parse_log(csv.as_bytes(), &Schema::default()).unwrap().traces.remove(0)
}

/// Elapsed, lagged and day-of-week on `traces` random traces against the
/// oracle, plus the exact prefix-sum identity and the first-event base case.
pub fn check_temporal_features(seed: u64, traces: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..traces {
        let n = rng.gen_range(1..=30);
        // Clustered stamps exercise ties and short gaps as well as long ones.
        let base = random_stamp(&mut rng);
        let stamps: Vec<String> = (0..n)
            .map(|_| if rng.gen_bool(0.2) { base.clone() } else { random_stamp(&mut rng) })
            .collect();
        let feats = temporal_features(&trace_from(&stamps));

        let mut oracle: Vec<(i64, u8)> = stamps.iter().map(|s| oracle_unix(s)).collect();
        oracle.sort_by_key(|o| o.0);
        let t0 = oracle[0].0;
        for (i, (f, (t, dow))) in feats.iter().zip(&oracle).enumerate() {
            let elapsed = (t - t0) as f64 / 86_400.0;
            let lagged = if i == 0 { 0.0 } else { (t - oracle[i - 1].0) as f64 / 86_400.0 };
            if (f.elapsed - elapsed).abs() > ORACLE_TOL {
                return Err(format!("elapsed {} vs {elapsed}", f.elapsed));
            }
            if (f.lagged - lagged).abs() > ORACLE_TOL {
                return Err(format!("lagged {} vs {lagged}", f.lagged));
            }
            if f.dow != *dow {
                return Err(format!("day of week {} vs {dow}", f.dow));
            }
        }
        if (feats[0].elapsed, feats[0].lagged) != (0.0, 0.0) {
            return Err("first event is not 0/0".into());
        }
        let mut running = 0i64;
        for f in &feats {
            running += f.lagged_seconds;
            if f.elapsed_seconds != running || f.elapsed != running as f64 / 86_400.0 {
                return Err(format!("prefix sum {running} vs elapsed {}", f.elapsed_seconds));
            }
        }
    }
    Ok(())
}

/// Shifting every timestamp by seven days leaves all features unchanged.
pub fn check_week_translation(seed: u64, traces: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..traces {
        let n = rng.gen_range(1..=20);
        let stamps: Vec<String> = (0..n).map(|_| random_stamp(&mut rng)).collect();
        let shifted: Vec<String> = stamps
            .iter()
            .map(|s| {
                let t = time::PrimitiveDateTime::parse(s, FMT).unwrap() + time::Duration::days(7);
                t.format(FMT).unwrap()
            })
            .collect();
        if temporal_features(&trace_from(&stamps)) != temporal_features(&trace_from(&shifted)) {
            return Err(format!("features changed under translation: {stamps:?}"));
        }
    }
    Ok(())
}
