//! End-to-end runs of the command-line interface.

use std::collections::BTreeMap;
use std::path::Path;

use leadtime::cli::{run, FileConfig};
use leadtime::trainer::{read_summary_csv, ResultTable};

fn leadtime(args: &[&str]) -> i32 {
    let mut all = vec!["leadtime"];
    all.extend_from_slice(args);
    run(all)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_then_validate_and_recount_raw_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(leadtime(&["synth", "--out", p(&data), "--n", "1000", "--seed", "7"]), 0);
    assert_eq!(leadtime(&["validate", "--log", p(&data.join("event_log.csv"))]), 0);

    // Independent group-by over the raw lines.
    let raw = std::fs::read_to_string(data.join("event_log.csv")).unwrap();
    let mut per_case: BTreeMap<&str, usize> = BTreeMap::new();
    for line in raw.lines().skip(1) {
        *per_case.entry(line.split(',').next().unwrap()).or_default() += 1;
    }
    assert_eq!(per_case.len(), 1000);
    assert!(per_case.values().all(|n| (18..=36).contains(n)));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("gen_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_events"].as_u64().unwrap() as usize, raw.lines().count() - 1);
    assert_eq!(manifest["config"]["seed"], 7);
}

#[test]
fn synth_output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(leadtime(&["synth", "--out", p(&a), "--n", "300", "--seed", "3"]), 0);
    assert_eq!(leadtime(&["--jobs", "2", "synth", "--out", p(&b), "--n", "300", "--seed", "3"]), 0);
    for f in ["event_log.csv", "static.csv", "ground_truth.csv", "gen_manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn train_eval_report_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(leadtime(&["synth", "--out", p(&data), "--n", "200", "--seed", "1"]), 0);
    let train = |out: &Path| {
        leadtime(&[
            "--deterministic",
            "--seed",
            "5",
            "train",
            "--data",
            p(&data),
            "--out",
            p(out),
            "--quick",
            "--epochs",
            "3",
            "--hidden",
            "6",
            "--cell",
            "gru",
        ])
    };
    let (r1, r2) = (dir.path().join("r1"), dir.path().join("r2"));
    assert_eq!(train(&r1), 0);
    assert_eq!(train(&r2), 0);
    for f in ["checkpoint.json", "history.csv", "encoder.json", "split.json", "metrics.json"] {
        assert_eq!(std::fs::read(r1.join(f)).unwrap(), std::fs::read(r2.join(f)).unwrap(), "{f}");
    }
    assert_eq!(leadtime(&["eval", "--data", p(&data), "--model", p(&r1), "--json"]), 0);
    assert_eq!(leadtime(&["eval", "--data", p(&data), "--model", p(&r1), "--partition", "nope"]), 2);

    let rep = dir.path().join("report");
    assert_eq!(leadtime(&["report", "--input", p(&r1), "--out", p(&rep)]), 0);
    let summary = std::fs::read_to_string(rep.join("summary.md")).unwrap();
    assert!(summary.contains("Best validation MAE"));
    assert!(rep.join("series_r1_history.csv").exists());
}

#[test]
fn featurize_writes_encoder_split_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("feat");
    assert_eq!(leadtime(&["synth", "--out", p(&data), "--n", "50"]), 0);
    assert_eq!(
        leadtime(&["featurize", "--data", p(&data), "--out", p(&out), "--variant", "no_trf"]),
        0
    );
    let cache: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("encoded.json")).unwrap()).unwrap();
    assert_eq!(cache.as_array().unwrap().len(), 50);
    let enc = leadtime::features::Encoder::from_json(&std::fs::read_to_string(out.join("encoder.json")).unwrap())
        .unwrap();
    let width = cache[0]["steps"][0].as_array().unwrap().len();
    assert_eq!(width, enc.step_dim(leadtime::features::TemporalBlocks::Omit));
}

#[test]
fn ablate_and_bench_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(leadtime(&["synth", "--out", p(&data), "--n", "60"]), 0);
    let common = ["--quick", "--epochs", "2", "--hidden", "3", "--seeds", "1", "--tasks", "procurement"];
    let abl = dir.path().join("abl");
    let mut args = vec!["ablate", "--data", p(&data), "--out", p(&abl)];
    args.extend_from_slice(&common);
    assert_eq!(leadtime(&args), 0);
    let md = std::fs::read_to_string(abl.join("ablation.md")).unwrap();
    for label in ["Full", "w/o TRF", "w/o EL"] {
        assert!(md.contains(&format!("| {label} |")), "{md}");
    }
    let bench = dir.path().join("bench");
    let mut args = vec!["bench", "--data", p(&data), "--out", p(&bench)];
    args.extend_from_slice(&common);
    assert_eq!(leadtime(&args), 0);
    let csv = std::fs::read_to_string(bench.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    let rep = dir.path().join("rep");
    assert_eq!(leadtime(&["report", "--input", p(&abl), "--input", p(&bench), "--out", p(&rep)]), 0);
    let series = read_summary_csv(std::fs::File::open(rep.join("series_abl_ablation.csv")).unwrap()).unwrap();
    assert_eq!(series.len(), 3);
    assert_eq!(series[0].method, "Full");
    let series = read_summary_csv(std::fs::File::open(rep.join("series_bench_bench.csv")).unwrap()).unwrap();
    assert_eq!(series.len(), 5);
    assert!(series.iter().all(|r| r.n_seeds == 1 && r.rmse >= r.mae));
}

#[test]
fn deterministic_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(leadtime(&["synth", "--out", p(&data), "--n", "40"]), 0);
    let bench = |out: &Path| {
        let args = [
            "--deterministic", "--seed", "4", "bench", "--data", p(&data), "--out", p(out), "--quick", "--epochs",
            "2", "--hidden", "3", "--seeds", "2", "--tasks", "procurement",
        ];
        assert_eq!(leadtime(&args), 0);
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    bench(&a);
    bench(&b);
    for f in ["bench.md", "bench.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let table = ResultTable::read_csv(std::fs::File::open(a.join("bench.csv")).unwrap(), "t").unwrap();
    assert_eq!(table.seeds(), [4, 5]);
    // Round trip through the table's own parser.
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    assert_eq!(buf, std::fs::read(a.join("bench.csv")).unwrap());
}

#[test]
fn checked_in_experiment_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path).unwrap();
            let cfg: FileConfig = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.experiment.train.validate().unwrap();
            cfg.experiment.model.validate().unwrap();
            cfg.gen.validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 2);
}

#[test]
fn failures_and_usage_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "case_id,activity,timestamp\nA,x,2024-01-02T00:00:00Z\nA,x,2024-01-02T00:00:00Z\n").unwrap();
    assert_eq!(leadtime(&["validate", "--log", p(&bad)]), 1);
    std::fs::write(&bad, "case_id,activity,timestamp\nA,x,yesterday\n").unwrap();
    assert_eq!(leadtime(&["validate", "--log", p(&bad)]), 1);
    assert_eq!(leadtime(&["validate"]), 2);
    assert_eq!(leadtime(&["train", "--out", p(dir.path())]), 2);
    assert_eq!(leadtime(&["synth", "--out", p(dir.path()), "--min-len", "40", "--max-len", "20"]), 2);
}
