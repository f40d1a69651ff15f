use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lcq_core::lc::{Trace, TraceRow};
use lcq_core::models::checkpoint::Checkpoint;
use serde_json::Value;
use tempfile::TempDir;

const SMALL_MLP: &str = r#"
task = "mlp_classify"
seed = 5

[data]
source = "synthetic"
n = 360
n_classes = 3
dim = 6
separation = 4.0

[model]
hidden = [5]
reference_epochs = 4

[sgd]
epochs = 1

[compress]
k = 2
iters = 3
mu0 = 0.001
growth = 1.5
"#;

const SMALL_REGRESSION: &str = r#"
task = "regression"
seed = 3

[data]
source = "synthetic"
n = 150
side = 8
noise_sigma = 0.05

[compress]
k = 2
iters = 4
"#;

fn lcq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcq"))
        .args(args)
        .env_remove("LCQ_DATA_DIR")
        .output()
        .expect("lcq runs")
}

fn ok(args: &[&str]) -> String {
    let out = lcq(args);
    assert!(
        out.status.success(),
        "lcq {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> Option<i32> {
    lcq(args).status.code()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn train(dir: &Path, config: &str, out: &str) -> PathBuf {
    let cfg = write_config(dir, &format!("{out}.toml"), config);
    let out = dir.join(out);
    ok(&["train", "--config", s(&cfg), "--out", s(&out)]);
    out
}

#[test]
fn train_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = train(tmp.path(), SMALL_MLP, "a");
    let b = train(tmp.path(), SMALL_MLP, "b");
    assert_eq!(fs::read(a.join("reference.lcqk")).unwrap(), fs::read(b.join("reference.lcqk")).unwrap());
    let ck = Checkpoint::load(&a.join("reference.lcqk")).unwrap();
    assert!(ck.quant.iter().all(Option::is_none));
}

#[test]
fn other_seed_gives_other_weights() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL_MLP);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["train", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["train", "--config", s(&cfg), "--out", s(&b), "--seed", "6"]);
    assert_ne!(fs::read(a.join("reference.lcqk")).unwrap(), fs::read(b.join("reference.lcqk")).unwrap());
}

#[test]
fn separable_classes_are_fit_exactly() {
    let tmp = TempDir::new().unwrap();
    let cfg = SMALL_MLP.replace("n_classes = 3", "n_classes = 2").replace("separation = 4.0", "separation = 40.0");
    let out = train(tmp.path(), &cfg, "sep");
    let v = json(&out.join("reference.json"));
    assert_eq!(v["evaluation"]["err_train"].as_f64(), Some(0.0));
    assert_eq!(v["provenance"]["data_source"], "synthetic");
}

#[test]
fn noiseless_regression_fits_better_than_noisy() {
    let tmp = TempDir::new().unwrap();
    let loss = |sigma: &str, name: &str| {
        let out = train(tmp.path(), &SMALL_REGRESSION.replace("noise_sigma = 0.05", sigma), name);
        json(&out.join("reference.json"))["evaluation"]["loss_train"].as_f64().unwrap()
    };
    let clean = loss("noise_sigma = 0.0", "clean");
    let noisy = loss("noise_sigma = 0.3", "noisy");
    assert!(clean >= 0.0 && clean < noisy, "clean {clean}, noisy {noisy}");
}

fn check_compressed(out: &Path, method: &str, k: usize) -> Value {
    let ck = Checkpoint::load(&out.join(format!("{method}.lcqk"))).unwrap();
    for (q, w) in ck.quant.iter().zip(&ck.params.layers) {
        if let Some(q) = q {
            assert!(q.codebook().len() <= k);
            let values = q.codebook().values();
            assert!(w.weights.iter().all(|x| values.contains(x)));
        }
    }
    let mut bytes = Vec::new();
    ck.write_to(&mut bytes).unwrap();
    assert_eq!(bytes, fs::read(out.join(format!("{method}.lcqk"))).unwrap());

    let rows = Trace::read_csv(fs::File::open(out.join(format!("{method}_trace.csv"))).unwrap()).unwrap();
    let v = json(&out.join(format!("{method}_trace.json")));
    let trace: Trace = serde_json::from_value(v["trace"].clone()).unwrap();
    assert_eq!(trace.method, method);
    assert_eq!(rows, trace.records.iter().map(TraceRow::from).collect::<Vec<_>>());
    assert!(v["provenance"]["command"].as_str().unwrap().starts_with(&format!("compress --method {method}")));

    let summary = json(&out.join(format!("{method}_summary.json")));
    assert_eq!(summary["method"], method);
    assert_eq!(summary["iterations"].as_u64().unwrap() as usize + 1, rows.len());
    summary
}

#[test]
fn compress_writes_every_method() {
    let tmp = TempDir::new().unwrap();
    let out = train(tmp.path(), SMALL_MLP, "run");
    let cfg = tmp.path().join("run.toml");
    let weights = out.join("reference.lcqk");
    for method in ["dc", "idc", "lc"] {
        let stdout = ok(&["compress", "--config", s(&cfg), "--out", s(&out), "--method", method, "--weights", s(&weights)]);
        assert!(stdout.contains("ratio x"));
        let summary = check_compressed(&out, method, 2);
        let rows = summary["iterations"].as_u64().unwrap();
        match method {
            "dc" => assert_eq!(rows, 0),
            _ => assert_eq!(rows, 3),
        }
    }
    let report = ok(&["report", s(&out)]);
    for name in ["reference.lcqk", "lc.lcqk", "lc_trace.csv", "idc_summary.json"] {
        assert!(report.contains(name), "report misses {name}:\n{report}");
    }
}

#[test]
fn compress_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL_MLP);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["compress", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["compress", "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(fs::read(a.join("lc.lcqk")).unwrap(), fs::read(b.join("lc.lcqk")).unwrap());
    let losses = |d: &Path| -> Vec<f64> {
        Trace::read_csv(fs::File::open(d.join("lc_trace.csv")).unwrap()).unwrap().iter().map(|r| r.loss_train).collect()
    };
    assert_eq!(losses(&a), losses(&b));
}

#[test]
fn idc_on_regression_stops_moving() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "r.toml", SMALL_REGRESSION);
    let out = tmp.path().join("r");
    ok(&["compress", "--config", s(&cfg), "--out", s(&out), "--method", "idc"]);
    let rows = Trace::read_csv(fs::File::open(out.join("idc_trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    for r in &rows[1..] {
        assert!((r.loss_train - rows[1].loss_train).abs() <= 1e-9 * rows[1].loss_train.max(1.0));
    }
    check_compressed(&out, "idc", 2);
}

#[test]
fn layer_wide_net_reports_expected_ratio() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"
task = "mlp_classify"
[data]
source = "synthetic"
n = 60
dim = 784
[model]
hidden = [300, 100]
reference_epochs = 1
"#;
    let cfg = write_config(tmp.path(), "wide.toml", cfg);
    let out = tmp.path().join("wide");
    let stdout = ok(&["compress", "--config", s(&cfg), "--out", s(&out), "--method", "dc", "--K", "2"]);
    assert!(stdout.contains("ratio x30.5"), "{stdout}");
    let stats = &json(&out.join("dc_summary.json"))["stats"];
    assert_eq!(stats["p1"], 266200);
    assert_eq!(stats["p0"], 410);
}

fn quantize(dir: &Path, weights: &str, extra: &[&str]) -> Value {
    let input = dir.join("w.txt");
    fs::write(&input, weights).unwrap();
    let out = dir.join(format!("q{}.txt", extra.join("_").replace([':', ','], "")));
    let mut args = vec!["quantize", "--weights", s(&input), "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    let values: Vec<f64> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.parse().unwrap())
        .collect();
    let report = json(&out.with_extension("json"));
    let codebook: Vec<f64> = serde_json::from_value(report["values"].clone()).unwrap();
    assert!(values.iter().all(|v| codebook.contains(v)));
    serde_json::json!({ "values": values, "codebook": codebook, "report": report })
}

#[test]
fn quantize_binary_gives_signs() {
    let tmp = TempDir::new().unwrap();
    let q = quantize(tmp.path(), "0.3 -0.2, 1.5\n-4 0 # tail\n", &["--scheme", "binary"]);
    let values: Vec<f64> = serde_json::from_value(q["values"].clone()).unwrap();
    assert_eq!(values, vec![1.0, -1.0, 1.0, -1.0, 1.0]);
}

#[test]
fn quantize_adaptive_uses_at_most_k_values() {
    let tmp = TempDir::new().unwrap();
    let w: Vec<String> = (0..50).map(|i| format!("{}", ((i * 37) % 23) as f64 * 0.1 - 1.0)).collect();
    let q = quantize(tmp.path(), &w.join("\n"), &["--scheme", "adaptive", "--K", "4"]);
    let codebook: Vec<f64> = serde_json::from_value(q["codebook"].clone()).unwrap();
    assert!(codebook.len() <= 4 && !codebook.is_empty());
    assert_eq!(q["report"]["stats"]["p1"], 50);
}

#[test]
fn quantize_powers_of_two() {
    let tmp = TempDir::new().unwrap();
    let q = quantize(tmp.path(), "0.3 -0.7 0.01 3.0 -0.06", &["--scheme", "pow2:5"]);
    let codebook: Vec<f64> = serde_json::from_value(q["codebook"].clone()).unwrap();
    assert!(codebook.contains(&0.0));
    for v in codebook.iter().filter(|v| **v != 0.0) {
        let e = v.abs().log2();
        assert!(e.fract() == 0.0 && (-5.0..=0.0).contains(&e), "{v}");
    }
}

#[test]
fn sweep_single_cell() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{SMALL_MLP}\n[sweep]\nhidden = [3]\nlog2_k = [1]\ninclude_reference = false\ntargets = [10.0]\n");
    let cfg = write_config(tmp.path(), "s.toml", &cfg);
    let out = tmp.path().join("s");
    ok(&["sweep", "--config", s(&cfg), "--out", s(&out)]);
    let rows: Vec<&str> = fs::read_to_string(out.join("sweep.csv")).unwrap().leak().lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2, "{rows:?}");
    let v = json(&out.join("sweep.json"));
    assert_eq!(v["cells"].as_array().unwrap().len(), 1);
    assert_eq!(v["operational_points"].as_array().unwrap().len(), 1);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "bogus = 1\n");
    assert_eq!(code(&["train", "--config", s(&bad)]), Some(2));
    let cfg = write_config(tmp.path(), "c.toml", SMALL_MLP);
    assert_eq!(code(&["compress", "--config", s(&cfg), "--K", "0", "--out", s(&tmp.path().join("o"))]), Some(2));
    let w = write_config(tmp.path(), "w.txt", "1 2 3");
    assert_eq!(code(&["quantize", "--weights", s(&w), "--scheme", "pow2:x"]), Some(2));
    let idx = SMALL_MLP.replace("source = \"synthetic\"", "source = \"idx\"");
    let idx = write_config(tmp.path(), "idx.toml", &idx);
    assert_eq!(code(&["train", "--config", s(&idx)]), Some(2));
}

#[test]
fn mismatched_weights_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = train(tmp.path(), SMALL_MLP, "m");
    let other = write_config(tmp.path(), "o.toml", &SMALL_MLP.replace("hidden = [5]", "hidden = [4]"));
    let weights = out.join("reference.lcqk");
    assert_eq!(code(&["compress", "--config", s(&other), "--weights", s(&weights), "--out", s(&out)]), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&["train", "--config", s(&tmp.path().join("missing.toml"))]), Some(3));
    let garbage = write_config(tmp.path(), "g.lcqk", "not a checkpoint");
    let cfg = write_config(tmp.path(), "c.toml", SMALL_MLP);
    assert_eq!(code(&["compress", "--config", s(&cfg), "--weights", s(&garbage)]), Some(3));
    let w = write_config(tmp.path(), "w.txt", "1 two 3");
    assert_eq!(code(&["quantize", "--weights", s(&w)]), Some(3));
    let idx = SMALL_MLP.replace("source = \"synthetic\"", &format!("source = \"idx\"\ndir = {:?}", s(tmp.path())));
    let idx = write_config(tmp.path(), "idx.toml", &idx);
    assert_eq!(code(&["train", "--config", s(&idx)]), Some(3));
}

#[test]
fn divergence_exits_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = SMALL_MLP.replace("[sgd]\n", "[sgd]\nlr = 1e300\n").replace("hidden = [5]", "hidden = [5]\nactivation = \"relu\"");
    let cfg = write_config(tmp.path(), "d.toml", &cfg);
    let out = lcq(&["train", "--config", s(&cfg), "--out", s(&tmp.path().join("d"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_idx(dir: &Path, prefix: &str, n: usize, side: usize, seed: u32) {
    let mut images = vec![0, 0, 8, 3];
    for d in [n, side, side] {
        images.extend_from_slice(&(d as u32).to_be_bytes());
    }
    let mut labels = vec![0, 0, 8, 1];
    labels.extend_from_slice(&(n as u32).to_be_bytes());
    let mut state = seed;
    for i in 0..n {
        let label = (i % 3) as u8;
        labels.push(label);
        for p in 0..side * side {
            state = state.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            let base = if p % 3 == label as usize { 200 } else { 20 };
            images.push(base + (state >> 28) as u8);
        }
    }
    fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
    fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
}

#[test]
fn data_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    write_idx(&data, "train", 90, 4, 1);
    write_idx(&data, "t10k", 30, 4, 2);
    let cfg = write_config(tmp.path(), "c.toml", &SMALL_MLP.replace("source = \"synthetic\"", "source = \"auto\""));
    let run = |out: &str, env: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_lcq"));
        c.args(["train", "--config", s(&cfg), "--out", s(&tmp.path().join(out))]).env_remove("LCQ_DATA_DIR");
        if let Some(d) = env {
            c.env("LCQ_DATA_DIR", d);
        }
        assert!(c.status().unwrap().success());
        let v = json(&tmp.path().join(out).join("reference.json"));
        (v["provenance"]["data_source"].as_str().unwrap().to_string(), v["n_params"].as_u64().unwrap())
    };
    let (source, n_params) = run("idx", Some(&data));
    assert!(source.starts_with("idx:"), "{source}");
    assert_eq!(n_params, 16 * 5 + 5 + 5 * 3 + 3);
    let (source, _) = run("fallback", Some(&tmp.path().join("nowhere")));
    assert_eq!(source, "synthetic");
}
