use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use lcq_core::lc::{compression_stats, idc_run, lc_run, Compressed, Compressor, LcError, NoHooks, QuantScheme, Trace};
use lcq_core::models::checkpoint::{Checkpoint, ModelKind};
use lcq_core::models::{Activation, Evaluation, LayerShape, Layout, Params};
use lcq_core::sweep::{run_sweep, select_operational_point, write_sweep_csv, SweepCell};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{parse_quantizer, Method, RunConfig, Task};
use crate::data::{describe_source, load_classes, prepare};
use crate::error::CliError;

/// Written into every output so a result can be traced to its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_file: Option<PathBuf>,
    pub data_source: Option<String>,
    pub config: Option<RunConfig>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: "lcq".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_file: None,
            data_source: None,
            config: None,
        }
    }

    pub fn for_run(command: &str, cfg: &RunConfig, config_file: Option<&Path>) -> Result<Self, CliError> {
        Ok(Self {
            config_file: config_file.map(Path::to_path_buf),
            data_source: Some(describe_source(cfg)?),
            config: Some(cfg.clone()),
            ..Self::new(command, cfg.seed)
        })
    }

    fn csv_comment(&self) -> String {
        format!("# provenance: {}\n", serde_json::to_string(self).expect("provenance serializes"))
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_trace(dir: &Path, name: &str, trace: &Trace, prov: &Provenance) -> Result<(), CliError> {
    let mut csv = prov.csv_comment().into_bytes();
    trace.write_csv(&mut csv).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&dir.join(format!("{name}_trace.csv")), &csv)?;
    write_json(&dir.join(format!("{name}_trace.json")), &json!({ "provenance": prov, "trace": trace }))
}

fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CliError> {
    let mut buf = Vec::new();
    ck.write_to(&mut buf)?;
    write_file(path, &buf)
}

fn eval_line(e: &Evaluation) -> String {
    let mut s = format!("train loss {:.6}", e.loss_train);
    if let Some(l) = e.loss_test {
        let _ = write!(s, ", test loss {l:.6}");
    }
    if let Some(x) = e.err_train {
        let _ = write!(s, ", train error {x:.2}%");
    }
    if let Some(x) = e.err_test {
        let _ = write!(s, ", test error {x:.2}%");
    }
    s
}

pub fn train(cfg: &RunConfig, config_file: Option<&Path>) -> Result<(), CliError> {
    let prov = Provenance::for_run("train", cfg, config_file)?;
    let prepared = prepare(cfg)?;
    let m = prepared.model();
    let reference = m.fit_reference(&prepared.init())?;
    let evaluation = m.evaluate(&reference);
    create_dir(&cfg.out)?;
    let path = cfg.out.join("reference.lcqk");
    save_checkpoint(&path, &Checkpoint::unquantized(prepared.kind(), m.layout().clone(), reference))?;
    write_json(
        &cfg.out.join("reference.json"),
        &json!({ "provenance": prov, "checkpoint": path, "n_params": m.layout().n_params(), "evaluation": evaluation }),
    )?;
    println!("reference: {}", eval_line(&evaluation));
    println!("wrote {}", path.display());
    Ok(())
}

fn load_reference(path: &Path, kind: ModelKind, layout: &Layout) -> Result<Params, CliError> {
    let ck = Checkpoint::load(path).map_err(|e| CliError::io(path, e))?;
    if ck.kind != kind || ck.layout != *layout {
        return Err(CliError::Config(format!(
            "{} holds a {:?} model with a different layout than the configured {:?} model",
            path.display(),
            ck.kind,
            kind
        )));
    }
    Ok(ck.params)
}

pub fn compress(cfg: &RunConfig, config_file: Option<&Path>, weights: Option<&Path>) -> Result<(), CliError> {
    let method = cfg.compress.method;
    let mut prov = Provenance::for_run(&format!("compress --method {}", method.name()), cfg, config_file)?;
    if let Some(w) = weights {
        prov.command.push_str(&format!(" --weights {}", w.display()));
    }
    let prepared = prepare(cfg)?;
    let m = prepared.model();
    let layout = m.layout().clone();
    let scheme = cfg.scheme(&layout)?;
    scheme.validate(&layout)?;
    create_dir(&cfg.out)?;
    let reference = match weights {
        Some(p) => load_reference(p, prepared.kind(), &layout)?,
        None => {
            let r = m.fit_reference(&prepared.init())?;
            let path = cfg.out.join("reference.lcqk");
            save_checkpoint(&path, &Checkpoint::unquantized(prepared.kind(), layout.clone(), r.clone()))?;
            println!("reference: {}", eval_line(&m.evaluate(&r)));
            r
        }
    };

    let name = method.name();
    let result = match method {
        Method::Dc => idc_run(m, &reference, &scheme, 0, cfg.seed).map(|(c, mut t)| {
            t.method = "dc".into();
            (c, t, None, 0)
        }),
        Method::Idc => idc_run(m, &reference, &scheme, cfg.schedule().max_outer_iters, cfg.seed).map(|(c, t)| {
            let last = t.records.len() - 1;
            (c, t, None, last)
        }),
        Method::Lc => lc_run(m, &reference, &scheme, &cfg.lc_config(), &mut NoHooks)
            .map(|o| (o.model, o.trace, Some(o.converged), o.selected_iter)),
    };
    let (model, trace, converged, selected_iter): (Compressed, Trace, Option<bool>, usize) = match result {
        Ok(r) => r,
        Err(LcError::Diverged { iter, trace }) => {
            write_trace(&cfg.out, name, &trace, &prov)?;
            return Err(LcError::Diverged { iter, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };

    let stats = scheme.stats(&layout, &model.quant, cfg.compress.float_bits);
    let ck = Checkpoint::quantized(prepared.kind(), layout, model.params.clone(), model.quant.clone())?;
    let path = cfg.out.join(format!("{name}.lcqk"));
    save_checkpoint(&path, &ck)?;
    write_trace(&cfg.out, name, &trace, &prov)?;
    write_json(
        &cfg.out.join(format!("{name}_summary.json")),
        &json!({
            "provenance": prov,
            "method": name,
            "scheme": scheme,
            "checkpoint": path,
            "evaluation": model.evaluation,
            "converged": converged,
            "selected_iter": selected_iter,
            "iterations": trace.records.len() - 1,
            "stats": stats,
        }),
    )?;

    println!("{name}: {}", eval_line(&model.evaluation));
    if let Some(c) = converged {
        println!("{name}: {} after {} iterations, reporting iteration {selected_iter}", if c { "converged" } else { "not converged" }, trace.records.len() - 1);
    }
    println!(
        "compression: {} -> {} bits, ratio x{:.1} (P1 = {}, P0 = {}, b = {})",
        stats.bits_reference, stats.bits_quantized, stats.rho, stats.p1, stats.p0, stats.float_bits
    );
    println!("wrote {}", path.display());
    Ok(())
}

/// Reads numbers separated by whitespace or commas; `#` starts a comment.
pub fn parse_weights(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| format!("line {}: `{tok}` is not a number", n + 1))?;
            if !v.is_finite() {
                return Err(format!("line {}: `{tok}` is not finite", n + 1));
            }
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err("no weights found".into());
    }
    Ok(out)
}

pub struct QuantizeArgs<'a> {
    pub weights: &'a Path,
    pub scheme: &'a str,
    pub k: usize,
    pub out: Option<&'a Path>,
    pub seed: u64,
    pub float_bits: u32,
}

pub fn quantize(a: &QuantizeArgs) -> Result<(), CliError> {
    let q = parse_quantizer(a.scheme, a.k)?;
    if !(1..=64).contains(&a.float_bits) {
        return Err(CliError::Config("float bits must lie in 1..=64".into()));
    }
    let text = fs::read_to_string(a.weights).map_err(|e| CliError::io(a.weights, e))?;
    let w = parse_weights(&text).map_err(|e| CliError::io(a.weights, e))?;
    let layout = Layout::new(vec![LayerShape { rows: 1, cols: w.len(), activation: Activation::Identity, quantizable: true }]);
    let scheme = QuantScheme::Global(q);
    let c = Compressor::new(&scheme, &layout, a.seed)?.compress(&w)?;
    let qp = &c.layers[0];
    let stats = compression_stats(w.len() as u64, 0, qp.codebook().len(), a.float_bits);

    let out = match a.out {
        Some(p) => p.to_path_buf(),
        None => a.weights.with_extension("quantized.txt"),
    };
    let mut prov = Provenance::new(&format!("quantize --scheme {} --K {} --seed {}", a.scheme, a.k, a.seed), a.seed);
    prov.data_source = Some(a.weights.display().to_string());
    let mut body = prov.csv_comment();
    for v in &c.decompressed {
        let _ = writeln!(body, "{v}");
    }
    write_file(&out, body.as_bytes())?;
    let report = out.with_extension("json");
    write_json(
        &report,
        &json!({
            "provenance": prov,
            "scheme": scheme,
            "codebook": qp.codebook().entries(),
            "scale": qp.codebook().scale(),
            "values": qp.codebook().values(),
            "assignments": qp.assignments().indices(),
            "distortion": c.distortion,
            "stats": stats,
        }),
    )?;
    println!("quantized {} weights to {} values, distortion {:.6e}", w.len(), qp.codebook().len(), c.distortion);
    println!("codebook: {:?}", qp.codebook().values());
    println!("compression: {} -> {} bits, ratio x{:.1}", stats.bits_reference, stats.bits_quantized, stats.rho);
    println!("wrote {} and {}", out.display(), report.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalPoint {
    pub target: f64,
    pub hidden: usize,
    pub log2_k: Option<u32>,
    pub size_bits: u64,
    pub loss_train: f64,
}

/// Operational point for each target, loosest first.
pub fn operational_points(cells: &[SweepCell], targets: &[f64]) -> Vec<OperationalPoint> {
    let mut t: Vec<f64> = if targets.is_empty() { cells.iter().filter_map(|c| c.loss_train).collect() } else { targets.to_vec() };
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup();
    t.into_iter()
        .filter_map(|target| {
            select_operational_point(cells, target).map(|c| OperationalPoint {
                target,
                hidden: c.hidden,
                log2_k: c.log2_k,
                size_bits: c.size_bits,
                loss_train: c.loss_train.expect("selected cells have a loss"),
            })
        })
        .collect()
}

fn log2_k_label(k: Option<u32>) -> String {
    k.map_or("inf".to_string(), |k| k.to_string())
}

pub fn sweep(cfg: &RunConfig, config_file: Option<&Path>) -> Result<(), CliError> {
    if cfg.task != Task::MlpClassify {
        return Err(CliError::Config("sweep varies the hidden width and needs task = \"mlp_classify\"".into()));
    }
    let prov = Provenance::for_run("sweep", cfg, config_file)?;
    let data = load_classes(cfg)?;
    let mut ks: Vec<Option<u32>> = cfg.sweep.log2_k.iter().copied().map(Some).collect();
    if cfg.sweep.include_reference {
        ks.push(None);
    }
    create_dir(&cfg.out)?;
    let cells = run_sweep(
        &cfg.sweep.hidden,
        &ks,
        |h| data.model(cfg, &[h]).map_err(LcError::from),
        &cfg.lc_config(),
        cfg.compress.float_bits,
    );
    let points = operational_points(&cells, &cfg.sweep.targets);

    let mut csv = prov.csv_comment().into_bytes();
    write_sweep_csv(&cells, &mut csv).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&cfg.out.join("sweep.csv"), &csv)?;
    write_json(&cfg.out.join("sweep.json"), &json!({ "provenance": prov, "cells": cells, "operational_points": points }))?;

    println!("{:>6} {:>6} {:>12} {:>12} {:>10}", "H", "log2K", "bits", "train loss", "test err");
    for c in &cells {
        let k = log2_k_label(c.log2_k);
        match (&c.error, c.loss_train) {
            (Some(e), _) => println!("{:>6} {:>6} {:>12} failed: {e}", c.hidden, k, c.size_bits),
            (None, Some(l)) => println!(
                "{:>6} {:>6} {:>12} {:>12.6} {:>10}",
                c.hidden,
                k,
                c.size_bits,
                l,
                c.err_test.map_or("-".to_string(), |e| format!("{e:.2}%"))
            ),
            (None, None) => println!("{:>6} {:>6} {:>12}", c.hidden, k, c.size_bits),
        }
    }
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} cells failed; see sweep.csv");
    }
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        println!(
            "loosest target {:.6}: H = {}, log2 K = {}; tightest target {:.6}: H = {}, log2 K = {}",
            first.target,
            first.hidden,
            log2_k_label(first.log2_k),
            last.target,
            last.hidden,
            log2_k_label(last.log2_k)
        );
    }
    println!("wrote {}", cfg.out.join("sweep.csv").display());
    Ok(())
}

fn report_checkpoint(path: &Path, out: &mut String) -> Result<(), CliError> {
    let ck = Checkpoint::load(path).map_err(|e| CliError::io(path, e))?;
    let _ = writeln!(out, "{}: {:?} checkpoint, {} parameters", path.display(), ck.kind, ck.layout.n_params());
    let mut groups = Vec::new();
    for (i, (s, q)) in ck.layout.layers.iter().zip(&ck.quant).enumerate() {
        let desc = match q {
            Some(q) => {
                groups.push((s.n_weights() as u64, q.codebook().len()));
                format!("quantized, codebook {:?}", q.codebook().values())
            }
            None => "real-valued".to_string(),
        };
        let _ = writeln!(out, "  layer {i}: {} x {} {:?}, {desc}", s.rows, s.cols, s.activation);
    }
    if !groups.is_empty() {
        let unquantized: u64 =
            ck.layout.layers.iter().zip(&ck.quant).map(|(s, q)| s.rows as u64 + if q.is_some() { 0 } else { s.n_weights() as u64 }).sum();
        let s = lcq_core::lc::compression_stats_groups(&groups, unquantized, 32);
        let _ = writeln!(out, "  storage at 32-bit floats, one codebook per layer: ratio x{:.1}", s.rho);
    }
    Ok(())
}

fn report_csv(path: &Path, text: &str, out: &mut String) -> Result<(), CliError> {
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
    if header.starts_with("outer_iter") {
        let rows = Trace::read_csv(text.as_bytes()).map_err(|e| CliError::io(path, e))?;
        let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
            let _ = writeln!(out, "{}: empty trace", path.display());
            return Ok(());
        };
        let best = rows.iter().min_by(|a, b| a.loss_train.total_cmp(&b.loss_train)).expect("nonempty");
        let _ = writeln!(
            out,
            "{}: {} iterations; loss {:.6} at iteration 0, {:.6} at the end (best {:.6} at {}); final violation {:.3e}",
            path.display(),
            rows.len() - 1,
            first.loss_train,
            last.loss_train,
            best.loss_train,
            best.outer_iter,
            last.constraint_violation
        );
        if let (Some(a), Some(b)) = (first.err_test, last.err_test) {
            let _ = writeln!(out, "  test error {a:.2}% -> {b:.2}%");
        }
    } else if header.starts_with("hidden") {
        let mut r = csv::ReaderBuilder::new();
        let n = r.comment(Some(b'#')).from_reader(text.as_bytes()).records().count();
        let _ = writeln!(out, "{}: sweep table with {n} cells", path.display());
    } else {
        let _ = writeln!(out, "{}: unrecognized CSV", path.display());
    }
    Ok(())
}

fn report_json(path: &Path, text: &str, out: &mut String) -> Result<(), CliError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::io(path, e))?;
    if let Some(t) = v.get("trace") {
        let t: Trace = serde_json::from_value(t.clone()).map_err(|e| CliError::io(path, e))?;
        let _ = writeln!(out, "{}: {} trace with {} records", path.display(), t.method, t.records.len());
    } else if let Some(s) = v.get("stats") {
        let rho = s.get("rho").and_then(|r| r.as_f64()).unwrap_or(f64::NAN);
        let _ = writeln!(out, "{}: compression ratio x{rho:.1}", path.display());
        if let Some(e) = v.get("evaluation") {
            let e: Evaluation = serde_json::from_value(e.clone()).map_err(|e| CliError::io(path, e))?;
            let _ = writeln!(out, "  {}", eval_line(&e));
        }
    } else if let Some(e) = v.get("evaluation") {
        let e: Evaluation = serde_json::from_value(e.clone()).map_err(|e| CliError::io(path, e))?;
        let _ = writeln!(out, "{}: {}", path.display(), eval_line(&e));
    } else if let Some(p) = v.get("operational_points").and_then(|p| p.as_array()) {
        let _ = writeln!(out, "{}: {} operational points", path.display(), p.len());
    }
    Ok(())
}

fn report_path(path: &Path, out: &mut String) -> Result<(), CliError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for e in entries {
            report_path(&e, out)?;
        }
        return Ok(());
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("lcqk") => report_checkpoint(path, out),
        Some("csv") => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            report_csv(path, &text, out)
        }
        Some("json") => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            report_json(path, &text, out)
        }
        _ if !path.exists() => Err(CliError::io(path, "no such file or directory")),
        _ => Ok(()),
    }
}

pub fn report(paths: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut text = String::new();
    for p in paths {
        report_path(p, &mut text)?;
    }
    print!("{text}");
    std::io::stdout().flush().map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(o) = out {
        write_file(o, text.as_bytes())?;
    }
    Ok(())
}
