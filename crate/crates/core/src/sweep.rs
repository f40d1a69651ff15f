//! Grid over hidden-layer width and codebook size: trains a reference net
//! per width, compresses it with LC for every codebook size, and picks the
//! smallest model that meets a loss target.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::lc::{compression_stats_groups, lc_run, LcConfig, LcError, NoHooks, QuantScheme, Quantizer};
use crate::models::{Layout, LossModel, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub hidden: usize,
    /// `None` is the uncompressed reference.
    pub log2_k: Option<u32>,
    pub size_bits: u64,
    pub loss_train: Option<f64>,
    pub err_test: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

/// Bits needed to store a net with this layout, one codebook of `2^log2_k`
/// entries per quantizable layer, or uncompressed when `log2_k` is `None`.
pub fn model_size_bits(layout: &Layout, log2_k: Option<u32>, float_bits: u32) -> u64 {
    let p0 = layout.n_unquantized() as u64;
    match log2_k {
        None => (layout.n_quantizable() as u64 + p0) * u64::from(float_bits),
        Some(m) => {
            let groups: Vec<(u64, usize)> = layout
                .layers
                .iter()
                .filter(|l| l.quantizable)
                .map(|l| (l.n_weights() as u64, 1usize << m))
                .collect();
            compression_stats_groups(&groups, p0, float_bits).bits_quantized
        }
    }
}

/// Runs every `(hidden, log2_k)` cell. `build(h)` returns the model for
/// width `h` and its initial parameters. A failing cell is recorded with
/// its error and the sweep moves on.
pub fn run_sweep<M, B>(
    hidden: &[usize],
    log2_ks: &[Option<u32>],
    mut build: B,
    config: &LcConfig,
    float_bits: u32,
) -> Vec<SweepCell>
where
    M: LossModel,
    B: FnMut(usize) -> Result<(M, Params), LcError>,
{
    let mut cells = Vec::with_capacity(hidden.len() * log2_ks.len());
    for &h in hidden {
        let prepared = build(h).and_then(|(m, init)| {
            let reference = m.fit_reference(&init)?;
            Ok((m, reference))
        });
        for &lk in log2_ks {
            let mut cell = SweepCell {
                hidden: h,
                log2_k: lk,
                size_bits: 0,
                loss_train: None,
                err_test: None,
                converged: None,
                error: None,
            };
            match &prepared {
                Err(e) => cell.error = Some(e.to_string()),
                Ok((m, reference)) => {
                    cell.size_bits = model_size_bits(m.layout(), lk, float_bits);
                    match lk {
                        None => {
                            let e = m.evaluate(reference);
                            cell.loss_train = Some(e.loss_train);
                            cell.err_test = e.err_test;
                        }
                        Some(bits) => {
                            let n_layers = m.layout().quantizable_ranges().len();
                            let scheme = QuantScheme::per_layer(Quantizer::Adaptive { k: 1 << bits }, n_layers);
                            match lc_run(m, reference, &scheme, config, &mut NoHooks) {
                                Ok(out) => {
                                    cell.loss_train = Some(out.model.evaluation.loss_train);
                                    cell.err_test = out.model.evaluation.err_test;
                                    cell.converged = Some(out.converged);
                                }
                                Err(e) => cell.error = Some(e.to_string()),
                            }
                        }
                    }
                }
            }
            cells.push(cell);
        }
    }
    cells
}

/// Smallest cell whose training loss is at most `max_loss`; ties go to the
/// lower loss.
pub fn select_operational_point(cells: &[SweepCell], max_loss: f64) -> Option<&SweepCell> {
    cells
        .iter()
        .filter(|c| c.loss_train.is_some_and(|l| l <= max_loss))
        .min_by(|a, b| {
            a.size_bits
                .cmp(&b.size_bits)
                .then(a.loss_train.unwrap().total_cmp(&b.loss_train.unwrap()))
        })
}

/// One row per cell; `log2_k` is written as `inf` for the reference.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<(), csv::Error> {
    #[derive(Serialize)]
    struct Row<'a> {
        hidden: usize,
        log2_k: String,
        size_bits: u64,
        loss_train: Option<f64>,
        err_test: Option<f64>,
        converged: Option<bool>,
        error: Option<&'a str>,
    }
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(Row {
            hidden: c.hidden,
            log2_k: c.log2_k.map_or_else(|| "inf".to_string(), |k| k.to_string()),
            size_bits: c.size_bits,
            loss_train: c.loss_train,
            err_test: c.err_test,
            converged: c.converged,
            error: c.error.as_deref(),
        })?;
    }
    w.flush()?;
    Ok(())
}
