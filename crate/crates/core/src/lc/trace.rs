use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// State after one outer iteration. Losses and errors are those of the
/// quantized net; iteration 0 is the direct-compression point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_iter: usize,
    pub mu: f64,
    pub loss_train: f64,
    pub loss_test: Option<f64>,
    pub err_train: Option<f64>,
    pub err_test: Option<f64>,
    /// `max_i |w_i - decompressed_i|`
    pub constraint_violation: f64,
    pub kmeans_iters: usize,
    /// Seconds since the run started.
    pub wall_time_s: f64,
    /// Training loss of the real-valued weights.
    pub loss_train_real: f64,
    pub distortion: f64,
    pub codebooks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub method: String,
    pub records: Vec<TraceRecord>,
}

/// The columns written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub mu: f64,
    pub loss_train: f64,
    pub loss_test: Option<f64>,
    pub err_train: Option<f64>,
    pub err_test: Option<f64>,
    pub constraint_violation: f64,
    pub kmeans_iters: usize,
    pub wall_time_s: f64,
}

impl From<&TraceRecord> for TraceRow {
    fn from(r: &TraceRecord) -> Self {
        Self {
            outer_iter: r.outer_iter,
            mu: r.mu,
            loss_train: r.loss_train,
            loss_test: r.loss_test,
            err_train: r.err_train,
            err_test: r.err_test,
            constraint_violation: r.constraint_violation,
            kmeans_iters: r.kmeans_iters,
            wall_time_s: r.wall_time_s,
        }
    }
}

impl Trace {
    pub fn new(method: &str) -> Self {
        Self { method: method.to_string(), records: Vec::new() }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(TraceRow::from(r))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`Trace::write_csv`]; lines starting with `#`
    /// are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRow>, csv::Error> {
        csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input).deserialize().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
