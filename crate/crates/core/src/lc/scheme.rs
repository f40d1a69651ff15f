use serde::{Deserialize, Serialize};

use super::{compression_stats_groups, CompressionStats, LcError};
use crate::models::Layout;
use crate::quantizers::{
    assign_fixed, binarize, binarize_scale, decompress, kmeans_1d, pow2_quantize, ternarize,
    ternarize_scale, Codebook, KMeansInit, QuantParams,
};

/// How one group of weights is quantized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Quantizer {
    /// Learned codebook of size `k` (k-means).
    Adaptive { k: usize },
    Fixed { codebook: Vec<f64> },
    Binary,
    BinaryScale,
    Ternary,
    TernaryScale,
    /// `{0, +-1, +-1/2, ..., +-2^-c_exp}`
    Pow2 { c_exp: u32 },
}

impl Quantizer {
    pub fn validate(&self) -> Result<(), LcError> {
        match self {
            Quantizer::Adaptive { k: 0 } => Err(LcError::InvalidConfig("adaptive codebook needs K >= 1".into())),
            Quantizer::Fixed { codebook } => Codebook::fixed(codebook.clone()).map(|_| ()).map_err(LcError::from),
            Quantizer::Pow2 { c_exp } if *c_exp > 60 => {
                Err(LcError::InvalidConfig(format!("power-of-two exponent {c_exp} too large")))
            }
            _ => Ok(()),
        }
    }

    /// Parses `adaptive[:k]`, `binary`, `binary_scale`, `ternary`,
    /// `ternary_scale`, `pow2:<c>` or `fixed:<v1>,<v2>,...`; `k` sizes a bare
    /// `adaptive`.
    pub fn parse(spec: &str, k: usize) -> Result<Self, LcError> {
        let bad = |m: String| LcError::InvalidConfig(m);
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        let no_arg = |q: Quantizer| match arg {
            None => Ok(q),
            Some(_) => Err(bad(format!("scheme `{name}` takes no argument"))),
        };
        let q = match name.replace('-', "_").as_str() {
            "adaptive" => match arg {
                None => Quantizer::Adaptive { k },
                Some(a) => Quantizer::Adaptive { k: a.parse().map_err(|_| bad(format!("bad codebook size `{a}`")))? },
            },
            "binary" => no_arg(Quantizer::Binary)?,
            "binary_scale" => no_arg(Quantizer::BinaryScale)?,
            "ternary" => no_arg(Quantizer::Ternary)?,
            "ternary_scale" => no_arg(Quantizer::TernaryScale)?,
            "pow2" => {
                let a = arg.ok_or_else(|| bad("pow2 needs an exponent, e.g. `pow2:5`".into()))?;
                Quantizer::Pow2 { c_exp: a.parse().map_err(|_| bad(format!("bad exponent `{a}`")))? }
            }
            "fixed" => {
                let a = arg.ok_or_else(|| bad("fixed needs values, e.g. `fixed:-1,0,1`".into()))?;
                let codebook = a
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("bad codebook value `{v}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                Quantizer::Fixed { codebook }
            }
            other => return Err(bad(format!("unknown scheme `{other}`"))),
        };
        q.validate()?;
        Ok(q)
    }

    /// Codebook size this quantizer produces at most.
    pub fn max_k(&self) -> usize {
        match self {
            Quantizer::Adaptive { k } => *k,
            Quantizer::Fixed { codebook } => codebook.len(),
            Quantizer::Binary | Quantizer::BinaryScale => 2,
            Quantizer::Ternary | Quantizer::TernaryScale => 3,
            Quantizer::Pow2 { c_exp } => 2 * *c_exp as usize + 3,
        }
    }
}

/// Quantization of all quantizable layers: a separate codebook per layer, or
/// one codebook shared by every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantScheme {
    PerLayer(Vec<Quantizer>),
    Global(Quantizer),
}

impl QuantScheme {
    /// The same quantizer, with its own codebook, in each of `n_layers`.
    pub fn per_layer(q: Quantizer, n_layers: usize) -> Self {
        QuantScheme::PerLayer(vec![q; n_layers])
    }

    pub fn validate(&self, layout: &Layout) -> Result<(), LcError> {
        let n = layout.quantizable_ranges().len();
        if n == 0 {
            return Err(LcError::InvalidConfig("model has no quantizable layers".into()));
        }
        match self {
            QuantScheme::PerLayer(qs) => {
                if qs.len() != n {
                    return Err(LcError::InvalidConfig(format!(
                        "scheme lists {} quantizers for {n} quantizable layers",
                        qs.len()
                    )));
                }
                qs.iter().try_for_each(Quantizer::validate)
            }
            QuantScheme::Global(q) => q.validate(),
        }
    }

    /// Storage of a model compressed under this scheme. `quant` has one
    /// entry per quantizable layer; a shared codebook is counted once.
    pub fn stats(&self, layout: &Layout, quant: &[QuantParams], float_bits: u32) -> CompressionStats {
        let p0 = layout.n_unquantized() as u64;
        let groups: Vec<(u64, usize)> = match self {
            QuantScheme::PerLayer(_) => layout
                .quantizable_ranges()
                .into_iter()
                .zip(quant)
                .map(|((_, r), q)| (r.len() as u64, q.codebook().len()))
                .collect(),
            QuantScheme::Global(_) => {
                vec![(layout.n_quantizable() as u64, quant.first().map_or(0, |q| q.codebook().len()))]
            }
        };
        compression_stats_groups(&groups, p0, float_bits)
    }

    /// `(quantizer, range in the quantizable vector)` per codebook.
    pub(crate) fn groups(&self, layout: &Layout) -> Vec<(Quantizer, std::ops::Range<usize>)> {
        match self {
            QuantScheme::PerLayer(qs) => qs
                .iter()
                .cloned()
                .zip(layout.quantizable_ranges().into_iter().map(|(_, r)| r))
                .collect(),
            QuantScheme::Global(q) => vec![(q.clone(), 0..layout.n_quantizable())],
        }
    }
}

/// Result of one compression step.
#[derive(Debug, Clone)]
pub struct CStep {
    /// One entry per quantizable layer. Under a global scheme every layer
    /// holds a copy of the shared codebook.
    pub layers: Vec<QuantParams>,
    /// Decompressed quantizable weights.
    pub decompressed: Vec<f64>,
    pub distortion: f64,
    pub kmeans_iters: usize,
    /// Scaled codebook values, one list per codebook.
    pub codebooks: Vec<Vec<f64>>,
}

/// Runs C steps for a scheme, remembering each adaptive codebook so the next
/// call can warm-start from it.
#[derive(Debug, Clone)]
pub struct Compressor {
    groups: Vec<(Quantizer, std::ops::Range<usize>)>,
    layer_ranges: Vec<std::ops::Range<usize>>,
    warm: Vec<Option<Vec<f64>>>,
    seed: u64,
}

impl Compressor {
    pub fn new(scheme: &QuantScheme, layout: &Layout, seed: u64) -> Result<Self, LcError> {
        scheme.validate(layout)?;
        let groups = scheme.groups(layout);
        let warm = vec![None; groups.len()];
        let layer_ranges = layout.quantizable_ranges().into_iter().map(|(_, r)| r).collect();
        Ok(Self { groups, layer_ranges, warm, seed })
    }

    /// Quantizes the full quantizable vector `input`.
    pub fn compress(&mut self, input: &[f64]) -> Result<CStep, LcError> {
        let mut group_params = Vec::with_capacity(self.groups.len());
        let mut kmeans_iters = 0;
        for (g, (q, r)) in self.groups.iter().enumerate() {
            let w = &input[r.clone()];
            let qp = match q {
                Quantizer::Adaptive { k } => {
                    let init = match &self.warm[g] {
                        Some(c) => KMeansInit::Warm(c.clone()),
                        None => KMeansInit::PlusPlus { seed: self.seed.wrapping_add(g as u64) },
                    };
                    let res = kmeans_1d(w, *k, init)?;
                    kmeans_iters += res.iterations;
                    self.warm[g] = Some(res.params.codebook().entries().to_vec());
                    res.params
                }
                Quantizer::Fixed { codebook } => {
                    let cb = Codebook::fixed(codebook.clone())?;
                    let a = assign_fixed(w, &cb);
                    QuantParams::new(cb, a)?
                }
                Quantizer::Binary => binarize(w),
                Quantizer::BinaryScale => binarize_scale(w)?,
                Quantizer::Ternary => ternarize(w),
                Quantizer::TernaryScale => ternarize_scale(w)?,
                Quantizer::Pow2 { c_exp } => pow2_quantize(w, *c_exp),
            };
            group_params.push((qp, r.start));
        }

        let mut decompressed = Vec::with_capacity(input.len());
        let mut codebooks = Vec::with_capacity(group_params.len());
        for (qp, _) in &group_params {
            decompressed.extend(decompress(qp));
            codebooks.push(qp.codebook().values());
        }
        let distortion = input.iter().zip(&decompressed).map(|(a, b)| (a - b) * (a - b)).sum();

        let layers = self
            .layer_ranges
            .iter()
            .map(|r| {
                let (qp, start) = group_params
                    .iter()
                    .rev()
                    .find(|(_, s)| *s <= r.start)
                    .expect("every layer lies in a group");
                let ix = &qp.assignments().indices()[r.start - start..r.end - start];
                QuantParams::from_parts(qp.codebook().clone(), ix.to_vec(), qp.is_degenerate())
            })
            .collect();
        Ok(CStep { layers, decompressed, distortion, kmeans_iters, codebooks })
    }
}
