//! Versioned binary checkpoint of a model's layout and parameters.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        4 bytes  "LCQK"
//! version      u32      1
//! kind         u8       0 = linear regression, 1 = mlp
//! n_layers     u32
//! per layer:
//!   rows       u32
//!   cols       u32
//!   activation u8       0 identity, 1 tanh, 2 relu, 3 softmax
//!   flags      u8       bit 0 quantizable, bit 1 stored quantized
//!   bias       rows x f64
//!   if quantized:
//!     codebook kind  u8   0 adaptive, 1 fixed, 2 fixed with scale
//!     scale          f64  (1.0 unless fixed with scale)
//!     K              u32
//!     entries        K x f64, strictly increasing
//!     indices        ceil(rows * cols * ceil(log2 K) / 8) bytes, each index
//!                    packed least-significant bit first
//!   else:
//!     weights    rows x cols x f64, row-major
//! ```
//!
//! The weights of a quantized layer are not stored; reading decompresses
//! them from the codebook and indices.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Activation, LayerParams, LayerShape, Layout, Params};
use crate::quantizers::{decompress, index_bits, Assignments, Codebook, CodebookKind, QuantParams};

pub const MAGIC: &[u8; 4] = b"LCQK";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("malformed checkpoint: {0}")]
    Invalid(String),
    #[error("layer {0}: stored weights differ from their quantized decompression")]
    Inconsistent(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearRegression,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub layout: Layout,
    pub params: Params,
    /// Quantization of each layer's weights, if any.
    pub quant: Vec<Option<QuantParams>>,
}

impl Checkpoint {
    pub fn unquantized(kind: ModelKind, layout: Layout, params: Params) -> Self {
        let quant = vec![None; layout.layers.len()];
        Self { kind, layout, params, quant }
    }

    /// A compressed model: `quant` has one entry per quantizable layer, in
    /// layer order, and must decompress to the stored weights.
    pub fn quantized(
        kind: ModelKind,
        layout: Layout,
        params: Params,
        quant: Vec<QuantParams>,
    ) -> Result<Self, CheckpointError> {
        let ranges = layout.quantizable_ranges();
        if quant.len() != ranges.len() {
            return Err(CheckpointError::Invalid(format!(
                "{} quantized layers for {} quantizable layers",
                quant.len(),
                ranges.len()
            )));
        }
        let mut slots = vec![None; layout.layers.len()];
        for ((i, _), q) in ranges.into_iter().zip(quant) {
            if decompress(&q) != params.layers[i].weights {
                return Err(CheckpointError::Inconsistent(i));
            }
            slots[i] = Some(q);
        }
        Ok(Self { kind, layout, params, quant: slots })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), CheckpointError> {
        self.params.check(&self.layout).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        if self.quant.len() != self.layout.layers.len() {
            return Err(CheckpointError::Invalid("one quantization slot per layer required".into()));
        }
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&[match self.kind {
            ModelKind::LinearRegression => 0,
            ModelKind::Mlp => 1,
        }])?;
        out.write_all(&u32_of(self.layout.layers.len())?.to_le_bytes())?;
        for (i, ((s, p), q)) in self.layout.layers.iter().zip(&self.params.layers).zip(&self.quant).enumerate() {
            out.write_all(&u32_of(s.rows)?.to_le_bytes())?;
            out.write_all(&u32_of(s.cols)?.to_le_bytes())?;
            let flags = u8::from(s.quantizable) | (u8::from(q.is_some()) << 1);
            out.write_all(&[activation_code(s.activation), flags])?;
            write_f64s(&mut out, &p.bias)?;
            match q {
                Some(q) => {
                    if q.len() != s.n_weights() || decompress(q) != p.weights {
                        return Err(CheckpointError::Inconsistent(i));
                    }
                    let cb = q.codebook();
                    out.write_all(&[match cb.kind() {
                        CodebookKind::Adaptive => 0,
                        CodebookKind::Fixed => 1,
                        CodebookKind::FixedWithScale => 2,
                    }])?;
                    out.write_all(&cb.scale().unwrap_or(1.0).to_le_bytes())?;
                    out.write_all(&u32_of(cb.len())?.to_le_bytes())?;
                    write_f64s(&mut out, cb.entries())?;
                    out.write_all(&pack_indices(q.assignments().indices(), index_bits(cb.len())))?;
                }
                None => write_f64s(&mut out, &p.weights)?,
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut input)?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let kind = match read_u8(&mut input)? {
            0 => ModelKind::LinearRegression,
            1 => ModelKind::Mlp,
            k => return Err(CheckpointError::Invalid(format!("unknown model kind {k}"))),
        };
        let n_layers = read_u32(&mut input)? as usize;
        let mut shapes = Vec::new();
        let mut layers = Vec::new();
        let mut quant = Vec::new();
        for _ in 0..n_layers {
            let rows = read_u32(&mut input)? as usize;
            let cols = read_u32(&mut input)? as usize;
            let activation = activation_of(read_u8(&mut input)?)?;
            let flags = read_u8(&mut input)?;
            if flags & !0b11 != 0 {
                return Err(CheckpointError::Invalid(format!("unknown layer flags {flags:#04x}")));
            }
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| CheckpointError::Invalid("layer size overflows".into()))?;
            let bias = read_f64s(&mut input, rows)?;
            let (weights, q) = if flags & 0b10 != 0 {
                let q = read_quantized(&mut input, n)?;
                (decompress(&q), Some(q))
            } else {
                (read_f64s(&mut input, n)?, None)
            };
            shapes.push(LayerShape { rows, cols, activation, quantizable: flags & 1 != 0 });
            layers.push(LayerParams { weights, bias });
            quant.push(q);
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(CheckpointError::Invalid("trailing bytes after last layer".into()));
        }
        Ok(Self { kind, layout: Layout::new(shapes), params: Params { layers }, quant })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

fn u32_of(n: usize) -> Result<u32, CheckpointError> {
    u32::try_from(n).map_err(|_| CheckpointError::Invalid(format!("{n} does not fit in 32 bits")))
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Tanh => 1,
        Activation::Relu => 2,
        Activation::Softmax => 3,
    }
}

fn activation_of(code: u8) -> Result<Activation, CheckpointError> {
    Ok(match code {
        0 => Activation::Identity,
        1 => Activation::Tanh,
        2 => Activation::Relu,
        3 => Activation::Softmax,
        c => return Err(CheckpointError::Invalid(format!("unknown activation {c}"))),
    })
}

fn write_f64s<W: Write>(out: &mut W, v: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 * v.len());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<(), CheckpointError> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CheckpointError::Truncated,
        _ => CheckpointError::Io(e),
    })
}

fn read_u8<R: Read>(input: &mut R) -> Result<u8, CheckpointError> {
    let mut b = [0u8; 1];
    read_exact(input, &mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64, CheckpointError> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>, CheckpointError> {
    // read in bounded chunks so a corrupt length cannot force a huge allocation
    let mut out = Vec::new();
    let mut buf = vec![0u8; 8 * n.min(1 << 16)];
    let mut left = n;
    while left > 0 {
        let m = left.min(1 << 16);
        read_exact(input, &mut buf[..8 * m])?;
        out.extend(buf[..8 * m].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
        left -= m;
    }
    Ok(out)
}

fn read_quantized<R: Read>(input: &mut R, n: usize) -> Result<QuantParams, CheckpointError> {
    let kind = read_u8(input)?;
    let scale = read_f64(input)?;
    let k = read_u32(input)? as usize;
    if k == 0 {
        return Err(CheckpointError::Invalid("empty codebook".into()));
    }
    let entries = read_f64s(input, k)?;
    let bits = index_bits(k);
    let n_bytes = (n as u128 * u128::from(bits)).div_ceil(8);
    let n_bytes = usize::try_from(n_bytes).map_err(|_| CheckpointError::Invalid("index block too large".into()))?;
    let mut packed = Vec::new();
    input.take(n_bytes as u64).read_to_end(&mut packed)?;
    if packed.len() != n_bytes {
        return Err(CheckpointError::Truncated);
    }
    let indices = unpack_indices(&packed, bits, n);
    let bad = |e: crate::quantizers::QuantizeError| CheckpointError::Invalid(e.to_string());
    let codebook = match kind {
        0 => Codebook::adaptive(entries).map_err(bad)?,
        1 => Codebook::fixed(entries).map_err(bad)?,
        2 if scale == 0.0 => {
            if let Some(&i) = indices.iter().find(|&&i| i as usize >= k) {
                return Err(CheckpointError::Invalid(format!("index {i} out of range for K = {k}")));
            }
            return Ok(QuantParams::from_parts(Codebook::zero_scaled(entries), indices, true));
        }
        2 => Codebook::fixed_with_scale(entries, scale).map_err(bad)?,
        c => return Err(CheckpointError::Invalid(format!("unknown codebook kind {c}"))),
    };
    QuantParams::new(codebook, Assignments::new(indices)).map_err(bad)
}

/// Packs each index into `bits` bits, least-significant bit first.
pub fn pack_indices(indices: &[u32], bits: u32) -> Vec<u8> {
    let total = indices.len() * bits as usize;
    let mut out = vec![0u8; total.div_ceil(8)];
    let mut pos = 0;
    for &ix in indices {
        for b in 0..bits {
            if (ix >> b) & 1 == 1 {
                out[pos / 8] |= 1 << (pos % 8);
            }
            pos += 1;
        }
    }
    out
}

pub fn unpack_indices(packed: &[u8], bits: u32, n: usize) -> Vec<u32> {
    let mut pos = 0;
    (0..n)
        .map(|_| {
            let mut v = 0u32;
            for b in 0..bits {
                if (packed[pos / 8] >> (pos % 8)) & 1 == 1 {
                    v |= 1 << b;
                }
                pos += 1;
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{glorot_init, mlp_layout};
    use crate::quantizers::{binarize_scale, kmeans_1d, ternarize, KMeansInit};
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        let layout = mlp_layout(5, &[4], Activation::Tanh, 3);
        let mut params = glorot_init(&layout, 9);
        params.layers[0].bias = vec![0.5, -0.25, 1e-300, -0.0];
        let q0 = kmeans_1d(&params.layers[0].weights, 3, KMeansInit::PlusPlus { seed: 1 }).unwrap().params;
        params.layers[0].weights = decompress(&q0);
        let quant = vec![Some(q0), None];
        Checkpoint { kind: ModelKind::Mlp, layout, params, quant }
    }

    fn bytes(c: &Checkpoint) -> Vec<u8> {
        let mut b = Vec::new();
        c.write_to(&mut b).unwrap();
        b
    }

    #[test]
    fn quantized_places_layers_and_checks_consistency() {
        let c = sample();
        let q0 = c.quant[0].clone().unwrap();
        let built = Checkpoint::quantized(ModelKind::Mlp, c.layout.clone(), c.params.clone(), vec![q0.clone()]);
        assert!(matches!(built, Err(CheckpointError::Invalid(_))));

        let layout = mlp_layout(5, &[], Activation::Tanh, 3);
        let mut params = glorot_init(&layout, 2);
        let q = ternarize(&params.layers[0].weights);
        assert!(matches!(
            Checkpoint::quantized(ModelKind::Mlp, layout.clone(), params.clone(), vec![q.clone()]),
            Err(CheckpointError::Inconsistent(0))
        ));
        params.layers[0].weights = decompress(&q);
        let c = Checkpoint::quantized(ModelKind::Mlp, layout, params, vec![q.clone()]).unwrap();
        assert_eq!(c.quant, vec![Some(q)]);
    }

    #[test]
    fn round_trip_mixed_layers() {
        let c = sample();
        let b = bytes(&c);
        assert_eq!(&b[..4], b"LCQK");
        let back = Checkpoint::read_from(b.as_slice()).unwrap();
        assert_eq!(back, c);
        assert_eq!(bytes(&back), b);
    }

    #[test]
    fn round_trip_scaled_and_fixed_codebooks() {
        let layout = mlp_layout(6, &[], Activation::Tanh, 2);
        let mut params = glorot_init(&layout, 4);
        let q = binarize_scale(&params.layers[0].weights).unwrap();
        params.layers[0].weights = decompress(&q);
        let c = Checkpoint { kind: ModelKind::Mlp, layout: layout.clone(), params: params.clone(), quant: vec![Some(q)] };
        assert_eq!(Checkpoint::read_from(bytes(&c).as_slice()).unwrap(), c);

        let q = ternarize(&params.layers[0].weights);
        params.layers[0].weights = decompress(&q);
        let c = Checkpoint { kind: ModelKind::Mlp, layout, params, quant: vec![Some(q)] };
        assert_eq!(Checkpoint::read_from(bytes(&c).as_slice()).unwrap(), c);
    }

    #[test]
    fn index_block_uses_ceil_log2_bits() {
        // 20 weights at K = 3 cost 2 bits each: 5 bytes of indices
        let layout = mlp_layout(4, &[], Activation::Tanh, 5);
        let mut params = glorot_init(&layout, 2);
        let q = kmeans_1d(&params.layers[0].weights, 3, KMeansInit::PlusPlus { seed: 0 }).unwrap().params;
        params.layers[0].weights = decompress(&q);
        let c = Checkpoint { kind: ModelKind::Mlp, layout, params, quant: vec![Some(q)] };
        let header = 4 + 4 + 1 + 4;
        let layer = 4 + 4 + 1 + 1 + 5 * 8 + 1 + 8 + 4 + 3 * 8 + 5;
        assert_eq!(bytes(&c).len(), header + layer);
    }

    #[test]
    fn rejects_corrupt_input() {
        let b = bytes(&sample());
        assert!(matches!(Checkpoint::read_from(&b[..0]), Err(CheckpointError::Truncated)));
        for cut in [3, 10, 20, b.len() - 1] {
            assert!(matches!(Checkpoint::read_from(&b[..cut]), Err(CheckpointError::Truncated)), "cut {cut}");
        }
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(CheckpointError::BadMagic)));
        let mut bad = b.clone();
        bad[4] = 2;
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(CheckpointError::UnsupportedVersion(2))));
        let mut bad = b;
        bad.push(0);
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(CheckpointError::Invalid(_))));
    }

    #[test]
    fn refuses_weights_that_disagree_with_codebook() {
        let mut c = sample();
        c.params.layers[0].weights[0] += 1.0;
        assert!(matches!(c.write_to(Vec::new()), Err(CheckpointError::Inconsistent(0))));
    }

    proptest! {
        #[test]
        fn pack_round_trip(bits in 0u32..9, raw in proptest::collection::vec(any::<u32>(), 0..100)) {
            let mask = if bits == 0 { 0 } else { (1u32 << bits) - 1 };
            let ix: Vec<u32> = raw.iter().map(|v| v & mask).collect();
            let packed = pack_indices(&ix, bits);
            prop_assert_eq!(packed.len(), (ix.len() * bits as usize).div_ceil(8));
            prop_assert_eq!(unpack_indices(&packed, bits, ix.len()), ix);
        }
    }
}
