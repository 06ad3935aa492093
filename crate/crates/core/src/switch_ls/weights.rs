//! Classifier configuration and the on-disk weights format.
//!
//! A weights file is one UTF-8 JSON manifest line terminated by `\n`,
//! followed by the row-major little-endian `f32` payloads of every tensor.
//! Each manifest entry carries its byte `offset` (relative to the first byte
//! after the newline) and byte `length`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::observation::EXTRA_FEATURES;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViTConfig {
    /// Range readings per observation (M).
    pub ray_count: usize,
    pub t_seq: usize,
    pub embed_dim: usize,
    pub mlp_dim: usize,
    pub layers: usize,
    pub heads: usize,
}

impl ViTConfig {
    /// Three encoder layers, 512-wide embedding and MLP, 8 heads, window 10.
    pub fn standard(ray_count: usize) -> Self {
        Self { ray_count, t_seq: 10, embed_dim: 512, mlp_dim: 512, layers: 3, heads: 8 }
    }

    /// Width of one token (one full observation row).
    pub fn feature_dim(&self) -> usize {
        self.ray_count + EXTRA_FEATURES
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.ray_count == 0 || self.t_seq == 0 || self.embed_dim == 0 || self.mlp_dim == 0 || self.heads == 0 {
            return Err(Error::config("ViT dimensions must be positive"));
        }
        if self.embed_dim % self.heads != 0 {
            return Err(Error::config(format!(
                "embed_dim {} not divisible by heads {}",
                self.embed_dim, self.heads
            )));
        }
        Ok(())
    }

    /// Every tensor the forward pass reads, with its shape, in file order.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>)> {
        let (e, h, f, t) = (self.embed_dim, self.mlp_dim, self.feature_dim(), self.t_seq);
        let mut out = vec![
            ("patch_embed.weight".to_string(), vec![e, f]),
            ("patch_embed.bias".to_string(), vec![e]),
            ("pos_embed".to_string(), vec![t, e]),
        ];
        for l in 0..self.layers {
            let p = format!("encoder.{l}");
            out.extend([
                (format!("{p}.norm1.weight"), vec![e]),
                (format!("{p}.norm1.bias"), vec![e]),
                (format!("{p}.attn.qkv.weight"), vec![3 * e, e]),
                (format!("{p}.attn.qkv.bias"), vec![3 * e]),
                (format!("{p}.attn.proj.weight"), vec![e, e]),
                (format!("{p}.attn.proj.bias"), vec![e]),
                (format!("{p}.norm2.weight"), vec![e]),
                (format!("{p}.norm2.bias"), vec![e]),
                (format!("{p}.mlp.fc1.weight"), vec![h, e]),
                (format!("{p}.mlp.fc1.bias"), vec![h]),
                (format!("{p}.mlp.fc2.weight"), vec![e, h]),
                (format!("{p}.mlp.fc2.bias"), vec![e]),
            ]);
        }
        out.extend([
            ("norm.weight".to_string(), vec![e]),
            ("norm.bias".to_string(), vec![e]),
            ("head.fc1.weight".to_string(), vec![h, e]),
            ("head.fc1.bias".to_string(), vec![h]),
            ("head.fc2.weight".to_string(), vec![h, h]),
            ("head.fc2.bias".to_string(), vec![h]),
            ("head.fc3.weight".to_string(), vec![1, h]),
            ("head.fc3.bias".to_string(), vec![1]),
        ]);
        out
    }
}

/// Per-feature affine standardization `(x − mean) / std` applied to every
/// observation row before the patch projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    length: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "T_seq")]
    t_seq: usize,
    embed_dim: usize,
    mlp_dim: usize,
    layers: usize,
    heads: usize,
    normalization: Option<Normalization>,
    #[serde(default = "default_pooling")]
    pooling: String,
    tensors: Vec<TensorEntry>,
}

fn default_pooling() -> String {
    "mean".to_string()
}

/// A complete, shape-checked set of classifier parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightsBundle {
    config: ViTConfig,
    normalization: Option<Normalization>,
    tensors: BTreeMap<String, Tensor>,
}

impl WeightsBundle {
    /// Validates every tensor against `config.tensor_layout()`.
    pub fn new(config: ViTConfig, normalization: Option<Normalization>, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        config.validate()?;
        let layout = config.tensor_layout();
        for (name, shape) in &layout {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::config(format!("missing tensor {name}")))?;
            if &t.shape != shape {
                return Err(Error::config(format!("tensor {name}: shape {:?}, expected {shape:?}", t.shape)));
            }
            if t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::config(format!("tensor {name}: data length does not match shape")));
            }
        }
        if tensors.len() != layout.len() {
            let extra: Vec<_> = tensors.keys().filter(|k| !layout.iter().any(|(n, _)| n == *k)).collect();
            return Err(Error::config(format!("unexpected tensors {extra:?}")));
        }
        if let Some(n) = &normalization {
            let f = config.feature_dim();
            if n.mean.len() != f || n.std.len() != f {
                return Err(Error::config(format!("normalization must have {f} entries")));
            }
            if n.std.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::config("normalization std must be positive"));
            }
        }
        Ok(Self { config, normalization, tensors })
    }

    pub fn zeros(config: ViTConfig) -> Result<Self> {
        let tensors = config
            .tensor_layout()
            .into_iter()
            .map(|(name, shape)| (name, Tensor::zeros(shape)))
            .collect();
        Self::new(config, None, tensors)
    }

    /// Seeded random initialization: uniform(±1/√fan_in) weights, zero
    /// biases, unit layer-norm gains, small positional embeddings.
    pub fn random(config: ViTConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in config.tensor_layout() {
            let n: usize = shape.iter().product();
            let data: Vec<f32> = if name.contains("norm") && name.ends_with(".weight") {
                vec![1.0; n]
            } else if name.ends_with(".bias") {
                vec![0.0; n]
            } else if name == "pos_embed" {
                (0..n).map(|_| rng.gen_range(-0.02..0.02)).collect()
            } else {
                let bound = 1.0 / (shape[1] as f32).sqrt();
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            };
            tensors.insert(name, Tensor { shape, data });
        }
        Self::new(config, None, tensors)
    }

    pub fn config(&self) -> &ViTConfig {
        &self.config
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn with_normalization(self, normalization: Option<Normalization>) -> Result<Self> {
        Self::new(self.config, normalization, self.tensors)
    }

    pub fn tensor(&self, name: &str) -> &Tensor {
        // presence is checked on construction
        &self.tensors[name]
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::new();
        let mut payload = Vec::new();
        for (name, shape) in self.config.tensor_layout() {
            let t = self.tensor(&name);
            let offset = payload.len() as u64;
            for v in &t.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            entries.push(TensorEntry {
                name,
                shape,
                dtype: "f32".to_string(),
                offset,
                length: payload.len() as u64 - offset,
            });
        }
        let c = &self.config;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            m: c.ray_count,
            t_seq: c.t_seq,
            embed_dim: c.embed_dim,
            mlp_dim: c.mlp_dim,
            layers: c.layers,
            heads: c.heads,
            normalization: self.normalization.clone(),
            pooling: default_pooling(),
            tensors: entries,
        };
        let mut out = serde_json::to_vec(&manifest)?;
        out.push(b'\n');
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::config("weights file has no manifest line"))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[..nl])?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::config(format!("unsupported weights format {}", manifest.format_version)));
        }
        if manifest.pooling != "mean" {
            return Err(Error::config(format!("unsupported pooling {:?}", manifest.pooling)));
        }
        let payload = &bytes[nl + 1..];
        let config = ViTConfig {
            ray_count: manifest.m,
            t_seq: manifest.t_seq,
            embed_dim: manifest.embed_dim,
            mlp_dim: manifest.mlp_dim,
            layers: manifest.layers,
            heads: manifest.heads,
        };
        let mut tensors = BTreeMap::new();
        for e in manifest.tensors {
            if e.dtype != "f32" {
                return Err(Error::config(format!("tensor {}: unsupported dtype {}", e.name, e.dtype)));
            }
            let count: usize = e.shape.iter().product();
            if e.length != 4 * count as u64 {
                return Err(Error::config(format!("tensor {}: length {} does not match shape", e.name, e.length)));
            }
            let start = usize::try_from(e.offset).map_err(|_| Error::config("offset overflow"))?;
            let end = start + e.length as usize;
            let raw = payload
                .get(start..end)
                .ok_or_else(|| Error::config(format!("tensor {} extends past end of file", e.name)))?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            if tensors.insert(e.name.clone(), Tensor { shape: e.shape, data }).is_some() {
                return Err(Error::config(format!("duplicate tensor {}", e.name)));
            }
        }
        Self::new(config, manifest.normalization, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)
            .map_err(|e| Error::config(format!("cannot read weights {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ViTConfig {
        ViTConfig { ray_count: 4, t_seq: 3, embed_dim: 8, mlp_dim: 6, layers: 2, heads: 2 }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let w = WeightsBundle::random(tiny(), 7).unwrap();
        let bytes = w.to_bytes().unwrap();
        let back = WeightsBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn manifest_line_fields() {
        let w = WeightsBundle::zeros(tiny()).unwrap();
        let bytes = w.to_bytes().unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        for key in ["format_version", "M", "T_seq", "embed_dim", "mlp_dim", "layers", "heads", "normalization", "tensors"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let first = &v["tensors"][0];
        assert_eq!(first["name"], "patch_embed.weight");
        assert_eq!(first["dtype"], "f32");
        assert_eq!(first["offset"], 0);
        assert_eq!(first["length"], 8 * 21 * 4);
        let total: u64 = v["tensors"].as_array().unwrap().iter().map(|t| t["length"].as_u64().unwrap()).sum();
        assert_eq!(bytes.len() - nl - 1, total as usize);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let w = WeightsBundle::zeros(tiny()).unwrap();
        let bytes = w.to_bytes().unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        v["M"] = serde_json::json!(5);
        let mut bad = serde_json::to_vec(&v).unwrap();
        bad.push(b'\n');
        bad.extend_from_slice(&bytes[nl + 1..]);
        assert!(matches!(WeightsBundle::from_bytes(&bad), Err(Error::Config(_))));
        // truncated payload
        assert!(WeightsBundle::from_bytes(&bytes[..bytes.len() - 4]).is_err());
    }

    #[test]
    fn heads_must_divide_embedding() {
        let cfg = ViTConfig { heads: 3, ..tiny() };
        assert!(WeightsBundle::zeros(cfg).is_err());
    }
}
