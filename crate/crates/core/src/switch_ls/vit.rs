//! Transformer-encoder classifier over a window of observations.
//!
//! Each observation row is one token. Tokens are linearly embedded, given
//! learned positional embeddings, passed through pre-norm encoder layers
//! (multi-head self-attention, then a GELU MLP), layer-normed, mean-pooled
//! and classified by a three-layer ReLU head with a sigmoid output.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::observation::ObservationMatrix;
use super::weights::WeightsBundle;
use crate::error::{Error, Result};

const LN_EPS: f32 = 1e-5;

fn matrix<'a>(w: &'a WeightsBundle, name: &str) -> ArrayView2<'a, f32> {
    let t = w.tensor(name);
    ArrayView2::from_shape((t.shape[0], t.shape[1]), &t.data).expect("shape checked on load")
}

fn vector<'a>(w: &'a WeightsBundle, name: &str) -> ArrayView1<'a, f32> {
    ArrayView1::from(&w.tensor(name).data[..])
}

/// `x · Wᵀ + b` for row-major `W` of shape (out, in).
fn linear(x: &Array2<f32>, w: ArrayView2<f32>, b: ArrayView1<f32>) -> Array2<f32> {
    x.dot(&w.t()) + b
}

fn layer_norm(x: &Array2<f32>, gain: ArrayView1<f32>, bias: ArrayView1<f32>) -> Array2<f32> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let n = row.len() as f32;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        row.iter_mut().zip(gain.iter().zip(bias.iter())).for_each(|(v, (g, b))| *v = (*v - mean) * inv * g + b);
    }
    out
}

fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + libm::erff(x / std::f32::consts::SQRT_2))
}

fn softmax_rows(x: &mut Array2<f32>) {
    for mut row in x.rows_mut() {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn attention(x: &Array2<f32>, w: &WeightsBundle, prefix: &str) -> Array2<f32> {
    let cfg = w.config();
    let e = cfg.embed_dim;
    let hd = cfg.head_dim();
    let qkv = linear(x, matrix(w, &format!("{prefix}.qkv.weight")), vector(w, &format!("{prefix}.qkv.bias")));
    let scale = 1.0 / (hd as f32).sqrt();
    let mut merged = Array2::<f32>::zeros((x.nrows(), e));
    for h in 0..cfg.heads {
        let q = qkv.slice(s![.., h * hd..(h + 1) * hd]);
        let k = qkv.slice(s![.., e + h * hd..e + (h + 1) * hd]);
        let v = qkv.slice(s![.., 2 * e + h * hd..2 * e + (h + 1) * hd]);
        let mut scores = q.dot(&k.t()) * scale;
        softmax_rows(&mut scores);
        merged.slice_mut(s![.., h * hd..(h + 1) * hd]).assign(&scores.dot(&v));
    }
    linear(&merged, matrix(w, &format!("{prefix}.proj.weight")), vector(w, &format!("{prefix}.proj.bias")))
}

fn input_tokens(obs: &ObservationMatrix, w: &WeightsBundle) -> Result<Array2<f32>> {
    let cfg = w.config();
    if obs.row_count() != cfg.t_seq || obs.width() != cfg.feature_dim() {
        return Err(Error::config(format!(
            "observation matrix is {}×{}, weights expect {}×{}",
            obs.row_count(),
            obs.width(),
            cfg.t_seq,
            cfg.feature_dim()
        )));
    }
    let mut x = Array2::<f32>::zeros((cfg.t_seq, cfg.feature_dim()));
    for (mut dst, src) in x.rows_mut().into_iter().zip(obs.rows()) {
        dst.iter_mut().zip(src.as_slice()).for_each(|(d, &s)| *d = s as f32);
    }
    if let Some(n) = w.normalization() {
        for mut row in x.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - n.mean[j]) / n.std[j];
            }
        }
    }
    Ok(x)
}

/// Pre-sigmoid classifier output.
pub fn vit_logit(obs: &ObservationMatrix, w: &WeightsBundle) -> Result<f32> {
    let cfg = *w.config();
    let x = input_tokens(obs, w)?;
    let mut h = linear(&x, matrix(w, "patch_embed.weight"), vector(w, "patch_embed.bias")) + &matrix(w, "pos_embed");
    for l in 0..cfg.layers {
        let p = format!("encoder.{l}");
        let y = layer_norm(&h, vector(w, &format!("{p}.norm1.weight")), vector(w, &format!("{p}.norm1.bias")));
        h = h + attention(&y, w, &format!("{p}.attn"));
        let y = layer_norm(&h, vector(w, &format!("{p}.norm2.weight")), vector(w, &format!("{p}.norm2.bias")));
        let mut m = linear(&y, matrix(w, &format!("{p}.mlp.fc1.weight")), vector(w, &format!("{p}.mlp.fc1.bias")));
        m.mapv_inplace(gelu);
        h = h + linear(&m, matrix(w, &format!("{p}.mlp.fc2.weight")), vector(w, &format!("{p}.mlp.fc2.bias")));
    }
    let h = layer_norm(&h, vector(w, "norm.weight"), vector(w, "norm.bias"));
    let pooled: Array1<f32> = h.mean_axis(Axis(0)).expect("t_seq > 0");
    let z = pooled.insert_axis(Axis(0)).to_owned();
    let z = linear(&z, matrix(w, "head.fc1.weight"), vector(w, "head.fc1.bias")).mapv(|v| v.max(0.0));
    let z = linear(&z, matrix(w, "head.fc2.weight"), vector(w, "head.fc2.bias")).mapv(|v| v.max(0.0));
    let z = linear(&z, matrix(w, "head.fc3.weight"), vector(w, "head.fc3.bias"));
    Ok(z[[0, 0]])
}

/// Probability that the window calls for wall-following.
pub fn vit_forward(obs: &ObservationMatrix, w: &WeightsBundle) -> Result<f64> {
    let logit = vit_logit(obs, w)?;
    Ok(sigmoid(f64::from(logit)))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switch_ls::observation::ObservationVector;
    use crate::switch_ls::weights::ViTConfig;

    fn window(cfg: &ViTConfig, seed: u64) -> ObservationMatrix {
        let rows = (0..cfg.t_seq)
            .map(|t| {
                ObservationVector::from_values(
                    (0..cfg.feature_dim()).map(|j| ((t * 31 + j * 7 + seed as usize) % 13) as f64 * 0.3 - 1.5).collect(),
                )
            })
            .collect();
        ObservationMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_network_outputs_one_half() {
        let cfg = ViTConfig { ray_count: 16, t_seq: 4, embed_dim: 16, mlp_dim: 16, layers: 3, heads: 4 };
        let w = WeightsBundle::zeros(cfg).unwrap();
        assert_eq!(vit_forward(&window(&cfg, 1), &w).unwrap(), 0.5);
    }

    #[test]
    fn head_bias_shifts_logit() {
        let cfg = ViTConfig { ray_count: 4, t_seq: 3, embed_dim: 8, mlp_dim: 8, layers: 1, heads: 2 };
        let mut w = WeightsBundle::random(cfg, 3).unwrap();
        let obs = window(&cfg, 2);
        let base = vit_logit(&obs, &w).unwrap();
        w.tensor_mut("head.fc3.bias").unwrap().data[0] += 0.75;
        let shifted = vit_logit(&obs, &w).unwrap();
        assert!((shifted - base - 0.75).abs() < 1e-6);
    }

    #[test]
    fn wrong_window_shape_is_config_error() {
        let cfg = ViTConfig { ray_count: 4, t_seq: 3, embed_dim: 8, mlp_dim: 8, layers: 1, heads: 2 };
        let w = WeightsBundle::zeros(cfg).unwrap();
        let short = ObservationMatrix::from_rows(window(&cfg, 0).rows()[..2].to_vec()).unwrap();
        assert!(matches!(vit_forward(&short, &w), Err(Error::Config(_))));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
