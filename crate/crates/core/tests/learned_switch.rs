use apfwf::agent::RobotState;
use apfwf::geom::Vec2;
use apfwf::potential::{total_force, PotentialParams};
use apfwf::sim::{generate_instance, Layout, Method, Simulation};
use apfwf::switch_ls::*;
use apfwf::switch_rs::SwitchMemory;
use apfwf::world::Scan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar f64 transcription of the encoder, written without ndarray.
fn naive_forward(rows: &[Vec<f64>], w: &WeightsBundle) -> f64 {
    let c = *w.config();
    let t = |name: &str| -> Vec<f64> { w.tensor(name).data.iter().map(|&v| f64::from(v)).collect() };
    let lin = |x: &[Vec<f64>], wn: &str, bn: &str, out: usize| -> Vec<Vec<f64>> {
        let (wm, b) = (t(wn), t(bn));
        let inp = x[0].len();
        x.iter()
            .map(|row| (0..out).map(|o| b[o] + (0..inp).map(|i| wm[o * inp + i] * row[i]).sum::<f64>()).collect())
            .collect()
    };
    let ln = |x: &[Vec<f64>], gn: &str, bn: &str| -> Vec<Vec<f64>> {
        let (g, b) = (t(gn), t(bn));
        x.iter()
            .map(|row| {
                let n = row.len() as f64;
                let mean = row.iter().sum::<f64>() / n;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                row.iter().enumerate().map(|(j, v)| (v - mean) / (var + 1e-5).sqrt() * g[j] + b[j]).collect()
            })
            .collect()
    };
    let e = c.embed_dim;
    let hd = e / c.heads;
    let mut x: Vec<Vec<f64>> = rows.to_vec();
    if let Some(n) = w.normalization() {
        for row in &mut x {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - f64::from(n.mean[j])) / f64::from(n.std[j]);
            }
        }
    }
    let pos = t("pos_embed");
    let mut h = lin(&x, "patch_embed.weight", "patch_embed.bias", e);
    for (i, row) in h.iter_mut().enumerate() {
        for j in 0..e {
            row[j] += pos[i * e + j];
        }
    }
    for l in 0..c.layers {
        let p = format!("encoder.{l}");
        let y = ln(&h, &format!("{p}.norm1.weight"), &format!("{p}.norm1.bias"));
        let qkv = lin(&y, &format!("{p}.attn.qkv.weight"), &format!("{p}.attn.qkv.bias"), 3 * e);
        let n = h.len();
        let mut merged = vec![vec![0.0; e]; n];
        for head in 0..c.heads {
            for i in 0..n {
                let q = &qkv[i][head * hd..(head + 1) * hd];
                let scores: Vec<f64> = (0..n)
                    .map(|j| {
                        let k = &qkv[j][e + head * hd..e + (head + 1) * hd];
                        q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / (hd as f64).sqrt()
                    })
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let ex: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = ex.iter().sum();
                for d in 0..hd {
                    merged[i][head * hd + d] = (0..n).map(|j| ex[j] / z * qkv[j][2 * e + head * hd + d]).sum();
                }
            }
        }
        let a = lin(&merged, &format!("{p}.attn.proj.weight"), &format!("{p}.attn.proj.bias"), e);
        for (hr, ar) in h.iter_mut().zip(&a) {
            hr.iter_mut().zip(ar).for_each(|(u, v)| *u += v);
        }
        let y = ln(&h, &format!("{p}.norm2.weight"), &format!("{p}.norm2.bias"));
        let mut m = lin(&y, &format!("{p}.mlp.fc1.weight"), &format!("{p}.mlp.fc1.bias"), c.mlp_dim);
        for row in &mut m {
            for v in row.iter_mut() {
                *v = 0.5 * *v * (1.0 + libm::erf(*v / std::f64::consts::SQRT_2));
            }
        }
        let f = lin(&m, &format!("{p}.mlp.fc2.weight"), &format!("{p}.mlp.fc2.bias"), e);
        for (hr, fr) in h.iter_mut().zip(&f) {
            hr.iter_mut().zip(fr).for_each(|(u, v)| *u += v);
        }
    }
    let h = ln(&h, "norm.weight", "norm.bias");
    let pooled: Vec<f64> = (0..e).map(|j| h.iter().map(|r| r[j]).sum::<f64>() / h.len() as f64).collect();
    let relu = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> { v.into_iter().map(|r| r.into_iter().map(|x| x.max(0.0)).collect()).collect() };
    let z = relu(lin(&[pooled], "head.fc1.weight", "head.fc1.bias", c.mlp_dim));
    let z = relu(lin(&z, "head.fc2.weight", "head.fc2.bias", c.mlp_dim));
    let z = lin(&z, "head.fc3.weight", "head.fc3.bias", 1);
    1.0 / (1.0 + (-z[0][0]).exp())
}

fn random_matrix(rng: &mut ChaCha8Rng, t_seq: usize, width: usize) -> ObservationMatrix {
    let rows = (0..t_seq)
        .map(|_| ObservationVector::from_values((0..width).map(|_| rng.gen_range(-3.0..3.0)).collect()))
        .collect();
    ObservationMatrix::from_rows(rows).unwrap()
}

#[test]
fn forward_pass_matches_naive_oracle() {
    let cfg = ViTConfig { ray_count: 8, t_seq: 4, embed_dim: 16, mlp_dim: 24, layers: 2, heads: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..5 {
        let mut w = WeightsBundle::random(cfg, seed).unwrap();
        // make biases and norms non-trivial as well
        for (name, _) in cfg.tensor_layout() {
            if name.ends_with(".bias") {
                w.tensor_mut(&name).unwrap().data.iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
            }
        }
        let f = cfg.feature_dim();
        let norm = Normalization {
            mean: (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            std: (0..f).map(|_| rng.gen_range(0.5..2.0)).collect(),
        };
        let w = w.with_normalization(Some(norm)).unwrap();
        for _ in 0..4 {
            let obs = random_matrix(&mut rng, cfg.t_seq, f);
            let rows: Vec<Vec<f64>> = obs.rows().iter().map(|r| r.as_slice().to_vec()).collect();
            let got = vit_forward(&obs, &w).unwrap();
            let expect = naive_forward(&rows, &w);
            assert!((got - expect).abs() < 1e-4, "{got} vs {expect}");
        }
    }
}

#[test]
fn observation_length_and_padding() {
    for m in [16, 100] {
        let scan = Scan::from_ranges(&vec![4.0; m], 10.0);
        let mem = SwitchMemory::new(RobotState::new(0.0, 0.0, 0.0));
        let g = Vec2::new(3.0, 1.0);
        let force = total_force(g, 0.0, &scan, &PotentialParams::default());
        let o = build_observation(&scan, g, &mem, &force, g);
        assert_eq!(o.len(), m + 17);

        let mut ep = EpisodeBuffer::new();
        for k in 0..15 {
            ep.push(ObservationVector::from_values(vec![(k + 1) as f64; m + 17]));
            let w = ep.stack(10).unwrap();
            assert_eq!(w.row_count(), 10);
            let pad = 10usize.saturating_sub(k + 1);
            for (i, row) in w.rows().iter().enumerate() {
                // padding repeats the first observation
                let expect = if i < pad { 1.0 } else { (k + 2 + i - 10) as f64 };
                assert!(row.as_slice().iter().all(|&v| v == expect), "k={k} row={i}");
            }
        }
    }
}

#[test]
fn zero_network_is_undecided_and_deterministic() {
    for m in [16, 100] {
        let cfg = ViTConfig::standard(m);
        let zeros = WeightsBundle::zeros(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = random_matrix(&mut rng, cfg.t_seq, cfg.feature_dim());
        assert_eq!(vit_forward(&obs, &zeros).unwrap(), 0.5);

        let w = WeightsBundle::random(ViTConfig { embed_dim: 64, mlp_dim: 64, ..cfg }, 4).unwrap();
        let first = vit_forward(&obs, &w).unwrap();
        for _ in 0..100 {
            assert_eq!(vit_forward(&obs, &w).unwrap().to_bits(), first.to_bits());
        }
    }
}

#[test]
fn weights_file_round_trips_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    let cfg = ViTConfig { ray_count: 16, t_seq: 10, embed_dim: 32, mlp_dim: 32, layers: 3, heads: 4 };
    let w = WeightsBundle::random(cfg, 7).unwrap();
    w.save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
    for key in ["format_version", "M", "T_seq", "embed_dim", "mlp_dim", "layers", "heads", "normalization", "tensors"] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    let first = &manifest["tensors"][0];
    assert_eq!(first["dtype"], "f32");
    assert_eq!(first["offset"], 0);
    let back = WeightsBundle::load(&path).unwrap();
    assert_eq!(back, w);
    assert_eq!(back.to_bytes().unwrap(), bytes);

    // manifest M inconsistent with the tensor shapes
    let mut m2 = manifest.clone();
    m2["M"] = serde_json::json!(17);
    let mut tampered = serde_json::to_vec(&m2).unwrap();
    tampered.push(b'\n');
    tampered.extend_from_slice(&bytes[nl + 1..]);
    assert!(WeightsBundle::from_bytes(&tampered).is_err());
    assert!(WeightsBundle::from_bytes(&bytes[..bytes.len() - 4]).is_err());
}

#[test]
fn learned_switch_drives_a_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    let cfg = ViTConfig { ray_count: 100, t_seq: 10, embed_dim: 16, mlp_dim: 16, layers: 1, heads: 2 };
    WeightsBundle::random(cfg, 1).unwrap().save(&path).unwrap();
    let mut spec = generate_instance(&Layout::Swap, 2, 0).unwrap().with_method(Method::ApfLs);
    spec.params.weights = Some(path);
    spec.params.step_limit = 40;
    let mut sim = Simulation::new(spec.clone()).unwrap();
    sim.run().unwrap();
    let mut again = Simulation::new(spec).unwrap();
    again.run().unwrap();
    assert_eq!(sim.log(), again.log());
    assert_eq!(sim.robots()[0].episode().len(), 40);

    let mut wrong = generate_instance(&Layout::Swap, 2, 0).unwrap().with_method(Method::ApfLs);
    wrong.params.ray_count = 36;
    let ls = LearnedSwitch::new(WeightsBundle::random(cfg, 1).unwrap());
    assert!(Simulation::with_learned_switch(wrong, ls).is_err());
}
