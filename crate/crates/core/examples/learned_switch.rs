//! Writes a randomly initialised classifier to a weights file, loads it back
//! and lets it drive the mode switch in a short swap run.

use apfwf::sim::{generate_instance, Layout, Method, Simulation};
use apfwf::switch_ls::{LearnedSwitch, ViTConfig, WeightsBundle};
use apfwf::switch_rs::Mode;

fn main() -> apfwf::Result<()> {
    let config = ViTConfig { embed_dim: 32, mlp_dim: 64, layers: 2, heads: 4, ..ViTConfig::standard(100) };
    let path = std::env::temp_dir().join("apfwf_example_weights.bin");
    WeightsBundle::random(config, 42)?.save(&path)?;
    let switch = LearnedSwitch::load(&path)?;
    println!("loaded {} ({} rays, window {})", path.display(), config.ray_count, config.t_seq);

    let mut spec = generate_instance(&Layout::Swap, 4, 3)?.with_method(Method::ApfLs);
    spec.params.step_limit = 200;
    let mut sim = Simulation::with_learned_switch(spec, switch)?;
    let metrics = sim.run()?;
    let wf = sim.log().records.iter().filter(|r| r.mode == Mode::Wf).count();
    println!("success={} arrival rate={:.2}, {wf} wall-following robot-steps", metrics.success, metrics.arrival_rate);
    Ok(())
}
