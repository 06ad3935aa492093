//! Position swap on a 5 m circle: success rates for both methods over a
//! seed range, written to a temporary results directory.
//!
//! cargo run --release --example swap_benchmark -- 6 20

use apfwf::batch::{run_batch, BatchPlan, SeedRange};
use apfwf::sim::{Layout, Method};

fn main() -> apfwf::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(6), |s| s.parse()).expect("robot count");
    let seeds: u64 = args.next().map_or(Ok(20), |s| s.parse()).expect("seed count");

    let out = std::env::temp_dir().join("apfwf_swap_benchmark");
    let mut plan = BatchPlan::new(vec![Layout::Swap], vec![n], SeedRange(0..seeds), vec![Method::Apf, Method::ApfRs], &out);
    plan.workers = std::thread::available_parallelism().map_or(1, |w| w.get());
    let res = run_batch(&plan)?;
    for s in &res.summary {
        println!(
            "{:<7} N={} success {:>5.1}%  arrival {:.3}  makespan {}",
            s.method,
            s.n,
            100.0 * s.success_rate,
            s.arrival_rate_mean,
            s.makespan_mean.map_or("-".into(), |m| format!("{m:.1} ± {:.1}", s.makespan_sd.unwrap_or(0.0)))
        );
    }
    println!("per-instance rows in {}", res.metrics_path.display());
    Ok(())
}
