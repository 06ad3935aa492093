//! Batch experiments: layouts × robot counts × seeds × methods on a worker
//! pool, with a per-instance metrics CSV and a grouped summary table.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{generate_instance, Layout, Method, ScenarioSpec, Simulation};
use crate::switch_ls::LearnedSwitch;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Half-open seed range, written `A..B`, or closed, written `A..=B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedRange(pub Range<u64>);

impl SeedRange {
    pub fn iter(&self) -> Range<u64> {
        self.0.clone()
    }

    pub fn len(&self) -> usize {
        (self.0.end.saturating_sub(self.0.start)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FromStr for SeedRange {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("bad seed range {s:?}, expected A..B or A..=B"));
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        if let Some((a, b)) = s.split_once("..=") {
            let end = num(b)?.checked_add(1).ok_or_else(bad)?;
            Ok(SeedRange(num(a)?..end))
        } else if let Some((a, b)) = s.split_once("..") {
            Ok(SeedRange(num(a)?..num(b)?))
        } else {
            let a = num(s)?;
            Ok(SeedRange(a..a + 1))
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchPlan {
    pub layouts: Vec<Layout>,
    pub robot_counts: Vec<usize>,
    pub seeds: SeedRange,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
    /// Weights file, required when `methods` contains `apf-ls`.
    pub model: Option<PathBuf>,
    pub workers: usize,
    /// Also write one trajectory log per instance under `out_dir/logs`.
    pub save_logs: bool,
}

impl BatchPlan {
    pub fn new(layouts: Vec<Layout>, robot_counts: Vec<usize>, seeds: SeedRange, methods: Vec<Method>, out_dir: impl Into<PathBuf>) -> Self {
        Self { layouts, robot_counts, seeds, methods, out_dir: out_dir.into(), model: None, workers: 1, save_logs: false }
    }

    pub fn instance_count(&self) -> usize {
        self.layouts.len() * self.robot_counts.len() * self.seeds.len() * self.methods.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.instance_count() == 0 {
            return Err(Error::config("batch plan has no instances"));
        }
        if self.workers == 0 {
            return Err(Error::config("need at least one worker"));
        }
        if self.methods.contains(&Method::ApfLs) && self.model.is_none() {
            return Err(Error::config("method apf-ls needs --model"));
        }
        Ok(())
    }
}

/// One row of the metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub env: String,
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub success: bool,
    pub arrival_rate: f64,
    pub makespan: Option<u64>,
    pub mean_timestep: Option<f64>,
    pub collisions: usize,
}

impl InstanceRow {
    fn key(&self) -> (String, usize, Method, u64) {
        (self.env.clone(), self.n, self.method, self.seed)
    }
}

/// One row of the summary table, per (env, N, method).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub env: String,
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    pub instances: usize,
    pub success_rate: f64,
    pub arrival_rate_mean: f64,
    pub makespan_mean: Option<f64>,
    pub makespan_sd: Option<f64>,
    pub mean_timestep_mean: Option<f64>,
    pub mean_timestep_sd: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BatchOutput {
    pub rows: Vec<InstanceRow>,
    pub summary: Vec<SummaryRow>,
    pub metrics_path: PathBuf,
    pub summary_path: PathBuf,
}

struct Job {
    env: String,
    method: Method,
    spec: ScenarioSpec,
}

/// Generates every instance, then runs them on `plan.workers` threads.
///
/// Configuration and generation errors surface before any instance runs.
/// Output rows are sorted by (env, N, method, seed).
pub fn run_batch(plan: &BatchPlan) -> Result<BatchOutput> {
    plan.validate()?;
    let learned = match (&plan.model, plan.methods.contains(&Method::ApfLs)) {
        (Some(path), true) => Some(LearnedSwitch::load(path)?),
        _ => None,
    };
    let mut jobs = Vec::with_capacity(plan.instance_count());
    for layout in &plan.layouts {
        for &n in &plan.robot_counts {
            for seed in plan.seeds.iter() {
                let base = generate_instance(layout, n, seed)?;
                for &method in &plan.methods {
                    let mut spec = base.clone().with_method(method);
                    if method == Method::ApfLs {
                        spec.params.weights = plan.model.clone();
                        if let Some(ls) = &learned {
                            if ls.config().ray_count != spec.params.ray_count {
                                return Err(Error::config(format!(
                                    "weights expect M = {}, {layout} uses M = {}",
                                    ls.config().ray_count,
                                    spec.params.ray_count
                                )));
                            }
                        }
                    }
                    spec.validate()?;
                    jobs.push(Job { env: layout.name(), method, spec });
                }
            }
        }
    }

    fs::create_dir_all(&plan.out_dir)?;
    let log_dir = plan.out_dir.join("logs");
    if plan.save_logs {
        fs::create_dir_all(&log_dir)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<InstanceRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let mut sim = match (&learned, job.method) {
                    (Some(ls), Method::ApfLs) => Simulation::with_learned_switch(job.spec.clone(), ls.clone())?,
                    _ => Simulation::new(job.spec.clone())?,
                };
                let m = sim.run()?;
                let n = job.spec.robots.len();
                if plan.save_logs {
                    let name = format!("{}_{}_N{}_s{}.jsonl", job.env, job.method, n, job.spec.seed);
                    sim.log().save(log_dir.join(name))?;
                }
                Ok(InstanceRow {
                    env: job.env.clone(),
                    method: job.method,
                    n,
                    seed: job.spec.seed,
                    success: m.success,
                    arrival_rate: m.arrival_rate,
                    makespan: m.makespan,
                    mean_timestep: m.mean_timestep,
                    collisions: m.collision_count,
                })
            })
            .collect()
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(InstanceRow::key);

    let metrics_path = plan.out_dir.join(METRICS_FILE);
    write_csv(&metrics_path, &rows)?;
    let summary = summarize_rows(&rows);
    let summary_path = plan.out_dir.join(SUMMARY_FILE);
    write_csv(&summary_path, &summary)?;
    Ok(BatchOutput { rows, summary, metrics_path, summary_path })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<InstanceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation; undefined below two values.
fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Groups rows by (env, N, method). Makespan statistics cover successful
/// instances only; mean-timestep statistics cover instances where at least
/// one robot arrived cleanly.
pub fn summarize_rows(rows: &[InstanceRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, Method), Vec<&InstanceRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.env.clone(), r.n, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((env, n, method), g)| {
            let k = g.len() as f64;
            let makespans: Vec<f64> = g.iter().filter(|r| r.success).filter_map(|r| r.makespan).map(|m| m as f64).collect();
            let steps: Vec<f64> = g.iter().filter_map(|r| r.mean_timestep).collect();
            SummaryRow {
                env,
                method,
                n,
                instances: g.len(),
                success_rate: g.iter().filter(|r| r.success).count() as f64 / k,
                arrival_rate_mean: g.iter().map(|r| r.arrival_rate).sum::<f64>() / k,
                makespan_mean: mean(&makespans),
                makespan_sd: sample_sd(&makespans),
                mean_timestep_mean: mean(&steps),
                mean_timestep_sd: sample_sd(&steps),
            }
        })
        .collect()
}

/// Reads `metrics.csv` from a batch directory and writes the summary table.
pub fn summarize(in_dir: &Path, out: &Path) -> Result<Vec<SummaryRow>> {
    let path = if in_dir.is_dir() { in_dir.join(METRICS_FILE) } else { in_dir.to_path_buf() };
    if !path.exists() {
        return Err(Error::config(format!("no metrics file at {}", path.display())));
    }
    let summary = summarize_rows(&read_rows(&path)?);
    write_csv(out, &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, seed: u64, success: bool, makespan: Option<u64>, ts: Option<f64>) -> InstanceRow {
        InstanceRow {
            env: "swap".into(),
            method,
            n: 2,
            seed,
            success,
            arrival_rate: if success { 1.0 } else { 0.5 },
            makespan,
            mean_timestep: ts,
            collisions: 0,
        }
    }

    #[test]
    fn seed_range_syntax() {
        assert_eq!("0..50".parse::<SeedRange>().unwrap().len(), 50);
        assert_eq!("3..=5".parse::<SeedRange>().unwrap().iter().collect::<Vec<_>>(), vec![3, 4, 5]);
        assert_eq!("7".parse::<SeedRange>().unwrap().iter().collect::<Vec<_>>(), vec![7]);
        assert!("5..2".parse::<SeedRange>().unwrap().is_empty());
        assert!("a..b".parse::<SeedRange>().is_err());
    }

    #[test]
    fn summary_statistics() {
        let rows = vec![
            row(Method::ApfRs, 0, true, Some(100), Some(90.0)),
            row(Method::ApfRs, 1, true, Some(120), Some(100.0)),
            row(Method::ApfRs, 2, false, None, Some(80.0)),
            row(Method::Apf, 0, false, None, None),
        ];
        let s = summarize_rows(&rows);
        assert_eq!(s.len(), 2);
        let apf = &s[0];
        assert_eq!(apf.method, Method::Apf);
        assert_eq!(apf.success_rate, 0.0);
        assert_eq!(apf.makespan_mean, None);
        assert_eq!(apf.mean_timestep_mean, None);
        let rs = &s[1];
        assert_eq!(rs.instances, 3);
        assert!((rs.success_rate - 2.0 / 3.0).abs() < 1e-15);
        assert!((rs.arrival_rate_mean - 2.5 / 3.0).abs() < 1e-15);
        assert_eq!(rs.makespan_mean, Some(110.0));
        assert!((rs.makespan_sd.unwrap() - 200f64.sqrt()).abs() < 1e-12);
        assert_eq!(rs.mean_timestep_mean, Some(90.0));
        assert_eq!(rs.mean_timestep_sd, Some(10.0));
    }

    #[test]
    fn empty_makespan_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_csv(&path, &summarize_rows(&[row(Method::Apf, 0, false, None, None)])).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "env,method,N,instances,success_rate,arrival_rate_mean,makespan_mean,makespan_sd,mean_timestep_mean,mean_timestep_sd\n\
             swap,apf,2,1,0.0,0.5,,,,\n"
        );
    }

    #[test]
    fn learned_method_without_model_is_rejected_up_front() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let plan = BatchPlan::new(vec![Layout::Swap], vec![2], "0..2".parse().unwrap(), vec![Method::ApfLs], &out);
        assert!(matches!(run_batch(&plan), Err(Error::Config(_))));
        assert!(!out.exists());
    }

    #[test]
    fn empty_plan_is_rejected() {
        let plan = BatchPlan::new(vec![Layout::Swap], vec![], "0..2".parse().unwrap(), vec![Method::Apf], "unused");
        assert!(matches!(run_batch(&plan), Err(Error::Config(_))));
    }
}
