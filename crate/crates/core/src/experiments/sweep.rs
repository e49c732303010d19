use std::io::Write;
use std::path::Path;
use std::time::Instant;

use num_rational::BigRational;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::config::{config_hash, tool_version, Evaluation, ExperimentConfig, Instance, SweepMode};
use crate::experiments::montecarlo::monte_carlo_revenue;
use crate::learner::{audit_against, learn_bic, learn_dsic, revenue_on_true_prior, LearnMode, LearnedMechanism};
use crate::lp_oracle::{solve_optimal, IcMode, OracleProblem};
use crate::mechanism_core::regret_report;
use crate::myerson::learn_single_parameter;
use crate::scalar::Scalar;

/// Environment variable bounding the worker pool; unset means one worker per core.
pub const WORKERS_ENV: &str = "MECHLEARN_WORKERS";

/// One learning run.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub sample_size: usize,
    pub seed: u64,
    pub revenue: f64,
    pub benchmark: f64,
    pub gap: f64,
    pub bic_regret: f64,
    pub dsic_regret: f64,
    pub ir_slack: f64,
    pub within_bound: bool,
    pub wall_ms: u128,
}

/// Per-sample-size aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub sample_size: usize,
    pub runs: usize,
    pub mean_gap: f64,
    pub se_gap: f64,
    pub fraction_within_eps: f64,
    pub max_bic_regret: f64,
    pub max_dsic_regret: f64,
    pub min_ir_slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub config_hash: String,
    pub epsilon: f64,
    pub benchmark: BigRational,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

/// Runs `f` inside a pool sized by `MECHLEARN_WORKERS` when set.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let workers: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::internal(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Exact optimum on the rounded true prior: BIC for BIC and single-parameter
/// sweeps, exact DSIC for DSIC sweeps.
pub fn benchmark(instance: &Instance, mode: SweepMode) -> Result<BigRational> {
    let prior = instance.truth.rounded::<BigRational>(&instance.grid)?;
    let ic = match mode {
        SweepMode::Dsic => IcMode::DsicSlack(0.0),
        _ => IcMode::Bic,
    };
    Ok(solve_optimal(&OracleProblem::new(&prior, &instance.space, &instance.model, ic)?)?.objective_value)
}

fn learn(instance: &Instance, mode: SweepMode, s: usize, seed: u64) -> Result<LearnedMechanism<f64>> {
    let samples = instance.truth.sample(s, seed)?;
    match mode {
        SweepMode::Bic => learn_bic(&samples, &instance.grid, &instance.space, &instance.model),
        SweepMode::Dsic => learn_dsic(&samples, &instance.grid, &instance.space, &instance.model),
        SweepMode::SingleParameter => LearnedMechanism::new(
            learn_single_parameter(&samples, &instance.grid, &instance.space)?,
            LearnMode::SingleParameter,
            None,
        ),
    }
}

fn run_one(config: &ExperimentConfig, instance: &Instance, bench: f64, s: usize, seed: u64) -> Result<SweepRow> {
    let start = Instant::now();
    let learned = learn(instance, config.mode, s, seed)?;
    let revenue = match config.evaluation {
        Evaluation::Exact => revenue_on_true_prior(&learned, &instance.truth)?.to_f64_lossy(),
        Evaluation::MonteCarlo { samples } => monte_carlo_revenue(&learned, &instance.truth, samples, seed)?.mean,
    };
    let prior = instance.truth.rounded::<f64>(&instance.grid)?;
    let (report, within_bound) = match config.mode {
        SweepMode::SingleParameter => {
            let report = regret_report(learned.inner(), &prior, &instance.model, &instance.space)?;
            let ok = report.dsic_regret <= 1e-9 && report.ir_slack >= -1e-9;
            (report, ok)
        }
        _ => {
            let audit = audit_against(&learned, &prior, &instance.model, &instance.space)?;
            (audit.report, audit.within)
        }
    };
    Ok(SweepRow {
        sample_size: s,
        seed,
        revenue,
        benchmark: bench,
        gap: bench - revenue,
        bic_regret: report.bic_regret,
        dsic_regret: report.dsic_regret,
        ir_slack: report.ir_slack,
        within_bound,
        wall_ms: start.elapsed().as_millis(),
    })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(rows: &[SweepRow], sizes: &[usize], epsilon: f64) -> Vec<SummaryRow> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|s| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.sample_size == s).collect();
            let gaps: Vec<f64> = group.iter().map(|r| r.gap).collect();
            let (mean_gap, se_gap) = mean_se(&gaps);
            SummaryRow {
                sample_size: s,
                runs: group.len(),
                mean_gap,
                se_gap,
                fraction_within_eps: gaps.iter().filter(|&&g| g <= epsilon + 1e-12).count() as f64 / gaps.len() as f64,
                max_bic_regret: group.iter().map(|r| r.bic_regret).fold(f64::NEG_INFINITY, f64::max),
                max_dsic_regret: group.iter().map(|r| r.dsic_regret).fold(f64::NEG_INFINITY, f64::max),
                min_ir_slack: group.iter().map(|r| r.ir_slack).fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}

/// Learns once per (sample size, seed), in parallel, and scores every run.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let instance = config.instance.build()?;
    let bench = benchmark(&instance, config.mode)?;
    let bench_f = bench.to_f64_lossy();
    let mut jobs: Vec<(usize, u64)> = Vec::new();
    for &s in &config.sample_sizes {
        for seed in config.seeds.seeds() {
            jobs.push((s, seed));
        }
    }
    jobs.sort_unstable();
    jobs.dedup();
    let rows = with_workers(|| {
        jobs.par_iter()
            .map(|&(s, seed)| run_one(config, &instance, bench_f, s, seed))
            .collect::<Result<Vec<_>>>()
    })??;
    let summary = summarize(&rows, &config.sample_sizes, instance.grid.epsilon());
    Ok(SweepResult { config_hash: config_hash(config)?, epsilon: instance.grid.epsilon(), benchmark: bench, rows, summary })
}

impl SweepResult {
    fn preamble(&self, out: &mut impl Write) -> Result<()> {
        let seeds: Vec<String> = {
            let mut s: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
            s.sort_unstable();
            s.dedup();
            s.iter().map(u64::to_string).collect()
        };
        writeln!(out, "# {} config_hash={} seeds={}", tool_version(), self.config_hash, seeds.join(";"))?;
        Ok(())
    }

    /// Per-run results, sorted by (sample size, seed); no timing columns.
    pub fn write_rows<W: Write>(&self, mut out: W) -> Result<()> {
        self.preamble(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "sample_size", "seed", "revenue", "benchmark", "gap", "bic_regret", "dsic_regret", "ir_slack", "within_bound",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.sample_size.to_string(),
                r.seed.to_string(),
                r.revenue.to_string(),
                r.benchmark.to_string(),
                r.gap.to_string(),
                r.bic_regret.to_string(),
                r.dsic_regret.to_string(),
                r.ir_slack.to_string(),
                r.within_bound.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        self.preamble(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "sample_size",
            "runs",
            "mean_gap",
            "se_gap",
            "fraction_within_eps",
            "max_bic_regret",
            "max_dsic_regret",
            "min_ir_slack",
        ])?;
        for r in &self.summary {
            w.write_record([
                r.sample_size.to_string(),
                r.runs.to_string(),
                r.mean_gap.to_string(),
                r.se_gap.to_string(),
                r.fraction_within_eps.to_string(),
                r.max_bic_regret.to_string(),
                r.max_dsic_regret.to_string(),
                r.min_ir_slack.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Wall-clock times, kept apart so the other files stay reproducible.
    pub fn write_timings<W: Write>(&self, mut out: W) -> Result<()> {
        self.preamble(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample_size", "seed", "wall_ms"])?;
        for r in &self.rows {
            w.write_record([r.sample_size.to_string(), r.seed.to_string(), r.wall_ms.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `sweep.csv`, `summary.csv` and `timings.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_rows(std::fs::File::create(dir.join("sweep.csv"))?)?;
        self.write_summary(std::fs::File::create(dir.join("summary.csv"))?)?;
        self.write_timings(std::fs::File::create(dir.join("timings.csv"))?)?;
        Ok(())
    }

    /// Whether per-size mean gaps never rise by more than two combined standard errors.
    pub fn gaps_non_increasing(&self) -> bool {
        self.summary.windows(2).all(|w| {
            let slack = 2.0 * (w[0].se_gap.powi(2) + w[1].se_gap.powi(2)).sqrt();
            w[1].mean_gap <= w[0].mean_gap + slack + 1e-12
        })
    }
}
