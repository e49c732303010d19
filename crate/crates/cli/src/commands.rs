use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use mechlearn::experiments::{
    config_hash, monte_carlo_revenue, read_json_config, run_concentration, run_sweep, tool_version, ConcentrationConfig,
    ExperimentConfig, Instance, InstanceConfig,
};
use mechlearn::grid_prior::SampleSet;
use mechlearn::learner::{
    audit_against, learn_bic, learn_dsic, mechanism_to_menu, nudge_to_ic, revenue_on_true_prior, LearnMode,
    LearnedMechanism,
};
use mechlearn::lp_oracle::{solve_optimal, IcMode, OracleProblem};
use mechlearn::mechanism_core::{regret_report, regret_report_on_domain, MechanismTable, Provenance, RegretReport};
use mechlearn::myerson::{iron, learn_single_parameter, MyersonAuction};
use mechlearn::{Error, Rational, Result, Scalar};
use serde_json::json;

use crate::{OracleMode, SampleArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnKind {
    Bic,
    Dsic,
    Single,
}

/// Loads an instance config, or the instance of an experiment config.
fn load_instance(path: &Path) -> Result<(InstanceConfig, Instance)> {
    let value: serde_json::Value = read_json_config(path)?;
    let config: InstanceConfig = if value.get("instance").is_some() {
        serde_json::from_value::<ExperimentConfig>(value)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
            .instance
    } else {
        serde_json::from_value(value).map_err(|e| Error::config(format!("{}: {e}", path.display())))?
    };
    let instance = config.build()?;
    Ok((config, instance))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_mechanism<T: Scalar>(table: &MechanismTable<T>, provenance: &Provenance, out: &Path) -> Result<()> {
    let mut w = create(out)?;
    table.write_json(&mut w, provenance)?;
    w.flush()?;
    Ok(())
}

fn print(value: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn provenance(mode: &str, config: &InstanceConfig, seed: Option<u64>) -> Result<Provenance> {
    Ok(Provenance {
        mode: Some(mode.into()),
        config_hash: Some(config_hash(config)?),
        seed,
        tool_version: Some(tool_version()),
        ..Default::default()
    })
}

fn load_samples(args: &SampleArgs, instance: &Instance) -> Result<SampleSet> {
    let samples = match (&args.samples_file, args.samples) {
        (Some(path), _) => SampleSet::read_csv(BufReader::new(File::open(path)?), args.seed)?,
        (None, Some(s)) => instance.truth.sample(s, args.seed)?,
        (None, None) => return Err(Error::usage("give --samples or --samples-file")),
    };
    if samples.n() != instance.truth.n() || samples.m() != instance.truth.m() {
        return Err(Error::usage(format!(
            "samples are {}x{}, the instance is {}x{}",
            samples.n(),
            samples.m(),
            instance.truth.n(),
            instance.truth.m()
        )));
    }
    Ok(samples)
}

pub fn learn(args: &SampleArgs, kind: LearnKind) -> Result<()> {
    let (config, instance) = load_instance(&args.config)?;
    let samples = load_samples(args, &instance)?;
    let (grid, space, model) = (&instance.grid, &instance.space, &instance.model);
    if let Some(path) = &args.lp_dump {
        if kind == LearnKind::Single {
            return Err(Error::usage("learn-single solves no linear program; drop --lp-dump"));
        }
        let prior = samples.empirical_prior::<f64>(grid)?;
        let mode = match kind {
            LearnKind::Dsic => IcMode::DsicSlack(2.0 * samples.m() as f64 * grid.epsilon()),
            _ => IcMode::Bic,
        };
        let mut w = create(path)?;
        w.write_all(OracleProblem::new(&prior, space, model, mode)?.lp_text()?.as_bytes())?;
        w.flush()?;
    }
    let learned = match kind {
        LearnKind::Bic => learn_bic::<f64>(&samples, grid, space, model)?,
        LearnKind::Dsic => learn_dsic::<f64>(&samples, grid, space, model)?,
        LearnKind::Single => {
            LearnedMechanism::new(learn_single_parameter(&samples, grid, space)?, LearnMode::SingleParameter, None)?
        }
    };
    let mut prov = provenance(learned.mode().name(), &config, Some(args.seed))?;
    prov.objective = learned.objective().map(|o| o.encode());
    write_mechanism(learned.inner(), &prov, &args.out)?;
    print(json!({
        "mode": learned.mode().name(),
        "samples_per_cell": samples.samples_per_cell(),
        "seed": args.seed,
        "empirical_objective": learned.objective(),
        "rows": learned.inner().rows().len(),
        "out": args.out.display().to_string(),
    }))
}

fn oracle_typed<T: Scalar>(
    config: &InstanceConfig,
    instance: &Instance,
    mode: IcMode,
    out: &Path,
    lp_dump: Option<&Path>,
) -> Result<()> {
    let prior = instance.truth.rounded::<T>(&instance.grid)?;
    let problem = OracleProblem::new(&prior, &instance.space, &instance.model, mode)?;
    if let Some(path) = lp_dump {
        let mut w = create(path)?;
        w.write_all(problem.lp_text()?.as_bytes())?;
        w.flush()?;
    }
    let solution = solve_optimal(&problem)?;
    let mode_name = match mode {
        IcMode::Bic => "oracle-bic",
        IcMode::DsicSlack(_) => "oracle-dsic",
    };
    let mut prov = provenance(mode_name, config, None)?;
    prov.objective = Some(solution.objective_value.encode());
    prov.certificate = Some(solution.certificate.encode());
    if let IcMode::DsicSlack(eta) = mode {
        prov.slack = Some(eta);
    }
    write_mechanism(&solution.mechanism, &prov, out)?;
    print(json!({
        "mode": mode_name,
        "objective": solution.objective_value.encode(),
        "certificate": solution.certificate.encode(),
        "status": format!("{:?}", solution.status),
        "pivots": solution.pivots,
        "out": out.display().to_string(),
    }))
}

pub fn oracle(config: &Path, mode: OracleMode, eta: f64, exact: bool, out: &Path, lp_dump: Option<&Path>) -> Result<()> {
    let (config, instance) = load_instance(config)?;
    let mode = match mode {
        OracleMode::Bic => IcMode::Bic,
        OracleMode::Dsic => {
            if !(eta >= 0.0) {
                return Err(Error::usage(format!("--eta must be nonnegative, got {eta}")));
            }
            IcMode::DsicSlack(eta)
        }
    };
    if exact {
        oracle_typed::<Rational>(&config, &instance, mode, out, lp_dump)
    } else {
        oracle_typed::<f64>(&config, &instance, mode, out, lp_dump)
    }
}

pub fn myerson(
    config: &Path,
    out: Option<&Path>,
    csv_dir: Option<&Path>,
    bids: Option<&[f64]>,
    allocate_ties: bool,
) -> Result<()> {
    let (config, instance) = load_instance(config)?;
    if config.m != 1 {
        return Err(Error::usage("myerson needs a single-parameter instance (m = 1)"));
    }
    let prior = instance.truth.rounded::<Rational>(&instance.grid)?;
    let auction = MyersonAuction::new(prior.marginals().iter().map(iron).collect(), &instance.space, allocate_ties)?;
    if let Some(dir) = csv_dir {
        std::fs::create_dir_all(dir)?;
        for (i, v) in auction.virtuals().iter().enumerate() {
            let mut w = create(&dir.join(format!("ironed_bidder{i}.csv")))?;
            v.write_csv(&mut w)?;
        }
    }
    if let Some(path) = out {
        let table = auction.full_table::<Rational>()?;
        write_mechanism(&table, &provenance("myerson", &config, None)?, path)?;
    }
    let phi: Vec<Vec<String>> = auction.virtuals().iter().map(|v| v.phi().iter().map(|x| x.encode()).collect()).collect();
    let mut report = json!({ "phi": phi });
    if let Some(bids) = bids {
        if bids.len() != config.n {
            return Err(Error::usage(format!("expected {} bids, got {}", config.n, bids.len())));
        }
        let grid_bids: Vec<u32> =
            bids.iter().map(|&b| instance.grid.round_down(b).map(|g| g.0)).collect::<Result<_>>()?;
        let priced = auction.run_levels(&auction.snap_levels(&grid_bids))?;
        report["outcome"] = json!(priced.outcome);
        report["payments"] = json!(priced.payments.iter().map(|p| p.encode()).collect::<Vec<_>>());
    }
    print(report)
}

fn scalar_of(path: &Path) -> Result<String> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    Ok(value["header"]["scalar"].as_str().unwrap_or("f64").to_string())
}

fn read_mechanism<T: Scalar>(path: &Path) -> Result<(MechanismTable<T>, Provenance)> {
    MechanismTable::read_json(BufReader::new(File::open(path)?))
}

fn check_grid<T: Scalar>(table: &MechanismTable<T>, instance: &Instance) -> Result<()> {
    if table.grid() != &instance.grid || table.n() != instance.truth.n() || table.m() != instance.truth.m() {
        return Err(Error::usage("mechanism and instance disagree on grid or shape"));
    }
    table.check_space(&instance.space)
}

fn nudge_typed<T: Scalar>(mech: &Path, config: &InstanceConfig, instance: &Instance, eps: f64, out: &Path) -> Result<()> {
    let (table, source) = read_mechanism::<T>(mech)?;
    check_grid(&table, instance)?;
    let menu = mechanism_to_menu(&table, &instance.space, &instance.model)?;
    let nudged = nudge_to_ic(&menu, eps)?.to_table(instance.grid, config.m, &instance.space, &instance.model)?;
    let mut prov = provenance(LearnMode::SingleBidderIc.name(), config, source.seed)?;
    prov.slack = Some(0.0);
    write_mechanism(&nudged, &prov, out)?;
    print(json!({ "menu_entries": menu.len(), "epsilon": eps, "out": out.display().to_string() }))
}

pub fn nudge(mech: &Path, config: &Path, eps: f64, out: &Path) -> Result<()> {
    let (config, instance) = load_instance(config)?;
    if scalar_of(mech)? == Rational::NAME {
        nudge_typed::<Rational>(mech, &config, &instance, eps, out)
    } else {
        nudge_typed::<f64>(mech, &config, &instance, eps, out)
    }
}

pub fn sweep(config: &Path, out_dir: &Path) -> Result<()> {
    let config: ExperimentConfig = read_json_config(config)?;
    let result = run_sweep(&config)?;
    result.write_dir(out_dir)?;
    let summary: Vec<serde_json::Value> = result
        .summary
        .iter()
        .map(|s| {
            json!({
                "sample_size": s.sample_size,
                "runs": s.runs,
                "mean_gap": s.mean_gap,
                "se_gap": s.se_gap,
                "fraction_within_eps": s.fraction_within_eps,
            })
        })
        .collect();
    print(json!({
        "config_hash": result.config_hash,
        "benchmark": result.benchmark.encode(),
        "summary": summary,
        "gaps_non_increasing": result.gaps_non_increasing(),
        "out_dir": out_dir.display().to_string(),
    }))
}

pub fn concentrate(config: &Path, seed: u64, out: Option<&Path>) -> Result<()> {
    let parsed: ConcentrationConfig = read_json_config(config)?;
    let r = run_concentration(&parsed, seed)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        writeln!(w, "# {} config_hash={} seed={seed}", tool_version(), config_hash(&parsed)?)?;
        let mut csv = csv_writer(w);
        csv.write_record(["trials", "violations", "frequency", "standard_error", "bound", "true_mean", "max_deviation"])
            .map_err(Error::from)?;
        csv.write_record([
            r.trials.to_string(),
            r.violations.to_string(),
            format!("{:?}", r.frequency),
            format!("{:?}", r.standard_error),
            format!("{:?}", r.bound),
            format!("{:?}", r.true_mean),
            format!("{:?}", r.max_deviation),
        ])
        .map_err(Error::from)?;
        csv.flush()?;
    }
    print(json!({
        "trials": r.trials,
        "violations": r.violations,
        "frequency": r.frequency,
        "bound": r.bound,
        "standard_error": r.standard_error,
        "within_bound": r.within_bound(),
        "true_mean": r.true_mean,
        "max_deviation": r.max_deviation,
    }))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn learned_of<T: Scalar>(table: MechanismTable<T>, prov: &Provenance) -> Result<LearnedMechanism<T>> {
    let mode = prov.mode.as_deref().and_then(LearnMode::parse).unwrap_or(LearnMode::Bic);
    LearnedMechanism::new(table, mode, None)
}

fn eval_typed<T: Scalar>(mech: &Path, instance: &Instance, mc_samples: usize, seed: Option<u64>) -> Result<()> {
    let (table, prov) = read_mechanism::<T>(mech)?;
    check_grid(&table, instance)?;
    if !table.is_full() {
        return Err(Error::usage("eval needs a full-grid mechanism; oracle outputs cover the prior support only"));
    }
    let learned = learned_of(table, &prov)?;
    let mut report = json!({});
    if instance.truth.is_discrete() {
        let exact = revenue_on_true_prior(&learned, &instance.truth)?;
        report["exact_revenue"] = json!(exact.encode());
        report["exact_revenue_f64"] = json!(exact.to_f64_lossy());
    }
    if mc_samples > 0 {
        let seed = seed.ok_or_else(|| Error::usage("--mc-samples needs --seed"))?;
        let est = monte_carlo_revenue(&learned, &instance.truth, mc_samples, seed)?;
        report["monte_carlo"] = json!({ "mean": est.mean, "standard_error": est.se, "samples": est.samples, "seed": seed });
    }
    print(report)
}

pub fn eval(mech: &Path, config: &Path, mc_samples: usize, seed: Option<u64>) -> Result<()> {
    let (_, instance) = load_instance(config)?;
    if scalar_of(mech)? == Rational::NAME {
        eval_typed::<Rational>(mech, &instance, mc_samples, seed)
    } else {
        eval_typed::<f64>(mech, &instance, mc_samples, seed)
    }
}

fn report_json<T: Scalar>(r: &RegretReport<T>) -> serde_json::Value {
    json!({
        "bic_regret": r.bic_regret.to_f64_lossy(),
        "bic_witness": {"bidder": r.bic_witness.bidder, "true_type": r.bic_witness.true_type, "report": r.bic_witness.report},
        "dsic_regret": r.dsic_regret.to_f64_lossy(),
        "dsic_witness": {"bidder": r.dsic_witness.bidder, "profile": r.dsic_witness.profile, "report": r.dsic_witness.report},
        "ir_slack": r.ir_slack.to_f64_lossy(),
        "ir_witness": {"bidder": r.ir_witness.bidder, "profile": r.ir_witness.profile},
    })
}

fn verify_typed<T: Scalar>(mech: &Path, instance: &Instance) -> Result<()> {
    let (table, prov) = read_mechanism::<T>(mech)?;
    check_grid(&table, instance)?;
    let prior = instance.truth.rounded::<T>(&instance.grid)?;
    let (model, space) = (&instance.model, &instance.space);
    let tol = 1e-8;
    let mode = prov.mode.clone().unwrap_or_default();
    // (report, checked quantity, bound) per declared guarantee
    let (report, checks): (RegretReport<T>, Vec<(&str, f64, f64)>) = match mode.as_str() {
        "oracle-bic" => {
            let r = regret_report_on_domain(&table, &prior, model, space)?;
            let checks = vec![("bic_regret", r.bic_regret.to_f64_lossy(), tol)];
            (r, checks)
        }
        "oracle-dsic" => {
            let r = regret_report_on_domain(&table, &prior, model, space)?;
            let checks = vec![("dsic_regret", r.dsic_regret.to_f64_lossy(), prov.slack.unwrap_or(0.0) + tol)];
            (r, checks)
        }
        "bic" | "dsic" => {
            let learned = learned_of(table, &prov)?;
            let audit = audit_against(&learned, &prior, model, space)?;
            let (name, value) = if mode == "bic" {
                ("bic_regret", audit.report.bic_regret.to_f64_lossy())
            } else {
                ("dsic_regret", audit.report.dsic_regret.to_f64_lossy())
            };
            let checks = vec![(name, value, audit.bound + tol)];
            (audit.report, checks)
        }
        "single_parameter" | "myerson" | "single_bidder_ic" => {
            let r = regret_report(&table, &prior, model, space)?;
            let checks = vec![("dsic_regret", r.dsic_regret.to_f64_lossy(), 1e-9), ("bic_regret", r.bic_regret.to_f64_lossy(), 1e-9)];
            (r, checks)
        }
        _ => {
            let r = if table.is_full() {
                regret_report(&table, &prior, model, space)?
            } else {
                regret_report_on_domain(&table, &prior, model, space)?
            };
            (r, Vec::new())
        }
    };
    let mut failed: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (name, value, bound) in checks {
        let ok = value <= bound;
        if !ok {
            failed.push(format!("{name} = {value} exceeds {bound}"));
        }
        rows.push(json!({ "check": name, "value": value, "bound": bound, "ok": ok }));
    }
    let ir = report.ir_slack.to_f64_lossy();
    if ir < -tol {
        failed.push(format!("ir_slack = {ir} is below {}", -tol));
    }
    rows.push(json!({ "check": "ir_slack", "value": ir, "bound": -tol, "ok": ir >= -tol }));
    print(json!({ "mode": mode, "report": report_json(&report), "checks": rows }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::internal(format!("invariant failed: {}", failed.join("; "))))
    }
}

pub fn verify(mech: &Path, config: &Path) -> Result<()> {
    let (_, instance) = load_instance(config)?;
    if scalar_of(mech)? == Rational::NAME {
        verify_typed::<Rational>(mech, &instance)
    } else {
        verify_typed::<f64>(mech, &instance)
    }
}
