use num_rational::BigRational;

use super::*;
use crate::error::Error;
use crate::grid_prior::{DiscreteMarginal, GridSpec, ProductPrior};
use crate::learner::{learn_bic, revenue_on_true_prior};
use crate::scalar::Scalar;

fn config(json: &str) -> ExperimentConfig {
    serde_json::from_str(json).unwrap()
}

const POINT_MASS: &str = r#"{
  "instance": {"n": 1, "m": 1, "epsilon": 0.5, "h": 2.0,
               "prior": {"family": "point_mass", "params": {"value": 1.5}},
               "space": {"kind": "multi_item"}},
  "mode": "bic", "sample_sizes": [5, 20], "seeds": {"start": 0, "count": 3}
}"#;

#[test]
fn point_mass_sweep_has_zero_gap() {
    let result = run_sweep(&config(POINT_MASS)).unwrap();
    assert_eq!(result.rows.len(), 6);
    assert!(result.rows.iter().all(|r| r.gap.abs() < 1e-9 && r.within_bound), "{:?}", result.rows);
    assert_eq!(result.summary.iter().map(|s| s.fraction_within_eps).collect::<Vec<_>>(), vec![1.0, 1.0]);
    assert!(result.gaps_non_increasing());
}

#[test]
fn sweep_files_are_reproducible() {
    let cfg = config(POINT_MASS);
    let render = || {
        let r = run_sweep(&cfg).unwrap();
        let mut rows = Vec::new();
        r.write_rows(&mut rows).unwrap();
        let mut summary = Vec::new();
        r.write_summary(&mut summary).unwrap();
        (rows, summary)
    };
    let (a, b) = (render(), render());
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    assert!(text.starts_with(&format!("# {} config_hash={} seeds=0;1;2\n", tool_version(), config_hash(&cfg).unwrap())));
    assert!(text.contains("sample_size,seed,revenue,benchmark,gap,bic_regret,dsic_regret,ir_slack,within_bound\n5,0,"));
}

#[test]
fn config_hash_tracks_content() {
    let a = config(POINT_MASS);
    let mut b = a.clone();
    b.sample_sizes.push(40);
    assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    assert_eq!(config_hash(&a).unwrap(), config_hash(&a.clone()).unwrap());
    assert_eq!(config_hash(&a).unwrap().len(), 16);
}

#[test]
fn exact_evaluation_needs_a_grid_prior() {
    let cfg = config(&POINT_MASS.replace("1.5", "1.3"));
    assert!(matches!(cfg.validate(), Err(Error::Config(ref s)) if s.contains("monte_carlo")));
    let mut mc = cfg.clone();
    mc.evaluation = Evaluation::MonteCarlo { samples: 100 };
    mc.validate().unwrap();
    let result = run_sweep(&mc).unwrap();
    // benchmark is the rounded optimum 1.0, learned price 1.0 sells always
    assert!(result.rows.iter().all(|r| (r.revenue - 1.0).abs() < 1e-12));
}

#[test]
fn unknown_fields_are_rejected() {
    let bad = POINT_MASS.replace("\"mode\"", "\"extra\": 1, \"mode\"");
    assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
}

#[test]
fn single_parameter_sweep() {
    let json = r#"{
      "instance": {"n": 2, "m": 1, "epsilon": 1.0, "h": 2.0,
                   "prior": {"family": "discrete", "params": {"values": [1, 2], "probs": ["1/2", "1/2"]}},
                   "space": {"kind": "single_item"}},
      "mode": "single_parameter", "sample_sizes": [200], "seeds": [4, 5]
    }"#;
    let result = run_sweep(&config(json)).unwrap();
    assert!(result.rows.iter().all(|r| r.dsic_regret <= 1e-9 && r.within_bound));
    // two bidders uniform{1,2}: expected positive part of the top virtual value, 3/4 * 2
    assert_eq!(result.benchmark, BigRational::new(3.into(), 2.into()));
}

#[test]
fn monte_carlo_agrees_with_exact_revenue() {
    let instance = config(
        r#"{"instance": {"n": 1, "m": 2, "epsilon": 0.5, "h": 2.0,
            "prior": {"family": "discrete", "params": {"values": [0.5, 1.0, 2.0], "probs": ["1/4", "1/4", "1/2"]}},
            "space": {"kind": "multi_item"}},
            "mode": "bic", "sample_sizes": [1], "seeds": [0]}"#,
    )
    .instance
    .build()
    .unwrap();
    let samples = instance.truth.sample(60, 2).unwrap();
    let learned = learn_bic::<f64>(&samples, &instance.grid, &instance.space, &instance.model).unwrap();
    let exact = revenue_on_true_prior(&learned, &instance.truth).unwrap().to_f64_lossy();
    let est = monte_carlo_revenue(&learned, &instance.truth, 100_000, 7).unwrap();
    assert!((est.mean - exact).abs() <= 4.0 * est.se, "{} vs {exact} (se {})", est.mean, est.se);
}

fn two_point_prior() -> ProductPrior<f64> {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    ProductPrior::iid(2, 1, DiscreteMarginal::new(grid, vec![(1, 0.3), (4, 0.7)]).unwrap()).unwrap()
}

#[test]
fn constant_function_never_deviates() {
    let r = concentration_experiment(&two_point_prior(), &|_| 0.7, (0.0, 1.0), 50, 0.1, 200, 1).unwrap();
    assert_eq!(r.violations, 0);
    assert!(r.within_bound());
}

#[test]
fn concentration_respects_the_bound() {
    let f = |p: &[u32]| p.iter().map(|&g| g as f64 * 0.5).fold(0.0, f64::max);
    let r = concentration_experiment(&two_point_prior(), &f, (0.0, 2.0), 2000, 0.5, 500, 3).unwrap();
    assert!(r.bound < 1.0);
    assert!(r.within_bound(), "{r:?}");
    assert!((r.true_mean - (2.0 * (1.0 - 0.09) + 0.5 * 0.09)).abs() < 1e-12);
}

#[test]
fn out_of_range_function_is_a_usage_error() {
    let r = concentration_experiment(&two_point_prior(), &|_| 5.0, (0.0, 1.0), 10, 0.1, 10, 0);
    assert!(matches!(r, Err(Error::Usage(_))));
    let r = concentration_experiment(&two_point_prior(), &|_| 0.0, (0.0, f64::INFINITY), 10, 0.1, 10, 0);
    assert!(matches!(r, Err(Error::Usage(_))));
}

#[test]
fn bound_formula() {
    assert!((concentration_bound(1.0, 0.5, 100) - 8.0 * (-3.125f64).exp()).abs() < 1e-15);
}

#[test]
fn worker_env_must_be_positive() {
    std::env::set_var(WORKERS_ENV, "zero");
    let r = with_workers(|| 1);
    std::env::remove_var(WORKERS_ENV);
    assert!(matches!(r, Err(Error::Config(_))));
}
