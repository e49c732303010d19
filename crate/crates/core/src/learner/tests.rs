use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::grid_prior::{DiscreteMarginal, GridSpec, GridValue, PriorFamily, PriorSpec, ProductPrior, SampleSet, TruePrior};
use crate::lp_oracle::{brute_force_optimal, IcMode, OracleProblem};
use crate::mechanism_core::{regret_report, revenue, sure, LotteryEntry, MechanismTable};
use crate::scalar::ExactNumber;
use crate::valuation_outcome::{BidderValues, OutcomeSpace, ValuationModel};

type Q = BigRational;

fn q(a: i64, b: i64) -> Q {
    Q::new(a.into(), b.into())
}

fn uniform12_truth(n: usize, m: usize) -> TruePrior {
    let family = PriorFamily::Discrete {
        values: vec![1.0, 2.0],
        probs: vec![ExactNumber::Text("1/2".into()), ExactNumber::Text("1/2".into())],
    };
    TruePrior::new(n, m, 2.0, &PriorSpec::Broadcast(family)).unwrap()
}

#[test]
fn point_mass_samples_post_the_rounded_value() {
    let grid = GridSpec::new(0.25, 2.0).unwrap();
    let samples = SampleSet::from_values(1, 1, 4, vec![1.3; 4], 0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let model = ValuationModel::additive();
    let truth = TruePrior::new(1, 1, 2.0, &PriorSpec::Broadcast(PriorFamily::PointMass { value: 1.3 })).unwrap();
    let bic = learn_bic::<f64>(&samples, &grid, &space, &model).unwrap();
    assert!((bic.objective().unwrap() - 1.25).abs() < 1e-9);
    let rev = revenue_on_true_prior(&bic, &truth).unwrap();
    assert!((rev - q(5, 4)).abs() < q(1, 1_000_000_000));
    let dsic = learn_dsic::<Q>(&samples, &grid, &space, &model).unwrap();
    assert_eq!(revenue_on_true_prior(&dsic, &truth).unwrap(), q(5, 4));
    let prior = samples.empirical_prior::<Q>(&grid).unwrap();
    assert_eq!(regret_report(dsic.inner(), &prior, &model, &space).unwrap().dsic_regret, Q::zero());
}

#[test]
fn bic_learner_is_bic_for_its_empirical_prior() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..2 * 6).map(|_| rng.gen_range(0.0..2.0)).collect();
    let samples = SampleSet::from_values(2, 1, 6, values, 3).unwrap();
    let space = OutcomeSpace::multi_item(2, 1).unwrap();
    let model = ValuationModel::additive();
    let learned = learn_bic::<f64>(&samples, &grid, &space, &model).unwrap();
    let prior = samples.empirical_prior::<f64>(&grid).unwrap();
    let audit = audit_against(&learned, &prior, &model, &space).unwrap();
    assert!(audit.report.bic_regret <= 1e-8);
    assert!(audit.within);
}

#[test]
fn two_item_learner_tracks_the_true_optimum() {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let truth = uniform12_truth(1, 2);
    let space = OutcomeSpace::multi_item(1, 2).unwrap();
    let model = ValuationModel::additive();
    let rounded = truth.rounded::<Q>(&grid).unwrap();
    let target = brute_force_optimal(&OracleProblem::new(&rounded, &space, &model, IcMode::Bic).unwrap()).unwrap();
    let samples = truth.sample(2000, 5).unwrap();
    let learned = learn_bic::<f64>(&samples, &grid, &space, &model).unwrap();
    let rev = revenue_on_true_prior(&learned, &truth).unwrap();
    assert!(rev >= target - q(1, 1));
}

#[test]
fn dsic_learner_meets_its_audit() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let truth = uniform12_truth(2, 1);
    let space = OutcomeSpace::multi_item(2, 1).unwrap();
    let model = ValuationModel::additive();
    for seed in 0..3 {
        let samples = truth.sample(40, seed).unwrap();
        let learned = learn_dsic::<f64>(&samples, &grid, &space, &model).unwrap();
        let prior = truth.rounded::<f64>(&grid).unwrap();
        let audit = audit_against(&learned, &prior, &model, &space).unwrap();
        assert!(audit.report.dsic_regret <= 4.0 * 0.5 + 1e-8);
        assert!(audit.report.ir_slack >= -1e-8);
        let (gain, ir) = real_lattice_dsic_regret(&learned, &model, &space, 10).unwrap();
        assert!(gain <= 4.0 * 0.5 + 1e-8);
        assert!(ir >= -1e-8);
    }
}

#[test]
fn dsic_learner_refuses_spaces_that_are_not_downward_closed() {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let shared = OutcomeSpace::single_parameter(2, &[vec![Q::one(), Q::one()]]).unwrap();
    let samples = SampleSet::from_values(2, 1, 1, vec![1.0, 2.0], 0).unwrap();
    let err = learn_dsic::<f64>(&samples, &grid, &shared, &ValuationModel::additive()).unwrap_err();
    assert!(matches!(err, Error::Precondition(ref s) if s.contains("outcome 0")));
}

#[test]
fn real_bids_round_down() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let samples = SampleSet::from_values(1, 2, 3, vec![0.3, 1.2, 1.9, 0.7, 1.6, 0.2], 0).unwrap();
    let space = OutcomeSpace::multi_item(1, 2).unwrap();
    let model = ValuationModel::unit_demand();
    let learned = learn_bic::<f64>(&samples, &grid, &space, &model).unwrap();
    assert_eq!(evaluate_on_reals(&learned, &[1.0, 1.5]).unwrap(), learned.inner().lottery(&[2, 3]).unwrap());
    assert_eq!(evaluate_on_reals(&learned, &[1.37, 0.99]).unwrap(), evaluate_on_reals(&learned, &[1.0, 0.5]).unwrap());
    assert!(matches!(evaluate_on_reals(&learned, &[2.5, 0.0]), Err(Error::Domain { .. })));
    assert!(matches!(evaluate_on_reals(&learned, &[1.0]), Err(Error::Usage(_))));
    let prior = samples.empirical_prior::<f64>(&grid).unwrap();
    let regret = real_lattice_bic_regret(&learned, &prior, &model, &space, 10).unwrap();
    assert!(regret <= 4.0 * 2.0 * 0.5 + 1e-8);
}

#[test]
fn revenue_transfer_identity_with_off_grid_atoms() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let family = PriorFamily::Discrete {
        values: vec![0.3, 1.6, 1.9],
        probs: vec![ExactNumber::Text("1/4".into()), ExactNumber::Text("1/4".into()), ExactNumber::Text("1/2".into())],
    };
    let truth = TruePrior::new(2, 1, 2.0, &PriorSpec::Broadcast(family)).unwrap();
    let space = OutcomeSpace::multi_item(2, 1).unwrap();
    let model = ValuationModel::additive();
    let samples = truth.sample(30, 1).unwrap();
    let learned = learn_bic::<Q>(&samples, &grid, &space, &model).unwrap();
    let rounded = truth.rounded::<Q>(&grid).unwrap();
    assert_eq!(revenue_on_true_prior(&learned, &truth).unwrap(), revenue(learned.inner(), &rounded).unwrap());
}

#[test]
fn learning_is_deterministic() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let truth = uniform12_truth(1, 2);
    let space = OutcomeSpace::multi_item(1, 2).unwrap();
    let model = ValuationModel::additive();
    let samples = truth.sample(50, 9).unwrap();
    let a = learn_bic::<f64>(&samples, &grid, &space, &model).unwrap();
    let b = learn_bic::<f64>(&samples, &grid, &space, &model).unwrap();
    let prov = Default::default();
    assert_eq!(a.inner().to_json_string(&prov).unwrap(), b.inner().to_json_string(&prov).unwrap());
}

fn posted_price(grid: GridSpec, price: Q) -> MechanismTable<Q> {
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let p = price.clone();
    crate::lp_oracle::tabulate(grid, 1, 1, &space, move |v| {
        if grid.value::<Q>(GridValue(v[0])) >= p {
            sure(1, vec![p.clone()])
        } else {
            sure(0, vec![Q::zero()])
        }
    })
    .unwrap()
}

#[test]
fn menus_of_simple_mechanisms() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let model = ValuationModel::additive();
    let menu = mechanism_to_menu(&posted_price(grid, q(1, 1)), &space, &model).unwrap();
    assert_eq!(menu.entries(), &[sure(0, vec![Q::zero()]), sure(1, vec![q(1, 1)])]);
    let constant = crate::lp_oracle::tabulate(grid, 1, 1, &space, |_| sure(1, vec![q(1, 4)])).unwrap();
    assert_eq!(mechanism_to_menu(&constant, &space, &model).unwrap().len(), 2);
    let two = crate::lp_oracle::tabulate(grid, 2, 1, &OutcomeSpace::multi_item(2, 1).unwrap(), |_| {
        sure(0, vec![Q::zero(), Q::zero()])
    })
    .unwrap();
    assert!(matches!(
        mechanism_to_menu(&two, &OutcomeSpace::multi_item(2, 1).unwrap(), &model),
        Err(Error::Usage(_))
    ));
}

#[test]
fn reselecting_from_an_ic_menu_keeps_utilities() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 2).unwrap();
    let model = ValuationModel::additive();
    let samples = uniform12_truth(1, 2).sample(30, 4).unwrap();
    let learned = learn_bic::<Q>(&samples, &grid, &space, &model).unwrap();
    let menu = mechanism_to_menu(learned.inner(), &space, &model).unwrap();
    let table = menu.to_table(grid, 2, &space, &model).unwrap();
    let domain = table.domain().clone();
    let values: BidderValues<Q> = BidderValues::new(&model, &space, &grid, &domain, 0);
    for (t, ty) in values.types().iter().enumerate() {
        let u = |m: &MechanismTable<Q>| crate::mechanism_core::lottery_utility(m.lottery(ty).unwrap(), 0, values.row(t));
        // the learned table is BIC on its support; off-support types best-respond, so every type is exactly IC
        assert_eq!(u(&table), u(learned.inner()));
    }
}

#[test]
fn nudge_scales_payments() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let model = ValuationModel::additive();
    let menu = mechanism_to_menu(&posted_price(grid, q(3, 2)), &space, &model).unwrap();
    assert_eq!(nudge_to_ic(&menu, 0.0).unwrap(), menu);
    let nudged = nudge_to_ic(&menu, 0.04).unwrap();
    assert_eq!(nudged.entries()[1], sure(1, vec![q(3, 2) * q(4, 5)]));
    assert_eq!(nudged.entries()[0], sure(0, vec![Q::zero()]));
    assert!(matches!(nudge_to_ic(&menu, -0.1), Err(Error::Usage(_))));
}

/// Random IR, eps-IC single-bidder mechanism on one item: each type takes a
/// random entry within eps of its best utility.
fn random_eps_ic(rng: &mut ChaCha8Rng, grid: GridSpec, eps: Q) -> MechanismTable<Q> {
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let mut entries: Vec<(Q, Q)> = vec![(Q::zero(), Q::zero())];
    for _ in 0..rng.gen_range(1..5) {
        let x = q(rng.gen_range(0..=4), 4);
        let p = q(rng.gen_range(0..=40), 20);
        entries.push((x, p));
    }
    crate::lp_oracle::tabulate(grid, 1, 1, &space, |v| {
        let value = grid.value::<Q>(GridValue(v[0]));
        let u = |(x, p): &(Q, Q)| x * &value - p;
        let best = entries.iter().map(u).max().unwrap();
        let near: Vec<&(Q, Q)> = entries.iter().filter(|e| u(e) >= &best - &eps && u(e) >= Q::zero()).collect();
        let (x, p) = near[rng.gen_range(0..near.len())].clone();
        vec![
            LotteryEntry { prob: x.clone(), outcome: 1, payments: vec![p.clone()] },
            LotteryEntry { prob: Q::one() - x, outcome: 0, payments: vec![p] },
        ]
        .into_iter()
        .filter(|e| !e.prob.is_zero())
        .collect()
    })
    .unwrap()
}

#[test]
fn nudge_is_exactly_ic_and_keeps_revenue() {
    let grid = GridSpec::new(0.25, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let model = ValuationModel::additive();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for (eps, root) in [(0.01, q(1, 10)), (0.04, q(1, 5)), (0.09, q(3, 10))] {
        let eps_q = &root * &root;
        for _ in 0..20 {
            let mech = random_eps_ic(&mut rng, grid, eps_q.clone());
            let masses: Vec<(u32, Q)> = (0..=8).map(|g| (g, q(rng.gen_range(0..4), 1))).collect();
            let total: Q = masses.iter().map(|(_, w)| w.clone()).sum();
            if total.is_zero() {
                continue;
            }
            let prior = ProductPrior::iid(
                1,
                1,
                DiscreteMarginal::new(grid, masses.into_iter().map(|(g, w)| (g, w / &total)).collect()).unwrap(),
            )
            .unwrap();
            let before = regret_report(&mech, &prior, &model, &space).unwrap();
            assert!(before.bic_regret <= eps_q);
            let menu = mechanism_to_menu(&mech, &space, &model).unwrap();
            let nudged = nudge_to_ic(&menu, eps).unwrap().to_table(grid, 1, &space, &model).unwrap();
            let after = regret_report(&nudged, &prior, &model, &space).unwrap();
            assert_eq!(after.bic_regret, Q::zero());
            assert!(after.ir_slack >= Q::zero());
            let bound = (Q::one() - &root) * (revenue(&mech, &prior).unwrap() - &root);
            assert!(revenue(&nudged, &prior).unwrap() >= bound);
        }
    }
}

#[test]
fn mode_names_round_trip() {
    for mode in [LearnMode::Bic, LearnMode::Dsic, LearnMode::SingleParameter, LearnMode::SingleBidderIc] {
        assert_eq!(LearnMode::parse(mode.name()), Some(mode));
    }
    assert_eq!(LearnMode::parse("other"), None);
}
