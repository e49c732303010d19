use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::scalar::Scalar;
use crate::grid_prior::{DiscreteMarginal, Domain, GridSpec, GridValue, ProductPrior};
use crate::valuation_outcome::{OutcomeSpace, ValuationModel};

type Q = BigRational;

fn q(a: i64, b: i64) -> Q {
    Q::new(a.into(), b.into())
}

/// Single item, bidders served in index order at price index `price`.
fn posted_price(grid: GridSpec, n: usize, price: u32, space: &OutcomeSpace) -> MechanismTable<Q> {
    let domain = Domain::full(&grid, n, 1).unwrap();
    let p = grid.value::<Q>(GridValue(price));
    MechanismTable::from_fn(grid, domain, space, |profile| {
        let mut payments = vec![Q::zero(); n];
        match profile.iter().position(|&v| v >= price) {
            Some(i) => {
                payments[i] = p.clone();
                sure(space.encode_multi_item(&[i + 1]).unwrap(), payments)
            }
            None => sure(0, payments),
        }
    })
    .unwrap()
}

fn uniform12() -> (GridSpec, ProductPrior<Q>) {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let marginal = DiscreteMarginal::new(grid, vec![(1, q(1, 2)), (2, q(1, 2))]).unwrap();
    (grid, ProductPrior::iid(1, 1, marginal).unwrap())
}

#[test]
fn revenue_examples() {
    let (grid, prior) = uniform12();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    assert_eq!(revenue(&posted_price(grid, 1, 2, &space), &prior).unwrap(), Q::one());
    let zero = MechanismTable::from_fn(grid, Domain::full(&grid, 1, 1).unwrap(), &space, |_| sure(1, vec![Q::zero()])).unwrap();
    assert_eq!(revenue(&zero, &prior).unwrap(), Q::zero());
    let point = ProductPrior::iid(1, 1, DiscreteMarginal::point_mass(grid, GridValue(1)).unwrap()).unwrap();
    assert_eq!(revenue(&posted_price(grid, 1, 1, &space), &point).unwrap(), Q::one());
    // brute force over the two profiles
    let mech = posted_price(grid, 1, 2, &space);
    let brute = prior
        .profiles()
        .into_iter()
        .map(|(v, p)| p * MechanismTable::expected_payment(mech.lottery(&v).unwrap(), 0))
        .fold(Q::zero(), |a, b| a + b);
    assert_eq!(brute, Q::one());
}

#[test]
fn revenue_reports_uncovered_profile() {
    let (grid, prior) = uniform12();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let domain = Domain::new(1, 1, vec![vec![0, 1]]).unwrap();
    let mech = MechanismTable::from_fn(grid, domain, &space, |_| sure(0, vec![Q::zero()])).unwrap();
    match revenue(&mech, &prior) {
        Err(Error::Usage(msg)) => assert!(msg.contains("[2]"), "{msg}"),
        other => panic!("expected usage error, got {other:?}"),
    }
}

#[test]
fn interim_form_single_bidder_is_ex_post() {
    let (grid, prior) = uniform12();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let model = ValuationModel::additive();
    let mech = posted_price(grid, 1, 1, &space);
    let form = interim_form(&mech, &prior, &model, &space, 0).unwrap();
    for (t, tv) in form.types.iter().enumerate() {
        for (r, rv) in form.types.iter().enumerate() {
            let direct = ex_post_utility(&mech, &model, &space, 0, tv, rv).unwrap();
            assert_eq!(form.utility[t][r], direct);
        }
        assert!(form.utility[t][t] >= Q::zero());
    }
}

#[test]
fn interim_form_two_bidders_matches_enumeration() {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(2, 1).unwrap();
    let model = ValuationModel::additive();
    let mech = posted_price(grid, 2, 1, &space);
    let a = DiscreteMarginal::new(grid, vec![(0, q(1, 4)), (2, q(3, 4))]).unwrap();
    let b = DiscreteMarginal::new(grid, vec![(1, q(1, 3)), (2, q(2, 3))]).unwrap();
    let prior = ProductPrior::new(2, 1, vec![a, b]).unwrap();
    for k in 0..2 {
        let form = interim_form(&mech, &prior, &model, &space, k).unwrap();
        for (t, tv) in form.types.iter().enumerate() {
            for (r, rv) in form.types.iter().enumerate() {
                let mut expected = Q::zero();
                for (profile, p) in prior.profiles() {
                    let mut reported = profile.clone();
                    reported[k] = rv[0];
                    expected += p * ex_post_utility(&mech, &model, &space, k, tv, &reported).unwrap();
                }
                assert_eq!(form.utility[t][r], expected, "k={k} t={tv:?} r={rv:?}");
            }
        }
    }
}

#[test]
fn truthful_posted_price_has_zero_regret() {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(2, 1).unwrap();
    let mech = posted_price(grid, 2, 1, &space);
    let marginal = DiscreteMarginal::uniform_over(grid, &[0, 1, 2]).unwrap();
    let prior = ProductPrior::iid(2, 1, marginal).unwrap();
    let report = regret_report(&mech, &prior, &ValuationModel::additive(), &space).unwrap();
    assert_eq!(report.bic_regret, Q::zero());
    assert_eq!(report.dsic_regret, Q::zero());
    assert_eq!(report.ir_slack, Q::zero());
}

#[test]
fn overcharging_breaks_ir() {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let mech = MechanismTable::from_fn(grid, Domain::full(&grid, 1, 1).unwrap(), &space, |v| {
        sure(1, vec![Q::from_integer((v[0] + 1).into())])
    })
    .unwrap();
    let (_, prior) = uniform12();
    let report = regret_report(&mech, &prior, &ValuationModel::additive(), &space).unwrap();
    assert_eq!(report.ir_slack, -Q::one());
    let partial = MechanismTable::from_fn(grid, Domain::new(1, 1, vec![vec![1, 2]]).unwrap(), &space, |_| {
        sure(0, vec![Q::zero()])
    })
    .unwrap();
    assert!(matches!(
        regret_report(&partial, &prior, &ValuationModel::additive(), &space),
        Err(Error::Usage(_))
    ));
}

#[test]
fn witnesses_reproduce_reported_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(2, 1).unwrap();
    let model = ValuationModel::additive();
    let mech = random_mechanism(&mut rng, grid, 2, 1, &space);
    let marginal = DiscreteMarginal::uniform_over(grid, &[0, 1, 2]).unwrap();
    let prior = ProductPrior::iid(2, 1, marginal).unwrap();
    let report = regret_report(&mech, &prior, &model, &space).unwrap();
    let w = &report.dsic_witness;
    let own = &w.profile[w.bidder..w.bidder + 1];
    let mut deviated = w.profile.clone();
    deviated[w.bidder] = w.report[0];
    let gain = ex_post_utility(&mech, &model, &space, w.bidder, own, &deviated).unwrap()
        - ex_post_utility(&mech, &model, &space, w.bidder, own, &w.profile).unwrap();
    assert_eq!(Q::max(gain, Q::zero()), report.dsic_regret);
    let ir = &report.ir_witness;
    let own = &ir.profile[ir.bidder..ir.bidder + 1];
    assert_eq!(ex_post_utility(&mech, &model, &space, ir.bidder, own, &ir.profile).unwrap(), report.ir_slack);
    let b = &report.bic_witness;
    let form = interim_form(&mech, &prior, &model, &space, b.bidder).unwrap();
    let t = form.types.iter().position(|x| *x == b.true_type).unwrap();
    let r = form.types.iter().position(|x| *x == b.report).unwrap();
    assert_eq!(
        Q::max(form.utility[t][r].clone() - form.utility[t][t].clone(), Q::zero()),
        report.bic_regret
    );
}

fn random_mechanism<R: Rng>(rng: &mut R, grid: GridSpec, n: usize, m: usize, space: &OutcomeSpace) -> MechanismTable<Q> {
    let domain = Domain::full(&grid, n, m).unwrap();
    let outcomes = space.len();
    MechanismTable::from_fn(grid, domain, space, |_| {
        let split = rng.gen_range(0..=4i64);
        let mut lottery = vec![LotteryEntry {
            prob: q(split, 4),
            outcome: rng.gen_range(0..outcomes),
            payments: (0..n).map(|_| q(rng.gen_range(-2..8), 4)).collect(),
        }];
        lottery.push(LotteryEntry {
            prob: q(4 - split, 4),
            outcome: rng.gen_range(0..outcomes),
            payments: (0..n).map(|_| q(rng.gen_range(-2..8), 4)).collect(),
        });
        lottery
    })
    .unwrap()
}

fn random_prior<R: Rng>(rng: &mut R, grid: GridSpec, n: usize, m: usize) -> ProductPrior<Q> {
    let marginals = (0..n * m)
        .map(|_| {
            let picks: Vec<u32> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..=grid.top_index())).collect();
            DiscreteMarginal::uniform_over(grid, &picks).unwrap()
        })
        .collect();
    ProductPrior::new(n, m, marginals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn revenue_two_routes_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(1.0, 2.0).unwrap();
        let space = OutcomeSpace::multi_item(2, 2).unwrap();
        let model = ValuationModel::additive();
        let mech = random_mechanism(&mut rng, grid, 2, 2, &space);
        let prior = random_prior(&mut rng, grid, 2, 2);
        let forms: Vec<_> = (0..2).map(|k| interim_form(&mech, &prior, &model, &space, k).unwrap()).collect();
        prop_assert_eq!(revenue_from_interim(&forms, &prior), revenue(&mech, &prior).unwrap());
        let f64_rev = revenue(&mech.cast::<f64>(), &prior.cast::<f64>()).unwrap();
        let exact: f64 = revenue(&mech, &prior).unwrap().cast();
        prop_assert!((f64_rev - exact).abs() <= 1e-9);
    }

    #[test]
    fn single_bidder_bic_equals_dsic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(0.5, 1.0).unwrap();
        let space = OutcomeSpace::multi_item(1, 2).unwrap();
        let mech = random_mechanism(&mut rng, grid, 1, 2, &space);
        let prior = random_prior(&mut rng, grid, 1, 2);
        let report = regret_report(&mech, &prior, &ValuationModel::additive(), &space).unwrap();
        prop_assert_eq!(report.bic_regret, report.dsic_regret);
    }

    #[test]
    fn scaling_payments_scales_revenue(seed in any::<u64>(), c in 1i64..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(1.0, 2.0).unwrap();
        let space = OutcomeSpace::multi_item(2, 1).unwrap();
        let mech = random_mechanism(&mut rng, grid, 2, 1, &space);
        let prior = random_prior(&mut rng, grid, 2, 1);
        let c = q(c, 7);
        let scaled = revenue(&mech.scale_payments(&c), &prior).unwrap();
        prop_assert_eq!(scaled, c * revenue(&mech, &prior).unwrap());
    }

    #[test]
    fn regret_invariant_under_outcome_relabeling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(1.0, 2.0).unwrap();
        let space = OutcomeSpace::multi_item(2, 1).unwrap();
        let model = ValuationModel::additive();
        let mech = random_mechanism(&mut rng, grid, 2, 1, &space);
        let prior = random_prior(&mut rng, grid, 2, 1);
        let mut perm: Vec<usize> = (0..space.len()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut rows = vec![Vec::new(); space.len()];
        for o in 0..space.len() {
            rows[perm[o]] = (0..2).map(|i| vec![space.allocation_exact(o, i, 0).clone()]).collect();
        }
        let relabeled = OutcomeSpace::custom(2, 1, &rows).unwrap();
        let moved = mech.relabel_outcomes(&perm, &relabeled).unwrap();
        let a = regret_report(&mech, &prior, &model, &space).unwrap();
        let b = regret_report(&moved, &prior, &model, &relabeled).unwrap();
        prop_assert_eq!(a.bic_regret, b.bic_regret);
        prop_assert_eq!(a.dsic_regret, b.dsic_regret);
        prop_assert_eq!(a.ir_slack, b.ir_slack);
    }
}

#[test]
fn json_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(2, 2).unwrap();
    let mech = random_mechanism(&mut rng, grid, 2, 2, &space);
    let provenance = Provenance { mode: Some("bic".into()), seed: Some(4), ..Default::default() };
    let text = mech.to_json_string(&provenance).unwrap();
    let (back, prov) = MechanismTable::<Q>::from_json_str(&text).unwrap();
    assert_eq!(back, mech);
    assert_eq!(prov, provenance);
    assert_eq!(back.to_json_string(&prov).unwrap(), text);

    let floats = mech.cast::<f64>().scale_payments(&(1.0 / 3.0));
    let text = floats.to_json_string(&Provenance::default()).unwrap();
    let (back, _) = MechanismTable::<f64>::from_json_str(&text).unwrap();
    assert_eq!(back, floats);
}

#[test]
fn empty_domain_round_trip() {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let mech = MechanismTable::<Q>::new(grid, Domain::new(1, 1, vec![vec![]]).unwrap(), &space, vec![]).unwrap();
    let text = mech.to_json_string(&Provenance::default()).unwrap();
    assert_eq!(MechanismTable::<Q>::from_json_str(&text).unwrap().0, mech);
}

#[test]
fn load_rejects_bad_probability_sum() {
    let grid = GridSpec::new(1.0, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let mech = MechanismTable::from_fn(grid, Domain::full(&grid, 1, 1).unwrap(), &space, |_| sure(1, vec![q(1, 2)])).unwrap();
    let text = mech.to_json_string(&Provenance::default()).unwrap();
    let broken = text.replacen("\"p\": \"1\"", "\"p\": \"0.9\"", 1);
    assert_ne!(broken, text);
    match MechanismTable::<Q>::from_json_str(&broken) {
        Err(Error::Parse { location, message }) => {
            assert!(location.contains("row 0"), "{location}");
            assert!(message.contains("9/10"), "{message}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn support_audit_ignores_types_the_prior_never_draws() {
    let grid = GridSpec::new(0.5, 2.0).unwrap();
    let space = OutcomeSpace::multi_item(1, 1).unwrap();
    let model = ValuationModel::additive();
    let domain = Domain::full(&grid, 1, 1).unwrap();
    let mech = MechanismTable::from_fn(grid, domain, &space, |_| sure(1, vec![q(3, 2)])).unwrap();
    let prior = ProductPrior::iid(1, 1, DiscreteMarginal::<Q>::point_mass(grid, GridValue(3)).unwrap()).unwrap();
    let full = regret_report(&mech, &prior, &model, &space).unwrap();
    assert_eq!(full.ir_slack, q(-3, 2));
    let support = regret_report_on_support(&mech, &prior, &model, &space).unwrap();
    assert_eq!(support.ir_slack, Q::zero());
    assert_eq!(support.ir_witness.profile, vec![3]);
    assert_eq!(support.bic_regret, Q::zero());
}
