use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smfg_core::econ::{
    apply_shock, init_economy, step_economy, EconConfig, EconomyState, GovAction, HouseholdAction, GOV_ACTION_RANGES,
};
use smfg_core::stats::gini;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn random_gov(rng: &mut impl Rng) -> GovAction {
    let mut v = [0.0; 5];
    for (x, (lo, hi)) in v.iter_mut().zip(GOV_ACTION_RANGES) {
        *x = rng.random_range(lo..=hi);
    }
    GovAction::from_array(v)
}

fn random_acts(rng: &mut impl Rng, n: usize) -> Vec<HouseholdAction> {
    (0..n).map(|_| HouseholdAction { consume_frac: rng.random_range(0.01..0.99), labor: rng.random_range(0.0..=1.0) }).collect()
}

/// Recomputes the step's flows from the pre-step state and the report
/// alone, following the documented order of operations.
fn check_step(cfg: &EconConfig, s: &EconomyState, g: &GovAction, acts: &[HouseholdAction]) {
    let (next, rep) = step_economy(cfg, s, g, acts).unwrap();
    let a = &rep.accounting;
    let x = next.capital - (1.0 - cfg.depreciation) * s.capital;
    let c: f64 = rep.consumption.iter().sum();
    assert!(rel_close(a.investment, x, 1e-12));
    assert!(rel_close(a.goods_residual, a.output - c - a.gov_spending - x, 1e-9));
    let transfer = a.transfer / s.n() as f64;
    for i in 0..s.n() {
        let d = rep.disposable[i];
        assert_eq!(next.households[i].wealth, d - rep.consumption[i]);
        let raw = s.households[i].wealth + rep.incomes[i] - rep.taxes[i] + transfer;
        if raw >= cfg.disposable_floor {
            assert!(rel_close(d, raw, 1e-9));
        }
    }
    assert!(rel_close(a.tax_revenue, rep.taxes.iter().sum(), 1e-12));
    assert!(rel_close(a.gov_spending + a.transfer, a.tax_revenue, 1e-12));
    assert!(rep.household_rewards.iter().all(|&r| r <= 1.0));
}

#[test]
fn accounting_identities_over_random_steps() {
    let cfg = EconConfig { households: 10, horizon: 50, ..EconConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut steps = 0;
    for ep in 0..40 {
        let mut s = init_economy(&cfg, ep).unwrap();
        loop {
            let g = random_gov(&mut rng);
            let acts = random_acts(&mut rng, cfg.households);
            check_step(&cfg, &s, &g, &acts);
            let (next, rep) = step_economy(&cfg, &s, &g, &acts).unwrap();
            steps += 1;
            if rep.done {
                break;
            }
            s = next;
        }
    }
    assert!(steps >= 200);
}

#[test]
fn untaxed_single_household_has_no_transfers() {
    let cfg = EconConfig { households: 1, horizon: 5, ..EconConfig::default() };
    let s = init_economy(&cfg, 0).unwrap();
    let g = GovAction { spend_ratio: 0.7, ..GovAction::NONE };
    let (_, rep) = step_economy(&cfg, &s, &g, &[HouseholdAction { consume_frac: 0.4, labor: 0.6 }]).unwrap();
    assert_eq!(rep.accounting.tax_revenue, 0.0);
    assert_eq!(rep.accounting.transfer, 0.0);
}

/// Simpson's rule for erf, independent of the simulator's statistics.
fn erf(x: f64) -> f64 {
    let n = 2000;
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

#[test]
fn initial_wealth_gini_matches_lognormal_closed_form() {
    // A log-normal with shape sigma has Gini erf(sigma / 2).
    let cfg = EconConfig { households: 20_000, wealth_sigma: 0.8, ..EconConfig::default() };
    let s = init_economy(&cfg, 5).unwrap();
    let g = gini(&s.wealths()).unwrap();
    assert!((g - erf(0.4)).abs() < 0.01, "gini {g} vs {}", erf(0.4));
}

#[test]
fn engineered_wealth_overrides_the_draw() {
    let cfg = EconConfig { households: 4, initial_wealth: Some(vec![0.0, 0.0, 0.0, 8.0]), ..EconConfig::default() };
    let s = init_economy(&cfg, 1).unwrap();
    assert_eq!(s.wealths(), vec![0.0, 0.0, 0.0, 8.0]);
    assert_eq!(s.wealth_gini(), 0.75);
    let bad = EconConfig { initial_wealth: Some(vec![1.0; 3]), ..cfg };
    assert!(init_economy(&bad, 1).is_err());
}

#[test]
fn shock_scales_wealth_only() {
    let cfg = EconConfig::default();
    let s = init_economy(&cfg, 2).unwrap();
    let h = apply_shock(&s, 0.5).unwrap();
    for (a, b) in s.households.iter().zip(&h.households) {
        assert_eq!(b.wealth, 0.5 * a.wealth);
        assert_eq!(b.ability, a.ability);
    }
    assert_eq!(h.capital, s.capital);
    assert_eq!(apply_shock(&s, 1.0).unwrap(), s);
    assert!(apply_shock(&s, 0.0).is_err());
    assert!(apply_shock(&s, 1.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuting_households_permutes_outcomes(seed in 0u64..1000, rot in 1usize..6) {
        let cfg = EconConfig { households: 6, ..EconConfig::default() };
        let s = init_economy(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_gov(&mut rng);
        let acts = random_acts(&mut rng, 6);
        let perm: Vec<usize> = (0..6).map(|i| (i + rot) % 6).collect();
        let mut ps = s.clone();
        ps.households = perm.iter().map(|&j| s.households[j]).collect();
        let pacts: Vec<HouseholdAction> = perm.iter().map(|&j| acts[j]).collect();
        let (n1, r1) = step_economy(&cfg, &s, &g, &acts).unwrap();
        let (n2, r2) = step_economy(&cfg, &ps, &g, &pacts).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            prop_assert!(rel_close(r2.household_rewards[k], r1.household_rewards[j], 1e-12));
            prop_assert!(rel_close(n2.households[k].wealth, n1.households[j].wealth, 1e-12));
        }
        prop_assert!(rel_close(r1.gov_reward, r2.gov_reward, 1e-9));
    }

    #[test]
    fn accounting_holds_for_any_actions(seed in 0u64..10_000, n in 1usize..12) {
        let cfg = EconConfig { households: n, ..EconConfig::default() };
        let s = init_economy(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let g = random_gov(&mut rng);
        let acts = random_acts(&mut rng, n);
        check_step(&cfg, &s, &g, &acts);
    }

    #[test]
    fn gini_bounded_and_scale_free(xs in prop::collection::vec(0.0f64..100.0, 1..40), k in 0.01f64..100.0) {
        prop_assume!(xs.iter().sum::<f64>() > 0.0);
        let g = gini(&xs).unwrap();
        let n = xs.len() as f64;
        prop_assert!(g >= 0.0 && g <= 1.0 - 1.0 / n + 1e-12);
        let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
        prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-12);
    }
}
