use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use smfg_core::baselines::{
    bc_spec, bc_train_with, bracket_gov, bracket_tax, fit_hsv, parse_schedule, saez_fit_elasticity, saez_rate,
    saez_rates, synth_bc_dataset, us_federal_2022, BcDataset, BcLoss, BcOptions, BehaviorParams, BracketSchedule,
    SaezGov, SaezConfig, SaezState, SAEZ_MAX_RATE,
};
use smfg_core::econ::{EconConfig, FOLLOWER_OBS_DIM};
use smfg_core::mfg::{run_episode, EpisodeOptions, GovPolicy};
use smfg_core::baselines::RuleOfThumbHouseholds;

#[test]
fn saez_formula_closed_forms() {
    assert_eq!(saez_rate(1.0, 2.0, 1.0), 0.0);
    assert!((saez_rate(0.0, 2.0, 1.0) - 1.0 / 3.0).abs() < 1e-12);
    assert!((saez_rate(0.5, 1.0, 0.5) - 0.5).abs() < 1e-12);
}

#[test]
fn planted_elasticity_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise = LogNormal::new(0.0, 0.3).unwrap();
    let mut st = SaezState::new(100_000, 1.0);
    for &rate in &[0.1, 0.25, 0.4, 0.55] {
        for _ in 0..5000 {
            st.push(3.0 * (1.0f64 - rate) * noise.sample(&mut rng), rate);
        }
    }
    let e = saez_fit_elasticity(&st);
    assert!((e - 1.0).abs() < 0.05, "elasticity {e}");
}

#[test]
fn saez_rates_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let st = SaezState::new(10, 1.0);
    let incomes: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..3.0f64).powi(2)).collect();
    let sched = saez_rates(&st, &incomes, &[0.0, 0.5, 1.0, 2.0, 4.0]).unwrap();
    assert!(sched.rates().iter().all(|r| (0.0..=SAEZ_MAX_RATE).contains(r)));
    assert!(saez_rates(&st, &[], &[0.0, 1.0]).is_err());
}

#[test]
fn bracket_tax_sums_marginal_slices() {
    let s = BracketSchedule::new(vec![0.0, 10.0, 30.0], vec![0.1, 0.2, 0.5]).unwrap();
    assert_eq!(bracket_tax(0.0, &s).unwrap(), 0.0);
    assert!((bracket_tax(5.0, &s).unwrap() - 0.5).abs() < 1e-12);
    assert!((bracket_tax(25.0, &s).unwrap() - (1.0 + 3.0)).abs() < 1e-12);
    assert!((bracket_tax(40.0, &s).unwrap() - (1.0 + 4.0 + 5.0)).abs() < 1e-12);
    assert!(bracket_tax(-1.0, &s).is_err());
    assert!(BracketSchedule::new(vec![1.0, 2.0], vec![0.1, 0.2]).is_err());
    assert!(BracketSchedule::new(vec![0.0, 2.0], vec![0.1, 1.0]).is_err());
}

#[test]
fn flat_schedule_fits_to_a_flat_hsv() {
    let (tau, xi) = fit_hsv(&BracketSchedule::flat(0.3).unwrap(), 1.0).unwrap();
    assert!((tau - 0.3).abs() < 1e-9 && xi.abs() < 1e-9);
}

#[test]
fn bundled_schedule_is_progressive() {
    let file = us_federal_2022();
    assert_eq!(file.schedule.rates().first(), Some(&0.10));
    assert_eq!(file.schedule.max_rate(), 0.37);
    let g = bracket_gov(&file, 0.0).unwrap().0;
    assert!(g.income_progressivity > 0.0 && g.income_tax_rate > 0.0 && g.income_tax_rate < 0.37);
    assert!(parse_schedule("bracket 0 0.1\nbracket x 0.2\n").is_err());
}

#[test]
fn saez_government_runs_and_fits() {
    let econ = EconConfig { households: 6, horizon: 40, ..EconConfig::default() };
    let cfg = SaezConfig { regime_steps: 5, ..SaezConfig::default() };
    let mut gov = SaezGov::new(cfg);
    let hh = RuleOfThumbHouseholds(BehaviorParams::default());
    let log = run_episode(&econ, &mut gov, &hh, &EpisodeOptions { seed: 0, gamma: 0.99, shock: None }).unwrap();
    assert_eq!(log.steps_survived(), 40);
    assert!(gov.fitted_action().is_some());
    assert!(!gov.state().is_empty());
    assert!(gov.act(&smfg_core::econ::init_economy(&econ, 0).unwrap()).unwrap().is_valid());
}

#[test]
fn single_pair_is_memorised() {
    let data = BcDataset::new(vec![(vec![0.3, -0.2, 1.0, 0.5, 0.0, 0.1], vec![0.25, 0.7])]).unwrap();
    let spec = bc_spec(BcLoss::Mse, &[16, 16]);
    let opts = BcOptions { batch_size: 1, lr: 1e-2 };
    let out = bc_train_with(&data, &spec, BcLoss::Mse, 2000, 0, &opts).unwrap();
    assert!(out.steps <= 2000);
    assert!(out.final_loss < 1e-6, "loss {}", out.final_loss);
}

#[test]
fn realisable_linear_data_has_monotone_epoch_medians() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..64)
        .map(|_| {
            let o: Vec<f64> = (0..FOLLOWER_OBS_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = vec![0.4 + 0.05 * o[0] - 0.03 * o[3], 0.5 + 0.1 * o[1] + 0.02 * o[5]];
            (o, a)
        })
        .collect();
    let data = BcDataset::new(rows).unwrap();
    let spec = bc_spec(BcLoss::Mse, &[]);
    let opts = BcOptions { batch_size: 64, ..BcOptions::default() };
    let out = bc_train_with(&data, &spec, BcLoss::Mse, 200, 1, &opts).unwrap();
    assert!(out.epoch_medians.windows(2).all(|w| w[1] <= w[0]), "{:?}", out.epoch_medians);
    assert!(out.final_loss < out.epoch_medians[0]);
}

#[test]
fn synthetic_dataset_is_deterministic_and_valid() {
    let econ = EconConfig { households: 4, horizon: 10, ..EconConfig::default() };
    let a = synth_bc_dataset(&econ, &BehaviorParams::default(), 57, 3).unwrap();
    let b = synth_bc_dataset(&econ, &BehaviorParams::default(), 57, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 57);
    assert_eq!(BcDataset::from_csv(&a.to_csv()).unwrap(), a);
}
