use super::{
    check_termination, EconConfig, EconomyState, GovAction, HouseholdAction, HouseholdState,
    TerminationReason,
};
use crate::error::{contract, Error, Result};
use crate::stats::sum_sorted;

/// Log floor applied to output before taking `ln` in the leader reward.
const OUTPUT_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Production {
    pub output: f64,
    pub wage: f64,
    pub interest_raw: f64,
}

/// Cobb-Douglas output `Z K^a L^(1-a)` with competitive factor prices.
pub fn compute_production(capital: f64, labor: f64, productivity: f64, alpha: f64) -> Production {
    if labor <= 0.0 || capital <= 0.0 {
        return Production { output: 0.0, wage: 0.0, interest_raw: 0.0 };
    }
    let output = productivity * capital.powf(alpha) * labor.powf(1.0 - alpha);
    Production {
        output,
        wage: (1.0 - alpha) * output / labor,
        interest_raw: alpha * output / capital,
    }
}

/// Tax owed under `T(b) = b - (1 - rate) * scale * (b / scale)^(1 - progressivity)`,
/// clamped to `[0, b]`.
pub fn compute_tax(base: f64, rate: f64, progressivity: f64, scale: f64) -> f64 {
    if base <= 0.0 {
        return 0.0;
    }
    if !(scale > 0.0) {
        return (rate * base).clamp(0.0, base);
    }
    let after_tax = (1.0 - rate) * scale * (base / scale).powf(1.0 - progressivity);
    (base - after_tax).clamp(0.0, base)
}

/// `1 - exp(-[ln(c / c_ref) - lambda * h^(1+gamma) / (1+gamma)])`.
pub fn household_utility(
    consumption: f64,
    labor: f64,
    consumption_ref: f64,
    labor_disutility: f64,
    labor_curvature: f64,
) -> Result<f64> {
    if !(consumption > 0.0) {
        return Err(Error::Domain(format!("consumption must be positive, got {consumption}")));
    }
    if !(0.0..=1.0).contains(&labor) {
        return Err(Error::Domain(format!("labor must lie in [0, 1], got {labor}")));
    }
    let k = 1.0 + labor_curvature;
    let inner = (consumption / consumption_ref).ln() - labor_disutility * labor.powf(k) / k;
    Ok(-(-inner).exp_m1())
}

/// Aggregates of one step. `goods_residual = Y - C - G - X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Accounting {
    pub output: f64,
    pub consumption: f64,
    pub gov_spending: f64,
    pub investment: f64,
    pub tax_revenue: f64,
    /// Total lump-sum transfers paid out (all households together).
    pub transfer: f64,
    pub goods_residual: f64,
    pub floored_households: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub gov_reward: f64,
    pub household_rewards: Vec<f64>,
    pub done: bool,
    pub reason: Option<TerminationReason>,
    pub accounting: Accounting,
    pub consumption: Vec<f64>,
    pub incomes: Vec<f64>,
    pub taxes: Vec<f64>,
    pub disposable: Vec<f64>,
}

/// Advances the economy by one period.
///
/// Order: labor supply, production, incomes, taxes and transfers,
/// consumption/saving, capital-market update, rewards, termination.
pub fn step_economy(
    cfg: &EconConfig,
    state: &EconomyState,
    gov: &GovAction,
    acts: &[HouseholdAction],
) -> Result<(EconomyState, StepReport)> {
    let n = state.n();
    if acts.len() != n {
        return Err(contract(format!("expected {n} household actions, got {}", acts.len())));
    }
    if state.t >= state.horizon {
        return Err(Error::EpisodeFinished { t: state.t, horizon: state.horizon });
    }
    if let Some(bad) = acts.iter().position(|a| !a.is_valid()) {
        return Err(contract(format!("household action {bad} out of range: {:?}", acts[bad])));
    }
    if !gov.is_valid() {
        return Err(contract(format!("government action out of range: {gov:?}")));
    }

    let labor = sum_sorted(state.households.iter().zip(acts).map(|(h, a)| h.ability * a.labor));
    let prod = compute_production(state.capital, labor, state.productivity, cfg.capital_share);
    let interest = prod.interest_raw - cfg.depreciation;
    let asset_return = interest.max(0.0);

    let incomes: Vec<f64> = state
        .households
        .iter()
        .zip(acts)
        .map(|(h, a)| prod.wage * h.ability * a.labor + asset_return * h.wealth)
        .collect();

    let nf = n as f64;
    let income_scale = sum_sorted(incomes.iter().copied()) / nf;
    let wealth_scale = sum_sorted(state.households.iter().map(|h| h.wealth)) / nf;
    let taxes: Vec<f64> = state
        .households
        .iter()
        .zip(&incomes)
        .map(|(h, &z)| {
            compute_tax(z, gov.income_tax_rate, gov.income_progressivity, income_scale)
                + compute_tax(
                    h.wealth.max(0.0),
                    gov.wealth_tax_rate,
                    gov.wealth_progressivity,
                    wealth_scale,
                )
        })
        .collect();
    let revenue = sum_sorted(taxes.iter().copied());
    let gov_spending = gov.spend_ratio * revenue;
    let transfer_total = revenue - gov_spending;
    let transfer_each = transfer_total / nf;

    let mut floored = 0;
    let mut disposable = Vec::with_capacity(n);
    let mut consumption = Vec::with_capacity(n);
    let mut households = Vec::with_capacity(n);
    for ((h, a), (&z, &tax)) in state.households.iter().zip(acts).zip(incomes.iter().zip(&taxes)) {
        let raw = h.wealth + z - tax + transfer_each;
        let d = if raw < cfg.disposable_floor {
            floored += 1;
            cfg.disposable_floor
        } else {
            raw
        };
        let c = a.consume_frac * d;
        disposable.push(d);
        consumption.push(c);
        households.push(HouseholdState { wealth: d - c, ability: h.ability, last_income: z });
    }

    let assets = sum_sorted(households.iter().map(|h| h.wealth));
    let debt = (1.0 + interest) * state.gov_debt + gov_spending + transfer_total - revenue;
    let capital = (assets - debt).max(cfg.capital_floor);
    let investment = capital - (1.0 - cfg.depreciation) * state.capital;
    let total_consumption = sum_sorted(consumption.iter().copied());

    let household_rewards = consumption
        .iter()
        .zip(acts)
        .map(|(&c, a)| {
            household_utility(
                c,
                a.labor,
                state.norm.consumption_ref,
                cfg.labor_disutility,
                cfg.labor_curvature,
            )
        })
        .collect::<Result<Vec<f64>>>()?;

    let next = EconomyState {
        households,
        capital,
        gov_debt: debt,
        productivity: state.productivity,
        wage: prod.wage,
        interest,
        t: state.t + 1,
        horizon: state.horizon,
        gdp: prod.output,
        last_revenue: revenue,
        norm: state.norm,
    };
    let term = check_termination(cfg, &next);

    let mut gov_reward = cfg.gdp_reward_scale
        * (prod.output.max(OUTPUT_LOG_FLOOR).ln() - state.gdp.max(OUTPUT_LOG_FLOOR).ln());
    if term.done && term.reason != Some(TerminationReason::Horizon) {
        gov_reward -= cfg.early_end_penalty;
    }

    let accounting = Accounting {
        output: prod.output,
        consumption: total_consumption,
        gov_spending,
        investment,
        tax_revenue: revenue,
        transfer: transfer_total,
        goods_residual: prod.output - total_consumption - gov_spending - investment,
        floored_households: floored,
    };

    Ok((
        next,
        StepReport {
            gov_reward,
            household_rewards,
            done: term.done,
            reason: term.reason,
            accounting,
            consumption,
            incomes,
            taxes,
            disposable,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::init_economy;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn production_closed_forms() {
        let p = compute_production(8.0, 1.0, 1.0, 1.0 / 3.0);
        assert!(close(p.output, 2.0, 1e-14));
        assert!(close(p.wage, 4.0 / 3.0, 1e-14));
        assert!(close(p.interest_raw, 1.0 / 12.0, 1e-14));

        let p = compute_production(5.0, 0.0, 1.0, 1.0 / 3.0);
        assert_eq!((p.output, p.wage), (0.0, 0.0));

        let p = compute_production(1.0, 1.0, 3.0, 0.5);
        assert!(close(p.output, 3.0, 1e-15));
    }

    #[test]
    fn tax_special_cases() {
        for scale in [1.0, 37.0, 1e4] {
            assert!(close(compute_tax(100.0, 0.2, 0.0, scale), 20.0, 1e-13));
        }
        assert_eq!(compute_tax(0.0, 0.5, 1.0, 50.0), 0.0);
        assert!(close(compute_tax(100.0, 0.3, 0.5, 100.0), 30.0, 1e-13));
        // Progressive schedule taxes the rich at a higher average rate.
        let low = compute_tax(50.0, 0.3, 0.5, 100.0) / 50.0;
        let high = compute_tax(200.0, 0.3, 0.5, 100.0) / 200.0;
        assert!(high > low);
        assert!(compute_tax(1.0, 0.0, 2.0, 100.0) <= 1.0);
    }

    #[test]
    fn utility_shape() {
        assert_eq!(household_utility(3.0, 0.0, 3.0, 1.0, 1.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!(close(household_utility(e, 0.0, 1.0, 1.0, 1.0).unwrap(), 1.0 - (-1.0f64).exp(), 1e-15));
        let big = household_utility(1e12, 0.3, 1.0, 1.0, 1.0).unwrap();
        assert!(big < 1.0 && big > 0.999_999);
        assert!(household_utility(2.0, 0.0, 1.0, 1.0, 1.0).unwrap()
            > household_utility(2.0, 0.5, 1.0, 1.0, 1.0).unwrap());
        assert!(matches!(household_utility(0.0, 0.0, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(household_utility(-1.0, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn utility_monotone_on_grid() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..400 {
            let c = k as f64 * 0.05;
            let u = household_utility(c, 0.4, 1.0, 1.0, 1.0).unwrap();
            assert!(u > prev && u < 1.0);
            prev = u;
        }
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let u = household_utility(1.5, k as f64 / 100.0, 1.0, 1.0, 1.0).unwrap();
            assert!(u <= prev);
            prev = u;
        }
    }

    fn one_household(capital: f64, wealth: f64) -> (EconConfig, EconomyState) {
        let cfg = EconConfig {
            households: 1,
            horizon: 5,
            wealth_median: wealth,
            wealth_sigma: 0.0,
            ability_median: 1.0,
            ability_sigma: 0.0,
            depreciation: 0.0,
            ..EconConfig::default()
        };
        let mut s = init_economy(&cfg, 0).unwrap();
        s.capital = capital;
        (cfg, s)
    }

    #[test]
    fn income_from_closed_form_prices() {
        let (cfg, s) = one_household(8.0, 3.0);
        let act = HouseholdAction { consume_frac: 0.3, labor: 1.0 };
        let (_, rep) = step_economy(&cfg, &s, &GovAction::NONE, &[act]).unwrap();
        let expected = 4.0 / 3.0 + 3.0 / 12.0;
        assert!(close(rep.incomes[0], expected, 1e-13));
        assert_eq!(rep.accounting.tax_revenue, 0.0);
        assert_eq!(rep.accounting.transfer, 0.0);
    }

    #[test]
    fn no_tax_no_transfer() {
        let (cfg, s) = one_household(8.0, 3.0);
        let gov = GovAction { spend_ratio: 0.7, ..GovAction::NONE };
        let act = HouseholdAction { consume_frac: 0.5, labor: 0.4 };
        let (_, rep) = step_economy(&cfg, &s, &gov, &[act]).unwrap();
        assert_eq!(rep.accounting.tax_revenue, 0.0);
        assert_eq!(rep.accounting.transfer, 0.0);
        assert_eq!(rep.accounting.gov_spending, 0.0);
    }

    #[test]
    fn symmetric_households_are_treated_identically() {
        let cfg = EconConfig { households: 2, wealth_sigma: 0.0, ability_sigma: 0.0, ..EconConfig::default() };
        let s = init_economy(&cfg, 4).unwrap();
        let gov = GovAction { income_tax_rate: 0.3, income_progressivity: 0.4, wealth_tax_rate: 0.02, wealth_progressivity: 0.1, spend_ratio: 0.5 };
        let act = HouseholdAction { consume_frac: 0.25, labor: 0.8 };
        let (next, rep) = step_economy(&cfg, &s, &gov, &[act, act]).unwrap();
        assert_eq!(rep.household_rewards[0], rep.household_rewards[1]);
        assert_eq!(next.households[0], next.households[1]);
    }

    #[test]
    fn goods_market_closes_without_frictions() {
        // Positive net interest, no floors: the capital-market rule implies Y = C + G + X.
        let cfg = EconConfig { households: 3, depreciation: 0.0, ..EconConfig::default() };
        let s = init_economy(&cfg, 2).unwrap();
        let gov = GovAction { income_tax_rate: 0.2, income_progressivity: 0.3, wealth_tax_rate: 0.01, wealth_progressivity: 0.0, spend_ratio: 0.4 };
        let acts = vec![HouseholdAction { consume_frac: 0.2, labor: 0.7 }; 3];
        let (_, rep) = step_economy(&cfg, &s, &gov, &acts).unwrap();
        assert!(rep.accounting.goods_residual.abs() < 1e-9 * rep.accounting.output);
    }

    #[test]
    fn contract_errors() {
        let cfg = EconConfig { households: 2, horizon: 1, ..EconConfig::default() };
        let s = init_economy(&cfg, 0).unwrap();
        let act = HouseholdAction { consume_frac: 0.5, labor: 0.5 };
        assert!(matches!(step_economy(&cfg, &s, &GovAction::NONE, &[act]), Err(Error::Contract(_))));
        let (next, rep) = step_economy(&cfg, &s, &GovAction::NONE, &[act, act]).unwrap();
        assert!(rep.done);
        assert_eq!(rep.reason, Some(TerminationReason::Horizon));
        assert!(matches!(
            step_economy(&cfg, &next, &GovAction::NONE, &[act, act]),
            Err(Error::EpisodeFinished { .. })
        ));
        let bad = HouseholdAction { consume_frac: 1.0, labor: 0.5 };
        assert!(step_economy(&cfg, &s, &GovAction::NONE, &[bad, act]).is_err());
    }

    #[test]
    fn leader_reward_is_log_output_growth() {
        let cfg = EconConfig { households: 4, ..EconConfig::default() };
        let s = init_economy(&cfg, 8).unwrap();
        let acts = vec![HouseholdAction { consume_frac: 0.2, labor: 0.9 }; 4];
        let (next, rep) = step_economy(&cfg, &s, &GovAction::NONE, &acts).unwrap();
        assert!(close(rep.gov_reward, next.gdp.ln() - s.gdp.ln(), 1e-12));
        assert!(rep.gov_reward > 0.0);
    }
}
