use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{schedule_to_gov, BracketSchedule};
use crate::econ::{EconomyState, GovAction, StepReport};
use crate::error::{contract, Result};
use crate::mfg::GovPolicy;
use crate::stats::mean;

pub const SAEZ_MAX_RATE: f64 = 0.95;
const ELASTICITY_PRIOR: f64 = 1.0;
const ELASTICITY_BOUNDS: (f64, f64) = (0.1, 10.0);

/// Income/marginal-rate observations and the current elasticity estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SaezState {
    observations: VecDeque<(f64, f64)>,
    capacity: usize,
    elasticity: f64,
    /// Decay exponent of the Pareto welfare weights.
    pub eta: f64,
}

impl SaezState {
    pub fn new(capacity: usize, eta: f64) -> Self {
        Self { observations: VecDeque::new(), capacity: capacity.max(1), elasticity: ELASTICITY_PRIOR, eta }
    }

    /// Records one `(income, marginal rate)` pair, evicting the oldest when full.
    pub fn push(&mut self, income: f64, rate: f64) {
        if self.observations.len() == self.capacity {
            self.observations.pop_front();
        }
        self.observations.push_back((income, rate));
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn observations(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.observations.iter()
    }

    pub fn elasticity(&self) -> f64 {
        self.elasticity
    }

    /// Re-estimates the elasticity from the buffer and stores it.
    pub fn refit(&mut self) -> f64 {
        self.elasticity = saez_fit_elasticity(self);
        self.elasticity
    }
}

/// Slope of log mean income on `log(1 - rate)` across the distinct rates in
/// the buffer, clamped to `[0.1, 10]`. Fewer than two usable rates give the
/// prior 1.0.
pub fn saez_fit_elasticity(state: &SaezState) -> f64 {
    let mut groups: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for &(z, rate) in &state.observations {
        if !(rate < 1.0) || !z.is_finite() {
            continue;
        }
        let g = groups.entry(rate.to_bits()).or_insert((rate, 0.0, 0));
        g.1 += z;
        g.2 += 1;
    }
    let points: Vec<(f64, f64)> = groups
        .values()
        .filter(|(_, total, count)| *total > 0.0 && *count > 0)
        .map(|&(rate, total, count)| ((1.0 - rate).ln(), (total / count as f64).ln()))
        .collect();
    if points.len() < 2 {
        return ELASTICITY_PRIOR;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if !slope.is_finite() {
        return ELASTICITY_PRIOR;
    }
    slope.clamp(ELASTICITY_BOUNDS.0, ELASTICITY_BOUNDS.1)
}

/// `(1 - G) / (1 - G + alpha * e)`, zero when both terms vanish.
pub fn saez_rate(g: f64, alpha: f64, e: f64) -> f64 {
    let num = 1.0 - g;
    let den = num + alpha * e;
    if !(den.abs() > 0.0) || !den.is_finite() {
        return 0.0;
    }
    num / den
}

/// `(mean / (mean + z))^eta`, rescaled to average 1 over `incomes`.
pub fn pareto_weights(incomes: &[f64], eta: f64) -> Vec<f64> {
    let zbar = mean(incomes);
    let raw: Vec<f64> = if zbar > 0.0 {
        incomes.iter().map(|z| (zbar / (zbar + z.max(0.0))).powf(eta)).collect()
    } else {
        vec![1.0; incomes.len()]
    };
    let m = mean(&raw);
    raw.iter().map(|w| w / m).collect()
}

/// Bracket edges at 0, 0.5, 1, 2 and 4 times the mean income.
pub fn default_edges(mean_income: f64) -> Vec<f64> {
    let unit = if mean_income > 0.0 && mean_income.is_finite() { mean_income } else { 1.0 };
    [0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|m| m * unit).collect()
}

/// Optimal marginal rate per bracket from the empirical income distribution.
///
/// Each bracket is represented by the mean income inside it. The hazard
/// `z f(z) / (1 - F(z))` uses the bracket's density for interior brackets
/// and the Pareto tail index `z_m / (z_m - edge)` for the open top bracket.
/// `G` is the average welfare weight of incomes at or above the
/// representative income. Brackets without incomes take the rate linearly
/// interpolated from the nearest filled neighbours.
pub fn saez_rates(state: &SaezState, incomes: &[f64], edges: &[f64]) -> Result<BracketSchedule> {
    if incomes.is_empty() {
        return Err(contract("optimal rates need at least one income"));
    }
    BracketSchedule::new(edges.to_vec(), vec![0.0; edges.len()])?;
    let z: Vec<f64> = incomes.iter().map(|v| v.max(0.0)).collect();
    let n = z.len() as f64;
    let weights = pareto_weights(&z, state.eta);
    let e = state.elasticity;
    let k = edges.len();

    let mut rates: Vec<Option<f64>> = vec![None; k];
    for b in 0..k {
        let lo = edges[b];
        let hi = edges.get(b + 1).copied().unwrap_or(f64::INFINITY);
        let members: Vec<f64> = z.iter().copied().filter(|v| *v >= lo && *v < hi).collect();
        if members.is_empty() {
            continue;
        }
        let zb = mean(&members);
        let above: Vec<usize> = (0..z.len()).filter(|&i| z[i] >= zb).collect();
        let share_above = above.len() as f64 / n;
        let g = above.iter().map(|&i| weights[i]).sum::<f64>() / above.len() as f64;
        let alpha = if hi.is_finite() {
            let density = members.len() as f64 / n / (hi - lo);
            zb * density / share_above
        } else if zb > lo {
            zb / (zb - lo)
        } else {
            f64::INFINITY
        };
        let tau = if alpha.is_infinite() { 0.0 } else { saez_rate(g, alpha, e) };
        rates[b] = Some(if tau.is_finite() { tau.clamp(0.0, SAEZ_MAX_RATE) } else { 0.0 });
    }

    let filled: Vec<usize> = (0..k).filter(|&b| rates[b].is_some()).collect();
    let mut out = vec![0.0; k];
    for b in 0..k {
        out[b] = match rates[b] {
            Some(r) => r,
            None => {
                let left = filled.iter().rev().find(|&&f| f < b).copied();
                let right = filled.iter().find(|&&f| f > b).copied();
                match (left, right) {
                    (Some(l), Some(r)) => {
                        let w = (b - l) as f64 / (r - l) as f64;
                        rates[l].unwrap() * (1.0 - w) + rates[r].unwrap() * w
                    }
                    (Some(l), None) => rates[l].unwrap(),
                    (None, Some(r)) => rates[r].unwrap(),
                    (None, None) => 0.0,
                }
            }
        };
    }
    BracketSchedule::new(edges.to_vec(), out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaezConfig {
    pub capacity: usize,
    pub eta: f64,
    /// Flat rates cycled through while the elasticity is being measured.
    pub calibration_rates: Vec<f64>,
    /// Steps spent at each calibration rate.
    pub regime_steps: usize,
    pub spend_ratio: f64,
}

impl Default for SaezConfig {
    fn default() -> Self {
        Self { capacity: 10_000, eta: 1.0, calibration_rates: vec![0.1, 0.25, 0.4], regime_steps: 10, spend_ratio: 0.0 }
    }
}

/// Adaptive government: measures the income elasticity under a sequence of
/// flat taxes, then plays the HSV fit of the optimal bracket schedule,
/// refitted from the previous episode's incomes at every episode start.
#[derive(Debug, Clone)]
pub struct SaezGov {
    cfg: SaezConfig,
    state: SaezState,
    steps: usize,
    recent_incomes: Vec<f64>,
    action: Option<GovAction>,
}

impl SaezGov {
    pub fn new(cfg: SaezConfig) -> Self {
        let state = SaezState::new(cfg.capacity, cfg.eta);
        Self { cfg, state, steps: 0, recent_incomes: Vec::new(), action: None }
    }

    pub fn state(&self) -> &SaezState {
        &self.state
    }

    fn calibration_steps(&self) -> usize {
        self.cfg.calibration_rates.len() * self.cfg.regime_steps
    }

    fn calibrating(&self) -> bool {
        self.steps < self.calibration_steps()
    }

    fn refit(&mut self) -> Result<()> {
        if self.recent_incomes.is_empty() {
            return Ok(());
        }
        self.state.refit();
        let m = mean(&self.recent_incomes);
        let unit = if m > 0.0 { m } else { 1.0 };
        let relative: Vec<f64> = self.recent_incomes.iter().map(|z| z / unit).collect();
        let schedule = saez_rates(&self.state, &relative, &default_edges(1.0))?;
        self.action = Some(schedule_to_gov(&schedule, 1.0, self.cfg.spend_ratio)?);
        Ok(())
    }

    /// The action currently played after calibration, if fitted.
    pub fn fitted_action(&self) -> Option<GovAction> {
        self.action
    }
}

impl GovPolicy for SaezGov {
    fn act(&mut self, _state: &EconomyState) -> Result<GovAction> {
        if self.calibrating() {
            let rate = self.cfg.calibration_rates[self.steps / self.cfg.regime_steps.max(1)];
            return Ok(GovAction { income_tax_rate: rate, spend_ratio: self.cfg.spend_ratio, ..GovAction::NONE }.clipped());
        }
        if self.action.is_none() {
            self.refit()?;
        }
        Ok(self.action.unwrap_or(GovAction::NONE))
    }

    fn observe(&mut self, _state: &EconomyState, gov: &GovAction, report: &StepReport) {
        if self.calibrating() {
            for &z in &report.incomes {
                self.state.push(z, gov.income_tax_rate);
            }
        }
        self.recent_incomes.extend_from_slice(&report.incomes);
        self.steps += 1;
    }

    fn reset(&mut self, _seed: u64) {
        if !self.calibrating() && !self.recent_incomes.is_empty() {
            // A failed refit keeps the previous action.
            let _ = self.refit();
            self.recent_incomes.clear();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_formula_cases() {
        assert_eq!(saez_rate(1.0, 2.0, 1.0), 0.0);
        assert!((saez_rate(0.0, 2.0, 1.0) - 1.0 / 3.0).abs() < 1e-12);
        assert!(saez_rate(0.2, 1.5, 1.0) > saez_rate(0.6, 1.5, 1.0));
    }

    #[test]
    fn elasticity_recovers_planted_slope() {
        let mut s = SaezState::new(1000, 1.0);
        for &rate in &[0.0, 0.1, 0.2, 0.3, 0.4] {
            for k in 0..10 {
                s.push((1.0 + k as f64) * (1.0f64 - rate).powf(1.0), rate);
            }
        }
        assert!((s.refit() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn elasticity_fallbacks() {
        let mut s = SaezState::new(100, 1.0);
        assert_eq!(saez_fit_elasticity(&s), 1.0);
        for k in 0..10 {
            s.push(k as f64 + 1.0, 0.2);
        }
        assert_eq!(saez_fit_elasticity(&s), 1.0);
        let mut flat = SaezState::new(100, 1.0);
        for &rate in &[0.1, 0.3] {
            flat.push(5.0, rate);
        }
        assert_eq!(saez_fit_elasticity(&flat), 0.1);
    }

    #[test]
    fn buffer_is_bounded_fifo() {
        let mut s = SaezState::new(3, 1.0);
        for k in 0..5 {
            s.push(k as f64, 0.1);
        }
        assert_eq!(s.len(), 3);
        assert_eq!(s.observations().next().unwrap().0, 2.0);
    }

    #[test]
    fn weights_average_one_and_decrease() {
        let w = pareto_weights(&[0.5, 1.0, 2.0, 4.0], 1.0);
        assert!((mean(&w) - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn rates_fill_empty_brackets_and_stay_clipped() {
        let s = SaezState::new(10, 1.0);
        let incomes = [0.1, 0.2, 0.3, 1.5, 1.6, 5.0, 7.0];
        let sched = saez_rates(&s, &incomes, &default_edges(1.0)).unwrap();
        assert!(sched.rates().iter().all(|r| (0.0..=SAEZ_MAX_RATE).contains(r)));
        // Bracket [0.5, 1) is empty and sits between [0, 0.5) and [1, 2).
        let r = sched.rates();
        assert!((r[1] - 0.5 * (r[0] + r[2])).abs() < 1e-12);
        assert!(saez_rates(&s, &[], &default_edges(1.0)).is_err());
        assert!(saez_rates(&s, &incomes, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn saez_gov_calibrates_then_fits() {
        use crate::econ::{EconConfig, HouseholdAction};
        use crate::mfg::{run_episode, ConstantHouseholds, EpisodeOptions};
        let econ = EconConfig { households: 6, horizon: 40, ..EconConfig::default() };
        let mut gov = SaezGov::new(SaezConfig::default());
        let hh = ConstantHouseholds(HouseholdAction { consume_frac: 0.2, labor: 0.8 });
        let opts = EpisodeOptions { seed: 1, gamma: 0.975, shock: None };
        let log = run_episode(&econ, &mut gov, &hh, &opts).unwrap();
        assert_eq!(log.trace[0].income_tax_rate, 0.1);
        assert_eq!(log.trace[15].income_tax_rate, 0.25);
        assert!(gov.fitted_action().is_some());
        assert_eq!(gov.state().len(), 30 * 6);
        run_episode(&econ, &mut gov, &hh, &opts).unwrap();
        assert!(gov.fitted_action().unwrap().is_valid());
    }
}
