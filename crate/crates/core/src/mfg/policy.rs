use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::episode_return;
use crate::econ::{
    apply_shock, init_economy, step_economy, EconConfig, EconomyState, GovAction, HouseholdAction, StepReport,
    TerminationReason, GOV_ACTION_RANGES,
};
use crate::error::{contract, Result};
use crate::stats::{gini_clipped, mean};

/// Government decision rule used during evaluation rollouts.
pub trait GovPolicy {
    fn act(&mut self, state: &EconomyState) -> Result<GovAction>;

    /// Sees every realised step. Adaptive rules update here.
    fn observe(&mut self, _state: &EconomyState, _gov: &GovAction, _report: &StepReport) {}

    /// Called once before each episode with the episode seed.
    fn reset(&mut self, _seed: u64) {}
}

/// Household decision rule; `i` indexes the household inside `state`.
pub trait HouseholdPolicy {
    fn act(&self, state: &EconomyState, i: usize, gov: &GovAction) -> Result<HouseholdAction>;
}

impl<T: HouseholdPolicy + ?Sized> HouseholdPolicy for &T {
    fn act(&self, state: &EconomyState, i: usize, gov: &GovAction) -> Result<HouseholdAction> {
        (**self).act(state, i, gov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantGov(pub GovAction);

impl GovPolicy for ConstantGov {
    fn act(&mut self, _state: &EconomyState) -> Result<GovAction> {
        Ok(self.0)
    }
}

/// Draws every lever uniformly from its range at every step.
#[derive(Debug, Clone)]
pub struct RandomGov {
    rng: ChaCha8Rng,
}

impl RandomGov {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl GovPolicy for RandomGov {
    fn act(&mut self, _state: &EconomyState) -> Result<GovAction> {
        let mut v = [0.0; 5];
        for (x, (lo, hi)) in v.iter_mut().zip(GOV_ACTION_RANGES) {
            *x = self.rng.random_range(lo..=hi);
        }
        Ok(GovAction::from_array(v))
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_9001);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantHouseholds(pub HouseholdAction);

impl HouseholdPolicy for ConstantHouseholds {
    fn act(&self, _state: &EconomyState, _i: usize, _gov: &GovAction) -> Result<HouseholdAction> {
        Ok(self.0)
    }
}

/// Routes each household index to one of several policies.
pub struct MixedHouseholds<'a> {
    assignment: Vec<usize>,
    policies: Vec<&'a dyn HouseholdPolicy>,
}

impl<'a> MixedHouseholds<'a> {
    pub fn new(assignment: Vec<usize>, policies: Vec<&'a dyn HouseholdPolicy>) -> Result<Self> {
        if let Some(bad) = assignment.iter().find(|&&g| g >= policies.len()) {
            return Err(contract(format!("group {bad} has no policy ({} given)", policies.len())));
        }
        Ok(Self { assignment, policies })
    }

    /// The first `first_count` households follow `first`, the rest `second`.
    pub fn split(n: usize, first_count: usize, first: &'a dyn HouseholdPolicy, second: &'a dyn HouseholdPolicy) -> Self {
        let assignment = (0..n).map(|i| usize::from(i >= first_count)).collect();
        Self { assignment, policies: vec![first, second] }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

impl HouseholdPolicy for MixedHouseholds<'_> {
    fn act(&self, state: &EconomyState, i: usize, gov: &GovAction) -> Result<HouseholdAction> {
        let g = *self
            .assignment
            .get(i)
            .ok_or_else(|| contract(format!("household {i} has no group assignment")))?;
        self.policies[g].act(state, i, gov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shock {
    pub step: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub seed: u64,
    pub gamma: f64,
    pub shock: Option<Shock>,
}

/// Indicators of one simulated step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub shock: bool,
    pub gdp_per_capita: f64,
    /// Gini of wealth entering the step, after any shock.
    pub wealth_gini: f64,
    /// Gini of the step's realised incomes.
    pub income_gini: f64,
    /// Mean wealth entering the step, after any shock.
    pub mean_wealth: f64,
    /// Mean wealth after the step's savings decisions.
    pub mean_wealth_after: f64,
    pub mean_income: f64,
    pub mean_consumption: f64,
    /// Sum of household utilities this step.
    pub welfare: f64,
    pub leader_reward: f64,
    pub income_tax_rate: f64,
    pub wealth_tax_rate: f64,
    pub spend_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub horizon: usize,
    pub gamma: f64,
    pub leader_rewards: Vec<f64>,
    /// `[household][t]`.
    pub follower_rewards: Vec<Vec<f64>>,
    /// `[household][t]`.
    pub follower_incomes: Vec<Vec<f64>>,
    pub final_wealth: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub termination: Option<TerminationReason>,
}

/// Episode-level indicators; averages run over the simulated steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub steps_survived: usize,
    pub per_capita_gdp: f64,
    pub social_welfare: f64,
    pub income_gini: f64,
    pub wealth_gini: f64,
    pub mean_wealth: f64,
    pub mean_income: f64,
    pub mean_consumption: f64,
    pub leader_payoff: f64,
}

impl EpisodeLog {
    pub fn steps_survived(&self) -> usize {
        self.trace.len()
    }

    pub fn leader_return(&self) -> f64 {
        episode_return(&self.leader_rewards, self.gamma)
    }

    pub fn follower_return(&self, i: usize) -> f64 {
        episode_return(&self.follower_rewards[i], self.gamma)
    }

    /// Per-household utility summed over the episode and divided by the
    /// horizon (not by the steps survived, so early collapse is penalised).
    pub fn household_welfare(&self, i: usize) -> f64 {
        self.follower_rewards[i].iter().sum::<f64>() / self.horizon as f64
    }

    pub fn social_welfare(&self) -> f64 {
        let per: Vec<f64> = (0..self.follower_rewards.len()).map(|i| self.household_welfare(i)).collect();
        super::social_welfare(&per)
    }

    pub fn summary(&self) -> EpisodeSummary {
        let col = |f: fn(&TraceRow) -> f64| mean(&self.trace.iter().map(f).collect::<Vec<_>>());
        EpisodeSummary {
            steps_survived: self.steps_survived(),
            per_capita_gdp: col(|r| r.gdp_per_capita),
            social_welfare: self.social_welfare(),
            income_gini: col(|r| r.income_gini),
            wealth_gini: col(|r| r.wealth_gini),
            mean_wealth: col(|r| r.mean_wealth_after),
            mean_income: col(|r| r.mean_income),
            mean_consumption: col(|r| r.mean_consumption),
            leader_payoff: self.leader_return(),
        }
    }
}

/// Simulates one noise-free episode from `init_economy(cfg, opts.seed)`.
///
/// A shock at step `s` rescales wealth right before the agents act at `s`.
pub fn run_episode(
    cfg: &EconConfig,
    gov: &mut dyn GovPolicy,
    households: &dyn HouseholdPolicy,
    opts: &EpisodeOptions,
) -> Result<EpisodeLog> {
    if let Some(shock) = opts.shock {
        if shock.step >= cfg.horizon {
            return Err(crate::error::config(format!(
                "shock step {} must be below the horizon {}",
                shock.step, cfg.horizon
            )));
        }
    }
    let mut state = init_economy(cfg, opts.seed)?;
    gov.reset(opts.seed);
    let n = state.n();
    let mut log = EpisodeLog {
        horizon: cfg.horizon,
        gamma: opts.gamma,
        leader_rewards: Vec::with_capacity(cfg.horizon),
        follower_rewards: vec![Vec::with_capacity(cfg.horizon); n],
        follower_incomes: vec![Vec::with_capacity(cfg.horizon); n],
        final_wealth: Vec::new(),
        trace: Vec::with_capacity(cfg.horizon),
        termination: None,
    };
    loop {
        let shocked = matches!(opts.shock, Some(s) if s.step == state.t);
        if shocked {
            state = apply_shock(&state, opts.shock.unwrap().factor)?;
        }
        let g = gov.act(&state)?;
        let acts = (0..n).map(|i| households.act(&state, i, &g)).collect::<Result<Vec<_>>>()?;
        let (next, rep) = step_economy(cfg, &state, &g, &acts)?;
        log.leader_rewards.push(rep.gov_reward);
        for i in 0..n {
            log.follower_rewards[i].push(rep.household_rewards[i]);
            log.follower_incomes[i].push(rep.incomes[i]);
        }
        log.trace.push(TraceRow {
            t: state.t,
            shock: shocked,
            gdp_per_capita: rep.accounting.output / n as f64,
            wealth_gini: state.wealth_gini(),
            income_gini: gini_clipped(&rep.incomes),
            mean_wealth: state.mean_wealth(),
            mean_wealth_after: next.mean_wealth(),
            mean_income: mean(&rep.incomes),
            mean_consumption: mean(&rep.consumption),
            welfare: rep.household_rewards.iter().sum(),
            leader_reward: rep.gov_reward,
            income_tax_rate: g.income_tax_rate,
            wealth_tax_rate: g.wealth_tax_rate,
            spend_ratio: g.spend_ratio,
        });
        gov.observe(&state, &g, &rep);
        state = next;
        if rep.done {
            log.termination = rep.reason;
            break;
        }
    }
    log.final_wealth = state.wealths();
    Ok(log)
}
