//! Game-level quantities: the empirical population distribution, returns,
//! welfare, the efficiency/equity score, policy interfaces, episode
//! rollouts and exploitability.

mod exploit;
mod policy;

pub use exploit::{exploitability, BestResponseConfig, Exploitability};
pub use policy::{
    run_episode, ConstantGov, ConstantHouseholds, EpisodeLog, EpisodeOptions, EpisodeSummary, GovPolicy,
    HouseholdPolicy, MixedHouseholds, RandomGov, Shock, TraceRow,
};

use crate::error::{contract, Error, Result};

/// Finite set of follower (observation, action) pairs together with their
/// per-dimension moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PopDistribution {
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    state_mean: Vec<f64>,
    state_std: Vec<f64>,
    action_mean: Vec<f64>,
    action_std: Vec<f64>,
}

fn column_moments<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.clone().count() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    (mean, var.into_iter().map(|v| (v / n).sqrt()).collect())
}

impl PopDistribution {
    pub fn pairs(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_mean.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_mean.len()
    }

    pub fn state_mean(&self) -> &[f64] {
        &self.state_mean
    }

    pub fn state_std(&self) -> &[f64] {
        &self.state_std
    }

    pub fn action_mean(&self) -> &[f64] {
        &self.action_mean
    }

    pub fn action_std(&self) -> &[f64] {
        &self.action_std
    }

    /// `[state mean, state std, action mean, action std]` concatenated.
    pub fn moments(&self) -> Vec<f64> {
        [&self.state_mean[..], &self.state_std, &self.action_mean, &self.action_std].concat()
    }
}

pub fn empirical_distribution(obs: &[Vec<f64>], acts: &[Vec<f64>]) -> Result<PopDistribution> {
    if obs.is_empty() || obs.len() != acts.len() {
        return Err(contract(format!(
            "population needs matching non-empty lists, got {} observations and {} actions",
            obs.len(),
            acts.len()
        )));
    }
    let (sd, ad) = (obs[0].len(), acts[0].len());
    if obs.iter().any(|o| o.len() != sd) || acts.iter().any(|a| a.len() != ad) {
        return Err(contract("population rows have inconsistent dimensions"));
    }
    let (state_mean, state_std) = column_moments(obs.iter().map(Vec::as_slice), sd);
    let (action_mean, action_std) = column_moments(acts.iter().map(Vec::as_slice), ad);
    Ok(PopDistribution {
        pairs: obs.iter().cloned().zip(acts.iter().cloned()).collect(),
        state_mean,
        state_std,
        action_mean,
        action_std,
    })
}

/// `sum_t gamma^t r_t`.
pub fn episode_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut disc = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += disc * r;
        disc *= gamma;
    }
    total
}

pub fn social_welfare(follower_returns: &[f64]) -> f64 {
    follower_returns.iter().sum()
}

/// `ln(gdp) + alpha * (1 - gini)`.
pub fn multi_objective_score(per_capita_gdp: f64, wealth_gini: f64, alpha: f64) -> Result<f64> {
    if !(per_capita_gdp > 0.0) || !per_capita_gdp.is_finite() {
        return Err(Error::Domain(format!("per-capita GDP must be positive, got {per_capita_gdp}")));
    }
    if !(0.0..=1.0).contains(&wealth_gini) {
        return Err(Error::Domain(format!("Gini must lie in [0, 1], got {wealth_gini}")));
    }
    Ok(per_capita_gdp.ln() + alpha * (1.0 - wealth_gini))
}
