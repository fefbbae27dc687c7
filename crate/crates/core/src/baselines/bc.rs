use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::econ::{
    init_economy, observe_followers, step_economy, EconConfig, EconomyState, GovAction, HouseholdAction,
    FOLLOWER_OBS_DIM, HOUSEHOLD_ACTION_DIM,
};
use crate::error::{config, contract, Error, Result};
use crate::mfg::HouseholdPolicy;
use crate::nn::{adam_step, Activation, AdamState, NetworkParams, NetworkSpec};
use crate::seed::{derive_seed, BASELINE, NETWORK_INIT};
use crate::stats::median;

/// Observation/action rows recorded from a demonstrator.
#[derive(Debug, Clone, PartialEq)]
pub struct BcDataset {
    obs_dim: usize,
    rows: Vec<(Vec<f64>, Vec<f64>)>,
}

impl BcDataset {
    pub fn new(rows: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let obs_dim = rows.first().map(|r| r.0.len()).unwrap_or(FOLLOWER_OBS_DIM);
        for (k, (o, a)) in rows.iter().enumerate() {
            if o.len() != obs_dim || a.len() != HOUSEHOLD_ACTION_DIM {
                return Err(contract(format!("row {k} has {} observations and {} actions", o.len(), a.len())));
            }
            let act = HouseholdAction { consume_frac: a[0], labor: a[1] };
            if !act.is_valid() {
                return Err(contract(format!("row {k} action {a:?} outside the valid ranges")));
            }
        }
        Ok(Self { obs_dim, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn rows(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.rows
    }

    /// Header `obs_0..obs_k,act_0,act_1`; values round-trip exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.obs_dim)
            .map(|i| format!("obs_{i}"))
            .chain((0..HOUSEHOLD_ACTION_DIM).map(|i| format!("act_{i}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (o, a) in &self.rows {
            let fields: Vec<String> = o.iter().chain(a).map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| config("dataset file is empty"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let obs_dim = cols.iter().filter(|c| c.starts_with("obs_")).count();
        let expected: Vec<String> = (0..obs_dim)
            .map(|i| format!("obs_{i}"))
            .chain((0..HOUSEHOLD_ACTION_DIM).map(|i| format!("act_{i}")))
            .collect();
        if cols != expected {
            return Err(config(format!("unexpected dataset header {header:?}")));
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| config(format!("dataset row {}: {e}", k + 1)))?;
            if vals.len() != cols.len() {
                return Err(config(format!("dataset row {} has {} fields, expected {}", k + 1, vals.len(), cols.len())));
            }
            rows.push((vals[..obs_dim].to_vec(), vals[obs_dim..].to_vec()));
        }
        let ds = Self::new(rows)?;
        Ok(Self { obs_dim, ..ds })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Rule-of-thumb household: consumption share and labor linear in the
/// household's wealth rank (0 = poorest, 1 = richest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorParams {
    pub kappa0: f64,
    pub kappa1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self { kappa0: 0.2, kappa1: -0.1, lambda0: 1.0, lambda1: 0.3 }
    }
}

pub fn rule_of_thumb(p: &BehaviorParams, rank: f64) -> HouseholdAction {
    HouseholdAction {
        consume_frac: (p.kappa0 + p.kappa1 * rank).clamp(0.05, 0.95),
        labor: (p.lambda0 - p.lambda1 * rank).clamp(0.1, 1.0),
    }
}

/// Wealth rank of each household scaled to `[0, 1]`; ties keep index order.
pub fn wealth_ranks(state: &EconomyState) -> Vec<f64> {
    let n = state.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| state.households[a].wealth.total_cmp(&state.households[b].wealth));
    let mut ranks = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if n > 1 { pos as f64 / (n - 1) as f64 } else { 0.0 };
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOfThumbHouseholds(pub BehaviorParams);

impl HouseholdPolicy for RuleOfThumbHouseholds {
    fn act(&self, state: &EconomyState, i: usize, _gov: &GovAction) -> Result<HouseholdAction> {
        let ranks = wealth_ranks(state);
        let r = *ranks.get(i).ok_or_else(|| contract(format!("household index {i} out of range")))?;
        Ok(rule_of_thumb(&self.0, r))
    }
}

/// Rolls the rule-of-thumb population through free-market episodes and
/// records `size` (observation, action) rows.
pub fn synth_bc_dataset(econ: &EconConfig, params: &BehaviorParams, size: usize, seed: u64) -> Result<BcDataset> {
    if size == 0 {
        return Err(contract("dataset size must be at least 1"));
    }
    let mut rows = Vec::with_capacity(size);
    let mut episode = 0;
    let mut state = init_economy(econ, derive_seed(seed, BASELINE, episode))?;
    while rows.len() < size {
        let ranks = wealth_ranks(&state);
        let acts: Vec<HouseholdAction> = ranks.iter().map(|&r| rule_of_thumb(params, r)).collect();
        for (o, a) in observe_followers(&state).into_iter().zip(&acts) {
            if rows.len() < size {
                rows.push((o, vec![a.consume_frac, a.labor]));
            }
        }
        let (next, rep) = step_economy(econ, &state, &GovAction::NONE, &acts)?;
        state = if rep.done {
            episode += 1;
            init_economy(econ, derive_seed(seed, BASELINE, episode))?
        } else {
            next
        };
    }
    BcDataset::new(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcLoss {
    /// Squared error of a deterministic head.
    Mse,
    /// Gaussian negative log-likelihood of a (mean, log-std) head.
    Nll,
}

impl BcLoss {
    pub fn output_dim(self) -> usize {
        match self {
            BcLoss::Mse => HOUSEHOLD_ACTION_DIM,
            BcLoss::Nll => 2 * HOUSEHOLD_ACTION_DIM,
        }
    }
}

/// Tanh MLP from a follower observation to the head required by `loss`.
pub fn bc_spec(loss: BcLoss, hidden: &[usize]) -> NetworkSpec {
    NetworkSpec::mlp(FOLLOWER_OBS_DIM, hidden, loss.output_dim(), Activation::Tanh, Activation::Identity)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcOptions {
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for BcOptions {
    fn default() -> Self {
        Self { batch_size: 32, lr: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcOutcome {
    pub params: NetworkParams,
    /// Loss over the whole dataset after training.
    pub final_loss: f64,
    /// Median minibatch loss of each epoch.
    pub epoch_medians: Vec<f64>,
    pub steps: usize,
}

const LOG_STD_BOUNDS: (f64, f64) = (-10.0, 5.0);

/// Loss of one row and its gradient with respect to the network output,
/// averaged over action dimensions.
fn row_loss(loss: BcLoss, out: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let d = target.len() as f64;
    match loss {
        BcLoss::Mse => {
            let mut l = 0.0;
            let g = out
                .iter()
                .zip(target)
                .map(|(o, t)| {
                    l += (o - t).powi(2);
                    2.0 * (o - t) / d
                })
                .collect();
            (l / d, g)
        }
        BcLoss::Nll => {
            let k = target.len();
            let mut g = vec![0.0; 2 * k];
            let mut l = 0.0;
            for j in 0..k {
                let raw = out[k + j];
                let s = raw.clamp(LOG_STD_BOUNDS.0, LOG_STD_BOUNDS.1);
                let inv_var = (-2.0 * s).exp();
                let r = target[j] - out[j];
                l += 0.5 * r * r * inv_var + s + 0.5 * (2.0 * std::f64::consts::PI).ln();
                g[j] = -r * inv_var / d;
                if raw == s {
                    g[k + j] = (1.0 - r * r * inv_var) / d;
                }
            }
            (l / d, g)
        }
    }
}

fn dataset_loss(params: &NetworkParams, data: &BcDataset, loss: BcLoss) -> Result<f64> {
    let mut total = 0.0;
    for (o, a) in &data.rows {
        total += row_loss(loss, &params.forward(o)?, a).0;
    }
    Ok(total / data.len() as f64)
}

pub fn bc_train(data: &BcDataset, spec: &NetworkSpec, loss: BcLoss, epochs: usize, seed: u64) -> Result<BcOutcome> {
    bc_train_with(data, spec, loss, epochs, seed, &BcOptions::default())
}

/// Minibatch Adam on the chosen imitation loss. Deterministic per seed.
pub fn bc_train_with(
    data: &BcDataset,
    spec: &NetworkSpec,
    loss: BcLoss,
    epochs: usize,
    seed: u64,
    opts: &BcOptions,
) -> Result<BcOutcome> {
    if data.is_empty() {
        return Err(contract("behaviour cloning needs a non-empty dataset"));
    }
    if spec.input_dim() != data.obs_dim() || spec.output_dim() != loss.output_dim() {
        return Err(contract(format!(
            "network {}->{} does not fit observations of {} and a {:?} head of {}",
            spec.input_dim(),
            spec.output_dim(),
            data.obs_dim(),
            loss,
            loss.output_dim()
        )));
    }
    let mut params = NetworkParams::init(spec, derive_seed(seed, NETWORK_INIT, 0))?;
    let mut adam = AdamState::for_params(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, BASELINE, u64::MAX));
    let batch = opts.batch_size.clamp(1, data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_medians = Vec::with_capacity(epochs);
    let mut steps = 0;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(batch) {
            let mut grads = vec![0.0; params.len()];
            let mut total = 0.0;
            let w = 1.0 / chunk.len() as f64;
            for &k in chunk {
                let (o, a) = &data.rows[k];
                let tape = params.forward_tape(o)?;
                let (l, g) = row_loss(loss, tape.output(), a);
                total += l * w;
                let up: Vec<f64> = g.iter().map(|v| v * w).collect();
                params.backward(&tape, &up, &mut grads)?;
            }
            adam_step(&mut params, &grads, &mut adam, opts.lr)?;
            losses.push(total);
            steps += 1;
        }
        epoch_medians.push(median(&losses));
    }
    let final_loss = dataset_loss(&params, data, loss)?;
    Ok(BcOutcome { params, final_loss, epoch_medians, steps })
}

/// Households sharing one cloned network; the mean head is played.
#[derive(Debug, Clone, Copy)]
pub struct BcHouseholds<'a>(pub &'a NetworkParams);

impl HouseholdPolicy for BcHouseholds<'_> {
    fn act(&self, state: &EconomyState, i: usize, _gov: &GovAction) -> Result<HouseholdAction> {
        let obs = crate::econ::observe_follower(state, i)?;
        let out = self.0.forward(&obs)?;
        let c = if out[0].is_nan() { 0.5 } else { out[0] };
        let h = if out[1].is_nan() { 0.5 } else { out[1] };
        Ok(HouseholdAction { consume_frac: c.clamp(0.01, 0.99), labor: h.clamp(0.0, 1.0) })
    }
}
