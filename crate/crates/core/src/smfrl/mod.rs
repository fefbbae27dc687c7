//! Leader-follower mean-field actor-critic.
//!
//! The government owns a deterministic actor and a critic; all households
//! share one actor and one critic. Critics never see the whole population:
//! the leader critic scores one (leader, follower pair) at a time and is
//! averaged over sampled pairs, the follower critic scores
//! (leader, own pair, opponent pair) and is averaged over opponents.
//! Actions are stored in unit coordinates `[-1, 1]` and mapped affinely
//! onto the economy's action boxes.

mod buffer;
mod train;
mod update;

pub use buffer::{ReplayBuffer, Transition};
pub use update::concat_selection;
pub use train::{
    collect_step, train, Actors, EpochStats, FollowerActors, SmfrlGov, SmfrlHouseholds, Trainer,
};
pub use update::{
    follower_update, leader_update, update_followers, update_leader, LearningRates, LossReport, UpdateScope,
};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::econ::{
    GovAction, HouseholdAction, FOLLOWER_OBS_DIM, GOV_ACTION_DIM, GOV_ACTION_RANGES, HOUSEHOLD_ACTION_DIM,
    HOUSEHOLD_ACTION_RANGES, LEADER_OBS_DIM,
};
use crate::error::{config, contract, Result};
use crate::mfg::PopDistribution;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{adam_step, Activation, AdamConfig, AdamState, NetworkParams, NetworkSpec};
use crate::seed::{derive_seed, NETWORK_INIT};

/// Width of one follower (observation, action) pair.
pub const PAIR_DIM: usize = FOLLOWER_OBS_DIM + HOUSEHOLD_ACTION_DIM;
/// Follower actor input: own observation plus the leader's unit action.
pub const FOLLOWER_ACTOR_INPUT: usize = FOLLOWER_OBS_DIM + GOV_ACTION_DIM;
const LEADER_HEAD: usize = LEADER_OBS_DIM + GOV_ACTION_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub epochs: usize,
    /// Environment steps collected per epoch.
    pub epoch_length: usize,
    pub batch: usize,
    pub update_cycles: usize,
    /// Follower updates per leader update.
    pub inner_update_cycles: usize,
    pub tau: f64,
    /// Rewards entering TD targets are clamped to `[-reward_clip, reward_clip]`.
    pub reward_clip: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    /// Epochs at the start during which only the critics learn.
    pub actor_delay_epochs: usize,
    pub noise_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay: f64,
    /// Followers sampled per transition in a follower update.
    pub follower_samples: usize,
    /// Opponent pairs averaged in the follower critic.
    pub opponent_samples: usize,
    /// Follower pairs averaged in the leader critic.
    pub leader_pairs: usize,
    /// Pairs concatenated into critic inputs when the mean-field average is off.
    pub concat_pairs: usize,
    /// Updates start once the buffer holds `warmup_batches * batch` items.
    pub warmup_batches: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub use_leader_follower_update: bool,
    pub use_mean_field: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.975,
            epochs: 1000,
            epoch_length: 300,
            batch: 128,
            update_cycles: 100,
            inner_update_cycles: 2,
            tau: 0.95,
            reward_clip: 10.0,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            lr_decay: 0.95,
            lr_decay_every: 35,
            actor_delay_epochs: 0,
            noise_rate: 0.01,
            epsilon_start: 0.1,
            epsilon_end: 0.05,
            epsilon_decay: 1e-5,
            follower_samples: 8,
            opponent_samples: 8,
            leader_pairs: 16,
            concat_pairs: 8,
            warmup_batches: 10,
            buffer_capacity: 1_000_000,
            hidden: vec![128, 128],
            use_leader_follower_update: true,
            use_mean_field: true,
        }
    }
}

impl TrainConfig {
    /// Reduced budget for single-core runs.
    pub fn desk() -> Self {
        Self {
            epochs: 200,
            epoch_length: 100,
            batch: 32,
            update_cycles: 16,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            actor_delay_epochs: 20,
            follower_samples: 4,
            opponent_samples: 4,
            leader_pairs: 10,
            hidden: vec![32, 32],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(config(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        let counts = [
            ("epoch_length", self.epoch_length),
            ("batch", self.batch),
            ("inner_update_cycles", self.inner_update_cycles),
            ("follower_samples", self.follower_samples),
            ("opponent_samples", self.opponent_samples),
            ("leader_pairs", self.leader_pairs),
            ("concat_pairs", self.concat_pairs),
            ("buffer_capacity", self.buffer_capacity),
            ("lr_decay_every", self.lr_decay_every),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(config(format!("{name} must be positive")));
        }
        if !(self.reward_clip > 0.0) {
            return Err(config("reward_clip must be positive"));
        }
        if self.actor_lr < 0.0 || self.critic_lr < 0.0 || self.noise_rate < 0.0 {
            return Err(config("learning rates and noise must be non-negative"));
        }
        if self.hidden.contains(&0) {
            return Err(config("hidden layer widths must be positive"));
        }
        Ok(())
    }

    pub fn layout(&self) -> CriticLayout {
        CriticLayout { mean_field: self.use_mean_field, concat_pairs: self.concat_pairs }
    }

    pub fn clip_reward(&self, r: f64) -> f64 {
        r.clamp(-self.reward_clip, self.reward_clip)
    }

    pub fn epsilon_at(&self, env_steps: u64) -> f64 {
        (self.epsilon_start - self.epsilon_decay * env_steps as f64).max(self.epsilon_end)
    }
}

/// Training variants obtained by switching off the two structural pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Alternating leader-follower updates with mean-field critics.
    Full,
    /// Simultaneous updates from a shared snapshot.
    Simultaneous,
    /// Critics read a fixed-size concatenation of follower pairs.
    Concat,
    Independent,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "smfg",
            Variant::Simultaneous => "smfg-s",
            Variant::Concat => "smfg-mf",
            Variant::Independent => "smfg-s-mf",
        }
    }

    pub fn flags(&self) -> (bool, bool) {
        match self {
            Variant::Full => (true, true),
            Variant::Simultaneous => (false, true),
            Variant::Concat => (true, false),
            Variant::Independent => (false, false),
        }
    }

    pub fn apply(&self, cfg: &TrainConfig) -> TrainConfig {
        let (lf, mf) = self.flags();
        TrainConfig { use_leader_follower_update: lf, use_mean_field: mf, ..cfg.clone() }
    }
}

pub fn ablation_variant(use_leader_follower_update: bool, use_mean_field: bool) -> Variant {
    match (use_leader_follower_update, use_mean_field) {
        (true, true) => Variant::Full,
        (false, true) => Variant::Simultaneous,
        (true, false) => Variant::Concat,
        (false, false) => Variant::Independent,
    }
}

/// `base_lr * decay^(epoch / every)` with integer division.
pub fn lr_schedule(base_lr: f64, epoch: usize) -> f64 {
    scheduled_lr(base_lr, epoch, 0.95, 35)
}

pub fn scheduled_lr(base_lr: f64, epoch: usize, decay: f64, every: usize) -> f64 {
    base_lr * decay.powi((epoch / every) as i32)
}

/// How critic inputs are assembled from the follower population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticLayout {
    pub mean_field: bool,
    pub concat_pairs: usize,
}

impl CriticLayout {
    pub const MEAN_FIELD: CriticLayout = CriticLayout { mean_field: true, concat_pairs: 8 };

    pub fn leader_critic_input(&self) -> usize {
        if self.mean_field {
            LEADER_HEAD + PAIR_DIM
        } else {
            LEADER_HEAD + self.concat_pairs * PAIR_DIM
        }
    }

    pub fn follower_critic_input(&self) -> usize {
        if self.mean_field {
            LEADER_HEAD + 2 * PAIR_DIM
        } else {
            LEADER_HEAD + (1 + self.concat_pairs) * PAIR_DIM
        }
    }
}

/// Actor, critic, their targets and optimiser states for one side.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSide {
    pub actor: NetworkParams,
    pub actor_target: NetworkParams,
    pub critic: NetworkParams,
    pub critic_target: NetworkParams,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl AgentSide {
    fn new(actor_spec: &NetworkSpec, critic_spec: &NetworkSpec, seed: u64) -> Result<Self> {
        let actor = NetworkParams::init(actor_spec, derive_seed(seed, NETWORK_INIT, 0))?;
        let critic = NetworkParams::init(critic_spec, derive_seed(seed, NETWORK_INIT, 1))?;
        Ok(Self {
            actor_opt: AdamState::new(actor.len(), AdamConfig::default()),
            critic_opt: AdamState::new(critic.len(), AdamConfig::default()),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        })
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        self.actor_target.soft_update_from(&self.actor, tau)?;
        self.critic_target.soft_update_from(&self.critic, tau)
    }

    pub(crate) fn step_actor(&mut self, grads: &[f64], lr: f64) -> Result<()> {
        adam_step(&mut self.actor, grads, &mut self.actor_opt, lr)
    }

    pub(crate) fn step_critic(&mut self, grads: &[f64], lr: f64) -> Result<()> {
        adam_step(&mut self.critic, grads, &mut self.critic_opt, lr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentNets {
    pub leader: AgentSide,
    pub follower: AgentSide,
    pub layout: CriticLayout,
}

fn net_names(side: &str) -> [String; 4] {
    [
        format!("{side}_actor"),
        format!("{side}_actor_target"),
        format!("{side}_critic"),
        format!("{side}_critic_target"),
    ]
}

impl AgentNets {
    pub fn new(hidden: &[usize], layout: CriticLayout, seed: u64) -> Result<Self> {
        let (la, lc, fa, fc) = Self::specs(hidden, layout);
        Ok(Self {
            leader: AgentSide::new(&la, &lc, derive_seed(seed, NETWORK_INIT, 10))?,
            follower: AgentSide::new(&fa, &fc, derive_seed(seed, NETWORK_INIT, 20))?,
            layout,
        })
    }

    pub fn for_config(cfg: &TrainConfig, seed: u64) -> Result<Self> {
        Self::new(&cfg.hidden, cfg.layout(), seed)
    }

    /// Leader actor, leader critic, follower actor, follower critic.
    pub fn specs(hidden: &[usize], layout: CriticLayout) -> (NetworkSpec, NetworkSpec, NetworkSpec, NetworkSpec) {
        let t = Activation::Tanh;
        let id = Activation::Identity;
        (
            NetworkSpec::mlp(LEADER_OBS_DIM, hidden, GOV_ACTION_DIM, t, t),
            NetworkSpec::mlp(layout.leader_critic_input(), hidden, 1, t, id),
            NetworkSpec::mlp(FOLLOWER_ACTOR_INPUT, hidden, HOUSEHOLD_ACTION_DIM, t, t),
            NetworkSpec::mlp(layout.follower_critic_input(), hidden, 1, t, id),
        )
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        self.leader.soft_update_targets(tau)?;
        self.follower.soft_update_targets(tau)
    }

    pub fn write_to(&self, ckpt: &mut Checkpoint) -> Result<()> {
        ckpt.set_meta("layout_mean_field", self.layout.mean_field)?;
        ckpt.set_meta("layout_concat_pairs", self.layout.concat_pairs)?;
        for (side, s) in [("leader", &self.leader), ("follower", &self.follower)] {
            let names = net_names(side);
            for (name, net) in names.iter().zip([&s.actor, &s.actor_target, &s.critic, &s.critic_target]) {
                ckpt.add_network(name, net)?;
            }
            for (name, opt) in [(&names[0], &s.actor_opt), (&names[2], &s.critic_opt)] {
                ckpt.add_array(&format!("{name}.adam_m"), &opt.m)?;
                ckpt.add_array(&format!("{name}.adam_v"), &opt.v)?;
                ckpt.set_meta(&format!("{name}.adam_step"), opt.step)?;
            }
        }
        Ok(())
    }

    /// Restores all eight networks, checking them against the shapes
    /// implied by `hidden` and the stored critic layout.
    pub fn read_from(ckpt: &Checkpoint, hidden: &[usize]) -> Result<Self> {
        let bad = |k: &str| crate::Error::Checkpoint(format!("missing or malformed metadata '{k}'"));
        let mean_field = ckpt
            .meta("layout_mean_field")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("layout_mean_field"))?;
        let concat_pairs = ckpt
            .meta("layout_concat_pairs")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("layout_concat_pairs"))?;
        let layout = CriticLayout { mean_field, concat_pairs };
        let (la, lc, fa, fc) = Self::specs(hidden, layout);
        let side = |name: &str, a: &NetworkSpec, c: &NetworkSpec| -> Result<AgentSide> {
            let names = net_names(name);
            let opt = |net: &str, len: usize| -> Result<AdamState> {
                let key = format!("{net}.adam_step");
                let step = ckpt.meta(&key).and_then(|v| v.parse().ok()).ok_or_else(|| bad(&key))?;
                let m = ckpt.array(&format!("{net}.adam_m"))?.to_vec();
                let v = ckpt.array(&format!("{net}.adam_v"))?.to_vec();
                if m.len() != len || v.len() != len {
                    return Err(crate::Error::Checkpoint(format!("optimiser state of '{net}' has wrong length")));
                }
                Ok(AdamState { m, v, step, config: AdamConfig::default() })
            };
            Ok(AgentSide {
                actor: ckpt.network_checked(&names[0], a)?,
                actor_target: ckpt.network_checked(&names[1], a)?,
                critic: ckpt.network_checked(&names[2], c)?,
                critic_target: ckpt.network_checked(&names[3], c)?,
                actor_opt: opt(&names[0], a.num_params())?,
                critic_opt: opt(&names[2], c.num_params())?,
            })
        };
        Ok(Self { leader: side("leader", &la, &lc)?, follower: side("follower", &fa, &fc)?, layout })
    }
}

fn to_unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn from_unit(u: f64, (lo, hi): (f64, f64)) -> f64 {
    let u = if u.is_nan() { -1.0 } else { u.clamp(-1.0, 1.0) };
    (lo + 0.5 * (u + 1.0) * (hi - lo)).clamp(lo, hi)
}

pub fn gov_from_unit(u: &[f64]) -> GovAction {
    let mut v = [0.0; GOV_ACTION_DIM];
    for k in 0..GOV_ACTION_DIM {
        v[k] = from_unit(u[k], GOV_ACTION_RANGES[k]);
    }
    GovAction::from_array(v)
}

pub fn gov_to_unit(g: &GovAction) -> Vec<f64> {
    g.to_array().iter().zip(GOV_ACTION_RANGES).map(|(v, r)| to_unit(*v, r)).collect()
}

pub fn household_from_unit(u: &[f64]) -> HouseholdAction {
    HouseholdAction {
        consume_frac: from_unit(u[0], HOUSEHOLD_ACTION_RANGES[0]),
        labor: from_unit(u[1], HOUSEHOLD_ACTION_RANGES[1]),
    }
}

pub fn household_to_unit(a: &HouseholdAction) -> Vec<f64> {
    vec![
        to_unit(a.consume_frac, HOUSEHOLD_ACTION_RANGES[0]),
        to_unit(a.labor, HOUSEHOLD_ACTION_RANGES[1]),
    ]
}

/// Additive Gaussian noise (std `noise_rate` times the action range) plus
/// epsilon-greedy uniform resampling, both in unit coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exploration {
    pub noise_rate: f64,
    pub epsilon: f64,
}

impl Exploration {
    pub fn perturb<R: Rng + ?Sized>(&self, u: &mut [f64], rng: &mut R) {
        if rng.random::<f64>() < self.epsilon {
            u.iter_mut().for_each(|x| *x = rng.random_range(-1.0..=1.0));
            return;
        }
        if self.noise_rate > 0.0 {
            let normal = Normal::new(0.0, 2.0 * self.noise_rate).expect("finite std");
            u.iter_mut().for_each(|x| *x = (*x + normal.sample(rng)).clamp(-1.0, 1.0));
        }
    }
}

/// Leader action in unit coordinates.
pub fn leader_unit_action<R: Rng + ?Sized>(
    actor: &NetworkParams,
    obs: &[f64],
    explore: Option<Exploration>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut u = actor.forward(obs)?;
    if let Some(e) = explore {
        e.perturb(&mut u, rng);
    }
    Ok(u)
}

pub fn follower_actor_input(obs: &[f64], leader_unit: &[f64]) -> Vec<f64> {
    [obs, leader_unit].concat()
}

pub fn follower_unit_action<R: Rng + ?Sized>(
    actor: &NetworkParams,
    obs: &[f64],
    leader_unit: &[f64],
    explore: Option<Exploration>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut u = actor.forward(&follower_actor_input(obs, leader_unit))?;
    if let Some(e) = explore {
        e.perturb(&mut u, rng);
    }
    Ok(u)
}

pub fn act_leader<R: Rng + ?Sized>(
    nets: &AgentNets,
    leader_obs: &[f64],
    explore: Option<Exploration>,
    rng: &mut R,
) -> Result<GovAction> {
    Ok(gov_from_unit(&leader_unit_action(&nets.leader.actor, leader_obs, explore, rng)?))
}

pub fn act_follower<R: Rng + ?Sized>(
    nets: &AgentNets,
    follower_obs: &[f64],
    leader_action: &GovAction,
    explore: Option<Exploration>,
    rng: &mut R,
) -> Result<HouseholdAction> {
    let lu = gov_to_unit(leader_action);
    Ok(household_from_unit(&follower_unit_action(&nets.follower.actor, follower_obs, &lu, explore, rng)?))
}

/// Critic input for one pair: `[s^l, a^l, (own pair), pair]`.
pub(crate) fn pair_input(leader_obs: &[f64], leader_action: &[f64], own: Option<(&[f64], &[f64])>, pair: (&[f64], &[f64])) -> Vec<f64> {
    let mut x = Vec::with_capacity(LEADER_HEAD + 2 * PAIR_DIM);
    x.extend_from_slice(leader_obs);
    x.extend_from_slice(leader_action);
    if let Some((s, a)) = own {
        x.extend_from_slice(s);
        x.extend_from_slice(a);
    }
    x.extend_from_slice(pair.0);
    x.extend_from_slice(pair.1);
    x
}

/// Mean-field critic value: the average of the per-pair critic over every
/// supplied pair. With `own_pair` the critic is the follower form
/// `Q(s^l, a^l, own, other)`, otherwise the leader form `Q(s^l, a^l, pair)`.
pub fn mean_field_q(
    critic: &NetworkParams,
    leader_obs: &[f64],
    leader_action: &[f64],
    pairs: &PopDistribution,
    own_pair: Option<(&[f64], &[f64])>,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(contract("mean-field value needs at least one pair"));
    }
    let mut total = 0.0;
    for (s, a) in pairs.pairs() {
        total += critic.forward(&pair_input(leader_obs, leader_action, own_pair, (s, a)))?[0];
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfg::empirical_distribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lr_schedule_steps_every_35_epochs() {
        assert_eq!(lr_schedule(3e-4, 0), 3e-4);
        assert_eq!(lr_schedule(3e-4, 34), 3e-4);
        assert!((lr_schedule(1.0, 70) - 0.9025).abs() < 1e-15);
    }

    #[test]
    fn unit_maps_round_trip_and_stay_in_range() {
        let g = GovAction::from_array([0.2, 1.0, 0.05, 0.5, 0.3]);
        let back = gov_from_unit(&gov_to_unit(&g));
        for (a, b) in back.to_array().iter().zip(g.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(gov_from_unit(&[0.0; 5]).to_array(), [0.4, 1.0, 0.05, 1.0, 0.5]);
        assert!(gov_from_unit(&[-5.0, 5.0, f64::NAN, 1.0, -1.0]).is_valid());
        assert!(household_from_unit(&[1.0, -1.0]).is_valid());
    }

    #[test]
    fn zero_actor_acts_at_box_midpoint() {
        let mut nets = AgentNets::new(&[4], CriticLayout::MEAN_FIELD, 0).unwrap();
        nets.leader.actor.as_mut_slice().iter_mut().for_each(|w| *w = 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = act_leader(&nets, &[0.3; LEADER_OBS_DIM], None, &mut rng).unwrap();
        assert_eq!(g.to_array(), [0.4, 1.0, 0.05, 1.0, 0.5]);
    }

    #[test]
    fn critic_sizes_follow_layout() {
        let mf = CriticLayout::MEAN_FIELD;
        assert_eq!(mf.leader_critic_input(), 21);
        assert_eq!(mf.follower_critic_input(), 29);
        let c4 = CriticLayout { mean_field: false, concat_pairs: 4 };
        let c8 = CriticLayout { mean_field: false, concat_pairs: 8 };
        assert_eq!(c8.leader_critic_input() - c4.leader_critic_input(), 4 * PAIR_DIM);
        assert_eq!(c8.follower_critic_input() - c4.follower_critic_input(), 4 * PAIR_DIM);
    }

    #[test]
    fn mean_field_q_matches_manual_average() {
        let nets = AgentNets::new(&[8], CriticLayout::MEAN_FIELD, 3).unwrap();
        let sl = [0.1; LEADER_OBS_DIM];
        let al = [0.2; GOV_ACTION_DIM];
        let obs: Vec<Vec<f64>> = (0..3).map(|k| vec![k as f64; FOLLOWER_OBS_DIM]).collect();
        let acts: Vec<Vec<f64>> = (0..3).map(|k| vec![-0.5 * k as f64; 2]).collect();
        let pop = empirical_distribution(&obs, &acts).unwrap();
        let q = mean_field_q(&nets.leader.critic, &sl, &al, &pop, None).unwrap();
        let manual: f64 = (0..3)
            .map(|k| nets.leader.critic.forward(&pair_input(&sl, &al, None, (&obs[k], &acts[k]))).unwrap()[0])
            .sum::<f64>()
            / 3.0;
        assert!((q - manual).abs() <= 1e-12 * manual.abs().max(1e-300));
    }

    #[test]
    fn variants_round_trip_flags() {
        for v in [Variant::Full, Variant::Simultaneous, Variant::Concat, Variant::Independent] {
            let (a, b) = v.flags();
            assert_eq!(ablation_variant(a, b), v);
        }
        assert_eq!(Variant::Independent.name(), "smfg-s-mf");
    }

    #[test]
    fn checkpoint_round_trip() {
        let nets = AgentNets::new(&[6], CriticLayout::MEAN_FIELD, 5).unwrap();
        let mut c = Checkpoint::new();
        nets.write_to(&mut c).unwrap();
        let c = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(AgentNets::read_from(&c, &[6]).unwrap(), nets);
        assert!(AgentNets::read_from(&c, &[7]).is_err());
    }
}
