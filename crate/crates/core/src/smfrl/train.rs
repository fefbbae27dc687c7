use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::update::{follower_update, leader_update, LearningRates, LossReport, UpdateScope};
use super::{
    follower_actor_input, follower_unit_action, gov_from_unit, gov_to_unit, household_from_unit, leader_unit_action,
    AgentNets, Exploration, ReplayBuffer, TrainConfig, Transition,
};
use crate::econ::{
    init_economy, observe_follower, observe_followers, observe_leader, step_economy, EconConfig, EconomyState,
    GovAction, HouseholdAction, StepReport,
};
use crate::error::Result;
use crate::mfg::{GovPolicy, HouseholdPolicy};
use crate::nn::NetworkParams;
use crate::seed::{derive_seed, TRAINER_RNG, TRAIN_EPISODES};

/// Who acts in a data-collection step.
#[derive(Debug, Clone, Copy)]
pub struct Actors<'a> {
    pub leader: &'a NetworkParams,
    pub leader_explore: Option<Exploration>,
    pub followers: FollowerActors<'a>,
}

#[derive(Debug, Clone, Copy)]
pub struct FollowerActors<'a> {
    pub population: &'a NetworkParams,
    pub explore: Option<Exploration>,
    /// One household playing its own actor (and exploration).
    pub deviator: Option<(usize, &'a NetworkParams, Option<Exploration>)>,
}

/// Plays one step and packages it as a transition.
pub fn collect_step<R: Rng + ?Sized>(
    econ: &EconConfig,
    state: &EconomyState,
    actors: &Actors<'_>,
    rng: &mut R,
) -> Result<(Transition, EconomyState, StepReport)> {
    let leader_obs = observe_leader(state);
    let al = leader_unit_action(actors.leader, &leader_obs, actors.leader_explore, rng)?;
    let gov = gov_from_unit(&al);
    let obs = observe_followers(state);
    let n = obs.len();
    let mut units = Vec::with_capacity(2 * n);
    let mut acts = Vec::with_capacity(n);
    for (i, o) in obs.iter().enumerate() {
        let (actor, explore) = match actors.followers.deviator {
            Some((d, a, e)) if d == i => (a, e),
            _ => (actors.followers.population, actors.followers.explore),
        };
        let u = follower_unit_action(actor, o, &al, explore, rng)?;
        acts.push(household_from_unit(&u));
        units.extend_from_slice(&u);
    }
    let (next, rep) = step_economy(econ, state, &gov, &acts)?;
    let tr = Transition {
        leader_obs,
        leader_action: al,
        leader_reward: rep.gov_reward,
        next_leader_obs: observe_leader(&next),
        follower_obs: obs.concat(),
        follower_actions: units,
        follower_rewards: rep.household_rewards.clone(),
        next_follower_obs: observe_followers(&next).concat(),
        done: rep.done,
    };
    Ok((tr, next, rep))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpochStats {
    pub epoch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes_finished: usize,
    pub mean_leader_reward: f64,
    pub mean_household_reward: f64,
    pub leader: LossReport,
    pub follower: LossReport,
    pub updates: usize,
    pub buffer_len: usize,
}

/// Owns the networks, the replay buffer and the running episode.
#[derive(Debug, Clone)]
pub struct Trainer {
    econ: EconConfig,
    cfg: TrainConfig,
    seed: u64,
    nets: AgentNets,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    state: EconomyState,
    episodes: u64,
    env_steps: u64,
    epoch: usize,
}

fn accumulate(acc: &mut LossReport, r: LossReport) {
    acc.critic_loss += r.critic_loss;
    acc.actor_objective += r.actor_objective;
}

fn averaged(acc: LossReport, count: usize) -> LossReport {
    let c = count.max(1) as f64;
    LossReport { critic_loss: acc.critic_loss / c, actor_objective: acc.actor_objective / c }
}

impl Trainer {
    pub fn new(econ: &EconConfig, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        econ.validate()?;
        cfg.validate()?;
        Ok(Self {
            nets: AgentNets::for_config(cfg, seed)?,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, TRAINER_RNG, 0)),
            state: init_economy(econ, derive_seed(seed, TRAIN_EPISODES, 0))?,
            econ: econ.clone(),
            cfg: cfg.clone(),
            seed,
            episodes: 0,
            env_steps: 0,
            epoch: 0,
        })
    }

    pub fn nets(&self) -> &AgentNets {
        &self.nets
    }

    pub fn into_nets(self) -> AgentNets {
        self.nets
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Collects `epoch_length` exploratory steps, then runs the update
    /// cycles and the soft target update.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let cfg = &self.cfg;
        let lr = LearningRates::at_epoch(cfg, self.epoch);
        let mut stats = EpochStats { epoch: self.epoch, actor_lr: lr.actor, critic_lr: lr.critic, ..Default::default() };
        let (mut leader_sum, mut household_sum) = (0.0, 0.0);
        for _ in 0..cfg.epoch_length {
            let explore = Some(Exploration { noise_rate: cfg.noise_rate, epsilon: cfg.epsilon_at(self.env_steps) });
            let actors = Actors {
                leader: &self.nets.leader.actor,
                leader_explore: explore,
                followers: FollowerActors { population: &self.nets.follower.actor, explore, deviator: None },
            };
            let (tr, next, rep) = collect_step(&self.econ, &self.state, &actors, &mut self.rng)?;
            leader_sum += rep.gov_reward;
            household_sum += rep.household_rewards.iter().sum::<f64>() / rep.household_rewards.len() as f64;
            self.buffer.push(tr);
            self.env_steps += 1;
            if rep.done {
                self.episodes += 1;
                stats.episodes_finished += 1;
                self.state = init_economy(&self.econ, derive_seed(self.seed, TRAIN_EPISODES, self.episodes))?;
            } else {
                self.state = next;
            }
        }
        let steps = cfg.epoch_length as f64;
        stats.mean_leader_reward = leader_sum / steps;
        stats.mean_household_reward = household_sum / steps;

        let (mut lsum, mut fsum, mut lcount, mut fcount) = (LossReport::default(), LossReport::default(), 0, 0);
        if self.buffer.len() >= cfg.warmup_batches * cfg.batch {
            let layout = self.nets.layout;
            for _ in 0..cfg.update_cycles {
                if cfg.use_leader_follower_update {
                    for _ in 0..cfg.inner_update_cycles {
                        let batch = self.buffer.sample(cfg.batch, &mut self.rng);
                        let r = follower_update(
                            &mut self.nets.follower,
                            &self.nets.leader.actor,
                            layout,
                            &batch,
                            cfg,
                            lr,
                            UpdateScope::default(),
                            &mut self.rng,
                        )?;
                        accumulate(&mut fsum, r);
                        fcount += 1;
                    }
                    let batch = self.buffer.sample(cfg.batch, &mut self.rng);
                    let r = leader_update(
                        &mut self.nets.leader,
                        &self.nets.follower.actor,
                        layout,
                        true,
                        &batch,
                        cfg,
                        lr,
                        &mut self.rng,
                    )?;
                    accumulate(&mut lsum, r);
                    lcount += 1;
                } else {
                    let leader_snapshot = self.nets.leader.actor.clone();
                    let follower_snapshot = self.nets.follower.actor.clone();
                    let batch = self.buffer.sample(cfg.batch, &mut self.rng);
                    let r = follower_update(
                        &mut self.nets.follower,
                        &leader_snapshot,
                        layout,
                        &batch,
                        cfg,
                        lr,
                        UpdateScope::default(),
                        &mut self.rng,
                    )?;
                    accumulate(&mut fsum, r);
                    let batch = self.buffer.sample(cfg.batch, &mut self.rng);
                    let r = leader_update(
                        &mut self.nets.leader,
                        &follower_snapshot,
                        layout,
                        false,
                        &batch,
                        cfg,
                        lr,
                        &mut self.rng,
                    )?;
                    accumulate(&mut lsum, r);
                    fcount += 1;
                    lcount += 1;
                }
            }
        }
        stats.leader = averaged(lsum, lcount);
        stats.follower = averaged(fsum, fcount);
        stats.updates = lcount + fcount;
        stats.buffer_len = self.buffer.len();
        self.nets.soft_update_targets(self.cfg.tau)?;
        self.epoch += 1;
        log::debug!(
            "epoch {} leader reward {:.5} household reward {:.5} critic losses {:.3e}/{:.3e}",
            stats.epoch,
            stats.mean_leader_reward,
            stats.mean_household_reward,
            stats.leader.critic_loss,
            stats.follower.critic_loss
        );
        Ok(stats)
    }
}

/// Runs `train_cfg.epochs` epochs from a fresh initialisation.
pub fn train(econ: &EconConfig, train_cfg: &TrainConfig, seed: u64) -> Result<(AgentNets, Vec<EpochStats>)> {
    let mut t = Trainer::new(econ, train_cfg, seed)?;
    let mut log = Vec::with_capacity(train_cfg.epochs);
    for _ in 0..train_cfg.epochs {
        log.push(t.run_epoch()?);
    }
    Ok((t.into_nets(), log))
}

/// Noise-free government driven by a trained leader actor.
#[derive(Debug, Clone, Copy)]
pub struct SmfrlGov<'a>(pub &'a NetworkParams);

impl GovPolicy for SmfrlGov<'_> {
    fn act(&mut self, state: &EconomyState) -> Result<GovAction> {
        Ok(gov_from_unit(&self.0.forward(&observe_leader(state))?))
    }
}

/// Noise-free households sharing one follower actor.
#[derive(Debug, Clone, Copy)]
pub struct SmfrlHouseholds<'a>(pub &'a NetworkParams);

impl HouseholdPolicy for SmfrlHouseholds<'_> {
    fn act(&self, state: &EconomyState, i: usize, gov: &GovAction) -> Result<HouseholdAction> {
        let x = follower_actor_input(&observe_follower(state, i)?, &gov_to_unit(gov));
        Ok(household_from_unit(&self.0.forward(&x)?))
    }
}
