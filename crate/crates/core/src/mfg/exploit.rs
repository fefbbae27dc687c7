use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policy::{run_episode, EpisodeOptions, MixedHouseholds};
use crate::econ::{init_economy, EconConfig};
use crate::error::{contract, Result};
use crate::nn::NetworkParams;
use crate::seed::{derive_seed, BEST_RESPONSE};
use crate::smfrl::{
    collect_step, follower_update, leader_update, Actors, AgentNets, AgentSide, Exploration, FollowerActors,
    LearningRates, ReplayBuffer, SmfrlGov, SmfrlHouseholds, TrainConfig, UpdateScope,
};

/// Budget and cadence of the approximate best responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseConfig {
    /// Gradient update rounds per side.
    pub budget: usize,
    /// A fresh exploratory episode is collected every this many rounds.
    pub updates_per_episode: usize,
    /// Candidate policies are scored every this many rounds (and at the end).
    pub eval_every: usize,
    pub batch: usize,
    /// Household index that deviates on the follower side.
    pub deviator: usize,
    pub seed: u64,
}

impl Default for BestResponseConfig {
    fn default() -> Self {
        Self { budget: 200, updates_per_episode: 20, eval_every: 50, batch: 32, deviator: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Exploitability {
    pub follower: f64,
    pub leader: f64,
    pub total: f64,
}

/// Mean (leader return, deviator return) over `seeds`.
fn evaluate(
    econ: &EconConfig,
    leader: &NetworkParams,
    population: &NetworkParams,
    deviator: (usize, &NetworkParams),
    seeds: &[u64],
    gamma: f64,
) -> Result<(f64, f64)> {
    let pop = SmfrlHouseholds(population);
    let dev = SmfrlHouseholds(deviator.1);
    let assignment = (0..econ.households).map(|i| usize::from(i == deviator.0)).collect();
    let households = MixedHouseholds::new(assignment, vec![&pop, &dev])?;
    let (mut jl, mut jf) = (0.0, 0.0);
    for &seed in seeds {
        let log = run_episode(econ, &mut SmfrlGov(leader), &households, &EpisodeOptions { seed, gamma, shock: None })?;
        jl += log.leader_return();
        jf += log.follower_return(deviator.0);
    }
    let k = seeds.len() as f64;
    Ok((jl / k, jf / k))
}

fn collect_episode(econ: &EconConfig, actors: &Actors<'_>, seed: u64, buffer: &mut ReplayBuffer, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut state = init_economy(econ, seed)?;
    loop {
        let (tr, next, rep) = collect_step(econ, &state, actors, rng)?;
        buffer.push(tr);
        if rep.done {
            return Ok(());
        }
        state = next;
    }
}

fn is_checkpoint(round: usize, br: &BestResponseConfig) -> bool {
    (round + 1).is_multiple_of(br.eval_every.max(1)) || round + 1 == br.budget
}

/// Sum of the return gains available to one deviating household and to the
/// government when each refines a clone of its policy against the frozen
/// other side. Each gain is the best score among the original policy and
/// the refinement checkpoints, so both terms are non-negative and a zero
/// budget gives exactly zero.
pub fn exploitability(
    econ: &EconConfig,
    nets: &AgentNets,
    train: &TrainConfig,
    br: &BestResponseConfig,
    eval_seeds: &[u64],
) -> Result<Exploitability> {
    if eval_seeds.is_empty() {
        return Err(contract("exploitability needs at least one evaluation seed"));
    }
    let d = br.deviator;
    if d >= econ.households {
        return Err(contract(format!("deviator {d} outside population of {}", econ.households)));
    }
    if br.budget == 0 {
        return Ok(Exploitability::default());
    }
    let gamma = train.gamma;
    let (base_l, base_f) = evaluate(econ, &nets.leader.actor, &nets.follower.actor, (d, &nets.follower.actor), eval_seeds, gamma)?;
    let lr = LearningRates { actor: train.actor_lr, critic: train.critic_lr };
    let explore = Some(Exploration { noise_rate: train.noise_rate, epsilon: train.epsilon_end });
    let per_episode = br.updates_per_episode.max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(br.seed, BEST_RESPONSE, 0));
    let mut dev: AgentSide = nets.follower.clone();
    let mut buffer = ReplayBuffer::new(train.buffer_capacity);
    let mut best_f = base_f;
    for round in 0..br.budget {
        if round % per_episode == 0 {
            let actors = Actors {
                leader: &nets.leader.actor,
                leader_explore: None,
                followers: FollowerActors { population: &nets.follower.actor, explore: None, deviator: Some((d, &dev.actor, explore)) },
            };
            let seed = derive_seed(br.seed, BEST_RESPONSE, 1000 + (round / per_episode) as u64);
            collect_episode(econ, &actors, seed, &mut buffer, &mut rng)?;
        }
        let batch = buffer.sample(br.batch, &mut rng);
        let scope = UpdateScope { deviator: Some(d), opponent_actor: Some(&nets.follower.actor) };
        follower_update(&mut dev, &nets.leader.actor, nets.layout, &batch, train, lr, scope, &mut rng)?;
        if (round + 1) % per_episode == 0 {
            dev.soft_update_targets(train.tau)?;
        }
        if is_checkpoint(round, br) {
            let (_, jf) = evaluate(econ, &nets.leader.actor, &nets.follower.actor, (d, &dev.actor), eval_seeds, gamma)?;
            best_f = best_f.max(jf);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(br.seed, BEST_RESPONSE, 1));
    let mut dev: AgentSide = nets.leader.clone();
    let mut buffer = ReplayBuffer::new(train.buffer_capacity);
    let mut best_l = base_l;
    for round in 0..br.budget {
        if round % per_episode == 0 {
            let actors = Actors {
                leader: &dev.actor,
                leader_explore: explore,
                followers: FollowerActors { population: &nets.follower.actor, explore: None, deviator: None },
            };
            let seed = derive_seed(br.seed, BEST_RESPONSE, 5000 + (round / per_episode) as u64);
            collect_episode(econ, &actors, seed, &mut buffer, &mut rng)?;
        }
        let batch = buffer.sample(br.batch, &mut rng);
        leader_update(&mut dev, &nets.follower.actor, nets.layout, true, &batch, train, lr, &mut rng)?;
        if (round + 1) % per_episode == 0 {
            dev.soft_update_targets(train.tau)?;
        }
        if is_checkpoint(round, br) {
            let (jl, _) = evaluate(econ, &dev.actor, &nets.follower.actor, (d, &nets.follower.actor), eval_seeds, gamma)?;
            best_l = best_l.max(jl);
        }
    }

    let follower = best_f - base_f;
    let leader = best_l - base_l;
    Ok(Exploitability { follower, leader, total: follower + leader })
}
