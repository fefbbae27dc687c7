use rand::seq::index;
use rand::Rng;

use super::{follower_actor_input, pair_input, AgentNets, AgentSide, CriticLayout, Transition, TrainConfig, PAIR_DIM};
use crate::econ::{FOLLOWER_OBS_DIM, GOV_ACTION_DIM, HOUSEHOLD_ACTION_DIM, LEADER_OBS_DIM};
use crate::error::{contract, Result};
use crate::nn::{NetworkParams, Tape};

const LEADER_ACTION_SLOT: usize = LEADER_OBS_DIM;
const OWN_ACTION_SLOT: usize = LEADER_OBS_DIM + GOV_ACTION_DIM + FOLLOWER_OBS_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    /// Mean squared TD error over every critic evaluation in the batch.
    pub critic_loss: f64,
    /// Mean critic value of the actor's own actions.
    pub actor_objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub actor: f64,
    pub critic: f64,
}

impl LearningRates {
    pub fn at_epoch(cfg: &TrainConfig, epoch: usize) -> Self {
        Self {
            actor: if epoch < cfg.actor_delay_epochs {
                0.0
            } else {
                super::scheduled_lr(cfg.actor_lr, epoch, cfg.lr_decay, cfg.lr_decay_every)
            },
            critic: super::scheduled_lr(cfg.critic_lr, epoch, cfg.lr_decay, cfg.lr_decay_every),
        }
    }
}

/// Optional restrictions of a follower update, used when refining a single
/// deviating household against a fixed population.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateScope<'a> {
    /// Only this household's experience is used.
    pub deviator: Option<usize>,
    /// Policy producing the opponents' next actions; the target actor if unset.
    pub opponent_actor: Option<&'a NetworkParams>,
}

/// `min(k, n)` distinct indices from `0..n`, skipping `exclude` when any
/// other index exists.
fn sample_indices<R: Rng + ?Sized>(n: usize, k: usize, exclude: Option<usize>, rng: &mut R) -> Vec<usize> {
    match exclude {
        Some(e) if n > 1 => {
            let k = k.min(n - 1);
            index::sample(rng, n - 1, k).into_iter().map(|j| if j >= e { j + 1 } else { j }).collect()
        }
        _ => index::sample(rng, n, k.min(n)).into_vec(),
    }
}

/// `m` evenly spaced order statistics of the population sorted by wealth
/// (first observation coordinate). Repeats indices when `m > n`.
pub fn concat_selection<'a>(obs: impl Fn(usize) -> &'a [f64], n: usize, m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| obs(a)[0].total_cmp(&obs(b)[0]).then(a.cmp(&b)));
    if m == 1 {
        return vec![order[(n - 1) / 2]];
    }
    (0..m)
        .map(|k| order[((k * (n - 1)) as f64 / (m - 1) as f64).round() as usize])
        .collect()
}

/// Critic inputs for one evaluation and the weight of each term.
fn critic_inputs(
    layout: CriticLayout,
    sl: &[f64],
    al: &[f64],
    own: Option<(&[f64], &[f64])>,
    pairs: &[(&[f64], &[f64])],
) -> (Vec<Vec<f64>>, f64) {
    if layout.mean_field {
        let xs = pairs.iter().map(|&p| pair_input(sl, al, own, p)).collect::<Vec<_>>();
        let w = 1.0 / xs.len() as f64;
        (xs, w)
    } else {
        let mut x = [sl, al].concat();
        if let Some((s, a)) = own {
            x.extend_from_slice(s);
            x.extend_from_slice(a);
        }
        for (s, a) in pairs {
            x.extend_from_slice(s);
            x.extend_from_slice(a);
        }
        (vec![x], 1.0)
    }
}

/// `(input index, action offset)` of pair `p` inside the inputs built by
/// `critic_inputs`.
fn pair_action_slot(layout: CriticLayout, has_own: bool, p: usize) -> (usize, usize) {
    let base = LEADER_OBS_DIM + GOV_ACTION_DIM + if has_own { PAIR_DIM } else { 0 } + FOLLOWER_OBS_DIM;
    if layout.mean_field {
        (p, base)
    } else {
        (0, base + p * PAIR_DIM)
    }
}

fn critic_value(critic: &NetworkParams, xs: &[Vec<f64>], w: f64) -> Result<f64> {
    let mut q = 0.0;
    for x in xs {
        q += critic.forward(x)?[0];
    }
    Ok(w * q)
}

fn check_batch(batch: &[&Transition]) -> Result<()> {
    if batch.is_empty() {
        return Err(contract("update needs a non-empty batch"));
    }
    batch.iter().try_for_each(|t| t.validate())
}

/// Regresses every critic term onto its target; returns the mean loss.
fn critic_regression(
    side: &mut AgentSide,
    items: impl Iterator<Item = (Vec<Vec<f64>>, f64)>,
    lr: f64,
) -> Result<f64> {
    let mut grads = vec![0.0; side.critic.len()];
    let (mut loss, mut count) = (0.0, 0usize);
    for (xs, y) in items {
        for x in &xs {
            let tape = side.critic.forward_tape(x)?;
            let d = tape.output()[0] - y;
            loss += d * d;
            count += 1;
            side.critic.backward(&tape, &[2.0 * d], &mut grads)?;
        }
    }
    let scale = 1.0 / count.max(1) as f64;
    grads.iter_mut().for_each(|g| *g *= scale);
    side.step_critic(&grads, lr)?;
    Ok(loss * scale)
}

struct FollowerSample<'t> {
    tr: &'t Transition,
    i: usize,
    opp: Vec<usize>,
    y: f64,
}

/// Gradient of minus the mean critic value of the actor's own actions, and
/// that mean value.
fn follower_actor_grads(
    actor: &NetworkParams,
    critic: &NetworkParams,
    layout: CriticLayout,
    samples: &[FollowerSample],
) -> Result<(Vec<f64>, f64)> {
    let mut grads = vec![0.0; actor.len()];
    let mut objective = 0.0;
    let inv = 1.0 / samples.len() as f64;
    for s in samples {
        let tape = actor.forward_tape(&follower_actor_input(s.tr.obs(s.i), &s.tr.leader_action))?;
        let pairs: Vec<(&[f64], &[f64])> = s.opp.iter().map(|&j| (s.tr.obs(j), s.tr.action(j))).collect();
        let own = Some((s.tr.obs(s.i), tape.output()));
        let (xs, w) = critic_inputs(layout, &s.tr.leader_obs, &s.tr.leader_action, own, &pairs);
        let mut dq = [0.0; HOUSEHOLD_ACTION_DIM];
        for x in &xs {
            let ct = critic.forward_tape(x)?;
            objective += w * ct.output()[0];
            let gin = critic.input_gradient(&ct, &[w])?;
            for (d, g) in dq.iter_mut().zip(&gin[OWN_ACTION_SLOT..]) {
                *d += g;
            }
        }
        let upstream: Vec<f64> = dq.iter().map(|d| -d * inv).collect();
        actor.backward(&tape, &upstream, &mut grads)?;
    }
    Ok((grads, objective * inv))
}

/// Follower critic regression and actor ascent on one batch. The leader
/// actor is read only.
#[allow(clippy::too_many_arguments)]
pub fn follower_update<R: Rng + ?Sized>(
    follower: &mut AgentSide,
    leader_actor: &NetworkParams,
    layout: CriticLayout,
    batch: &[&Transition],
    cfg: &TrainConfig,
    lr: LearningRates,
    scope: UpdateScope<'_>,
    rng: &mut R,
) -> Result<LossReport> {
    check_batch(batch)?;
    let mut samples = Vec::new();
    for &tr in batch {
        let n = tr.n();
        let own = match scope.deviator {
            Some(d) if d < n => vec![d],
            Some(d) => return Err(contract(format!("deviator {d} outside population of {n}"))),
            None => sample_indices(n, cfg.follower_samples, None, rng),
        };
        let next_al = if tr.done { None } else { Some(leader_actor.forward(&tr.next_leader_obs)?) };
        for i in own {
            let opp = if layout.mean_field {
                sample_indices(n, cfg.opponent_samples, Some(i), rng)
            } else {
                concat_selection(|k| tr.obs(k), n, layout.concat_pairs)
            };
            let mut y = cfg.clip_reward(tr.follower_rewards[i]);
            if let Some(al2) = &next_al {
                let own_next = follower.actor_target.forward(&follower_actor_input(tr.next_obs(i), al2))?;
                let opp_actor = scope.opponent_actor.unwrap_or(&follower.actor_target);
                let next_opp = if layout.mean_field {
                    opp.clone()
                } else {
                    concat_selection(|k| tr.next_obs(k), n, layout.concat_pairs)
                };
                let acts = next_opp
                    .iter()
                    .map(|&j| opp_actor.forward(&follower_actor_input(tr.next_obs(j), al2)))
                    .collect::<Result<Vec<_>>>()?;
                let pairs: Vec<(&[f64], &[f64])> =
                    next_opp.iter().zip(&acts).map(|(&j, a)| (tr.next_obs(j), a.as_slice())).collect();
                let (xs, w) = critic_inputs(layout, &tr.next_leader_obs, al2, Some((tr.next_obs(i), &own_next)), &pairs);
                y += cfg.gamma * critic_value(&follower.critic_target, &xs, w)?;
            }
            samples.push(FollowerSample { tr, i, opp, y });
        }
    }

    let stored = |s: &FollowerSample| -> (Vec<Vec<f64>>, f64) {
        let pairs: Vec<(&[f64], &[f64])> = s.opp.iter().map(|&j| (s.tr.obs(j), s.tr.action(j))).collect();
        let own = Some((s.tr.obs(s.i), s.tr.action(s.i)));
        (critic_inputs(layout, &s.tr.leader_obs, &s.tr.leader_action, own, &pairs).0, s.y)
    };
    let critic_loss = critic_regression(follower, samples.iter().map(stored), lr.critic)?;

    let (grads, objective) = follower_actor_grads(&follower.actor, &follower.critic, layout, &samples)?;
    follower.step_actor(&grads, lr.actor)?;
    Ok(LossReport { critic_loss, actor_objective: objective })
}

struct LeaderSample<'t> {
    tr: &'t Transition,
    pairs: Vec<usize>,
    y: f64,
}

/// Leader counterpart of `follower_actor_grads`.
fn leader_actor_grads(
    actor: &NetworkParams,
    critic: &NetworkParams,
    follower_actor: &NetworkParams,
    layout: CriticLayout,
    regenerate: bool,
    samples: &[LeaderSample],
) -> Result<(Vec<f64>, f64)> {
    let mut grads = vec![0.0; actor.len()];
    let mut objective = 0.0;
    let inv = 1.0 / samples.len() as f64;
    for s in samples {
        let tape = actor.forward_tape(&s.tr.leader_obs)?;
        let al = tape.output().to_vec();
        let tapes: Vec<Tape> = if regenerate {
            s.pairs
                .iter()
                .map(|&k| follower_actor.forward_tape(&follower_actor_input(s.tr.obs(k), &al)))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let p: Vec<(&[f64], &[f64])> = s
            .pairs
            .iter()
            .enumerate()
            .map(|(idx, &k)| (s.tr.obs(k), if regenerate { tapes[idx].output() } else { s.tr.action(k) }))
            .collect();
        let (xs, w) = critic_inputs(layout, &s.tr.leader_obs, &al, None, &p);
        let mut dq = [0.0; GOV_ACTION_DIM];
        let mut gins = Vec::with_capacity(xs.len());
        for x in &xs {
            let ct = critic.forward_tape(x)?;
            objective += w * ct.output()[0];
            let gin = critic.input_gradient(&ct, &[w])?;
            for (d, g) in dq.iter_mut().zip(&gin[LEADER_ACTION_SLOT..]) {
                *d += g;
            }
            gins.push(gin);
        }
        if regenerate {
            for (idx, ft) in tapes.iter().enumerate() {
                let (xi, off) = pair_action_slot(layout, false, idx);
                let fin = follower_actor.input_gradient(ft, &gins[xi][off..off + HOUSEHOLD_ACTION_DIM])?;
                for (d, g) in dq.iter_mut().zip(&fin[FOLLOWER_OBS_DIM..]) {
                    *d += g;
                }
            }
        }
        let upstream: Vec<f64> = dq.iter().map(|d| -d * inv).collect();
        actor.backward(&tape, &upstream, &mut grads)?;
    }
    Ok((grads, objective * inv))
}

/// Leader critic regression and actor ascent on one batch. The follower
/// actor is read only. With `regenerate` the followers' actions are
/// recomputed under the candidate leader action and the actor gradient
/// includes their response; otherwise the stored actions are used.
#[allow(clippy::too_many_arguments)]
pub fn leader_update<R: Rng + ?Sized>(
    leader: &mut AgentSide,
    follower_actor: &NetworkParams,
    layout: CriticLayout,
    regenerate: bool,
    batch: &[&Transition],
    cfg: &TrainConfig,
    lr: LearningRates,
    rng: &mut R,
) -> Result<LossReport> {
    check_batch(batch)?;
    let mut samples = Vec::with_capacity(batch.len());
    for &tr in batch {
        let n = tr.n();
        let pairs = if layout.mean_field {
            sample_indices(n, cfg.leader_pairs, None, rng)
        } else {
            concat_selection(|k| tr.obs(k), n, layout.concat_pairs)
        };
        let mut y = cfg.clip_reward(tr.leader_reward);
        if !tr.done {
            let al2 = leader.actor_target.forward(&tr.next_leader_obs)?;
            let next = if layout.mean_field {
                pairs.clone()
            } else {
                concat_selection(|k| tr.next_obs(k), n, layout.concat_pairs)
            };
            let acts = next
                .iter()
                .map(|&k| follower_actor.forward(&follower_actor_input(tr.next_obs(k), &al2)))
                .collect::<Result<Vec<_>>>()?;
            let np: Vec<(&[f64], &[f64])> = next.iter().zip(&acts).map(|(&k, a)| (tr.next_obs(k), a.as_slice())).collect();
            let (xs, w) = critic_inputs(layout, &tr.next_leader_obs, &al2, None, &np);
            y += cfg.gamma * critic_value(&leader.critic_target, &xs, w)?;
        }
        samples.push(LeaderSample { tr, pairs, y });
    }

    let stored = |s: &LeaderSample| -> (Vec<Vec<f64>>, f64) {
        let p: Vec<(&[f64], &[f64])> = s.pairs.iter().map(|&k| (s.tr.obs(k), s.tr.action(k))).collect();
        (critic_inputs(layout, &s.tr.leader_obs, &s.tr.leader_action, None, &p).0, s.y)
    };
    let critic_loss = critic_regression(leader, samples.iter().map(stored), lr.critic)?;

    let (grads, objective) = leader_actor_grads(&leader.actor, &leader.critic, follower_actor, layout, regenerate, &samples)?;
    leader.step_actor(&grads, lr.actor)?;
    Ok(LossReport { critic_loss, actor_objective: objective })
}

/// Follower step with the leader frozen.
pub fn update_followers<R: Rng + ?Sized>(
    nets: &mut AgentNets,
    batch: &[&Transition],
    cfg: &TrainConfig,
    lr: LearningRates,
    rng: &mut R,
) -> Result<LossReport> {
    let AgentNets { leader, follower, layout } = nets;
    follower_update(follower, &leader.actor, *layout, batch, cfg, lr, UpdateScope::default(), rng)
}

/// Leader step with the followers frozen. Follower pairs are regenerated
/// when the leader-follower ordering is enabled.
pub fn update_leader<R: Rng + ?Sized>(
    nets: &mut AgentNets,
    batch: &[&Transition],
    cfg: &TrainConfig,
    lr: LearningRates,
    rng: &mut R,
) -> Result<LossReport> {
    let AgentNets { leader, follower, layout } = nets;
    leader_update(leader, &follower.actor, *layout, cfg.use_leader_follower_update, batch, cfg, lr, rng)
}
