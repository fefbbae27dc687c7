//! Experiment orchestration behind the `smfg` binary.
//!
//! Every command writes into one output directory: `metrics.csv`, a
//! `manifest.txt` holding the resolved configuration (loadable again with
//! `--config`), and command-specific artifacts.

mod config;
mod metrics;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use config::{
    parse_experiment, Algo, BcSection, Command, EvalSection, ExperimentConfig, MixSection, Overrides, Profile,
    RunConfig, RunSection, ShockSection, SweepSection, UsFederalSection,
};
pub use metrics::{emit_csv, fmt_f64, read_metrics_csv, write_table, MetricsRow, MetricsWriter, METRICS_HEADER};

use crate::baselines::{
    bc_spec, bc_train_with, bracket_gov, free_market_gov, load_schedule, synth_bc_dataset, us_federal_2022,
    BcHouseholds, BcOptions, RuleOfThumbHouseholds, SaezGov,
};
use crate::econ::init_economy;
use crate::error::{config, Error, Result};
use crate::mfg::{exploitability, run_episode, EpisodeLog, EpisodeOptions, GovPolicy, HouseholdPolicy, MixedHouseholds, RandomGov, Shock};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::NetworkParams;
use crate::seed::{derive_seed, BASELINE, EVAL_EPISODES};
use crate::smfrl::{AgentNets, SmfrlGov, SmfrlHouseholds, Trainer};
use crate::stats::mean;

pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRACE_FILE: &str = "trace.csv";
pub const RECOVERY_FILE: &str = "recovery.csv";
pub const GROUPS_FILE: &str = "groups.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const DATASET_FILE: &str = "dataset.csv";
pub const BC_LOSS_FILE: &str = "bc_loss.csv";
/// Network name of the cloned household policy inside a checkpoint.
pub const BC_NET: &str = "bc_policy";
/// Fraction of the pre-shock mean wealth that counts as recovered.
pub const RECOVERY_TOLERANCE: f64 = 0.05;

pub const TRACE_HEADER: [&str; 15] = [
    "episode",
    "t",
    "shock",
    "gdp_per_capita",
    "wealth_gini",
    "income_gini",
    "mean_wealth",
    "mean_wealth_after",
    "mean_income",
    "mean_consumption",
    "welfare",
    "leader_reward",
    "income_tax_rate",
    "wealth_tax_rate",
    "spend_ratio",
];

pub const GROUPS_HEADER: [&str; 12] = [
    "mix_ratio",
    "smfg_households",
    "bc_households",
    "smfg_utility",
    "smfg_wealth",
    "smfg_income",
    "bc_utility",
    "bc_wealth",
    "bc_income",
    "per_capita_gdp",
    "social_welfare",
    "leader_payoff",
];

/// Where a finished command left its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub metrics: Vec<MetricsRow>,
}

fn run_id(exp: &ExperimentConfig) -> String {
    format!("{}-s{}", exp.run.algo, exp.run.seed)
}

/// Seeds of the evaluation episodes; shared by every algorithm so tables
/// compare policies on identical initial economies.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    (0..episodes as u64).map(|k| derive_seed(seed, EVAL_EPISODES, k)).collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `manifest.txt`: a `[manifest]` table naming the command and the
/// SHA-256 of each artifact already present, followed by the resolved
/// configuration.
pub fn write_manifest(rc: &RunConfig, artifacts: &[&str]) -> Result<()> {
    let mut text = format!("[manifest]\ncommand = \"{}\"\n", rc.command.name());
    for name in artifacts {
        let p = rc.out_dir.join(name);
        if p.exists() {
            text.push_str(&format!("\"sha256:{name}\" = \"{}\"\n", sha256_hex(&p)?));
        }
    }
    text.push('\n');
    text.push_str(&rc.experiment.to_toml()?);
    let path = rc.out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn run(rc: &RunConfig) -> Result<RunOutcome> {
    create_dir(&rc.out_dir)?;
    write_manifest(rc, &[])?;
    let (metrics, artifacts): (Vec<MetricsRow>, Vec<&str>) = match rc.command {
        Command::Train => (run_train(rc)?, vec![METRICS_FILE, CHECKPOINT_FILE, DATASET_FILE, BC_LOSS_FILE]),
        Command::Evaluate => (run_eval(rc)?, vec![METRICS_FILE]),
        Command::Shock => (run_shock(rc)?, vec![METRICS_FILE, TRACE_FILE, RECOVERY_FILE]),
        Command::Mix => (run_mix(rc)?, vec![METRICS_FILE, GROUPS_FILE]),
        Command::Sweep => (run_sweep(rc)?, vec![SUMMARY_FILE]),
    };
    write_manifest(rc, &artifacts)?;
    Ok(RunOutcome { out_dir: rc.out_dir.clone(), metrics })
}

fn episode_opts(exp: &ExperimentConfig, seed: u64, shock: Option<Shock>) -> EpisodeOptions {
    EpisodeOptions { seed, gamma: exp.train.gamma, shock }
}

fn smfrl_nets(exp: &ExperimentConfig, path: &Path) -> Result<AgentNets> {
    AgentNets::read_from(&Checkpoint::read(path)?, &exp.train.hidden)
}

fn bc_net(exp: &ExperimentConfig, path: &Path) -> Result<NetworkParams> {
    Checkpoint::read(path)?.network_checked(BC_NET, &bc_spec(exp.bc.loss, &exp.bc.hidden))
}

fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.clone().ok_or_else(|| config(format!("{what} requires a checkpoint")))
}

/// Household networks for a fixed government: a cloned policy, the
/// follower actor of a trained checkpoint, or none.
enum Households {
    Smfrl(Box<AgentNets>),
    Bc(NetworkParams),
    RuleOfThumb,
}

fn households_from(exp: &ExperimentConfig, path: Option<&Path>) -> Result<Households> {
    let Some(path) = path else { return Ok(Households::RuleOfThumb) };
    let ckpt = Checkpoint::read(path)?;
    if ckpt.network(BC_NET).is_ok() {
        Ok(Households::Bc(ckpt.network_checked(BC_NET, &bc_spec(exp.bc.loss, &exp.bc.hidden))?))
    } else {
        Ok(Households::Smfrl(Box::new(AgentNets::read_from(&ckpt, &exp.train.hidden)?)))
    }
}

/// Runs `f` with the government and household policies selected by the
/// configured algorithm.
fn with_policies<T>(
    exp: &ExperimentConfig,
    f: impl FnOnce(&mut dyn GovPolicy, &dyn HouseholdPolicy, Option<&AgentNets>) -> Result<T>,
) -> Result<T> {
    let algo = exp.run.algo;
    if algo.variant().is_some() {
        let nets = smfrl_nets(exp, &require(&exp.run.checkpoint, algo.name())?)?;
        return f(&mut SmfrlGov(&nets.leader.actor), &SmfrlHouseholds(&nets.follower.actor), Some(&nets));
    }
    if algo == Algo::BcHouseholds {
        let net = bc_net(exp, &require(&exp.run.checkpoint, algo.name())?)?;
        return f(&mut RandomGov::new(derive_seed(exp.run.seed, BASELINE, 1)), &BcHouseholds(&net), None);
    }
    let mut gov: Box<dyn GovPolicy> = match algo {
        Algo::FreeMarket => Box::new(free_market_gov()),
        Algo::Saez => Box::new(SaezGov::new(exp.saez.clone())),
        Algo::UsFederal => {
            let file = match &exp.us_federal.schedule {
                Some(p) => load_schedule(p)?,
                None => us_federal_2022(),
            };
            Box::new(bracket_gov(&file, exp.us_federal.spend_ratio)?)
        }
        _ => unreachable!("learned algorithms handled above"),
    };
    match households_from(exp, exp.run.checkpoint.as_deref())? {
        Households::Smfrl(nets) => f(gov.as_mut(), &SmfrlHouseholds(&nets.follower.actor), None),
        Households::Bc(net) => f(gov.as_mut(), &BcHouseholds(&net), None),
        Households::RuleOfThumb => f(gov.as_mut(), &RuleOfThumbHouseholds(exp.bc.behavior), None),
    }
}

fn exploitability_of(exp: &ExperimentConfig, nets: &AgentNets) -> Result<Option<f64>> {
    if exp.eval.exploit_budget == 0 {
        return Ok(None);
    }
    let seeds = eval_seeds(exp.run.seed, exp.eval.exploit_episodes.max(1));
    Ok(Some(exploitability(&exp.econ, nets, &exp.train, &exp.best_response(), &seeds)?.total))
}

/// Noise-free episodes of `nets` on the shared evaluation seeds, averaged.
pub fn evaluate_nets(exp: &ExperimentConfig, nets: &AgentNets, epoch: impl ToString) -> Result<MetricsRow> {
    let id = run_id(exp);
    let mut rows = Vec::with_capacity(exp.eval.episodes);
    for (k, &s) in eval_seeds(exp.run.seed, exp.eval.episodes).iter().enumerate() {
        let log = run_episode(&exp.econ, &mut SmfrlGov(&nets.leader.actor), &SmfrlHouseholds(&nets.follower.actor), &episode_opts(exp, s, None))?;
        rows.push(MetricsRow::from_summary(&id, exp.run.seed, k, &log.summary()));
    }
    let mut row = MetricsRow::mean_of(&rows, &id, exp.run.seed, &epoch.to_string())?;
    row.exploitability = exploitability_of(exp, nets)?;
    Ok(row)
}

pub fn run_train(rc: &RunConfig) -> Result<Vec<MetricsRow>> {
    let exp = &rc.experiment;
    let dir = &rc.out_dir;
    let algo = exp.run.algo;
    if algo == Algo::BcHouseholds {
        return train_bc(rc);
    }
    if algo.variant().is_none() {
        return Err(config(format!("{algo} is a fixed policy and has nothing to train; use evaluate")));
    }
    let mut writer = MetricsWriter::create(&dir.join(METRICS_FILE))?;
    let mut trainer = Trainer::new(&exp.econ, &exp.train, exp.run.seed)?;
    let mut rows = Vec::new();
    for e in 0..exp.train.epochs {
        let stats = trainer.run_epoch()?;
        log::debug!("epoch {} leader reward {:.4e} critic losses {:.3e}/{:.3e}", e + 1, stats.mean_leader_reward, stats.leader.critic_loss, stats.follower.critic_loss);
        let done = e + 1;
        if done % exp.eval.every == 0 || done == exp.train.epochs {
            let row = evaluate_nets(exp, trainer.nets(), done)?;
            log::info!("epoch {done}: leader payoff {:.4} welfare {:.4}", row.leader_payoff, row.social_welfare);
            writer.push(&row)?;
            rows.push(row);
        }
    }
    let mut ckpt = Checkpoint::new();
    ckpt.set_meta("algo", algo)?;
    ckpt.set_meta("seed", exp.run.seed)?;
    ckpt.set_meta("epochs", exp.train.epochs)?;
    trainer.nets().write_to(&mut ckpt)?;
    ckpt.write(&dir.join(CHECKPOINT_FILE))?;
    Ok(rows)
}

fn train_bc(rc: &RunConfig) -> Result<Vec<MetricsRow>> {
    let exp = &rc.experiment;
    let dir = &rc.out_dir;
    let mut writer = MetricsWriter::create(&dir.join(METRICS_FILE))?;
    let data = synth_bc_dataset(&exp.econ, &exp.bc.behavior, exp.bc.dataset_size, exp.run.seed)?;
    data.write_csv(&dir.join(DATASET_FILE))?;
    let opts = BcOptions { batch_size: exp.bc.batch_size, lr: exp.bc.lr };
    let out = bc_train_with(&data, &bc_spec(exp.bc.loss, &exp.bc.hidden), exp.bc.loss, exp.bc.epochs, exp.run.seed, &opts)?;
    log::info!("behaviour cloning: {} steps, final loss {:.4e}", out.steps, out.final_loss);
    let loss_rows: Vec<Vec<String>> = out.epoch_medians.iter().enumerate().map(|(e, l)| vec![(e + 1).to_string(), fmt_f64(*l)]).collect();
    write_table(&dir.join(BC_LOSS_FILE), &["epoch", "median_loss"], &loss_rows)?;
    let mut ckpt = Checkpoint::new();
    ckpt.set_meta("algo", Algo::BcHouseholds)?;
    ckpt.set_meta("seed", exp.run.seed)?;
    ckpt.add_network(BC_NET, &out.params)?;
    ckpt.write(&dir.join(CHECKPOINT_FILE))?;

    let id = run_id(exp);
    let mut rows = Vec::new();
    let mut gov = RandomGov::new(derive_seed(exp.run.seed, BASELINE, 1));
    for (k, &s) in eval_seeds(exp.run.seed, exp.eval.episodes).iter().enumerate() {
        let log = run_episode(&exp.econ, &mut gov, &BcHouseholds(&out.params), &episode_opts(exp, s, None))?;
        rows.push(MetricsRow::from_summary(&id, exp.run.seed, k, &log.summary()));
    }
    if rows.is_empty() {
        return Ok(rows);
    }
    let row = MetricsRow::mean_of(&rows, &id, exp.run.seed, &exp.bc.epochs.to_string())?;
    writer.push(&row)?;
    Ok(vec![row])
}

/// Per-episode rows followed by their mean; exploitability of a trained
/// profile is attached to the mean row.
fn eval_table(rc: &RunConfig, shock: Option<Shock>) -> Result<(Vec<MetricsRow>, Vec<EpisodeLog>)> {
    let exp = &rc.experiment;
    let id = run_id(exp);
    let mut writer = MetricsWriter::create(&rc.out_dir.join(METRICS_FILE))?;
    with_policies(exp, |gov, households, nets| {
        let mut rows = Vec::new();
        let mut logs = Vec::new();
        for (k, &s) in eval_seeds(exp.run.seed, exp.eval.episodes).iter().enumerate() {
            let log = run_episode(&exp.econ, gov, households, &episode_opts(exp, s, shock))?;
            let row = MetricsRow::from_summary(&id, exp.run.seed, k, &log.summary());
            writer.push(&row)?;
            rows.push(row);
            logs.push(log);
        }
        if !rows.is_empty() {
            let mut m = MetricsRow::mean_of(&rows, &id, exp.run.seed, "mean")?;
            if let Some(nets) = nets {
                m.exploitability = exploitability_of(exp, nets)?;
            }
            writer.push(&m)?;
            rows.push(m);
        }
        Ok((rows, logs))
    })
}

pub fn run_eval(rc: &RunConfig) -> Result<Vec<MetricsRow>> {
    Ok(eval_table(rc, None)?.0)
}

/// Steps after the shock until mean wealth is back within the tolerance of
/// its pre-shock value; `None` when it never recovers within the episode.
pub fn recovery_steps(log: &EpisodeLog, pre_shock: f64, step: usize) -> Option<usize> {
    let target = (1.0 - RECOVERY_TOLERANCE) * pre_shock;
    log.trace.iter().skip(step).position(|r| r.mean_wealth_after >= target).map(|k| k + 1)
}

pub fn run_shock(rc: &RunConfig) -> Result<Vec<MetricsRow>> {
    let exp = &rc.experiment;
    if exp.shock.step >= exp.econ.horizon {
        return Err(config(format!("shock step {} must be below the horizon {}", exp.shock.step, exp.econ.horizon)));
    }
    let shock = Shock { step: exp.shock.step, factor: exp.shock.factor };
    let (rows, logs) = eval_table(rc, Some(shock))?;
    let seeds = eval_seeds(exp.run.seed, exp.eval.episodes);
    let mut trace = Vec::new();
    let mut recovery = Vec::new();
    for (k, (log, &s)) in logs.iter().zip(&seeds).enumerate() {
        for r in &log.trace {
            trace.push(vec![
                k.to_string(),
                r.t.to_string(),
                r.shock.to_string(),
                fmt_f64(r.gdp_per_capita),
                fmt_f64(r.wealth_gini),
                fmt_f64(r.income_gini),
                fmt_f64(r.mean_wealth),
                fmt_f64(r.mean_wealth_after),
                fmt_f64(r.mean_income),
                fmt_f64(r.mean_consumption),
                fmt_f64(r.welfare),
                fmt_f64(r.leader_reward),
                fmt_f64(r.income_tax_rate),
                fmt_f64(r.wealth_tax_rate),
                fmt_f64(r.spend_ratio),
            ]);
        }
        let pre = match shock.step {
            0 => Some(init_economy(&exp.econ, s)?.mean_wealth()),
            st => log.trace.get(st - 1).map(|r| r.mean_wealth_after),
        };
        let steps = pre.filter(|_| log.trace.len() > shock.step).and_then(|p| recovery_steps(log, p, shock.step));
        recovery.push(vec![
            k.to_string(),
            pre.map(fmt_f64).unwrap_or_default(),
            steps.map_or_else(|| "inf".to_string(), |v| v.to_string()),
        ]);
    }
    write_table(&rc.out_dir.join(TRACE_FILE), &TRACE_HEADER, &trace)?;
    write_table(&rc.out_dir.join(RECOVERY_FILE), &["episode", "pre_shock_mean_wealth", "recovery_steps"], &recovery)?;
    Ok(rows)
}

/// Households given the learned policy when a fraction `ratio` of `n`
/// follows it; they take the lowest indices.
pub fn mix_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn group_means(logs: &[EpisodeLog], members: std::ops::Range<usize>) -> [Option<f64>; 3] {
    if members.is_empty() {
        return [None; 3];
    }
    let per_episode = |f: &dyn Fn(&EpisodeLog, usize) -> f64| {
        mean(&logs.iter().map(|l| mean(&members.clone().map(|i| f(l, i)).collect::<Vec<_>>())).collect::<Vec<_>>())
    };
    [
        Some(per_episode(&|l, i| l.household_welfare(i))),
        Some(per_episode(&|l, i| l.final_wealth[i])),
        Some(per_episode(&|l, i| mean(&l.follower_incomes[i]))),
    ]
}

pub fn run_mix(rc: &RunConfig) -> Result<Vec<MetricsRow>> {
    let exp = &rc.experiment;
    let nets = smfrl_nets(exp, &require(&exp.run.checkpoint, "mix")?)?;
    let bc = bc_net(exp, &exp.run.bc_checkpoint.clone().ok_or_else(|| config("mix requires a bc_checkpoint"))?)?;
    let n = exp.econ.households;
    let id = run_id(exp);
    let smfg = SmfrlHouseholds(&nets.follower.actor);
    let cloned = BcHouseholds(&bc);
    let seeds = eval_seeds(exp.run.seed, exp.eval.episodes);
    let mut writer = MetricsWriter::create(&rc.out_dir.join(METRICS_FILE))?;
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for &ratio in &exp.mix.ratios {
        let k = mix_count(ratio, n);
        let households = MixedHouseholds::split(n, k, &smfg, &cloned);
        let mut logs = Vec::new();
        let mut ep_rows = Vec::new();
        for (e, &s) in seeds.iter().enumerate() {
            let log = run_episode(&exp.econ, &mut SmfrlGov(&nets.leader.actor), &households, &episode_opts(exp, s, None))?;
            ep_rows.push(MetricsRow::from_summary(&id, exp.run.seed, e, &log.summary()));
            logs.push(log);
        }
        if logs.is_empty() {
            continue;
        }
        let label = format!("mix-{ratio}");
        let m = MetricsRow::mean_of(&ep_rows, &format!("{id}-{label}"), exp.run.seed, "mean")?;
        writer.push(&m)?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let [su, sw, si] = group_means(&logs, 0..k);
        let [bu, bw, bi] = group_means(&logs, k..n);
        groups.push(vec![
            fmt_f64(ratio),
            k.to_string(),
            (n - k).to_string(),
            opt(su),
            opt(sw),
            opt(si),
            opt(bu),
            opt(bw),
            opt(bi),
            fmt_f64(m.per_capita_gdp),
            fmt_f64(m.social_welfare),
            fmt_f64(m.leader_payoff),
        ]);
        rows.push(m);
    }
    write_table(&rc.out_dir.join(GROUPS_FILE), &GROUPS_HEADER, &groups)?;
    Ok(rows)
}

/// Trains (or, for fixed governments, evaluates) every configured
/// algorithm and seed in its own sub-directory and collects each run's
/// final row into `summary.csv`.
pub fn run_sweep(rc: &RunConfig) -> Result<Vec<MetricsRow>> {
    let exp = &rc.experiment;
    let mut writer = MetricsWriter::create(&rc.out_dir.join(SUMMARY_FILE))?;
    let mut summary = Vec::new();
    for &algo in &exp.sweep.algos {
        for &seed in &exp.sweep.seeds {
            let mut sub = exp.clone();
            sub.run.algo = algo;
            sub.run.seed = seed;
            if let Some(v) = algo.variant() {
                sub.train = v.apply(&sub.train);
            }
            let command = if algo.variant().is_some() || algo == Algo::BcHouseholds { Command::Train } else { Command::Evaluate };
            let sub_rc = RunConfig {
                command,
                config_path: None,
                out_dir: rc.out_dir.join(format!("{algo}-s{seed}")),
                experiment: sub,
            };
            log::info!("sweep: {} {algo} seed {seed}", command.name());
            let out = run(&sub_rc)?;
            if let Some(last) = out.metrics.last() {
                writer.push(last)?;
                summary.push(last.clone());
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_counts_round_up() {
        assert_eq!(mix_count(0.5, 10), 5);
        assert_eq!(mix_count(0.25, 10), 3);
        assert_eq!(mix_count(0.0, 10), 0);
        assert_eq!(mix_count(1.0, 10), 10);
        assert_eq!(mix_count(0.3, 10), 3);
    }
}
