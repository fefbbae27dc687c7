use std::path::{Path, PathBuf};

use smfg_core::runner::{
    parse_experiment, read_metrics_csv, run, Algo, Command, ExperimentConfig, MetricsRow, Overrides, RunConfig,
    CHECKPOINT_FILE, GROUPS_FILE, MANIFEST_FILE, METRICS_FILE, RECOVERY_FILE, TRACE_FILE,
};

fn toy() -> ExperimentConfig {
    let mut e = ExperimentConfig::default();
    e.econ.households = 4;
    e.econ.horizon = 12;
    e.train.epochs = 3;
    e.train.epoch_length = 12;
    e.train.batch = 4;
    e.train.update_cycles = 2;
    e.train.warmup_batches = 1;
    e.train.actor_delay_epochs = 1;
    e.train.hidden = vec![8];
    e.eval.episodes = 3;
    e.eval.every = 1;
    e.shock.step = 4;
    e.bc.dataset_size = 40;
    e.bc.epochs = 2;
    e.bc.hidden = vec![8];
    e
}

fn rc(command: Command, dir: &Path, exp: &ExperimentConfig) -> RunConfig {
    RunConfig { command, config_path: None, out_dir: dir.to_path_buf(), experiment: exp.clone() }
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(p).unwrap()
}

/// Trains toy SMFG and BC checkpoints under `root`.
fn checkpoints(root: &Path) -> (PathBuf, PathBuf) {
    let exp = toy();
    run(&rc(Command::Train, &root.join("smfg"), &exp)).unwrap();
    let mut bc = toy();
    bc.run.algo = Algo::BcHouseholds;
    run(&rc(Command::Train, &root.join("bc"), &bc)).unwrap();
    (root.join("smfg").join(CHECKPOINT_FILE), root.join("bc").join(CHECKPOINT_FILE))
}

#[test]
fn metrics_schema_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = toy();
    exp.train.epochs = 0;
    run(&rc(Command::Train, dir.path(), &exp)).unwrap();
    let golden = "run_id,seed,epoch,steps_survived,per_capita_gdp,social_welfare,income_gini,wealth_gini,\
                  mean_wealth,mean_income,mean_consumption,leader_payoff,exploitability\n";
    assert_eq!(read(dir.path().join(METRICS_FILE)), golden);
    assert!(dir.path().join(MANIFEST_FILE).exists());
    assert!(read(dir.path().join(MANIFEST_FILE)).contains("command = \"train\""));
}

#[test]
fn training_csv_is_deterministic_and_manifest_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    let exp = toy();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&rc(Command::Train, &a, &exp)).unwrap();
    run(&rc(Command::Train, &b, &exp)).unwrap();
    assert_eq!(read(a.join(METRICS_FILE)), read(b.join(METRICS_FILE)));
    let rows = read_metrics_csv(&a.join(METRICS_FILE)).unwrap();
    assert_eq!(rows.iter().map(|r| r.epoch.as_str()).collect::<Vec<_>>(), ["1", "2", "3"]);

    let c = dir.path().join("c");
    let again = RunConfig::resolve(Command::Train, Some(&a.join(MANIFEST_FILE)), &c, &Overrides::default()).unwrap();
    assert_eq!(again.experiment, exp);
    run(&again).unwrap();
    assert_eq!(read(a.join(METRICS_FILE)), read(c.join(METRICS_FILE)));
}

#[test]
fn ablation_algo_routes_flags() {
    let o = Overrides { algo: Some(Algo::SmfgSMf), ..Overrides::default() };
    let r = RunConfig::resolve(Command::Train, None, Path::new("unused"), &o).unwrap();
    assert!(!r.experiment.train.use_leader_follower_update && !r.experiment.train.use_mean_field);
    let o = Overrides { algo: Some(Algo::SmfgMf), ..Overrides::default() };
    let r = RunConfig::resolve(Command::Train, None, Path::new("unused"), &o).unwrap();
    assert!(r.experiment.train.use_leader_follower_update && !r.experiment.train.use_mean_field);
}

#[test]
fn overrides_beat_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[run]\nseed = 4\n[econ]\nhouseholds = 7\n[eval]\nepisodes = 2\n").unwrap();
    let o = Overrides { seed: Some(9), eval_episodes: Some(5), ..Overrides::default() };
    let r = RunConfig::resolve(Command::Evaluate, Some(&path), dir.path(), &o).unwrap();
    assert_eq!((r.experiment.run.seed, r.experiment.econ.households, r.experiment.eval.episodes), (9, 7, 5));
    assert!(parse_experiment("[train]\nepochs = -1\n", None).is_err());
}

#[test]
fn fixed_governments_cannot_train() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = toy();
    exp.run.algo = Algo::Saez;
    assert!(run(&rc(Command::Train, dir.path(), &exp)).is_err());
}

#[test]
fn evaluation_table_has_episode_rows_and_their_mean() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = toy();
    exp.econ.households = 10;
    exp.eval.episodes = 4;
    exp.run.algo = Algo::FreeMarket;
    run(&rc(Command::Evaluate, dir.path(), &exp)).unwrap();
    let rows = read_metrics_csv(&dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(rows.len(), 5);
    let m = rows.last().unwrap();
    assert_eq!(m.epoch, "mean");
    let col = |f: fn(&MetricsRow) -> f64| rows[..4].iter().map(f).sum::<f64>() / 4.0;
    let cols: [(f64, f64); 5] = [
        (m.per_capita_gdp, col(|r| r.per_capita_gdp)),
        (m.social_welfare, col(|r| r.social_welfare)),
        (m.wealth_gini, col(|r| r.wealth_gini)),
        (m.mean_consumption, col(|r| r.mean_consumption)),
        (m.leader_payoff, col(|r| r.leader_payoff)),
    ];
    for (got, want) in cols {
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.income_gini) && (0.0..=1.0).contains(&r.wealth_gini));
        assert!(r.steps_survived <= 12.0);
    }
}

#[test]
fn one_rich_household_shows_the_extreme_gini() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = toy();
    let n = 10;
    exp.econ.households = n;
    exp.econ.horizon = 1;
    exp.econ.initial_wealth = Some((0..n).map(|i| if i == n - 1 { 50.0 } else { 0.0 }).collect());
    exp.run.algo = Algo::FreeMarket;
    run(&rc(Command::Evaluate, dir.path(), &exp)).unwrap();
    for r in read_metrics_csv(&dir.path().join(METRICS_FILE)).unwrap() {
        assert!((r.wealth_gini - (1.0 - 1.0 / n as f64)).abs() < 1e-12);
    }
}

#[test]
fn missing_or_mismatched_checkpoints_fail() {
    let dir = tempfile::tempdir().unwrap();
    let exp = toy();
    assert!(run(&rc(Command::Evaluate, &dir.path().join("e"), &exp)).is_err());
    let (smfg, bc) = checkpoints(dir.path());
    let mut wrong = toy();
    wrong.run.checkpoint = Some(smfg.clone());
    wrong.train.hidden = vec![16];
    assert!(run(&rc(Command::Evaluate, &dir.path().join("w"), &wrong)).is_err());
    let mut mix = toy();
    mix.run.checkpoint = Some(smfg);
    assert!(run(&rc(Command::Mix, &dir.path().join("m"), &mix)).is_err());
    let mut as_bc = toy();
    as_bc.run.algo = Algo::BcHouseholds;
    as_bc.run.checkpoint = Some(bc);
    run(&rc(Command::Evaluate, &dir.path().join("b"), &as_bc)).unwrap();
}

fn trace_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn shock_halves_wealth_and_unit_shock_is_invisible() {
    let dir = tempfile::tempdir().unwrap();
    let (smfg, _) = checkpoints(dir.path());
    let mut exp = toy();
    exp.run.checkpoint = Some(smfg);
    exp.eval.episodes = 2;
    exp.shock.factor = 0.5;
    run(&rc(Command::Shock, &dir.path().join("half"), &exp)).unwrap();
    let trace = read(dir.path().join("half").join(TRACE_FILE));
    let eps = trace_column(&trace, "episode");
    let shock = trace_column(&trace, "shock");
    let t = trace_column(&trace, "t");
    let before = trace_column(&trace, "mean_wealth_after");
    let at = trace_column(&trace, "mean_wealth");
    for ep in ["0", "1"] {
        let rows: Vec<usize> = (0..eps.len()).filter(|&i| eps[i] == ep).collect();
        assert_eq!(rows.iter().filter(|&&i| shock[i] == "true").count(), 1);
        let s = *rows.iter().find(|&&i| t[i] == "4").unwrap();
        let ratio: f64 = at[s].parse::<f64>().unwrap() / before[s - 1].parse::<f64>().unwrap();
        assert!((ratio - 0.5).abs() < 1e-12);
    }
    let metrics = read_metrics_csv(&dir.path().join("half").join(METRICS_FILE)).unwrap();
    let steps: usize = metrics[..2].iter().map(|r| r.steps_survived as usize).sum();
    assert_eq!(steps, eps.len());
    let recovery = read(dir.path().join("half").join(RECOVERY_FILE));
    assert_eq!(recovery.lines().count(), 3);

    exp.shock.factor = 1.0;
    run(&rc(Command::Shock, &dir.path().join("unit"), &exp)).unwrap();
    run(&rc(Command::Evaluate, &dir.path().join("plain"), &exp)).unwrap();
    assert_eq!(read(dir.path().join("unit").join(METRICS_FILE)), read(dir.path().join("plain").join(METRICS_FILE)));

    exp.shock.step = 12;
    assert!(run(&rc(Command::Shock, &dir.path().join("late"), &exp)).is_err());
}

#[test]
fn mix_partitions_by_index_and_degenerates_at_the_ends() {
    let dir = tempfile::tempdir().unwrap();
    let (smfg, bc) = checkpoints(dir.path());
    let mut exp = toy();
    exp.econ.households = 10;
    exp.run.checkpoint = Some(smfg);
    exp.run.bc_checkpoint = Some(bc);
    exp.mix.ratios = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    run(&rc(Command::Mix, &dir.path().join("mix"), &exp)).unwrap();
    let groups = read(dir.path().join("mix").join(GROUPS_FILE));
    let rows: Vec<Vec<&str>> = groups.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    let counts: Vec<(usize, usize)> = rows.iter().map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap())).collect();
    assert_eq!(counts, vec![(0, 10), (3, 7), (5, 5), (8, 2), (10, 0)]);
    assert!(rows[0][3].is_empty() && !rows[0][6].is_empty());
    assert!(rows[4][6].is_empty() && !rows[4][3].is_empty());

    run(&rc(Command::Evaluate, &dir.path().join("eval"), &exp)).unwrap();
    let eval = read_metrics_csv(&dir.path().join("eval").join(METRICS_FILE)).unwrap();
    let mix = read_metrics_csv(&dir.path().join("mix").join(METRICS_FILE)).unwrap();
    let (e, m) = (eval.last().unwrap(), mix.last().unwrap());
    assert_eq!((e.per_capita_gdp, e.social_welfare, e.leader_payoff), (m.per_capita_gdp, m.social_welfare, m.leader_payoff));
}

#[test]
fn sweep_collects_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = toy();
    exp.train.epochs = 1;
    exp.sweep.algos = vec![Algo::Smfg, Algo::FreeMarket, Algo::UsFederal];
    exp.sweep.seeds = vec![0, 1];
    let out = run(&rc(Command::Sweep, dir.path(), &exp)).unwrap();
    assert_eq!(out.metrics.len(), 6);
    assert!(dir.path().join("smfg-s1").join(CHECKPOINT_FILE).exists());
    assert!(dir.path().join("us-federal-s0").join(MANIFEST_FILE).exists());
}
