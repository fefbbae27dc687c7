use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BcLoss, BehaviorParams, SaezConfig};
use crate::econ::EconConfig;
use crate::error::{config, Error, Result};
use crate::mfg::BestResponseConfig;
use crate::smfrl::{TrainConfig, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Smfg,
    SmfgS,
    SmfgMf,
    SmfgSMf,
    FreeMarket,
    Saez,
    UsFederal,
    BcHouseholds,
}

impl Algo {
    pub const ALL: [Algo; 8] = [
        Algo::Smfg,
        Algo::SmfgS,
        Algo::SmfgMf,
        Algo::SmfgSMf,
        Algo::FreeMarket,
        Algo::Saez,
        Algo::UsFederal,
        Algo::BcHouseholds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Smfg => "smfg",
            Algo::SmfgS => "smfg-s",
            Algo::SmfgMf => "smfg-mf",
            Algo::SmfgSMf => "smfg-s-mf",
            Algo::FreeMarket => "free-market",
            Algo::Saez => "saez",
            Algo::UsFederal => "us-federal",
            Algo::BcHouseholds => "bc-households",
        }
    }

    /// The trainer variant for the four learned algorithms.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Algo::Smfg => Some(Variant::Full),
            Algo::SmfgS => Some(Variant::Simultaneous),
            Algo::SmfgMf => Some(Variant::Concat),
            Algo::SmfgSMf => Some(Variant::Independent),
            _ => None,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Algo::ALL.iter().map(|a| a.name()).collect();
            config(format!("unknown algo {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(config(format!("unknown profile {s:?}; expected desk or paper"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Evaluate,
    Shock,
    Mix,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Shock => "shock",
            Command::Mix => "mix",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub algo: Algo,
    pub seed: u64,
    pub profile: Profile,
    /// Trained SMFRL networks, or the cloned household network for `bc-households`.
    pub checkpoint: Option<PathBuf>,
    /// Cloned household network used by mixed-population runs.
    pub bc_checkpoint: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { algo: Algo::Smfg, seed: 0, profile: Profile::Desk, checkpoint: None, bc_checkpoint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
    /// Training epochs between evaluations.
    pub every: usize,
    /// Best-response update rounds per side; 0 disables exploitability.
    pub exploit_budget: usize,
    pub exploit_updates_per_episode: usize,
    pub exploit_eval_every: usize,
    pub exploit_batch: usize,
    /// Evaluation episodes used to score best responses.
    pub exploit_episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let br = BestResponseConfig::default();
        Self {
            episodes: 10,
            every: 10,
            exploit_budget: 0,
            exploit_updates_per_episode: br.updates_per_episode,
            exploit_eval_every: br.eval_every,
            exploit_batch: br.batch,
            exploit_episodes: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShockSection {
    pub step: usize,
    pub factor: f64,
}

impl Default for ShockSection {
    fn default() -> Self {
        Self { step: 50, factor: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSection {
    pub ratios: Vec<f64>,
}

impl Default for MixSection {
    fn default() -> Self {
        Self { ratios: vec![0.0, 0.25, 0.5, 0.75, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcSection {
    pub dataset_size: usize,
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub loss: BcLoss,
    pub batch_size: usize,
    pub lr: f64,
    pub behavior: BehaviorParams,
}

impl Default for BcSection {
    fn default() -> Self {
        Self {
            dataset_size: 2000,
            epochs: 50,
            hidden: vec![32, 32],
            loss: BcLoss::Mse,
            batch_size: 32,
            lr: 1e-3,
            behavior: BehaviorParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsFederalSection {
    /// Schedule file; the bundled 2022 schedule when unset.
    pub schedule: Option<PathBuf>,
    pub spend_ratio: f64,
}

impl Default for UsFederalSection {
    fn default() -> Self {
        Self { schedule: None, spend_ratio: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { algos: vec![Algo::Smfg, Algo::SmfgS, Algo::SmfgMf, Algo::SmfgSMf], seeds: vec![0, 1, 2, 3, 4] }
    }
}

/// Every setting of a run after profile defaults, the config file and the
/// command-line overrides have been merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub econ: EconConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub shock: ShockSection,
    pub mix: MixSection,
    pub bc: BcSection,
    pub saez: SaezConfig,
    pub us_federal: UsFederalSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Desk)
    }
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (econ, train) = match profile {
            Profile::Desk => (EconConfig::default(), TrainConfig::desk()),
            Profile::Paper => (EconConfig { households: 100, horizon: 300, ..EconConfig::default() }, TrainConfig::default()),
        };
        Self {
            run: RunSection { profile, ..RunSection::default() },
            econ,
            train,
            eval: EvalSection::default(),
            shock: ShockSection::default(),
            mix: MixSection::default(),
            bc: BcSection::default(),
            saez: SaezConfig::default(),
            us_federal: UsFederalSection::default(),
            sweep: SweepSection::default(),
        }
    }

    pub fn best_response(&self) -> BestResponseConfig {
        BestResponseConfig {
            budget: self.eval.exploit_budget,
            updates_per_episode: self.eval.exploit_updates_per_episode,
            eval_every: self.eval.exploit_eval_every,
            batch: self.eval.exploit_batch,
            deviator: 0,
            seed: self.run.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.econ.validate()?;
        self.train.validate()?;
        if self.run.seed > i64::MAX as u64 {
            return Err(config("seed must not exceed 2^63 - 1"));
        }
        if let Some(r) = self.mix.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(config(format!("mix ratio {r} outside [0, 1]")));
        }
        if !(self.shock.factor >= 0.0) || !self.shock.factor.is_finite() {
            return Err(config("shock factor must be finite and non-negative"));
        }
        if self.eval.every == 0 {
            return Err(config("eval.every must be positive"));
        }
        if self.bc.hidden.contains(&0) || self.bc.batch_size == 0 {
            return Err(config("bc hidden widths and batch size must be positive"));
        }
        Ok(())
    }

    /// Resolved settings in the config file format.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config(format!("cannot serialise configuration: {e}")))
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub households: Option<usize>,
    pub epochs: Option<usize>,
    pub algo: Option<Algo>,
    pub checkpoint: Option<PathBuf>,
    pub shock_step: Option<usize>,
    pub shock_factor: Option<f64>,
    pub mix_ratio: Option<f64>,
    pub eval_episodes: Option<usize>,
    pub profile: Option<Profile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub experiment: ExperimentConfig,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Merges config text over the defaults of its profile. A `[manifest]`
/// table, as written next to every run's outputs, is ignored.
pub fn parse_experiment(text: &str, profile_override: Option<Profile>) -> Result<ExperimentConfig> {
    let mut file: toml::Table = text.parse().map_err(|e| config(format!("config parse error: {e}")))?;
    file.remove("manifest");
    let file_profile = match file.get("run").and_then(|r| r.get("profile")) {
        Some(v) => Some(v.as_str().ok_or_else(|| config("run.profile must be a string"))?.parse::<Profile>()?),
        None => None,
    };
    let profile = profile_override.or(file_profile).unwrap_or(Profile::Desk);
    let defaults = ExperimentConfig::for_profile(profile);
    let mut table = toml::Table::try_from(&defaults).map_err(|e| config(format!("cannot serialise defaults: {e}")))?;
    merge(&mut table, file);
    let mut exp: ExperimentConfig = table.try_into().map_err(|e| config(format!("config error: {e}")))?;
    exp.run.profile = profile;
    Ok(exp)
}

impl RunConfig {
    /// Profile defaults, then the config file, then `overrides`.
    pub fn resolve(command: Command, config_path: Option<&Path>, out_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let mut exp = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_experiment(&text, overrides.profile)?
            }
            None => ExperimentConfig::for_profile(overrides.profile.unwrap_or(Profile::Desk)),
        };
        let o = overrides;
        if let Some(v) = o.seed {
            exp.run.seed = v;
        }
        if let Some(v) = o.households {
            exp.econ.households = v;
        }
        if let Some(v) = o.epochs {
            exp.train.epochs = v;
        }
        if let Some(v) = o.algo {
            exp.run.algo = v;
        }
        if let Some(v) = &o.checkpoint {
            exp.run.checkpoint = Some(v.clone());
        }
        if let Some(v) = o.shock_step {
            exp.shock.step = v;
        }
        if let Some(v) = o.shock_factor {
            exp.shock.factor = v;
        }
        if let Some(v) = o.mix_ratio {
            exp.mix.ratios = vec![v];
        }
        if let Some(v) = o.eval_episodes {
            exp.eval.episodes = v;
        }
        if let Some(variant) = exp.run.algo.variant() {
            exp.train = variant.apply(&exp.train);
        }
        exp.validate()?;
        Ok(Self { command, config_path: config_path.map(Path::to_path_buf), out_dir: out_dir.to_path_buf(), experiment: exp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algo_names_round_trip() {
        for a in Algo::ALL {
            assert_eq!(a.name().parse::<Algo>().unwrap(), a);
            let t = toml::Value::try_from(a).unwrap();
            assert_eq!(t.as_str(), Some(a.name()));
        }
        assert!("smfg-x".parse::<Algo>().is_err());
    }

    #[test]
    fn file_values_and_overrides_layer() {
        let text = "# desk run\n[run]\nalgo = \"saez\"\nseed = 7\n\n[econ]\nhouseholds = 4 # small\n\n[train]\nbatch = 16\n";
        let exp = parse_experiment(text, None).unwrap();
        assert_eq!(exp.run.algo, Algo::Saez);
        assert_eq!(exp.run.seed, 7);
        assert_eq!(exp.econ.households, 4);
        assert_eq!(exp.econ.horizon, 100);
        assert_eq!(exp.train.batch, 16);
        assert_eq!(exp.train.epochs, TrainConfig::desk().epochs);
        let paper = parse_experiment(text, Some(Profile::Paper)).unwrap();
        assert_eq!(paper.train.epochs, 1000);
        assert_eq!(paper.econ.households, 4);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(parse_experiment("[econ]\nhouseholdz = 3\n", None).is_err());
        assert!(parse_experiment("[run]\nalgo = \"nope\"\n", None).is_err());
        assert!(parse_experiment("[run\n", None).is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let mut exp = ExperimentConfig::default();
        exp.econ.initial_wealth = Some(vec![1.0; 10]);
        exp.run.checkpoint = Some(PathBuf::from("a/b.ckpt"));
        let text = format!("[manifest]\ncommand = \"train\"\n\n{}", exp.to_toml().unwrap());
        assert_eq!(parse_experiment(&text, None).unwrap(), exp);
    }

    #[test]
    fn ablation_flags_follow_algo() {
        let o = Overrides { algo: Some(Algo::SmfgSMf), ..Overrides::default() };
        let rc = RunConfig::resolve(Command::Train, None, Path::new("out"), &o).unwrap();
        assert!(!rc.experiment.train.use_leader_follower_update);
        assert!(!rc.experiment.train.use_mean_field);
        let bad = Overrides { mix_ratio: Some(1.5), ..Overrides::default() };
        assert!(RunConfig::resolve(Command::Mix, None, Path::new("out"), &bad).is_err());
    }
}
