use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::mfg::EpisodeSummary;
use crate::stats::mean;

pub const METRICS_HEADER: [&str; 13] = [
    "run_id",
    "seed",
    "epoch",
    "steps_survived",
    "per_capita_gdp",
    "social_welfare",
    "income_gini",
    "wealth_gini",
    "mean_wealth",
    "mean_income",
    "mean_consumption",
    "leader_payoff",
    "exploitability",
];

/// One line of `metrics.csv`. `epoch` holds a training epoch, an
/// evaluation episode index, or `mean` for the average of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub epoch: String,
    pub steps_survived: f64,
    pub per_capita_gdp: f64,
    pub social_welfare: f64,
    pub income_gini: f64,
    pub wealth_gini: f64,
    pub mean_wealth: f64,
    pub mean_income: f64,
    pub mean_consumption: f64,
    pub leader_payoff: f64,
    pub exploitability: Option<f64>,
}

/// Fixed-width scientific notation with 17 significant digits, which
/// round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl MetricsRow {
    pub fn from_summary(run_id: &str, seed: u64, epoch: impl ToString, s: &EpisodeSummary) -> Self {
        Self {
            run_id: run_id.to_string(),
            seed,
            epoch: epoch.to_string(),
            steps_survived: s.steps_survived as f64,
            per_capita_gdp: s.per_capita_gdp,
            social_welfare: s.social_welfare,
            income_gini: s.income_gini,
            wealth_gini: s.wealth_gini,
            mean_wealth: s.mean_wealth,
            mean_income: s.mean_income,
            mean_consumption: s.mean_consumption,
            leader_payoff: s.leader_payoff,
            exploitability: None,
        }
    }

    fn values(&self) -> [f64; 9] {
        [
            self.steps_survived,
            self.per_capita_gdp,
            self.social_welfare,
            self.income_gini,
            self.wealth_gini,
            self.mean_wealth,
            self.mean_income,
            self.mean_consumption,
            self.leader_payoff,
        ]
    }

    /// Column means of `rows`, labelled `epoch`.
    pub fn mean_of(rows: &[MetricsRow], run_id: &str, seed: u64, epoch: &str) -> Result<Self> {
        if rows.is_empty() {
            return Err(contract("cannot average an empty metrics table"));
        }
        let col = |k: usize| mean(&rows.iter().map(|r| r.values()[k]).collect::<Vec<_>>());
        Ok(Self {
            run_id: run_id.to_string(),
            seed,
            epoch: epoch.to_string(),
            steps_survived: col(0),
            per_capita_gdp: col(1),
            social_welfare: col(2),
            income_gini: col(3),
            wealth_gini: col(4),
            mean_wealth: col(5),
            mean_income: col(6),
            mean_consumption: col(7),
            leader_payoff: col(8),
            exploitability: None,
        })
    }

    pub fn to_csv_line(&self) -> String {
        let mut fields = vec![self.run_id.clone(), self.seed.to_string(), self.epoch.clone()];
        fields.extend(self.values().iter().map(|&v| fmt_f64(v)));
        fields.push(self.exploitability.map(fmt_f64).unwrap_or_default());
        fields.join(",")
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != METRICS_HEADER.len() {
            return Err(contract(format!("metrics line has {} fields, expected {}", f.len(), METRICS_HEADER.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse().map_err(|_| contract(format!("field {} is not a number: {:?}", METRICS_HEADER[k], f[k])))
        };
        Ok(Self {
            run_id: f[0].to_string(),
            seed: f[1].parse().map_err(|_| contract(format!("bad seed {:?}", f[1])))?,
            epoch: f[2].to_string(),
            steps_survived: num(3)?,
            per_capita_gdp: num(4)?,
            social_welfare: num(5)?,
            income_gini: num(6)?,
            wealth_gini: num(7)?,
            mean_wealth: num(8)?,
            mean_income: num(9)?,
            mean_consumption: num(10)?,
            leader_payoff: num(11)?,
            exploitability: if f[12].is_empty() { None } else { Some(num(12)?) },
        })
    }
}

/// Writes the header immediately and flushes after every row, so an
/// interrupted run leaves a well-formed prefix.
pub struct MetricsWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self { out: BufWriter::new(file), path: path.to_path_buf() };
        w.line(&METRICS_HEADER.join(","))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").and_then(|_| self.out.flush()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn push(&mut self, row: &MetricsRow) -> Result<()> {
        self.line(&row.to_csv_line())
    }
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut w = MetricsWriter::create(path)?;
    rows.iter().try_for_each(|r| w.push(r))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER.join(",").as_str()) {
        return Err(contract(format!("{} does not start with the metrics header", path.display())));
    }
    lines.map(MetricsRow::parse_csv_line).collect()
}

/// Plain CSV table with a fixed header, for traces and grouped outputs.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
