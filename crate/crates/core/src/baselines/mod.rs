//! Non-learned governments and behaviour-cloned households.

mod bc;
mod saez;

use std::path::Path;

pub use bc::{
    bc_spec, bc_train, bc_train_with, rule_of_thumb, synth_bc_dataset, wealth_ranks, BcDataset, BcHouseholds,
    BcLoss, BcOptions, BcOutcome, BehaviorParams, RuleOfThumbHouseholds,
};
pub use saez::{
    default_edges, pareto_weights, saez_fit_elasticity, saez_rate, saez_rates, SaezConfig, SaezGov, SaezState,
    SAEZ_MAX_RATE,
};

use crate::econ::GovAction;
use crate::error::{config, Error, Result};
use crate::mfg::ConstantGov;

/// No taxes and no spending, whatever the observation.
pub fn free_market_policy(_obs: &[f64]) -> GovAction {
    GovAction::NONE
}

pub fn free_market_gov() -> ConstantGov {
    ConstantGov(GovAction::NONE)
}

/// Piecewise-constant marginal rates over ascending income brackets.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketSchedule {
    edges: Vec<f64>,
    rates: Vec<f64>,
}

impl BracketSchedule {
    /// `edges[b]` is the lower edge of bracket `b`; the last bracket is open.
    pub fn new(edges: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if edges.is_empty() || edges.len() != rates.len() {
            return Err(config(format!(
                "bracket schedule needs matching non-empty edges and rates, got {} and {}",
                edges.len(),
                rates.len()
            )));
        }
        if edges[0] != 0.0 {
            return Err(config(format!("first bracket edge must be 0, got {}", edges[0])));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(config("bracket edges must be finite and strictly increasing"));
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
            return Err(config(format!("marginal rates must lie in [0, 1), got {r}")));
        }
        Ok(Self { edges, rates })
    }

    pub fn flat(rate: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![rate])
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(0.0, f64::max)
    }

    /// Same rates with every edge multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(config(format!("edge scale must be positive, got {factor}")));
        }
        Self::new(self.edges.iter().map(|e| e * factor).collect(), self.rates.clone())
    }

    /// Marginal rate applying at `income`.
    pub fn marginal_rate(&self, income: f64) -> f64 {
        let b = self.edges.partition_point(|e| *e <= income).saturating_sub(1);
        self.rates[b]
    }
}

/// Tax owed on `income`: each bracket's rate applied to the part of the
/// income inside that bracket.
pub fn bracket_tax(income: f64, schedule: &BracketSchedule) -> Result<f64> {
    if !(income >= 0.0) {
        return Err(Error::Domain(format!("income must be non-negative, got {income}")));
    }
    let e = &schedule.edges;
    let mut tax = 0.0;
    for (b, &rate) in schedule.rates.iter().enumerate() {
        if income <= e[b] {
            break;
        }
        let upper = e.get(b + 1).copied().unwrap_or(f64::INFINITY);
        tax += rate * (income.min(upper) - e[b]);
    }
    Ok(tax)
}

/// Incomes (relative to the HSV scale) at which average rates are matched.
fn fit_grid() -> Vec<f64> {
    let (lo, hi, k) = (0.1f64, 10.0f64, 61);
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 {
        return None;
    }
    Some([(b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det])
}

/// Least-squares `(rate, progressivity)` of the HSV average-rate curve
/// `1 - (1 - rate) * (z / scale)^(-progressivity)` against the schedule's
/// average rates. Unclamped.
pub fn fit_hsv(schedule: &BracketSchedule, scale: f64) -> Result<(f64, f64)> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(config(format!("HSV scale must be positive, got {scale}")));
    }
    let xs = fit_grid();
    let mut avg = Vec::with_capacity(xs.len());
    for &x in &xs {
        avg.push(bracket_tax(x * scale, schedule)? / (x * scale));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = avg.iter().map(|a| (1.0 - a).ln()).collect();

    // Log-linear start: ln(1 - avg) = u - xi * ln x.
    let n = xs.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let (mut u, mut xi) = (my - slope * mx, -slope);
    if ly.iter().all(|y| *y == ly[0]) {
        return Ok((1.0 - ly[0].exp(), 0.0));
    }

    // Gauss-Newton on the average-rate residuals.
    let sse = |u: f64, xi: f64| -> f64 {
        lx.iter().zip(&avg).map(|(l, a)| (a - (1.0 - (u - xi * l).exp())).powi(2)).sum()
    };
    let mut best = sse(u, xi);
    for _ in 0..50 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (l, a) in lx.iter().zip(&avg) {
            let k = (u - xi * l).exp();
            let r = a - (1.0 - k);
            let j = [-k, k * l];
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let Some(step) = solve2(jtj, jtr) else { break };
        let (nu, nxi) = (u - step[0], xi - step[1]);
        let s = sse(nu, nxi);
        if !(s < best) {
            break;
        }
        let gain = best - s;
        (u, xi, best) = (nu, nxi, s);
        if gain < 1e-15 {
            break;
        }
    }
    Ok((1.0 - u.exp(), xi))
}

/// HSV income-tax action closest to `schedule` (incomes measured against
/// `scale`, the economy's mean income), clamped to the action ranges. A
/// schedule with no positive rate maps to the free market.
pub fn schedule_to_gov(schedule: &BracketSchedule, scale: f64, spend_ratio: f64) -> Result<GovAction> {
    if schedule.max_rate() == 0.0 {
        return Ok(GovAction::NONE);
    }
    let (rate, xi) = fit_hsv(schedule, scale)?;
    Ok(GovAction {
        income_tax_rate: rate,
        income_progressivity: xi,
        wealth_tax_rate: 0.0,
        wealth_progressivity: 0.0,
        spend_ratio,
    }
    .clipped())
}

/// A bracket schedule stored with the income level it is quoted against.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleFile {
    pub schedule: BracketSchedule,
    /// Income mapped onto the model's mean income.
    pub reference_income: f64,
}

/// Parses `reference_income <v>` and `bracket <lower edge> <rate>` lines;
/// `#` starts a comment.
pub fn parse_schedule(text: &str) -> Result<ScheduleFile> {
    let (mut edges, mut rates, mut reference) = (Vec::new(), Vec::new(), None);
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| config(format!("line {}: bad number {s:?}", k + 1)));
        match parts.as_slice() {
            ["reference_income", v] => reference = Some(num(v)?),
            ["bracket", e, r] => {
                edges.push(num(e)?);
                rates.push(num(r)?);
            }
            _ => return Err(config(format!("line {}: unrecognised entry {line:?}", k + 1))),
        }
    }
    let reference_income = reference.ok_or_else(|| config("schedule file lacks reference_income"))?;
    if !(reference_income > 0.0) {
        return Err(config("reference_income must be positive"));
    }
    Ok(ScheduleFile { schedule: BracketSchedule::new(edges, rates)?, reference_income })
}

pub fn load_schedule(path: &Path) -> Result<ScheduleFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schedule(&text)
}

/// The bundled 2022 US federal single-filer schedule.
pub fn us_federal_2022() -> ScheduleFile {
    parse_schedule(include_str!("../../../../data/us_federal_2022.txt")).expect("bundled schedule parses")
}

/// Fixed government playing the HSV fit of a quoted schedule, with the
/// reference income mapped onto the model's mean income.
pub fn bracket_gov(file: &ScheduleFile, spend_ratio: f64) -> Result<ConstantGov> {
    let unit = file.schedule.scaled(1.0 / file.reference_income)?;
    Ok(ConstantGov(schedule_to_gov(&unit, 1.0, spend_ratio)?))
}
