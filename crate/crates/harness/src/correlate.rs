//! Correlation between testbed prediction quality and decision quality,
//! matched per (agent, seed).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use enn_core::numerics::Rng;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::Row;
use crate::stats::{bootstrap, pearson, spearman, Interval};

/// One matched (agent, seed) point. Higher is worse for every field.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub agent: String,
    pub seed: u64,
    pub joint_nll: f64,
    pub marginal_nll: f64,
    /// Total regret for bandit runs, one minus the normalised mean return
    /// for RL runs.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub points: Vec<Point>,
    pub joint_spearman: Interval,
    pub joint_pearson: Interval,
    pub marginal_spearman: Interval,
    pub marginal_pearson: Interval,
}

impl CorrelationReport {
    /// (nll kind, method, interval) in output order.
    pub fn entries(&self) -> [(&'static str, &'static str, Interval); 4] {
        [
            ("joint", "spearman", self.joint_spearman),
            ("joint", "pearson", self.joint_pearson),
            ("marginal", "spearman", self.marginal_spearman),
            ("marginal", "pearson", self.marginal_pearson),
        ]
    }

    /// Rows in the correlate CSV layout.
    pub fn rows(&self) -> Vec<Row> {
        self.entries()
            .iter()
            .enumerate()
            .map(|(i, (nll, method, iv))| Row {
                agent: String::new(),
                seed: 0,
                step: i as u64,
                values: vec![
                    nll.to_string(),
                    method.to_string(),
                    iv.estimate.to_string(),
                    iv.lo.to_string(),
                    iv.hi.to_string(),
                    self.points.len().to_string(),
                ],
            })
            .collect()
    }
}

/// A parsed CSV: column names and records, with `#` lines skipped.
struct Table {
    header: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read(mut input: impl Read, what: &str) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = reader.headers()?.iter().map(str::to_string).collect();
        let records = reader.records().collect::<std::result::Result<_, _>>()?;
        let table = Table { header, records };
        if table.records.is_empty() {
            return Err(HarnessError::Data(format!("{what} has no rows")));
        }
        Ok(table)
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str, what: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| HarnessError::Data(format!("{what} has no `{name}` column")))
    }
}

fn number<T: std::str::FromStr>(record: &csv::StringRecord, col: usize, what: &str) -> Result<T> {
    let field = &record[col];
    field.parse().map_err(|_| {
        let line = record.position().map_or(0, |p| p.line());
        HarnessError::Data(format!("{what} line {line}: cannot parse `{field}`"))
    })
}

type Key = (String, u64);

/// Mean NLL per (agent, seed) at `tau`, averaged over problems.
fn nll_by_run(table: &Table, tau: usize) -> Result<BTreeMap<Key, f64>> {
    let what = "testbed CSV";
    let (a, s, t, v) = (
        table.require("agent", what)?,
        table.require("seed", what)?,
        table.require("tau", what)?,
        table.require("nll", what)?,
    );
    let mut sums: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
    for r in &table.records {
        if number::<usize>(r, t, what)? != tau {
            continue;
        }
        let entry = sums.entry((r[a].to_string(), number(r, s, what)?)).or_default();
        entry.0 += number::<f64>(r, v, what)?;
        entry.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect())
}

/// Decision score per (agent, seed) from a bandit or RL CSV.
fn scores_by_run(table: &Table) -> Result<BTreeMap<Key, f64>> {
    let what = "decision CSV";
    let (a, s) = (table.require("agent", what)?, table.require("seed", what)?);
    let mut out = BTreeMap::new();
    if let Some(cum) = table.column("cum_regret") {
        let step = table.require("step", what)?;
        let mut last: BTreeMap<Key, (u64, f64)> = BTreeMap::new();
        for r in &table.records {
            let (t, c) = (number::<u64>(r, step, what)?, number::<f64>(r, cum, what)?);
            let entry = last.entry((r[a].to_string(), number(r, s, what)?)).or_insert((t, c));
            if t >= entry.0 {
                *entry = (t, c);
            }
        }
        out.extend(last.into_iter().map(|(k, (_, c))| (k, c)));
    } else if let Some(ret) = table.column("return") {
        let opt = table.require("optimal_return", what)?;
        let mut sums: BTreeMap<Key, (f64, usize, f64)> = BTreeMap::new();
        for r in &table.records {
            let entry = sums.entry((r[a].to_string(), number(r, s, what)?)).or_default();
            entry.0 += number::<f64>(r, ret, what)?;
            entry.1 += 1;
            entry.2 = number(r, opt, what)?;
        }
        for (k, (sum, n, optimal)) in sums {
            if optimal <= 0.0 {
                return Err(HarnessError::Data(format!("{what}: optimal return {optimal} is not positive")));
            }
            out.insert(k, 1.0 - sum / n as f64 / optimal);
        }
    } else {
        return Err(HarnessError::Data(format!(
            "{what} has neither a `cum_regret` nor a `return` column"
        )));
    }
    Ok(out)
}

/// Matches the two CSVs on (agent, seed) and correlates NLL with the
/// decision score. Needs at least four matched points.
pub fn correlate(testbed: impl Read, decision: impl Read, cfg: &ExperimentConfig) -> Result<CorrelationReport> {
    let testbed = Table::read(testbed, "testbed CSV")?;
    let decision = Table::read(decision, "decision CSV")?;
    let joint = nll_by_run(&testbed, cfg.joint_tau)?;
    let marginal = nll_by_run(&testbed, cfg.marginal_tau)?;
    let scores = scores_by_run(&decision)?;
    let points: Vec<Point> = scores
        .iter()
        .filter_map(|(k, &score)| {
            Some(Point {
                agent: k.0.clone(),
                seed: k.1,
                joint_nll: *joint.get(k)?,
                marginal_nll: *marginal.get(k)?,
                score,
            })
        })
        .collect();
    if points.len() < 4 {
        return Err(HarnessError::Data(format!(
            "{} matched (agent, seed) points; at least 4 are needed",
            points.len()
        )));
    }
    let score: Vec<f64> = points.iter().map(|p| p.score).collect();
    let jn: Vec<f64> = points.iter().map(|p| p.joint_nll).collect();
    let mn: Vec<f64> = points.iter().map(|p| p.marginal_nll).collect();
    let rng = Rng::new(cfg.seed_base).child("bootstrap");
    let interval = |x: &[f64], stat: fn(&[f64], &[f64]) -> Option<f64>, label: &str| {
        bootstrap(x, &score, stat, cfg.resamples, &mut rng.child(label))
            .ok_or_else(|| HarnessError::Data(format!("{label} correlation is undefined for constant data")))
    };
    Ok(CorrelationReport {
        joint_spearman: interval(&jn, spearman, "joint-spearman")?,
        joint_pearson: interval(&jn, pearson, "joint-pearson")?,
        marginal_spearman: interval(&mn, spearman, "marginal-spearman")?,
        marginal_pearson: interval(&mn, pearson, "marginal-pearson")?,
        points,
    })
}

/// [`correlate`] on the files named by `cfg.testbed_csv` and `cfg.decision_csv`.
pub fn correlate_files(cfg: &ExperimentConfig) -> Result<CorrelationReport> {
    let open = |p: &Path| {
        std::fs::File::open(p).map_err(|e| HarnessError::Data(format!("cannot open {}: {e}", p.display())))
    };
    correlate(open(&cfg.testbed_csv)?, open(&cfg.decision_csv)?, cfg)
}
