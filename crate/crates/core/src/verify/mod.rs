//! Seeded Monte-Carlo suites for the probabilistic claims around sphere
//! matrices, plus the prediction-error experiment.
//!
//! Every trial draws from its own substream `master_seed.derive(trial)`, so
//! statistics are identical whatever order rayon finishes trials in.

mod experiment;
mod suites;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use experiment::{
    correlated_pairs_design, experiment_prediction, experiment_prediction_with, Design, ExperimentOptions,
    LambdaRule, SigmaProxy,
};
pub use suites::{
    verify_cap_coherence, verify_cap_coherence_with, verify_dot_law, verify_dot_law_against,
    verify_gamma_bound, verify_norm_bound, verify_order_statistic, verify_submatrix_extraction,
    verify_submatrix_extraction_on, ExtractionDesign,
};

use crate::error::Result;
use crate::gamma::default_kappa;
use crate::sphere::Seed;
use crate::stats::Proportion;

/// Per-suite pass thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// KS critical distance is `ks_coefficient / √N`.
    pub ks_coefficient: f64,
    /// Largest allowed exceedance fraction for the order-statistic quantile.
    pub exceedance: f64,
    /// Largest allowed fraction of trials whose γ estimate exceeds the bound.
    pub gamma_failure: f64,
    /// Ceiling on the median coherence; `None` means `min(1, √(6·log p0 / n))`.
    pub coherence_median: Option<f64>,
    /// Spectral-norm ceiling is `norm_multiple·(√(m/n) + 1 + norm_margin)`.
    pub norm_multiple: f64,
    pub norm_margin: f64,
    /// Confidence level of every reported binomial interval.
    pub confidence: f64,
    /// Slack, in probability, for bound-holding fractions.
    pub slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            ks_coefficient: crate::stats::KS_COEFF_1PCT,
            exceedance: 0.01,
            gamma_failure: 0.0,
            coherence_median: None,
            norm_multiple: 1.0,
            norm_margin: 0.5,
            confidence: 0.99,
            slack: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub n: usize,
    pub p0: usize,
    pub s: usize,
    pub rho_minus: f64,
    pub kappa: f64,
    pub trials: usize,
    pub master_seed: Seed,
    pub thresholds: Thresholds,
}

impl TrialPlan {
    pub fn new(n: usize, p0: usize, s: usize, rho_minus: f64, trials: usize, master_seed: Seed) -> Self {
        Self {
            n,
            p0,
            s,
            rho_minus,
            kappa: default_kappa(),
            trials,
            master_seed,
            thresholds: Thresholds::default(),
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        use crate::error::Error;
        if self.trials == 0 {
            return Err(Error::OutOfRange {
                name: "trials",
                value: 0.0,
                expected: "trials >= 1",
            });
        }
        if self.n == 0 {
            return Err(Error::OutOfRange {
                name: "n",
                value: 0.0,
                expected: "n >= 1",
            });
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> Seed {
        self.master_seed.derive(trial as u64)
    }

    /// Runs `f(trial, seed)` for every trial in parallel, results in trial order.
    pub(crate) fn run<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, Seed) -> T + Sync,
    {
        (0..self.trials)
            .into_par_iter()
            .map(|t| f(t, self.trial_seed(t)))
            .collect()
    }
}

/// One row per trial, written as CSV with a header line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TrialTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.header)?;
        for r in &self.rows {
            wtr.write_record(r)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub tool_version: String,
    pub suite: String,
    pub pass: bool,
    /// One-line human-readable outcome.
    pub verdict: String,
    /// The threshold the pass decision was taken against.
    pub threshold: f64,
    pub statistics: BTreeMap<String, f64>,
    pub proportions: BTreeMap<String, Proportion>,
    pub plan: TrialPlan,
    pub notes: Vec<String>,
    /// Wall-clock time; kept out of the JSON so reruns are byte-identical.
    #[serde(skip)]
    pub runtime: Duration,
    #[serde(skip)]
    pub table: TrialTable,
}

impl SuiteReport {
    pub(crate) fn new(suite: &str, plan: &TrialPlan) -> Self {
        Self {
            tool_version: crate::VERSION.to_string(),
            suite: suite.to_string(),
            pass: false,
            verdict: String::new(),
            threshold: f64::NAN,
            statistics: BTreeMap::new(),
            proportions: BTreeMap::new(),
            plan: plan.clone(),
            notes: Vec::new(),
            runtime: Duration::ZERO,
            table: TrialTable::default(),
        }
    }

    pub(crate) fn stat(&mut self, key: &str, value: f64) {
        self.statistics.insert(key.to_string(), value);
    }

    pub(crate) fn proportion(&mut self, key: &str, value: Proportion) {
        self.proportions.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x}")
}
