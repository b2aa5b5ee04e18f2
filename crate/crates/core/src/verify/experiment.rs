use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{fmt, SuiteReport, TrialPlan, TrialTable};
use crate::augment::{
    augmented_prediction_bound, augmented_prediction_error, choose_p0, fit_augmented_with, lambda_min_augmented,
    restricted_prediction_error, sphere_gamma_bound, AugmentConfig, DEFAULT_L, DEFAULT_P0_CAP,
};
use crate::bounds::{lambda_min_theorem, prediction_bound, support_term, SigmaSource, TheoremInputs};
use crate::error::{Error, Result};
use crate::gamma::{gamma_estimate, GammaParams};
use crate::lasso::{fit_with, SolverOptions};
use crate::matrix::{coherence, coherence_sigma_bounds, dot, norm2, submatrix_extremes, DesignMatrix, IndexSet};
use crate::sphere::{sample_sphere_matrix_with, sample_unit_vector, Seed};
use crate::stats::{clopper_pearson, mean};

/// Correlation between the two columns of each pair in [`correlated_pairs_design`].
pub const PAIR_CORRELATION: f64 = 0.999;

#[derive(Clone, Debug, PartialEq)]
pub enum Design {
    /// Fresh `n × p` sphere matrix per trial.
    Sphere { p: usize },
    /// Fresh [`correlated_pairs_design`] per trial.
    CorrelatedPairs { p: usize },
    /// A fixed design shared by all trials.
    User(DesignMatrix),
}

impl Design {
    fn name(&self) -> &'static str {
        match self {
            Design::Sphere { .. } => "sphere",
            Design::CorrelatedPairs { .. } => "correlated-pairs",
            Design::User(_) => "user-matrix",
        }
    }

    fn cols(&self) -> usize {
        match self {
            Design::Sphere { p } | Design::CorrelatedPairs { p } => *p,
            Design::User(x) => x.cols(),
        }
    }

    fn draw(&self, n: usize, seed: Seed) -> Result<DesignMatrix> {
        match self {
            Design::Sphere { p } => sample_sphere_matrix_with(n, *p, &mut seed.rng()),
            Design::CorrelatedPairs { p } => correlated_pairs_design(n, *p, seed),
            Design::User(x) => Ok(x.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaRule {
    /// `λ_min` from the theorem, plain and augmented separately.
    Theorem,
    Fixed(f64),
}

/// Source of `σ_min(X_S)` and `σ*_max` fed to the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaProxy {
    /// Exact `σ_min(X_S)` on the true support; `σ*_max = min(1 + μ√n, ‖X‖)`.
    Exact,
    /// Coherence sandwich for both.
    Coherence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOptions {
    pub design: Design,
    pub s: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub lambda_rule: LambdaRule,
    /// Directions per γ estimate of the plain design.
    pub directions: usize,
    pub l: f64,
    pub p0_cap: usize,
    /// Sparsity budget ratio; `None` means `s / n`, so `νn = s`.
    pub nu: Option<f64>,
    pub sigma_proxy: SigmaProxy,
    pub solver: SolverOptions,
}

impl ExperimentOptions {
    pub fn new(design: Design, s: usize, sigma: f64, alpha: f64, lambda_rule: LambdaRule) -> Self {
        Self {
            design,
            s,
            sigma,
            alpha,
            lambda_rule,
            directions: 200,
            l: DEFAULT_L,
            p0_cap: DEFAULT_P0_CAP,
            nu: None,
            sigma_proxy: SigmaProxy::Exact,
            solver: SolverOptions::default(),
        }
    }
}

/// `p/2` pairs of unit columns with inner product exactly [`PAIR_CORRELATION`].
pub fn correlated_pairs_design(n: usize, p: usize, seed: Seed) -> Result<DesignMatrix> {
    if n < 2 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            expected: "n >= 2",
        });
    }
    if p == 0 || !p.is_multiple_of(2) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p as f64,
            expected: "even and >= 2",
        });
    }
    let mut rng = seed.rng();
    let c = PAIR_CORRELATION;
    let mut cols = Vec::with_capacity(p);
    for _ in 0..p / 2 {
        let u = sample_unit_vector(n, &mut rng);
        let w = loop {
            let mut w = sample_unit_vector(n, &mut rng);
            let t = dot(&w, &u);
            for (a, b) in w.iter_mut().zip(&u) {
                *a -= t * b;
            }
            let norm = norm2(&w);
            if norm > 1e-8 {
                break w.into_iter().map(|a| a / norm).collect::<Vec<_>>();
            }
        };
        let partner: Vec<f64> = u.iter().zip(&w).map(|(a, b)| c * a + (1.0 - c * c).sqrt() * b).collect();
        cols.push(u);
        cols.push(partner);
    }
    DesignMatrix::from_columns(&cols)
}

pub fn experiment_prediction(
    plan: &TrialPlan,
    design: Design,
    s: usize,
    sigma: f64,
    alpha: f64,
    lambda_rule: LambdaRule,
) -> Result<SuiteReport> {
    experiment_prediction_with(plan, &ExperimentOptions::new(design, s, sigma, alpha, lambda_rule))
}

#[derive(Clone, Debug)]
struct Row {
    p0: usize,
    gamma_hat: f64,
    sigma_min_s: f64,
    sigma_max_star: f64,
    lambda_plain: f64,
    error_plain: f64,
    bound_plain: f64,
    flag_plain: bool,
    lambda_aug: f64,
    error_aug: f64,
    error_aug_restricted: f64,
    bound_aug: f64,
    flag_aug: bool,
    notes: Vec<String>,
}

impl Row {
    fn holds_plain(&self) -> bool {
        self.error_plain <= self.bound_plain
    }

    fn holds_aug(&self) -> bool {
        self.error_aug <= self.bound_aug
    }
}

/// Smallest positive λ used when a rule yields zero (noiseless data).
const LAMBDA_FLOOR: f64 = 1e-12;

fn resolve_lambda(rule: LambdaRule, theorem: Option<f64>, fallback: f64, notes: &mut Vec<String>) -> f64 {
    let lambda = match rule {
        LambdaRule::Fixed(l) => l,
        LambdaRule::Theorem => theorem.unwrap_or_else(|| {
            notes.push("B undefined; lambda set to sigma*sqrt((2a+1)log p + log 2)".into());
            fallback
        }),
    };
    lambda.max(LAMBDA_FLOOR)
}

fn half_sq_error(x: &DesignMatrix, beta_hat: &[f64], beta: &[f64]) -> f64 {
    let diff: Vec<f64> = beta_hat.iter().zip(beta).map(|(a, b)| a - b).collect();
    let e = x.mul_vec(&diff);
    0.5 * dot(&e, &e)
}

fn run_trial(plan: &TrialPlan, opts: &ExperimentOptions, seed: Seed) -> Result<Row> {
    let n = plan.n;
    let x = opts.design.draw(n, seed.derive(0))?;
    let p = x.cols();
    let s = opts.s;
    let mut notes = Vec::new();

    let mut rng = seed.derive(1).rng();
    let support = IndexSet::from_unsorted(sample(&mut rng, p, s).into_vec());
    let mut beta = vec![0.0; p];
    for (k, &j) in support.iter().enumerate() {
        beta[j] = if k % 2 == 0 { 1.0 } else { -1.0 };
    }
    let mut y = x.mul_vec(&beta);
    for yi in y.iter_mut() {
        *yi += opts.sigma * rng.sample::<f64, _>(StandardNormal);
    }

    let mu = coherence(&x)?;
    let (sigma_min_s, sigma_max_star, source) = match opts.sigma_proxy {
        SigmaProxy::Exact => (
            submatrix_extremes(&x, &support)?.sigma_min,
            (1.0 + mu * (n as f64).sqrt()).min(x.spectral_norm()),
            SigmaSource::ExactMinSpectralMax,
        ),
        SigmaProxy::Coherence => (
            coherence_sigma_bounds(mu, s).sigma_min,
            coherence_sigma_bounds(mu, n).sigma_max,
            SigmaSource::CoherenceSandwich,
        ),
    };
    let nu = opts.nu.unwrap_or(s as f64 / n as f64);

    let params = GammaParams::new(s, plan.rho_minus)?;
    let gamma_hat = match gamma_estimate(&x, &params, opts.directions, plan.kappa, seed.derive(2)) {
        Ok(est) => est.value,
        Err(Error::AllDirectionsFailed(_)) => {
            notes.push("gamma estimate failed on every direction".into());
            f64::NAN
        }
        Err(e) => return Err(e),
    };

    // Plain LASSO.
    let inputs = TheoremInputs {
        sigma: opts.sigma,
        alpha: opts.alpha,
        p,
        nu,
        n,
        rho_minus: plan.rho_minus,
        sigma_min_s,
        sigma_max_star,
        gamma: if gamma_hat.is_finite() { gamma_hat } else { 0.0 },
        sigma_source: source,
    };
    let report = lambda_min_theorem(&inputs)?;
    let flag_plain = gamma_hat.is_finite() && report.precondition_nu_ok && sigma_min_s > 0.0;
    let lambda_plain = resolve_lambda(
        opts.lambda_rule,
        report.lambda_min,
        opts.sigma * support_term(opts.alpha, p),
        &mut notes,
    );
    let plain = fit_with(&x, &y, lambda_plain, &opts.solver).or_else(|e| match e {
        Error::NotConverged(fit) => {
            notes.push("plain fit hit the sweep cap".into());
            Ok(*fit)
        }
        e => Err(e),
    })?;
    let error_plain = half_sq_error(&x, &plain.beta_hat, &beta);
    let bound_plain = prediction_bound(&inputs, lambda_plain, s).unwrap_or(f64::NAN);

    // Augmented LASSO.
    let mut row = Row {
        p0: 0,
        gamma_hat,
        sigma_min_s,
        sigma_max_star,
        lambda_plain,
        error_plain,
        bound_plain,
        flag_plain,
        lambda_aug: f64::NAN,
        error_aug: f64::NAN,
        error_aug_restricted: f64::NAN,
        bound_aug: f64::NAN,
        flag_aug: false,
        notes,
    };
    let config = AugmentConfig {
        l: opts.l,
        nu,
        rho_minus: plan.rho_minus,
        sigma_min_star: sigma_min_s,
        sigma_max_star,
        sigma_source: source,
        p0_cap: opts.p0_cap,
        seed: seed.derive(3),
        p0_override: None,
    };
    let p0 = match choose_p0(&config, n) {
        Ok(p0) => p0,
        Err(Error::Infeasible(msg)) => {
            row.notes.push(format!("augmentation infeasible: {msg}"));
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    row.p0 = p0;
    let aug_report = lambda_min_augmented(&config, sphere_gamma_bound(p0), n, p, p0, opts.sigma, opts.alpha)?;
    row.flag_aug = aug_report.precondition_nu_ok && sigma_min_s > 0.0;
    row.lambda_aug = resolve_lambda(
        opts.lambda_rule,
        aug_report.lambda_min,
        opts.sigma * support_term(opts.alpha, p + p0),
        &mut row.notes,
    );
    let config = AugmentConfig {
        p0_override: Some(p0),
        ..config
    };
    let aug = match fit_augmented_with(&x, &y, row.lambda_aug, &config, &opts.solver) {
        Ok(a) => a,
        Err(Error::NotConverged(_)) => {
            row.notes.push("augmented fit hit the sweep cap".into());
            row.flag_aug = false;
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let mut padded = beta.clone();
    padded.resize(p + p0, 0.0);
    row.error_aug = augmented_prediction_error(&aug.design(&x)?, &aug.fit.beta_hat, &padded)?;
    row.error_aug_restricted = restricted_prediction_error(&x, &aug.x0, &aug.beta_x, &aug.beta_0, &beta)?;
    row.bound_aug =
        augmented_prediction_bound(&config, n, p, p0, opts.sigma, opts.alpha, row.lambda_aug, s).unwrap_or(f64::NAN);
    Ok(row)
}

struct Variant {
    flagged: usize,
    holds: usize,
    required: f64,
}

/// Plain and augmented LASSO on seeded designs, against their prediction bounds.
///
/// For each variant, trials whose precondition flags hold must satisfy the
/// bound in at least `1 − 3p^{−α} − slack` of cases; the requirement is
/// rejected only when the upper confidence limit of the observed fraction
/// falls below it. A variant with no flagged trial is reported as
/// "preconditions unmet".
pub fn experiment_prediction_with(plan: &TrialPlan, opts: &ExperimentOptions) -> Result<SuiteReport> {
    plan.check()?;
    let started = Instant::now();
    let p = opts.design.cols();
    if opts.s == 0 || opts.s > plan.n.min(p) {
        return Err(Error::OutOfRange {
            name: "s",
            value: opts.s as f64,
            expected: "1 <= s <= min(n, p)",
        });
    }
    if let Design::User(x) = &opts.design {
        if x.rows() != plan.n {
            return Err(Error::DimensionMismatch {
                expected: plan.n,
                got: x.rows(),
            });
        }
        x.require_normalized()?;
    }
    if !(opts.sigma >= 0.0 && opts.sigma.is_finite()) {
        return Err(Error::OutOfRange {
            name: "sigma",
            value: opts.sigma,
            expected: ">= 0",
        });
    }
    if let LambdaRule::Fixed(l) = opts.lambda_rule {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: l,
                expected: "> 0",
            });
        }
    }

    let rows: Vec<Row> = plan
        .run(|_, seed| run_trial(plan, opts, seed))
        .into_iter()
        .collect::<Result<_>>()?;

    let slack = plan.thresholds.slack;
    let required = |cols: usize| ((1.0 - 3.0 * (cols as f64).powf(-opts.alpha)).max(0.0) - slack).max(0.0);
    let plain = Variant {
        flagged: rows.iter().filter(|r| r.flag_plain).count(),
        holds: rows.iter().filter(|r| r.flag_plain && r.holds_plain()).count(),
        required: required(p),
    };
    let min_p0 = rows.iter().filter(|r| r.flag_aug).map(|r| r.p0).min().unwrap_or(0);
    let aug = Variant {
        flagged: rows.iter().filter(|r| r.flag_aug).count(),
        holds: rows.iter().filter(|r| r.flag_aug && r.holds_aug()).count(),
        required: required(p + min_p0),
    };

    let mut r = SuiteReport::new("experiment", plan);
    let conf = plan.thresholds.confidence;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, v) in [("plain", &plain), ("augmented", &aug)] {
        r.stat(&format!("{name}_flagged_trials"), v.flagged as f64);
        r.stat(&format!("{name}_required_fraction"), v.required);
        if v.flagged == 0 {
            parts.push(format!("{name}: preconditions unmet in all {} trials", rows.len()));
            continue;
        }
        let prop = clopper_pearson(v.holds, v.flagged, conf);
        r.proportion(&format!("{name}_bound_holds"), prop);
        let ok = prop.upper >= v.required;
        pass &= ok;
        parts.push(format!(
            "{name}: bound holds in {}/{} flagged trials (required {:.3})",
            v.holds, v.flagged, v.required
        ));
    }

    let finite_mean = |f: &dyn Fn(&Row) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            mean(&v)
        }
    };
    r.stat("p", p as f64);
    r.stat("s", opts.s as f64);
    r.stat("sigma", opts.sigma);
    r.stat("alpha", opts.alpha);
    r.stat("nu", opts.nu.unwrap_or(opts.s as f64 / plan.n as f64));
    r.stat("mean_error_plain", finite_mean(&|r| r.error_plain));
    r.stat("mean_bound_plain", finite_mean(&|r| r.bound_plain));
    r.stat("mean_error_aug", finite_mean(&|r| r.error_aug));
    r.stat("mean_bound_aug", finite_mean(&|r| r.bound_aug));
    r.stat("mean_gamma_hat", finite_mean(&|r| r.gamma_hat));
    r.stat("mean_p0", finite_mean(&|r| r.p0 as f64));
    r.stat(
        "max_error_form_gap",
        rows.iter()
            .map(|r| (r.error_aug - r.error_aug_restricted).abs())
            .filter(|g| g.is_finite())
            .fold(0.0, f64::max),
    );
    r.threshold = plain.required.min(aug.required);
    r.pass = pass;
    r.verdict = if plain.flagged == 0 && aug.flagged == 0 {
        format!("preconditions unmet: no trial satisfies the bound preconditions ({})", parts.join("; "))
    } else {
        parts.join("; ")
    };
    r.notes.push(format!("design: {}", opts.design.name()));
    r.notes.push(
        "gamma_hat maximizes over sampled directions, so the plain precondition flag can be optimistic".into(),
    );
    if opts.sigma == 0.0 {
        r.notes.push(format!("sigma = 0: lambda clamped to {LAMBDA_FLOOR:e}"));
    }
    let mut extra: Vec<String> = rows.iter().flat_map(|r| r.notes.iter().cloned()).collect();
    extra.sort();
    extra.dedup();
    r.notes.extend(extra);

    let mut t = TrialTable::new(&[
        "trial",
        "p0",
        "lambda_plain",
        "error_plain",
        "bound_plain",
        "flag_plain",
        "holds_plain",
        "lambda_aug",
        "error_aug",
        "error_aug_restricted",
        "bound_aug",
        "flag_aug",
        "holds_aug",
        "gamma_hat",
        "sigma_min_s",
        "sigma_max_star",
    ]);
    for (k, row) in rows.iter().enumerate() {
        t.push(vec![
            k.to_string(),
            row.p0.to_string(),
            fmt(row.lambda_plain),
            fmt(row.error_plain),
            fmt(row.bound_plain),
            row.flag_plain.to_string(),
            row.holds_plain().to_string(),
            fmt(row.lambda_aug),
            fmt(row.error_aug),
            fmt(row.error_aug_restricted),
            fmt(row.bound_aug),
            row.flag_aug.to_string(),
            row.holds_aug().to_string(),
            fmt(row.gamma_hat),
            fmt(row.sigma_min_s),
            fmt(row.sigma_max_star),
        ]);
    }
    r.table = t;
    r.runtime = started.elapsed();
    Ok(r)
}
