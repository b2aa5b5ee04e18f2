mod args;

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use gammalasso_core::augment::{choose_p0, fit_augmented_with, AugmentConfig};
use gammalasso_core::gamma::{default_kappa, gamma_estimate, gamma_exact, GammaParams};
use gammalasso_core::io::{load_matrix, load_vector};
use gammalasso_core::lasso::{fit_with, SolverOptions};
use gammalasso_core::matrix::{coherence, coherence_sigma_bounds, normalize_columns, DesignMatrix};
use gammalasso_core::verify::{
    experiment_prediction_with, verify_cap_coherence, verify_dot_law, verify_gamma_bound, verify_norm_bound,
    verify_order_statistic, verify_submatrix_extraction, Design, ExperimentOptions, LambdaRule,
};
use gammalasso_core::{Error, Seed, SigmaSource, SuiteReport, TrialPlan, VERSION};

use args::{
    AuditArgs, Cli, Command, DesignKind, ExperimentArgs, FitArgs, FitAugArgs, GammaArgs, Output, Solver, Suite,
    VerifyArgs,
};

enum Failure {
    /// Bad flags or unreadable inputs: exit 2.
    Usage(String),
    /// The computation itself failed: exit 1.
    Runtime(String),
}

type Outcome = Result<bool, Failure>;

fn usage(flag: &str, value: impl Display, expected: &str) -> Failure {
    Failure::Usage(format!("invalid value {value} for --{flag}: expected {expected}"))
}

fn require(ok: bool, flag: &str, value: impl Display, expected: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(usage(flag, value, expected))
    }
}

fn flag_for(name: &str) -> String {
    match name {
        "rho_minus" => "rho".into(),
        "sigma_min_star" | "sigma_min_s" => "sigma-min-star".into(),
        "sigma_max_star" => "sigma-max-star".into(),
        other => other.replace('_', "-"),
    }
}

fn from_core(e: Error) -> Failure {
    match e {
        Error::OutOfRange { name, value, expected } => usage(&flag_for(name), value, expected),
        Error::ZeroColumn(_)
        | Error::NotNormalized
        | Error::TooFewColumns { .. }
        | Error::RowMismatch { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidMatrix(_)
        | Error::InvalidIndexSet(_)
        | Error::DimensionUnsupported(_)
        | Error::TargetTooSmall { .. }
        | Error::SparsityTooLarge { .. }
        | Error::TooLarge { .. }
        | Error::Csv(_)
        | Error::Io(_) => Failure::Usage(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

fn read_matrix(flag: &str, path: &Path) -> Result<DesignMatrix, Failure> {
    load_matrix(path).map_err(|e| Failure::Usage(format!("--{flag} {}: {e}", path.display())))
}

fn read_vector(flag: &str, path: &Path) -> Result<Vec<f64>, Failure> {
    load_vector(path).map_err(|e| Failure::Usage(format!("--{flag} {}: {e}", path.display())))
}

fn require_normalized(x: &DesignMatrix) -> Result<(), Failure> {
    require(
        x.is_normalized(),
        "matrix",
        "(columns not unit-norm)",
        "unit-norm columns; rescale them first",
    )
}

fn check_rho(rho: f64) -> Result<(), Failure> {
    require(rho > 0.0 && rho < 1.0, "rho", rho, "0 < rho < 1")
}

fn check_s(s: usize, n: usize, p: usize) -> Result<(), Failure> {
    let cap = n.min(p);
    require(s >= 1 && s <= cap, "s", s, &format!("1 <= s <= min(n, p) = {cap}"))
}

fn check_kappa(kappa: Option<f64>) -> Result<f64, Failure> {
    let k = kappa.unwrap_or_else(default_kappa);
    require(k.is_finite() && k >= 1.0, "kappa", k, "kappa >= 1")?;
    Ok(k)
}

fn check_positive(flag: &str, v: f64) -> Result<(), Failure> {
    require(v.is_finite() && v > 0.0, flag, v, "a finite value > 0")
}

fn check_count(flag: &str, v: usize) -> Result<(), Failure> {
    require(v >= 1, flag, v, "an integer >= 1")
}

fn solver_options(s: &Solver) -> Result<SolverOptions, Failure> {
    check_positive("tol", s.tol)?;
    check_count("max-sweeps", s.max_sweeps)?;
    Ok(SolverOptions::new(s.tol, s.max_sweeps))
}

fn emit(output: &Output, command: &str, config: &impl Serialize, result: Value) -> Result<(), Failure> {
    let doc = json!({
        "tool_version": VERSION,
        "command": command,
        "config": config,
        "result": result,
    });
    let text = serde_json::to_string_pretty(&doc).expect("reports serialize") + "\n";
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("--out {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Runtime(e.to_string())),
    }
}

fn converged(fit: &gammalasso_core::LassoFit, ok: bool) -> Value {
    let mut v = to_value(fit);
    v["converged"] = Value::Bool(ok);
    v
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn audit(a: &AuditArgs) -> Outcome {
    check_rho(a.rho)?;
    let kappa = check_kappa(a.kappa)?;
    check_count("directions", a.directions)?;
    let mut x = read_matrix("matrix", &a.matrix)?;
    let normalized_input = x.is_normalized();
    if a.normalize {
        x = normalize_columns(&x).map_err(from_core)?;
    }
    require_normalized(&x)?;
    let (n, p) = (x.rows(), x.cols());
    check_s(a.s, n, p)?;
    let nu = a.nu.unwrap_or(a.s as f64 / n as f64);
    check_positive("nu", nu)?;
    if let Some(eps) = a.epsilon {
        require(eps > 0.0 && eps <= 2.0, "epsilon", eps, "0 < epsilon <= 2")?;
        require(n <= 3, "epsilon", eps, "a matrix with at most 3 rows")?;
    }

    let mu = if p >= 2 { coherence(&x).map_err(from_core)? } else { 0.0 };
    let at_s = coherence_sigma_bounds(mu, a.s);
    let at_n = coherence_sigma_bounds(mu, n);
    let params = GammaParams::new(a.s, a.rho).map_err(from_core)?;
    let estimate = match gamma_estimate(&x, &params, a.directions, kappa, Seed(a.seed)) {
        Ok(e) => Some(e),
        Err(Error::AllDirectionsFailed(_)) => None,
        Err(e) => return Err(from_core(e)),
    };
    let bracket = match a.epsilon {
        Some(eps) => Some(gamma_exact(&x, &params, eps).map_err(from_core)?),
        None => None,
    };

    let mut notes = Vec::new();
    let gamma_used = match (&bracket, &estimate) {
        (Some(b), _) => {
            notes.push("condition evaluated at the upper end of the certified bracket".to_string());
            Some(b.hi)
        }
        (None, Some(e)) => {
            notes.push("condition evaluated at the Monte-Carlo estimate, which is lower-biased".to_string());
            Some(e.value)
        }
        (None, None) => None,
    };
    let rhs = a.rho * at_s.sigma_min / (n as f64 * at_n.sigma_max);
    let estimate_json = match &estimate {
        Some(e) => json!({
            "value": e.value,
            "directions": e.directions,
            "failed_directions": e.failed_directions.len(),
            "best": e.certificates.iter().max_by(|a, b| a.inner_value.total_cmp(&b.inner_value)),
            "notes": e.notes,
        }),
        None => json!({ "error": format!("extraction failed in all {} directions", a.directions) }),
    };
    let result = json!({
        "n": n,
        "p": p,
        "normalized_input": normalized_input,
        "coherence": mu,
        "sandwich_at_s": at_s,
        "sandwich_at_n": at_n,
        "gamma_estimate": estimate_json,
        "gamma_bracket": bracket,
        "condition_nu": {
            "nu": nu,
            "gamma": gamma_used,
            "lhs": gamma_used.map(|g| nu * g),
            "rhs": rhs,
            "holds": gamma_used.map(|g| nu * g <= rhs),
            "sigma_source": SigmaSource::CoherenceSandwich,
        },
        "notes": notes,
    });
    emit(&a.output, "audit", a, result)?;
    Ok(true)
}

fn fit(a: &FitArgs) -> Outcome {
    check_positive("lambda", a.lambda)?;
    let opts = solver_options(&a.solver)?;
    let x = read_matrix("matrix", &a.matrix)?;
    let y = read_vector("y", &a.y)?;
    require(y.len() == x.rows(), "y", y.len(), &format!("{} values (one per matrix row)", x.rows()))?;
    require_normalized(&x)?;
    match fit_with(&x, &y, a.lambda, &opts) {
        Ok(fit) => {
            emit(&a.output, "fit", a, converged(&fit, true))?;
            Ok(true)
        }
        Err(Error::NotConverged(fit)) => {
            eprintln!("error: solver did not converge (kkt residual {:.3e})", fit.kkt_residual);
            emit(&a.output, "fit", a, converged(&fit, false))?;
            Ok(false)
        }
        Err(e) => Err(from_core(e)),
    }
}

fn fit_aug(a: &FitAugArgs) -> Outcome {
    check_positive("lambda", a.lambda)?;
    check_rho(a.rho)?;
    require(a.l > 0.0 && a.l < 1.0, "L", a.l, "0 < L < 1")?;
    let opts = solver_options(&a.solver)?;
    let x = read_matrix("matrix", &a.matrix)?;
    let y = read_vector("y", &a.y)?;
    require(y.len() == x.rows(), "y", y.len(), &format!("{} values (one per matrix row)", x.rows()))?;
    require_normalized(&x)?;
    check_s(a.s, x.rows(), x.cols())?;
    let nu = a.nu.unwrap_or(a.s as f64 / x.rows() as f64);
    check_positive("nu", nu)?;

    let mut config = if x.cols() >= 2 {
        AugmentConfig::from_coherence(&x, a.s, a.l, nu, a.rho, Seed(a.seed)).map_err(from_core)?
    } else {
        AugmentConfig::new(a.l, nu, a.rho, 1.0, 1.0, Seed(a.seed)).map_err(from_core)?
    };
    if let Some(v) = a.sigma_min_star {
        config.sigma_min_star = v;
        config.sigma_source = SigmaSource::Supplied;
    }
    if let Some(v) = a.sigma_max_star {
        config.sigma_max_star = v;
        config.sigma_source = SigmaSource::Supplied;
    }
    config.p0_cap = a.p0_cap;
    config.p0_override = a.p0;
    config.validate().map_err(from_core)?;
    if a.p0.is_none() {
        choose_p0(&config, x.rows()).map_err(|e| match e {
            Error::Infeasible(msg) => Failure::Runtime(format!(
                "{msg}; supply --sigma-min-star/--sigma-max-star or force --p0"
            )),
            other => from_core(other),
        })?;
    }
    let threshold = config.threshold(x.rows());
    match fit_augmented_with(&x, &y, a.lambda, &config, &opts) {
        Ok(fit) => {
            let mut result = json!({ "augment": config, "threshold": threshold, "fit": fit });
            result["fit"]["fit"]["converged"] = Value::Bool(true);
            emit(&a.output, "fit-aug", a, result)?;
            Ok(true)
        }
        Err(Error::NotConverged(fit)) => {
            eprintln!("error: solver did not converge (kkt residual {:.3e})", fit.kkt_residual);
            let result = json!({ "augment": config, "threshold": threshold, "fit": converged(&fit, false) });
            emit(&a.output, "fit-aug", a, result)?;
            Ok(false)
        }
        Err(e) => Err(from_core(e)),
    }
}

fn gamma(a: &GammaArgs) -> Outcome {
    check_rho(a.rho)?;
    let kappa = check_kappa(a.kappa)?;
    check_count("directions", a.directions)?;
    let x = read_matrix("matrix", &a.matrix)?;
    require_normalized(&x)?;
    check_s(a.s, x.rows(), x.cols())?;
    let params = GammaParams::new(a.s, a.rho).map_err(from_core)?;
    let result = match a.epsilon {
        Some(eps) => {
            require(eps > 0.0 && eps <= 2.0, "epsilon", eps, "0 < epsilon <= 2")?;
            require(x.rows() <= 3, "epsilon", eps, "a matrix with at most 3 rows")?;
            to_value(&gamma_exact(&x, &params, eps).map_err(from_core)?)
        }
        None => to_value(&gamma_estimate(&x, &params, a.directions, kappa, Seed(a.seed)).map_err(from_core)?),
    };
    emit(&a.output, "gamma", a, result)?;
    Ok(true)
}

fn write_table(path: &Option<std::path::PathBuf>, report: &SuiteReport) -> Result<(), Failure> {
    if let Some(path) = path {
        let file = File::create(path).map_err(|e| Failure::Usage(format!("--csv {}: {e}", path.display())))?;
        report
            .table
            .write_csv(BufWriter::new(file))
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn finish_suite(report: &SuiteReport, started: Instant) {
    eprintln!(
        "{}: {} ({:.2?}) {}",
        report.suite,
        if report.pass { "PASS" } else { "FAIL" },
        started.elapsed(),
        report.verdict
    );
}

fn verify(a: &VerifyArgs) -> Outcome {
    check_count("n", a.n)?;
    check_count("trials", a.trials)?;
    check_rho(a.rho)?;
    check_count("s", a.s)?;
    let kappa = check_kappa(a.kappa)?;
    match a.suite {
        Suite::DotLaw => require(a.n >= 2, "n", a.n, "n >= 2 for the dot-law suite")?,
        Suite::OrderStat => {
            require(a.n >= 6, "n", a.n, "n >= 6 for the order-statistic suite")?;
            check_count("p0", a.p0)?;
        }
        Suite::Gamma | Suite::Extraction => {
            check_count("directions", a.directions)?;
            check_s(a.s, a.n, a.p0)?;
        }
        Suite::Coherence => require(a.p0 >= 2, "p0", a.p0, "p0 >= 2 for the coherence suite")?,
        Suite::Norm => check_count("p0", a.p0)?,
    }
    let mut plan = TrialPlan::new(a.n, a.p0, a.s, a.rho, a.trials, Seed(a.seed));
    plan.kappa = kappa;
    let started = Instant::now();
    let report = match a.suite {
        Suite::DotLaw => verify_dot_law(&plan),
        Suite::OrderStat => verify_order_statistic(&plan),
        Suite::Gamma => verify_gamma_bound(&plan, a.directions),
        Suite::Coherence => verify_cap_coherence(&plan),
        Suite::Norm => verify_norm_bound(&plan),
        Suite::Extraction => verify_submatrix_extraction(&plan),
    }
    .map_err(from_core)?;
    finish_suite(&report, started);
    write_table(&a.csv, &report)?;
    emit(&a.output, "verify", a, to_value(&report))?;
    Ok(report.pass)
}

fn experiment(a: &ExperimentArgs) -> Outcome {
    check_count("trials", a.trials)?;
    check_rho(a.rho)?;
    check_positive("alpha", a.alpha)?;
    require(a.sigma.is_finite() && a.sigma >= 0.0, "sigma", a.sigma, "a finite value >= 0")?;
    require(a.l > 0.0 && a.l < 1.0, "L", a.l, "0 < L < 1")?;
    check_count("directions", a.directions)?;
    let kappa = check_kappa(a.kappa)?;
    if let Some(l) = a.lambda {
        check_positive("lambda", l)?;
    }
    if let Some(nu) = a.nu {
        check_positive("nu", nu)?;
    }
    let (n, design) = match a.design {
        DesignKind::User => {
            let path = a
                .matrix
                .as_ref()
                .ok_or_else(|| Failure::Usage("--matrix is required with --design user".into()))?;
            let x = read_matrix("matrix", path)?;
            require_normalized(&x)?;
            (x.rows(), Design::User(x))
        }
        kind => {
            let n = a.n.ok_or_else(|| Failure::Usage("--n is required for generated designs".into()))?;
            let p = a.p.ok_or_else(|| Failure::Usage("--p is required for generated designs".into()))?;
            check_count("n", n)?;
            check_count("p", p)?;
            if kind == DesignKind::CorrelatedPairs {
                require(n >= 2, "n", n, "n >= 2 for correlated pairs")?;
                require(p % 2 == 0, "p", p, "an even number of columns for correlated pairs")?;
                (n, Design::CorrelatedPairs { p })
            } else {
                (n, Design::Sphere { p })
            }
        }
    };
    let p = match &design {
        Design::User(x) => x.cols(),
        Design::Sphere { p } | Design::CorrelatedPairs { p } => *p,
    };
    check_s(a.s, n, p)?;
    require(p >= 2, "p", p, "at least 2 columns")?;

    let rule = a.lambda.map_or(LambdaRule::Theorem, LambdaRule::Fixed);
    let mut opts = ExperimentOptions::new(design, a.s, a.sigma, a.alpha, rule);
    opts.directions = a.directions;
    opts.l = a.l;
    opts.p0_cap = a.p0_cap;
    opts.nu = a.nu;
    opts.solver = solver_options(&a.solver)?;
    let mut plan = TrialPlan::new(n, 0, a.s, a.rho, a.trials, Seed(a.seed));
    plan.kappa = kappa;

    let started = Instant::now();
    let report = experiment_prediction_with(&plan, &opts).map_err(from_core)?;
    finish_suite(&report, started);
    write_table(&a.csv, &report)?;
    emit(&a.output, "experiment", a, to_value(&report))?;
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Audit(a) => audit(a),
        Command::Fit(a) => fit(a),
        Command::FitAug(a) => fit_aug(a),
        Command::Gamma(a) => gamma(a),
        Command::Verify(a) => verify(a),
        Command::Experiment(a) => experiment(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
