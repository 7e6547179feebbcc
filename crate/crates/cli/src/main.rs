use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use steinrule::analysis::{bootstrap_efficiency, correlation_table, load_csv};
use steinrule::model::{estimate_pair, Competitor};
use steinrule::risk::{run_bound_suite, SuiteConfig};
use steinrule::shrinkage::{combine, spsl_constant, EstimatorSpec, HFunction, ShrinkageSpec};
use steinrule::simulation::{run_sweep, SimConfig};

#[derive(Parser)]
#[command(name = "steinrule", version, about = "Stein-rule combinations of regression estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo RMSE sweep described by a JSON config and write CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 1 if any SPSL row has RMSE >= 1.
        #[arg(long)]
        check_dominance: bool,
    },
    /// Check the risk inequalities by Monte Carlo and print one line per check.
    VerifyBounds {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Degrees of freedom of the t-type elliptical law to check.
        #[arg(long, value_name = "NU")]
        elliptical: Option<f64>,
        /// Rank of the restriction used for the singular-case checks.
        #[arg(long, value_name = "Q")]
        singular: Option<usize>,
        /// Random trials per matrix size for the quadratic-form checks.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Allow k <= 2; divergent moments are reported but not asserted.
        #[arg(long)]
        allow_divergent: bool,
    },
    /// Correlations, point estimates and bootstrap efficiency for a dataset.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        #[arg(long, value_delimiter = ',', required = true)]
        covariates: Vec<String>,
        #[arg(long, default_value_t = 5000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit one member of the estimator class on a dataset.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        #[arg(long, value_delimiter = ',', required = true)]
        covariates: Vec<String>,
        /// Weight function: inverse-sq, smooth-inverse:<p>, zero or one.
        #[arg(long, default_value = "inverse-sq")]
        h: String,
        /// Class coefficient c, or "auto" for the data-driven SPSL value.
        #[arg(long, default_value = "auto")]
        c: String,
    },
}

/// Error that should map to exit status 1 rather than 2.
#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<CheckFailed>() => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            check_dominance,
        } => simulate(&config, &out, check_dominance),
        Command::VerifyBounds {
            k,
            samples,
            seed,
            elliptical,
            singular,
            trials,
            allow_divergent,
        } => {
            let mut cfg = SuiteConfig::new(k, samples, seed);
            if let Some(nu) = elliptical {
                cfg.nu = nu;
            }
            cfg.singular_q = singular;
            cfg.courant_trials = trials;
            cfg.allow_divergent = allow_divergent;
            verify_bounds(&cfg)
        }
        Command::Analyze {
            data,
            response,
            covariates,
            bootstrap,
            seed,
            report,
        } => analyze(&data, &response, &covariates, bootstrap, seed, report.as_deref()),
        Command::Estimate {
            data,
            response,
            covariates,
            h,
            c,
        } => estimate(&data, &response, &covariates, &h, &c),
    }
}

fn simulate(config: &std::path::Path, out: &std::path::Path, check_dominance: bool) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = SimConfig::from_json(&text).with_context(|| format!("parsing {}", config.display()))?;
    let result = run_sweep(&cfg)?;
    let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    result.write_csv(file)?;
    let meta = out.with_extension("meta.json");
    fs::write(&meta, serde_json::to_string_pretty(&result.metadata)?)
        .with_context(|| format!("writing {}", meta.display()))?;
    eprintln!(
        "wrote {} rows ({} cells) to {}",
        result.rows.len(),
        cfg.cell_count(),
        out.display()
    );
    if check_dominance {
        let failures: Vec<_> = result
            .rows
            .iter()
            .filter(|r| r.estimator == "SPSL" && r.rmse >= 1.0)
            .map(|r| format!("cell {} (sigma={}, beta_norm={}): rmse={:.4}", r.cell_id, r.sigma, r.beta_norm, r.rmse))
            .collect();
        if !failures.is_empty() {
            return Err(CheckFailed(format!("dominance failed in {} cells:\n{}", failures.len(), failures.join("\n"))).into());
        }
    }
    Ok(())
}

fn verify_bounds(cfg: &SuiteConfig) -> Result<()> {
    let reports = run_bound_suite(cfg)?;
    let mut failed = 0;
    for r in &reports {
        println!("{}", r.line());
        if !r.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CheckFailed(format!("{failed} of {} checks failed", reports.len())).into());
    }
    eprintln!("all {} checks hold", reports.len());
    Ok(())
}

fn analyze(
    data: &std::path::Path,
    response: &str,
    covariates: &[String],
    bootstrap: usize,
    seed: u64,
    report_path: Option<&std::path::Path>,
) -> Result<()> {
    let ds = load_csv(data).with_context(|| format!("loading {}", data.display()))?;
    println!("{} rows, numeric columns: {}", ds.n(), ds.columns().join(", "));

    let table = correlation_table(&ds)?;
    println!("\ncorrelation with {response} (r, p):");
    for name in &table.names {
        if name != response {
            let (r, p) = table.get(response, name)?;
            println!("  {name:>12}  {r:>8.4}  {p:>8.4}");
        }
    }

    let report = bootstrap_efficiency(&ds, response, covariates, &[EstimatorSpec::Spsl], bootstrap, seed)?;
    println!("\npoint estimates:");
    print!("  {:>12}", "");
    for est in report.point_estimates.keys() {
        print!("  {est:>10}");
    }
    println!();
    for (i, coef) in report.coefficients.iter().enumerate() {
        print!("  {coef:>12}");
        for values in report.point_estimates.values() {
            print!("  {:>10.4}", values[i]);
        }
        println!();
    }
    println!("\nrelative efficiency ({} bootstrap replications, seed {}):", report.bootstrap_replications, seed);
    for (est, eff) in &report.relative_efficiency {
        println!("  {est:>12}  {eff:.4}  (se {:.4})", report.relative_efficiency_se[est]);
    }
    if bootstrap < 1000 {
        println!("note: with B = {bootstrap} the efficiency standard errors are wide");
    }
    if let Some(path) = report_path {
        fs::write(path, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn parse_h(text: &str) -> Result<HFunction> {
    Ok(match text {
        "inverse-sq" => HFunction::inverse_sq_norm(),
        "zero" => HFunction::zero(),
        "one" => HFunction::one(),
        other => match other.strip_prefix("smooth-inverse:") {
            Some(p) => HFunction::smooth_inverse(p.parse().with_context(|| format!("bad exponent {p:?}"))?)?,
            None => bail!("unknown weight function {other:?}; use inverse-sq, smooth-inverse:<p>, zero or one"),
        },
    })
}

fn estimate(
    data: &std::path::Path,
    response: &str,
    covariates: &[String],
    h: &str,
    c: &str,
) -> Result<()> {
    let h = parse_h(h)?;
    let ds = load_csv(data).with_context(|| format!("loading {}", data.display()))?;
    let model = ds.model(response, covariates)?;
    let pair = estimate_pair(&model, &Competitor::Diag)?;
    let c = if c == "auto" {
        -spsl_constant(&model, &Competitor::Diag)?
    } else {
        c.parse::<f64>().with_context(|| format!("--c must be a number or auto, got {c:?}"))?
    };
    let out = combine(&pair, &ShrinkageSpec::new(h, c)?);
    println!("c = {c:.6}");
    let mut names = vec!["intercept".to_string()];
    names.extend(covariates.iter().cloned());
    for (name, v) in names.iter().zip(out.estimate.iter()) {
        println!("{name:>12}  {v:.6}");
    }
    if out.degenerate {
        eprintln!("note: the two base estimates coincide; returned least squares");
    }
    Ok(())
}
