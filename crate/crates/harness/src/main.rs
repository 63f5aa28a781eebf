//! Command-line entry point wiring the configuration layer to the
//! experiment drivers.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use bsfv::flux::SchemeKind;
use clap::{Args, Parser, Subcommand};

use bsfv_harness::config::{
    parse_mesh, parse_norms, parse_scheme, parse_sweep_values, RunConfig, StudySpec,
};
use bsfv_harness::run::{
    run_price, run_single, run_space_study, run_time_study, HarnessError, StudyOutcome,
};
use bsfv_harness::selftest;

/// Finite-volume pricer for the degenerate Black-Scholes equation.
#[derive(Parser)]
#[command(name = "bsfv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration flags shared by every solving subcommand.  Values are
/// resolved as defaults, then the configuration file, then these flags.
#[derive(Args, Debug, Default)]
struct CommonFlags {
    /// Key=value configuration file read before flag overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spatial scheme: tpfa or fitted.
    #[arg(long)]
    scheme: Option<String>,
    /// Interior node count.
    #[arg(long)]
    n: Option<usize>,
    /// Time step count.
    #[arg(long)]
    m: Option<usize>,
    /// Implicitness weight in [0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Risk-free interest rate.
    #[arg(long)]
    r: Option<f64>,
    /// Volatility.
    #[arg(long)]
    sigma: Option<f64>,
    /// Strike price.
    #[arg(long)]
    strike: Option<f64>,
    /// Time to maturity.
    #[arg(long)]
    maturity: Option<f64>,
    /// Right edge of the truncated domain.
    #[arg(long)]
    xmax: Option<f64>,
    /// Mesh family: uniform or geometric.
    #[arg(long)]
    mesh: Option<String>,
    /// Width ratio of a geometric mesh.
    #[arg(long)]
    ratio: Option<f64>,
    /// Comma-separated norms to report: l2, rel, max.
    #[arg(long)]
    norms: Option<String>,
    /// Directory receiving CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// March one configuration to maturity and write solution.csv.
    Solve {
        #[command(flatten)]
        flags: CommonFlags,
        /// Replace the numeric column by closed-form values; the error
        /// column must then vanish.
        #[arg(long)]
        self_check: bool,
    },
    /// Space-refinement error study at the configured fixed time step.
    ConvergeSpace {
        #[command(flatten)]
        flags: CommonFlags,
        /// Comma-separated interior node counts, strictly increasing.
        #[arg(long, default_value = "100,200,400")]
        values: String,
    },
    /// Time-refinement error study at a fixed mesh width.
    ConvergeTime {
        #[command(flatten)]
        flags: CommonFlags,
        /// Comma-separated time step counts, strictly increasing.
        #[arg(long, default_value = "100,200,400")]
        values: String,
        /// Fixed mesh width the sweep keeps.
        #[arg(long, default_value_t = 0.25)]
        h: f64,
    },
    /// Closed-form call price at one spot.
    Price {
        #[command(flatten)]
        flags: CommonFlags,
        /// Spot price to evaluate.
        #[arg(long)]
        spot: f64,
    },
    /// Run the oracle and property suites.
    SelfTest,
}

fn build_config(flags: &CommonFlags) -> Result<RunConfig, HarnessError> {
    let mut config = match &flags.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(scheme) = &flags.scheme {
        config.scheme = parse_scheme(scheme)?;
    }
    if let Some(n) = flags.n {
        config.n_interior = n;
    }
    if let Some(m) = flags.m {
        config.m_steps = m;
    }
    if let Some(theta) = flags.theta {
        config.theta = theta;
    }
    if let Some(r) = flags.r {
        config.r = r;
    }
    if let Some(sigma) = flags.sigma {
        config.sigma = sigma;
    }
    if let Some(strike) = flags.strike {
        config.strike = strike;
    }
    if let Some(maturity) = flags.maturity {
        config.maturity = maturity;
    }
    if let Some(xmax) = flags.xmax {
        config.x_max = xmax;
    }
    if let Some(mesh) = &flags.mesh {
        config.mesh = parse_mesh(mesh)?;
    }
    if let Some(ratio) = flags.ratio {
        config.ratio = ratio;
    }
    if let Some(norms) = &flags.norms {
        config.norms = parse_norms(norms)?;
    }
    if let Some(out) = &flags.out {
        config.out = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn study_schemes(flags: &CommonFlags) -> Result<Vec<SchemeKind>, HarnessError> {
    Ok(match &flags.scheme {
        Some(scheme) => vec![parse_scheme(scheme)?],
        None => vec![SchemeKind::Tpfa, SchemeKind::FittedTpfa],
    })
}

fn print_study(outcome: &StudyOutcome, axis: &str) {
    for row in &outcome.rows {
        let order = row
            .order_vs_prev
            .map(|o| format!("{o:.3}"))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{} {}={} step={:.6e} err_l2={:.6e} err_rel={:.6e} err_max={:.6e} order={}",
            row.scheme, axis, row.resolution, row.step, row.err_l2, row.err_rel, row.err_max,
            order
        );
    }
    println!("wrote {} in {} ms", outcome.csv_path.display(), outcome.runtime.as_millis());
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Solve { flags, self_check } => {
            let config = build_config(&flags)?;
            let outcome = run_single(&config, self_check)?;
            let norms: Vec<String> = outcome
                .norms
                .iter()
                .map(|(choice, value)| format!("err_{}={:.6e}", choice.key(), value))
                .collect();
            println!(
                "summary: {} max_abs={:.6e} runtime_ms={}",
                norms.join(" "),
                outcome.max_abs_error,
                outcome.runtime.as_millis()
            );
            println!("wrote {} ({} rows)", outcome.csv_path.display(), outcome.rows);
            if self_check {
                if outcome.max_abs_error != 0.0 {
                    return Err(HarnessError::SelfTest(format!(
                        "self-check column carries a nonzero error {:.3e}",
                        outcome.max_abs_error
                    )));
                }
                println!("self-check passed: abs_error column is identically zero");
            }
            Ok(())
        }
        Command::ConvergeSpace { flags, values } => {
            let config = build_config(&flags)?;
            let spec = StudySpec::space(parse_sweep_values(&values)?, study_schemes(&flags)?)?;
            let outcome = run_space_study(&config, &spec)?;
            print_study(&outcome, "n");
            Ok(())
        }
        Command::ConvergeTime { flags, values, h } => {
            let config = build_config(&flags)?;
            let spec = StudySpec::time(parse_sweep_values(&values)?, study_schemes(&flags)?, h)?;
            let outcome = run_time_study(&config, &spec)?;
            print_study(&outcome, "m");
            for (scheme, spread) in &outcome.spreads {
                println!("plateau: {} relative spread {:.3}% across the sweep", scheme, spread * 100.0);
            }
            Ok(())
        }
        Command::Price { flags, spot } => {
            let config = build_config(&flags)?;
            let price = run_price(&config, spot)?;
            println!("{price:.6}");
            Ok(())
        }
        Command::SelfTest => {
            let reports = selftest::run_all().map_err(HarnessError::SelfTest)?;
            for report in reports {
                println!("ok: {} ({})", report.name, report.detail);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
