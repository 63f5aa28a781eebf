//! Experiment drivers: single solves, the space and time error studies, and
//! the closed-form price endpoint, each with a deterministic CSV artifact.
//!
//! Single solves price with the production boundary data, whose right edge
//! carries the discounted-forward asymptote.  The convergence studies instead
//! pin the closed-form price trace at `x_max` so the sweep measures scheme
//! error rather than the domain-truncation floor that asymptote leaves
//! behind; the study CSVs stay comparable across the whole sweep.

use std::env;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use bsfv::analytics::{
    bs_call_price, error_vs_exact, observed_order, oracle_call_model, AnalyticsError, NormKind,
};
use bsfv::flux::SchemeKind;
use bsfv::mesh::{Mesh, MeshError};
use bsfv::model::{DivergenceModel, MarketData, ModelError};
use bsfv::stepper::{extract_prices, march, StepConfig, StepperError, StoragePolicy, TimeGrid};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{MeshFamily, NormChoice, RunConfig, StudySpec, SweepVariable};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "BSFV_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("solver: {0}")]
    Stepper(#[from] StepperError),
    #[error("analytics: {0}")]
    Analytics(#[from] AnalyticsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("study: {0}")]
    Study(String),
    #[error("self-test: {0}")]
    SelfTest(String),
}

impl HarnessError {
    /// Process exit code for this failure: 1 for validation problems the
    /// caller can fix in the configuration, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Formats a float with 17 significant digits, the fixed CSV convention.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn market_of(config: &RunConfig) -> Result<MarketData, ModelError> {
    MarketData::constant(config.r, config.sigma, config.strike, config.maturity, config.x_max)
}

fn mesh_of(config: &RunConfig, n_interior: usize) -> Result<Mesh, MeshError> {
    match config.mesh {
        MeshFamily::Uniform => Mesh::uniform(n_interior, config.x_max),
        MeshFamily::Geometric => Mesh::geometric(n_interior, config.x_max, config.ratio),
    }
}

/// Interior node count a time study uses for a fixed target width.
pub fn interior_nodes_for_width(x_max: f64, h: f64) -> usize {
    (x_max / h).round() as usize - 1
}

fn thread_cap_from(raw: Option<&str>) -> usize {
    raw.and_then(|text| text.trim().parse().ok()).unwrap_or(0)
}

fn study_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let threads = thread_cap_from(env::var(THREADS_ENV).ok().as_deref());
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))
}

fn write_lines(path: &PathBuf, header: &str, rows: &[String]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text)
}

/// Record of one solve: the artifact location, its row count, the requested
/// error norms, and the wall-clock runtime.
#[derive(Debug)]
pub struct SingleOutcome {
    pub csv_path: PathBuf,
    pub rows: usize,
    pub norms: Vec<(NormChoice, f64)>,
    pub max_abs_error: f64,
    pub runtime: Duration,
}

/// Marches one configuration to maturity and writes `solution.csv` with one
/// row per node, boundaries included.  With `self_check` the numeric column
/// is replaced by the closed-form values, so the error column must vanish.
pub fn run_single(config: &RunConfig, self_check: bool) -> Result<SingleOutcome, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let market = market_of(config)?;
    let model = DivergenceModel::european_call(market)?;
    let mesh = mesh_of(config, config.n_interior)?;
    let grid = TimeGrid::uniform(config.maturity, config.m_steps)?;
    let step = StepConfig::new(config.theta, config.scheme)?;
    let initial = model.initial_state(&mesh);
    let solution = march(initial, &mesh, &model, &grid, step, StoragePolicy::FinalOnly)?;
    let surface = extract_prices(&solution, &mesh, &model);

    let maturity = config.maturity;
    let market = model.market();
    let mut exact = Vec::with_capacity(mesh.nodes().len());
    for &x in mesh.nodes() {
        exact.push(bs_call_price(market, x, maturity)?);
    }
    let numeric: Vec<f64> = if self_check {
        exact.clone()
    } else {
        surface.final_row().to_vec()
    };

    let mut rows = Vec::with_capacity(numeric.len());
    let mut max_abs_error = 0.0f64;
    for ((&x, &v), &c) in mesh.nodes().iter().zip(&numeric).zip(&exact) {
        let err = (v - c).abs();
        max_abs_error = max_abs_error.max(err);
        rows.push(format!(
            "{},{},{},{}",
            fmt_float(x),
            fmt_float(v),
            fmt_float(c),
            fmt_float(err)
        ));
    }

    let interior = if self_check { &exact[1..=mesh.n_interior()] } else { surface.final_interior() };
    let mut norms = Vec::with_capacity(config.norms.len());
    for &choice in &config.norms {
        let kind = match choice {
            NormChoice::L2 => NormKind::DiscreteL2,
            NormChoice::Relative => NormKind::RelativeL2,
            NormChoice::Max => NormKind::MaxAbs,
        };
        norms.push((choice, error_vs_exact(interior, maturity, &mesh, market, kind, None)?));
    }

    let csv_path = config.out.join("solution.csv");
    write_lines(&csv_path, "x,V_numeric,V_exact,abs_error", &rows)?;
    Ok(SingleOutcome {
        csv_path,
        rows: rows.len(),
        norms,
        max_abs_error,
        runtime: started.elapsed(),
    })
}

/// One line of a study table.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub scheme: SchemeKind,
    pub resolution: usize,
    pub step: f64,
    pub err_l2: f64,
    pub err_rel: f64,
    pub err_max: f64,
    pub order_vs_prev: Option<f64>,
}

/// Result of a convergence study: the artifact location, its rows in sweep
/// order, and the per-scheme relative error spread (the plateau diagnostic
/// for time sweeps).
#[derive(Debug)]
pub struct StudyOutcome {
    pub csv_path: PathBuf,
    pub rows: Vec<StudyRow>,
    pub spreads: Vec<(SchemeKind, f64)>,
    pub runtime: Duration,
}

fn sweep_errors(
    config: &RunConfig,
    model: &DivergenceModel,
    n_interior: usize,
    m_steps: usize,
    scheme: SchemeKind,
) -> Result<(f64, f64, f64, f64), HarnessError> {
    let mesh = mesh_of(config, n_interior)?;
    let h = mesh
        .primal_lengths()
        .iter()
        .fold(0.0f64, |widest, &l| widest.max(l));
    let grid = TimeGrid::uniform(config.maturity, m_steps)?;
    let step = StepConfig::new(config.theta, scheme)?;
    let initial = model.initial_state(&mesh);
    let solution = march(initial, &mesh, model, &grid, step, StoragePolicy::FinalOnly)?;
    let surface = extract_prices(&solution, &mesh, model);
    let prices = surface.final_interior();
    let t = config.maturity;
    let market = model.market();
    let l2 = error_vs_exact(prices, t, &mesh, market, NormKind::DiscreteL2, None)?;
    let rel = error_vs_exact(prices, t, &mesh, market, NormKind::RelativeL2, None)?;
    let max = error_vs_exact(prices, t, &mesh, market, NormKind::MaxAbs, None)?;
    Ok((h, l2, rel, max))
}

fn run_study(config: &RunConfig, spec: &StudySpec) -> Result<StudyOutcome, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let market = market_of(config)?;
    let model = oracle_call_model(&market)?;
    let time_sweep = spec.sweep == SweepVariable::Time;
    let fixed_n = interior_nodes_for_width(config.x_max, spec.fixed_h);

    let tasks: Vec<(SchemeKind, usize)> = spec
        .schemes
        .iter()
        .flat_map(|&scheme| spec.values.iter().map(move |&v| (scheme, v)))
        .collect();
    let pool = study_pool()?;
    let solved: Vec<(f64, f64, f64, f64)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(scheme, value)| {
                let (n, m) = if time_sweep {
                    (fixed_n, value)
                } else {
                    (value, config.m_steps)
                };
                sweep_errors(config, &model, n, m, scheme)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let per_scheme = spec.values.len();
    let mut rows = Vec::with_capacity(tasks.len());
    let mut spreads = Vec::with_capacity(spec.schemes.len());
    for (s, &scheme) in spec.schemes.iter().enumerate() {
        let block = &solved[s * per_scheme..(s + 1) * per_scheme];
        let steps: Vec<f64> = if time_sweep {
            spec.values.iter().map(|&m| config.maturity / m as f64).collect()
        } else {
            block.iter().map(|&(h, ..)| h).collect()
        };
        let rels: Vec<f64> = block.iter().map(|&(_, _, rel, _)| rel).collect();
        let orders = observed_order(&rels, &steps)?;
        for (j, &(h, l2, rel, max)) in block.iter().enumerate() {
            rows.push(StudyRow {
                scheme,
                resolution: spec.values[j],
                step: if time_sweep { steps[j] } else { h },
                err_l2: l2,
                err_rel: rel,
                err_max: max,
                order_vs_prev: if j == 0 { None } else { Some(orders[j - 1]) },
            });
        }
        let widest = rels.iter().fold(f64::MIN, |a, &b| a.max(b));
        let narrowest = rels.iter().fold(f64::MAX, |a, &b| a.min(b));
        spreads.push((scheme, (widest - narrowest) / narrowest));
    }

    let (file, header) = if time_sweep {
        ("time_errors.csv", "scheme,m,dt,err_l2,err_rel,err_max,order_vs_prev")
    } else {
        ("space_errors.csv", "scheme,n,h,err_l2,err_rel,err_max,order_vs_prev")
    };
    let lines: Vec<String> = rows
        .iter()
        .map(|row| {
            format!(
                "{},{},{},{},{},{},{}",
                row.scheme,
                row.resolution,
                fmt_float(row.step),
                fmt_float(row.err_l2),
                fmt_float(row.err_rel),
                fmt_float(row.err_max),
                row.order_vs_prev.map(fmt_float).unwrap_or_default()
            )
        })
        .collect();
    let csv_path = config.out.join(file);
    write_lines(&csv_path, header, &lines)?;
    Ok(StudyOutcome { csv_path, rows, spreads, runtime: started.elapsed() })
}

/// Space-refinement study at the configuration's fixed time step.
pub fn run_space_study(config: &RunConfig, spec: &StudySpec) -> Result<StudyOutcome, HarnessError> {
    if spec.sweep != SweepVariable::Space {
        return Err(HarnessError::Study("expected a space sweep".to_string()));
    }
    run_study(config, spec)
}

/// Time-refinement study at the sweep's fixed mesh width.
pub fn run_time_study(config: &RunConfig, spec: &StudySpec) -> Result<StudyOutcome, HarnessError> {
    if spec.sweep != SweepVariable::Time {
        return Err(HarnessError::Study("expected a time sweep".to_string()));
    }
    run_study(config, spec)
}

/// Closed-form call price at one spot under the configuration's market data.
pub fn run_price(config: &RunConfig, spot: f64) -> Result<f64, HarnessError> {
    config.validate()?;
    let market = market_of(config)?;
    Ok(bs_call_price(&market, spot, config.maturity)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_carries_seventeen_significant_digits() {
        assert_eq!(fmt_float(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_float(300.0), "3.0000000000000000e2");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn fixed_width_resolves_to_interior_node_count() {
        assert_eq!(interior_nodes_for_width(300.0, 0.25), 1199);
        assert_eq!(interior_nodes_for_width(300.0, 3.0), 99);
    }

    #[test]
    fn thread_cap_parses_or_falls_back_to_default() {
        assert_eq!(thread_cap_from(None), 0);
        assert_eq!(thread_cap_from(Some("4")), 4);
        assert_eq!(thread_cap_from(Some(" 2 ")), 2);
        assert_eq!(thread_cap_from(Some("many")), 0);
    }

    #[test]
    fn self_check_solution_has_zero_error_column() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            n_interior: 24,
            m_steps: 10,
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let outcome = run_single(&config, true).unwrap();
        assert_eq!(outcome.rows, 26);
        assert_eq!(outcome.max_abs_error, 0.0);
        let text = fs::read_to_string(&outcome.csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,V_numeric,V_exact,abs_error");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.0000000000000000e0,"));
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("3.0000000000000000e2,"));
        assert!(text.lines().skip(1).all(|l| l.ends_with(",0.0000000000000000e0")));
    }

    #[test]
    fn real_solve_reports_each_requested_norm() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            n_interior: 24,
            m_steps: 10,
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let outcome = run_single(&config, false).unwrap();
        assert_eq!(outcome.norms.len(), 3);
        assert!(outcome.norms.iter().all(|&(_, v)| v.is_finite() && v > 0.0));
        assert!(outcome.max_abs_error > 0.0);
    }

    #[test]
    fn space_study_emits_orders_after_the_first_row() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            m_steps: 20,
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let spec = StudySpec::space(vec![20, 40], vec![SchemeKind::FittedTpfa]).unwrap();
        let outcome = run_space_study(&config, &spec).unwrap();
        assert_eq!(outcome.rows.len(), 2);
        assert!(outcome.rows[0].order_vs_prev.is_none());
        assert!(outcome.rows[1].order_vs_prev.is_some());
        let text = fs::read_to_string(&outcome.csv_path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "scheme,n,h,err_l2,err_rel,err_max,order_vs_prev"
        );
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("fitted,20,"));
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn time_study_reports_a_plateau_spread_per_scheme() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig { out: dir.path().to_path_buf(), ..RunConfig::default() };
        let spec =
            StudySpec::time(vec![8, 16], vec![SchemeKind::Tpfa, SchemeKind::FittedTpfa], 10.0)
                .unwrap();
        let outcome = run_time_study(&config, &spec).unwrap();
        assert_eq!(outcome.rows.len(), 4);
        assert_eq!(outcome.spreads.len(), 2);
        assert!(outcome.spreads.iter().all(|&(_, s)| s.is_finite() && s >= 0.0));
        let text = fs::read_to_string(&outcome.csv_path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "scheme,m,dt,err_l2,err_rel,err_max,order_vs_prev"
        );
        assert!(text.lines().nth(1).unwrap().starts_with("tpfa,8,"));
    }

    #[test]
    fn study_rejects_a_mismatched_sweep_axis() {
        let config = RunConfig::default();
        let spec = StudySpec::space(vec![20, 40], vec![SchemeKind::Tpfa]).unwrap();
        assert!(matches!(run_time_study(&config, &spec), Err(HarnessError::Study(_))));
    }

    #[test]
    fn repeated_runs_write_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let mut config =
            RunConfig { m_steps: 20, out: dir.path().join("a"), ..RunConfig::default() };
        let spec = StudySpec::space(vec![20, 40], vec![SchemeKind::Tpfa]).unwrap();
        let first = run_space_study(&config, &spec).unwrap();
        config.out = dir.path().join("b");
        let second = run_space_study(&config, &spec).unwrap();
        let left = fs::read(&first.csv_path).unwrap();
        let right = fs::read(&second.csv_path).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn price_endpoint_matches_the_reference_value() {
        let config = RunConfig::default();
        let price = run_price(&config, 100.0).unwrap();
        assert!((price - 23.9266).abs() < 1e-3);
        assert_eq!(run_price(&config, 0.0).unwrap(), 0.0);
    }
}
