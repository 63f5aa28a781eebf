//! Oracle and property suites behind the `self-test` subcommand: the
//! closed-form price against an independent quadrature build of the normal
//! CDF, the tridiagonal solver against dense elimination, and zero-source
//! energy decay across the stable theta range.

use bsfv::analytics::{bs_call_price, discrete_norm, NormKind};
use bsfv::flux::SchemeKind;
use bsfv::mesh::Mesh;
use bsfv::model::{BoundaryData, DivergenceModel, MarketData};
use bsfv::oracles::{normal_cdf_quadrature, solve_dense};
use bsfv::stepper::{march, thomas_solve, StepConfig, StoragePolicy, TimeGrid};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Outcome of one passing suite, with a human-readable measurement.
#[derive(Debug)]
pub struct CheckReport {
    pub name: &'static str,
    pub detail: String,
}

const PRICE_ANCHOR: f64 = 23.9266;

/// Closed-form price at spot 100 under the reference market against the
/// quadrature-built normal CDF.
pub fn price_oracle_check() -> Result<CheckReport, String> {
    let market = MarketData::constant(0.1, 0.5, 100.0, 1.0, 300.0)
        .map_err(|e| format!("market construction failed: {e}"))?;
    let fast = bs_call_price(&market, 100.0, 1.0)
        .map_err(|e| format!("closed-form price failed: {e}"))?;

    let (spot, strike, r, sigma, t) = (100.0f64, 100.0f64, 0.1f64, 0.5f64, 1.0f64);
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * t) / (sigma * t.sqrt());
    let d2 = d1 - sigma * t.sqrt();
    let quad =
        spot * normal_cdf_quadrature(d1) - strike * (-r * t).exp() * normal_cdf_quadrature(d2);

    if (fast - PRICE_ANCHOR).abs() > 1e-3 {
        return Err(format!("price {fast:.6} misses the anchor {PRICE_ANCHOR} by more than 1e-3"));
    }
    if (fast - quad).abs() > 1e-9 {
        return Err(format!("price {fast:.12} disagrees with quadrature {quad:.12}"));
    }
    Ok(CheckReport {
        name: "price oracle",
        detail: format!("closed form {fast:.6}, quadrature {quad:.6}"),
    })
}

/// Tridiagonal elimination against dense Gaussian elimination on random
/// diagonally dominant systems.
pub fn thomas_oracle_check() -> Result<CheckReport, String> {
    const SYSTEMS: usize = 100;
    const SIZE: usize = 40;
    let mut rng = StdRng::seed_from_u64(0x740a_a5e5);
    let mut worst = 0.0f64;
    for system in 0..SYSTEMS {
        let sub: Vec<f64> = (0..SIZE - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sup: Vec<f64> = (0..SIZE - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let main: Vec<f64> = (0..SIZE)
            .map(|i| {
                let below = if i == 0 { 0.0 } else { sub[i - 1].abs() };
                let above = if i == SIZE - 1 { 0.0 } else { sup[i].abs() };
                below + above + 0.5 + rng.gen_range(0.0..1.0)
            })
            .collect();
        let rhs: Vec<f64> = (0..SIZE).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut dense = vec![vec![0.0; SIZE]; SIZE];
        for i in 0..SIZE {
            dense[i][i] = main[i];
            if i > 0 {
                dense[i][i - 1] = sub[i - 1];
            }
            if i < SIZE - 1 {
                dense[i][i + 1] = sup[i];
            }
        }
        let fast = thomas_solve(&sub, &main, &sup, &rhs)
            .map_err(|e| format!("system {system}: tridiagonal solve failed: {e}"))?;
        let reference = solve_dense(dense, rhs)
            .map_err(|e| format!("system {system}: dense solve failed: {e}"))?;
        for (i, (&f, &d)) in fast.iter().zip(&reference).enumerate() {
            let gap = (f - d).abs() / (1.0 + d.abs());
            worst = worst.max(gap);
            if gap > 1e-12 {
                return Err(format!(
                    "system {system}, component {i}: tridiagonal {f} vs dense {d}, gap {gap:.3e}"
                ));
            }
        }
    }
    Ok(CheckReport {
        name: "tridiagonal solver",
        detail: format!("worst relative gap {worst:.3e} across {SYSTEMS} systems"),
    })
}

/// Zero-source energy decay for random initial states across the stable
/// theta range and both schemes.
pub fn energy_decay_check() -> Result<CheckReport, String> {
    const STATES: usize = 100;
    const INTERIOR: usize = 30;
    const STEPS: usize = 12;
    let market = MarketData::constant(0.1, 0.5, 100.0, 1.0, 300.0)
        .map_err(|e| format!("market construction failed: {e}"))?;
    let model = DivergenceModel::new(market, BoundaryData::zero(), 0.25)
        .map_err(|e| format!("model construction failed: {e}"))?;
    let mesh = Mesh::uniform(INTERIOR, 300.0).map_err(|e| format!("mesh failed: {e}"))?;
    let grid = TimeGrid::uniform(1.0, STEPS).map_err(|e| format!("time grid failed: {e}"))?;

    let mut rng = StdRng::seed_from_u64(0xdeca_de00);
    let mut marches = 0usize;
    for state in 0..STATES {
        let initial: Vec<f64> = (0..INTERIOR).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for &theta in &[0.5, 0.75, 1.0] {
            for &scheme in &[SchemeKind::Tpfa, SchemeKind::FittedTpfa] {
                let config = StepConfig::new(theta, scheme)
                    .map_err(|e| format!("step config failed: {e}"))?;
                let solution =
                    march(initial.clone(), &mesh, &model, &grid, config, StoragePolicy::Full)
                        .map_err(|e| format!("march failed: {e}"))?;
                let mut previous = f64::INFINITY;
                for (k, step_state) in solution.states().iter().enumerate() {
                    let norm = discrete_norm(step_state, &mesh, NormKind::DiscreteL2, None)
                        .map_err(|e| format!("norm failed: {e}"))?;
                    if norm > previous * (1.0 + 1e-12) {
                        return Err(format!(
                            "state {state}, theta {theta}, {scheme}: norm grew at step {k}: \
                             {previous:.6e} to {norm:.6e}"
                        ));
                    }
                    previous = norm;
                }
                marches += 1;
            }
        }
    }
    Ok(CheckReport {
        name: "energy decay",
        detail: format!("{marches} marches with non-increasing energy"),
    })
}

/// Runs every suite, failing fast on the first broken one.
pub fn run_all() -> Result<Vec<CheckReport>, String> {
    Ok(vec![price_oracle_check()?, thomas_oracle_check()?, energy_decay_check()?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_suite_passes() {
        let report = price_oracle_check().unwrap();
        assert!(report.detail.contains("23.926"));
    }

    #[test]
    fn thomas_suite_passes() {
        let report = thomas_oracle_check().unwrap();
        assert!(report.detail.contains("100 systems"));
    }

    #[test]
    fn energy_suite_passes() {
        let report = energy_decay_check().unwrap();
        assert!(report.detail.contains("600 marches"));
    }

    #[test]
    fn the_full_battery_reports_three_suites() {
        let reports = run_all().unwrap();
        assert_eq!(reports.len(), 3);
    }
}
