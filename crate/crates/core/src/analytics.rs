//! Closed-form prices, discrete norms and convergence-order estimates.
//!
//! The normal distribution function is evaluated through a three-region
//! rational approximation of `erfc` with relative accuracy near machine
//! precision on the whole line; the unit tests pin it against the quadrature
//! oracle.  Norm evaluation follows the mass-lumped discrete inner products
//! used by the scheme, so reported errors match the quantities the stability
//! theory controls.

use thiserror::Error;

use crate::mesh::Mesh;
use crate::model::{beta_of, BoundaryData, DivergenceModel, MarketData};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("closed-form price needs constant rate and volatility")]
    NonConstantCoefficients,
    #[error("closed-form price is defined for positive times, got t = {t}")]
    BadEvaluationTime { t: f64 },
    #[error("spot must be nonnegative and finite, got {spot}")]
    BadSpot { spot: f64 },
    #[error("expected {expected} values for this mesh, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("the weighted seminorm needs the interface transmissibilities")]
    MissingTransmissibilities,
    #[error("relative errors need a reference solution; use error_vs_exact")]
    RelativeNeedsReference,
    #[error("reference solution has zero norm, relative error is undefined")]
    ZeroReference,
    #[error("order estimation needs at least two (error, step) pairs, got {got}")]
    TooFewSamples { got: usize },
    #[error("order estimation needs positive finite entries, offending value {value}")]
    BadSample { value: f64 },
    #[error("order estimation needs distinct consecutive steps, got {step} twice")]
    RepeatedStep { step: f64 },
}

// ─── Normal distribution ─────────────────────────────────────────────────────

#[allow(clippy::excessive_precision)]
const A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
#[allow(clippy::excessive_precision)]
const B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
#[allow(clippy::excessive_precision)]
const C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
#[allow(clippy::excessive_precision)]
const D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
#[allow(clippy::excessive_precision)]
const P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
#[allow(clippy::excessive_precision)]
const Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
#[allow(clippy::excessive_precision)]
const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;

/// Complementary error function with full relative accuracy in both tails.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    let result = if y <= 0.46875 {
        let z = if y > 1e-300 { y * y } else { 0.0 };
        let mut num = A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + A[i]) * z;
            den = (den + B[i]) * z;
        }
        return 1.0 - x * (num + A[3]) / (den + B[3]);
    } else if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        scaled_exp(y) * (num + C[7]) / (den + D[7])
    } else if y < 26.6 {
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        scaled_exp(y) / y * (INV_SQRT_PI - r)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// `exp(-y^2)` with the argument split so the squared part is exact.
fn scaled_exp(y: f64) -> f64 {
    let ysq = (16.0 * y).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Standard normal distribution function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

// ─── Closed-form call price ──────────────────────────────────────────────────

/// Closed-form European call value at time-to-maturity `t > 0`, requiring
/// constant market coefficients.
///
/// Uses `d1 = (ln(x/K) + (r + sigma^2/2) t) / (sigma sqrt(t))` and
/// `d2 = d1 - sigma sqrt(t)`:
///
/// ```text
/// C(x, t) = x Phi(d1) - K exp(-r t) Phi(d2).
/// ```
pub fn bs_call_price(market: &MarketData, spot: f64, t: f64) -> Result<f64, AnalyticsError> {
    let (r, sigma) = market
        .constant_coefficients()
        .ok_or(AnalyticsError::NonConstantCoefficients)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(AnalyticsError::BadEvaluationTime { t });
    }
    if !(spot >= 0.0) || !spot.is_finite() {
        return Err(AnalyticsError::BadSpot { spot });
    }
    if spot == 0.0 {
        return Ok(0.0);
    }
    let k = market.strike();
    let vol_sqrt_t = sigma * t.sqrt();
    let d1 = ((spot / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol_sqrt_t;
    let d2 = d1 - vol_sqrt_t;
    Ok(spot * std_normal_cdf(d1) - k * (-r * t).exp() * std_normal_cdf(d2))
}

/// Derivative of the closed-form call value with respect to time-to-maturity,
/// under the same preconditions as `bs_call_price`.
pub fn bs_call_theta(market: &MarketData, spot: f64, t: f64) -> Result<f64, AnalyticsError> {
    let (r, sigma) = market
        .constant_coefficients()
        .ok_or(AnalyticsError::NonConstantCoefficients)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(AnalyticsError::BadEvaluationTime { t });
    }
    if !(spot >= 0.0) || !spot.is_finite() {
        return Err(AnalyticsError::BadSpot { spot });
    }
    if spot == 0.0 {
        return Ok(0.0);
    }
    let k = market.strike();
    let sqrt_t = t.sqrt();
    let vol_sqrt_t = sigma * sqrt_t;
    let d1 = ((spot / k).ln() + (r + 0.5 * sigma * sigma) * t) / vol_sqrt_t;
    let d2 = d1 - vol_sqrt_t;
    let density = (-0.5 * d1 * d1).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(spot * density * sigma / (2.0 * sqrt_t) + r * k * (-r * t).exp() * std_normal_cdf(d2))
}

// ─── Oracle-calibrated verification model ────────────────────────────────────

/// European-call model whose right boundary carries the closed-form price
/// trace instead of the discounted-forward asymptote.
///
/// With the asymptotic boundary the solver converges to the truncated-domain
/// problem, whose gap to the closed form near `x_max` puts a
/// resolution-independent floor under any error measured against the oracle.
/// The oracle trace removes that floor, so convergence studies observe the
/// pure discretization error.
pub fn oracle_call_model(market: &MarketData) -> Result<DivergenceModel, AnalyticsError> {
    market
        .constant_coefficients()
        .ok_or(AnalyticsError::NonConstantCoefficients)?;
    let k = market.strike();
    let x_max = market.x_max();
    let r = market.rate(0.0);
    let price_market = market.clone();
    let theta_market = market.clone();
    let boundary = BoundaryData::new(
        move |x: f64| (x - k).max(0.0),
        |_| 0.0,
        |_| 0.0,
        move |t: f64| {
            if t <= 0.0 {
                x_max - k
            } else {
                bs_call_price(&price_market, x_max, t).expect("coefficients checked constant")
            }
        },
        move |t: f64| {
            if t <= 0.0 {
                r * k
            } else {
                bs_call_theta(&theta_market, x_max, t).expect("coefficients checked constant")
            }
        },
        x_max,
    )
    .expect("oracle boundary trace matches the payoff at t = 0");
    let beta = beta_of(market, 10_000);
    Ok(DivergenceModel::new(market.clone(), boundary, beta)
        .expect("beta equals the squared constant volatility"))
}

// ─── Discrete norms ──────────────────────────────────────────────────────────

/// Norms over interior nodal vectors, matching the discrete inner products
/// of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Mass-lumped `L2` norm `(sum_i l_i v_i^2)^{1/2}`.
    DiscreteL2,
    /// Transmissibility-weighted difference seminorm, zero-extended on the
    /// right; the interface touching `x = 0` carries no term.
    WeightedSemi,
    /// Pythagorean combination of the two above.
    Combined,
    /// Maximum absolute nodal value.
    MaxAbs,
    /// Lumped `L2` error divided by the largest reference value, an error
    /// per unit of solution scale; only meaningful against a reference, so
    /// `discrete_norm` rejects it.
    RelativeL2,
}

/// Evaluates a norm of an interior nodal vector.  `taus` supplies the `N + 1`
/// interface transmissibilities and is required by the seminorm kinds.
pub fn discrete_norm(
    values: &[f64],
    mesh: &Mesh,
    kind: NormKind,
    taus: Option<&[f64]>,
) -> Result<f64, AnalyticsError> {
    let n = mesh.n_interior();
    if values.len() != n {
        return Err(AnalyticsError::LengthMismatch { expected: n, got: values.len() });
    }
    match kind {
        NormKind::DiscreteL2 => Ok(lumped_l2(values, mesh)),
        NormKind::MaxAbs => Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        NormKind::WeightedSemi => Ok(weighted_semi(values, mesh, required_taus(taus, n)?)),
        NormKind::Combined => {
            let semi = weighted_semi(values, mesh, required_taus(taus, n)?);
            let l2 = lumped_l2(values, mesh);
            Ok(semi.hypot(l2))
        }
        NormKind::RelativeL2 => Err(AnalyticsError::RelativeNeedsReference),
    }
}

fn required_taus(taus: Option<&[f64]>, n: usize) -> Result<&[f64], AnalyticsError> {
    let taus = taus.ok_or(AnalyticsError::MissingTransmissibilities)?;
    if taus.len() != n + 1 {
        return Err(AnalyticsError::LengthMismatch { expected: n + 1, got: taus.len() });
    }
    Ok(taus)
}

fn lumped_l2(values: &[f64], mesh: &Mesh) -> f64 {
    let dual = mesh.dual_lengths();
    values
        .iter()
        .enumerate()
        .map(|(j, v)| dual[j + 1] * v * v)
        .sum::<f64>()
        .sqrt()
}

fn weighted_semi(values: &[f64], mesh: &Mesh, taus: &[f64]) -> f64 {
    let n = mesh.n_interior();
    let mut acc = 0.0;
    for i in 1..=n {
        let right = if i < n { values[i] } else { 0.0 };
        let jump = right - values[i - 1];
        acc += taus[i] * jump * jump;
    }
    acc.sqrt()
}

/// Error of a computed price vector against the closed-form call price at
/// time-to-maturity `t`, in the requested norm.  `RelativeL2` normalises the
/// lumped `L2` error by the largest exact value on the grid.
pub fn error_vs_exact(
    prices: &[f64],
    t: f64,
    mesh: &Mesh,
    market: &MarketData,
    kind: NormKind,
    taus: Option<&[f64]>,
) -> Result<f64, AnalyticsError> {
    let n = mesh.n_interior();
    if prices.len() != n {
        return Err(AnalyticsError::LengthMismatch { expected: n, got: prices.len() });
    }
    let mut diff = Vec::with_capacity(n);
    let mut exact = Vec::with_capacity(n);
    for (j, &p) in prices.iter().enumerate() {
        let reference = bs_call_price(market, mesh.node(j + 1), t)?;
        diff.push(p - reference);
        exact.push(reference);
    }
    match kind {
        NormKind::RelativeL2 => {
            let denom = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if denom == 0.0 {
                return Err(AnalyticsError::ZeroReference);
            }
            Ok(lumped_l2(&diff, mesh) / denom)
        }
        other => discrete_norm(&diff, mesh, other, taus),
    }
}

// ─── Convergence orders ──────────────────────────────────────────────────────

/// Observed convergence orders between consecutive (error, step) pairs:
/// `log(e_j / e_{j+1}) / log(h_j / h_{j+1})`.
pub fn observed_order(errors: &[f64], steps: &[f64]) -> Result<Vec<f64>, AnalyticsError> {
    if errors.len() != steps.len() {
        return Err(AnalyticsError::LengthMismatch { expected: steps.len(), got: errors.len() });
    }
    if errors.len() < 2 {
        return Err(AnalyticsError::TooFewSamples { got: errors.len() });
    }
    for &v in errors.iter().chain(steps.iter()) {
        if !(v > 0.0) || !v.is_finite() {
            return Err(AnalyticsError::BadSample { value: v });
        }
    }
    let mut orders = Vec::with_capacity(errors.len() - 1);
    for j in 0..errors.len() - 1 {
        if steps[j] == steps[j + 1] {
            return Err(AnalyticsError::RepeatedStep { step: steps[j] });
        }
        orders.push((errors[j] / errors[j + 1]).ln() / (steps[j] / steps[j + 1]).ln());
    }
    Ok(orders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    fn call_market() -> MarketData {
        MarketData::constant(0.1, 0.5, 100.0, 1.0, 300.0).unwrap()
    }

    #[test]
    fn cdf_matches_quadrature_oracle_absolutely() {
        let mut z = -8.0;
        while z <= 8.0 {
            let fast = std_normal_cdf(z);
            let slow = oracles::normal_cdf_quadrature(z);
            assert!(
                (fast - slow).abs() <= 1e-15,
                "Phi({z}): fast {fast}, oracle {slow}"
            );
            z += 1.0 / 64.0;
        }
    }

    #[test]
    fn cdf_matches_quadrature_oracle_in_relative_terms() {
        for z in [-12.0, -10.0, -8.0, -6.0, -4.0, -2.0, -0.5] {
            let fast = std_normal_cdf(z);
            let slow = oracles::normal_cdf_quadrature(z);
            assert!(
                (fast - slow).abs() <= 1e-13 * slow,
                "tail Phi({z}): fast {fast}, oracle {slow}"
            );
        }
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_close(std_normal_cdf(1.0), 0.8413447460685429, 1e-15, "Phi(1)");
        assert_close(std_normal_cdf(-2.0), 0.022750131948179212, 1e-16, "Phi(-2)");
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        assert!(std_normal_cdf(f64::NAN).is_nan());
    }

    #[test]
    fn erfc_complements() {
        for x in [-5.0, -1.3, -0.2, 0.0, 0.2, 1.3, 5.0] {
            let sum = erfc(x) + erfc(-x);
            assert_close(sum, 2.0, 1e-14, "erfc(x) + erfc(-x)");
        }
        assert_close(erfc(0.0), 1.0, 0.0, "erfc(0)");
    }

    #[test]
    fn call_price_reference_value() {
        let market = call_market();
        let price = bs_call_price(&market, 100.0, 1.0).unwrap();
        assert_close(price, 23.9266, 1e-3, "at-the-money call");
    }

    #[test]
    fn call_price_matches_oracle_cdf_build() {
        let market = call_market();
        let (r, sigma) = (0.1, 0.5);
        for (spot, t) in [(80.0, 0.5), (100.0, 1.0), (150.0, 0.25), (280.0, 1.0), (5.0, 1.0)] {
            let fast = bs_call_price(&market, spot, t).unwrap();
            let vol_sqrt_t = sigma * f64::sqrt(t);
            let d1 = ((spot / 100.0f64).ln() + (r + 0.5 * sigma * sigma) * t) / vol_sqrt_t;
            let d2 = d1 - vol_sqrt_t;
            let slow = spot * oracles::normal_cdf_quadrature(d1)
                - 100.0 * (-r * t).exp() * oracles::normal_cdf_quadrature(d2);
            assert_close(fast, slow, 1e-10 * (1.0 + slow.abs()), "price vs oracle");
        }
    }

    #[test]
    fn call_price_respects_arbitrage_bounds() {
        let market = call_market();
        for spot in [1.0, 40.0, 100.0, 200.0, 299.0] {
            for t in [0.1, 0.5, 1.0] {
                let c = bs_call_price(&market, spot, t).unwrap();
                let lower = (spot - 100.0 * (-0.1f64 * t).exp()).max(0.0);
                assert!(c >= lower - 1e-12, "below intrinsic bound at {spot}, {t}");
                assert!(c <= spot, "above spot at {spot}, {t}");
            }
        }
    }

    #[test]
    fn deep_in_the_money_tail_is_small_but_positive() {
        let market = call_market();
        let c = bs_call_price(&market, 300.0, 1.0).unwrap();
        let forward = 300.0 - 100.0 * (-0.1f64).exp();
        let tail = c - forward;
        assert!(tail > 0.0, "time value must be positive, got {tail}");
        assert!(tail < 0.5, "time value unexpectedly large: {tail}");
    }

    #[test]
    fn call_price_edge_cases() {
        let market = call_market();
        assert_eq!(bs_call_price(&market, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            bs_call_price(&market, 100.0, 0.0),
            Err(AnalyticsError::BadEvaluationTime { .. })
        ));
        assert!(matches!(
            bs_call_price(&market, -1.0, 1.0),
            Err(AnalyticsError::BadSpot { .. })
        ));
        let drifting = MarketData::new(
            crate::model::TimeFunction::linear(0.05, 0.01),
            crate::model::TimeFunction::constant(0.5),
            100.0,
            1.0,
            300.0,
        )
        .unwrap();
        assert!(matches!(
            bs_call_price(&drifting, 100.0, 1.0),
            Err(AnalyticsError::NonConstantCoefficients)
        ));
    }

    #[test]
    fn norm_hand_computed_values() {
        let mesh = Mesh::uniform(2, 3.0).unwrap();
        let values = [2.0, 5.0];
        let taus = [1.0, 2.0, 3.0];
        let l2 = discrete_norm(&values, &mesh, NormKind::DiscreteL2, None).unwrap();
        assert_close(l2, 29.0f64.sqrt(), 1e-14, "lumped L2");
        let semi = discrete_norm(&values, &mesh, NormKind::WeightedSemi, Some(&taus)).unwrap();
        assert_close(semi, 93.0f64.sqrt(), 1e-14, "weighted seminorm");
        let combined = discrete_norm(&values, &mesh, NormKind::Combined, Some(&taus)).unwrap();
        assert_close(combined, 122.0f64.sqrt(), 1e-14, "combined norm");
        let max = discrete_norm(&values, &mesh, NormKind::MaxAbs, None).unwrap();
        assert_eq!(max, 5.0);
    }

    #[test]
    fn seminorm_ignores_degenerate_interface() {
        // Only the first entry is nonzero: the sum starts at the second
        // interface, so tau at the degenerate corner never enters.
        let mesh = Mesh::uniform(2, 3.0).unwrap();
        let values = [1.0, 0.0];
        let with_huge_corner = [1e12, 2.0, 3.0];
        let semi =
            discrete_norm(&values, &mesh, NormKind::WeightedSemi, Some(&with_huge_corner)).unwrap();
        assert_close(semi, 2.0f64.sqrt(), 1e-14, "corner-independent seminorm");
    }

    #[test]
    fn norm_input_validation() {
        let mesh = Mesh::uniform(2, 3.0).unwrap();
        assert!(matches!(
            discrete_norm(&[1.0], &mesh, NormKind::DiscreteL2, None),
            Err(AnalyticsError::LengthMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            discrete_norm(&[1.0, 2.0], &mesh, NormKind::WeightedSemi, None),
            Err(AnalyticsError::MissingTransmissibilities)
        ));
        assert!(matches!(
            discrete_norm(&[1.0, 2.0], &mesh, NormKind::WeightedSemi, Some(&[1.0, 2.0])),
            Err(AnalyticsError::LengthMismatch { expected: 3, got: 2 })
        ));
        assert!(matches!(
            discrete_norm(&[1.0, 2.0], &mesh, NormKind::RelativeL2, None),
            Err(AnalyticsError::RelativeNeedsReference)
        ));
    }

    #[test]
    fn error_vs_exact_detects_exact_input() {
        let market = call_market();
        let mesh = Mesh::uniform(30, 300.0).unwrap();
        let exact: Vec<f64> = (1..=30)
            .map(|i| bs_call_price(&market, mesh.node(i), 1.0).unwrap())
            .collect();
        for kind in [NormKind::DiscreteL2, NormKind::MaxAbs, NormKind::RelativeL2] {
            let err = error_vs_exact(&exact, 1.0, &mesh, &market, kind, None).unwrap();
            assert!(err <= 1e-13, "{kind:?} error of exact data: {err}");
        }
    }

    #[test]
    fn error_vs_exact_scales_with_perturbation() {
        let market = call_market();
        let mesh = Mesh::uniform(30, 300.0).unwrap();
        let perturbed: Vec<f64> = (1..=30)
            .map(|i| bs_call_price(&market, mesh.node(i), 1.0).unwrap() + 0.5)
            .collect();
        let max = error_vs_exact(&perturbed, 1.0, &mesh, &market, NormKind::MaxAbs, None).unwrap();
        assert_close(max, 0.5, 1e-10, "uniform perturbation in max norm");
        let l2 = error_vs_exact(&perturbed, 1.0, &mesh, &market, NormKind::DiscreteL2, None).unwrap();
        let domain_inner: f64 = mesh.dual_lengths()[1..=30].iter().sum();
        assert_close(l2, 0.5 * domain_inner.sqrt(), 1e-9, "uniform perturbation in L2");
    }

    #[test]
    fn relative_error_is_l2_error_per_unit_of_largest_exact_value() {
        let market = call_market();
        let mesh = Mesh::uniform(30, 300.0).unwrap();
        let perturbed: Vec<f64> = (1..=30)
            .map(|i| bs_call_price(&market, mesh.node(i), 1.0).unwrap() + 0.5)
            .collect();
        let rel =
            error_vs_exact(&perturbed, 1.0, &mesh, &market, NormKind::RelativeL2, None).unwrap();
        let l2 =
            error_vs_exact(&perturbed, 1.0, &mesh, &market, NormKind::DiscreteL2, None).unwrap();
        let largest = (1..=30)
            .map(|i| bs_call_price(&market, mesh.node(i), 1.0).unwrap())
            .fold(0.0f64, f64::max);
        assert_close(rel, l2 / largest, 1e-13, "relative error convention");
    }

    #[test]
    fn call_theta_matches_finite_differences_of_the_price() {
        let market = call_market();
        for (spot, t) in [(100.0, 1.0), (300.0, 0.5), (150.0, 0.25), (40.0, 0.75)] {
            let theta = bs_call_theta(&market, spot, t).unwrap();
            let d = 1e-6;
            let up = bs_call_price(&market, spot, t + d).unwrap();
            let down = bs_call_price(&market, spot, t - d).unwrap();
            let fd = (up - down) / (2.0 * d);
            assert_close(theta, fd, 1e-4 * (1.0 + theta.abs()), &format!("theta at ({spot}, {t})"));
        }
    }

    #[test]
    fn call_theta_deep_in_the_money_approaches_discounting_speed() {
        let market = call_market();
        let theta = bs_call_theta(&market, 1e6, 1.0).unwrap();
        let want = 0.1 * 100.0 * (-0.1f64).exp();
        assert_close(theta, want, 1e-6, "deep ITM theta");
        assert_eq!(bs_call_theta(&market, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn call_theta_rejects_what_the_price_rejects() {
        let market = call_market();
        assert!(matches!(
            bs_call_theta(&market, 100.0, 0.0),
            Err(AnalyticsError::BadEvaluationTime { .. })
        ));
        assert!(matches!(
            bs_call_theta(&market, -1.0, 1.0),
            Err(AnalyticsError::BadSpot { .. })
        ));
    }

    #[test]
    fn oracle_model_boundary_follows_the_closed_form() {
        let market = call_market();
        let model = oracle_call_model(&market).unwrap();
        assert_eq!(model.boundary().right(0.0), 200.0);
        for t in [0.25, 0.5, 1.0] {
            let want = bs_call_price(&market, 300.0, t).unwrap();
            assert_close(model.boundary().right(t), want, 1e-12, &format!("right trace at t = {t}"));
            let want_dt = bs_call_theta(&market, 300.0, t).unwrap();
            assert_close(
                model.boundary().right_dt(t),
                want_dt,
                1e-12,
                &format!("right slope at t = {t}"),
            );
        }
        assert_eq!(model.boundary().left(0.7), 0.0);
        assert_eq!(model.boundary().payoff(130.0), 30.0);
        assert_eq!(model.beta(), 0.25);
    }

    #[test]
    fn oracle_model_shares_the_initial_state_with_the_asymptotic_model() {
        let market = call_market();
        let mesh = Mesh::uniform(12, 300.0).unwrap();
        let oracle = oracle_call_model(&market).unwrap();
        let asymptotic = DivergenceModel::european_call(market).unwrap();
        let a = oracle.initial_state(&mesh);
        let b = asymptotic.initial_state(&mesh);
        for (x, y) in a.iter().zip(&b) {
            assert_close(*x, *y, 1e-12, "shared payoff data at t = 0");
        }
    }

    #[test]
    fn oracle_model_requires_constant_coefficients() {
        let market = MarketData::new(
            crate::model::TimeFunction::linear(0.1, 0.02),
            crate::model::TimeFunction::constant(0.5),
            100.0,
            1.0,
            300.0,
        )
        .unwrap();
        assert!(matches!(
            oracle_call_model(&market),
            Err(AnalyticsError::NonConstantCoefficients)
        ));
    }

    #[test]
    fn observed_order_reference_pair() {
        let orders = observed_order(&[0.0104, 0.0021], &[1.0, 0.2]).unwrap();
        assert_eq!(orders.len(), 1);
        assert_close(orders[0], 0.9940543, 2e-5, "order from endpoint errors");
    }

    #[test]
    fn observed_order_exact_first_order_sequence() {
        let steps = [0.1, 0.05, 0.025];
        let errors = [0.3, 0.15, 0.075];
        let orders = observed_order(&errors, &steps).unwrap();
        for o in orders {
            assert_close(o, 1.0, 1e-13, "exact halving");
        }
    }

    #[test]
    fn observed_order_validation() {
        assert!(matches!(
            observed_order(&[0.1], &[1.0]),
            Err(AnalyticsError::TooFewSamples { got: 1 })
        ));
        assert!(matches!(
            observed_order(&[0.1, 0.2], &[1.0]),
            Err(AnalyticsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            observed_order(&[0.1, 0.0], &[1.0, 0.5]),
            Err(AnalyticsError::BadSample { .. })
        ));
        assert!(matches!(
            observed_order(&[0.1, 0.05], &[1.0, 1.0]),
            Err(AnalyticsError::RepeatedStep { .. })
        ));
    }
}
