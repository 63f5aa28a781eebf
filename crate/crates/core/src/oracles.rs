//! Slow reference implementations used to cross-check the fast paths.
//!
//! Everything here is deliberately built from first principles with methods
//! unrelated to the production code: the normal distribution function comes
//! from composite Gauss-Legendre quadrature of the density (nodes found by
//! Newton iteration on the Legendre recurrence, not from tables), and linear
//! systems are solved by dense Gaussian elimination with partial pivoting.
//! Tests compare the production routines against these, so the two sides
//! share no code and no constants.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("matrix is singular to working precision at elimination stage {stage}")]
    Singular { stage: usize },
    #[error("matrix shape is invalid: {rows} rows, row {row} has {cols} entries, rhs has {rhs}")]
    Shape { rows: usize, row: usize, cols: usize, rhs: usize },
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Roots of the Legendre polynomial are located by Newton iteration seeded
/// with the Chebyshev-like estimate `cos(pi (i - 1/4) / (n + 1/2))`, using
/// the three-term recurrence for values and derivatives.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be at least 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-16 * (1.0 + x.abs()) {
                let (_, d2) = legendre_with_derivative(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

/// Composite Gauss-Legendre integration of `f` over `[a, b]` with `panels`
/// equal subintervals and an `order`-point rule on each.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for j in 0..panels {
        let mid = a + (j as f64 + 0.5) * h;
        let mut panel = 0.0;
        for (t, w) in nodes.iter().zip(&weights) {
            panel += w * f(mid + 0.5 * h * t);
        }
        let term = 0.5 * h * panel - comp;
        let fresh = sum + term;
        comp = (fresh - sum) - term;
        sum = fresh;
    }
    sum
}

/// Standard normal distribution function by quadrature of the density.
///
/// The tail mass beyond `|z|` is integrated directly so both tails keep full
/// relative accuracy; truncating the integral 40 units out leaves an error
/// far below the integrand scale.
pub fn normal_cdf_quadrature(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let tail = |y: f64| -> f64 {
        let span = 40.0;
        let panels = (4.0 * span) as usize;
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        integrate(
            |s| inv_sqrt_2pi * (-0.5 * s * s).exp(),
            y,
            y + span,
            panels,
            24,
        )
    };
    if z >= 0.0 {
        1.0 - tail(z)
    } else {
        tail(-z)
    }
}

/// Dense linear solve by Gaussian elimination with partial pivoting.
///
/// Consumes the inputs; meant for small verification systems, not for
/// production stepping.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let n = a.len();
    for (row, r) in a.iter().enumerate() {
        if r.len() != n || b.len() != n {
            return Err(OracleError::Shape { rows: n, row, cols: r.len(), rhs: b.len() });
        }
    }
    for k in 0..n {
        let pivot_row = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[pivot_row][k].abs() < 1e-300 {
            return Err(OracleError::Singular { stage: k });
        }
        a.swap(k, pivot_row);
        b.swap(k, pivot_row);
        for i in k + 1..n {
            let factor = a[i][k] / a[k][k];
            if factor != 0.0 {
                let (upper_rows, lower_rows) = a.split_at_mut(i);
                let eliminating_row = &upper_rows[k];
                for (entry, &upper) in lower_rows[0][k..].iter_mut().zip(&eliminating_row[k..]) {
                    *entry -= factor * upper;
                }
                b[i] -= factor * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k][j] * x[j];
        }
        x[k] = acc / a[k][k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol,
            "{what}: got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn gauss_legendre_low_orders_are_exact() {
        let (n2, w2) = gauss_legendre(2);
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert_close(n2[0], -inv_sqrt3, 1e-15, "2-point node");
        assert_close(n2[1], inv_sqrt3, 1e-15, "2-point node");
        assert_close(w2[0], 1.0, 1e-15, "2-point weight");
        assert_close(w2[1], 1.0, 1e-15, "2-point weight");

        let (n3, w3) = gauss_legendre(3);
        let outer = (0.6f64).sqrt();
        assert_close(n3[0], -outer, 1e-15, "3-point node");
        assert_close(n3[1], 0.0, 1e-15, "3-point node");
        assert_close(n3[2], outer, 1e-15, "3-point node");
        assert_close(w3[0], 5.0 / 9.0, 1e-15, "3-point weight");
        assert_close(w3[1], 8.0 / 9.0, 1e-15, "3-point weight");
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1, 2, 3, 5, 8, 13, 24, 41] {
            let (_, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert_close(total, 2.0, 1e-13, "weight sum");
        }
    }

    #[test]
    fn polynomial_exactness() {
        // An n-point rule integrates degree 2n-1 exactly.
        let got = integrate(|x| x.powi(9) + x.powi(4), 0.0, 1.0, 1, 5);
        assert_close(got, 0.1 + 0.2, 1e-15, "degree-9 polynomial");
    }

    #[test]
    fn smooth_integral_reference() {
        let got = integrate(f64::sin, 0.0, std::f64::consts::PI, 8, 12);
        assert_close(got, 2.0, 1e-14, "integral of sin");
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_close(normal_cdf_quadrature(0.0), 0.5, 1e-15, "Phi(0)");
        assert_close(normal_cdf_quadrature(1.0), 0.8413447460685429, 1e-12, "Phi(1)");
        assert_close(normal_cdf_quadrature(-1.0), 0.15865525393145705, 1e-12, "Phi(-1)");
        assert_close(normal_cdf_quadrature(2.0), 0.9772498680518208, 1e-12, "Phi(2)");
    }

    #[test]
    fn normal_cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        let mut z = -8.0;
        while z <= 8.0 {
            let phi = normal_cdf_quadrature(z);
            let mirrored = normal_cdf_quadrature(-z);
            assert_close(phi + mirrored, 1.0, 1e-14, "symmetry");
            assert!(phi > prev, "not monotone at z = {z}");
            prev = phi;
            z += 0.25;
        }
    }

    #[test]
    fn normal_cdf_deep_tail_keeps_relative_accuracy() {
        // Mills-ratio bracket: phi(z) z / (z^2 + 1) < Phi(-z) < phi(z) / z.
        for z in [4.0, 6.0, 8.0] {
            let tail = normal_cdf_quadrature(-z);
            let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!(tail < density / z, "upper Mills bound at z = {z}");
            assert!(tail > density * z / (z * z + 1.0), "lower Mills bound at z = {z}");
        }
    }

    #[test]
    fn solve_dense_small_systems() {
        let x = solve_dense(vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![6.0, 8.0]).unwrap();
        assert_close(x[0], 3.0, 1e-15, "diagonal solve");
        assert_close(x[1], 2.0, 1e-15, "diagonal solve");

        let x = solve_dense(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![5.0, 7.0],
        )
        .unwrap();
        assert_close(x[0], 7.0, 1e-15, "pivoting required");
        assert_close(x[1], 5.0, 1e-15, "pivoting required");
    }

    #[test]
    fn solve_dense_random_residuals() {
        let mut rng = StdRng::seed_from_u64(0x0dd5);
        for trial in 0..50 {
            let n = rng.gen_range(1..12);
            let a: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let base: f64 = rng.gen_range(-1.0..1.0);
                            if i == j {
                                base + 4.0
                            } else {
                                base
                            }
                        })
                        .collect()
                })
                .collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let x = solve_dense(a.clone(), b.clone()).unwrap();
            for i in 0..n {
                let residual: f64 = (0..n).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i];
                assert!(
                    residual.abs() <= 1e-11,
                    "trial {trial}: residual {residual} in row {i}"
                );
            }
        }
    }

    #[test]
    fn solve_dense_rejects_singular_and_misshapen() {
        let err = solve_dense(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]);
        assert!(matches!(err, Err(OracleError::Singular { .. })));
        let err = solve_dense(vec![vec![1.0, 2.0]], vec![1.0]);
        assert!(matches!(err, Err(OracleError::Shape { .. })));
    }
}
