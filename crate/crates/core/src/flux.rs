//! Discrete fluxes and the tridiagonal spatial operator.
//!
//! Each interior node carries a dual cell; the diffusion coefficient
//! `a(t) x^2` is replaced by its exact cell average `k_i`, interfaces couple
//! neighbours through the harmonic transmissibility `tau_{i+1/2}`, and the
//! convective term is upwinded against the transport velocity `-b x`.  The
//! classical scheme applies this two-point flux at every interface; the
//! fitted variant replaces only the flux at the first interface, where the
//! diffusion degenerates, by the exact flux of a local two-point problem.
//! Both assemble into a tridiagonal operator whose action on zero-boundary
//! vectors realises the discrete bilinear form.

use thiserror::Error;

use crate::mesh::Mesh;
use crate::model::{Coefficients, DivergenceModel};

#[derive(Debug, Error, PartialEq)]
pub enum FluxError {
    #[error("both cells at interface {index} have zero diffusion")]
    DegenerateInterface { index: usize },
    #[error("expected {expected} cell diffusion values, got {got}")]
    WrongCellCount { expected: usize, got: usize },
}

/// Spatial discretisation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Harmonic two-point flux at every interface, including the degenerate
    /// one next to `x = 0`.
    Tpfa,
    /// Fitted flux at the first interface, two-point flux elsewhere.
    FittedTpfa,
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeKind::Tpfa => f.write_str("tpfa"),
            SchemeKind::FittedTpfa => f.write_str("fitted"),
        }
    }
}

// ─── Cell diffusion and transmissibilities ───────────────────────────────────

/// Dual-cell averages of the diffusion coefficient `a x^2`.
///
/// Entry `i` covers dual cell `i` for `i = 0 ..= N + 1`, with the averaging
/// interval clamped to the domain at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDiffusion {
    values: Vec<f64>,
}

impl CellDiffusion {
    /// Exact averages `k_i = a (x_r^2 + x_r x_l + x_l^2) / 3` over each dual
    /// cell `[x_l, x_r]`, which equals the integral mean of `a x^2`.
    pub fn new(mesh: &Mesh, a: f64) -> Self {
        let n = mesh.n_interior();
        let values = (0..=n + 1)
            .map(|i| {
                let (xl, xr) = face_positions(mesh, i);
                a * (xr * xr + xr * xl + xl * xl) / 3.0
            })
            .collect();
        CellDiffusion { values }
    }

    /// Wraps externally supplied averages; used to probe degenerate cases
    /// the exact averages cannot produce.
    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self, FluxError> {
        let expected = mesh.n_interior() + 2;
        if values.len() != expected {
            return Err(FluxError::WrongCellCount { expected, got: values.len() });
        }
        Ok(CellDiffusion { values })
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Faces of dual cell `i`, with the outermost faces clamped to `0` and
/// `x_max`.
fn face_positions(mesh: &Mesh, i: usize) -> (f64, f64) {
    let n = mesh.n_interior();
    let left = if i == 0 { 0.0 } else { mesh.midpoint(i - 1) };
    let right = if i == n + 1 { mesh.x_max() } else { mesh.midpoint(i) };
    (left, right)
}

/// Harmonic-mean transmissibility at interface `i + 1/2` for `0 <= i <= N`,
/// built from `T_i = k_i / l_i` on the two adjacent dual cells.
pub fn transmissibility(mesh: &Mesh, k: &CellDiffusion, i: usize) -> Result<f64, FluxError> {
    let dual = mesh.dual_lengths();
    let t_left = k.value(i) / dual[i];
    let t_right = k.value(i + 1) / dual[i + 1];
    let total = t_left + t_right;
    if total == 0.0 {
        return Err(FluxError::DegenerateInterface { index: i });
    }
    Ok(2.0 * t_left * t_right / total)
}

/// All `N + 1` interface transmissibilities for diffusion scale `a`.
pub fn transmissibilities(mesh: &Mesh, a: f64) -> Result<Vec<f64>, FluxError> {
    let k = CellDiffusion::new(mesh, a);
    (0..=mesh.n_interior()).map(|i| transmissibility(mesh, &k, i)).collect()
}

// ─── Discrete fluxes ─────────────────────────────────────────────────────────

/// Two-point upwinded flux at interface `i + 1/2`.
///
/// `u` is the full state including boundary entries `u_0` and `u_{N+1}`;
/// `taus` holds the `N + 1` interface transmissibilities.  The convective
/// part carries the upstream value for the transport velocity `-b x`: the
/// left neighbour when `b < 0`, the right neighbour when `b > 0`.
pub fn discrete_flux_tpfa(
    mesh: &Mesh,
    co: &Coefficients,
    taus: &[f64],
    u: &[f64],
    i: usize,
) -> f64 {
    debug_assert_eq!(taus.len(), mesh.n_interior() + 1);
    debug_assert_eq!(u.len(), mesh.n_interior() + 2);
    let x = mesh.midpoint(i);
    let b_plus = co.b.max(0.0);
    let b_minus = co.b.min(0.0);
    -taus[i] * (u[i + 1] - u[i]) - x * (b_plus * u[i + 1] + b_minus * u[i])
}

/// Fitted flux: the exact two-point solution flux at the degenerate first
/// interface, delegating to the upwinded flux everywhere else.
pub fn discrete_flux_fitted(
    mesh: &Mesh,
    co: &Coefficients,
    taus: &[f64],
    u: &[f64],
    i: usize,
) -> f64 {
    if i == 0 {
        let x1 = mesh.node(1);
        -0.25 * x1 * ((co.a + co.b) * u[1] - (co.a - co.b) * u[0])
    } else {
        discrete_flux_tpfa(mesh, co, taus, u, i)
    }
}

// ─── Assembled operator ──────────────────────────────────────────────────────

/// Tridiagonal realisation of the spatial operator on interior unknowns.
///
/// For any state with zero boundary values, row `i` of the product equals
/// the flux difference across dual cell `i` plus the reaction term
/// `c l_i u_i`.  The boundary couplings record how nonzero `u_0` and
/// `u_{N+1}` would enter rows `1` and `N`; they multiply zeros after
/// homogenisation.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    sub: Vec<f64>,
    main: Vec<f64>,
    sup: Vec<f64>,
    coupling_left: f64,
    coupling_right: f64,
}

impl TridiagonalOperator {
    /// Builds an operator from explicit diagonals; sizes must be consistent
    /// with `main.len() = N`, `sub.len() = sup.len() = N - 1`.
    pub fn from_parts(
        sub: Vec<f64>,
        main: Vec<f64>,
        sup: Vec<f64>,
        coupling_left: f64,
        coupling_right: f64,
    ) -> Self {
        assert!(!main.is_empty(), "operator needs at least one row");
        assert_eq!(sub.len() + 1, main.len(), "subdiagonal length must be N - 1");
        assert_eq!(sup.len() + 1, main.len(), "superdiagonal length must be N - 1");
        TridiagonalOperator { sub, main, sup, coupling_left, coupling_right }
    }

    pub fn n(&self) -> usize {
        self.main.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn main(&self) -> &[f64] {
        &self.main
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn coupling_left(&self) -> f64 {
        self.coupling_left
    }

    pub fn coupling_right(&self) -> f64 {
        self.coupling_right
    }

    /// Product with an interior vector under zero boundary values.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(u.len(), n, "state length must match operator size");
        (0..n)
            .map(|j| {
                let mut acc = self.main[j] * u[j];
                if j > 0 {
                    acc += self.sub[j - 1] * u[j - 1];
                }
                if j + 1 < n {
                    acc += self.sup[j] * u[j + 1];
                }
                acc
            })
            .collect()
    }

    /// Product with a full state of length `N + 2`, including the boundary
    /// couplings; returns the `N` interior rows.
    pub fn apply_with_boundary(&self, u_full: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(u_full.len(), n + 2, "full state length must be N + 2");
        let mut out = self.apply(&u_full[1..=n]);
        out[0] += self.coupling_left * u_full[0];
        out[n - 1] += self.coupling_right * u_full[n + 1];
        out
    }
}

/// Assembles the spatial operator at time `t` for the chosen scheme.
pub fn assemble(
    mesh: &Mesh,
    model: &DivergenceModel,
    t: f64,
    scheme: SchemeKind,
) -> Result<TridiagonalOperator, FluxError> {
    let co = model.coefficients_at(t);
    let taus = transmissibilities(mesh, co.a)?;
    let n = mesh.n_interior();
    let dual = mesh.dual_lengths();
    let b_plus = co.b.max(0.0);
    let b_minus = co.b.min(0.0);

    let mut sub = Vec::with_capacity(n - 1);
    let mut main = Vec::with_capacity(n);
    let mut sup = Vec::with_capacity(n - 1);

    for i in 1..=n {
        let x_left = mesh.midpoint(i - 1);
        let x_right = mesh.midpoint(i);
        let mut diag =
            taus[i] + taus[i - 1] - x_right * b_minus + x_left * b_plus + co.c * dual[i];
        if i == 1 && scheme == SchemeKind::FittedTpfa {
            diag = taus[1] - x_right * b_minus + 0.25 * mesh.node(1) * (co.a + co.b)
                + co.c * dual[1];
        }
        main.push(diag);
        if i > 1 {
            sub.push(-taus[i - 1] + x_left * b_minus);
        }
        if i < n {
            sup.push(-taus[i] - x_right * b_plus);
        }
    }

    let coupling_left = match scheme {
        SchemeKind::Tpfa => -taus[0] + mesh.midpoint(0) * b_minus,
        SchemeKind::FittedTpfa => -0.25 * mesh.node(1) * (co.a - co.b),
    };
    let coupling_right = -taus[n] - mesh.midpoint(n) * b_plus;

    Ok(TridiagonalOperator { sub, main, sup, coupling_left, coupling_right })
}

/// Discrete bilinear form value `v . (A u)` for zero-boundary states.
///
/// Not symmetric in general: upwinding orients the convective part.
pub fn bilinear_value(op: &TridiagonalOperator, u: &[f64], v: &[f64]) -> f64 {
    op.apply(u).iter().zip(v).map(|(au, vi)| au * vi).sum()
}
