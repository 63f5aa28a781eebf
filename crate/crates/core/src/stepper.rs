//! Mass-lumped theta-Euler time stepping for the divergence-form equation.
//!
//! Each step solves one tridiagonal system
//!
//! ```text
//! [diag(l_i / dt) + theta A(t_{m+theta})] u^{m+1}
//!     = [diag(l_i / dt) - (1 - theta) A(t_{m+theta})] u^m
//!       + l_i (theta f^{m+1}_i + (1 - theta) f^m_i),
//! ```
//!
//! with the spatial operator frozen at the intermediate time
//! `t_{m+theta} = t_m + theta dt`.  The left-hand matrix inherits strict
//! diagonal dominance from the operator rows, so the Thomas algorithm runs
//! without pivoting.

use thiserror::Error;

use crate::flux::{self, SchemeKind, TridiagonalOperator};
use crate::mesh::Mesh;
use crate::model::DivergenceModel;

#[derive(Debug, Error)]
pub enum StepperError {
    #[error("theta must lie in [0, 1], got {theta}")]
    BadTheta { theta: f64 },
    #[error("time grid needs t_0 = 0, got {got}")]
    GridStart { got: f64 },
    #[error("time grid must be strictly increasing and finite at index {index}")]
    GridOrder { index: usize },
    #[error("time grid needs at least one instant")]
    EmptyGrid,
    #[error("uniform time grid needs at least one step and a positive horizon")]
    BadUniformGrid,
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("elimination pivot vanished in row {row}")]
    SingularPivot { row: usize },
    #[error("time step {step} failed: {source}")]
    StepFailed { step: usize, source: Box<StepperError> },
    #[error(transparent)]
    Flux(#[from] flux::FluxError),
}

// ─── Time grid ───────────────────────────────────────────────────────────────

/// Strictly increasing time instants `t_0 = 0 < ... < t_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    instants: Vec<f64>,
}

impl TimeGrid {
    /// Uniform subdivision of `[0, maturity]` into `m` steps; the final
    /// instant equals `maturity` exactly.
    pub fn uniform(maturity: f64, m: usize) -> Result<Self, StepperError> {
        if m < 1 || !(maturity > 0.0) || !maturity.is_finite() {
            return Err(StepperError::BadUniformGrid);
        }
        let instants = (0..=m).map(|k| maturity * (k as f64 / m as f64)).collect();
        Ok(TimeGrid { instants })
    }

    /// Wraps explicit instants after validation.
    pub fn from_instants(instants: Vec<f64>) -> Result<Self, StepperError> {
        let first = *instants.first().ok_or(StepperError::EmptyGrid)?;
        if first != 0.0 {
            return Err(StepperError::GridStart { got: first });
        }
        for (index, w) in instants.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(StepperError::GridOrder { index: index + 1 });
            }
        }
        Ok(TimeGrid { instants })
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.instants.len() - 1
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn instant(&self, k: usize) -> f64 {
        self.instants[k]
    }

    pub fn horizon(&self) -> f64 {
        *self.instants.last().unwrap()
    }

    /// Width of step `m`, from `t_m` to `t_{m+1}`.
    pub fn step_width(&self, m: usize) -> f64 {
        self.instants[m + 1] - self.instants[m]
    }

    pub fn max_step_width(&self) -> f64 {
        (0..self.steps()).map(|m| self.step_width(m)).fold(0.0, f64::max)
    }
}

// ─── Step configuration ──────────────────────────────────────────────────────

/// Blending parameter and scheme choice for one march.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    theta: f64,
    scheme: SchemeKind,
}

impl StepConfig {
    pub fn new(theta: f64, scheme: SchemeKind) -> Result<Self, StepperError> {
        if !(0.0..=1.0).contains(&theta) || !theta.is_finite() {
            return Err(StepperError::BadTheta { theta });
        }
        Ok(StepConfig { theta, scheme })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    /// True when `theta < 1/2`, outside the unconditional stability range.
    pub fn theta_below_theory(&self) -> bool {
        self.theta < 0.5
    }
}

// ─── Storage policy and solution history ─────────────────────────────────────

/// How much of the time history a march retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoragePolicy {
    /// Full history when `(M + 1) N` stays at or below ten million entries,
    /// first and final state otherwise.
    Auto,
    Full,
    /// Only the initial and final states.
    FinalOnly,
}

impl StoragePolicy {
    fn keeps_everything(self, steps: usize, n: usize) -> bool {
        match self {
            StoragePolicy::Full => true,
            StoragePolicy::FinalOnly => false,
            StoragePolicy::Auto => (steps + 1).saturating_mul(n) <= 10_000_000,
        }
    }
}

/// Stored interior states with their time stamps; boundary entries are
/// identically zero and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl SolutionGrid {
    /// Bundles precomputed states; all states must share one length and
    /// pair up with the time stamps.
    pub fn from_states(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self, StepperError> {
        if times.len() != states.len() {
            return Err(StepperError::LengthMismatch { expected: times.len(), got: states.len() });
        }
        if times.is_empty() {
            return Err(StepperError::EmptyGrid);
        }
        let n = states[0].len();
        for s in &states {
            if s.len() != n {
                return Err(StepperError::LengthMismatch { expected: n, got: s.len() });
            }
        }
        Ok(SolutionGrid { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// State `k` extended by the homogeneous boundary entries.
    pub fn state_with_boundary(&self, k: usize) -> Vec<f64> {
        let inner = &self.states[k];
        let mut full = Vec::with_capacity(inner.len() + 2);
        full.push(0.0);
        full.extend_from_slice(inner);
        full.push(0.0);
        full
    }
}

// ─── Tridiagonal solve ───────────────────────────────────────────────────────

/// Thomas algorithm: one forward elimination and one back substitution.
///
/// The per-step matrices are strictly diagonally dominant, so plain
/// elimination is stable; a vanishing pivot is reported rather than divided
/// through.
pub fn thomas_solve(
    sub: &[f64],
    main: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, StepperError> {
    let n = main.len();
    if n == 0 {
        return Err(StepperError::EmptyGrid);
    }
    if sub.len() + 1 != n {
        return Err(StepperError::LengthMismatch { expected: n - 1, got: sub.len() });
    }
    if sup.len() + 1 != n {
        return Err(StepperError::LengthMismatch { expected: n - 1, got: sup.len() });
    }
    if rhs.len() != n {
        return Err(StepperError::LengthMismatch { expected: n, got: rhs.len() });
    }
    let mut diag = main.to_vec();
    let mut out = rhs.to_vec();
    for i in 1..n {
        let pivot = diag[i - 1];
        if pivot.abs() < 1e-300 {
            return Err(StepperError::SingularPivot { row: i - 1 });
        }
        let w = sub[i - 1] / pivot;
        diag[i] -= w * sup[i - 1];
        let prev = out[i - 1];
        out[i] -= w * prev;
    }
    let last = diag[n - 1];
    if last.abs() < 1e-300 {
        return Err(StepperError::SingularPivot { row: n - 1 });
    }
    out[n - 1] /= last;
    for i in (0..n - 1).rev() {
        out[i] = (out[i] - sup[i] * out[i + 1]) / diag[i];
    }
    Ok(out)
}

// ─── Stepping ────────────────────────────────────────────────────────────────

/// Advances one step with a preassembled operator and lumped source values
/// at the step endpoints.
pub fn step_with_operator(
    u: &[f64],
    mesh: &Mesh,
    op: &TridiagonalOperator,
    dt: f64,
    theta: f64,
    source_now: &[f64],
    source_next: &[f64],
) -> Result<Vec<f64>, StepperError> {
    let n = mesh.n_interior();
    if u.len() != n {
        return Err(StepperError::LengthMismatch { expected: n, got: u.len() });
    }
    let dual = mesh.dual_lengths();
    let au = op.apply(u);

    let mut lhs_main = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let mass = dual[i + 1] / dt;
        lhs_main.push(mass + theta * op.main()[i]);
        let blended_source = theta * source_next[i] + (1.0 - theta) * source_now[i];
        rhs.push(mass * u[i] - (1.0 - theta) * au[i] + dual[i + 1] * blended_source);
    }
    let lhs_sub: Vec<f64> = op.sub().iter().map(|&s| theta * s).collect();
    let lhs_sup: Vec<f64> = op.sup().iter().map(|&s| theta * s).collect();
    thomas_solve(&lhs_sub, &lhs_main, &lhs_sup, &rhs)
}

/// One theta step from `t_m` over width `dt`, assembling the operator at
/// `t_m + theta dt`.
pub fn theta_step(
    u: &[f64],
    mesh: &Mesh,
    model: &DivergenceModel,
    t_m: f64,
    dt: f64,
    config: StepConfig,
) -> Result<Vec<f64>, StepperError> {
    let op = flux::assemble(mesh, model, t_m + config.theta * dt, config.scheme)?;
    let f_now = source_vector(mesh, model, t_m);
    let f_next = source_vector(mesh, model, t_m + dt);
    step_with_operator(u, mesh, &op, dt, config.theta, &f_now, &f_next)
}

fn source_vector(mesh: &Mesh, model: &DivergenceModel, t: f64) -> Vec<f64> {
    (1..=mesh.n_interior()).map(|i| model.source_value(mesh.node(i), t)).collect()
}

/// Marches the initial state across the whole time grid.
///
/// Constant-coefficient models reuse one assembled operator for every step
/// of equal width; time-dependent coefficients reassemble at each
/// intermediate time.
pub fn march(
    initial: Vec<f64>,
    mesh: &Mesh,
    model: &DivergenceModel,
    grid: &TimeGrid,
    config: StepConfig,
    storage: StoragePolicy,
) -> Result<SolutionGrid, StepperError> {
    let n = mesh.n_interior();
    if initial.len() != n {
        return Err(StepperError::LengthMismatch { expected: n, got: initial.len() });
    }
    let steps = grid.steps();
    let keep_all = storage.keeps_everything(steps, n);

    let constant = model.constant_coefficients();
    let mut cached: Option<(f64, TridiagonalOperator)> = None;

    let mut times = vec![grid.instant(0)];
    let mut states = vec![initial];
    let mut f_now = source_vector(mesh, model, grid.instant(0));

    for m in 0..steps {
        let t_m = grid.instant(m);
        let dt = grid.step_width(m);
        let t_mid = t_m + config.theta * dt;

        let op = if constant {
            if cached.is_none() {
                cached = Some((t_mid, flux::assemble(mesh, model, t_mid, config.scheme)?));
            }
            &cached.as_ref().unwrap().1
        } else {
            cached = Some((t_mid, flux::assemble(mesh, model, t_mid, config.scheme)?));
            &cached.as_ref().unwrap().1
        };

        let f_next = source_vector(mesh, model, grid.instant(m + 1));
        let current = states.last().unwrap();
        let next = step_with_operator(current, mesh, op, dt, config.theta, &f_now, &f_next)
            .map_err(|e| StepperError::StepFailed { step: m, source: Box::new(e) })?;

        if keep_all || states.len() == 1 {
            times.push(grid.instant(m + 1));
            states.push(next);
        } else {
            *times.last_mut().unwrap() = grid.instant(m + 1);
            *states.last_mut().unwrap() = next;
        }
        f_now = f_next;
    }
    SolutionGrid::from_states(times, states)
}

// ─── Price extraction ────────────────────────────────────────────────────────

/// Option values on the full node set, one row per stored time.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    times: Vec<f64>,
    nodes: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl PriceSurface {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn final_row(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    /// Interior part of the final row, without the boundary columns.
    pub fn final_interior(&self) -> &[f64] {
        let row = self.final_row();
        &row[1..row.len() - 1]
    }
}

/// Back-transforms the stored states to option prices; the boundary columns
/// carry the boundary data exactly.
pub fn extract_prices(solution: &SolutionGrid, mesh: &Mesh, model: &DivergenceModel) -> PriceSurface {
    let beta = model.beta();
    let boundary = model.boundary();
    let values = solution
        .times()
        .iter()
        .zip(solution.states())
        .map(|(&t, state)| {
            let mut row = Vec::with_capacity(state.len() + 2);
            row.push(boundary.left(t));
            let growth = (beta * t).exp();
            for (j, &u) in state.iter().enumerate() {
                let v0 = model.lift_value(mesh.node(j + 1), t);
                row.push(growth * u + v0);
            }
            row.push(boundary.right(t));
            row
        })
        .collect();
    PriceSurface { times: solution.times().to_vec(), nodes: mesh.nodes().to_vec(), values }
}
