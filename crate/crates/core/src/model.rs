//! Market data and the divergence-form rewriting of the pricing equation.
//!
//! The Black-Scholes operator in time-to-maturity form,
//!
//! ```text
//! L V = dV/dt - 0.5 sigma(t)^2 x^2 V_xx - r(t) x V_x + r(t) V,
//! ```
//!
//! is rewritten for the solver as a conservation law for
//! `u = e^{-beta t} (V - V0)`, where `V0` is the linear-in-x lift of the
//! boundary values and `beta = sup sigma^2`.  The transformed unknown
//! satisfies
//!
//! ```text
//! u_t - d/dx [ a(t) x^2 u_x + b(t) x u ] + c(t) u = f(x, t)
//! ```
//!
//! with `a = sigma^2/2`, `b = r - sigma^2`, `c = 2r + beta - sigma^2` and
//! `f = -e^{-beta t} L V0`.  Homogenising with the lift gives zero boundary
//! values for `u`; the exponential damping is what shifts the reaction
//! coefficient up by `beta`, keeping it nonnegative.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Number of samples used when bounds or `beta` must be estimated.
const DEFAULT_SAMPLES: usize = 10_000;

/// Errors raised by model constructors and evaluators.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("strike must be positive and finite, got {strike}")]
    BadStrike { strike: f64 },
    #[error("maturity must be positive and finite, got {maturity}")]
    BadMaturity { maturity: f64 },
    #[error("domain end {x_max} must exceed the strike {strike}")]
    DomainTooSmall { x_max: f64, strike: f64 },
    #[error("rate is negative ({value}) near t = {t}")]
    NegativeRate { t: f64, value: f64 },
    #[error("volatility must stay positive, found {value} near t = {t}")]
    NonPositiveVolatility { t: f64, value: f64 },
    #[error("value of {what} is not finite near t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("beta = {beta} is below sigma(t)^2 = {sigma_sq} at t = {t}")]
    BetaTooSmall { beta: f64, sigma_sq: f64, t: f64 },
    #[error("piecewise function needs one more value than breakpoints")]
    PiecewiseShape,
    #[error("piecewise breakpoints must be strictly increasing and finite")]
    PiecewiseBreaks,
    #[error("boundary data is incompatible with the payoff at {where_}: payoff {payoff}, boundary {boundary}")]
    IncompatibleBoundary { where_: &'static str, payoff: f64, boundary: f64 },
}

// ─── Scalar functions of time ────────────────────────────────────────────────

/// A scalar coefficient as a function of time on `[0, T]`.
///
/// The parametric forms evaluate, integrate and bound themselves exactly;
/// `Custom` accepts any callable and falls back to sampling and composite
/// Simpson quadrature.
#[derive(Clone)]
pub enum TimeFunction {
    Constant(f64),
    Linear { intercept: f64, slope: f64 },
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFunction::Constant(v) => write!(f, "Constant({v})"),
            TimeFunction::Linear { intercept, slope } => {
                write!(f, "Linear {{ intercept: {intercept}, slope: {slope} }}")
            }
            TimeFunction::PiecewiseConstant { breaks, values } => {
                write!(f, "PiecewiseConstant {{ breaks: {breaks:?}, values: {values:?} }}")
            }
            TimeFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl TimeFunction {
    pub fn constant(value: f64) -> Self {
        TimeFunction::Constant(value)
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        TimeFunction::Linear { intercept, slope }
    }

    /// Right-continuous step function: `values[j]` holds on
    /// `[breaks[j-1], breaks[j])`, with the outer segments extending to 0 and
    /// infinity.  Needs `values.len() == breaks.len() + 1`.
    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != breaks.len() + 1 {
            return Err(ModelError::PiecewiseShape);
        }
        if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::PiecewiseBreaks);
        }
        Ok(TimeFunction::PiecewiseConstant { breaks, values })
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFunction::Custom(Arc::new(f))
    }

    /// Value at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(v) => *v,
            TimeFunction::Linear { intercept, slope } => intercept + slope * t,
            TimeFunction::PiecewiseConstant { breaks, values } => {
                let seg = breaks.partition_point(|&b| b <= t);
                values[seg]
            }
            TimeFunction::Custom(f) => f(t),
        }
    }

    /// Integral over `[0, t]`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(v) => v * t,
            TimeFunction::Linear { intercept, slope } => intercept * t + 0.5 * slope * t * t,
            TimeFunction::PiecewiseConstant { breaks, values } => {
                let mut acc = 0.0;
                let mut left = 0.0;
                for (j, &b) in breaks.iter().enumerate() {
                    if b >= t {
                        break;
                    }
                    if b > left {
                        acc += values[j] * (b - left);
                        left = b;
                    }
                }
                let seg = breaks.partition_point(|&b| b < t);
                acc + values[seg] * (t - left)
            }
            TimeFunction::Custom(f) => simpson(f.as_ref(), 0.0, t, 2048),
        }
    }

    /// Smallest and largest value attained on `[0, horizon]`.
    pub fn bounds(&self, horizon: f64) -> (f64, f64) {
        match self {
            TimeFunction::Constant(v) => (*v, *v),
            TimeFunction::Linear { .. } => {
                let (u, v) = (self.value(0.0), self.value(horizon));
                (u.min(v), u.max(v))
            }
            TimeFunction::PiecewiseConstant { breaks, values } => {
                let last = breaks.partition_point(|&b| b < horizon);
                let slice = &values[..=last];
                let lo = slice.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            TimeFunction::Custom(f) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for k in 0..=DEFAULT_SAMPLES {
                    let v = f(horizon * k as f64 / DEFAULT_SAMPLES as f64);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        }
    }

    /// True for the exactly constant parametric form.
    pub fn is_constant(&self) -> bool {
        matches!(self, TimeFunction::Constant(_))
    }
}

fn simpson(f: &(dyn Fn(f64) -> f64 + Send + Sync), a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

// ─── Market data ─────────────────────────────────────────────────────────────

/// Contract and market description for a single option pricing problem.
#[derive(Debug, Clone)]
pub struct MarketData {
    rate: TimeFunction,
    volatility: TimeFunction,
    strike: f64,
    maturity: f64,
    x_max: f64,
    rate_bounds: (f64, f64),
    vol_bounds: (f64, f64),
}

impl MarketData {
    /// Validates the contract data and the coefficient bounds.
    ///
    /// The rate must be nonnegative and the volatility strictly positive on
    /// `[0, maturity]`; the truncated domain must contain the strike.
    pub fn new(
        rate: TimeFunction,
        volatility: TimeFunction,
        strike: f64,
        maturity: f64,
        x_max: f64,
    ) -> Result<Self, ModelError> {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(ModelError::BadStrike { strike });
        }
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(ModelError::BadMaturity { maturity });
        }
        if !(x_max > strike) || !x_max.is_finite() {
            return Err(ModelError::DomainTooSmall { x_max, strike });
        }
        let rate_bounds = rate.bounds(maturity);
        if !rate_bounds.0.is_finite() || !rate_bounds.1.is_finite() {
            return Err(ModelError::NonFinite { what: "rate", t: maturity });
        }
        if rate_bounds.0 < 0.0 {
            return Err(ModelError::NegativeRate { t: maturity, value: rate_bounds.0 });
        }
        let vol_bounds = volatility.bounds(maturity);
        if !vol_bounds.0.is_finite() || !vol_bounds.1.is_finite() {
            return Err(ModelError::NonFinite { what: "volatility", t: maturity });
        }
        if vol_bounds.0 <= 0.0 {
            return Err(ModelError::NonPositiveVolatility { t: maturity, value: vol_bounds.0 });
        }
        Ok(MarketData { rate, volatility, strike, maturity, x_max, rate_bounds, vol_bounds })
    }

    /// Constant-coefficient convenience constructor.
    pub fn constant(r: f64, sigma: f64, strike: f64, maturity: f64, x_max: f64) -> Result<Self, ModelError> {
        Self::new(TimeFunction::constant(r), TimeFunction::constant(sigma), strike, maturity, x_max)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.rate.value(t)
    }

    pub fn volatility(&self, t: f64) -> f64 {
        self.volatility.value(t)
    }

    pub fn rate_fn(&self) -> &TimeFunction {
        &self.rate
    }

    pub fn volatility_fn(&self) -> &TimeFunction {
        &self.volatility
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// `(inf r, sup r)` over the life of the contract.
    pub fn rate_range(&self) -> (f64, f64) {
        self.rate_bounds
    }

    /// `(inf sigma, sup sigma)` over the life of the contract.
    pub fn volatility_range(&self) -> (f64, f64) {
        self.vol_bounds
    }

    /// Discount factor `exp(-int_0^t r)`.
    pub fn discount(&self, t: f64) -> f64 {
        (-self.rate.integral(t)).exp()
    }

    /// `Some((r, sigma))` when both coefficients are exactly constant.
    pub fn constant_coefficients(&self) -> Option<(f64, f64)> {
        match (&self.rate, &self.volatility) {
            (TimeFunction::Constant(r), TimeFunction::Constant(s)) => Some((*r, *s)),
            _ => None,
        }
    }
}

/// Least upper bound for `sigma(t)^2` over `[0, maturity]`, estimated from
/// `n_samples + 1` uniform samples.  Exact for the parametric forms.
pub fn beta_of(market: &MarketData, n_samples: usize) -> f64 {
    match market.volatility_fn() {
        TimeFunction::Custom(_) => {
            let n = n_samples.max(1);
            let horizon = market.maturity();
            let mut hi = f64::NEG_INFINITY;
            for k in 0..=n {
                let s = market.volatility(horizon * k as f64 / n as f64);
                hi = hi.max(s * s);
            }
            hi
        }
        _ => {
            let (lo, hi) = market.volatility_range();
            (lo * lo).max(hi * hi)
        }
    }
}

// ─── Boundary data ───────────────────────────────────────────────────────────

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Payoff and endpoint values, together with the time derivatives of the
/// endpoint values (needed for the source term of the lifted equation).
#[derive(Clone)]
pub struct BoundaryData {
    payoff: ScalarFn,
    left: ScalarFn,
    left_dt: ScalarFn,
    right: ScalarFn,
    right_dt: ScalarFn,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData { .. }")
    }
}

impl BoundaryData {
    /// Validating constructor for arbitrary boundary families.
    ///
    /// Requires the payoff to match both endpoint values at `t = 0` so the
    /// homogenised initial state vanishes at the boundary.
    pub fn new(
        payoff: impl Fn(f64) -> f64 + Send + Sync + 'static,
        left: impl Fn(f64) -> f64 + Send + Sync + 'static,
        left_dt: impl Fn(f64) -> f64 + Send + Sync + 'static,
        right: impl Fn(f64) -> f64 + Send + Sync + 'static,
        right_dt: impl Fn(f64) -> f64 + Send + Sync + 'static,
        x_max: f64,
    ) -> Result<Self, ModelError> {
        let data = BoundaryData {
            payoff: Arc::new(payoff),
            left: Arc::new(left),
            left_dt: Arc::new(left_dt),
            right: Arc::new(right),
            right_dt: Arc::new(right_dt),
        };
        let scale = |a: f64, b: f64| 1e-9 * (1.0 + a.abs().max(b.abs()));
        let (p0, l0) = (data.payoff(0.0), data.left(0.0));
        if (p0 - l0).abs() > scale(p0, l0) {
            return Err(ModelError::IncompatibleBoundary { where_: "x = 0", payoff: p0, boundary: l0 });
        }
        let (pm, r0) = (data.payoff(x_max), data.right(0.0));
        if (pm - r0).abs() > scale(pm, r0) {
            return Err(ModelError::IncompatibleBoundary { where_: "x = x_max", payoff: pm, boundary: r0 });
        }
        Ok(data)
    }

    /// European call: payoff `(x - K)^+`, zero on the left boundary and the
    /// discounted forward value `x_max - K exp(-int r)` on the right.
    pub fn european_call(market: &MarketData) -> Self {
        let k = market.strike();
        let x_max = market.x_max();
        let rate = market.rate_fn().clone();
        let rate_dt = market.rate_fn().clone();
        BoundaryData {
            payoff: Arc::new(move |x: f64| (x - k).max(0.0)),
            left: Arc::new(|_| 0.0),
            left_dt: Arc::new(|_| 0.0),
            right: Arc::new(move |t: f64| x_max - k * (-rate.integral(t)).exp()),
            right_dt: Arc::new(move |t: f64| {
                k * rate_dt.value(t) * (-rate_dt.integral(t)).exp()
            }),
        }
    }

    /// Identically zero boundary family (zero payoff and endpoint values).
    pub fn zero() -> Self {
        BoundaryData {
            payoff: Arc::new(|_| 0.0),
            left: Arc::new(|_| 0.0),
            left_dt: Arc::new(|_| 0.0),
            right: Arc::new(|_| 0.0),
            right_dt: Arc::new(|_| 0.0),
        }
    }

    pub fn payoff(&self, x: f64) -> f64 {
        (self.payoff)(x)
    }

    pub fn left(&self, t: f64) -> f64 {
        (self.left)(t)
    }

    pub fn left_dt(&self, t: f64) -> f64 {
        (self.left_dt)(t)
    }

    pub fn right(&self, t: f64) -> f64 {
        (self.right)(t)
    }

    pub fn right_dt(&self, t: f64) -> f64 {
        (self.right_dt)(t)
    }
}

// ─── Divergence-form model ───────────────────────────────────────────────────

/// Coefficient triple of the divergence-form equation frozen at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// Diffusion scale `a = sigma^2 / 2`.
    pub a: f64,
    /// Convection scale `b = r - sigma^2`.
    pub b: f64,
    /// Reaction coefficient `c = 2r + beta - sigma^2`.
    pub c: f64,
}

/// Market data, boundary family and the transform parameter `beta` bundled
/// for the solver.
#[derive(Debug, Clone)]
pub struct DivergenceModel {
    market: MarketData,
    boundary: BoundaryData,
    beta: f64,
}

impl DivergenceModel {
    /// Builds the model with an explicit `beta`, which must dominate
    /// `sigma(t)^2` on the sampled time grid.
    pub fn new(market: MarketData, boundary: BoundaryData, beta: f64) -> Result<Self, ModelError> {
        let samples = 1000usize;
        for k in 0..=samples {
            let t = market.maturity() * k as f64 / samples as f64;
            let s2 = market.volatility(t).powi(2);
            if beta < s2 * (1.0 - 1e-10) {
                return Err(ModelError::BetaTooSmall { beta, sigma_sq: s2, t });
            }
        }
        Ok(DivergenceModel { market, boundary, beta })
    }

    /// European call model with `beta` estimated from the default sample
    /// count.
    pub fn european_call(market: MarketData) -> Result<Self, ModelError> {
        let beta = beta_of(&market, DEFAULT_SAMPLES);
        let boundary = BoundaryData::european_call(&market);
        Self::new(market, boundary, beta)
    }

    pub fn market(&self) -> &MarketData {
        &self.market
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Divergence-form coefficients at time `t`.
    pub fn coefficients_at(&self, t: f64) -> Coefficients {
        let r = self.market.rate(t);
        let s2 = self.market.volatility(t).powi(2);
        Coefficients { a: 0.5 * s2, b: r - s2, c: 2.0 * r + self.beta - s2 }
    }

    /// Linear boundary lift `V0(x, t)`.
    pub fn lift_value(&self, x: f64, t: f64) -> f64 {
        let g2 = self.boundary.left(t);
        let g3 = self.boundary.right(t);
        g2 + x / self.market.x_max() * (g3 - g2)
    }

    /// Spatial slope of the lift (independent of `x`).
    pub fn lift_dx(&self, t: f64) -> f64 {
        (self.boundary.right(t) - self.boundary.left(t)) / self.market.x_max()
    }

    /// Time derivative of the lift.
    pub fn lift_dt(&self, x: f64, t: f64) -> f64 {
        let g2 = self.boundary.left_dt(t);
        let g3 = self.boundary.right_dt(t);
        g2 + x / self.market.x_max() * (g3 - g2)
    }

    /// Source `f(x, t) = -e^{-beta t} L V0` of the lifted equation.
    ///
    /// The lift is linear in `x`, so its second spatial derivative drops and
    /// the operator reduces to `V0_t - r x V0_x + r V0` in closed form.
    pub fn source_value(&self, x: f64, t: f64) -> f64 {
        let r = self.market.rate(t);
        let l_v0 = self.lift_dt(x, t) - r * x * self.lift_dx(t) + r * self.lift_value(x, t);
        -(-self.beta * t).exp() * l_v0
    }

    /// Homogenised initial state `u(x_i, 0) = payoff(x_i) - V0(x_i, 0)` at
    /// the interior nodes.
    pub fn initial_state(&self, mesh: &crate::mesh::Mesh) -> Vec<f64> {
        let n = mesh.n_interior();
        (1..=n)
            .map(|i| {
                let x = mesh.node(i);
                self.boundary.payoff(x) - self.lift_value(x, 0.0)
            })
            .collect()
    }

    /// True when both market coefficients are exactly constant in time.
    pub fn constant_coefficients(&self) -> bool {
        self.market.constant_coefficients().is_some()
    }

    /// True when the reaction coefficient can reach zero (`inf r = 0`), which
    /// weakens the zeroth-order part of the stability bound.
    pub fn degenerate_reaction(&self) -> bool {
        self.market.rate_range().0 == 0.0
    }
}

/// Forward transform `u = e^{-beta t} (V - V0)`.
pub fn transform_forward(v: f64, v0: f64, beta: f64, t: f64) -> f64 {
    (-beta * t).exp() * (v - v0)
}

/// Inverse transform `V = e^{beta t} u + V0`.
pub fn transform_back(u: f64, v0: f64, beta: f64, t: f64) -> f64 {
    (beta * t).exp() * u + v0
}
