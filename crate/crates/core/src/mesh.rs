//! Spatial grids for the finite-volume discretisation.
//!
//! A mesh over `[0, x_max]` is a strictly increasing node list
//! `x_0 = 0 < x_1 < ... < x_{N+1} = x_max`.  The N interior nodes carry the
//! unknowns.  Control volumes are centred on the nodes and bounded by the
//! primal-cell midpoints, with the half cells at both ends closed by the
//! domain boundary itself.

use thiserror::Error;

/// Errors raised by mesh constructors.
#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("need at least 2 interior nodes, got {got}")]
    TooFewInterior { got: usize },
    #[error("domain length must be positive and finite, got {x_max}")]
    NonPositiveDomain { x_max: f64 },
    #[error("grading ratio must be positive and finite, got {ratio}")]
    NonPositiveRatio { ratio: f64 },
    #[error("grading ratio {ratio} with {n} interior nodes is not representable")]
    RatioOverflow { ratio: f64, n: usize },
    #[error("need at least 4 nodes (2 interior), got {got}")]
    TooFewNodes { got: usize },
    #[error("first node must be 0, got {got}")]
    FirstNodeNonzero { got: f64 },
    #[error("nodes must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },
    #[error("node at index {index} is not finite")]
    NonFinite { index: usize },
}

/// Vertex-centred finite-volume mesh on `[0, x_max]`.
///
/// Index conventions, with N interior nodes:
/// * `nodes[i]` is `x_i` for `i = 0..=N+1`
/// * `midpoints[i]` is the interface `x_{i+1/2}` for `i = 0..=N`; the outer
///   interfaces are pinned to the boundary, `x_{-1/2} = 0` and
///   `x_{N+3/2} = x_max`
/// * `primal_lengths[i]` is `h_i = x_{i+1} - x_i` for `i = 0..=N`
/// * `dual_lengths[i]` is the control-volume length `l_i` for `i = 0..=N+1`;
///   the end cells are half cells
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<f64>,
    midpoints: Vec<f64>,
    primal: Vec<f64>,
    dual: Vec<f64>,
}

// ─── Construction ────────────────────────────────────────────────────────────

impl Mesh {
    /// Uniform mesh with `n_interior` interior nodes on `[0, x_max]`.
    pub fn uniform(n_interior: usize, x_max: f64) -> Result<Self, MeshError> {
        check_counts(n_interior, x_max)?;
        let n = n_interior;
        let h = x_max / (n + 1) as f64;
        let mut nodes: Vec<f64> = (0..=n + 1).map(|i| i as f64 * h).collect();
        nodes[n + 1] = x_max;
        Self::from_nodes(nodes)
    }

    /// Graded mesh whose primal lengths grow by `ratio` from left to right,
    /// rescaled so the cells tile `[0, x_max]` exactly.
    pub fn geometric(n_interior: usize, x_max: f64, ratio: f64) -> Result<Self, MeshError> {
        check_counts(n_interior, x_max)?;
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(MeshError::NonPositiveRatio { ratio });
        }
        let n = n_interior;
        if (ratio - 1.0).abs() < 1e-14 {
            return Self::uniform(n, x_max);
        }
        // node_i / x_max = (ratio^i - 1) / (ratio^{n+1} - 1), evaluated in a
        // form that stays finite for strong grading and large n.
        let log_r = ratio.ln();
        let cells = (n + 1) as f64;
        let mut nodes = Vec::with_capacity(n + 2);
        for i in 0..=n + 1 {
            let fi = i as f64;
            let frac = if ratio > 1.0 {
                ((fi - cells) * log_r).exp() * (-fi * log_r).exp_m1() / (-cells * log_r).exp_m1()
            } else {
                (fi * log_r).exp_m1() / (cells * log_r).exp_m1()
            };
            nodes.push(x_max * frac);
        }
        nodes[n + 1] = x_max;
        Self::from_nodes(nodes).map_err(|e| match e {
            MeshError::NotIncreasing { .. } | MeshError::FirstNodeNonzero { .. } => {
                MeshError::RatioOverflow { ratio, n: n_interior }
            }
            other => other,
        })
    }

    /// Builds a mesh from an arbitrary node list after validating it.
    ///
    /// The list must start at exactly 0, be strictly increasing and finite,
    /// and contain at least two interior nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, MeshError> {
        if nodes.len() < 4 {
            return Err(MeshError::TooFewNodes { got: nodes.len() });
        }
        for (i, &x) in nodes.iter().enumerate() {
            if !x.is_finite() {
                return Err(MeshError::NonFinite { index: i });
            }
        }
        if nodes[0] != 0.0 {
            return Err(MeshError::FirstNodeNonzero { got: nodes[0] });
        }
        for i in 1..nodes.len() {
            if nodes[i] <= nodes[i - 1] {
                return Err(MeshError::NotIncreasing { index: i });
            }
        }

        let n = nodes.len() - 2;
        let x_max = nodes[n + 1];
        let midpoints: Vec<f64> = (0..=n).map(|i| 0.5 * (nodes[i] + nodes[i + 1])).collect();
        let primal: Vec<f64> = (0..=n).map(|i| nodes[i + 1] - nodes[i]).collect();
        let mut dual = Vec::with_capacity(n + 2);
        dual.push(midpoints[0]);
        for i in 1..=n {
            dual.push(midpoints[i] - midpoints[i - 1]);
        }
        dual.push(x_max - midpoints[n]);

        Ok(Mesh { nodes, midpoints, primal, dual })
    }
}

fn check_counts(n_interior: usize, x_max: f64) -> Result<(), MeshError> {
    if n_interior < 2 {
        return Err(MeshError::TooFewInterior { got: n_interior });
    }
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(MeshError::NonPositiveDomain { x_max });
    }
    Ok(())
}

// ─── Accessors ───────────────────────────────────────────────────────────────

impl Mesh {
    /// Number of interior nodes N (the number of unknowns).
    pub fn n_interior(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Right end of the domain.
    pub fn x_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// All nodes `x_0..=x_{N+1}`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node `x_i`, `i = 0..=N+1`.
    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Interface positions `x_{i+1/2}`, `i = 0..=N`.
    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// Interface `x_{i+1/2}`, `i = 0..=N`.
    pub fn midpoint(&self, i: usize) -> f64 {
        self.midpoints[i]
    }

    /// Primal lengths `h_i`, `i = 0..=N`.
    pub fn primal_lengths(&self) -> &[f64] {
        &self.primal
    }

    /// Primal length `h_i = x_{i+1} - x_i`.
    pub fn primal(&self, i: usize) -> f64 {
        self.primal[i]
    }

    /// Control-volume lengths `l_i`, `i = 0..=N+1`.
    pub fn dual_lengths(&self) -> &[f64] {
        &self.dual
    }

    /// Control-volume length `l_i`.
    pub fn dual(&self, i: usize) -> f64 {
        self.dual[i]
    }

    /// Largest ratio between adjacent control-volume lengths.
    ///
    /// Uniform meshes return 2 because the boundary cells are half cells.
    pub fn quasi_uniformity_constant(&self) -> f64 {
        let mut c: f64 = 1.0;
        for w in self.dual.windows(2) {
            c = c.max(w[1] / w[0]).max(w[0] / w[1]);
        }
        c
    }
}
