//! Run configuration: defaults, validation, and the flat key=value format
//! shared by configuration files and CLI overrides.

use std::path::PathBuf;

use bsfv::flux::SchemeKind;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("field {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("field {field}: cannot parse `{value}`")]
    BadValue { field: &'static str, value: String },
    #[error("unknown configuration key `{key}`")]
    UnknownKey { key: String },
    #[error("line {line} is not a key=value pair: `{text}`")]
    BadLine { line: usize, text: String },
    #[error("a study sweep needs at least two points, got {got}")]
    SweepTooShort { got: usize },
    #[error("study sweep values must increase strictly: {previous} then {next}")]
    SweepNotIncreasing { previous: usize, next: usize },
    #[error("a study needs at least one scheme")]
    NoSchemes,
}

/// Primal mesh family for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFamily {
    Uniform,
    Geometric,
}

impl MeshFamily {
    pub fn key(self) -> &'static str {
        match self {
            MeshFamily::Uniform => "uniform",
            MeshFamily::Geometric => "geometric",
        }
    }
}

/// Error norms a run can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormChoice {
    L2,
    Relative,
    Max,
}

impl NormChoice {
    pub fn key(self) -> &'static str {
        match self {
            NormChoice::L2 => "l2",
            NormChoice::Relative => "rel",
            NormChoice::Max => "max",
        }
    }
}

pub fn parse_scheme(value: &str) -> Result<SchemeKind, ConfigError> {
    match value {
        "tpfa" => Ok(SchemeKind::Tpfa),
        "fitted" => Ok(SchemeKind::FittedTpfa),
        other => Err(ConfigError::BadValue { field: "scheme", value: other.to_string() }),
    }
}

pub fn parse_mesh(value: &str) -> Result<MeshFamily, ConfigError> {
    match value {
        "uniform" => Ok(MeshFamily::Uniform),
        "geometric" => Ok(MeshFamily::Geometric),
        other => Err(ConfigError::BadValue { field: "mesh", value: other.to_string() }),
    }
}

pub fn parse_norms(value: &str) -> Result<Vec<NormChoice>, ConfigError> {
    let mut norms = Vec::new();
    for part in value.split(',') {
        let choice = match part.trim() {
            "l2" => NormChoice::L2,
            "rel" => NormChoice::Relative,
            "max" => NormChoice::Max,
            other => {
                return Err(ConfigError::BadValue { field: "norms", value: other.to_string() })
            }
        };
        if !norms.contains(&choice) {
            norms.push(choice);
        }
    }
    if norms.is_empty() {
        return Err(ConfigError::Invalid {
            field: "norms",
            message: "at least one norm must be requested".to_string(),
        });
    }
    Ok(norms)
}

/// Full description of one solver run.  Defaults reproduce the reference
/// configuration: r = 0.1, sigma = 0.5, K = 100, x_max = 300, T = 1,
/// theta = 0.5, a uniform mesh with 100 interior nodes and 100 time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub n_interior: usize,
    pub m_steps: usize,
    pub theta: f64,
    pub r: f64,
    pub sigma: f64,
    pub strike: f64,
    pub maturity: f64,
    pub x_max: f64,
    pub mesh: MeshFamily,
    pub ratio: f64,
    pub norms: Vec<NormChoice>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: SchemeKind::FittedTpfa,
            n_interior: 100,
            m_steps: 100,
            theta: 0.5,
            r: 0.1,
            sigma: 0.5,
            strike: 100.0,
            maturity: 1.0,
            x_max: 300.0,
            mesh: MeshFamily::Uniform,
            ratio: 1.2,
            norms: vec![NormChoice::L2, NormChoice::Relative, NormChoice::Max],
            out: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Applies one key=value assignment in the flat configuration format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "scheme" => self.scheme = parse_scheme(value)?,
            "n" => self.n_interior = parse_num("n", value)?,
            "m" => self.m_steps = parse_num("m", value)?,
            "theta" => self.theta = parse_float("theta", value)?,
            "r" => self.r = parse_float("r", value)?,
            "sigma" => self.sigma = parse_float("sigma", value)?,
            "strike" => self.strike = parse_float("strike", value)?,
            "maturity" => self.maturity = parse_float("maturity", value)?,
            "xmax" => self.x_max = parse_float("xmax", value)?,
            "mesh" => self.mesh = parse_mesh(value)?,
            "ratio" => self.ratio = parse_float("ratio", value)?,
            "norms" => self.norms = parse_norms(value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(ConfigError::UnknownKey { key: other.to_string() }),
        }
        Ok(())
    }

    /// Serialises the configuration in the same key=value format `parse`
    /// accepts, one assignment per line.
    pub fn to_key_values(&self) -> String {
        let norms: Vec<&str> = self.norms.iter().map(|n| n.key()).collect();
        format!(
            "scheme={}\nn={}\nm={}\ntheta={}\nr={}\nsigma={}\nstrike={}\nmaturity={}\nxmax={}\nmesh={}\nratio={}\nnorms={}\nout={}\n",
            self.scheme,
            self.n_interior,
            self.m_steps,
            self.theta,
            self.r,
            self.sigma,
            self.strike,
            self.maturity,
            self.x_max,
            self.mesh.key(),
            self.ratio,
            norms.join(","),
            self.out.display(),
        )
    }

    /// Parses the flat key=value format, then validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: idx + 1,
                text: line.to_string(),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Field-by-field validation with the offending field named.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid { field, message: format!("must be positive, got {v}") })
            }
        };
        if self.n_interior == 0 {
            return Err(ConfigError::Invalid {
                field: "n",
                message: "needs at least one interior node".to_string(),
            });
        }
        if self.m_steps == 0 {
            return Err(ConfigError::Invalid {
                field: "m",
                message: "needs at least one time step".to_string(),
            });
        }
        if !(0.0..=1.0).contains(&self.theta) || !self.theta.is_finite() {
            return Err(ConfigError::Invalid {
                field: "theta",
                message: format!("must lie in [0, 1], got {}", self.theta),
            });
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(ConfigError::Invalid {
                field: "r",
                message: format!("must be nonnegative, got {}", self.r),
            });
        }
        positive("sigma", self.sigma)?;
        positive("strike", self.strike)?;
        positive("maturity", self.maturity)?;
        positive("xmax", self.x_max)?;
        if self.x_max <= self.strike {
            return Err(ConfigError::Invalid {
                field: "xmax",
                message: format!("must exceed the strike {}, got {}", self.strike, self.x_max),
            });
        }
        positive("ratio", self.ratio)?;
        if self.norms.is_empty() {
            return Err(ConfigError::Invalid {
                field: "norms",
                message: "at least one norm must be requested".to_string(),
            });
        }
        Ok(())
    }
}

fn parse_num(field: &'static str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::BadValue { field, value: value.to_string() })
}

fn parse_float(field: &'static str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::BadValue { field, value: value.to_string() })
}

/// Which resolution axis a study sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Space,
    Time,
}

/// A convergence-study request: the sweep axis, its values, the schemes to
/// compare, and the fixed mesh width a time study keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub sweep: SweepVariable,
    pub values: Vec<usize>,
    pub schemes: Vec<SchemeKind>,
    pub fixed_h: f64,
}

impl StudySpec {
    pub fn space(values: Vec<usize>, schemes: Vec<SchemeKind>) -> Result<Self, ConfigError> {
        let spec = StudySpec { sweep: SweepVariable::Space, values, schemes, fixed_h: 0.25 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn time(
        values: Vec<usize>,
        schemes: Vec<SchemeKind>,
        fixed_h: f64,
    ) -> Result<Self, ConfigError> {
        let spec = StudySpec { sweep: SweepVariable::Time, values, schemes, fixed_h };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.values.len() < 2 {
            return Err(ConfigError::SweepTooShort { got: self.values.len() });
        }
        for pair in self.values.windows(2) {
            if pair[1] <= pair[0] {
                return Err(ConfigError::SweepNotIncreasing {
                    previous: pair[0],
                    next: pair[1],
                });
            }
        }
        if self.schemes.is_empty() {
            return Err(ConfigError::NoSchemes);
        }
        if !(self.fixed_h > 0.0) || !self.fixed_h.is_finite() {
            return Err(ConfigError::Invalid {
                field: "h",
                message: format!("must be positive, got {}", self.fixed_h),
            });
        }
        Ok(())
    }
}

/// Parses a comma-separated sweep list such as `100,200,400`.
pub fn parse_sweep_values(text: &str) -> Result<Vec<usize>, ConfigError> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| ConfigError::BadValue { field: "values", value: part.to_string() })
        })
        .collect()
}
