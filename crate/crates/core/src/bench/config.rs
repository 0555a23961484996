//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleId {
    Scalar,
    Arctan,
    Robot2dof,
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "scalar" => Ok(ExampleId::Scalar),
            "arctan" => Ok(ExampleId::Arctan),
            "robot2dof" => Ok(ExampleId::Robot2dof),
            other => Err(Error::Config(format!(
                "unknown example '{other}' (expected scalar, arctan, or robot2dof)"
            ))),
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleId::Scalar => write!(f, "scalar"),
            ExampleId::Arctan => write!(f, "arctan"),
            ExampleId::Robot2dof => write!(f, "robot2dof"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerId {
    None,
    IssfFeedback,
    Universal,
    Qp,
    IssfQp,
    MinNorm,
}

impl FromStr for ControllerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "none" => Ok(ControllerId::None),
            "issf_feedback" => Ok(ControllerId::IssfFeedback),
            "universal" => Ok(ControllerId::Universal),
            "qp" => Ok(ControllerId::Qp),
            "issf_qp" => Ok(ControllerId::IssfQp),
            "min_norm" => Ok(ControllerId::MinNorm),
            other => Err(Error::Config(format!(
                "unknown controller '{other}' (expected none, issf_feedback, universal, qp, issf_qp, or min_norm)"
            ))),
        }
    }
}

impl fmt::Display for ControllerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerId::None => write!(f, "none"),
            ControllerId::IssfFeedback => write!(f, "issf_feedback"),
            ControllerId::Universal => write!(f, "universal"),
            ControllerId::Qp => write!(f, "qp"),
            ControllerId::IssfQp => write!(f, "issf_qp"),
            ControllerId::MinNorm => write!(f, "min_norm"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisturbanceKind {
    Constant,
    Sinusoid,
}

impl FromStr for DisturbanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "constant" => Ok(DisturbanceKind::Constant),
            "sinusoid" => Ok(DisturbanceKind::Sinusoid),
            other => Err(Error::Config(format!(
                "unknown disturbance kind '{other}' (expected constant or sinusoid)"
            ))),
        }
    }
}

impl fmt::Display for DisturbanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DisturbanceKind::Constant => write!(f, "constant"),
            DisturbanceKind::Sinusoid => write!(f, "sinusoid"),
        }
    }
}

/// Physical parameters and gains of the robot example.
#[derive(Clone, Debug)]
pub struct RobotParams {
    pub m_link: f64,
    pub big_m: f64,
    pub length: f64,
    /// Scalar multiple of the identity used as the CLF position gain `K_p`.
    pub clf_kp: f64,
    /// Scalar multiple of the identity used as the CLF decay gain `K_d`.
    pub clf_kd: f64,
    /// Exponential-barrier gain `k_p`.
    pub barrier_kp: f64,
    /// Exponential-barrier gain `k_d`.
    pub barrier_kd: f64,
    /// Target configuration `(theta_d, r_d)`.
    pub qd: (f64, f64),
    /// Displacement limit `r*`.
    pub r_star: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            m_link: 1.0,
            big_m: 1.0,
            length: 3.0,
            clf_kp: 1.0,
            clf_kd: 1.0,
            barrier_kp: 1.0,
            barrier_kd: 1.7321,
            qd: (std::f64::consts::FRAC_PI_4, 1.5),
            r_star: 2.0,
        }
    }
}

/// One experiment: an example system, a controller, and the grids to sweep.
///
/// `d_values x epsilon_values x x0_list` is run as a full cartesian grid in
/// that nesting order.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub example: ExampleId,
    pub controller: ControllerId,
    pub disturbance: DisturbanceKind,
    pub d_values: Vec<f64>,
    /// Sinusoid frequency in Hz (unused for constant disturbances).
    pub frequency: f64,
    pub epsilon_values: Vec<f64>,
    /// Linear barrier decay rate for the scalar example.
    pub lambda: f64,
    pub x0_list: Vec<DVector<f64>>,
    pub tmax: f64,
    pub dt: f64,
    /// Diagonal cost on each input channel in the QP.
    pub h_diag: f64,
    /// Diagonal cost on the relaxation variable.
    pub p_delta: f64,
    /// CLF decay coefficient for the arctan example: `alpha_v(s) = alpha_v * s^2`.
    pub alpha_v: f64,
    pub robot: RobotParams,
    pub seed: u64,
    /// Sample count for certificate checking.
    pub samples: usize,
}

impl ExperimentConfig {
    /// Defaults reproducing the benchmark grids for `example`.
    pub fn default_for(example: ExampleId) -> Self {
        let base = Self {
            example,
            controller: ControllerId::IssfFeedback,
            disturbance: DisturbanceKind::Constant,
            d_values: vec![0.0, 0.5, 1.0],
            frequency: 1.0,
            epsilon_values: vec![0.0],
            lambda: 1.0,
            x0_list: vec![DVector::from_vec(vec![2.0])],
            tmax: 10.0,
            dt: 1e-3,
            h_diag: 1.0,
            p_delta: 100.0,
            alpha_v: 0.1,
            robot: RobotParams::default(),
            seed: 0,
            samples: 10_000,
        };
        match example {
            ExampleId::Scalar => Self {
                x0_list: vec![
                    DVector::from_vec(vec![1.0]),
                    DVector::from_vec(vec![2.0]),
                    DVector::from_vec(vec![2.5]),
                ],
                ..base
            },
            ExampleId::Arctan => Self {
                controller: ControllerId::IssfQp,
                d_values: vec![1.0, 5.0, 10.0],
                epsilon_values: vec![0.5, 1.0, 5.0],
                x0_list: vec![DVector::from_vec(vec![0.1])],
                ..base
            },
            ExampleId::Robot2dof => Self {
                controller: ControllerId::IssfQp,
                d_values: vec![5.0],
                epsilon_values: vec![0.5, 1.0, 5.0, 10.0],
                x0_list: vec![DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0])],
                ..base
            },
        }
    }

    /// Parses a flat `key = value` file; `#` starts a comment, unknown keys
    /// are errors.
    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut example: Option<ExampleId> = None;
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key == "example" {
                example = Some(value.parse()?);
            } else {
                pairs.push((key, value));
            }
        }
        let example = example.ok_or_else(|| {
            Error::Config("config must name an example (example = scalar|arctan|robot2dof)".into())
        })?;
        let mut cfg = Self::default_for(example);
        for (key, value) in pairs {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        match key {
            "controller" => self.controller = value.parse()?,
            "disturbance" => self.disturbance = value.parse()?,
            "d" => self.d_values = parse_f64_list(key, value)?,
            "frequency" => self.frequency = parse_f64(key, value)?,
            "epsilon" => self.epsilon_values = parse_f64_list(key, value)?,
            "lambda" => self.lambda = parse_f64(key, value)?,
            "x0" => self.x0_list = parse_x0(self.example, value)?,
            "tmax" => self.tmax = parse_f64(key, value)?,
            "dt" => self.dt = parse_f64(key, value)?,
            "h_diag" => self.h_diag = parse_f64(key, value)?,
            "p_delta" => self.p_delta = parse_f64(key, value)?,
            "alpha_v" => self.alpha_v = parse_f64(key, value)?,
            "K_p" => self.robot.clf_kp = parse_f64(key, value)?,
            "K_d" => self.robot.clf_kd = parse_f64(key, value)?,
            "k_p" => self.robot.barrier_kp = parse_f64(key, value)?,
            "k_d" => self.robot.barrier_kd = parse_f64(key, value)?,
            "q_d" => {
                let vals = parse_f64_list(key, value)?;
                if vals.len() != 2 {
                    return Err(Error::Config(format!(
                        "q_d needs exactly 2 values, got {}",
                        vals.len()
                    )));
                }
                self.robot.qd = (vals[0], vals[1]);
            }
            "r_star" => self.robot.r_star = parse_f64(key, value)?,
            "m" => self.robot.m_link = parse_f64(key, value)?,
            "M" => self.robot.big_m = parse_f64(key, value)?,
            "L" => self.robot.length = parse_f64(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("seed must be an integer, got '{value}'")))?
            }
            "samples" => {
                self.samples = value.parse().map_err(|_| {
                    Error::Config(format!("samples must be an integer, got '{value}'"))
                })?
            }
            other => {
                return Err(Error::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        let finite = |name: &str, v: f64| -> Result<(), Error> {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
            Ok(())
        };
        finite("frequency", self.frequency)?;
        finite("lambda", self.lambda)?;
        finite("tmax", self.tmax)?;
        finite("dt", self.dt)?;
        finite("h_diag", self.h_diag)?;
        finite("p_delta", self.p_delta)?;
        finite("alpha_v", self.alpha_v)?;
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.dt > 0.0) || !(self.tmax > 0.0) {
            return Err(Error::Config(format!(
                "grid must be positive: tmax = {}, dt = {}",
                self.tmax, self.dt
            )));
        }
        if !(self.h_diag > 0.0) || !(self.p_delta > 0.0) {
            return Err(Error::Config(format!(
                "QP weights must be positive: h_diag = {}, p_delta = {}",
                self.h_diag, self.p_delta
            )));
        }
        if self.d_values.is_empty() || self.epsilon_values.is_empty() || self.x0_list.is_empty() {
            return Err(Error::Config("grids must be non-empty".into()));
        }
        for &d in &self.d_values {
            finite("d", d)?;
            if d < 0.0 {
                return Err(Error::Config(format!("disturbance amplitude {d} is negative")));
            }
        }
        for &e in &self.epsilon_values {
            finite("epsilon", e)?;
            if e < 0.0 {
                return Err(Error::Config(format!("epsilon {e} is negative")));
            }
        }
        let n = self.state_dim();
        for x0 in &self.x0_list {
            if x0.len() != n {
                return Err(Error::Config(format!(
                    "x0 has {} components, example {} needs {}",
                    x0.len(),
                    self.example,
                    n
                )));
            }
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("x0 must be finite".into()));
            }
        }
        self.check_controller_support()?;
        Ok(())
    }

    fn check_controller_support(&self) -> Result<(), Error> {
        use ControllerId::*;
        let supported: &[ControllerId] = match self.example {
            // No CLF is defined for the scalar example, so no QP variants.
            ExampleId::Scalar => &[None, IssfFeedback, Universal, MinNorm],
            ExampleId::Arctan => &[None, IssfFeedback, Universal, MinNorm, Qp, IssfQp],
            // h has relative degree two: first-order closed forms see
            // L_g h = 0 identically and cannot act on the barrier.
            ExampleId::Robot2dof => &[None, Qp, IssfQp],
        };
        if !supported.contains(&self.controller) {
            return Err(Error::Config(format!(
                "controller {} is not available for example {}",
                self.controller, self.example
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        match self.example {
            ExampleId::Scalar | ExampleId::Arctan => 1,
            ExampleId::Robot2dof => 4,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.example {
            ExampleId::Scalar | ExampleId::Arctan => 1,
            ExampleId::Robot2dof => 2,
        }
    }

    /// Full configuration echo used in CSV headers; cell-specific values
    /// (`d`, `epsilon`, `x0`) override the grid lists.
    pub fn header_lines(&self, d: f64, epsilon: f64, x0: &DVector<f64>) -> Vec<String> {
        let x0_str = x0
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let mut lines = vec![
            format!("# example = {}", self.example),
            format!("# controller = {}", self.controller),
            format!("# disturbance = {}", self.disturbance),
            format!("# d = {d}"),
            format!("# frequency = {}", self.frequency),
            format!("# epsilon = {epsilon}"),
            format!("# lambda = {}", self.lambda),
            format!("# x0 = {x0_str}"),
            format!("# tmax = {}", self.tmax),
            format!("# dt = {}", self.dt),
            format!("# h_diag = {}", self.h_diag),
            format!("# p_delta = {}", self.p_delta),
            format!("# alpha_v = {}", self.alpha_v),
        ];
        if self.example == ExampleId::Robot2dof {
            lines.push(format!("# m = {}", self.robot.m_link));
            lines.push(format!("# M = {}", self.robot.big_m));
            lines.push(format!("# L = {}", self.robot.length));
            lines.push(format!("# K_p = {}", self.robot.clf_kp));
            lines.push(format!("# K_d = {}", self.robot.clf_kd));
            lines.push(format!("# k_p = {}", self.robot.barrier_kp));
            lines.push(format!("# k_d = {}", self.robot.barrier_kd));
            lines.push(format!("# q_d = {}, {}", self.robot.qd.0, self.robot.qd.1));
            lines.push(format!("# r_star = {}", self.robot.r_star));
        }
        lines.push(format!("# seed = {}", self.seed));
        lines.push("# integrator = rk4 fixed step, zero-order hold controller".into());
        lines.push(format!("# escape_norm = {}", crate::sim::ESCAPE_NORM));
        lines
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, Error> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key} must be a number, got '{value}'")))
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, Error> {
    let vals: Result<Vec<f64>, Error> = value
        .split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::Config(format!("{key} list is empty")));
    }
    Ok(vals)
}

/// For 1-state examples the list holds one initial state per entry; for the
/// robot it holds the four components of a single initial state.
pub(crate) fn parse_x0(example: ExampleId, value: &str) -> Result<Vec<DVector<f64>>, Error> {
    let vals = parse_f64_list("x0", value)?;
    match example {
        ExampleId::Scalar | ExampleId::Arctan => Ok(vals
            .into_iter()
            .map(|v| DVector::from_vec(vec![v]))
            .collect()),
        ExampleId::Robot2dof => {
            if vals.len() != 4 {
                return Err(Error::Config(format!(
                    "robot2dof x0 needs 4 components (theta, r, thetadot, rdot), got {}",
                    vals.len()
                )));
            }
            Ok(vec![DVector::from_vec(vals)])
        }
    }
}
