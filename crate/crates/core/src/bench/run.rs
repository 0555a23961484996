//! Grid runners for the three examples.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::barrier::clf_row;
use crate::controllers;
use crate::error::Error;
use crate::qpsolve::{self, QpInstance, QpStatus};
use crate::sim::{run_closed_loop, ControlStep, SimOutputs, StepStatus, Trajectory};
use crate::system::DisturbanceSignal;

use super::config::{ControllerId, DisturbanceKind, ExampleId, ExperimentConfig};
use super::examples::{arctan_example, robot_example, scalar_example, ArctanExample, RobotExample, ScalarExample};

/// Outcome of one grid cell.
#[derive(Clone, Debug)]
pub enum RunStatus {
    Ok,
    /// The state norm crossed the escape threshold; the trajectory is
    /// truncated at that point.
    Escaped,
    /// The run aborted (controller error, infeasible QP, numerics).
    Failed { exit: i32, message: String },
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => write!(f, "ok"),
            RunStatus::Escaped => write!(f, "escaped"),
            RunStatus::Failed { message, .. } => write!(f, "failed: {message}"),
        }
    }
}

impl Error {
    /// CLI exit code: 2 config, 3 certificate violation, 4 infeasible,
    /// 5 numerics/escape.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_)
            | Error::Domain(_)
            | Error::Usage(_)
            | Error::Shape(_)
            | Error::Range(_)
            | Error::Margin(_) => 2,
            Error::Certificate(_) => 3,
            Error::Infeasible(_) => 4,
            Error::Numerics(_) => 5,
            Error::Io(_) => 1,
            Error::AtStep { .. } => unreachable!("root() strips step context"),
        }
    }
}

/// One simulated grid cell with its headline statistics.
#[derive(Clone, Debug)]
pub struct RunArtifact {
    pub example: ExampleId,
    pub controller: ControllerId,
    pub d_amp: f64,
    pub epsilon: f64,
    pub x0: DVector<f64>,
    pub trajectory: Option<Trajectory>,
    /// `sup_t |x(t)|` (Euclidean norm of the state).
    pub sup_abs_x: f64,
    /// `max(0, -min_t h)`: how far the run left the plain safe set.
    pub sup_h_violation: f64,
    /// Example-specific excursion: `sup x` (scalar), `sup |x|` (arctan),
    /// `sup r` (robot).
    pub peak: f64,
    /// Margin `gamma(d)` when the example defines one.
    pub cd_offset: Option<f64>,
    /// `min_t (h + gamma(d))` when a margin is defined.
    pub min_cd_level: Option<f64>,
    pub status: RunStatus,
}

impl RunArtifact {
    pub fn status_exit(&self) -> i32 {
        match &self.status {
            RunStatus::Ok => 0,
            RunStatus::Escaped => 5,
            RunStatus::Failed { exit, .. } => *exit,
        }
    }
}

/// Every cell of a grid run, in deterministic order (d outer, epsilon
/// middle, x0 inner).
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub config: ExperimentConfig,
    pub runs: Vec<RunArtifact>,
}

impl Artifacts {
    /// The most severe exit code across cells (0 when everything ran clean).
    pub fn worst_exit(&self) -> i32 {
        self.runs.iter().map(RunArtifact::status_exit).max().unwrap_or(0)
    }

    /// Peak excursion per cell, in grid order.
    pub fn peaks(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.peak).collect()
    }
}

enum ExampleContext {
    Scalar(ScalarExample),
    Arctan(ArctanExample),
    Robot(RobotExample),
}

impl ExampleContext {
    fn build(cfg: &ExperimentConfig) -> Result<Self, Error> {
        Ok(match cfg.example {
            ExampleId::Scalar => ExampleContext::Scalar(scalar_example(cfg.lambda)?),
            ExampleId::Arctan => ExampleContext::Arctan(arctan_example()?),
            ExampleId::Robot2dof => ExampleContext::Robot(robot_example(&cfg.robot)?),
        })
    }
}

fn disturbance(cfg: &ExperimentConfig, m: usize, amplitude: f64) -> DisturbanceSignal {
    match cfg.disturbance {
        DisturbanceKind::Constant => DisturbanceSignal::constant_amplitude(m, amplitude),
        DisturbanceKind::Sinusoid => DisturbanceSignal::sinusoid(m, amplitude, cfg.frequency),
    }
}

/// Runs the configured grid for whichever example the config names.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts, Error> {
    cfg.validate().map_err(|e| match e {
        Error::Config(m) => Error::Config(m),
        other => other,
    })?;
    let ctx = ExampleContext::build(cfg)?;
    let mut runs = Vec::new();
    for &d_amp in &cfg.d_values {
        for &eps in &cfg.epsilon_values {
            for x0 in &cfg.x0_list {
                runs.push(run_cell(cfg, &ctx, d_amp, eps, x0));
            }
        }
    }
    Ok(Artifacts {
        config: cfg.clone(),
        runs,
    })
}

/// Scalar example grid (`xdot = -x + x^2 u`).
pub fn run_example1(cfg: &ExperimentConfig) -> Result<Artifacts, Error> {
    expect_example(cfg, ExampleId::Scalar)?;
    run(cfg)
}

/// Arctan example grid (CLF/CBF quadratic program).
pub fn run_example2(cfg: &ExperimentConfig) -> Result<Artifacts, Error> {
    expect_example(cfg, ExampleId::Arctan)?;
    run(cfg)
}

/// Robot example grid (relative-degree-two barrier row).
pub fn run_example3(cfg: &ExperimentConfig) -> Result<Artifacts, Error> {
    expect_example(cfg, ExampleId::Robot2dof)?;
    run(cfg)
}

/// Cartesian sweep over `(d, epsilon, x0)`; identical to [`run`], named for
/// the CLI subcommand. Per-cell failures are recorded and the sweep
/// continues.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Artifacts, Error> {
    run(cfg)
}

fn expect_example(cfg: &ExperimentConfig, want: ExampleId) -> Result<(), Error> {
    if cfg.example != want {
        return Err(Error::Config(format!(
            "runner expects example {want}, config names {}",
            cfg.example
        )));
    }
    Ok(())
}

fn run_cell(
    cfg: &ExperimentConfig,
    ctx: &ExampleContext,
    d_amp: f64,
    eps: f64,
    x0: &DVector<f64>,
) -> RunArtifact {
    let result = simulate_cell(cfg, ctx, d_amp, eps, x0);
    let mut artifact = RunArtifact {
        example: cfg.example,
        controller: cfg.controller,
        d_amp,
        epsilon: eps,
        x0: x0.clone(),
        trajectory: None,
        sup_abs_x: f64::NAN,
        sup_h_violation: f64::NAN,
        peak: f64::NAN,
        cd_offset: None,
        min_cd_level: None,
        status: RunStatus::Ok,
    };
    match result {
        Ok(traj) => {
            artifact.sup_abs_x = traj.sup_state_norm();
            artifact.sup_h_violation = (-traj.min_h()).max(0.0);
            artifact.peak = match cfg.example {
                ExampleId::Scalar => traj.sup_coord(0),
                ExampleId::Arctan => traj.sup_abs_coord(0),
                ExampleId::Robot2dof => traj.sup_coord(1),
            };
            if let ExampleContext::Scalar(ex) = ctx {
                if let Ok(offset) = ex.gamma.eval_checked(d_amp) {
                    artifact.cd_offset = Some(offset);
                    artifact.min_cd_level = Some(traj.min_h() + offset);
                }
            }
            artifact.status = if traj.escaped {
                RunStatus::Escaped
            } else {
                RunStatus::Ok
            };
            artifact.trajectory = Some(traj);
        }
        Err(e) => {
            artifact.status = RunStatus::Failed {
                exit: e.exit_code(),
                message: e.to_string(),
            };
        }
    }
    artifact
}

fn simulate_cell(
    cfg: &ExperimentConfig,
    ctx: &ExampleContext,
    d_amp: f64,
    eps: f64,
    x0: &DVector<f64>,
) -> Result<Trajectory, Error> {
    match ctx {
        ExampleContext::Scalar(ex) => {
            let d = disturbance(cfg, ex.sys.m(), d_amp);
            let outputs = SimOutputs::barrier_only(ex.spec.h.clone());
            let zero = |_x: &DVector<f64>| DVector::zeros(1);
            match cfg.controller {
                ControllerId::None => run_closed_loop(
                    &ex.sys,
                    |_x| Ok(ControlStep::open_loop(1)),
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::IssfFeedback => run_closed_loop(
                    &ex.sys,
                    |x| {
                        controllers::issf_feedback(zero, &ex.spec, &ex.sys, x)
                            .map(ControlStep::closed_form)
                    },
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::Universal => run_closed_loop(
                    &ex.sys,
                    |x| controllers::universal_issf(&ex.spec, &ex.sys, x).map(ControlStep::closed_form),
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::MinNorm => run_closed_loop(
                    &ex.sys,
                    |x| {
                        controllers::min_norm_safeguarding(&ex.spec, &ex.sys, x)
                            .map(ControlStep::closed_form)
                    },
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::Qp | ControllerId::IssfQp => Err(Error::Config(
                    "no CLF is defined for the scalar example".into(),
                )),
            }
        }
        ExampleContext::Arctan(ex) => {
            let d = disturbance(cfg, ex.sys.m(), d_amp);
            let clf = ex.clf.clone();
            let outputs = SimOutputs::with_lyapunov(ex.spec.h.clone(), move |x| clf.value(x));
            let zero = |_x: &DVector<f64>| DVector::zeros(1);
            match cfg.controller {
                ControllerId::None => run_closed_loop(
                    &ex.sys,
                    |_x| Ok(ControlStep::open_loop(1)),
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::IssfFeedback => run_closed_loop(
                    &ex.sys,
                    |x| {
                        controllers::issf_feedback(zero, &ex.spec, &ex.sys, x)
                            .map(ControlStep::closed_form)
                    },
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::Universal => run_closed_loop(
                    &ex.sys,
                    |x| controllers::universal_issf(&ex.spec, &ex.sys, x).map(ControlStep::closed_form),
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::MinNorm => run_closed_loop(
                    &ex.sys,
                    |x| {
                        controllers::min_norm_safeguarding(&ex.spec, &ex.sys, x)
                            .map(ControlStep::closed_form)
                    },
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::Qp | ControllerId::IssfQp => {
                    // The plain QP is the epsilon = 0 special case.
                    let row_eps = if cfg.controller == ControllerId::Qp { 0.0 } else { eps };
                    let controller = |x: &DVector<f64>| -> Result<ControlStep, Error> {
                        let decay = -cfg.alpha_v * x.norm_squared();
                        let rows = vec![
                            clf_row(&ex.clf, &ex.sys, x, decay)?,
                            ex.spec.issf_cbf_row(&ex.sys, x, row_eps)?,
                        ];
                        solve_qp_step(cfg, 1, rows, x)
                    };
                    run_closed_loop(&ex.sys, controller, &d, x0, cfg.tmax, cfg.dt, &outputs)
                }
            }
        }
        ExampleContext::Robot(ex) => {
            let d = disturbance(cfg, ex.sys.m(), d_amp);
            let clf = ex.clf.clone();
            let outputs = SimOutputs::with_lyapunov(ex.spec.h.clone(), move |x| clf.value(x));
            match cfg.controller {
                ControllerId::None => run_closed_loop(
                    &ex.sys,
                    |_x| Ok(ControlStep::open_loop(2)),
                    &d,
                    x0,
                    cfg.tmax,
                    cfg.dt,
                    &outputs,
                ),
                ControllerId::Qp | ControllerId::IssfQp => {
                    let row_eps = if cfg.controller == ControllerId::Qp { 0.0 } else { eps };
                    let kd = ex.params.clf_kd;
                    let controller = |x: &DVector<f64>| -> Result<ControlStep, Error> {
                        let qdot_sq = x[2] * x[2] + x[3] * x[3];
                        let rows = vec![
                            clf_row(&ex.clf, &ex.sys, x, -kd * qdot_sq)?,
                            ex.spec.rel2_issf_row(
                                &ex.sys,
                                x,
                                ex.params.barrier_kp,
                                ex.params.barrier_kd,
                                row_eps,
                            )?,
                        ];
                        solve_qp_step(cfg, 2, rows, x)
                    };
                    run_closed_loop(&ex.sys, controller, &d, x0, cfg.tmax, cfg.dt, &outputs)
                }
                other => Err(Error::Config(format!(
                    "controller {other} is not available for the robot example"
                ))),
            }
        }
    }
}

/// Solves one pointwise QP with cost `diag(h_diag, ..., h_diag, p_delta)`
/// and `F = 0`, returning the input part and the relaxation used.
fn solve_qp_step(
    cfg: &ExperimentConfig,
    m: usize,
    rows: Vec<crate::barrier::ConstraintRow>,
    x: &DVector<f64>,
) -> Result<ControlStep, Error> {
    let nz = m + 1;
    let mut h = DMatrix::zeros(nz, nz);
    for i in 0..m {
        h[(i, i)] = cfg.h_diag;
    }
    h[(m, m)] = cfg.p_delta;
    let qp = QpInstance::new(h, DVector::zeros(nz), rows);
    let sol = qpsolve::solve(&qp)?;
    if sol.status == QpStatus::Infeasible {
        return Err(Error::Infeasible(format!(
            "pointwise QP infeasible at x = {:?}",
            x.iter().copied().collect::<Vec<_>>()
        )));
    }
    Ok(ControlStep {
        u: sol.z.rows(0, m).into_owned(),
        delta: sol.z[m],
        status: StepStatus::QpOptimal,
    })
}
