//! Fixed-step closed-loop integration and trajectory recording.
//!
//! Classical 4-stage Runge-Kutta with the controller held over each step
//! (zero-order hold, one controller evaluation / QP solve per step) while the
//! disturbance is evaluated continuously at every stage. Runaway trajectories
//! are cut off once the state norm passes [`ESCAPE_NORM`] and flagged rather
//! than treated as errors: finite escape is a legitimate experimental
//! outcome.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::Error;
use crate::system::{lie1, ControlAffineSystem, DisturbanceSignal, OutputMap};

/// State-norm threshold for finite-escape detection.
pub const ESCAPE_NORM: f64 = 1e6;

/// Hard cap on step count per integration.
pub const MAX_STEPS: usize = 10_000_000;

/// How a control input was produced at a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    /// No controller (u = 0).
    OpenLoop,
    /// Closed-form feedback.
    ClosedForm,
    /// Pointwise QP solved to optimality.
    QpOptimal,
}

impl fmt::Display for StepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepStatus::OpenLoop => write!(f, "open_loop"),
            StepStatus::ClosedForm => write!(f, "closed_form"),
            StepStatus::QpOptimal => write!(f, "optimal"),
        }
    }
}

/// One controller evaluation: the input to hold for the step, the QP
/// relaxation actually used (NaN when there is none), and how it was made.
#[derive(Clone, Debug)]
pub struct ControlStep {
    pub u: DVector<f64>,
    pub delta: f64,
    pub status: StepStatus,
}

impl ControlStep {
    pub fn closed_form(u: DVector<f64>) -> Self {
        Self {
            u,
            delta: f64::NAN,
            status: StepStatus::ClosedForm,
        }
    }

    pub fn open_loop(m: usize) -> Self {
        Self {
            u: DVector::zeros(m),
            delta: f64::NAN,
            status: StepStatus::OpenLoop,
        }
    }
}

/// Raw output of [`integrate`]: the time grid and states, plus the escape flag.
#[derive(Clone, Debug)]
pub struct RawPath {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub escaped: bool,
}

impl RawPath {
    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("paths hold at least the initial state")
    }
}

/// Time-indexed record of a closed-loop run. All arrays share one length;
/// `times` advances by the constant step `dt`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Controller output per step (pre-disturbance), held over the step.
    pub inputs: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    pub h_vals: Vec<f64>,
    /// `L_f h + L_g h (u + d)` with the held input.
    pub hdot_vals: Vec<f64>,
    /// NaN when the run has no Lyapunov output.
    pub v_vals: Vec<f64>,
    /// QP relaxation per step; NaN for closed-form controllers.
    pub delta_vals: Vec<f64>,
    pub statuses: Vec<StepStatus>,
    pub escaped: bool,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min_h(&self) -> f64 {
        self.h_vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_state_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Largest value of state coordinate `i` over the run.
    pub fn sup_coord(&self, i: usize) -> f64 {
        self.states
            .iter()
            .map(|x| x[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs_coord(&self, i: usize) -> f64 {
        self.states.iter().map(|x| x[i].abs()).fold(0.0, f64::max)
    }

    /// An empty trajectory shell (used for header-only emission).
    pub fn empty(dt: f64) -> Self {
        Self {
            times: vec![],
            states: vec![],
            inputs: vec![],
            disturbances: vec![],
            h_vals: vec![],
            hdot_vals: vec![],
            v_vals: vec![],
            delta_vals: vec![],
            statuses: vec![],
            escaped: false,
            dt,
        }
    }
}

/// Outputs recorded along a run: the barrier output and an optional
/// Lyapunov-function value.
#[derive(Clone)]
pub struct SimOutputs {
    pub h: OutputMap,
    pub v: Option<Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>>,
}

impl SimOutputs {
    pub fn barrier_only(h: OutputMap) -> Self {
        Self { h, v: None }
    }

    pub fn with_lyapunov<V>(h: OutputMap, v: V) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        Self {
            h,
            v: Some(Arc::new(v)),
        }
    }
}

fn rk4_step<F>(field: &mut F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>, Error>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, Error>,
{
    let check = |v: DVector<f64>, stage_t: f64| -> Result<DVector<f64>, Error> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerics(format!(
                "field returned a non-finite value at t = {stage_t}"
            )));
        }
        Ok(v)
    };
    let k1 = check(field(t, x)?, t)?;
    let half = 0.5 * dt;
    let k2 = check(field(t + half, &(x + &k1 * half))?, t + half)?;
    let k3 = check(field(t + half, &(x + &k2 * half))?, t + half)?;
    let k4 = check(field(t + dt, &(x + &k3 * dt))?, t + dt)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Integrates `xdot = field(t, x)` from `t0` to `tf` with fixed step `dt`.
///
/// Stops early with the escape flag once `|x| >` [`ESCAPE_NORM`].
pub fn integrate<F>(
    mut field: F,
    x0: &DVector<f64>,
    t0: f64,
    tf: f64,
    dt: f64,
) -> Result<RawPath, Error>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, Error>,
{
    let steps = step_count(t0, tf, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(x0.clone());
    let mut x = x0.clone();
    let mut escaped = false;
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        x = rk4_step(&mut field, t, &x, dt)?;
        times.push(t0 + (i + 1) as f64 * dt);
        states.push(x.clone());
        if x.norm() > ESCAPE_NORM {
            escaped = true;
            break;
        }
    }
    Ok(RawPath {
        times,
        states,
        escaped,
    })
}

fn step_count(t0: f64, tf: f64, dt: f64) -> Result<usize, Error> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("step size must be positive, got {dt}")));
    }
    if !(tf > t0) {
        return Err(Error::Domain(format!(
            "final time {tf} must exceed initial time {t0}"
        )));
    }
    let steps = ((tf - t0) / dt).round().max(1.0) as usize;
    if steps > MAX_STEPS {
        return Err(Error::Domain(format!(
            "{steps} steps exceed the cap of {MAX_STEPS}"
        )));
    }
    Ok(steps)
}

/// Runs the closed loop `xdot = f + g (u_i + d(t))` from `t = 0`, where `u_i`
/// is the controller output evaluated at the start of step `i` and held.
///
/// Controller errors abort the run tagged with the step they occurred at.
/// The final grid point repeats the last held input: no control is computed
/// at `tf`.
pub fn run_closed_loop<C>(
    sys: &ControlAffineSystem,
    mut controller: C,
    d: &DisturbanceSignal,
    x0: &DVector<f64>,
    tf: f64,
    dt: f64,
    outputs: &SimOutputs,
) -> Result<Trajectory, Error>
where
    C: FnMut(&DVector<f64>) -> Result<ControlStep, Error>,
{
    sys.check_state(x0)?;
    let steps = step_count(0.0, tf, dt)?;
    let mut traj = Trajectory::empty(dt);
    let mut x = x0.clone();
    let mut held: Option<ControlStep> = None;

    let record = |traj: &mut Trajectory,
                      t: f64,
                      x: &DVector<f64>,
                      step: &ControlStep|
     -> Result<(), Error> {
        let d_t = d.eval(t);
        let h = outputs.h.value(x);
        let (lf, lg) = lie1(sys, &outputs.h, x)?;
        let hdot = lf + lg.dot(&(&step.u + &d_t));
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.inputs.push(step.u.clone());
        traj.disturbances.push(d_t);
        traj.h_vals.push(h);
        traj.hdot_vals.push(hdot);
        traj.v_vals
            .push(outputs.v.as_ref().map_or(f64::NAN, |v| v(x)));
        traj.delta_vals.push(step.delta);
        traj.statuses.push(step.status);
        Ok(())
    };

    for i in 0..steps {
        let t = i as f64 * dt;
        let step = controller(&x).map_err(|e| e.at_step(i, t))?;
        if step.u.len() != sys.m() {
            return Err(Error::Shape(format!(
                "controller returned length {}, system expects m = {}",
                step.u.len(),
                sys.m()
            ))
            .at_step(i, t));
        }
        record(&mut traj, t, &x, &step)?;

        let u_held = step.u.clone();
        let mut field = |tau: f64, y: &DVector<f64>| -> Result<DVector<f64>, Error> {
            let fy = sys.drift(y)?;
            let gy = sys.input_matrix(y)?;
            Ok(fy + gy * (&u_held + d.eval(tau)))
        };
        x = rk4_step(&mut field, t, &x, dt).map_err(|e| e.at_step(i, t))?;
        held = Some(step);

        if x.norm() > ESCAPE_NORM {
            let step = held.take().expect("a step was just stored");
            record(&mut traj, (i + 1) as f64 * dt, &x, &step)?;
            traj.escaped = true;
            return Ok(traj);
        }
    }
    let last = held.expect("at least one step ran");
    record(&mut traj, steps as f64 * dt, &x, &last)?;
    Ok(traj)
}

/// Result of [`check_invariance`].
#[derive(Clone, Copy, Debug)]
pub struct InvarianceReport {
    /// `min_t (h + offset)` over the run.
    pub min_level: f64,
    /// Time at which the minimum occurs.
    pub t_min: f64,
    pub offset: f64,
    pub tol: f64,
    pub pass: bool,
}

impl fmt::Display for InvarianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "min (h + {}) = {:.6e} at t = {} -> {}",
            self.offset,
            self.min_level,
            self.t_min,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Checks `h + level_offset >= -tol` along the whole run. Pass
/// `level_offset = gamma(dbar)` for enlarged-set checks and 0 for the plain
/// safe set.
pub fn check_invariance(traj: &Trajectory, level_offset: f64, tol: f64) -> InvarianceReport {
    let mut min_level = f64::INFINITY;
    let mut t_min = f64::NAN;
    for (&t, &h) in traj.times.iter().zip(&traj.h_vals) {
        let level = h + level_offset;
        if level < min_level {
            min_level = level;
            t_min = t;
        }
    }
    InvarianceReport {
        min_level,
        t_min,
        offset: level_offset,
        tol,
        pass: min_level >= -tol,
    }
}
