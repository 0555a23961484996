//! Python bindings for the safety-critical control library.
//!
//! Exposes comparison functions and the disturbance-margin construction, the
//! dense QP solver, the closed-form safeguarding controllers on the example
//! systems, and the closed-loop simulation harness.
//!
//! ```python
//! import pyissf
//! alpha = pyissf.ComparisonFunction.linear(1.0)
//! iota = pyissf.ComparisonFunction.quarter_square()
//! gamma = pyissf.gamma_from(alpha, iota)
//! gamma(1.0)  # 0.25
//! res = pyissf.simulate("scalar", "issf_feedback", d=1.0, x0=[2.0])
//! ```

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use issf_core::barrier::ConstraintRow;
use issf_core::bench::{
    self, arctan_example, robot_example, scalar_example, ArctanExample, ExperimentConfig,
    RobotExample, RobotParams, ScalarExample,
};
use issf_core::classk::{self, Bound, ComparisonFunction as CoreComparison};
use issf_core::controllers;
use issf_core::qpsolve::{self, QpInstance};
use issf_core::sim::Trajectory;
use issf_core::system::lie1;
use issf_core::Error;

fn to_py_err(e: Error) -> PyErr {
    match e.root() {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Usage(_)
        | Error::Shape(_)
        | Error::Range(_)
        | Error::Margin(_) => PyValueError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn bound_f64(b: Bound, sign: f64) -> f64 {
    match b {
        Bound::Unbounded => sign * f64::INFINITY,
        Bound::Finite(v) => v,
    }
}

/// A strictly increasing scalar map vanishing at zero, with explicit domain
/// bounds (class K, class K-infinity, or extended class K).
#[pyclass(name = "ComparisonFunction", frozen)]
struct PyComparisonFunction {
    inner: CoreComparison,
}

#[pymethods]
impl PyComparisonFunction {
    /// The identity map on the whole line.
    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: CoreComparison::identity(),
        }
    }

    /// `r -> lam * r` on the whole line.
    #[staticmethod]
    fn linear(lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreComparison::linear(lam).map_err(to_py_err)?,
        })
    }

    /// `r -> r^3` on the whole line.
    #[staticmethod]
    fn cubic() -> Self {
        Self {
            inner: CoreComparison::cubic(),
        }
    }

    /// `s -> s^2 / 4` on `[0, inf)`.
    #[staticmethod]
    fn quarter_square() -> Self {
        Self {
            inner: CoreComparison::quarter_square(),
        }
    }

    /// `s -> coeff * s^2` on `[0, inf)`.
    #[staticmethod]
    fn scaled_square(coeff: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreComparison::scaled_square(coeff).map_err(to_py_err)?,
        })
    }

    /// Evaluates the map, checking domain membership.
    fn eval(&self, r: f64) -> PyResult<f64> {
        self.inner.eval_checked(r).map_err(to_py_err)
    }

    fn __call__(&self, r: f64) -> PyResult<f64> {
        self.eval(r)
    }

    /// Solves `f(r) = y` by bisection to `|f(r) - y| <= tol`.
    #[pyo3(signature = (y, tol = 1e-10))]
    fn invert(&self, y: f64, tol: f64) -> PyResult<f64> {
        self.inner.invert(y, tol).map_err(to_py_err)
    }

    /// Samples monotonicity / zero-at-zero / divergence; returns
    /// `(is_valid, violation_messages)`.
    #[pyo3(signature = (samples = 1000))]
    fn validate(&self, samples: usize) -> PyResult<(bool, Vec<String>)> {
        let report = self.inner.validate(samples).map_err(to_py_err)?;
        Ok((
            report.is_valid(),
            report.violations.iter().map(|v| v.to_string()).collect(),
        ))
    }

    /// `beta(r) = -f(-r)` for an extended class K map.
    fn beta(&self) -> PyResult<Self> {
        Ok(Self {
            inner: classk::beta_of(&self.inner).map_err(to_py_err)?,
        })
    }

    /// `(lo, hi)` as floats, infinite endpoints as `+-inf`.
    fn domain(&self) -> (f64, f64) {
        (bound_f64(self.inner.lo(), -1.0), bound_f64(self.inner.hi(), 1.0))
    }

    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    fn __repr__(&self) -> String {
        let (lo, hi) = self.domain();
        format!("ComparisonFunction({} on ({lo}, {hi}))", self.inner.kind())
    }
}

/// `gamma = beta^{-1} o iota`: the margin map turning a disturbance bound
/// into a safe-set enlargement.
#[pyfunction]
fn gamma_from(
    alpha: &PyComparisonFunction,
    iota: &PyComparisonFunction,
) -> PyResult<PyComparisonFunction> {
    Ok(PyComparisonFunction {
        inner: classk::gamma_from(&alpha.inner, &iota.inner).map_err(to_py_err)?,
    })
}

/// Largest disturbance bound whose margin stays below `b` (`inf` if none).
#[pyfunction]
#[pyo3(signature = (alpha, iota, b, tol = 1e-10))]
fn max_disturbance(
    alpha: &PyComparisonFunction,
    iota: &PyComparisonFunction,
    b: f64,
    tol: f64,
) -> PyResult<f64> {
    classk::max_disturbance(&alpha.inner, &iota.inner, b, tol).map_err(to_py_err)
}

/// Solution of one quadratic program.
#[pyclass(frozen)]
struct QpSolution {
    #[pyo3(get)]
    z: Vec<f64>,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    active: Vec<usize>,
    #[pyo3(get)]
    multipliers: Vec<f64>,
    #[pyo3(get)]
    objective: f64,
}

#[pymethods]
impl QpSolution {
    fn __repr__(&self) -> String {
        format!("QpSolution(status={}, z={:?})", self.status, self.z)
    }
}

/// Solves `min 1/2 z^T H z + F^T z` over `z = (u, delta)` subject to rows
/// `(a_u, a_delta, rhs, sense)` with sense `">="` or `"<="`.
#[pyfunction]
fn solve_qp(
    h: Vec<Vec<f64>>,
    f: Vec<f64>,
    rows: Vec<(Vec<f64>, f64, f64, String)>,
) -> PyResult<QpSolution> {
    let nz = f.len();
    if h.len() != nz || h.iter().any(|r| r.len() != nz) {
        return Err(PyValueError::new_err(format!(
            "H must be {nz}x{nz} to match F"
        )));
    }
    let h = DMatrix::from_fn(nz, nz, |i, j| h[i][j]);
    let rows: Result<Vec<ConstraintRow>, PyErr> = rows
        .into_iter()
        .map(|(a_u, a_delta, rhs, sense)| {
            let a_u = DVector::from_vec(a_u);
            match sense.as_str() {
                ">=" => Ok(ConstraintRow::ge(a_u, a_delta, rhs)),
                "<=" => Ok(ConstraintRow::le(a_u, a_delta, rhs)),
                other => Err(PyValueError::new_err(format!(
                    "sense must be '>=' or '<=', got '{other}'"
                ))),
            }
        })
        .collect();
    let qp = QpInstance::new(h, DVector::from_vec(f), rows?);
    let sol = qpsolve::solve(&qp).map_err(to_py_err)?;
    Ok(QpSolution {
        z: sol.z.iter().copied().collect(),
        status: sol.status.to_string(),
        active: sol.active,
        multipliers: sol.multipliers,
        objective: sol.objective,
    })
}

enum ExampleInner {
    Scalar(ScalarExample),
    Arctan(ArctanExample),
    Robot(RobotExample),
}

/// One of the three benchmark systems with its barrier data.
#[pyclass(frozen)]
struct Example {
    inner: ExampleInner,
}

impl Example {
    fn parts(
        &self,
    ) -> (
        &issf_core::system::ControlAffineSystem,
        &issf_core::barrier::SafeSetSpec,
    ) {
        match &self.inner {
            ExampleInner::Scalar(e) => (&e.sys, &e.spec),
            ExampleInner::Arctan(e) => (&e.sys, &e.spec),
            ExampleInner::Robot(e) => (&e.sys, &e.spec),
        }
    }

    fn state(&self, x: Vec<f64>) -> PyResult<DVector<f64>> {
        let (sys, _) = self.parts();
        if x.len() != sys.n() {
            return Err(PyValueError::new_err(format!(
                "state needs {} components, got {}",
                sys.n(),
                x.len()
            )));
        }
        Ok(DVector::from_vec(x))
    }
}

#[pymethods]
impl Example {
    /// `xdot = -x + x^2 u` with `h = 2 - x` and linear decay `lam`.
    #[staticmethod]
    #[pyo3(signature = (lam = 1.0))]
    fn scalar(lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ExampleInner::Scalar(scalar_example(lam).map_err(to_py_err)?),
        })
    }

    /// `xdot = -atan(x) + u` with CLF `x atan x` and CBF `4 - x^2`.
    #[staticmethod]
    fn arctan() -> PyResult<Self> {
        Ok(Self {
            inner: ExampleInner::Arctan(arctan_example().map_err(to_py_err)?),
        })
    }

    /// Planar 2-DOF robot with displacement limit `r* = 2`.
    #[staticmethod]
    fn robot() -> PyResult<Self> {
        Ok(Self {
            inner: ExampleInner::Robot(robot_example(&RobotParams::default()).map_err(to_py_err)?),
        })
    }

    /// Barrier value `h(x)`.
    fn h(&self, x: Vec<f64>) -> PyResult<f64> {
        let x = self.state(x)?;
        Ok(self.parts().1.h_val(&x))
    }

    /// First-order Lie derivatives `(L_f h, L_g h)` at `x`.
    fn lie1(&self, x: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        let x = self.state(x)?;
        let (sys, spec) = self.parts();
        let (lf, lg) = lie1(sys, &spec.h, &x).map_err(to_py_err)?;
        Ok((lf, lg.iter().copied().collect()))
    }

    /// Universal input-to-state safeguarding input at `x`.
    fn universal(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.state(x)?;
        let (sys, spec) = self.parts();
        let u = controllers::universal_issf(spec, sys, &x).map_err(to_py_err)?;
        Ok(u.iter().copied().collect())
    }

    /// Minimum-norm input keeping the barrier inequality satisfied at `x`.
    fn min_norm(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.state(x)?;
        let (sys, spec) = self.parts();
        let u = controllers::min_norm_safeguarding(spec, sys, &x).map_err(to_py_err)?;
        Ok(u.iter().copied().collect())
    }

    /// Safeguarding feedback `L_g h(x)^T` (base feedback zero).
    fn issf_feedback(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.state(x)?;
        let (sys, spec) = self.parts();
        let m = sys.m();
        let u = controllers::issf_feedback(move |_x| DVector::zeros(m), spec, sys, &x)
            .map_err(to_py_err)?;
        Ok(u.iter().copied().collect())
    }

    /// Barrier residual `L_f h + alpha(h)` for the open loop (`k = 0`).
    fn bf_residual(&self, x: Vec<f64>) -> PyResult<f64> {
        let x = self.state(x)?;
        let (sys, spec) = self.parts();
        let m = sys.m();
        spec.bf_residual(sys, move |_x| DVector::zeros(m), &x)
            .map_err(to_py_err)
    }

    /// The barrier QP row at `x` as `(a_u, a_delta, rhs, sense)`; uses the
    /// relative-degree-two form for the robot.
    #[pyo3(signature = (x, epsilon, kp = 1.0, kd = 1.7321))]
    fn barrier_row(
        &self,
        x: Vec<f64>,
        epsilon: f64,
        kp: f64,
        kd: f64,
    ) -> PyResult<(Vec<f64>, f64, f64, String)> {
        let x = self.state(x)?;
        let (sys, spec) = self.parts();
        let row = match &self.inner {
            ExampleInner::Robot(_) => spec
                .rel2_issf_row(sys, &x, kp, kd, epsilon)
                .map_err(to_py_err)?,
            _ => spec.issf_cbf_row(sys, &x, epsilon).map_err(to_py_err)?,
        };
        Ok((
            row.a_u.iter().copied().collect(),
            row.a_delta,
            row.rhs,
            row.sense.to_string(),
        ))
    }

    fn __repr__(&self) -> String {
        let name = match &self.inner {
            ExampleInner::Scalar(_) => "scalar",
            ExampleInner::Arctan(_) => "arctan",
            ExampleInner::Robot(_) => "robot2dof",
        };
        format!("Example({name})")
    }
}

/// A recorded closed-loop run.
#[pyclass(frozen)]
struct SimResult {
    #[pyo3(get)]
    t: Vec<f64>,
    #[pyo3(get)]
    states: Vec<Vec<f64>>,
    #[pyo3(get)]
    inputs: Vec<Vec<f64>>,
    #[pyo3(get)]
    disturbances: Vec<Vec<f64>>,
    #[pyo3(get)]
    h: Vec<f64>,
    #[pyo3(get)]
    hdot: Vec<f64>,
    #[pyo3(get)]
    v: Vec<f64>,
    #[pyo3(get)]
    delta: Vec<f64>,
    #[pyo3(get)]
    status: Vec<String>,
    #[pyo3(get)]
    escaped: bool,
    #[pyo3(get)]
    sup_abs_x: f64,
    #[pyo3(get)]
    min_h: f64,
    /// Example-specific peak excursion (sup x, sup |x|, or sup r).
    #[pyo3(get)]
    peak: f64,
}

#[pymethods]
impl SimResult {
    fn __len__(&self) -> usize {
        self.t.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SimResult({} steps, peak={}, escaped={})",
            self.t.len(),
            self.peak,
            self.escaped
        )
    }
}

fn sim_result(traj: &Trajectory, sup_abs_x: f64, peak: f64) -> SimResult {
    SimResult {
        t: traj.times.clone(),
        states: traj.states.iter().map(|x| x.iter().copied().collect()).collect(),
        inputs: traj.inputs.iter().map(|u| u.iter().copied().collect()).collect(),
        disturbances: traj
            .disturbances
            .iter()
            .map(|d| d.iter().copied().collect())
            .collect(),
        h: traj.h_vals.clone(),
        hdot: traj.hdot_vals.clone(),
        v: traj.v_vals.clone(),
        delta: traj.delta_vals.clone(),
        status: traj.statuses.iter().map(|s| s.to_string()).collect(),
        escaped: traj.escaped,
        sup_abs_x,
        min_h: traj.min_h(),
        peak,
    }
}

/// Simulates one closed-loop cell.
///
/// `x0` is the full initial state: one component for `scalar`/`arctan`,
/// four for `robot2dof`.
#[pyfunction]
#[pyo3(signature = (
    example,
    controller,
    d = 0.0,
    epsilon = 1.0,
    lam = 1.0,
    x0 = None,
    tmax = 10.0,
    dt = 1e-3,
    disturbance = "constant",
    frequency = 1.0,
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    example: &str,
    controller: &str,
    d: f64,
    epsilon: f64,
    lam: f64,
    x0: Option<Vec<f64>>,
    tmax: f64,
    dt: f64,
    disturbance: &str,
    frequency: f64,
) -> PyResult<SimResult> {
    let mut cfg = ExperimentConfig::default_for(example.parse().map_err(to_py_err)?);
    cfg.set("controller", controller).map_err(to_py_err)?;
    cfg.set("disturbance", disturbance).map_err(to_py_err)?;
    cfg.d_values = vec![d];
    cfg.epsilon_values = vec![epsilon];
    cfg.lambda = lam;
    cfg.tmax = tmax;
    cfg.dt = dt;
    cfg.frequency = frequency;
    if let Some(x0) = x0 {
        cfg.x0_list = vec![DVector::from_vec(x0)];
    } else {
        cfg.x0_list.truncate(1);
    }
    cfg.validate().map_err(to_py_err)?;
    let artifacts = bench::run(&cfg).map_err(to_py_err)?;
    let run = &artifacts.runs[0];
    match (&run.status, &run.trajectory) {
        (bench::RunStatus::Failed { message, .. }, _) => {
            Err(PyRuntimeError::new_err(message.clone()))
        }
        (_, Some(traj)) => Ok(sim_result(traj, run.sup_abs_x, run.peak)),
        (_, None) => Err(PyRuntimeError::new_err("run produced no trajectory")),
    }
}

/// Samples the example's certificate conditions; returns
/// `(passed, report_lines)`.
#[pyfunction]
#[pyo3(signature = (example, seed = 0, samples = 2000))]
fn check(example: &str, seed: u64, samples: usize) -> PyResult<(bool, Vec<String>)> {
    let mut cfg = ExperimentConfig::default_for(example.parse().map_err(to_py_err)?);
    cfg.seed = seed;
    cfg.samples = samples;
    let out = bench::check_example(&cfg).map_err(to_py_err)?;
    Ok((out.passed(), out.reports))
}

#[pymodule]
fn pyissf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyComparisonFunction>()?;
    m.add_class::<QpSolution>()?;
    m.add_class::<Example>()?;
    m.add_class::<SimResult>()?;
    m.add_function(wrap_pyfunction!(gamma_from, m)?)?;
    m.add_function(wrap_pyfunction!(max_disturbance, m)?)?;
    m.add_function(wrap_pyfunction!(solve_qp, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
