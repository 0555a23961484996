//! Builders for the three benchmark closed loops.

use nalgebra::{DMatrix, DVector};

use crate::barrier::SafeSetSpec;
use crate::classk::{gamma_from, Bound, ComparisonFunction};
use crate::error::Error;
use crate::system::{robot2dof, ControlAffineSystem, OutputMap, Region};

use super::config::RobotParams;

/// `xdot = -x + x^2 u` with safe set `{x <= 2}` and linear barrier decay.
pub struct ScalarExample {
    pub sys: ControlAffineSystem,
    pub spec: SafeSetSpec,
    /// Disturbance slack `iota(s) = s^2 / 4` from completing the square.
    pub iota: ComparisonFunction,
    /// Margin map `gamma(s) = iota(s) / lambda`, built numerically.
    pub gamma: ComparisonFunction,
    pub lambda: f64,
}

pub fn scalar_example(lambda: f64) -> Result<ScalarExample, Error> {
    let sys = ControlAffineSystem::new(
        1,
        1,
        |x| DVector::from_vec(vec![-x[0]]),
        |x| DMatrix::from_element(1, 1, x[0] * x[0]),
    );
    let h = OutputMap::degree1(|x| 2.0 - x[0], |x| DVector::from_element(x.len(), -1.0));
    let alpha = ComparisonFunction::linear(lambda)?;
    let spec = SafeSetSpec::new(h, alpha.clone(), Bound::Unbounded, Bound::Unbounded)?;
    let iota = ComparisonFunction::quarter_square();
    let gamma = gamma_from(&alpha, &iota)?;
    Ok(ScalarExample {
        sys,
        spec,
        iota,
        gamma,
        lambda,
    })
}

impl ScalarExample {
    /// Region used for certificate sampling.
    pub fn check_region(&self) -> Region {
        Region::new(vec![-5.0], vec![5.0]).expect("static bounds")
    }
}

/// Barrier decay of the arctan example written as a function of `r = h(x)`:
/// `alpha(r) = 2 (2 atan 2 - y atan y)` with `y = sqrt(4 - r)`, extended
/// linearly (C^1) past `r = 4` so its domain covers every value `h` attains.
pub fn arctan_alpha() -> ComparisonFunction {
    ComparisonFunction::extended(
        |r: f64| {
            let top = 2.0 * 2.0_f64.atan();
            if r < 4.0 {
                let y = (4.0 - r).sqrt();
                2.0 * (top - y * y.atan())
            } else {
                2.0 * top + (r - 4.0)
            }
        },
        Bound::Unbounded,
        Bound::Unbounded,
    )
    .expect("static bounds")
}

/// `xdot = -atan(x) + u` with CLF `V = x atan x` and CBF `h = 4 - x^2`.
pub struct ArctanExample {
    pub sys: ControlAffineSystem,
    pub spec: SafeSetSpec,
    /// Lyapunov output with its gradient (for the relaxed QP row).
    pub clf: OutputMap,
}

pub fn arctan_example() -> Result<ArctanExample, Error> {
    let sys = ControlAffineSystem::new(
        1,
        1,
        |x| DVector::from_vec(vec![-x[0].atan()]),
        |_| DMatrix::from_element(1, 1, 1.0),
    );
    let h = OutputMap::degree1(|x| 4.0 - x[0] * x[0], |x| DVector::from_vec(vec![-2.0 * x[0]]));
    let spec = SafeSetSpec::new(h, arctan_alpha(), Bound::Unbounded, Bound::Finite(4.0))?;
    let clf = OutputMap::degree1(
        |x| x[0] * x[0].atan(),
        |x| DVector::from_vec(vec![x[0].atan() + x[0] / (1.0 + x[0] * x[0])]),
    );
    Ok(ArctanExample { sys, spec, clf })
}

impl ArctanExample {
    pub fn check_region(&self) -> Region {
        Region::new(vec![-5.0], vec![5.0]).expect("static bounds")
    }

    pub fn lyapunov_value(&self, x: &DVector<f64>) -> f64 {
        self.clf.value(x)
    }
}

/// Planar 2-DOF robot with displacement limit `h = r* - r` (relative degree
/// two) and mechanical-energy-style CLF
/// `V = (q - q_d)^T K_p (q - q_d) + qdot^T D(q) qdot`.
pub struct RobotExample {
    pub sys: ControlAffineSystem,
    pub spec: SafeSetSpec,
    pub clf: OutputMap,
    pub params: RobotParams,
}

pub fn robot_example(params: &RobotParams) -> Result<RobotExample, Error> {
    for (name, v) in [
        ("K_p", params.clf_kp),
        ("K_d", params.clf_kd),
        ("k_p", params.barrier_kp),
        ("k_d", params.barrier_kd),
        ("r_star", params.r_star),
    ] {
        if !v.is_finite() || !(v > 0.0) {
            return Err(Error::Config(format!(
                "robot gain {name} must be positive, got {v}"
            )));
        }
    }
    let sys = robot2dof(params.m_link, params.big_m, params.length)?;

    let r_star = params.r_star;
    let m = params.m_link;
    // State layout: (theta, r, thetadot, rdot).
    let h = OutputMap::degree2(
        move |x: &DVector<f64>| r_star - x[1],
        |_x| DVector::from_vec(vec![0.0, -1.0, 0.0, 0.0]),
        // hddot drift: rddot = r thetadot^2 from the Coriolis term.
        |x: &DVector<f64>| -x[1] * x[2] * x[2],
        move |_x| DVector::from_vec(vec![0.0, -1.0 / m]),
    );
    // The barrier row for relative degree two never evaluates alpha.
    let spec = SafeSetSpec::new(
        h,
        ComparisonFunction::identity(),
        Bound::Unbounded,
        Bound::Unbounded,
    )?;

    let kp = params.clf_kp;
    let (theta_d, r_d) = params.qd;
    let beam_inertia = params.big_m * params.length * params.length / 3.0;
    let d1 = move |r: f64| m * r * r + beam_inertia;
    let clf = OutputMap::degree1(
        move |x: &DVector<f64>| {
            let (theta, r, thetadot, rdot) = (x[0], x[1], x[2], x[3]);
            kp * ((theta - theta_d).powi(2) + (r - r_d).powi(2))
                + d1(r) * thetadot * thetadot
                + m * rdot * rdot
        },
        move |x: &DVector<f64>| {
            let (theta, r, thetadot, rdot) = (x[0], x[1], x[2], x[3]);
            DVector::from_vec(vec![
                2.0 * kp * (theta - theta_d),
                2.0 * kp * (r - r_d) + 2.0 * m * r * thetadot * thetadot,
                2.0 * d1(r) * thetadot,
                2.0 * m * rdot,
            ])
        },
    );

    Ok(RobotExample {
        sys,
        spec,
        clf,
        params: params.clone(),
    })
}

impl RobotExample {
    pub fn check_region(&self) -> Region {
        Region::new(
            vec![-std::f64::consts::PI, 0.0, -3.0, -3.0],
            vec![std::f64::consts::PI, 2.5, 3.0, 3.0],
        )
        .expect("static bounds")
    }

    pub fn lyapunov_value(&self, x: &DVector<f64>) -> f64 {
        self.clf.value(x)
    }
}
