//! Control-affine dynamics, disturbance signals, and output maps.
//!
//! Systems have the form `xdot = f(x) + g(x) u` with the disturbance entering
//! through the input channel: applying a feedback `k` under a disturbance `d`
//! gives the closed loop `xdot = f(x) + g(x)(k(x) + d(t))`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Error;

type StateFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type SignalFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// `xdot = f(x) + g(x) u` with state dimension `n` and input dimension `m`.
///
/// `f` and `g` must be pure; evaluators are shape-checked on every call.
#[derive(Clone)]
pub struct ControlAffineSystem {
    n: usize,
    m: usize,
    f: StateFn,
    g: MatrixFn,
}

impl ControlAffineSystem {
    pub fn new<F, G>(n: usize, m: usize, f: F, g: G) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            n,
            m,
            f: Arc::new(f),
            g: Arc::new(g),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn check_state(&self, x: &DVector<f64>) -> Result<(), Error> {
        if x.len() != self.n {
            return Err(Error::Shape(format!(
                "state has length {}, system expects n = {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Drift `f(x)`.
    pub fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>, Error> {
        self.check_state(x)?;
        let fx = (self.f)(x);
        if fx.len() != self.n {
            return Err(Error::Shape(format!(
                "drift returned length {}, expected {}",
                fx.len(),
                self.n
            )));
        }
        Ok(fx)
    }

    /// Input matrix `g(x)`, shape `n x m`.
    pub fn input_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, Error> {
        self.check_state(x)?;
        let gx = (self.g)(x);
        if gx.nrows() != self.n || gx.ncols() != self.m {
            return Err(Error::Shape(format!(
                "input matrix is {}x{}, expected {}x{}",
                gx.nrows(),
                gx.ncols(),
                self.n,
                self.m
            )));
        }
        Ok(gx)
    }

    /// Largest finite-difference quotient of `f` and `g` over random nearby
    /// state pairs in `region`; a crude empirical local-Lipschitz probe.
    pub fn probe_lipschitz(
        &self,
        region: &Region,
        pairs: usize,
        seed: u64,
    ) -> Result<LipschitzProbe, Error> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut max_f = 0.0_f64;
        let mut max_g = 0.0_f64;
        for _ in 0..pairs {
            let x1 = region.sample(&mut rng);
            let mut x2 = x1.clone();
            for v in x2.iter_mut() {
                *v += rng.random_range(-1e-4..1e-4);
            }
            let dx = (&x2 - &x1).norm();
            if dx == 0.0 {
                continue;
            }
            let df = (self.drift(&x2)? - self.drift(&x1)?).norm();
            let dg = (self.input_matrix(&x2)? - self.input_matrix(&x1)?).norm();
            max_f = max_f.max(df / dx);
            max_g = max_g.max(dg / dx);
        }
        Ok(LipschitzProbe { max_f, max_g })
    }
}

/// Largest observed difference quotients from [`ControlAffineSystem::probe_lipschitz`].
#[derive(Clone, Copy, Debug)]
pub struct LipschitzProbe {
    pub max_f: f64,
    pub max_g: f64,
}

impl LipschitzProbe {
    pub fn bounded_by(&self, limit: f64) -> bool {
        self.max_f.is_finite() && self.max_g.is_finite() && self.max_f <= limit && self.max_g <= limit
    }
}

/// An axis-aligned box of states, used for sampling-based checks.
#[derive(Clone, Debug)]
pub struct Region {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, Error> {
        if lo.len() != hi.len() {
            return Err(Error::Shape(format!(
                "region bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Domain("region must have lo < hi in every coordinate".into()));
        }
        Ok(Self {
            lo: DVector::from_vec(lo),
            hi: DVector::from_vec(hi),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.lo.len(), |i, _| {
            rng.random_range(self.lo[i]..self.hi[i])
        })
    }
}

/// A bounded time signal `d(t)` with a declared sup-norm bound.
#[derive(Clone)]
pub struct DisturbanceSignal {
    d: SignalFn,
    bound: f64,
    m: usize,
}

impl DisturbanceSignal {
    pub fn from_fn<F>(m: usize, bound: f64, d: F) -> Self
    where
        F: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            d: Arc::new(d),
            bound,
            m,
        }
    }

    pub fn zero(m: usize) -> Self {
        Self::from_fn(m, 0.0, move |_| DVector::zeros(m))
    }

    /// Constant vector signal; the bound is its Euclidean norm.
    pub fn constant(v: DVector<f64>) -> Self {
        let bound = v.norm();
        let m = v.len();
        Self::from_fn(m, bound, move |_| v.clone())
    }

    /// Constant signal of magnitude `|amplitude|` spread evenly over all `m`
    /// channels, so the declared bound equals the scalar amplitude.
    pub fn constant_amplitude(m: usize, amplitude: f64) -> Self {
        let per_channel = amplitude / (m as f64).sqrt();
        Self::from_fn(m, amplitude.abs(), move |_| {
            DVector::from_element(m, per_channel)
        })
    }

    /// `d(t) = amplitude * sin(2 pi freq t)` spread evenly over channels.
    pub fn sinusoid(m: usize, amplitude: f64, freq_hz: f64) -> Self {
        let per_channel = amplitude / (m as f64).sqrt();
        Self::from_fn(m, amplitude.abs(), move |t| {
            DVector::from_element(m, per_channel * (std::f64::consts::TAU * freq_hz * t).sin())
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        (self.d)(t)
    }
}

/// A scalar output `h` (or `V`) with its gradient and, for relative degree
/// two, the second-order Lie evaluators the input shows up in.
#[derive(Clone)]
pub struct OutputMap {
    value: ScalarFn,
    grad: StateFn,
    relative_degree: u8,
    lie2: Option<SecondOrderLie>,
}

#[derive(Clone)]
struct SecondOrderLie {
    lf2: ScalarFn,
    lglf: StateFn,
}

impl OutputMap {
    /// Relative-degree-one output with an analytic gradient.
    pub fn degree1<V, G>(value: V, grad: G) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            grad: Arc::new(grad),
            relative_degree: 1,
            lie2: None,
        }
    }

    /// Relative-degree-one output whose gradient falls back to central
    /// finite differences with step `1e-6 * max(1, |x|)`.
    pub fn degree1_fd<V>(value: V) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        let value = Arc::new(value);
        let for_grad = value.clone();
        Self {
            value,
            grad: Arc::new(move |x: &DVector<f64>| {
                let step = 1e-6 * x.norm().max(1.0);
                DVector::from_fn(x.len(), |i, _| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    ((for_grad)(&xp) - (for_grad)(&xm)) / (2.0 * step)
                })
            }),
            relative_degree: 1,
            lie2: None,
        }
    }

    /// Relative-degree-two output with analytic `L_f^2 h` and `L_g L_f h`.
    pub fn degree2<V, G, F2, GF>(value: V, grad: G, lf2: F2, lglf: GF) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        F2: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        GF: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            grad: Arc::new(grad),
            relative_degree: 2,
            lie2: Some(SecondOrderLie {
                lf2: Arc::new(lf2),
                lglf: Arc::new(lglf),
            }),
        }
    }

    pub fn relative_degree(&self) -> u8 {
        self.relative_degree
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.grad)(x)
    }

    /// `L_f^2 h(x)`; usage error unless the output is relative degree two.
    pub fn lf2(&self, x: &DVector<f64>) -> Result<f64, Error> {
        match &self.lie2 {
            Some(l) => Ok((l.lf2)(x)),
            None => Err(Error::Usage(
                "second-order Lie derivative requested on a relative-degree-1 output".into(),
            )),
        }
    }

    /// `L_g L_f h(x)` as a length-`m` vector.
    pub fn lglf(&self, x: &DVector<f64>) -> Result<DVector<f64>, Error> {
        match &self.lie2 {
            Some(l) => Ok((l.lglf)(x)),
            None => Err(Error::Usage(
                "second-order Lie derivative requested on a relative-degree-1 output".into(),
            )),
        }
    }

    /// Relative error between the analytic gradient and central finite
    /// differences at `x`.
    pub fn grad_check(&self, x: &DVector<f64>) -> f64 {
        let step = 1e-6 * x.norm().max(1.0);
        let fd = DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            (self.value(&xp) - self.value(&xm)) / (2.0 * step)
        });
        let g = self.grad(x);
        (g.clone() - &fd).norm() / g.norm().max(1.0)
    }
}

/// First-order Lie derivatives of `out` along `sys` at `x`:
/// `L_f h = grad h . f` and `L_g h = g^T grad h` (length `m`).
pub fn lie1(
    sys: &ControlAffineSystem,
    out: &OutputMap,
    x: &DVector<f64>,
) -> Result<(f64, DVector<f64>), Error> {
    let fx = sys.drift(x)?;
    let gx = sys.input_matrix(x)?;
    let gr = out.grad(x);
    if gr.len() != sys.n() {
        return Err(Error::Shape(format!(
            "gradient has length {}, expected {}",
            gr.len(),
            sys.n()
        )));
    }
    let lf = gr.dot(&fx);
    let lg = gx.transpose() * gr;
    Ok((lf, lg))
}

/// The closed-loop field `(t, x) -> f(x) + g(x)(k(x) + d(t))`.
#[derive(Clone)]
pub struct ClosedLoopField {
    sys: ControlAffineSystem,
    k: StateFn,
    d: DisturbanceSignal,
}

impl ClosedLoopField {
    pub fn eval(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, Error> {
        let u = (self.k)(x);
        if u.len() != self.sys.m() {
            return Err(Error::Shape(format!(
                "controller returned length {}, system expects m = {}",
                u.len(),
                self.sys.m()
            )));
        }
        let fx = self.sys.drift(x)?;
        let gx = self.sys.input_matrix(x)?;
        Ok(fx + gx * (u + self.d.eval(t)))
    }
}

/// Builds the disturbed closed loop for a state feedback `k`.
pub fn closed_loop<K>(
    sys: &ControlAffineSystem,
    k: K,
    d: &DisturbanceSignal,
) -> ClosedLoopField
where
    K: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
{
    ClosedLoopField {
        sys: sys.clone(),
        k: Arc::new(k),
        d: d.clone(),
    }
}

/// Planar 2-DOF robot: a rotating link of mass `big_m` and length `length`
/// carrying a second mass `m_link` at displacement `r` along the link.
///
/// State `(theta, r, thetadot, rdot)`, inputs `(tau, T)`. The inertia matrix
/// is `diag(m r^2 + M L^2 / 3, m)` and the Coriolis vector
/// `(2 m r rdot thetadot, -m r thetadot^2)`; gravity is not modeled.
pub fn robot2dof(m_link: f64, big_m: f64, length: f64) -> Result<ControlAffineSystem, Error> {
    for (name, v) in [("m", m_link), ("M", big_m), ("L", length)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!(
                "robot parameter {name} must be positive, got {v}"
            )));
        }
    }
    let beam_inertia = big_m * length * length / 3.0;
    let f = move |x: &DVector<f64>| {
        let (r, thetadot, rdot) = (x[1], x[2], x[3]);
        let d1 = m_link * r * r + beam_inertia;
        let coriolis_theta = 2.0 * m_link * r * rdot * thetadot;
        let coriolis_r = -m_link * r * thetadot * thetadot;
        DVector::from_vec(vec![
            thetadot,
            rdot,
            -coriolis_theta / d1,
            -coriolis_r / m_link,
        ])
    };
    let g = move |x: &DVector<f64>| {
        let r = x[1];
        let d1 = m_link * r * r + beam_inertia;
        let mut gx = DMatrix::zeros(4, 2);
        gx[(2, 0)] = 1.0 / d1;
        gx[(3, 1)] = 1.0 / m_link;
        gx
    };
    Ok(ControlAffineSystem::new(4, 2, f, g))
}
