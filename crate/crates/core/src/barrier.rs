//! Barrier certificates, the enlarged safe set, and QP constraint rows.
//!
//! A safe set `C = {x : h(x) >= 0}` is certified through residuals of the
//! form `L_fbar h(x) + alpha(h(x))`: nonnegativity over a region makes `h` a
//! barrier function there. Under a matched disturbance bounded by `dbar` the
//! invariant object becomes the enlarged set
//! `C_d = {x : h(x) + gamma(dbar) >= 0}`.
//!
//! The same Lie-derivative data is reshaped into affine inequality rows in
//! the decision vector `(u, delta)` for the pointwise quadratic programs.

use std::fmt;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classk::{Bound, ComparisonFunction, Kind};
use crate::error::Error;
use crate::system::{lie1, ControlAffineSystem, OutputMap, Region};

/// Set-membership tests absorb this much floating-point noise at the
/// boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Default number of random states for certificate sampling.
pub const DEFAULT_CERT_SAMPLES: usize = 10_000;

/// Inequality direction of a [`ConstraintRow`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Ge,
    Le,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Ge => write!(f, ">="),
            Sense::Le => write!(f, "<="),
        }
    }
}

/// One scalar affine inequality in the decision vector `(u, delta)`:
/// `a_u . u + a_delta * delta  (sense)  rhs`.
#[derive(Clone, Debug)]
pub struct ConstraintRow {
    pub a_u: DVector<f64>,
    pub a_delta: f64,
    pub rhs: f64,
    pub sense: Sense,
}

impl ConstraintRow {
    pub fn ge(a_u: DVector<f64>, a_delta: f64, rhs: f64) -> Self {
        Self {
            a_u,
            a_delta,
            rhs,
            sense: Sense::Ge,
        }
    }

    pub fn le(a_u: DVector<f64>, a_delta: f64, rhs: f64) -> Self {
        Self {
            a_u,
            a_delta,
            rhs,
            sense: Sense::Le,
        }
    }

    /// The row as `a . z >= rhs` over `z = (u, delta)`, flipping signs for
    /// `<=` rows.
    pub fn as_ge(&self) -> (DVector<f64>, f64) {
        let nz = self.a_u.len() + 1;
        let mut a = DVector::zeros(nz);
        for (i, v) in self.a_u.iter().enumerate() {
            a[i] = *v;
        }
        a[nz - 1] = self.a_delta;
        match self.sense {
            Sense::Ge => (a, self.rhs),
            Sense::Le => (-a, -self.rhs),
        }
    }

    /// Signed slack at `(u, delta)`; nonnegative iff the row is satisfied.
    pub fn slack(&self, u: &DVector<f64>, delta: f64) -> f64 {
        let lhs = self.a_u.dot(u) + self.a_delta * delta;
        match self.sense {
            Sense::Ge => lhs - self.rhs,
            Sense::Le => self.rhs - lhs,
        }
    }
}

/// A safe set `{h >= 0}` paired with the extended class K map `alpha` and
/// the domain constants `b = -inf h`, `c = sup h` it is certified against.
///
/// The certificate domain is `D = {x : h(x) + b > 0}`; `alpha` must be
/// defined on at least `(-b, c)`.
#[derive(Clone)]
pub struct SafeSetSpec {
    pub h: OutputMap,
    pub alpha: ComparisonFunction,
    pub b: Bound,
    pub c: Bound,
}

impl SafeSetSpec {
    pub fn new(
        h: OutputMap,
        alpha: ComparisonFunction,
        b: Bound,
        c: Bound,
    ) -> Result<Self, Error> {
        if alpha.kind() != Kind::ExtendedK {
            return Err(Error::Domain(format!(
                "barrier decay must be extended class K, got {}",
                alpha.kind()
            )));
        }
        // alpha's domain must cover (-b, c) so alpha(h(x)) is defined on D.
        let lo_ok = match (alpha.lo(), b) {
            (Bound::Unbounded, _) => true,
            (Bound::Finite(_), Bound::Unbounded) => false,
            (Bound::Finite(l), Bound::Finite(bv)) => l <= -bv + 1e-12,
        };
        let hi_ok = match (alpha.hi(), c) {
            (Bound::Unbounded, _) => true,
            (Bound::Finite(_), Bound::Unbounded) => false,
            (Bound::Finite(u), Bound::Finite(cv)) => u >= cv - 1e-12,
        };
        if !lo_ok || !hi_ok {
            return Err(Error::Domain(format!(
                "alpha domain ({}, {}) does not cover (-b, c) = (-{b}, {c})",
                alpha.lo(),
                alpha.hi()
            )));
        }
        Ok(Self { h, alpha, b, c })
    }

    pub fn h_val(&self, x: &DVector<f64>) -> f64 {
        self.h.value(x)
    }

    /// Membership in the certificate domain `D = {x : h(x) + b > 0}`.
    pub fn in_domain(&self, x: &DVector<f64>) -> bool {
        match self.b {
            Bound::Unbounded => true,
            Bound::Finite(bv) => self.h_val(x) + bv > 0.0,
        }
    }

    fn require_in_domain(&self, x: &DVector<f64>) -> Result<f64, Error> {
        let h = self.h_val(x);
        if let Bound::Finite(bv) = self.b {
            if !(h + bv > 0.0) {
                return Err(Error::Domain(format!(
                    "state outside D: h(x) = {h} with b = {bv} (alpha undefined)"
                )));
            }
        }
        Ok(h)
    }

    /// Barrier residual `L_fbar h(x) + alpha(h(x))` for the closed loop
    /// `fbar = f + g k`. Nonnegative over a region iff `h` is a barrier
    /// function for that loop on the sampled region.
    pub fn bf_residual<K>(
        &self,
        sys: &ControlAffineSystem,
        k: K,
        x: &DVector<f64>,
    ) -> Result<f64, Error>
    where
        K: Fn(&DVector<f64>) -> DVector<f64>,
    {
        let h = self.require_in_domain(x)?;
        let (lf, lg) = lie1(sys, &self.h, x)?;
        let u = k(x);
        if u.len() != sys.m() {
            return Err(Error::Shape(format!(
                "feedback returned length {}, expected {}",
                u.len(),
                sys.m()
            )));
        }
        Ok(lf + lg.dot(&u) + self.alpha.eval_checked(h)?)
    }

    /// Disturbed residual
    /// `L_fbar h + L_g h . mu + alpha(h) + iota(|mu|)`; nonnegativity over
    /// states and disturbances `|mu| <= dbar` certifies the disturbed
    /// barrier property.
    pub fn issf_bf_residual<K>(
        &self,
        sys: &ControlAffineSystem,
        k: K,
        iota: &ComparisonFunction,
        x: &DVector<f64>,
        mu: &DVector<f64>,
    ) -> Result<f64, Error>
    where
        K: Fn(&DVector<f64>) -> DVector<f64>,
    {
        if mu.len() != sys.m() {
            return Err(Error::Shape(format!(
                "disturbance has length {}, expected {}",
                mu.len(),
                sys.m()
            )));
        }
        let base = self.bf_residual(sys, k, x)?;
        let (_, lg) = lie1(sys, &self.h, x)?;
        Ok(base + lg.dot(mu) + iota.eval_checked(mu.norm())?)
    }

    /// Level value of the enlarged set: `h(x) + gamma(dbar)`.
    /// `x` is in `C_d` iff the result is nonnegative.
    pub fn cd_level(
        &self,
        gamma: &ComparisonFunction,
        dbar: f64,
        x: &DVector<f64>,
    ) -> Result<f64, Error> {
        let margin = gamma.eval_checked(dbar)?;
        if let Bound::Finite(bv) = self.b {
            if margin >= bv {
                return Err(Error::Margin(format!(
                    "gamma({dbar}) = {margin} >= b = {bv}: the enlarged set leaves the certificate domain"
                )));
            }
        }
        Ok(self.h_val(x) + margin)
    }

    /// Level value of the enlarged set for linear decay `alpha(r) = lambda r`:
    /// `h(x) + iota(dbar) / lambda`.
    pub fn exponential_cd_level(
        &self,
        lambda: f64,
        iota: &ComparisonFunction,
        dbar: f64,
        x: &DVector<f64>,
    ) -> Result<f64, Error> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!(
                "decay rate must be positive, got {lambda}"
            )));
        }
        Ok(self.h_val(x) + iota.eval_checked(dbar)? / lambda)
    }

    /// The barrier inequality as a row over `(u, delta)`:
    /// `L_g h . u >= -alpha(h) - L_f h + epsilon |L_g h|^2`.
    ///
    /// `epsilon = 0` recovers the plain barrier row; `epsilon > 0` buys a
    /// margin against matched disturbances.
    pub fn issf_cbf_row(
        &self,
        sys: &ControlAffineSystem,
        x: &DVector<f64>,
        epsilon: f64,
    ) -> Result<ConstraintRow, Error> {
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        let h = self.require_in_domain(x)?;
        let (lf, lg) = lie1(sys, &self.h, x)?;
        let rhs = -self.alpha.eval_checked(h)? - lf + epsilon * lg.norm_squared();
        Ok(ConstraintRow::ge(lg, 0.0, rhs))
    }

    /// Relative-degree-two barrier row with exponential gains `(kp, kd)`:
    /// `L_g L_f h . u >= -kp h - kd L_f h - L_f^2 h + epsilon |L_g L_f h|^2`.
    pub fn rel2_issf_row(
        &self,
        sys: &ControlAffineSystem,
        x: &DVector<f64>,
        kp: f64,
        kd: f64,
        epsilon: f64,
    ) -> Result<ConstraintRow, Error> {
        if self.h.relative_degree() != 2 {
            return Err(Error::Usage(
                "relative-degree-2 row requested for a degree-1 output".into(),
            ));
        }
        if !(kp > 0.0) || !(kd > 0.0) {
            return Err(Error::Domain(format!(
                "barrier gains must be positive, got kp = {kp}, kd = {kd}"
            )));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        let h = self.require_in_domain(x)?;
        let (lf, _) = lie1(sys, &self.h, x)?;
        let lf2 = self.h.lf2(x)?;
        let lglf = self.h.lglf(x)?;
        let rhs = -kp * h - kd * lf - lf2 + epsilon * lglf.norm_squared();
        Ok(ConstraintRow::ge(lglf, 0.0, rhs))
    }
}

/// Stabilization row with relaxation:
/// `L_f V + L_g V . u <= decay + delta`.
pub fn clf_row(
    v: &OutputMap,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
    decay: f64,
) -> Result<ConstraintRow, Error> {
    let (lf, lg) = lie1(sys, v, x)?;
    Ok(ConstraintRow::le(lg, -1.0, decay - lf))
}

/// Result of sampling a certificate condition over a region.
///
/// The input set is taken to be all of `R^m` (noted by
/// `unbounded_inputs_assumed`), so pointwise feasibility checks only bind
/// where the input coefficient vanishes.
#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub name: String,
    pub samples: usize,
    pub min_residual: f64,
    pub worst_state: Vec<f64>,
    pub violations: usize,
    pub unbounded_inputs_assumed: bool,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate: {}", self.name)?;
        writeln!(f, "  samples:        {}", self.samples)?;
        writeln!(f, "  min residual:   {:.6e}", self.min_residual)?;
        writeln!(f, "  worst state:    {:?}", self.worst_state)?;
        writeln!(f, "  violations:     {}", self.violations)?;
        if self.unbounded_inputs_assumed {
            writeln!(f, "  note: input set taken as all of R^m")?;
        }
        write!(
            f,
            "  verdict:        {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Samples the closed-loop barrier residual over `region`.
pub fn check_bf_certificate<K>(
    spec: &SafeSetSpec,
    sys: &ControlAffineSystem,
    k: K,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport, Error>
where
    K: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_residual = f64::INFINITY;
    let mut worst = Vec::new();
    let mut violations = 0;
    let mut used = 0;
    for _ in 0..samples {
        let x = region.sample(&mut rng);
        if !spec.in_domain(&x) {
            continue;
        }
        used += 1;
        let r = spec.bf_residual(sys, &k, &x)?;
        if r < min_residual {
            min_residual = r;
            worst = x.iter().copied().collect();
        }
        if r < -BOUNDARY_TOL {
            violations += 1;
        }
    }
    Ok(CertificateReport {
        name: "barrier residual L_fbar h + alpha(h) >= 0".into(),
        samples: used,
        min_residual,
        worst_state: worst,
        violations,
        unbounded_inputs_assumed: false,
    })
}

/// Samples the disturbed barrier residual over `region` with disturbances
/// drawn from the ball `|mu| <= dbar`.
pub fn check_issf_bf_certificate<K>(
    spec: &SafeSetSpec,
    sys: &ControlAffineSystem,
    k: K,
    iota: &ComparisonFunction,
    dbar: f64,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport, Error>
where
    K: Fn(&DVector<f64>) -> DVector<f64>,
{
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_residual = f64::INFINITY;
    let mut worst = Vec::new();
    let mut violations = 0;
    let mut used = 0;
    let m = sys.m();
    for _ in 0..samples {
        let x = region.sample(&mut rng);
        if !spec.in_domain(&x) {
            continue;
        }
        // Uniform direction scaled by a uniform radius in [0, dbar].
        let mut mu = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let norm = mu.norm();
        if norm > 0.0 {
            mu *= rng.random_range(0.0..=1.0) * dbar / norm;
        }
        used += 1;
        let r = spec.issf_bf_residual(sys, &k, iota, &x, &mu)?;
        if r < min_residual {
            min_residual = r;
            worst = x.iter().copied().collect();
        }
        if r < -BOUNDARY_TOL {
            violations += 1;
        }
    }
    Ok(CertificateReport {
        name: format!("disturbed barrier residual (|mu| <= {dbar})"),
        samples: used,
        min_residual,
        worst_state: worst,
        violations,
        unbounded_inputs_assumed: false,
    })
}

/// Checks the pointwise feasibility of the barrier inequality when the input
/// set is all of `R^m`: the condition only binds where `L_g h = 0`, where it
/// reduces to `A(x) = L_f h + alpha(h) >= 0`.
pub fn check_cbf_feasibility(
    spec: &SafeSetSpec,
    sys: &ControlAffineSystem,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<CertificateReport, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_a = f64::INFINITY;
    let mut worst = Vec::new();
    let mut violations = 0;
    let mut binding = 0;
    for _ in 0..samples {
        let x = region.sample(&mut rng);
        if !spec.in_domain(&x) {
            continue;
        }
        let (lf, lg) = lie1(sys, &spec.h, &x)?;
        if lg.norm() > 1e-9 * x.norm().max(1.0) {
            continue;
        }
        binding += 1;
        let a = lf + spec.alpha.eval_checked(spec.h_val(&x))?;
        if a < min_a {
            min_a = a;
            worst = x.iter().copied().collect();
        }
        if a < -BOUNDARY_TOL {
            violations += 1;
        }
    }
    Ok(CertificateReport {
        name: "control barrier feasibility (A >= 0 wherever L_g h = 0)".into(),
        samples: binding,
        min_residual: min_a,
        worst_state: worst,
        violations,
        unbounded_inputs_assumed: true,
    })
}
