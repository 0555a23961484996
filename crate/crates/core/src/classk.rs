//! Comparison functions and the disturbance-margin construction.
//!
//! A comparison function is a strictly increasing scalar map vanishing at
//! zero. Three kinds appear in barrier certificates: class K maps on
//! `[0, a)`, class K-infinity maps (class K, unbounded domain and range),
//! and extended class K maps on an interval `(-b, c)` straddling zero.
//!
//! Everything here treats the map as a black box: monotonicity is checked by
//! dense sampling, inversion by bisection on a geometrically grown bracket.
//! From an extended class K `alpha` the module builds
//! `beta(r) = -alpha(-r)` and the margin map `gamma = beta^{-1} o iota`,
//! which converts a disturbance bound into an enlargement of the safe set.

use std::fmt;
use std::sync::Arc;

use crate::error::Error;

/// Zero-at-zero tolerance used by [`ComparisonFunction::validate`].
pub const ZERO_TOL: f64 = 1e-12;

/// Default residual tolerance for bisection-based inversion.
pub const DEFAULT_INVERT_TOL: f64 = 1e-10;

/// Magnitude cap for sampling grids on unbounded domains.
const SAMPLE_CAP: f64 = 1e6;

/// Divergence threshold for the class K-infinity ladder check.
const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// One endpoint of a comparison-function domain.
///
/// Infinite endpoints carry an explicit marker instead of a sentinel float
/// so bracket growth never multiplies infinities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Unbounded,
    Finite(f64),
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Unbounded => None,
            Bound::Finite(v) => Some(v),
        }
    }

    /// The endpoint as a float, mapping `Unbounded` to `sign * infinity`.
    fn as_f64(self, sign: f64) -> f64 {
        match self {
            Bound::Unbounded => sign * f64::INFINITY,
            Bound::Finite(v) => v,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Unbounded => write!(f, "unbounded"),
            Bound::Finite(v) => write!(f, "{v}"),
        }
    }
}

/// Which family a [`ComparisonFunction`] claims to belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Strictly increasing on `[0, a)`, zero at zero.
    ClassK,
    /// Class K on `[0, inf)` with values diverging to infinity.
    ClassKInf,
    /// Strictly increasing on `(-b, c)` with `b, c > 0`, zero at zero.
    ExtendedK,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::ClassK => write!(f, "class K"),
            Kind::ClassKInf => write!(f, "class K-infinity"),
            Kind::ExtendedK => write!(f, "extended class K"),
        }
    }
}

/// A scalar monotone map with explicit domain bounds.
///
/// The claimed properties (strict monotonicity, zero at zero, divergence for
/// class K-infinity) are not enforced at construction; [`validate`] checks
/// them by sampling.
///
/// [`validate`]: ComparisonFunction::validate
#[derive(Clone)]
pub struct ComparisonFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: Bound,
    hi: Bound,
    kind: Kind,
}

impl fmt::Debug for ComparisonFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ComparisonFunction {{ kind: {:?}, lo: {:?}, hi: {:?} }}",
            self.kind, self.lo, self.hi
        )
    }
}

impl ComparisonFunction {
    /// Class K function on `[0, hi)`.
    pub fn class_k<F>(f: F, hi: Bound) -> Result<Self, Error>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if let Bound::Finite(a) = hi {
            if !(a > 0.0) {
                return Err(Error::Domain(format!(
                    "class K domain [0, {a}) is empty"
                )));
            }
        }
        Ok(Self {
            f: Arc::new(f),
            lo: Bound::Finite(0.0),
            hi,
            kind: Kind::ClassK,
        })
    }

    /// Class K-infinity function on `[0, inf)`.
    pub fn class_k_inf<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            lo: Bound::Finite(0.0),
            hi: Bound::Unbounded,
            kind: Kind::ClassKInf,
        }
    }

    /// Extended class K function on `(lo, hi)` with `lo < 0 < hi`.
    pub fn extended<F>(f: F, lo: Bound, hi: Bound) -> Result<Self, Error>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if let Bound::Finite(l) = lo {
            if !(l < 0.0) {
                return Err(Error::Domain(format!(
                    "extended class K lower bound must be negative, got {l}"
                )));
            }
        }
        if let Bound::Finite(c) = hi {
            if !(c > 0.0) {
                return Err(Error::Domain(format!(
                    "extended class K upper bound must be positive, got {c}"
                )));
            }
        }
        Ok(Self {
            f: Arc::new(f),
            lo,
            hi,
            kind: Kind::ExtendedK,
        })
    }

    /// The identity map as an extended class K function on the whole line.
    pub fn identity() -> Self {
        Self::extended(|r| r, Bound::Unbounded, Bound::Unbounded).expect("static bounds")
    }

    /// `r -> lam * r` on the whole line, `lam > 0`.
    pub fn linear(lam: f64) -> Result<Self, Error> {
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(Error::Domain(format!("linear slope must be positive, got {lam}")));
        }
        Self::extended(move |r| lam * r, Bound::Unbounded, Bound::Unbounded)
    }

    /// `r -> r^3` on the whole line.
    pub fn cubic() -> Self {
        Self::extended(|r| r * r * r, Bound::Unbounded, Bound::Unbounded).expect("static bounds")
    }

    /// `s -> s^2 / 4` as a class K-infinity map; the slack produced by
    /// completing the square against a disturbance of magnitude `s`.
    pub fn quarter_square() -> Self {
        Self::class_k_inf(|s| 0.25 * s * s)
    }

    /// `s -> coeff * s^2` as a class K-infinity map, `coeff > 0`.
    pub fn scaled_square(coeff: f64) -> Result<Self, Error> {
        if !(coeff > 0.0) || !coeff.is_finite() {
            return Err(Error::Domain(format!(
                "square coefficient must be positive, got {coeff}"
            )));
        }
        Ok(Self::class_k_inf(move |s| coeff * s * s))
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn lo(&self) -> Bound {
        self.lo
    }

    pub fn hi(&self) -> Bound {
        self.hi
    }

    /// True for class K and class K-infinity (domain starting at zero).
    pub fn is_class_k_like(&self) -> bool {
        matches!(self.kind, Kind::ClassK | Kind::ClassKInf)
    }

    /// Domain membership. Class K domains include the left endpoint 0.
    pub fn contains(&self, r: f64) -> bool {
        if !r.is_finite() {
            return false;
        }
        let above = match self.kind {
            Kind::ClassK | Kind::ClassKInf => r >= 0.0,
            Kind::ExtendedK => r > self.lo.as_f64(-1.0),
        };
        above && r < self.hi.as_f64(1.0)
    }

    /// Evaluates the map. The caller is responsible for `r` being in the
    /// domain; use [`eval_checked`](Self::eval_checked) otherwise.
    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    /// Evaluates with a domain-membership check.
    pub fn eval_checked(&self, r: f64) -> Result<f64, Error> {
        if !self.contains(r) {
            return Err(Error::Domain(format!(
                "{r} outside the {} domain ({}, {})",
                self.kind, self.lo, self.hi
            )));
        }
        Ok(self.eval(r))
    }

    /// Samples the map on a dense grid and reports every monotonicity,
    /// zero-at-zero, or divergence violation found.
    ///
    /// The grid is log-spaced near domain edges and clipped to `|r| <= 1e6`;
    /// class K-infinity divergence is probed on a doubling ladder up to
    /// `2^60`.
    pub fn validate(&self, samples: usize) -> Result<ValidationReport, Error> {
        if samples < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let grid = self.sample_grid(samples);
        if grid.len() < 2 {
            return Err(Error::Domain("domain too small to sample".into()));
        }

        let mut violations = Vec::new();

        if self.contains(0.0) {
            let v0 = self.eval(0.0);
            if !(v0.abs() <= ZERO_TOL) {
                violations.push(Violation::NotZeroAtZero { value: v0 });
            }
        }

        let mut values = Vec::with_capacity(grid.len());
        for &r in &grid {
            let v = self.eval(r);
            if v.is_finite() {
                values.push((r, v));
            } else {
                violations.push(Violation::NotFinite { r, value: v });
            }
        }
        // Exact ties at the sampled extremes are floating-point saturation
        // (e.g. tanh rounds to +-1 in the tails) and cannot be distinguished
        // from strict increase; ties strictly inside the value range are
        // genuine plateaus and flagged.
        let vmin = values.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        let vmax = values
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        for pair in values.windows(2) {
            let (r1, v1) = pair[0];
            let (r2, v2) = pair[1];
            let near = |v: f64, edge: f64| (v - edge).abs() <= 4.0 * f64::EPSILON * edge.abs().max(1.0);
            let tie_at_saturation = v2 == v1 && (near(v1, vmin) || near(v1, vmax));
            if !(v2 > v1) && !tie_at_saturation {
                violations.push(Violation::NotIncreasing { r1, r2, v1, v2 });
            }
        }

        if self.kind == Kind::ClassKInf {
            let mut top = 1.0;
            let mut reached = self.eval(top);
            for _ in 0..60 {
                top *= 2.0;
                reached = self.eval(top);
                if reached >= DIVERGENCE_THRESHOLD {
                    break;
                }
            }
            if !(reached >= DIVERGENCE_THRESHOLD) {
                violations.push(Violation::NotDiverging {
                    probe: top,
                    value: reached,
                });
            }
        }

        Ok(ValidationReport {
            kind: self.kind,
            samples: grid.len(),
            violations,
        })
    }

    /// Solves `f(r) = y` by bisection, growing the bracket geometrically
    /// from the origin (factor 2 on unbounded domains, gap-halving toward a
    /// finite endpoint). Returns `r` with `|f(r) - y| <= tol`.
    pub fn invert(&self, y: f64, tol: f64) -> Result<f64, Error> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
        }
        if !y.is_finite() {
            return Err(Error::Range(format!("cannot invert at non-finite value {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        if y < 0.0 && self.is_class_k_like() {
            return Err(Error::Range(format!(
                "{y} below the range of a {} function",
                self.kind
            )));
        }

        let positive = y > 0.0;
        let cap = if positive { self.hi } else { self.lo };
        let sign = if positive { 1.0 } else { -1.0 };

        // Grow the outer edge until f crosses y or the domain is exhausted.
        let mut inner = 0.0_f64;
        let mut outer = match cap {
            Bound::Unbounded => sign,
            Bound::Finite(c) => 0.5 * c,
        };
        let bracket = loop {
            let v = self.eval(outer);
            if v.is_nan() {
                return Err(Error::Range(format!(
                    "function returned NaN at {outer} while bracketing {y}"
                )));
            }
            let crossed = if positive { v >= y } else { v <= y };
            if crossed {
                break (inner, outer);
            }
            inner = outer;
            match cap {
                Bound::Unbounded => {
                    outer *= 2.0;
                    if outer.abs() > 1e300 {
                        return Err(Error::Range(format!(
                            "{y} not reached by the function out to {inner}"
                        )));
                    }
                }
                Bound::Finite(c) => {
                    let gap = c - outer;
                    outer += 0.5 * gap;
                    if gap.abs() <= f64::EPSILON * c.abs().max(1.0) {
                        return Err(Error::Range(format!(
                            "{y} outside the function range on its domain (bound {c})"
                        )));
                    }
                }
            }
        };

        // Bisection on an increasing function. Once the bracket collapses to
        // floating-point resolution the residual cannot improve further, so
        // accept anything within rounding distance of y.
        let float_tol = tol.max(8.0 * f64::EPSILON * y.abs().max(1.0));
        let (mut lo_r, mut hi_r) = if positive { bracket } else { (bracket.1, bracket.0) };
        let mut best = 0.5 * (lo_r + hi_r);
        for _ in 0..500 {
            let mid = 0.5 * (lo_r + hi_r);
            let v = self.eval(mid);
            best = mid;
            if (v - y).abs() <= tol {
                return Ok(mid);
            }
            if v < y {
                lo_r = mid;
            } else {
                hi_r = mid;
            }
            if hi_r - lo_r <= 4.0 * f64::EPSILON * lo_r.abs().max(hi_r.abs()).max(1.0) {
                break;
            }
        }
        let residual = (self.eval(best) - y).abs();
        if residual <= float_tol {
            Ok(best)
        } else {
            Err(Error::Numerics(format!(
                "bisection stalled inverting at {y}: residual {residual} > tol {tol}"
            )))
        }
    }

    /// Dense sampling grid over the domain, clipped to `|r| <= 1e6`:
    /// uniform interior points plus ladders clustering at each edge.
    fn sample_grid(&self, samples: usize) -> Vec<f64> {
        let lo_eff = self.lo.as_f64(-1.0).max(-SAMPLE_CAP);
        let hi_eff = self.hi.as_f64(1.0).min(SAMPLE_CAP);
        let width = hi_eff - lo_eff;
        let mut pts = Vec::with_capacity(samples + 90);

        if self.contains(0.0) {
            pts.push(0.0);
        }

        let uniform = (samples / 2).max(2);
        for i in 0..uniform {
            pts.push(lo_eff + width * (i as f64 + 0.5) / uniform as f64);
        }

        let ladder = (samples / 4).clamp(4, 40);
        // Cluster toward the upper edge.
        match self.hi {
            Bound::Finite(c) => {
                let gap = c - lo_eff;
                for k in 1..=ladder {
                    pts.push(c - gap * 0.5_f64.powi(k as i32));
                }
            }
            Bound::Unbounded => {
                let mut r = 1.0;
                for _ in 0..ladder {
                    if r > SAMPLE_CAP {
                        break;
                    }
                    pts.push(r);
                    r *= 2.0;
                }
            }
        }
        // Cluster toward the lower edge (extended domains only).
        if self.kind == Kind::ExtendedK {
            match self.lo {
                Bound::Finite(l) => {
                    let gap = hi_eff - l;
                    for k in 1..=ladder {
                        pts.push(l + gap * 0.5_f64.powi(k as i32));
                    }
                }
                Bound::Unbounded => {
                    let mut r = -1.0;
                    for _ in 0..ladder {
                        if r < -SAMPLE_CAP {
                            break;
                        }
                        pts.push(r);
                        r *= 2.0;
                    }
                }
            }
        }

        pts.retain(|&r| self.contains(r) && r.abs() <= SAMPLE_CAP);
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        pts.dedup();
        pts
    }
}

/// A single property violation found by [`ComparisonFunction::validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotZeroAtZero { value: f64 },
    NotIncreasing { r1: f64, r2: f64, v1: f64, v2: f64 },
    NotFinite { r: f64, value: f64 },
    NotDiverging { probe: f64, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotZeroAtZero { value } => {
                write!(f, "f(0) = {value} (expected 0 within {ZERO_TOL})")
            }
            Violation::NotIncreasing { r1, r2, v1, v2 } => {
                write!(f, "not strictly increasing: f({r1}) = {v1}, f({r2}) = {v2}")
            }
            Violation::NotFinite { r, value } => write!(f, "f({r}) = {value} is not finite"),
            Violation::NotDiverging { probe, value } => {
                write!(f, "f({probe}) = {value} does not diverge")
            }
        }
    }
}

/// Outcome of sampling-based validation.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub kind: Kind,
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            write!(f, "{} properties hold on {} samples", self.kind, self.samples)
        } else {
            writeln!(
                f,
                "{} properties FAILED ({} violations on {} samples):",
                self.kind,
                self.violations.len(),
                self.samples
            )?;
            for v in &self.violations {
                writeln!(f, "  - {v}")?;
            }
            Ok(())
        }
    }
}

/// Builds `beta(r) = -alpha(-r)` from an extended class K `alpha` on
/// `(-b, c)`. The result is class K on `[0, b)`.
pub fn beta_of(alpha: &ComparisonFunction) -> Result<ComparisonFunction, Error> {
    if alpha.kind != Kind::ExtendedK {
        return Err(Error::Domain(format!(
            "beta construction needs an extended class K function, got {}",
            alpha.kind
        )));
    }
    let hi = match alpha.lo {
        Bound::Unbounded => Bound::Unbounded,
        Bound::Finite(l) => {
            let b = -l;
            if !(b > 0.0) {
                return Err(Error::Domain(format!("need b > 0, got b = {b}")));
            }
            Bound::Finite(b)
        }
    };
    let inner = alpha.clone();
    Ok(ComparisonFunction {
        f: Arc::new(move |r| -inner.eval(-r)),
        lo: Bound::Finite(0.0),
        hi,
        kind: Kind::ClassK,
    })
}

/// Builds the disturbance-margin map `gamma(s) = beta^{-1}(iota(s))` with
/// `beta(r) = -alpha(-r)`.
///
/// `gamma` is class K on `[0, a)` where `a` is the largest disturbance bound
/// whose slack `iota(a)` stays below the range of `beta`; evaluating past
/// `a` (disturbances `alpha` cannot absorb) fails the checked path.
pub fn gamma_from(
    alpha: &ComparisonFunction,
    iota: &ComparisonFunction,
) -> Result<ComparisonFunction, Error> {
    if !iota.is_class_k_like() {
        return Err(Error::Domain(format!(
            "slack map must be class K, got {}",
            iota.kind
        )));
    }
    let beta = beta_of(alpha)?;
    let b_dom = beta.hi.as_f64(1.0);
    let a = max_disturbance(alpha, iota, b_dom, DEFAULT_INVERT_TOL)?;
    let hi = if a.is_finite() {
        Bound::Finite(a)
    } else {
        Bound::Unbounded
    };
    let iota_inner = iota.clone();
    Ok(ComparisonFunction {
        f: Arc::new(move |s| {
            if s == 0.0 {
                return 0.0;
            }
            // Inside [0, a) the inversion succeeds; rounding exactly at the
            // edge falls back to the domain cap.
            beta.invert(iota_inner.eval(s), DEFAULT_INVERT_TOL)
                .unwrap_or(b_dom)
        }),
        lo: Bound::Finite(0.0),
        hi,
        kind: Kind::ClassK,
    })
}

/// True iff some `r < cap` (also within `f`'s domain) has `f(r) >= y`:
/// whether an increasing map reaches `y` strictly below `cap`.
fn reaches_below(f: &ComparisonFunction, y: f64, cap: f64) -> bool {
    if y <= 0.0 {
        return true;
    }
    let ceiling = f.hi.as_f64(1.0).min(cap);
    let mut r = if ceiling.is_finite() { 0.5 * ceiling } else { 1.0 };
    for _ in 0..1100 {
        let v = f.eval(r);
        if v.is_nan() {
            return false;
        }
        if v >= y {
            return true;
        }
        if ceiling.is_finite() {
            let gap = ceiling - r;
            if gap <= f64::EPSILON * ceiling.abs().max(1.0) {
                return false;
            }
            r += 0.5 * gap;
        } else {
            r *= 2.0;
            if r > 1e300 {
                return false;
            }
        }
    }
    false
}

/// The supremum `d*` of disturbance bounds for which
/// `gamma(d) = beta^{-1}(iota(d)) < b` holds for all `d < d*`, located by
/// bisection to within `tol`. Returns `+inf` if no finite bound exists
/// (margins past 1e100 are reported as unbounded).
pub fn max_disturbance(
    alpha: &ComparisonFunction,
    iota: &ComparisonFunction,
    b: f64,
    tol: f64,
) -> Result<f64, Error> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("need b > 0, got {b}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let beta = beta_of(alpha)?;

    let admissible = |s: f64| -> bool {
        if s != 0.0 && !iota.contains(s) {
            return false;
        }
        let y = iota.eval(s);
        if !y.is_finite() {
            return false;
        }
        reaches_below(&beta, y, b)
    };

    // Grow until the predicate first fails, then bisect the boundary.
    let mut good = 0.0_f64;
    let mut probe = 1.0_f64;
    let bad = loop {
        if admissible(probe) {
            good = probe;
            if iota.eval(probe) >= 1e100 {
                return Ok(f64::INFINITY);
            }
            match iota.hi {
                Bound::Unbounded => {
                    probe *= 2.0;
                    if probe > 1e154 {
                        return Ok(f64::INFINITY);
                    }
                }
                Bound::Finite(c) => {
                    let gap = c - probe;
                    if gap <= tol.max(f64::EPSILON * c.abs()) {
                        return Ok(c);
                    }
                    probe += 0.5 * gap;
                }
            }
        } else {
            break probe;
        }
    };

    let (mut lo, mut hi) = (good, bad);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validate_identity_passes() {
        let id = ComparisonFunction::identity();
        let report = id.validate(100).unwrap();
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn validate_square_on_symmetric_interval_fails() {
        let sq = ComparisonFunction::extended(
            |r| r * r,
            Bound::Finite(-1.0),
            Bound::Finite(1.0),
        )
        .unwrap();
        let report = sq.validate(100).unwrap();
        assert!(!report.is_valid());
        // The offending pair must sit on the decreasing branch.
        let has_negative_pair = report.violations.iter().any(|v| match v {
            Violation::NotIncreasing { r1, .. } => *r1 < 0.0,
            _ => false,
        });
        assert!(has_negative_pair, "{report}");
    }

    #[test]
    fn validate_tanh_passes() {
        let th =
            ComparisonFunction::extended(|r: f64| r.tanh(), Bound::Unbounded, Bound::Unbounded)
                .unwrap();
        let report = th.validate(100).unwrap();
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn validate_flags_bounded_class_k_inf() {
        let th = ComparisonFunction::class_k_inf(|r: f64| r.tanh());
        let report = th.validate(100).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotDiverging { .. })));
    }

    #[test]
    fn validate_rejects_degenerate_input() {
        let id = ComparisonFunction::identity();
        assert!(matches!(id.validate(1), Err(Error::Domain(_))));
    }

    #[test]
    fn validate_flags_nonzero_at_zero() {
        let shifted =
            ComparisonFunction::extended(|r| r + 0.5, Bound::Unbounded, Bound::Unbounded).unwrap();
        let report = shifted.validate(50).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotZeroAtZero { .. })));
    }

    #[test]
    fn beta_of_linear_is_linear() {
        let alpha = ComparisonFunction::linear(2.0).unwrap();
        let beta = beta_of(&alpha).unwrap();
        assert_relative_eq!(beta.eval(1.0), 2.0, max_relative = 1e-15);
        assert_relative_eq!(beta.eval(0.3), 0.6, max_relative = 1e-15);
        assert_eq!(beta.kind(), Kind::ClassK);
    }

    #[test]
    fn beta_of_cubic_is_fixed_point() {
        let beta = beta_of(&ComparisonFunction::cubic()).unwrap();
        assert_relative_eq!(beta.eval(1.3), 1.3_f64.powi(3), max_relative = 1e-15);
    }

    #[test]
    fn beta_of_expm1() {
        // alpha(r) = e^r - 1 gives beta(r) = 1 - e^{-r}; value at 1 computed
        // directly from -alpha(-1).
        let alpha =
            ComparisonFunction::extended(|r: f64| r.exp_m1(), Bound::Unbounded, Bound::Unbounded)
                .unwrap();
        let beta = beta_of(&alpha).unwrap();
        assert_relative_eq!(beta.eval(1.0), 0.6321205588285577, epsilon = 1e-12);
    }

    #[test]
    fn beta_of_rejects_class_k_input() {
        let iota = ComparisonFunction::quarter_square();
        assert!(matches!(beta_of(&iota), Err(Error::Domain(_))));
    }

    #[test]
    fn beta_domain_is_reflected_alpha_domain() {
        let alpha = ComparisonFunction::extended(|r| r, Bound::Finite(-2.0), Bound::Unbounded)
            .unwrap();
        let beta = beta_of(&alpha).unwrap();
        assert_eq!(beta.hi(), Bound::Finite(2.0));
        assert!(beta.contains(1.9));
        assert!(!beta.contains(2.0));
    }

    #[test]
    fn invert_linear() {
        let f = ComparisonFunction::linear(2.0).unwrap();
        let r = f.invert(1.0, 1e-10).unwrap();
        assert_relative_eq!(r, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn invert_square_root() {
        let f = ComparisonFunction::class_k(|r| r * r, Bound::Finite(10.0)).unwrap();
        let r = f.invert(4.0, 1e-10).unwrap();
        assert_relative_eq!(r, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn invert_cubic_plus_linear() {
        let f = ComparisonFunction::extended(
            |r| r + r * r * r,
            Bound::Unbounded,
            Bound::Unbounded,
        )
        .unwrap();
        let r = f.invert(2.0, 1e-10).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn invert_negative_target_on_extended_domain() {
        let f = ComparisonFunction::cubic();
        let r = f.invert(-8.0, 1e-10).unwrap();
        assert_relative_eq!(r, -2.0, epsilon = 1e-9);
    }

    #[test]
    fn invert_outside_range_is_an_error() {
        let f = ComparisonFunction::class_k(|r| r * r, Bound::Finite(2.0)).unwrap();
        assert!(matches!(f.invert(10.0, 1e-10), Err(Error::Range(_))));

        let th =
            ComparisonFunction::extended(|r: f64| r.tanh(), Bound::Unbounded, Bound::Unbounded)
                .unwrap();
        assert!(matches!(th.invert(2.0, 1e-10), Err(Error::Range(_))));

        let q = ComparisonFunction::quarter_square();
        assert!(matches!(q.invert(-1.0, 1e-10), Err(Error::Range(_))));
    }

    #[test]
    fn invert_requires_positive_tolerance() {
        let f = ComparisonFunction::identity();
        assert!(matches!(f.invert(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_linear_alpha_quarter_square() {
        let alpha = ComparisonFunction::linear(1.0).unwrap();
        let gamma = gamma_from(&alpha, &ComparisonFunction::quarter_square()).unwrap();
        assert_relative_eq!(gamma.eval(1.0), 0.25, epsilon = 1e-10);
        assert_eq!(gamma.eval(0.0), 0.0);
    }

    #[test]
    fn gamma_identity_identity() {
        let alpha = ComparisonFunction::identity();
        let iota = ComparisonFunction::class_k_inf(|s| s);
        let gamma = gamma_from(&alpha, &iota).unwrap();
        for s in [0.0, 0.1, 0.7, 2.0, 5.0] {
            assert_relative_eq!(gamma.eval(s), s, epsilon = 1e-9);
        }
    }

    #[test]
    fn gamma_solves_two_gamma_equals_four() {
        let alpha = ComparisonFunction::linear(2.0).unwrap();
        let iota = ComparisonFunction::scaled_square(1.0).unwrap();
        let gamma = gamma_from(&alpha, &iota).unwrap();
        // Bisection against the closed form s^2 / 2.
        assert_relative_eq!(gamma.eval(2.0), 2.0, epsilon = 1e-8);
    }

    #[test]
    fn gamma_rejects_disturbances_alpha_cannot_absorb() {
        // alpha = identity on (-2, inf): beta range is [0, 2), so
        // iota(s) = s^2/4 caps the admissible bound at sqrt(8).
        let alpha =
            ComparisonFunction::extended(|r| r, Bound::Finite(-2.0), Bound::Unbounded).unwrap();
        let gamma = gamma_from(&alpha, &ComparisonFunction::quarter_square()).unwrap();
        assert!(gamma.eval_checked(1.0).is_ok());
        assert!(gamma.eval_checked(3.0).is_err());
        match gamma.hi() {
            Bound::Finite(a) => assert_relative_eq!(a, 8.0_f64.sqrt(), epsilon = 1e-8),
            Bound::Unbounded => panic!("gamma domain should be capped"),
        }
    }

    #[test]
    fn max_disturbance_quarter_square() {
        let alpha =
            ComparisonFunction::extended(|r| r, Bound::Finite(-2.0), Bound::Unbounded).unwrap();
        let dstar =
            max_disturbance(&alpha, &ComparisonFunction::quarter_square(), 2.0, 1e-8).unwrap();
        assert_relative_eq!(dstar, 8.0_f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn max_disturbance_unbounded_case() {
        let alpha = ComparisonFunction::identity();
        let dstar = max_disturbance(
            &alpha,
            &ComparisonFunction::quarter_square(),
            f64::INFINITY,
            1e-8,
        )
        .unwrap();
        assert_eq!(dstar, f64::INFINITY);
    }

    #[test]
    fn max_disturbance_identity_slack() {
        let alpha = ComparisonFunction::identity();
        let iota = ComparisonFunction::class_k_inf(|s| s);
        let dstar = max_disturbance(&alpha, &iota, 1.0, 1e-8).unwrap();
        assert_relative_eq!(dstar, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn max_disturbance_rejects_nonpositive_b() {
        let alpha = ComparisonFunction::identity();
        let iota = ComparisonFunction::quarter_square();
        assert!(matches!(
            max_disturbance(&alpha, &iota, 0.0, 1e-8),
            Err(Error::Domain(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn alpha_family() -> impl Strategy<Value = (ComparisonFunction, &'static str)> {
            prop_oneof![
                (0.1_f64..10.0).prop_map(|lam| {
                    (ComparisonFunction::linear(lam).unwrap(), "linear")
                }),
                Just((ComparisonFunction::cubic(), "cubic")),
                Just((
                    ComparisonFunction::extended(
                        |r: f64| r.exp_m1(),
                        Bound::Finite(-50.0),
                        Bound::Finite(50.0),
                    )
                    .unwrap(),
                    "expm1"
                )),
                Just((
                    ComparisonFunction::extended(
                        |r: f64| r.atan(),
                        Bound::Unbounded,
                        Bound::Unbounded,
                    )
                    .unwrap(),
                    "atan"
                )),
            ]
        }

        proptest! {
            #[test]
            fn beta_of_valid_alpha_is_valid_class_k((alpha, _name) in alpha_family()) {
                let beta = beta_of(&alpha).unwrap();
                let report = beta.validate(200).unwrap();
                prop_assert!(report.is_valid(), "{report}");
            }

            #[test]
            fn invert_round_trips((alpha, _name) in alpha_family(), y in 0.01_f64..1.45) {
                // 1.45 keeps y inside the range of every family member
                // (atan saturates at pi/2).
                let r = alpha.invert(y, 1e-10).unwrap();
                prop_assert!((alpha.eval(r) - y).abs() <= 1e-10);
            }

            #[test]
            fn gamma_is_zero_at_zero_and_increasing(lam in 0.2_f64..5.0) {
                let alpha = ComparisonFunction::linear(lam).unwrap();
                let gamma = gamma_from(&alpha, &ComparisonFunction::quarter_square()).unwrap();
                prop_assert_eq!(gamma.eval(0.0), 0.0);
                let mut prev = 0.0;
                for i in 1..=100 {
                    let s = 3.0 * i as f64 / 100.0;
                    let v = gamma.eval(s);
                    prop_assert!(v > prev, "gamma({s}) = {v} <= {prev}");
                    prev = v;
                }
            }

            #[test]
            fn gamma_linear_matches_scaled_slack(lam in 0.2_f64..5.0, s in 0.0_f64..3.0) {
                let alpha = ComparisonFunction::linear(lam).unwrap();
                let iota = ComparisonFunction::quarter_square();
                let gamma = gamma_from(&alpha, &iota).unwrap();
                let expected = iota.eval(s) / lam;
                prop_assert!((gamma.eval(s) - expected).abs() <= 1e-8);
            }
        }
    }
}
