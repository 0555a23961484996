//! Closed-form safeguarding controllers.
//!
//! All three controllers are built from the same two quantities at a state:
//! `A = L_f h + alpha(h)` and `B = (L_g h)^T`. The feedback `k + B` trades
//! control effort for a disturbance margin; the universal formula blends
//! that margin in smoothly; the min-norm controller spends the least effort
//! that keeps the plain barrier inequality satisfied.

use nalgebra::DVector;

use crate::barrier::SafeSetSpec;
use crate::error::Error;
use crate::system::{lie1, ControlAffineSystem};

/// The scalar `A(x) = L_f h(x) + alpha(h(x))` and vector `B(x) = L_g h(x)^T`
/// every safeguarding formula is assembled from.
#[derive(Clone, Debug)]
pub struct UniversalTerms {
    pub a: f64,
    pub b: DVector<f64>,
}

impl UniversalTerms {
    /// `|B|` is treated as zero below this threshold (scaled by state size).
    pub fn b_is_zero(&self, x: &DVector<f64>) -> bool {
        self.b.norm() <= 1e-12 * x.norm().max(1.0)
    }
}

/// Evaluates `A` and `B` at `x`.
pub fn universal_terms(
    spec: &SafeSetSpec,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
) -> Result<UniversalTerms, Error> {
    let h = spec.h_val(x);
    if !spec.in_domain(x) {
        return Err(Error::Domain(format!(
            "state outside the certificate domain (h = {h})"
        )));
    }
    let (lf, lg) = lie1(sys, &spec.h, x)?;
    Ok(UniversalTerms {
        a: lf + spec.alpha.eval_checked(h)?,
        b: lg,
    })
}

/// Input-to-state safeguarding feedback `u(x) = k(x) + L_g h(x)^T`.
pub fn issf_feedback<K>(
    k: K,
    spec: &SafeSetSpec,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
) -> Result<DVector<f64>, Error>
where
    K: Fn(&DVector<f64>) -> DVector<f64>,
{
    let (_, lg) = lie1(sys, &spec.h, x)?;
    let base = k(x);
    if base.len() != sys.m() {
        return Err(Error::Shape(format!(
            "feedback returned length {}, expected {}",
            base.len(),
            sys.m()
        )));
    }
    Ok(base + lg)
}

/// Universal input-to-state safeguarding formula:
///
/// `u = 0` when `B = 0`, otherwise
/// `u = ((-A + sqrt(A^2 + |B|^4)) / (B^T B)) B + B`.
///
/// The resulting margin residual
/// `L_f h + L_g h . u - |L_g h|^2 + alpha(h)` equals
/// `sqrt(A^2 + |B|^4)` identically.
pub fn universal_issf(
    spec: &SafeSetSpec,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
) -> Result<DVector<f64>, Error> {
    let terms = universal_terms(spec, sys, x)?;
    universal_from_terms(&terms, x)
}

/// The universal formula applied to precomputed terms.
pub fn universal_from_terms(
    terms: &UniversalTerms,
    x: &DVector<f64>,
) -> Result<DVector<f64>, Error> {
    if terms.b_is_zero(x) {
        if terms.a < 0.0 {
            return Err(Error::Certificate(format!(
                "B = 0 with A = {} < 0: h is not a control barrier function at this state",
                terms.a
            )));
        }
        return Ok(DVector::zeros(terms.b.len()));
    }
    let btb = terms.b.norm_squared();
    let root = (terms.a * terms.a + btb * btb).sqrt();
    let gain = (-terms.a + root) / btb;
    Ok(&terms.b * gain + &terms.b)
}

/// Minimum-norm input satisfying `L_f h + L_g h . u >= -alpha(h)`:
/// zero when the constraint is slack (`A >= 0`), otherwise the KKT point
/// `(-A / |B|^2) B`.
pub fn min_norm_safeguarding(
    spec: &SafeSetSpec,
    sys: &ControlAffineSystem,
    x: &DVector<f64>,
) -> Result<DVector<f64>, Error> {
    let terms = universal_terms(spec, sys, x)?;
    if terms.a >= 0.0 {
        return Ok(DVector::zeros(terms.b.len()));
    }
    if terms.b_is_zero(x) {
        return Err(Error::Infeasible(format!(
            "B = 0 with A = {} < 0: no input can satisfy the barrier inequality here",
            terms.a
        )));
    }
    let scale = -terms.a / terms.b.norm_squared();
    Ok(&terms.b * scale)
}
