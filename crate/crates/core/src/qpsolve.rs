//! Exact solver for small dense strictly convex quadratic programs.
//!
//! Minimizes `1/2 z^T H z + F^T z` over `z = (u, delta)` subject to a handful
//! of affine inequality rows. With at most 8 rows the global optimum is found
//! by exhaustive active-set enumeration: for every subset of rows the
//! equality-constrained KKT system is solved directly, and candidates are
//! kept only when primal-feasible with nonnegative multipliers. This is
//! deterministic and exact to linear-solver precision, which the
//! per-control-step use here cares about more than asymptotic speed.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::barrier::ConstraintRow;
use crate::error::Error;

/// Feasibility slack tolerance when accepting an enumeration candidate.
const FEAS_TOL: f64 = 1e-9;

/// Multipliers may dip this far below zero before a subset is rejected.
const MULT_TOL: f64 = 1e-10;

/// Pivot threshold below which active-constraint gradients count as
/// rank-deficient and the subset is skipped.
const RANK_TOL: f64 = 1e-12;

/// Max rows accepted by [`solve`].
pub const MAX_ROWS: usize = 8;

/// One quadratic program over the decision vector `z = (u, delta)`.
#[derive(Clone, Debug)]
pub struct QpInstance {
    /// Symmetric positive definite cost matrix, `(m+1) x (m+1)`.
    pub h: DMatrix<f64>,
    /// Linear cost term, length `m+1`.
    pub f: DVector<f64>,
    pub rows: Vec<ConstraintRow>,
}

impl QpInstance {
    pub fn new(h: DMatrix<f64>, f: DVector<f64>, rows: Vec<ConstraintRow>) -> Self {
        Self { h, f, rows }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `1/2 z^T H z + F^T z`.
    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * (&self.h * z).dot(z) + self.f.dot(z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

impl fmt::Display for QpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QpStatus::Optimal => write!(f, "optimal"),
            QpStatus::Infeasible => write!(f, "infeasible"),
        }
    }
}

/// Solver output. For `Infeasible` the point `z` minimizes the worst
/// violation instead of the objective.
#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub status: QpStatus,
    /// Indices of rows active at the optimum, ascending.
    pub active: Vec<usize>,
    /// One multiplier per active row, in `active` order.
    pub multipliers: Vec<f64>,
    pub objective: f64,
}

/// Max KKT residual per condition, as recomputed by [`verify_kkt`].
#[derive(Clone, Copy, Debug)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

struct Candidate {
    z: DVector<f64>,
    objective: f64,
    active: Vec<usize>,
    multipliers: Vec<f64>,
}

/// Enumerates active sets for `min 1/2 z^T H z + F^T z` s.t. `a_i . z >= b_i`.
/// Returns the best feasible KKT candidate, or `None` if no subset yields one.
fn solve_ge(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    rows: &[(DVector<f64>, f64)],
) -> Result<Option<Candidate>, Error> {
    let nz = h.nrows();
    let nrows = rows.len();
    let mut best: Option<Candidate> = None;

    'subsets: for mask in 0u32..(1 << nrows) {
        let active: Vec<usize> = (0..nrows).filter(|i| mask & (1 << i) != 0).collect();
        let s = active.len();
        if s > nz {
            continue; // more than nz active gradients are always dependent
        }

        let (z, multipliers) = if s == 0 {
            let chol = match h.clone().cholesky() {
                Some(c) => c,
                None => return Err(Error::Domain("H is not positive definite".into())),
            };
            (chol.solve(&(-f)), Vec::new())
        } else {
            let mut a_s = DMatrix::zeros(s, nz);
            let mut b_s = DVector::zeros(s);
            for (row_idx, &i) in active.iter().enumerate() {
                a_s.row_mut(row_idx).copy_from(&rows[i].0.transpose());
                b_s[row_idx] = rows[i].1;
            }
            // Skip subsets whose gradients are rank-deficient; a smaller
            // subset reaches the same face.
            let svals = a_s.clone().svd(false, false).singular_values;
            let smax = svals.max();
            if smax <= 0.0 || svals.min() <= RANK_TOL * smax.max(1.0) {
                continue;
            }

            let dim = nz + s;
            let mut kkt = DMatrix::zeros(dim, dim);
            kkt.view_mut((0, 0), (nz, nz)).copy_from(h);
            kkt.view_mut((0, nz), (nz, s)).copy_from(&(-a_s.transpose()));
            kkt.view_mut((nz, 0), (s, nz)).copy_from(&a_s);
            let mut rhs = DVector::zeros(dim);
            rhs.rows_mut(0, nz).copy_from(&(-f));
            rhs.rows_mut(nz, s).copy_from(&b_s);

            let sol = match kkt.full_piv_lu().solve(&rhs) {
                Some(sol) => sol,
                None => continue,
            };
            if sol.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let z = sol.rows(0, nz).into_owned();
            let lambda: Vec<f64> = sol.rows(nz, s).iter().copied().collect();
            if lambda.iter().any(|&l| l < -MULT_TOL) {
                continue;
            }
            (z, lambda)
        };

        for (a, b) in rows {
            if a.dot(&z) - b < -FEAS_TOL {
                continue 'subsets;
            }
        }

        let objective = 0.5 * (h * &z).dot(&z) + f.dot(&z);
        let better = match &best {
            None => true,
            Some(c) => objective < c.objective,
        };
        if better {
            best = Some(Candidate {
                z,
                objective,
                active,
                multipliers,
            });
        }
    }
    Ok(best)
}

/// Global minimum by active-set enumeration.
///
/// If no subset produces a feasible KKT point, a feasibility probe
/// (minimizing the worst violation `t` over `(z, t)`) decides between a
/// genuinely infeasible instance and a numeric failure.
pub fn solve(qp: &QpInstance) -> Result<QpSolution, Error> {
    let nz = qp.dim();
    if qp.h.ncols() != nz {
        return Err(Error::Shape(format!(
            "cost matrix is {}x{}",
            qp.h.nrows(),
            qp.h.ncols()
        )));
    }
    if qp.f.len() != nz {
        return Err(Error::Shape(format!(
            "linear cost has length {}, expected {}",
            qp.f.len(),
            nz
        )));
    }
    let sym_err = (&qp.h - qp.h.transpose()).abs().max();
    if sym_err > 1e-9 * qp.h.abs().max().max(1.0) {
        return Err(Error::Domain(format!(
            "cost matrix is not symmetric (skew part {sym_err:.3e})"
        )));
    }
    if qp.h.clone().cholesky().is_none() {
        return Err(Error::Domain("H is not positive definite".into()));
    }
    if qp.rows.len() > MAX_ROWS {
        return Err(Error::Usage(format!(
            "{} constraint rows exceed the solver limit of {MAX_ROWS}",
            qp.rows.len()
        )));
    }
    let mut rows_ge = Vec::with_capacity(qp.rows.len());
    for (i, row) in qp.rows.iter().enumerate() {
        if row.a_u.len() + 1 != nz {
            return Err(Error::Shape(format!(
                "row {i} has {} input coefficients, expected {}",
                row.a_u.len(),
                nz - 1
            )));
        }
        rows_ge.push(row.as_ge());
    }

    if let Some(c) = solve_ge(&qp.h, &qp.f, &rows_ge)? {
        return Ok(QpSolution {
            z: c.z,
            status: QpStatus::Optimal,
            active: c.active,
            multipliers: c.multipliers,
            objective: c.objective,
        });
    }

    // Probe: min (eps/2)|z|^2 + 1/2 t^2  s.t.  a_i . z + t >= b_i.
    let mut h_aux = DMatrix::zeros(nz + 1, nz + 1);
    for i in 0..nz {
        h_aux[(i, i)] = 1e-6;
    }
    h_aux[(nz, nz)] = 1.0;
    let f_aux = DVector::zeros(nz + 1);
    let rows_aux: Vec<(DVector<f64>, f64)> = rows_ge
        .iter()
        .map(|(a, b)| {
            let mut a2 = DVector::zeros(nz + 1);
            a2.rows_mut(0, nz).copy_from(a);
            a2[nz] = 1.0;
            (a2, *b)
        })
        .collect();
    let probe = solve_ge(&h_aux, &f_aux, &rows_aux)?.ok_or_else(|| {
        Error::Numerics("feasibility probe failed to produce a candidate".into())
    })?;
    let worst_violation = probe.z[nz];
    if worst_violation > 1e-7 {
        Ok(QpSolution {
            z: probe.z.rows(0, nz).into_owned(),
            status: QpStatus::Infeasible,
            active: Vec::new(),
            multipliers: Vec::new(),
            objective: f64::NAN,
        })
    } else {
        Err(Error::Numerics(format!(
            "active-set enumeration found no candidate although the probe reports \
             worst violation {worst_violation:.3e}"
        )))
    }
}

/// Recomputes all KKT residuals of an optimal solution.
pub fn verify_kkt(qp: &QpInstance, sol: &QpSolution, _tol: f64) -> Result<KktReport, Error> {
    if sol.status != QpStatus::Optimal {
        return Err(Error::Usage("KKT verification needs an optimal solution".into()));
    }
    if sol.active.len() != sol.multipliers.len() {
        return Err(Error::Shape(format!(
            "{} active rows but {} multipliers",
            sol.active.len(),
            sol.multipliers.len()
        )));
    }
    let rows_ge: Vec<(DVector<f64>, f64)> = qp.rows.iter().map(|r| r.as_ge()).collect();

    let mut stat = &qp.h * &sol.z + &qp.f;
    for (&i, &lam) in sol.active.iter().zip(&sol.multipliers) {
        stat -= &rows_ge[i].0 * lam;
    }
    let stationarity = stat.abs().max();

    let mut primal = 0.0_f64;
    for (a, b) in &rows_ge {
        primal = primal.max(b - a.dot(&sol.z));
    }
    primal = primal.max(0.0);

    let dual = sol
        .multipliers
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(-l))
        .max(0.0);

    let mut complementarity = 0.0_f64;
    for (&i, &lam) in sol.active.iter().zip(&sol.multipliers) {
        let slack = rows_ge[i].0.dot(&sol.z) - rows_ge[i].1;
        complementarity = complementarity.max((lam * slack).abs());
    }

    Ok(KktReport {
        stationarity,
        primal,
        dual,
        complementarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity_qp(rows: Vec<ConstraintRow>) -> QpInstance {
        QpInstance::new(DMatrix::identity(2, 2), DVector::zeros(2), rows)
    }

    #[test]
    fn unconstrained_minimum_is_zero() {
        let sol = solve(&identity_qp(vec![])).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.z, DVector::zeros(2));
        assert!(sol.active.is_empty());
    }

    #[test]
    fn scalar_active_bound() {
        // min 1/2 z^2 s.t. z >= 1 (decision (u, delta) with the bound on u).
        let qp = QpInstance::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            vec![ConstraintRow::ge(DVector::from_vec(vec![1.0]), 0.0, 1.0)],
        );
        let sol = solve(&qp).unwrap();
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.z[1], 0.0, epsilon = 1e-12);
        assert_eq!(sol.active, vec![0]);
        assert_relative_eq!(sol.multipliers[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_onto_half_space() {
        // min 1/2 |z|^2 s.t. z1 + z2 >= 2; projection of the origin is (1, 1).
        let qp = identity_qp(vec![ConstraintRow::ge(
            DVector::from_vec(vec![1.0]),
            1.0,
            2.0,
        )]);
        let sol = solve(&qp).unwrap();
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.z[1], 1.0, epsilon = 1e-12);

        // Cross-check against a coarse feasible grid.
        let mut best = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let z = DVector::from_vec(vec![
                    -3.0 + 6.0 * i as f64 / 199.0,
                    -3.0 + 6.0 * j as f64 / 199.0,
                ]);
                if z[0] + z[1] >= 2.0 {
                    best = best.min(qp.objective(&z));
                }
            }
        }
        assert!(sol.objective <= best + 1e-6);
    }

    #[test]
    fn le_rows_are_honored() {
        let qp = QpInstance::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-2.0, 0.0]),
            vec![ConstraintRow::le(DVector::from_vec(vec![1.0]), 0.0, 1.0)],
        );
        let sol = solve(&qp).unwrap();
        // Unconstrained minimum u = 2 is clipped to the bound u <= 1.
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_rows_are_reported_not_patched() {
        let qp = QpInstance::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            vec![
                ConstraintRow::ge(DVector::from_vec(vec![1.0]), 0.0, 1.0),
                ConstraintRow::le(DVector::from_vec(vec![1.0]), 0.0, -1.0),
            ],
        );
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert!(sol.objective.is_nan());
    }

    #[test]
    fn duplicate_rows_fall_back_to_smaller_subsets() {
        let row = ConstraintRow::ge(DVector::from_vec(vec![1.0]), 1.0, 2.0);
        let qp = identity_qp(vec![row.clone(), row]);
        let sol = solve(&qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_relative_eq!(sol.z[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.z[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_bitwise_output() {
        let qp = QpInstance::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            DVector::from_vec(vec![0.1, -0.7]),
            vec![
                ConstraintRow::ge(DVector::from_vec(vec![1.0]), 0.2, 0.5),
                ConstraintRow::le(DVector::from_vec(vec![-0.4]), 1.0, 2.0),
            ],
        );
        let s1 = solve(&qp).unwrap();
        let s2 = solve(&qp).unwrap();
        assert_eq!(s1.z[0].to_bits(), s2.z[0].to_bits());
        assert_eq!(s1.z[1].to_bits(), s2.z[1].to_bits());
        assert_eq!(s1.active, s2.active);
    }

    #[test]
    fn rejects_indefinite_cost() {
        let qp = QpInstance::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            DVector::zeros(2),
            vec![],
        );
        assert!(matches!(solve(&qp), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_too_many_rows() {
        let row = ConstraintRow::ge(DVector::from_vec(vec![1.0]), 0.0, 0.0);
        let qp = identity_qp(vec![row; 9]);
        assert!(matches!(solve(&qp), Err(Error::Usage(_))));
    }

    #[test]
    fn kkt_residuals_small_at_optimum() {
        let qp = QpInstance::new(
            DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.0]),
            DVector::from_vec(vec![1.0, -1.0]),
            vec![
                ConstraintRow::ge(DVector::from_vec(vec![1.0]), 0.5, 1.0),
                ConstraintRow::le(DVector::from_vec(vec![0.3]), -1.0, 0.4),
            ],
        );
        let sol = solve(&qp).unwrap();
        let report = verify_kkt(&qp, &sol, 1e-8).unwrap();
        assert!(report.within(1e-8), "{report:?}");
    }

    #[test]
    fn kkt_flags_perturbed_solution() {
        let qp = QpInstance::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            vec![ConstraintRow::ge(DVector::from_vec(vec![1.0]), 1.0, 2.0)],
        );
        let sol = solve(&qp).unwrap();
        let mut bad = sol.clone();
        bad.z[0] += 1e-3;
        let report = verify_kkt(&qp, &bad, 1e-8).unwrap();
        assert!(report.stationarity > 1e-4, "{report:?}");
    }

    #[test]
    fn kkt_flags_negative_multiplier() {
        let qp = QpInstance::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            vec![ConstraintRow::ge(DVector::from_vec(vec![1.0]), 1.0, 2.0)],
        );
        let sol = solve(&qp).unwrap();
        let mut bad = sol.clone();
        bad.multipliers[0] = -1.0;
        let report = verify_kkt(&qp, &bad, 1e-8).unwrap();
        assert!(report.dual >= 1.0, "{report:?}");
    }

    #[test]
    fn verify_kkt_requires_optimal_status() {
        let qp = identity_qp(vec![]);
        let mut sol = solve(&qp).unwrap();
        sol.status = QpStatus::Infeasible;
        assert!(matches!(verify_kkt(&qp, &sol, 1e-8), Err(Error::Usage(_))));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn random_instance(
            nz: usize,
            m_entries: Vec<f64>,
            f_entries: Vec<f64>,
            row_data: Vec<(Vec<f64>, f64, bool)>,
        ) -> QpInstance {
            let m = DMatrix::from_vec(nz, nz, m_entries);
            let h = &m.transpose() * &m + DMatrix::identity(nz, nz);
            let rows = row_data
                .into_iter()
                .map(|(a, rhs, ge)| {
                    let a_u = DVector::from_vec(a[..nz - 1].to_vec());
                    let a_delta = a[nz - 1];
                    if ge {
                        ConstraintRow::ge(a_u, a_delta, rhs)
                    } else {
                        ConstraintRow::le(a_u, a_delta, rhs)
                    }
                })
                .collect();
            QpInstance::new(h, DVector::from_vec(f_entries), rows)
        }

        proptest! {
            #[test]
            fn optimum_dominates_feasible_probes(
                m_entries in proptest::collection::vec(-1.0_f64..1.0, 9),
                f_entries in proptest::collection::vec(-2.0_f64..2.0, 3),
                row_data in proptest::collection::vec(
                    (proptest::collection::vec(-1.0_f64..1.0, 3), -1.0_f64..1.0, proptest::bool::ANY),
                    0..=3
                ),
                probes in proptest::collection::vec(proptest::collection::vec(-4.0_f64..4.0, 3), 20),
            ) {
                let qp = random_instance(3, m_entries, f_entries, row_data);
                let sol = solve(&qp).unwrap();
                if sol.status == QpStatus::Optimal {
                    let report = verify_kkt(&qp, &sol, 1e-8).unwrap();
                    prop_assert!(report.within(1e-8), "{report:?}");
                    for p in probes {
                        let z = DVector::from_vec(p);
                        let feasible = qp.rows.iter().all(|r| {
                            let u = z.rows(0, 2).into_owned();
                            r.slack(&u, z[2]) >= 0.0
                        });
                        if feasible {
                            prop_assert!(qp.objective(&z) >= sol.objective - 1e-9);
                        }
                    }
                }
            }
        }
    }
}
