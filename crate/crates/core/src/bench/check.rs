//! Certificate sampling for the `check` CLI subcommand.

use nalgebra::DVector;
use rand::SeedableRng;

use crate::barrier::{check_bf_certificate, check_cbf_feasibility, check_issf_bf_certificate};
use crate::error::Error;
use crate::system::lie1;

use super::config::{ExampleId, ExperimentConfig};
use super::examples::{arctan_example, robot_example, scalar_example};

/// Text reports from a certificate-checking pass plus the violation count.
#[derive(Debug)]
pub struct CheckOutput {
    pub reports: Vec<String>,
    pub violations: usize,
}

impl CheckOutput {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Validates the example's comparison functions and samples its certificate
/// conditions over the example's check region.
pub fn check_example(cfg: &ExperimentConfig) -> Result<CheckOutput, Error> {
    let mut reports = Vec::new();
    let mut violations = 0usize;

    let mut note_validation = |name: &str, report: crate::classk::ValidationReport| {
        if !report.is_valid() {
            violations += report.violations.len();
        }
        reports.push(format!("{name}: {report}"));
    };

    match cfg.example {
        ExampleId::Scalar => {
            let ex = scalar_example(cfg.lambda)?;
            note_validation("alpha (linear decay)", ex.spec.alpha.validate(1000)?);
            note_validation("iota (quarter square)", ex.iota.validate(1000)?);
            note_validation("gamma (margin map)", ex.gamma.validate(200)?);

            let region = ex.check_region();
            let k = |x: &DVector<f64>| DVector::from_vec(vec![-x[0] * x[0]]);
            let bf = check_bf_certificate(&ex.spec, &ex.sys, k, &region, cfg.samples, cfg.seed)?;
            if !bf.passed() {
                violations += bf.violations;
            }
            reports.push(bf.to_string());

            let dbar = cfg.d_values.iter().copied().fold(0.0, f64::max).max(1.0);
            let issf = check_issf_bf_certificate(
                &ex.spec,
                &ex.sys,
                k,
                &ex.iota,
                dbar,
                &region,
                cfg.samples,
                cfg.seed,
            )?;
            if !issf.passed() {
                violations += issf.violations;
            }
            reports.push(issf.to_string());
        }
        ExampleId::Arctan => {
            let ex = arctan_example()?;
            note_validation("alpha (barrier decay in h)", ex.spec.alpha.validate(1000)?);

            let region = ex.check_region();
            let feas = check_cbf_feasibility(&ex.spec, &ex.sys, &region, cfg.samples, cfg.seed)?;
            if !feas.passed() {
                violations += feas.violations;
            }
            reports.push(feas.to_string());

            // The binding state L_g h = 0 sits exactly at x = 0; check it
            // directly since random sampling never lands there.
            let x0 = DVector::zeros(1);
            let (lf, _) = lie1(&ex.sys, &ex.spec.h, &x0)?;
            let a = lf + ex.spec.alpha.eval_checked(ex.spec.h_val(&x0))?;
            if a < 0.0 {
                violations += 1;
            }
            reports.push(format!(
                "feasibility at the binding state x = 0: A = {a:.6e} -> {}",
                if a >= 0.0 { "PASS" } else { "FAIL" }
            ));
        }
        ExampleId::Robot2dof => {
            let ex = robot_example(&cfg.robot)?;
            let region = ex.check_region();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut max_lg = 0.0_f64;
            let mut min_lglf = f64::INFINITY;
            for _ in 0..cfg.samples {
                let x = region.sample(&mut rng);
                let (_, lg) = lie1(&ex.sys, &ex.spec.h, &x)?;
                max_lg = max_lg.max(lg.norm());
                min_lglf = min_lglf.min(ex.spec.h.lglf(&x)?.norm());
            }
            let degree_ok = max_lg == 0.0;
            let actuated = min_lglf > 0.0;
            if !degree_ok || !actuated {
                violations += 1;
            }
            reports.push(format!(
                "relative degree two: max |L_g h| = {max_lg:.3e} (want 0), \
                 min |L_g L_f h| = {min_lglf:.3e} (want > 0) -> {}",
                if degree_ok && actuated { "PASS" } else { "FAIL" }
            ));
        }
    }

    Ok(CheckOutput {
        reports,
        violations,
    })
}
