//! Experiment harness: example systems, configuration, runners, and output.
//!
//! Three benchmark closed loops are wired here:
//!
//! - `scalar`: `xdot = -x + x^2 u` with `h = 2 - x` and closed-form
//!   safeguarding controllers.
//! - `arctan`: `xdot = -atan(x) + u` with CLF `V = x atan x`, CBF
//!   `h = 4 - x^2`, and the unified QP controller.
//! - `robot2dof`: the planar robot with `h = r* - r` (relative degree two)
//!   under the exponential-barrier QP row.
//!
//! Runs are organized as a cartesian grid over disturbance amplitude,
//! epsilon, and initial state; each cell simulates independently and failures
//! are recorded per cell rather than aborting the grid.

mod check;
mod config;
mod emit;
mod examples;
mod run;

pub use check::{check_example, CheckOutput};
pub use config::{ControllerId, DisturbanceKind, ExampleId, ExperimentConfig, RobotParams};
pub use emit::{trace_filename, write_summary, write_svg, write_trace_csv, SvgSeries};
pub use examples::{
    arctan_alpha, arctan_example, robot_example, scalar_example, ArctanExample, RobotExample,
    ScalarExample,
};
pub use run::{run, run_example1, run_example2, run_example3, sweep, Artifacts, RunArtifact, RunStatus};
