//! Safety-critical control with disturbance margins.
//!
//! The crate provides the pieces needed to certify and enforce forward
//! invariance of a safe set `C = {x : h(x) >= 0}` for control-affine systems
//! whose input channel is corrupted by a bounded disturbance:
//!
//! - [`classk`]: comparison functions (class K, class K-infinity, extended
//!   class K) with validation, numeric inversion, and the disturbance-margin
//!   map `gamma = beta^{ -1} o iota` built from them.
//! - [`system`]: control-affine dynamics, disturbance signals, output maps
//!   with Lie-derivative evaluators, and the 2-DOF robot model.
//! - [`barrier`]: barrier-certificate residuals, the enlarged set `C_d`, and
//!   linear constraint rows for quadratic-program controllers.
//! - [`controllers`]: closed-form safeguarding feedback, the universal
//!   input-to-state safeguarding formula, and the min-norm controller.
//! - [`qpsolve`]: an exact active-set-enumeration solver for the small dense
//!   strictly convex QPs that the controllers produce pointwise.
//! - [`sim`]: fixed-step RK4 closed-loop integration with
//!   controller-in-the-loop, trajectory recording, and invariance checks.
//! - [`bench`]: experiment harness and configuration for the three example
//!   systems, with CSV/SVG/summary emission and certificate checking.

pub mod barrier;
pub mod bench;
pub mod classk;
pub mod controllers;
pub mod error;
pub mod qpsolve;
pub mod sim;
pub mod system;

pub use error::Error;
