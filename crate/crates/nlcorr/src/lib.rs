//! Two-particle correlation experiments under mean-field nonlinear
//! Schrodinger dynamics: the detection-time-parameterized (open-system)
//! evolution, the textbook projection-at-a-distance algorithm, and its
//! initial-condition-based generalization, with tooling to compare their
//! locality properties numerically.

pub mod checks;
pub mod dynamics;
pub mod error;
pub mod hamfun;
pub mod measure;
pub mod presets;
pub mod qstate;
pub mod scenario;

pub use error::{Error, Result};
