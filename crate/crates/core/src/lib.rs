//! Synthesis of neural certificates and feedback controllers for
//! continuous-time nonlinear dynamical models.
//!
//! The crate implements a counterexample-guided inductive synthesis (CEGIS)
//! loop: a gradient-based [`learner`] proposes certificate (and controller)
//! networks, the [`verifier`] either certifies the candidate over compact
//! sets by interval branch-and-bound or produces a witness point, and the
//! [`consolidator`] turns that witness into informative training data for
//! the next round. Seven property kinds are supported, from plain Lyapunov
//! stability to reach-avoid-remain specifications; see [`certificate`].
//!
//! Numerical trajectory simulation ([`simulate`]) provides an independent
//! empirical check of every synthesised certificate.

pub mod cegis;
pub mod certificate;
pub mod consolidator;
pub mod expr;
pub mod geometry;
pub mod learner;
pub mod network;
pub mod simulate;
pub mod verifier;

pub use cegis::{synthesize, CegisConfig, NetworkShape, SynthesisOutcome, SynthesisResult};
pub use certificate::{PropertyKind, PropertyProblem};
pub use expr::{parse, Expr, Interval, VectorField};
pub use geometry::Region;
pub use network::{Activation, Network};
pub use verifier::VerdictOrCex;
