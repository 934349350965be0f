//! Metric temporal logic with counting modalities, Q2MLO(+1) and bounded
//! FO(<,+1) over exact dense-time signals.
//!
//! The crate evaluates all three logics over finite-variability signals,
//! normalizes bounded first-order formulas into ordered-witness simplified
//! forms, and translates simplified forms into equivalent Q2MLO(+1)
//! formulas. A brute-force first-order [`oracle`] is the ground truth that the
//! [`harness`] checks every construction against.

pub mod cli;
pub mod harness;
pub mod mtlc;
pub mod normalize;
pub mod oracle;
pub mod signal;
pub mod syntax;
pub mod translate;
