//! Trace-driven data-race detection for GPU kernels.
//!
//! Traces of kernel events are checked by three detectors: a predictive
//! GWCP detector, a scoped happens-before detector, and a scoped lockset
//! baseline. A brute-force search over correct reorderings serves as ground
//! truth on small traces.

pub mod analysis;
pub mod detect;
pub mod oracle;
pub mod report;
pub mod sync;
pub mod trace;
pub mod vclock;
pub mod workloads;

pub use analysis::{compare, prepare_trace, Comparison, Prepared};
pub use detect::{compression_stats, detect, order_matrix, Options};
pub use report::{DetectorKind, RaceReport};
