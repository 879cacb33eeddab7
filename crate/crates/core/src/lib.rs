//! Low-light enhancement, classical pedestrian detection, and a benchmark
//! harness for measuring per-technique throughput and detection timeliness on
//! annotated dash-cam-style frame sequences.
//!
//! Module map:
//! - [`frameio`]: frames, PGM/PPM I/O, sequences, annotation rendering
//! - [`enhance`]: gamma, histogram equalization, CLAHE, binary threshold
//! - [`motionedge`]: Canny edges, Harris corners, GMM background subtraction
//! - [`segment`]: adaptive binarization, component labeling, candidate filter
//! - [`detect`]: HOG descriptor, linear SVM, sliding-window detector, NMS
//! - [`bench`]: throughput timing, first-detection evaluation, reports

pub mod bench;
pub mod detect;
pub mod enhance;
mod error;
pub mod frameio;
pub mod motionedge;
pub mod segment;

pub use error::{Error, Result};
