//! Deterministic desk-scale simulator for adversarial machine learning
//! attacks on spacecraft flight software.
//!
//! The pieces:
//!
//! * [`bus`]: tick-driven publish/subscribe software bus with interceptor
//!   chains,
//! * [`ingest`]: telemetry CSV and PGM frame loading, preprocessing, and
//!   synthetic stand-in datasets,
//! * [`gnc`]: SGD-trained delta-velocity regressor with a least-squares
//!   oracle,
//! * [`vision`]: logistic crater classifier for terrain-relative
//!   navigation,
//! * [`attack`]: learning-rate poisoning, Poisson-noise evasion via a bus
//!   rootkit, and epoch inflation,
//! * [`threat`]: rule table mapping a spacecraft profile to applicable
//!   attack classes,
//! * [`scenario`]: config parsing, orchestration, and report writing.

pub mod attack;
pub mod bus;
pub mod gnc;
pub mod ingest;
pub mod kv;
pub mod par;
pub mod rng;
pub mod scenario;
pub mod threat;
pub mod vision;
