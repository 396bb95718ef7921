//! Adaptive pupil boundary detection for eye images.
//!
//! The pipeline locates the pupil region with a multi-scale Haar search,
//! extracts validated edge segments inside it, and screens them by the
//! entropy of their gradient-direction distribution. A closed high-entropy
//! segment with a tight ellipse fit means the pupil is fully visible and the
//! cheap fast path finishes the job; otherwise elliptical arcs from all
//! high-entropy segments are grouped, every arc subset is fused into a
//! candidate ellipse, and a cost over fit error, eccentricity, and arc
//! support picks the winner or declares the frame pupil-free (a blink).
//!
//! The crate also ships a synthetic eye-frame generator with exact ground
//! truth and the matching evaluation harness (overlap ratio, precision,
//! recall, F-measure), so the whole pipeline is testable end to end without
//! camera data.
//!
//! ```
//! use pupilfit::config::Config;
//! use pupilfit::detector::{detect, Verdict};
//! use pupilfit::synth::{render, SceneSpec};
//!
//! let (frame, truth) = render(&SceneSpec::default()).unwrap();
//! let result = detect(&frame, &Config::default()).unwrap();
//! assert_eq!(result.verdict, Verdict::Pupil);
//! let found = result.ellipse.unwrap();
//! let gt = truth.unwrap();
//! assert!((found.cx - gt.cx).abs() < 2.0);
//! ```
//!
//! Run `cargo run --example detect_frame` for a narrated single-frame pass,
//! or see the other examples for each stage in isolation.

pub mod arcs;
pub mod config;
pub mod detector;
pub mod edges;
pub mod ellipse;
pub mod entropy;
pub mod eval;
pub mod imaging;
pub mod overlay;
pub mod roi;
pub mod synth;

pub use config::Config;
pub use detector::{detect, DetectPath, DetectionResult, Verdict};
pub use ellipse::{EllipseParams, FitResult};
pub use imaging::GrayImage;
