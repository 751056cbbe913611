//! Queue alignment analytics.
//!
//! Given body keypoints for everyone in an image, `massimo-core` finds each
//! person's hip midpoint, orders people along the queue, fits the queue line,
//! and flags people who are out of line in two independent ways:
//!
//! * a Student-t confidence band around the fitted line ([`ci`]), and
//! * a mass-spring model where every sideways kink stretches the springs
//!   between neighbours; net forces are min-max scaled to `[0, 255]` and split
//!   with Otsu's method ([`springs`], [`threshold`]).
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix them to `f64`, which is what the pipeline uses.

// `!(x > y)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ci;
pub mod error;
pub mod ingest;
pub mod linefit;
pub mod pipeline;
pub mod render;
pub mod scalar;
pub mod springs;
pub mod synth;
pub mod tdist;
pub mod threshold;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Non-fatal diagnostics collected while processing.
pub type Warnings = Vec<String>;

pub type QueuePoint = ingest::QueuePoint<f64>;
pub type QueuePointF32 = ingest::QueuePoint<f32>;
pub type ModelSpec = linefit::ModelSpec<f64>;
pub type FittedLine = linefit::FittedLine<f64>;
pub type ResidualStats = linefit::ResidualStats<f64>;
pub type DirectionVector = linefit::DirectionVector<f64>;
pub type TopViewPoint = linefit::TopViewPoint<f64>;
pub type BandSpec = ci::BandSpec<f64>;
pub type CiFlags = ci::CiFlags<f64>;
pub type SpringParams = springs::SpringParams<f64>;
pub type SpringLink = springs::SpringLink<f64>;
pub type ForceField = springs::ForceField<f64>;
pub type OtsuResult = threshold::OtsuResult<f64>;
pub type SpringFlags = threshold::SpringFlags<f64>;

pub use ci::{confidence_band, flag_ci_outliers, t_critical, BandMode};
pub use ingest::{hip_midpoints, order_queue, parse_keypoint_file, PersonPose, PoseFrame};
pub use linefit::{direction_vector, fit_line, predict, residual_stats, top_view, ModelKind};
pub use pipeline::{analyze_frame, analyze_points, Analysis, AnalysisReport, Config, DirectionMode};
pub use render::{jet_color, render_overlay, render_topview, PixelBuffer, Rgb, StyleConfig};
pub use springs::{chain_forces, link_force, link_geometry, per_link_magnitudes};
pub use synth::{accuracy_paper, generate_queue, prf1, EvalResult, SceneSpec};
pub use threshold::{flag_force_outliers, minmax_scale, otsu_threshold};
