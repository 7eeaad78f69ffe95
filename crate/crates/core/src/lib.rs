//! Absolute 3D multi-person pose from monocular geometry.
//!
//! A root-relative pose plus an absolute root depth, back-projected through
//! a pinhole camera, gives a camera-centered pose. The root depth comes
//! from the `k` measure (imaged person area against an assumed real area),
//! optionally scaled by a learned correction factor, or from the classic
//! 2D/3D distance-minimization fit. The crate also carries the evaluation
//! metrics and a synthetic scene generator that supplies exact groundtruth.

pub mod camera;
pub mod correction;
pub mod error;
pub mod heatmap;
pub mod io;
pub mod metrics;
mod numeric;
pub mod pipeline;
pub mod root;
pub mod synth;

pub use camera::{
    compose_absolute_pose, compute_k, crop_to_original, depth_from_extent, original_to_crop, AbsPose3D, BBox,
    CameraIntrinsics, Pose2D, RelPose3D, RootCoord, SkeletonDef, DEFAULT_A_REAL,
};
pub use error::{Error, Result};
pub use metrics::{EvalConfig, EvalReport};
pub use root::{CorrectionFactor, RansacConfig, RootFitResult};

pub use nalgebra::{Point2, Point3, Vector3};
