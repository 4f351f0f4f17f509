//! Rigid motion transfer for point clouds.
//!
//! Pipeline: lift or synthesize 3D trajectories, fit per-component rigid
//! step transforms ([`build_prior`]), replay them on a target cloud as an
//! explicit velocity field ([`compute_field`]), smooth that field over a
//! k-NN graph ([`refine`], [`propagate_static`]), then integrate and render
//! ([`integrate`], [`render()`]) and score the frames ([`psnr`], [`ssim`]).

pub mod cloud;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod prior;
pub mod refine;
pub mod render;
pub mod trajectory;

pub use cloud::{
    assign_labels, load_cloud, normalize_cloud, parse_ply, save_cloud, write_ply, ComponentAssignment, LabelSource,
    LoadedCloud, NormalizedCloud, PlyEncoding, TargetCloud,
};
pub use error::{Error, Result};
pub use field::{
    compute_field, compute_field_with, extend_field, integrate, integrate_positions, scale_field, ExtendMode,
    VelocityField,
};
pub use geometry::{centroid, compose, svd3, umeyama_align, CameraModel, Mat3, Projection, RigidTransform, Svd3, Vec3};
pub use metrics::{mean_score, psnr, score_sequence, ssim, FrameScore, PSNR_CAP};
pub use prior::{apply_prior, build_prior, fit_residuals, Alignment, SpatPrior};
pub use refine::{
    build_graph, build_graph_from_points, cross_label_boundary, flood_fill_boundary, kinematic_loss, propagate_static,
    refine, topological_loss, BoundarySet, NeighborGraph, RefineTrace, RefinementConfig, StaticMode,
};
pub use render::{default_camera, render, CameraPath, Frame, Rgb};
pub use trajectory::{
    lift_tracks, mask_trajectories, normalize_scene, synthesize_scene, DepthMap, Mask, MaskOutcome, Motion, MotionSpec,
    SyntheticScene, Track2DSet, TrajectorySet,
};
