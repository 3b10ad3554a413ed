//! Depth-based reprojection: unproject, move the camera, splat, and read off holes.

pub mod camera;
pub mod image;
pub mod mask;
pub mod splat;
pub mod trajectory;

pub use camera::{Intrinsics, Mat3, Pose, Vec3};
pub use image::{DepthMap, Image};
pub use mask::{downsample_mask_to_latent, near_depth_mask, stack_masks, DepthMask, DepthMode};
pub use splat::{
    project_splat, render_frame, render_sequence, render_with_poses, transform_points, unproject, PointCloud,
    RenderOutput, RenderedSequence,
};
pub use trajectory::{canonical, canonical_trajectories, Easing, TrajectoryKind, TrajectoryMagnitudes, TrajectorySpec};
