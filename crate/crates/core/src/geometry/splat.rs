//! Depth unprojection and z-buffered point splatting.

use rayon::prelude::*;

use super::camera::{Intrinsics, Pose, Vec3};
use super::image::{DepthMap, Image};
use super::mask::stack_masks;
use super::trajectory::TrajectorySpec;
use crate::error::{dim_err, param_err, Error, Result};
use crate::tensor::{BinaryMask, Dims};

/// Points at or in front of this depth are discarded by the splatter.
pub const Z_NEAR: f64 = 1e-6;

/// One camera-space point per source pixel, in row-major pixel order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub colors: Vec<[f32; 3]>,
    /// False where the source pixel had no usable depth.
    pub valid: Vec<bool>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub image: Image,
    /// 1 where no point landed (hole or out of frame); dims (1, 1, 1, H, W).
    pub visibility: BinaryMask,
    /// Source point index that won each pixel.
    pub winner: Vec<Option<usize>>,
    pub zbuffer: Vec<f64>,
}

/// (x, y, z) = (d·(u−cx)/fx, d·(v−cy)/fy, d) for every pixel (u = column, v = row).
pub fn unproject(image: &Image, depth: &DepthMap, k: &Intrinsics) -> Result<PointCloud> {
    if image.height() != depth.height() || image.width() != depth.width() {
        return dim_err(format!(
            "image {}x{} and depth {}x{} differ",
            image.height(),
            image.width(),
            depth.height(),
            depth.width()
        ));
    }
    if depth.valid_count() == 0 {
        return Err(Error::EmptyCloud);
    }
    let (h, w) = (depth.height(), depth.width());
    let mut points = Vec::with_capacity(h * w);
    let mut colors = Vec::with_capacity(h * w);
    let mut valid = Vec::with_capacity(h * w);
    for row in 0..h {
        for col in 0..w {
            let i = row * w + col;
            let d = depth.as_slice()[i] as f64;
            let ok = depth.is_valid(i);
            let d = if ok { d } else { 0.0 };
            points.push([
                d * (col as f64 - k.cx) / k.fx,
                d * (row as f64 - k.cy) / k.fy,
                d,
            ]);
            colors.push(image.pixel_at(i));
            valid.push(ok);
        }
    }
    Ok(PointCloud {
        points,
        colors,
        valid,
    })
}

pub fn transform_points(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| pose.apply(p)).collect(),
        colors: cloud.colors.clone(),
        valid: cloud.valid.clone(),
    }
}

/// Pixel hit by a camera-space point, or `None` if behind the near plane or out of frame.
/// Coordinates are rounded half-up: ⌊u + ½⌋.
pub fn project_point(p: &Vec3, k: &Intrinsics, height: usize, width: usize) -> Option<(usize, usize)> {
    let z = p[2];
    if z <= Z_NEAR {
        return None;
    }
    let u = k.fx * p[0] / z + k.cx;
    let v = k.fy * p[1] / z + k.cy;
    let col = (u + 0.5).floor();
    let row = (v + 0.5).floor();
    if col < 0.0 || row < 0.0 || col >= width as f64 || row >= height as f64 {
        return None;
    }
    Some((row as usize, col as usize))
}

/// Nearest-pixel splat with a z-buffer; the smallest z wins and ties go to the
/// lowest source index.
pub fn project_splat(cloud: &PointCloud, k: &Intrinsics, height: usize, width: usize) -> Result<RenderOutput> {
    if height == 0 || width == 0 {
        return dim_err("output dims must be positive");
    }
    let mut image = Image::black(height, width);
    let mut zbuffer = vec![f64::INFINITY; height * width];
    let mut winner = vec![None; height * width];
    for (i, p) in cloud.points.iter().enumerate() {
        if !cloud.valid[i] {
            continue;
        }
        let Some((row, col)) = project_point(p, k, height, width) else {
            continue;
        };
        let pix = row * width + col;
        if p[2] < zbuffer[pix] {
            zbuffer[pix] = p[2];
            winner[pix] = Some(i);
            image.set_pixel(row, col, cloud.colors[i]);
        }
    }
    let dims = Dims::new(1, 1, 1, height, width)?;
    let visibility = BinaryMask::from_fn(dims, |i| winner[i].is_none());
    Ok(RenderOutput {
        image,
        visibility,
        winner,
        zbuffer,
    })
}

/// Renders one frame under `pose`.
pub fn render_frame(image: &Image, depth: &DepthMap, k: &Intrinsics, pose: &Pose) -> Result<RenderOutput> {
    let cloud = unproject(image, depth, k)?;
    let moved = transform_points(&cloud, pose);
    project_splat(&moved, k, image.height(), image.width())
}

/// Novel-view frames, their visibility masks and z-buffer depths (holes invalid).
#[derive(Debug, Clone)]
pub struct RenderedSequence {
    pub frames: Vec<Image>,
    pub masks: Vec<BinaryMask>,
    pub depths: Vec<DepthMap>,
}

impl RenderedSequence {
    /// Stacks per-frame masks into a (1, F, 1, H, W) mask.
    pub fn stacked_mask(&self) -> Result<BinaryMask> {
        stack_masks(&self.masks)
    }

    pub fn hole_fraction(&self) -> f64 {
        let total: usize = self.masks.iter().map(|m| m.dims().len()).sum();
        let holes: usize = self.masks.iter().map(|m| m.count_ones()).sum();
        holes as f64 / total as f64
    }
}

pub fn render_with_poses(
    frames: &[Image],
    depths: &[DepthMap],
    k: &Intrinsics,
    poses: &[Pose],
) -> Result<RenderedSequence> {
    if frames.len() != depths.len() || frames.len() != poses.len() {
        return param_err(format!(
            "sequence lengths differ: {} frames, {} depths, {} poses",
            frames.len(),
            depths.len(),
            poses.len()
        ));
    }
    let outputs: Vec<RenderOutput> = frames
        .par_iter()
        .zip(depths.par_iter())
        .zip(poses.par_iter())
        .map(|((img, depth), pose)| render_frame(img, depth, k, pose))
        .collect::<Result<_>>()?;
    let mut seq = RenderedSequence {
        frames: Vec::with_capacity(outputs.len()),
        masks: Vec::with_capacity(outputs.len()),
        depths: Vec::with_capacity(outputs.len()),
    };
    for o in outputs {
        let z = o.zbuffer.iter().map(|&z| z as f32).collect();
        seq.depths.push(DepthMap::new(o.image.height(), o.image.width(), z)?);
        seq.frames.push(o.image);
        seq.masks.push(o.visibility);
    }
    Ok(seq)
}

pub fn render_sequence(
    frames: &[Image],
    depths: &[DepthMap],
    k: &Intrinsics,
    trajectory: &TrajectorySpec,
) -> Result<RenderedSequence> {
    let poses = trajectory.poses(frames.len());
    render_with_poses(frames, depths, k, &poses)
}
