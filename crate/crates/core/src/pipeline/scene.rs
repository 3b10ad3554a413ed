//! Procedural scenes with analytic depth.
//!
//! Textures are mosaics that are constant over each 8×8-pixel, 4-frame tile, so
//! an unmoved scene lies exactly in the toy codec's range.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::geometry::{DepthMap, Image, Intrinsics};
use crate::tensor::Rng;

pub const TILE: usize = 8;
pub const TILE_FRAMES: usize = 4;

pub const PLANE_DEPTH: f32 = 4.0;
pub const BACKGROUND_DEPTH: f32 = 8.0;
pub const FOREGROUND_DEPTH: f32 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToySceneKind {
    /// One fronto-parallel plane.
    TexturedPlane,
    /// A background plane with a tile-aligned foreground card in the middle half.
    #[default]
    TwoLayerParallax,
}

#[derive(Debug, Clone)]
pub struct ToyScene {
    pub kind: ToySceneKind,
    pub seed: u64,
    pub frames: Vec<Image>,
    pub depths: Vec<DepthMap>,
}

impl ToyScene {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }
}

/// Row and column ranges of the foreground card for an `h`×`w` frame.
pub fn foreground_rect(h: usize, w: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let snap = |v: usize| v / TILE * TILE;
    (snap(h / 4)..snap(3 * h / 4), snap(w / 4)..snap(3 * w / 4))
}

/// Default camera: focal length equal to the width, principal point at the center.
pub fn default_intrinsics(h: usize, w: usize) -> Intrinsics {
    Intrinsics {
        fx: w as f64,
        fy: w as f64,
        cx: (w as f64 - 1.0) / 2.0,
        cy: (h as f64 - 1.0) / 2.0,
    }
}

struct Palette {
    rng: Rng,
    lo: f64,
    hi: f64,
}

impl Palette {
    /// Color of tile (group, tile_row, tile_col); counter-addressed so tiles are independent.
    fn color(&self, group: usize, tr: usize, tc: usize, rows: usize, cols: usize) -> [f32; 3] {
        let base = ((group * rows + tr) * cols + tc) as u64 * 3;
        let mut out = [0.0; 3];
        for (k, v) in out.iter_mut().enumerate() {
            *v = (self.lo + (self.hi - self.lo) * self.rng.f64_at(base + k as u64)) as f32;
        }
        out
    }
}

pub fn make_toy_scene(kind: ToySceneKind, frames: usize, height: usize, width: usize, seed: u64) -> Result<ToyScene> {
    if frames == 0 || height == 0 || width == 0 {
        return dim_err("scene dims must be positive");
    }
    if !height.is_multiple_of(TILE) || !width.is_multiple_of(TILE) || !frames.is_multiple_of(TILE_FRAMES) {
        return dim_err(format!(
            "scene {frames}x{height}x{width} needs H, W divisible by {TILE} and F divisible by {TILE_FRAMES}"
        ));
    }
    let (rows, cols) = (height / TILE, width / TILE);
    let back = Palette {
        rng: Rng::for_purpose(seed, "scene/background"),
        lo: 0.05,
        hi: 0.75,
    };
    let front = Palette {
        rng: Rng::for_purpose(seed, "scene/foreground"),
        lo: 0.55,
        hi: 0.95,
    };
    let (fg_rows, fg_cols) = foreground_rect(height, width);
    let in_front = |r: usize, c: usize| kind == ToySceneKind::TwoLayerParallax && fg_rows.contains(&r) && fg_cols.contains(&c);

    let mut images = Vec::with_capacity(frames);
    let mut depths = Vec::with_capacity(frames);
    for f in 0..frames {
        let group = f / TILE_FRAMES;
        images.push(Image::from_fn(height, width, |r, c| {
            let palette = if in_front(r, c) { &front } else { &back };
            palette.color(group, r / TILE, c / TILE, rows, cols)
        }));
        depths.push(DepthMap::from_fn(height, width, |r, c| match kind {
            ToySceneKind::TexturedPlane => PLANE_DEPTH,
            ToySceneKind::TwoLayerParallax if in_front(r, c) => FOREGROUND_DEPTH,
            ToySceneKind::TwoLayerParallax => BACKGROUND_DEPTH,
        }));
    }
    Ok(ToyScene {
        kind,
        seed,
        frames: images,
        depths,
    })
}
