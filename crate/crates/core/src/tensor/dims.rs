use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};

/// Shape of a 5-axis latent: (batch, frame, channel, height, width), row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub batch: usize,
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub fn new(batch: usize, frames: usize, channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::from_array([batch, frames, channels, height, width])
    }

    pub fn from_array(axes: [usize; 5]) -> Result<Self> {
        const NAMES: [&str; 5] = ["B", "F", "C", "H", "W"];
        for (axis, name) in axes.iter().zip(NAMES) {
            if *axis == 0 {
                return dim_err(format!("axis {name} is zero in {axes:?}"));
            }
        }
        let total = axes
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(a))
            .filter(|&n| n <= isize::MAX as usize / 8);
        if total.is_none() {
            return dim_err(format!("element count of {axes:?} overflows"));
        }
        let [batch, frames, channels, height, width] = axes;
        Ok(Self {
            batch,
            frames,
            channels,
            height,
            width,
        })
    }

    pub fn as_array(&self) -> [usize; 5] {
        [self.batch, self.frames, self.channels, self.height, self.width]
    }

    pub fn len(&self) -> usize {
        self.batch * self.frames * self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Number of (b, f, h, w) cells, i.e. positions with the channel axis collapsed.
    pub fn cells(&self) -> usize {
        self.batch * self.frames * self.plane()
    }

    pub fn offset(&self, b: usize, f: usize, c: usize, h: usize, w: usize) -> usize {
        (((b * self.frames + f) * self.channels + c) * self.height + h) * self.width + w
    }

    pub fn channel_of(&self, flat: usize) -> usize {
        (flat / self.plane()) % self.channels
    }

    /// Flat element index of channel `c` inside cell `cell` (cell space is row-major over b, f, h, w).
    pub fn cell_element(&self, cell: usize, c: usize) -> usize {
        let plane = self.plane();
        let bf = cell / plane;
        let hw = cell % plane;
        (bf * self.channels + c) * plane + hw
    }

    pub fn with_channels(&self, channels: usize) -> Result<Self> {
        Self::new(self.batch, self.frames, channels, self.height, self.width)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {}, {})",
            self.batch, self.frames, self.channels, self.height, self.width
        )
    }
}
