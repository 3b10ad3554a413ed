use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Pinhole intrinsics in pixels; pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return param_err(format!("focal lengths must be positive, got ({fx}, {fy})"));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return param_err("principal point must be finite");
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Also checks that the principal point lies inside a `height`×`width` image.
    pub fn for_image(fx: f64, fy: f64, cx: f64, cy: f64, height: usize, width: usize) -> Result<Self> {
        let k = Self::new(fx, fy, cx, cy)?;
        k.check_bounds(height, width)?;
        Ok(k)
    }

    pub fn check_bounds(&self, height: usize, width: usize) -> Result<()> {
        let inside = |c: f64, n: usize| c >= 0.0 && c <= (n as f64 - 1.0).max(0.0);
        if !inside(self.cx, width) || !inside(self.cy, height) {
            return param_err(format!(
                "principal point ({}, {}) outside {height}x{width} image",
                self.cx, self.cy
            ));
        }
        Ok(())
    }
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Rotation about the camera x axis (positive tilts the view up, since y points down).
pub fn rot_x(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

/// Rotation about the camera y axis (positive yaws the optical axis toward +x).
pub fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Rigid map from source-camera coordinates into target-camera coordinates: p′ = R·p + t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let rtr = mat_mul(&transpose(&rotation), &rotation);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (rtr[i][j] - expected).abs() > 1e-9 {
                    return param_err("rotation is not orthonormal");
                }
            }
        }
        if (det(&rotation) - 1.0).abs() > 1e-9 {
            return param_err("rotation determinant is not 1");
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return param_err("translation must be finite");
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: IDENTITY,
            translation: [0.0; 3],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == IDENTITY && self.translation == [0.0; 3]
    }

    /// Pose induced by moving the camera: rotation `cam_rotation` (camera-to-source) and center `center`.
    pub fn from_camera_motion(cam_rotation: Mat3, center: Vec3) -> Self {
        let r = transpose(&cam_rotation);
        let t = mat_vec(&r, &center);
        Self {
            rotation: r,
            translation: [-t[0], -t[1], -t[2]],
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let q = mat_vec(&self.rotation, p);
        [
            q[0] + self.translation[0],
            q[1] + self.translation[1],
            q[2] + self.translation[2],
        ]
    }

    pub fn inverse(&self) -> Self {
        let r = transpose(&self.rotation);
        let t = mat_vec(&r, &self.translation);
        Self {
            rotation: r,
            translation: [-t[0], -t[1], -t[2]],
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        let rotation = mat_mul(&self.rotation, &other.rotation);
        let t = mat_vec(&self.rotation, &other.translation);
        Self {
            rotation,
            translation: [
                t[0] + self.translation[0],
                t[1] + self.translation[1],
                t[2] + self.translation[2],
            ],
        }
    }
}
