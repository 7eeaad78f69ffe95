//! Soft-argmax decoding of score grids, the L1 training losses and a
//! central-difference gradient used to check analytic derivatives.
//!
//! All coordinates are 0-indexed cell centers. Scaling cells to pixels or
//! millimeters is left to the caller.

use crate::camera::{RelPose3D, RootCoord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap2D {
    width: usize,
    height: usize,
    /// Row-major, `height` rows of `width` cells.
    data: Vec<f64>,
}

impl Heatmap2D {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("heatmap dimensions must be at least 1".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "heatmap of {width}x{height} needs {} scores, got {}",
                width * height,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("heatmap scores must be finite".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap3D {
    width: usize,
    height: usize,
    depth: usize,
    /// Index `(z * height + y) * width + x`.
    data: Vec<f64>,
}

impl Heatmap3D {
    pub fn new(width: usize, height: usize, depth: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(Error::InvalidParameter("heatmap dimensions must be at least 1".into()));
        }
        if data.len() != width * height * depth {
            return Err(Error::InvalidParameter(format!(
                "heatmap of {width}x{height}x{depth} needs {} scores, got {}",
                width * height * depth,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("heatmap scores must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            depth,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.depth)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Numerically stable softmax (max subtracted before exponentiation).
fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Expected coordinates under a single softmax over all cells, plus the
/// Jacobian of that expectation with respect to every score:
/// `d out_a / d s_k = p_k * (c_a(k) - out_a)`.
fn soft_argmax_generic<const N: usize>(scores: &[f64], coord: impl Fn(usize) -> [f64; N]) -> ([f64; N], Vec<[f64; N]>) {
    let p = softmax(scores);
    let mut out = [0.0; N];
    for (k, pk) in p.iter().enumerate() {
        let c = coord(k);
        for a in 0..N {
            out[a] += pk * c[a];
        }
    }
    let jac = p
        .iter()
        .enumerate()
        .map(|(k, pk)| {
            let c = coord(k);
            std::array::from_fn(|a| pk * (c[a] - out[a]))
        })
        .collect();
    (out, jac)
}

/// Probability-weighted centroid `(x, y)` of a 2D heatmap.
pub fn soft_argmax_2d(h: &Heatmap2D) -> [f64; 2] {
    soft_argmax_2d_with_grad(h).0
}

/// [`soft_argmax_2d`] and its gradient with respect to each score, in the
/// heatmap's storage order.
pub fn soft_argmax_2d_with_grad(h: &Heatmap2D) -> ([f64; 2], Vec<[f64; 2]>) {
    let w = h.width;
    soft_argmax_generic(&h.data, |k| [(k % w) as f64, (k / w) as f64])
}

/// Probability-weighted centroid `(x, y, z)` of a 3D heatmap.
pub fn soft_argmax_3d(h: &Heatmap3D) -> [f64; 3] {
    soft_argmax_3d_with_grad(h).0
}

pub fn soft_argmax_3d_with_grad(h: &Heatmap3D) -> ([f64; 3], Vec<[f64; 3]>) {
    let (w, hh) = (h.width, h.height);
    soft_argmax_generic(&h.data, |k| [(k % w) as f64, ((k / w) % hh) as f64, (k / (w * hh)) as f64])
}

/// Root loss: plain L1 distance over `(x, y, Z)`, no averaging.
pub fn l1_root_loss(pred: &RootCoord, gt: &RootCoord) -> f64 {
    (pred.x - gt.x).abs() + (pred.y - gt.y).abs() + (pred.z - gt.z).abs()
}

/// Pose loss: per-joint L1 distance averaged over joints.
pub fn l1_pose_loss(pred: &RelPose3D, gt: &RelPose3D) -> Result<f64> {
    if pred.joints.len() != gt.joints.len() {
        return Err(Error::JointCountMismatch {
            expected: gt.joints.len(),
            found: pred.joints.len(),
        });
    }
    if gt.joints.is_empty() {
        return Err(Error::EmptySet);
    }
    let total: f64 = pred
        .joints
        .iter()
        .zip(&gt.joints)
        .map(|(p, g)| (0..3).map(|a| (p[a] - g[a]).abs()).sum::<f64>())
        .sum();
    Ok(total / gt.joints.len() as f64)
}

/// Central-difference gradient of `f` at `x`.
///
/// Panics if `eps` is not positive.
pub fn finite_difference_gradient<F>(f: F, x: &[f64], eps: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + eps;
            let hi = f(&probe);
            probe[i] = x[i] - eps;
            let lo = f(&probe);
            probe[i] = x[i];
            (hi - lo) / (2.0 * eps)
        })
        .collect()
}
