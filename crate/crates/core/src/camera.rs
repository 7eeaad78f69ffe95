//! Pinhole camera model, bounding boxes, the `k` depth measure and
//! composition of root-relative poses into camera-centered poses.
//!
//! Units: millimeters for everything in 3D, pixels for everything in the
//! image plane.

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assumed real-world area of a person: 2000 mm x 2000 mm.
pub const DEFAULT_A_REAL: f64 = 2000.0 * 2000.0;

/// Pinhole intrinsics. `alpha_*` are focal lengths divided by the per-pixel
/// distance on each axis, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(alpha_x: f64, alpha_y: f64, cx: f64, cy: f64) -> Result<Self> {
        let cam = Self {
            alpha_x,
            alpha_y,
            cx,
            cy,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_x > 0.0 && self.alpha_y > 0.0) || !self.alpha_x.is_finite() || !self.alpha_y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive and finite (alpha_x={}, alpha_y={})",
                self.alpha_x, self.alpha_y
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidParameter("principal point must be finite".into()));
        }
        Ok(())
    }

    /// Projects a camera-centered point onto the image plane.
    pub fn project(&self, p: &Point3<f64>) -> Result<Point2<f64>> {
        if !(p.z > 0.0) {
            return Err(Error::NonPositiveDepth(p.z));
        }
        Ok(Point2::new(
            self.alpha_x * p.x / p.z + self.cx,
            self.alpha_y * p.y / p.z + self.cy,
        ))
    }

    /// Lifts a pixel back to 3D at the given absolute depth.
    pub fn back_project(&self, q: &Point2<f64>, depth: f64) -> Result<Point3<f64>> {
        if !(depth > 0.0) {
            return Err(Error::NonPositiveDepth(depth));
        }
        Ok(Point3::new(
            (q.x - self.cx) * depth / self.alpha_x,
            (q.y - self.cy) * depth / self.alpha_y,
            depth,
        ))
    }
}

/// Axis-aligned box: top-left corner plus extent, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.h > 0.0) || ![self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box must have finite coordinates and positive extent, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Smallest box containing all points.
    pub fn enclosing(points: &[Point2<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Ok(Self {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    /// Same center, extents multiplied by the given factors.
    pub fn scaled_about_center(&self, sx: f64, sy: f64) -> Self {
        let c = self.center();
        let (w, h) = (self.w * sx, self.h * sy);
        Self {
            x: c.x - 0.5 * w,
            y: c.y - 0.5 * h,
            w,
            h,
        }
    }

    /// Grows the shorter side about the center to a 1:1 aspect ratio.
    /// No clamping to the image: only the area feeds into `k`.
    pub fn square_extend(&self) -> Self {
        let side = self.w.max(self.h);
        let c = self.center();
        Self {
            x: c.x - 0.5 * side,
            y: c.y - 0.5 * side,
            w: side,
            h: side,
        }
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }
}

/// The `k` depth measure, `sqrt(alpha_x * alpha_y * a_real / area)`.
///
/// `b` must already be squared (see [`BBox::square_extend`]); this function
/// does not square it.
pub fn compute_k(b: &BBox, cam: &CameraIntrinsics, a_real: f64) -> Result<f64> {
    if !(a_real > 0.0) {
        return Err(Error::InvalidParameter(format!("a_real must be positive, got {a_real}")));
    }
    let area = b.area();
    if !(area > 0.0) {
        return Err(Error::ZeroArea);
    }
    Ok((cam.alpha_x * cam.alpha_y * a_real / area).sqrt())
}

/// Distance of an object of real length `l_real` (mm) that images to
/// `l_img` pixels along an axis with focal length `alpha`.
pub fn depth_from_extent(l_real: f64, l_img: f64, alpha: f64) -> Result<f64> {
    if !(l_img > 0.0) {
        return Err(Error::ZeroExtent(l_img));
    }
    Ok(alpha * l_real / l_img)
}

/// Maps a pixel in a resampled crop back into the original image.
pub fn crop_to_original(q: &Point2<f64>, crop_box: &BBox, crop_size: (f64, f64)) -> Point2<f64> {
    Point2::new(
        crop_box.x + q.x * crop_box.w / crop_size.0,
        crop_box.y + q.y * crop_box.h / crop_size.1,
    )
}

/// Inverse of [`crop_to_original`].
pub fn original_to_crop(p: &Point2<f64>, crop_box: &BBox, crop_size: (f64, f64)) -> Point2<f64> {
    Point2::new(
        (p.x - crop_box.x) * crop_size.0 / crop_box.w,
        (p.y - crop_box.y) * crop_size.1 / crop_box.h,
    )
}

/// Joint layout shared by every pose in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonDef {
    pub joint_names: Vec<String>,
    pub root_index: usize,
    /// True for elbows, wrists, knees and ankles.
    pub limb_flags: Vec<bool>,
    pub edges: Vec<(usize, usize)>,
}

impl SkeletonDef {
    pub fn validate(&self) -> Result<()> {
        let j = self.joint_names.len();
        if j == 0 {
            return Err(Error::InvalidParameter("skeleton has no joints".into()));
        }
        if self.root_index >= j {
            return Err(Error::InvalidParameter(format!(
                "root_index {} out of range for {j} joints",
                self.root_index
            )));
        }
        if self.limb_flags.len() != j {
            return Err(Error::JointCountMismatch {
                expected: j,
                found: self.limb_flags.len(),
            });
        }
        if let Some(&(a, b)) = self.edges.iter().find(|(a, b)| *a >= j || *b >= j) {
            return Err(Error::InvalidParameter(format!("edge ({a}, {b}) references a missing joint")));
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose2D {
    pub points: Vec<Point2<f64>>,
    pub visible: Option<Vec<bool>>,
}

impl Pose2D {
    pub fn new(points: Vec<Point2<f64>>) -> Self {
        Self { points, visible: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Root-relative pose: `(x px, y px, z_rel mm)` per joint, pixel coordinates
/// in the original image.
#[derive(Debug, Clone, PartialEq)]
pub struct RelPose3D {
    pub joints: Vec<[f64; 3]>,
}

/// Camera-centered pose in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsPose3D {
    pub joints: Vec<Point3<f64>>,
}

impl AbsPose3D {
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }
}

/// Root pixel position plus absolute root depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootCoord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RootCoord {
    pub fn to_camera(&self, cam: &CameraIntrinsics) -> Result<Point3<f64>> {
        cam.back_project(&Point2::new(self.x, self.y), self.z)
    }
}

/// Adds the root depth to every relative depth and back-projects each
/// joint at its resulting absolute depth.
pub fn compose_absolute_pose(rel: &RelPose3D, root: &RootCoord, cam: &CameraIntrinsics) -> Result<AbsPose3D> {
    let joints = rel
        .joints
        .iter()
        .map(|&[x, y, z_rel]| cam.back_project(&Point2::new(x, y), z_rel + root.z))
        .collect::<Result<Vec<_>>>()?;
    Ok(AbsPose3D { joints })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 500.0, 400.0).unwrap()
    }

    #[test]
    fn project_examples() {
        let q = cam().project(&Point3::new(0.0, 0.0, 1000.0)).unwrap();
        assert_eq!(q, Point2::new(500.0, 400.0));
        let q = cam().project(&Point3::new(100.0, 0.0, 1000.0)).unwrap();
        assert_eq!(q, Point2::new(600.0, 400.0));
    }

    #[test]
    fn project_rejects_points_behind_camera() {
        assert!(matches!(
            cam().project(&Point3::new(1.0, 1.0, 0.0)),
            Err(Error::NonPositiveDepth(_))
        ));
        assert!(matches!(
            cam().project(&Point3::new(1.0, 1.0, -5.0)),
            Err(Error::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn back_project_examples() {
        let c = cam();
        assert_eq!(
            c.back_project(&Point2::new(c.cx, c.cy), 2000.0).unwrap(),
            Point3::new(0.0, 0.0, 2000.0)
        );
        assert_eq!(
            c.back_project(&Point2::new(600.0, 400.0), 1000.0).unwrap(),
            Point3::new(100.0, 0.0, 1000.0)
        );
        assert!(c.back_project(&Point2::new(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn square_extend_grows_short_side() {
        let b = BBox::new(10.0, 20.0, 100.0, 200.0).unwrap().square_extend();
        assert_eq!(b, BBox::new(-40.0, 20.0, 200.0, 200.0).unwrap());
        let sq = BBox::new(3.0, 4.0, 50.0, 50.0).unwrap();
        assert_eq!(sq.square_extend(), sq);
    }

    #[test]
    fn compute_k_examples() {
        let c = CameraIntrinsics::new(1500.0, 1500.0, 0.0, 0.0).unwrap();
        let b = BBox::new(0.0, 0.0, 500.0, 500.0).unwrap();
        assert_eq!(compute_k(&b, &c, DEFAULT_A_REAL).unwrap(), 6000.0);

        let c = CameraIntrinsics::new(1400.0, 1600.0, 0.0, 0.0).unwrap();
        let b = BBox::new(0.0, 0.0, 2000.0, 2000.0).unwrap();
        let k = compute_k(&b, &c, 4e6).unwrap();
        assert!((k - 2.24e6_f64.sqrt()).abs() < 1e-9);
        assert!((k - 1496.662955).abs() < 1e-6);

        let b2 = BBox::new(0.0, 0.0, 4000.0, 4000.0).unwrap();
        assert_eq!(compute_k(&b2, &c, 4e6).unwrap(), k / 2.0);
    }

    #[test]
    fn compute_k_zero_area() {
        let c = cam();
        let b = BBox {
            x: 0.0,
            y: 0.0,
            w: 0.0,
            h: 0.0,
        };
        assert!(matches!(compute_k(&b, &c, DEFAULT_A_REAL), Err(Error::ZeroArea)));
    }

    #[test]
    fn depth_from_extent_examples() {
        assert_eq!(depth_from_extent(1800.0, 600.0, 1000.0).unwrap(), 3000.0);
        assert!(matches!(depth_from_extent(1800.0, 0.0, 1000.0), Err(Error::ZeroExtent(_))));
        assert!(depth_from_extent(1800.0, 1e9, 1000.0).unwrap() < 1e-2);
    }

    #[test]
    fn depth_from_extent_matches_k() {
        let c = CameraIntrinsics::new(1400.0, 1600.0, 0.0, 0.0).unwrap();
        let (lx_real, ly_real, lx_img, ly_img) = (1500.0, 1800.0, 210.0, 330.0);
        let dx = depth_from_extent(lx_real, lx_img, c.alpha_x).unwrap();
        let dy = depth_from_extent(ly_real, ly_img, c.alpha_y).unwrap();
        let b = BBox::new(0.0, 0.0, lx_img, ly_img).unwrap();
        let k = compute_k(&b, &c, lx_real * ly_real).unwrap();
        assert!(((dx * dy).sqrt() - k).abs() < 1e-9 * k);
    }

    #[test]
    fn crop_mapping_examples() {
        let b = BBox::new(100.0, 50.0, 200.0, 200.0).unwrap();
        assert_eq!(crop_to_original(&Point2::new(0.0, 0.0), &b, (256.0, 256.0)), Point2::new(100.0, 50.0));
        assert_eq!(
            crop_to_original(&Point2::new(128.0, 128.0), &b, (256.0, 256.0)),
            Point2::new(200.0, 150.0)
        );
    }

    #[test]
    fn compose_on_optical_axis() {
        let c = cam();
        let rel = RelPose3D {
            joints: vec![[c.cx, c.cy, 0.0]; 5],
        };
        let root = RootCoord {
            x: c.cx,
            y: c.cy,
            z: 3000.0,
        };
        let abs = compose_absolute_pose(&rel, &root, &c).unwrap();
        assert!(abs.joints.iter().all(|p| *p == Point3::new(0.0, 0.0, 3000.0)));
    }

    #[test]
    fn compose_rejects_joint_behind_camera() {
        let c = cam();
        let rel = RelPose3D {
            joints: vec![[500.0, 400.0, 0.0], [500.0, 400.0, -3500.0]],
        };
        let root = RootCoord {
            x: 500.0,
            y: 400.0,
            z: 3000.0,
        };
        assert!(matches!(
            compose_absolute_pose(&rel, &root, &c),
            Err(Error::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn skeleton_validation() {
        let mut s = SkeletonDef {
            joint_names: vec!["a".into(), "b".into()],
            root_index: 0,
            limb_flags: vec![false, true],
            edges: vec![(0, 1)],
        };
        assert!(s.validate().is_ok());
        s.edges.push((1, 2));
        assert!(s.validate().is_err());
        s.edges.pop();
        s.root_index = 2;
        assert!(s.validate().is_err());
    }
}
