//! Pose and root evaluation: MPJPE, Procrustes-aligned MPJPE, MRPE,
//! 3DPCK (relative and absolute), AUC, root average precision, and the
//! person matching that ties predictions to groundtruth.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::AbsPose3D;
use crate::error::{Error, Result};
use crate::numeric::{compensated_mean, compensated_sum};

pub const DEFAULT_PCK_THRESHOLD: f64 = 150.0;
pub const DEFAULT_AP_THRESHOLD: f64 = 250.0;
pub const DEFAULT_MATCH_RADIUS: f64 = 500.0;

/// Default AUC grid: 5 mm to 150 mm in 5 mm steps.
pub fn default_auc_thresholds() -> Vec<f64> {
    (1..=30).map(|i| 5.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonPrediction {
    pub image_id: u64,
    pub score: f64,
    pub pose: AbsPose3D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPerson {
    pub image_id: u64,
    pub pose: AbsPose3D,
}

fn check_joint_counts(pred: &AbsPose3D, gt: &AbsPose3D) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::JointCountMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    if gt.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(())
}

/// Per-joint Euclidean errors, optionally after translating `pred` so the
/// joint at `root_align` coincides with groundtruth.
pub fn joint_errors(pred: &AbsPose3D, gt: &AbsPose3D, root_align: Option<usize>) -> Result<Vec<f64>> {
    check_joint_counts(pred, gt)?;
    let shift = match root_align {
        Some(r) if r >= gt.len() => {
            return Err(Error::InvalidParameter(format!("root index {r} out of range")));
        }
        Some(r) => gt.joints[r] - pred.joints[r],
        None => Vector3::zeros(),
    };
    Ok(pred
        .joints
        .iter()
        .zip(&gt.joints)
        .map(|(p, g)| (p + shift - g).norm())
        .collect())
}

/// Mean per-joint position error in mm.
pub fn mpjpe(pred: &AbsPose3D, gt: &AbsPose3D, root_align: Option<usize>) -> Result<f64> {
    let errors = joint_errors(pred, gt, root_align)?;
    Ok(compensated_mean(&errors).unwrap_or(0.0))
}

/// `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    pub fn apply_pose(&self, pose: &AbsPose3D) -> AbsPose3D {
        AbsPose3D {
            joints: pose.joints.iter().map(|p| self.apply(p)).collect(),
        }
    }
}

fn centroid(points: &[Point3<f64>]) -> Vector3<f64> {
    let n = points.len() as f64;
    Vector3::new(
        compensated_sum(points.iter().map(|p| p.x)) / n,
        compensated_sum(points.iter().map(|p| p.y)) / n,
        compensated_sum(points.iter().map(|p| p.z)) / n,
    )
}

/// Least-squares similarity transform (rotation, translation, positive
/// uniform scale; reflections excluded) mapping `pred` onto `gt`.
pub fn procrustes_align(pred: &AbsPose3D, gt: &AbsPose3D) -> Result<(AbsPose3D, Similarity)> {
    check_joint_counts(pred, gt)?;
    let mu_p = centroid(&pred.joints);
    let mu_g = centroid(&gt.joints);
    let pc: Vec<Vector3<f64>> = pred.joints.iter().map(|p| p.coords - mu_p).collect();
    let gc: Vec<Vector3<f64>> = gt.joints.iter().map(|g| g.coords - mu_g).collect();

    let var_g: f64 = gc.iter().map(|v| v.norm_squared()).sum();
    if !(var_g > 0.0) {
        return Err(Error::DegenerateGt);
    }
    let var_p: f64 = pc.iter().map(|v| v.norm_squared()).sum();
    if !(var_p > 0.0) {
        return Err(Error::DegenerateConfiguration("prediction has zero spatial variance".into()));
    }

    let cov: Matrix3<f64> = gc.iter().zip(&pc).map(|(g, p)| g * p.transpose()).sum();
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        d[2] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&d) * v_t;
    let scale = svd.singular_values.dot(&d) / var_p;
    let transform = Similarity {
        rotation,
        translation: mu_g - scale * (rotation * mu_p),
        scale,
    };
    Ok((transform.apply_pose(pred), transform))
}

/// MPJPE after Procrustes alignment.
pub fn pa_mpjpe(pred: &AbsPose3D, gt: &AbsPose3D) -> Result<f64> {
    let (aligned, _) = procrustes_align(pred, gt)?;
    mpjpe(&aligned, gt, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mrpe {
    pub total: f64,
    /// Mean absolute error along x, y and z.
    pub per_axis: [f64; 3],
}

/// Mean root position error over paired roots.
pub fn mrpe(preds: &[Point3<f64>], gts: &[Point3<f64>]) -> Result<Mrpe> {
    if preds.len() != gts.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} predicted roots for {} groundtruth roots",
            preds.len(),
            gts.len()
        )));
    }
    if gts.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = gts.len() as f64;
    let diffs: Vec<Vector3<f64>> = preds.iter().zip(gts).map(|(p, g)| p - g).collect();
    let total = compensated_sum(diffs.iter().map(|d| d.norm())) / n;
    let per_axis = std::array::from_fn(|a| compensated_sum(diffs.iter().map(|d| d[a].abs())) / n);
    Ok(Mrpe { total, per_axis })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// `(prediction index, groundtruth index)` pairs.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

/// Greedy matching on root distance: repeatedly take the closest remaining
/// pair, skipping pairs farther than `radius`. Equal distances resolve to
/// the lower `(prediction, groundtruth)` index pair.
pub fn match_roots(pred_roots: &[Point3<f64>], gt_roots: &[Point3<f64>], radius: f64) -> Matching {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred_roots.iter().enumerate() {
        for (j, g) in gt_roots.iter().enumerate() {
            let d = (p - g).norm();
            if d <= radius {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_used = vec![false; pred_roots.len()];
    let mut gt_used = vec![false; gt_roots.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !pred_used[i] && !gt_used[j] {
            pred_used[i] = true;
            gt_used[j] = true;
            pairs.push((i, j));
        }
    }
    Matching {
        pairs,
        unmatched_gt: (0..gt_roots.len()).filter(|&j| !gt_used[j]).collect(),
        unmatched_pred: (0..pred_roots.len()).filter(|&i| !pred_used[i]).collect(),
    }
}

/// Matches the predictions of one image against its groundtruth persons.
pub fn match_persons(preds: &[PersonPrediction], gts: &[AbsPose3D], root_index: usize, radius: f64) -> Result<Matching> {
    let root = |p: &AbsPose3D| {
        p.joints
            .get(root_index)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("root index {root_index} out of range")))
    };
    let pred_roots = preds.iter().map(|p| root(&p.pose)).collect::<Result<Vec<_>>>()?;
    let gt_roots = gts.iter().map(root).collect::<Result<Vec<_>>>()?;
    Ok(match_roots(&pred_roots, &gt_roots, radius))
}

/// Joint-level hit counts for PCK.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PckCounts {
    pub correct: usize,
    pub total: usize,
}

impl PckCounts {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Counts joints whose error is at most `threshold` (the boundary counts as
/// correct). `unmatched_joints` are added to the total as misses.
pub fn pck_counts(
    pairs: &[(&AbsPose3D, &AbsPose3D)],
    threshold: f64,
    root_align: Option<usize>,
    unmatched_joints: usize,
) -> Result<PckCounts> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("PCK threshold must be positive, got {threshold}")));
    }
    let mut counts = PckCounts {
        correct: 0,
        total: unmatched_joints,
    };
    for (pred, gt) in pairs {
        let errors = joint_errors(pred, gt, root_align)?;
        counts.total += errors.len();
        counts.correct += errors.iter().filter(|&&e| e <= threshold).count();
    }
    Ok(counts)
}

/// Fraction of matched joints within `threshold`.
pub fn pck(pairs: &[(&AbsPose3D, &AbsPose3D)], threshold: f64, root_align: Option<usize>) -> Result<f64> {
    Ok(pck_counts(pairs, threshold, root_align, 0)?.fraction())
}

/// Like [`pck`], but every joint of an unmatched groundtruth person counts
/// as incorrect.
pub fn pck_all(
    pairs: &[(&AbsPose3D, &AbsPose3D)],
    unmatched_gt: &[&AbsPose3D],
    threshold: f64,
    root_align: Option<usize>,
) -> Result<f64> {
    let missing = unmatched_gt.iter().map(|g| g.len()).sum();
    Ok(pck_counts(pairs, threshold, root_align, missing)?.fraction())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PckCurve {
    points: Vec<(f64, f64)>,
}

impl PckCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter("PCK curve thresholds must be strictly increasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidParameter("PCK curve fractions must be non-decreasing".into()));
            }
        }
        if points.iter().any(|&(_, f)| !(0.0..=1.0).contains(&f)) {
            return Err(Error::InvalidParameter("PCK fractions must lie in [0, 1]".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

pub fn pck_curve(
    pairs: &[(&AbsPose3D, &AbsPose3D)],
    unmatched_joints: usize,
    thresholds: &[f64],
    root_align: Option<usize>,
) -> Result<PckCurve> {
    let points = thresholds
        .iter()
        .map(|&t| Ok((t, pck_counts(pairs, t, root_align, unmatched_joints)?.fraction())))
        .collect::<Result<Vec<_>>>()?;
    PckCurve::new(points)
}

/// Normalized area under a PCK curve: the mean fraction over its
/// threshold grid.
pub fn auc(curve: &PckCurve) -> Result<f64> {
    let n = curve.points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    Ok(compensated_sum(curve.points.iter().map(|p| p.1)) / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredRoot {
    pub image_id: u64,
    pub score: f64,
    pub root: Point3<f64>,
}

/// Average precision of root detections. Predictions are visited in
/// descending score order; each claims the nearest unclaimed groundtruth
/// root of its image if that root is strictly closer than `threshold`.
/// AP is the area under the all-point interpolated precision/recall curve.
pub fn ap_root(preds: &[ScoredRoot], gts: &[(u64, Point3<f64>)], threshold: f64) -> f64 {
    if gts.is_empty() || preds.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));

    let mut claimed = vec![false; gts.len()];
    let mut hits = Vec::with_capacity(preds.len());
    for &i in &order {
        let p = &preds[i];
        let nearest = gts
            .iter()
            .enumerate()
            .filter(|(j, (img, _))| *img == p.image_id && !claimed[*j])
            .map(|(j, (_, g))| ((p.root - g).norm(), j))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match nearest {
            Some((d, j)) if d < threshold => {
                claimed[j] = true;
                hits.push(true);
            }
            _ => hits.push(false),
        }
    }
    average_precision(&hits, gts.len())
}

/// All-point interpolated AP from a ranked hit list.
pub fn average_precision(ranked_hits: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(ranked_hits.len());
    let mut recall = Vec::with_capacity(ranked_hits.len());
    for (n, &hit) in ranked_hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        precision.push(tp as f64 / (n + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    // precision envelope, right to left
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub root_index: usize,
    pub pck_threshold: f64,
    pub auc_thresholds: Vec<f64>,
    pub match_radius: f64,
    pub ap_threshold: f64,
}

impl EvalConfig {
    pub fn new(root_index: usize) -> Self {
        Self {
            root_index,
            pck_threshold: DEFAULT_PCK_THRESHOLD,
            auc_thresholds: default_auc_thresholds(),
            match_radius: DEFAULT_MATCH_RADIUS,
            ap_threshold: DEFAULT_AP_THRESHOLD,
        }
    }
}

/// Metrics restricted to matched groundtruth persons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedMetrics {
    pub mpjpe: f64,
    pub pa_mpjpe: f64,
    pub mrpe: f64,
    pub mrpe_axes: [f64; 3],
    pub pck_rel: f64,
    pub pck_abs: f64,
    pub auc_rel: f64,
    pub pck_rel_curve: PckCurve,
}

/// Metrics over every groundtruth person; unmatched ones count as misses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllGtMetrics {
    pub pck_rel: f64,
    pub pck_abs: f64,
    pub auc_rel: f64,
    pub pck_rel_curve: PckCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub images: usize,
    pub groundtruth: usize,
    pub predictions: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when no groundtruth person was matched.
    pub matched: Option<MatchedMetrics>,
    pub all: AllGtMetrics,
    pub ap_root: f64,
    pub counts: SampleCounts,
}

/// Runs per-image matching and every metric in both evaluation modes.
pub fn evaluate(preds: &[PersonPrediction], gts: &[GroundTruthPerson], cfg: &EvalConfig) -> Result<EvalReport> {
    let joint_count = match gts.first() {
        Some(g) => g.pose.len(),
        None => return Err(Error::SchemaMismatch("no groundtruth persons".into())),
    };
    for (what, len) in gts
        .iter()
        .map(|g| ("groundtruth", g.pose.len()))
        .chain(preds.iter().map(|p| ("prediction", p.pose.len())))
    {
        if len != joint_count {
            return Err(Error::SchemaMismatch(format!(
                "{what} pose has {len} joints, expected {joint_count}"
            )));
        }
    }
    if cfg.root_index >= joint_count {
        return Err(Error::SchemaMismatch(format!(
            "root index {} out of range for {joint_count} joints",
            cfg.root_index
        )));
    }
    if let Some(p) = preds.iter().find(|p| !p.score.is_finite()) {
        return Err(Error::SchemaMismatch(format!("prediction score {} is not finite", p.score)));
    }

    let mut by_image: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image.entry(g.image_id).or_default().1.push(i);
    }
    for (i, p) in preds.iter().enumerate() {
        by_image.entry(p.image_id).or_default().0.push(i);
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut unmatched: Vec<usize> = Vec::new();
    for (pred_idx, gt_idx) in by_image.values() {
        let local_preds: Vec<PersonPrediction> = pred_idx.iter().map(|&i| preds[i].clone()).collect();
        let local_gts: Vec<AbsPose3D> = gt_idx.iter().map(|&j| gts[j].pose.clone()).collect();
        let m = match_persons(&local_preds, &local_gts, cfg.root_index, cfg.match_radius)?;
        pairs.extend(m.pairs.iter().map(|&(i, j)| (pred_idx[i], gt_idx[j])));
        unmatched.extend(m.unmatched_gt.iter().map(|&j| gt_idx[j]));
    }
    pairs.sort_by_key(|&(_, j)| j);
    unmatched.sort_unstable();

    let pose_pairs: Vec<(&AbsPose3D, &AbsPose3D)> = pairs.iter().map(|&(i, j)| (&preds[i].pose, &gts[j].pose)).collect();
    let missing_joints = unmatched.len() * joint_count;
    let root = Some(cfg.root_index);

    let all_curve = pck_curve(&pose_pairs, missing_joints, &cfg.auc_thresholds, root)?;
    let all = AllGtMetrics {
        pck_rel: pck_counts(&pose_pairs, cfg.pck_threshold, root, missing_joints)?.fraction(),
        pck_abs: pck_counts(&pose_pairs, cfg.pck_threshold, None, missing_joints)?.fraction(),
        auc_rel: auc(&all_curve)?,
        pck_rel_curve: all_curve,
    };

    let matched = if pose_pairs.is_empty() {
        None
    } else {
        let per_pair_mpjpe = pose_pairs
            .iter()
            .map(|(p, g)| mpjpe(p, g, root))
            .collect::<Result<Vec<_>>>()?;
        let per_pair_pa = pose_pairs
            .iter()
            .map(|(p, g)| pa_mpjpe(p, g))
            .collect::<Result<Vec<_>>>()?;
        let pred_roots: Vec<Point3<f64>> = pose_pairs.iter().map(|(p, _)| p.joints[cfg.root_index]).collect();
        let gt_roots: Vec<Point3<f64>> = pose_pairs.iter().map(|(_, g)| g.joints[cfg.root_index]).collect();
        let root_err = mrpe(&pred_roots, &gt_roots)?;
        let curve = pck_curve(&pose_pairs, 0, &cfg.auc_thresholds, root)?;
        Some(MatchedMetrics {
            mpjpe: compensated_mean(&per_pair_mpjpe).unwrap_or(0.0),
            pa_mpjpe: compensated_mean(&per_pair_pa).unwrap_or(0.0),
            mrpe: root_err.total,
            mrpe_axes: root_err.per_axis,
            pck_rel: pck(&pose_pairs, cfg.pck_threshold, root)?,
            pck_abs: pck(&pose_pairs, cfg.pck_threshold, None)?,
            auc_rel: auc(&curve)?,
            pck_rel_curve: curve,
        })
    };

    let scored: Vec<ScoredRoot> = preds
        .iter()
        .map(|p| ScoredRoot {
            image_id: p.image_id,
            score: p.score,
            root: p.pose.joints[cfg.root_index],
        })
        .collect();
    let gt_roots: Vec<(u64, Point3<f64>)> = gts.iter().map(|g| (g.image_id, g.pose.joints[cfg.root_index])).collect();

    Ok(EvalReport {
        matched,
        all,
        ap_root: ap_root(&scored, &gt_roots, cfg.ap_threshold),
        counts: SampleCounts {
            images: by_image.len(),
            groundtruth: gts.len(),
            predictions: preds.len(),
            matched: pairs.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(points: &[[f64; 3]]) -> AbsPose3D {
        AbsPose3D {
            joints: points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect(),
        }
    }

    fn body() -> AbsPose3D {
        pose(&[
            [0.0, 0.0, 3000.0],
            [0.0, -500.0, 3020.0],
            [-200.0, -450.0, 2980.0],
            [200.0, -450.0, 3040.0],
            [-100.0, 400.0, 3010.0],
            [100.0, 420.0, 2950.0],
        ])
    }

    #[test]
    fn mpjpe_examples() {
        let g = body();
        assert_eq!(mpjpe(&g, &g, Some(0)).unwrap(), 0.0);
        let shifted = AbsPose3D {
            joints: g.joints.iter().map(|p| p + Vector3::new(0.0, 0.0, 100.0)).collect(),
        };
        assert_eq!(mpjpe(&shifted, &g, Some(0)).unwrap(), 0.0);
        assert!((mpjpe(&shifted, &g, None).unwrap() - 100.0).abs() < 1e-9);

        let a = pose(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let b = pose(&[[30.0, 0.0, 0.0], [0.0, 0.0, 50.0]]);
        assert_eq!(mpjpe(&b, &a, None).unwrap(), 40.0);
        assert!(matches!(
            mpjpe(&a, &body(), None),
            Err(Error::JointCountMismatch { .. })
        ));
    }

    #[test]
    fn procrustes_identity() {
        let g = body();
        let (aligned, t) = procrustes_align(&g, &g).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!((t.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(mpjpe(&aligned, &g, None).unwrap() < 1e-9);
    }

    #[test]
    fn procrustes_degenerate_gt() {
        let g = pose(&[[1.0, 2.0, 3.0]; 4]);
        assert!(matches!(procrustes_align(&body().clone(), &g), Err(Error::JointCountMismatch { .. })));
        let p = pose(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(procrustes_align(&p, &g), Err(Error::DegenerateGt)));
    }

    #[test]
    fn procrustes_excludes_reflections() {
        let g = body();
        let mirrored = AbsPose3D {
            joints: g.joints.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect(),
        };
        let (_, t) = procrustes_align(&mirrored, &g).unwrap();
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!(t.scale > 0.0);
    }

    #[test]
    fn mrpe_examples() {
        let r = mrpe(&[Point3::new(0.0, 0.0, 1000.0)], &[Point3::new(0.0, 0.0, 1120.0)]).unwrap();
        assert_eq!(r.total, 120.0);
        assert_eq!(r.per_axis, [0.0, 0.0, 120.0]);
        let pts = [Point3::new(1.0, 2.0, 3.0), Point3::new(-4.0, 5.0, 600.0)];
        assert_eq!(mrpe(&pts, &pts).unwrap().total, 0.0);
        assert!(matches!(mrpe(&[], &[]), Err(Error::EmptySet)));
    }

    #[test]
    fn matching_examples() {
        let gt = [Point3::new(0.0, 0.0, 3000.0)];
        let m = match_roots(&[Point3::new(0.0, 0.0, 3000.0)], &gt, 500.0);
        assert_eq!(m.pairs, vec![(0, 0)]);
        let far = match_roots(&[Point3::new(0.0, 0.0, 13000.0)], &gt, 500.0);
        assert!(far.pairs.is_empty());
        assert_eq!(far.unmatched_gt, vec![0]);
        assert_eq!(far.unmatched_pred, vec![0]);
    }

    #[test]
    fn pck_examples() {
        let g = pose(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(pck(&[(&g, &g)], 150.0, None).unwrap(), 1.0);
        let p = pose(&[[100.0, 0.0, 0.0], [0.0, 200.0, 0.0]]);
        assert_eq!(pck(&[(&p, &g)], 150.0, None).unwrap(), 0.5);
        let edge = pose(&[[150.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(pck(&[(&edge, &g)], 150.0, None).unwrap(), 1.0);
        assert_eq!(pck_all(&[(&p, &g)], &[&g], 150.0, None).unwrap(), 0.25);
        assert!(pck(&[(&g, &g)], 0.0, None).is_err());
    }

    #[test]
    fn auc_examples() {
        let flat = |v: f64| PckCurve::new(default_auc_thresholds().into_iter().map(|t| (t, v)).collect()).unwrap();
        assert_eq!(auc(&flat(1.0)).unwrap(), 1.0);
        assert_eq!(auc(&flat(0.5)).unwrap(), 0.5);
        let one = PckCurve::new(vec![(5.0, 1.0)]).unwrap();
        assert!(matches!(auc(&one), Err(Error::TooFewPoints(1))));
        assert!(PckCurve::new(vec![(5.0, 0.5), (5.0, 0.6)]).is_err());
        assert!(PckCurve::new(vec![(5.0, 0.5), (10.0, 0.4)]).is_err());
    }

    #[test]
    fn ap_examples() {
        let gts = [(0, Point3::new(0.0, 0.0, 3000.0)), (0, Point3::new(1000.0, 0.0, 3000.0))];
        let perfect: Vec<ScoredRoot> = gts
            .iter()
            .map(|&(image_id, root)| ScoredRoot {
                image_id,
                score: 1.0,
                root,
            })
            .collect();
        assert_eq!(ap_root(&perfect, &gts, 250.0), 1.0);
        assert_eq!(ap_root(&[], &gts, 250.0), 0.0);
        // exactly 250 mm away is not "smaller than" the threshold
        let edge = [ScoredRoot {
            image_id: 0,
            score: 1.0,
            root: Point3::new(0.0, 0.0, 3250.0),
        }];
        assert_eq!(ap_root(&edge, &gts[..1], 250.0), 0.0);
    }

    #[test]
    fn ap_ignores_other_images() {
        let gts = [(1, Point3::new(0.0, 0.0, 3000.0))];
        let p = [ScoredRoot {
            image_id: 2,
            score: 0.9,
            root: Point3::new(0.0, 0.0, 3000.0),
        }];
        assert_eq!(ap_root(&p, &gts, 250.0), 0.0);
    }

    #[test]
    fn evaluate_identity() {
        let gts = vec![
            GroundTruthPerson { image_id: 0, pose: body() },
            GroundTruthPerson {
                image_id: 1,
                pose: body(),
            },
        ];
        let preds: Vec<PersonPrediction> = gts
            .iter()
            .map(|g| PersonPrediction {
                image_id: g.image_id,
                score: 1.0,
                pose: g.pose.clone(),
            })
            .collect();
        let r = evaluate(&preds, &gts, &EvalConfig::new(0)).unwrap();
        let m = r.matched.unwrap();
        assert_eq!((m.mpjpe, m.mrpe), (0.0, 0.0));
        assert!(m.pa_mpjpe < 1e-9);
        assert_eq!((m.pck_rel, m.pck_abs, m.auc_rel), (1.0, 1.0, 1.0));
        assert_eq!((r.all.pck_rel, r.all.pck_abs, r.all.auc_rel, r.ap_root), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.counts.matched, 2);
    }

    #[test]
    fn evaluate_without_predictions() {
        let gts = vec![GroundTruthPerson { image_id: 0, pose: body() }];
        let r = evaluate(&[], &gts, &EvalConfig::new(0)).unwrap();
        assert!(r.matched.is_none());
        assert_eq!((r.all.pck_rel, r.all.pck_abs, r.ap_root), (0.0, 0.0, 0.0));
    }

    #[test]
    fn evaluate_rejects_mixed_skeletons() {
        let gts = vec![GroundTruthPerson { image_id: 0, pose: body() }];
        let preds = vec![PersonPrediction {
            image_id: 0,
            score: 1.0,
            pose: pose(&[[0.0, 0.0, 1.0]]),
        }];
        assert!(matches!(
            evaluate(&preds, &gts, &EvalConfig::new(0)),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
