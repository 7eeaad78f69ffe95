//! A small regressor for the depth correction factor.
//!
//! Hand-crafted box and keypoint features stand in for image features. The
//! network is an affine map plus one tanh hidden layer; its output goes
//! through `exp`, so the predicted factor is always positive. Training
//! minimizes the mean absolute depth error `|gamma' * k - Z|`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::camera::{compute_k, BBox, CameraIntrinsics, Pose2D, SkeletonDef};
use crate::error::{Error, Result};
use crate::root::CorrectionFactor;

/// `[log(k / 1000), h / w, h / image_height, torso / h, 1]`.
pub const FEATURE_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Builds the feature vector for one detection.
///
/// `b` is the detection box before squaring. The torso feature is the
/// projected neck-to-root distance over the box height; it is 0 when no
/// keypoints are given or the skeleton has no `neck` joint.
pub fn featurize(
    b: &BBox,
    cam: &CameraIntrinsics,
    image_size: [f64; 2],
    keypoints: Option<(&Pose2D, &SkeletonDef)>,
    a_real: f64,
) -> Result<FeatureVector> {
    b.validate()?;
    if !(image_size[1] > 0.0) {
        return Err(Error::InvalidParameter("image height must be positive".into()));
    }
    let k = compute_k(&b.square_extend(), cam, a_real)?;
    let torso = match keypoints {
        Some((pose, skeleton)) => match skeleton.joint_index("neck") {
            Some(neck) if pose.len() == skeleton.joint_count() => {
                (pose.points[neck] - pose.points[skeleton.root_index]).norm() / b.h
            }
            Some(_) => {
                return Err(Error::JointCountMismatch {
                    expected: skeleton.joint_count(),
                    found: pose.len(),
                })
            }
            None => 0.0,
        },
        None => 0.0,
    };
    Ok(FeatureVector(vec![(k / 1000.0).ln(), b.h / b.w, b.h / image_size[1], torso, 1.0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorParams {
    /// Per-feature standardization applied before the network.
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub linear: Vec<f64>,
    /// `hidden_width` rows of `dim` weights.
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl RegressorParams {
    /// All weights zero, identity standardization; predicts exactly 1.
    pub fn zeros(dim: usize, hidden_width: usize) -> Self {
        Self {
            feature_mean: vec![0.0; dim],
            feature_scale: vec![1.0; dim],
            linear: vec![0.0; dim],
            hidden_weights: vec![vec![0.0; dim]; hidden_width],
            hidden_bias: vec![0.0; hidden_width],
            output_weights: vec![0.0; hidden_width],
            output_bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let h = self.hidden_width();
        let shapes_ok = self.feature_mean.len() == d
            && self.feature_scale.len() == d
            && self.hidden_weights.len() == h
            && self.hidden_weights.iter().all(|r| r.len() == d)
            && self.output_weights.len() == h;
        if !shapes_ok {
            return Err(Error::InvalidParameter("regressor parameter shapes are inconsistent".into()));
        }
        if !self.to_flat().iter().chain(&self.feature_mean).all(|v| v.is_finite())
            || !self.feature_scale.iter().all(|s| *s > 0.0 && s.is_finite())
        {
            return Err(Error::InvalidParameter("regressor parameters must be finite".into()));
        }
        Ok(())
    }

    /// Trainable weights in a fixed order: linear, hidden rows, hidden
    /// bias, output weights, output bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.linear.clone();
        self.hidden_weights.iter().for_each(|r| v.extend(r));
        v.extend(&self.hidden_bias);
        v.extend(&self.output_weights);
        v.push(self.output_bias);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let (d, h) = (self.dim(), self.hidden_width());
        assert_eq!(flat.len(), d + h * d + 2 * h + 1, "flat parameter length");
        let mut it = flat.iter().copied();
        self.linear.iter_mut().for_each(|w| *w = it.next().unwrap());
        for row in &mut self.hidden_weights {
            row.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.hidden_bias.iter_mut().for_each(|w| *w = it.next().unwrap());
        self.output_weights.iter_mut().for_each(|w| *w = it.next().unwrap());
        self.output_bias = it.next().unwrap();
    }

    fn standardize(&self, f: &FeatureVector) -> Result<Vec<f64>> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: f.len(),
            });
        }
        Ok(f.0
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    /// Network output (log of the correction factor) and hidden activations.
    fn forward(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let hidden: Vec<f64> = self
            .hidden_weights
            .iter()
            .zip(&self.hidden_bias)
            .map(|(row, b)| (dot(row, x) + b).tanh())
            .collect();
        (dot(&self.linear, x) + dot(&self.output_weights, &hidden) + self.output_bias, hidden)
    }

    /// Adds `scale * d(output)/d(params)` to `grad` (flat order).
    fn accumulate_output_grad(&self, x: &[f64], hidden: &[f64], scale: f64, grad: &mut [f64]) {
        let (d, h) = (self.dim(), self.hidden_width());
        for i in 0..d {
            grad[i] += scale * x[i];
        }
        let hw = d;
        let hb = d + h * d;
        let ow = hb + h;
        for r in 0..h {
            let back = scale * self.output_weights[r] * (1.0 - hidden[r] * hidden[r]);
            for i in 0..d {
                grad[hw + r * d + i] += back * x[i];
            }
            grad[hb + r] += back;
            grad[ow + r] += scale * hidden[r];
        }
        grad[ow + h] += scale;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Correction factor `exp(network(f))`.
pub fn predict_gamma(params: &RegressorParams, f: &FeatureVector) -> Result<CorrectionFactor> {
    let x = params.standardize(f)?;
    CorrectionFactor::new(params.forward(&x).0.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FeatureVector,
    /// True root depth, mm.
    pub target_depth: f64,
    /// `k` of the sample's squared box, mm.
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            hidden_width: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidParameter(
                "learning rate, epochs, batch size and hidden width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean absolute depth error `|gamma' * k - Z|` over `data` and its
/// subgradient with respect to the flat parameters. The subgradient of
/// `|r|` at `r = 0` is taken as 0.
pub fn loss_and_gradient(params: &RegressorParams, data: &[TrainingSample]) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut grad = vec![0.0; params.to_flat().len()];
    let mut loss = 0.0;
    let n = data.len() as f64;
    for s in data {
        let x = params.standardize(&s.features)?;
        let (out, hidden) = params.forward(&x);
        let gamma = out.exp();
        let residual = gamma * s.k - s.target_depth;
        loss += residual.abs();
        let sign = if residual > 0.0 {
            1.0
        } else if residual < 0.0 {
            -1.0
        } else {
            0.0
        };
        params.accumulate_output_grad(&x, &hidden, sign * gamma * s.k / n, &mut grad);
    }
    Ok((loss / n, grad))
}

/// Mean absolute depth error of `params` on `data`.
pub fn depth_l1(params: &RegressorParams, data: &[TrainingSample]) -> Result<f64> {
    Ok(loss_and_gradient(params, data)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRegressor {
    pub params: RegressorParams,
    /// Full-dataset loss before training and after every epoch.
    pub loss_trace: Vec<f64>,
}

fn feature_statistics(data: &[TrainingSample], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|i| data.iter().map(|s| s.features.0[i]).sum::<f64>() / n).collect();
    let scale = (0..dim)
        .map(|i| {
            let var = data.iter().map(|s| (s.features.0[i] - mean[i]).powi(2)).sum::<f64>() / n;
            var.sqrt()
        })
        .collect::<Vec<_>>();
    // constant features (the bias term) pass through unchanged
    let (mean, scale) = mean
        .into_iter()
        .zip(scale)
        .map(|(m, s)| if s > 1e-12 { (m, s) } else { (0.0, 1.0) })
        .unzip();
    (mean, scale)
}

/// Seeded mini-batch training with Adam-scaled subgradient steps.
pub fn train(data: &[TrainingSample], cfg: &TrainConfig) -> Result<TrainedRegressor> {
    cfg.validate()?;
    let first = data.first().ok_or(Error::EmptyDataset)?;
    let dim = first.features.len();
    if let Some(s) = data.iter().find(|s| s.features.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: s.features.len(),
        });
    }
    if data.iter().any(|s| !(s.k > 0.0) || !s.target_depth.is_finite() || !s.features.0.iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidParameter("training samples need finite features and positive k".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = RegressorParams::zeros(dim, cfg.hidden_width);
    let (mean, scale) = feature_statistics(data, dim);
    params.feature_mean = mean;
    params.feature_scale = scale;
    let init_scale = 1.0 / (dim as f64).sqrt();
    for row in &mut params.hidden_weights {
        row.iter_mut().for_each(|w| *w = init_scale * rng.sample::<f64, _>(StandardNormal));
    }
    params
        .output_weights
        .iter_mut()
        .for_each(|w| *w = 0.01 * rng.sample::<f64, _>(StandardNormal));

    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut theta = params.to_flat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut step = 0;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = vec![depth_l1(&params, data)?];
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (_, g) = loss_and_gradient(&params, &batch)?;
            step += 1;
            let bc1 = 1.0 - f64::powi(beta1, step);
            let bc2 = 1.0 - f64::powi(beta2, step);
            for i in 0..theta.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                theta[i] -= cfg.learning_rate * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            }
            params.set_flat(&theta);
        }
        loss_trace.push(depth_l1(&params, data)?);
    }
    Ok(TrainedRegressor { params, loss_trace })
}
