//! JSON documents exchanged by the command-line tools.
//!
//! Every document carries `"schema": "abspose/1"`. Lengths are millimeters
//! and image quantities pixels; no unit fields are stored. Output is
//! canonical: object keys sorted, floats written with 17 significant
//! digits, so identical inputs give byte-identical files.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Point2, Point3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::camera::{compose_absolute_pose, AbsPose3D, BBox, CameraIntrinsics, RelPose3D, RootCoord, SkeletonDef};
use crate::correction::{RegressorParams, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::{EvalConfig, EvalReport, GroundTruthPerson, PersonPrediction};

pub const SCHEMA_VERSION: &str = "abspose/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub id: u64,
    pub width: f64,
    pub height: f64,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtPersonEntry {
    pub image_id: u64,
    /// `[x, y, w, h]`, unsquared detection box.
    pub bbox: [f64; 4],
    pub joints_cam: Vec<[f64; 3]>,
    pub root_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtDocument {
    pub schema: String,
    pub images: Vec<ImageEntry>,
    pub persons: Vec<GtPersonEntry>,
    pub skeleton: SkeletonDef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredPersonEntry {
    pub image_id: u64,
    pub score: f64,
    /// `[x_R px, y_R px, Z_R mm]`.
    pub root: [f64; 3],
    /// `[x px, y px, z_rel mm]` per joint, original-image pixels.
    pub rel_pose: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredDocument {
    pub schema: String,
    pub persons: Vec<PredPersonEntry>,
}

/// 2D observations plus camera-axis root-relative 3D joints, the input of
/// the root fitting baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationEntry {
    pub image_id: u64,
    /// Index into the groundtruth document's `persons`.
    pub gt_index: usize,
    pub bbox: [f64; 4],
    pub joints_2d: Vec<[f64; 2]>,
    pub rel_cam: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationDocument {
    pub schema: String,
    pub persons: Vec<ObservationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub mode: String,
    #[serde(flatten)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub config: ReportConfig,
    #[serde(flatten)]
    pub report: EvalReport,
    /// PCK_rel curve of the selected mode as `[threshold, fraction]` rows.
    pub pck_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootfitReport {
    pub schema: String,
    pub method: String,
    pub count: usize,
    pub failures: usize,
    pub mrpe: f64,
    pub mrpe_axes: [f64; 3],
    pub ransac_iterations: usize,
    pub inlier_px: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema: String,
    pub a_real: f64,
    pub params: RegressorParams,
    pub train_config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

fn schema_err(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn check_version(v: &str) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(schema_err(format!("schema: expected \"{SCHEMA_VERSION}\", found \"{v}\"")));
    }
    Ok(())
}

fn all_finite<'a>(vals: impl IntoIterator<Item = &'a f64>) -> bool {
    vals.into_iter().all(|v| v.is_finite())
}

fn bbox_from(b: &[f64; 4]) -> Result<BBox> {
    BBox::new(b[0], b[1], b[2], b[3])
}

impl GtDocument {
    pub fn validate(&self) -> Result<()> {
        check_version(&self.schema)?;
        self.skeleton.validate().map_err(|e| schema_err(format!("skeleton: {e}")))?;
        let j = self.skeleton.joint_count();
        let mut ids = BTreeSet::new();
        for (i, img) in self.images.iter().enumerate() {
            if !ids.insert(img.id) {
                return Err(schema_err(format!("images[{i}].id: duplicate image id {}", img.id)));
            }
            if !(img.width > 0.0 && img.height > 0.0) {
                return Err(schema_err(format!("images[{i}]: width and height must be positive")));
            }
            img.intrinsics
                .validate()
                .map_err(|e| schema_err(format!("images[{i}].intrinsics: {e}")))?;
        }
        for (i, p) in self.persons.iter().enumerate() {
            if !ids.contains(&p.image_id) {
                return Err(schema_err(format!(
                    "persons[{i}].image_id: image {} does not exist",
                    p.image_id
                )));
            }
            bbox_from(&p.bbox).map_err(|e| schema_err(format!("persons[{i}].bbox: {e}")))?;
            if p.joints_cam.len() != j {
                return Err(schema_err(format!(
                    "persons[{i}].joints_cam: {} joints, skeleton has {j}",
                    p.joints_cam.len()
                )));
            }
            if !all_finite(p.joints_cam.iter().flatten()) {
                return Err(schema_err(format!("persons[{i}].joints_cam: coordinates must be finite")));
            }
            if p.root_index != self.skeleton.root_index {
                return Err(schema_err(format!(
                    "persons[{i}].root_index: {} differs from skeleton root {}",
                    p.root_index, self.skeleton.root_index
                )));
            }
        }
        Ok(())
    }

    pub fn image(&self, id: u64) -> Option<&ImageEntry> {
        self.images.iter().find(|img| img.id == id)
    }

    pub fn person_pose(&self, index: usize) -> AbsPose3D {
        AbsPose3D {
            joints: self.persons[index]
                .joints_cam
                .iter()
                .map(|p| Point3::new(p[0], p[1], p[2]))
                .collect(),
        }
    }

    pub fn groundtruth_persons(&self) -> Vec<GroundTruthPerson> {
        (0..self.persons.len())
            .map(|i| GroundTruthPerson {
                image_id: self.persons[i].image_id,
                pose: self.person_pose(i),
            })
            .collect()
    }

    pub fn person_bbox(&self, index: usize) -> Result<BBox> {
        bbox_from(&self.persons[index].bbox)
    }
}

impl PredDocument {
    pub fn validate(&self) -> Result<()> {
        check_version(&self.schema)?;
        let j = self.persons.first().map(|p| p.rel_pose.len());
        for (i, p) in self.persons.iter().enumerate() {
            if !(0.0..=1.0).contains(&p.score) {
                return Err(schema_err(format!("persons[{i}].score: {} is outside [0, 1]", p.score)));
            }
            if Some(p.rel_pose.len()) != j {
                return Err(schema_err(format!(
                    "persons[{i}].rel_pose: {} joints, expected {}",
                    p.rel_pose.len(),
                    j.unwrap_or(0)
                )));
            }
            if !(p.root[2] > 0.0) || !all_finite(p.root.iter().chain(p.rel_pose.iter().flatten())) {
                return Err(schema_err(format!(
                    "persons[{i}]: root depth must be positive and coordinates finite"
                )));
            }
        }
        Ok(())
    }

    /// Composes every prediction into a camera-centered pose using the
    /// intrinsics of its image in `gt`.
    pub fn to_predictions(&self, gt: &GtDocument) -> Result<Vec<PersonPrediction>> {
        self.persons
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let img = gt.image(p.image_id).ok_or_else(|| {
                    Error::SchemaMismatch(format!("persons[{i}] refers to unknown image {}", p.image_id))
                })?;
                let rel = RelPose3D {
                    joints: p.rel_pose.clone(),
                };
                let root = RootCoord {
                    x: p.root[0],
                    y: p.root[1],
                    z: p.root[2],
                };
                Ok(PersonPrediction {
                    image_id: p.image_id,
                    score: p.score,
                    pose: compose_absolute_pose(&rel, &root, &img.intrinsics)?,
                })
            })
            .collect()
    }
}

impl ObservationDocument {
    pub fn validate(&self, gt: &GtDocument) -> Result<()> {
        check_version(&self.schema)?;
        let j = gt.skeleton.joint_count();
        for (i, p) in self.persons.iter().enumerate() {
            let Some(target) = gt.persons.get(p.gt_index) else {
                return Err(Error::SchemaMismatch(format!(
                    "persons[{i}].gt_index: {} out of range",
                    p.gt_index
                )));
            };
            if target.image_id != p.image_id {
                return Err(Error::SchemaMismatch(format!(
                    "persons[{i}]: image {} differs from groundtruth image {}",
                    p.image_id, target.image_id
                )));
            }
            if p.joints_2d.len() != j || p.rel_cam.len() != j {
                return Err(Error::SchemaMismatch(format!(
                    "persons[{i}]: expected {j} joints, found {} 2D and {} 3D",
                    p.joints_2d.len(),
                    p.rel_cam.len()
                )));
            }
            bbox_from(&p.bbox).map_err(|e| schema_err(format!("persons[{i}].bbox: {e}")))?;
            if !all_finite(p.joints_2d.iter().flatten().chain(p.rel_cam.iter().flatten())) {
                return Err(schema_err(format!("persons[{i}]: coordinates must be finite")));
            }
        }
        Ok(())
    }
}

impl ObservationEntry {
    pub fn points_2d(&self) -> Vec<Point2<f64>> {
        self.joints_2d.iter().map(|p| Point2::new(p[0], p[1])).collect()
    }
}

impl ModelDocument {
    pub fn validate(&self) -> Result<()> {
        check_version(&self.schema)?;
        if !(self.a_real > 0.0) {
            return Err(schema_err("a_real: must be positive"));
        }
        self.params.validate().map_err(|e| schema_err(format!("params: {e}")))
    }
}

/// Serializes with sorted keys and 17-significant-digit floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter::default());
    tree.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Pretty printer whose floats use `{:.16e}`.
#[derive(Default)]
struct CanonicalFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.inner.$name(writer $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// Writes `contents` through a temporary file in the destination directory
/// followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_atomic(path, to_canonical_json(value)?.as_bytes())
}

/// Parses JSON text into `T`. Syntax errors report line and column,
/// structural errors the offending field path.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let tree: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    serde_path_to_error::deserialize(tree).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            schema_err(inner.to_string())
        } else {
            schema_err(format!("{path}: {inner}"))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text)
}

pub fn load_gt(path: &Path) -> Result<GtDocument> {
    let doc: GtDocument = read_json(path)?;
    doc.validate()?;
    Ok(doc)
}

pub fn load_pred(path: &Path) -> Result<PredDocument> {
    let doc: PredDocument = read_json(path)?;
    doc.validate()?;
    Ok(doc)
}

pub fn load_observations(path: &Path, gt: &GtDocument) -> Result<ObservationDocument> {
    let doc: ObservationDocument = read_json(path)?;
    doc.validate(gt)?;
    Ok(doc)
}

pub fn load_model(path: &Path) -> Result<ModelDocument> {
    let doc: ModelDocument = read_json(path)?;
    doc.validate()?;
    Ok(doc)
}

pub fn write_report(report: &ReportDocument, path: &Path) -> Result<()> {
    write_json(report, path)
}
