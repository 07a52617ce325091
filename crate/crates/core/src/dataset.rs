//! Scene manifests, supervision bundles and synthetic fixture scenes.
//!
//! # `manifest.json` (`hatch-manifest/1`)
//!
//! ```json
//! {
//!   "schema": "hatch-manifest/1",
//!   "scene_id": "desk-0",
//!   "views": [
//!     {
//!       "image": "rgb_0.png",
//!       "depth": "depth_0.pfm",
//!       "intrinsics": {"fx": 24.0, "fy": 24.0, "cx": 16.0, "cy": 12.0, "width": 32, "height": 24},
//!       "pose": [1, 0, 0, 0,  0, 1, 0, 0,  0, 0, 1, 0,  0, 0, 0, 1]
//!     }
//!   ]
//! }
//! ```
//!
//! `pose` is the row-major camera-to-world matrix in meters; depth paths are
//! relative to the manifest's directory and hold z-depth in meters. `image`
//! is optional and never read.
//!
//! # Bundle directory
//!
//! `manifest.json` (copy), `config.json` (generation snapshot), `actions.json`
//! (canonical teacher annotations), one `S_{i}_{j}.hsup` per pair `i < j`, and
//! `degenerate.json` only when some pair could not be fully processed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{compile, CompileTolerances};
use crate::annotations::{parse_annotations, required_pairs, serialize_annotations, ActionAnnotationSet};
use crate::correspondence::{
    directional_overlap_strided, symmetric_overlap, CorrespondenceConfig, CorrespondenceMatrix,
};
use crate::error::{Error, Result};
use crate::geometry::{relative_pose, yaw_rotation, CameraView, DepthMap, Intrinsics, Pose, RelativePose};
use crate::pfm;

pub const MANIFEST_SCHEMA: &str = "hatch-manifest/1";
pub const BUNDLE_SCHEMA: &str = "hatch-bundle/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub depth: String,
    pub intrinsics: Intrinsics,
    pub pose: [f64; 16],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub schema: String,
    pub scene_id: String,
    pub views: Vec<ViewEntry>,
}

/// A validated scene with every depth raster loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneManifest {
    pub file: ManifestFile,
    pub views: Vec<CameraView>,
}

impl SceneManifest {
    pub fn scene_id(&self) -> &str {
        &self.file.scene_id
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Validates `file` against already loaded depth rasters.
    pub fn from_parts(file: ManifestFile, depths: Vec<DepthMap>) -> Result<Self> {
        if file.schema != MANIFEST_SCHEMA {
            return Err(Error::Manifest(format!(
                "unsupported schema {:?}, expected {MANIFEST_SCHEMA:?}",
                file.schema
            )));
        }
        if file.views.is_empty() {
            return Err(Error::Manifest("scene has no views".into()));
        }
        if depths.len() != file.views.len() {
            return Err(Error::Manifest(format!(
                "{} depth rasters for {} views",
                depths.len(),
                file.views.len()
            )));
        }
        let views = file
            .views
            .iter()
            .zip(depths)
            .enumerate()
            .map(|(k, (entry, depth))| {
                let at = |e: Error| Error::ManifestView {
                    view: k,
                    reason: e.to_string(),
                };
                entry.intrinsics.validate().map_err(at)?;
                let pose = Pose::from_row_major(&entry.pose).map_err(at)?;
                CameraView::new(entry.intrinsics, pose, depth, file.scene_id.clone()).map_err(at)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneManifest { file, views })
    }
}

/// Reads and fully validates a manifest and its depth rasters.
pub fn load_manifest(path: &Path) -> Result<SceneManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let depths = file
        .views
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let p = base.join(&v.depth);
            let bytes = fs::read(&p).map_err(|cause| Error::ViewIo {
                view: k,
                path: p.clone(),
                cause,
            })?;
            pfm::decode(&bytes).map_err(|e| Error::ManifestView {
                view: k,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SceneManifest::from_parts(file, depths)
}

/// Everything that determines a bundle besides the scene itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub schema: String,
    pub correspondence: CorrespondenceConfig,
    pub compile: CompileTolerances,
    /// Pixel stride for overlap estimation; 1 uses every pixel.
    pub stride: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            schema: BUNDLE_SCHEMA.to_string(),
            correspondence: CorrespondenceConfig::default(),
            compile: CompileTolerances::default(),
            stride: 1,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != BUNDLE_SCHEMA {
            return Err(Error::Format(format!(
                "bundle schema {:?} is not {BUNDLE_SCHEMA:?}",
                self.schema
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        self.correspondence.validate()?;
        self.compile.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegeneratePair {
    pub from: usize,
    pub to: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionBundle {
    pub manifest: ManifestFile,
    pub config: GenerationConfig,
    /// Correspondence matrices for every pair `i < j`, at f32 precision.
    pub matrices: BTreeMap<(usize, usize), CorrespondenceMatrix>,
    /// Teacher plans, magnitudes rounded to the canonical text precision.
    pub teacher: ActionAnnotationSet,
    pub degenerate: Vec<DegeneratePair>,
}

impl SupervisionBundle {
    pub fn scene_id(&self) -> &str {
        &self.manifest.scene_id
    }
}

struct PairOutput {
    pair: (usize, usize),
    s: CorrespondenceMatrix,
    plan: std::result::Result<crate::action::ActionPlan, String>,
    missing_depth: bool,
}

/// Correspondence matrices and teacher plans for all view pairs.
///
/// Pairs whose relative pose has too much roll get no teacher plan and are
/// listed in `degenerate`, as are pairs where a view has no valid depth.
pub fn build_supervision(scene: &SceneManifest, cfg: &GenerationConfig) -> Result<SupervisionBundle> {
    cfg.validate()?;
    let outputs = required_pairs(scene.len())
        .into_par_iter()
        .map(|(i, j)| {
            let (x, y) = (&scene.views[i], &scene.views[j]);
            let m_xy = directional_overlap_strided(x, y, &cfg.correspondence, cfg.stride)?;
            let m_yx = directional_overlap_strided(y, x, &cfg.correspondence, cfg.stride)?;
            let s = symmetric_overlap(&m_xy, &m_yx)?.quantized();
            let rel = relative_pose(x.pose(), y.pose());
            let plan = compile(&rel, &cfg.compile)
                .map(|p| p.rounded())
                .map_err(|e| e.to_string());
            let missing_depth = x.depth().valid_count() == 0 || y.depth().valid_count() == 0;
            Ok(PairOutput {
                pair: (i, j),
                s,
                plan,
                missing_depth,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut matrices = BTreeMap::new();
    let mut teacher = ActionAnnotationSet::new();
    let mut degenerate = Vec::new();
    for out in outputs {
        let (from, to) = out.pair;
        matrices.insert(out.pair, out.s);
        match out.plan {
            Ok(plan) => teacher.insert(from, to, plan)?,
            Err(reason) => degenerate.push(DegeneratePair { from, to, reason }),
        }
        if out.missing_depth {
            degenerate.push(DegeneratePair {
                from,
                to,
                reason: "a view has no valid depth".into(),
            });
        }
    }
    Ok(SupervisionBundle {
        manifest: scene.file.clone(),
        config: cfg.clone(),
        matrices,
        teacher,
        degenerate,
    })
}

/// Teacher plans alone, as written to a bundle's `actions.json`. Pairs that
/// cannot be compiled are returned in the second list.
pub fn teacher_annotations(
    scene: &SceneManifest,
    tol: &CompileTolerances,
) -> Result<(ActionAnnotationSet, Vec<DegeneratePair>)> {
    tol.validate()?;
    let mut teacher = ActionAnnotationSet::new();
    let mut degenerate = Vec::new();
    for (i, j) in required_pairs(scene.len()) {
        let rel = relative_pose(scene.views[i].pose(), scene.views[j].pose());
        match compile(&rel, tol) {
            Ok(plan) => teacher.insert(i, j, plan.rounded())?,
            Err(e) => degenerate.push(DegeneratePair {
                from: i,
                to: j,
                reason: e.to_string(),
            }),
        }
    }
    Ok((teacher, degenerate))
}

fn matrix_file_name(i: usize, j: usize) -> String {
    format!("S_{i}_{j}.hsup")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("plain data serializes");
    s.push(b'\n');
    s
}

/// Writes the bundle into a sibling staging directory, then renames it to
/// `dir`, replacing any previous bundle there.
pub fn write_bundle(bundle: &SupervisionBundle, dir: &Path) -> Result<()> {
    let name = dir
        .file_name()
        .ok_or_else(|| Error::Config(format!("bundle path {} has no name", dir.display())))?
        .to_string_lossy()
        .into_owned();
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let staging = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;

    write_file(&staging.join("manifest.json"), &pretty(&bundle.manifest))?;
    write_file(&staging.join("config.json"), &pretty(&bundle.config))?;
    write_file(&staging.join("actions.json"), serialize_annotations(&bundle.teacher).as_bytes())?;
    for (&(i, j), s) in &bundle.matrices {
        write_file(&staging.join(matrix_file_name(i, j)), &s.to_hsup_bytes())?;
    }
    if !bundle.degenerate.is_empty() {
        write_file(&staging.join("degenerate.json"), &pretty(&bundle.degenerate))?;
    }

    let old = parent.join(format!(".{name}.old-{}", std::process::id()));
    let replaced = dir.exists();
    if replaced {
        fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))?;
    if replaced {
        fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_bundle(dir: &Path) -> Result<SupervisionBundle> {
    let manifest: ManifestFile = read_json(&dir.join("manifest.json"))?;
    if manifest.schema != MANIFEST_SCHEMA {
        return Err(Error::Format(format!("manifest schema {:?}", manifest.schema)));
    }
    let config: GenerationConfig = read_json(&dir.join("config.json"))?;
    config.validate()?;
    let actions_path = dir.join("actions.json");
    let text = String::from_utf8(read_file(&actions_path)?)
        .map_err(|_| Error::Format(format!("{} is not UTF-8", actions_path.display())))?;
    let teacher = parse_annotations(&text)?;
    let mut matrices = BTreeMap::new();
    for (i, j) in required_pairs(manifest.views.len()) {
        let path = dir.join(matrix_file_name(i, j));
        let s = CorrespondenceMatrix::from_hsup_bytes(&read_file(&path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if s.n() != config.correspondence.n {
            return Err(Error::Format(format!(
                "{} has n={}, config says {}",
                path.display(),
                s.n(),
                config.correspondence.n
            )));
        }
        matrices.insert((i, j), s);
    }
    let degenerate_path = dir.join("degenerate.json");
    let degenerate = if degenerate_path.exists() {
        read_json(&degenerate_path)?
    } else {
        Vec::new()
    };
    Ok(SupervisionBundle {
        manifest,
        config,
        matrices,
        teacher,
        degenerate,
    })
}

/// Procedural parameters for a desk-scale test scene: a back wall, a floor
/// and a few boxes, observed by level cameras that step sideways, forward,
/// up and around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub scene_id: String,
    pub views: usize,
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels (square pixels).
    pub focal_px: f64,
    /// Distance from the first camera to the back wall.
    pub wall_distance_m: f64,
    /// Floor height below the first camera (world +Y).
    pub floor_drop_m: f64,
    pub boxes: usize,
    pub yaw_step_deg: f64,
    pub lateral_step_m: f64,
    pub forward_step_m: f64,
    pub vertical_step_m: f64,
    /// Uniform pose noise: degrees for yaw, meters per axis for position.
    pub jitter: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            scene_id: "synth".to_string(),
            views: 3,
            width: 32,
            height: 24,
            focal_px: 28.0,
            wall_distance_m: 4.0,
            floor_drop_m: 1.2,
            boxes: 3,
            yaw_step_deg: 12.0,
            lateral_step_m: 0.25,
            forward_step_m: 0.3,
            vertical_step_m: 0.05,
            jitter: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SceneBox {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl SceneBox {
    fn hit(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for a in 0..3 {
            if d[a] == 0.0 {
                if o[a] < self.min[a] || o[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let (mut n, mut f) = ((self.min[a] - o[a]) / d[a], (self.max[a] - o[a]) / d[a]);
            if n > f {
                std::mem::swap(&mut n, &mut f);
            }
            t0 = t0.max(n);
            t1 = t1.min(f);
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

/// A synthetic scene with its exact pairwise relative poses.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub manifest: SceneManifest,
    pub relative_poses: BTreeMap<(usize, usize), RelativePose>,
}

/// Renders a deterministic scene for `seed`.
pub fn synth_scene(spec: &SynthSpec, seed: u64) -> Result<SynthScene> {
    if spec.views == 0 {
        return Err(Error::Config("synthetic scene needs at least one view".into()));
    }
    let intrinsics = Intrinsics::new(
        spec.focal_px,
        spec.focal_px,
        spec.width as f64 / 2.0,
        spec.height as f64 / 2.0,
        spec.width,
        spec.height,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |scale: f64| {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        u * scale
    };

    let mut boxes = Vec::with_capacity(spec.boxes);
    for _ in 0..spec.boxes {
        let size = Vector3::new(0.3 + noise(0.1).abs(), 0.3 + noise(0.2).abs(), 0.3 + noise(0.1).abs());
        let center_x = noise(1.0);
        let center_z = spec.wall_distance_m * (0.55 + 0.2 * noise(1.0));
        let bottom = spec.floor_drop_m;
        boxes.push(SceneBox {
            min: Vector3::new(center_x - size.x / 2.0, bottom - size.y, center_z - size.z / 2.0),
            max: Vector3::new(center_x + size.x / 2.0, bottom, center_z + size.z / 2.0),
        });
    }

    let mut poses = Vec::with_capacity(spec.views);
    for k in 0..spec.views {
        let kf = k as f64;
        let yaw = kf * spec.yaw_step_deg + if k == 0 { 0.0 } else { noise(spec.jitter) };
        let jitter = if k == 0 { 0.0 } else { spec.jitter };
        let position = Vector3::new(
            kf * spec.lateral_step_m + noise(jitter),
            -kf * spec.vertical_step_m + noise(jitter),
            kf * spec.forward_step_m + noise(jitter),
        );
        poses.push(Pose::new(yaw_rotation(yaw), position)?);
    }

    let mut views = Vec::with_capacity(spec.views);
    let mut entries = Vec::with_capacity(spec.views);
    let mut depths = Vec::with_capacity(spec.views);
    for (k, pose) in poses.iter().enumerate() {
        let mut values = Vec::with_capacity(spec.width * spec.height);
        for v in 0..spec.height {
            for u in 0..spec.width {
                let ray = Vector3::new(
                    (u as f64 - intrinsics.cx) / intrinsics.fx,
                    (v as f64 - intrinsics.cy) / intrinsics.fy,
                    1.0,
                );
                let o = *pose.translation();
                let d = pose.rotation() * ray;
                let mut best = f64::INFINITY;
                if d.z > 0.0 {
                    best = best.min((spec.wall_distance_m - o.z) / d.z);
                }
                if d.y > 0.0 {
                    best = best.min((spec.floor_drop_m - o.y) / d.y);
                }
                for b in &boxes {
                    if let Some(t) = b.hit(&o, &d) {
                        best = best.min(t);
                    }
                }
                // ray parameter equals z-depth because the ray has unit z
                values.push(if best.is_finite() && best > 0.0 { best as f32 } else { 0.0 });
            }
        }
        let depth = DepthMap::new(spec.width, spec.height, values)?;
        entries.push(ViewEntry {
            image: None,
            depth: format!("depth_{k}.pfm"),
            intrinsics,
            pose: pose.to_row_major(),
        });
        depths.push(depth.clone());
        views.push(CameraView::new(intrinsics, *pose, depth, spec.scene_id.clone())?);
    }
    let file = ManifestFile {
        schema: MANIFEST_SCHEMA.to_string(),
        scene_id: spec.scene_id.clone(),
        views: entries,
    };
    let manifest = SceneManifest::from_parts(file, depths)?;
    debug_assert_eq!(manifest.views, views);
    let relative_poses = required_pairs(spec.views)
        .into_iter()
        .map(|(i, j)| ((i, j), relative_pose(&poses[i], &poses[j])))
        .collect();
    Ok(SynthScene {
        manifest,
        relative_poses,
    })
}

/// Writes `manifest.json` and the depth rasters of a scene into `dir`.
pub fn write_scene(scene: &SceneManifest, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (entry, view) in scene.file.views.iter().zip(&scene.views) {
        pfm::write(&dir.join(&entry.depth), view.depth())?;
    }
    let path = dir.join("manifest.json");
    write_file(&path, &pretty(&scene.file))?;
    Ok(path)
}
