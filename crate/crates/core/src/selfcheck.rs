//! Seeded property checks over the library's round-trip and bound invariants.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::{compile, execute, ActionKind, ActionPlan, AtomicAction, CompileTolerances};
use crate::annotations::{parse_annotations, serialize_annotations, ActionAnnotationSet};
use crate::correspondence::{
    correspondence_loss, directional_overlap, symmetric_overlap, target_distribution,
    CorrespondenceConfig, CorrespondenceMatrix, PatchFeatureSet,
};
use crate::dataset::{synth_scene, SynthSpec};
use crate::geometry::{
    pitch_rotation, project, relative_pose, unproject, yaw_rotation, CameraView, DepthMap,
    Intrinsics, Pose, RelativePose,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub property: &'static str,
    pub pass: bool,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelfCheckOptions {
    pub seed: u64,
    pub trials: usize,
    /// Corrupts compiled plans so the round-trip property must fail.
    pub inject_fault: bool,
}

fn result(property: &'static str, trials: usize, max_error: f64, tolerance: f64) -> PropertyResult {
    PropertyResult {
        property,
        pass: max_error.is_finite() && max_error <= tolerance,
        trials,
        max_error,
        tolerance,
    }
}

fn random_motion(rng: &mut ChaCha8Rng) -> RelativePose {
    let yaw = rng.gen_range(-179.0..=179.0);
    let pitch = rng.gen_range(-80.0..=80.0);
    let t = loop {
        let v = Vector3::new(rng.gen_range(-5.0..=5.0), rng.gen_range(-5.0..=5.0), rng.gen_range(-5.0..=5.0));
        if v.norm() <= 5.0 {
            break v;
        }
    };
    RelativePose::from_camera_motion(yaw, pitch, t)
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    let r = yaw_rotation(rng.gen_range(-180.0..180.0)) * pitch_rotation(rng.gen_range(-89.0..89.0))
        * crate::geometry::roll_rotation(rng.gen_range(-180.0..180.0));
    let t = Vector3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
    Pose::new(r, t).expect("composed rotations are orthonormal")
}

fn compile_roundtrip(rng: &mut ChaCha8Rng, trials: usize, fault: bool) -> [PropertyResult; 2] {
    let tol = CompileTolerances::default();
    let (mut max_t, mut max_r) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let rel = random_motion(rng);
        let mut plan = match compile(&rel, &tol) {
            Ok(p) => p,
            Err(_) => {
                max_t = f64::INFINITY;
                continue;
            }
        };
        if fault {
            let mut actions = plan.actions().to_vec();
            actions.push(AtomicAction::new(ActionKind::TurnRight, 1.0).unwrap());
            plan = ActionPlan::new(actions);
        }
        let back = execute(&plan);
        max_t = max_t.max(back.translation_error(&rel));
        max_r = max_r.max(back.rotation_error_deg(&rel));
    }
    [
        result("compile_roundtrip_translation_m", trials, max_t, 1e-6),
        result("compile_roundtrip_rotation_deg", trials, max_r, 1e-4),
    ]
}

fn pose_inverse(rng: &mut ChaCha8Rng, trials: usize) -> PropertyResult {
    let mut max_err = 0.0f64;
    for _ in 0..trials {
        let (a, b) = (random_pose(rng), random_pose(rng));
        let round = relative_pose(&a, &b).compose(&relative_pose(&b, &a));
        let err = (round.rotation() - Matrix3::identity())
            .abs()
            .max()
            .max(round.translation().abs().max());
        max_err = max_err.max(err);
    }
    result("relative_pose_inverse", trials, max_err, 1e-9)
}

fn reprojection(rng: &mut ChaCha8Rng, trials: usize) -> PropertyResult {
    let mut max_err = 0.0f64;
    for _ in 0..trials {
        let (w, h) = (rng.gen_range(1..200usize), rng.gen_range(1..200usize));
        let k = Intrinsics::new(
            rng.gen_range(10.0..500.0),
            rng.gen_range(10.0..500.0),
            rng.gen_range(0.0..w as f64),
            rng.gen_range(0.0..h as f64),
            w,
            h,
        )
        .unwrap();
        let depth: f32 = rng.gen_range(0.05..20.0);
        let view = CameraView::new(k, Pose::identity(), DepthMap::constant(w, h, depth), "w").unwrap();
        let (u, v) = (rng.gen_range(0..w) as i64, rng.gen_range(0..h) as i64);
        let p = unproject(u, v, &view).unwrap().expect("constant positive depth");
        let (px, z) = project(&p, &k).expect("point in front of camera");
        let err = (px.x - u as f64).abs().max((px.y - v as f64).abs());
        max_err = max_err.max(err).max((z - depth as f64).abs() * 1e3);
    }
    result("project_unproject_px", trials, max_err, 1e-9)
}

fn annotation_roundtrip(rng: &mut ChaCha8Rng, trials: usize) -> PropertyResult {
    let mut failures = 0usize;
    for _ in 0..trials {
        let views = rng.gen_range(1..6usize);
        let mut set = ActionAnnotationSet::new();
        for (i, j) in crate::annotations::required_pairs(views) {
            if rng.gen_bool(0.2) {
                continue;
            }
            let plan: ActionPlan = (0..rng.gen_range(0..6))
                .map(|_| {
                    let kind = ActionKind::ALL[rng.gen_range(0..ActionKind::ALL.len())];
                    AtomicAction::new(kind, rng.gen_range(0..100_000) as f64 / 1000.0).unwrap()
                })
                .collect();
            set.insert(i, j, plan).unwrap();
        }
        if parse_annotations(&serialize_annotations(&set)).ok().as_ref() != Some(&set) {
            failures += 1;
        }
    }
    result("annotation_roundtrip_failures", trials, failures as f64, 0.0)
}

fn cross_entropy_bound(rng: &mut ChaCha8Rng, trials: usize) -> PropertyResult {
    // worst violation of CE(p, q) >= H(p), per direction and pair
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.gen_range(1..4usize);
        let side = n * n;
        let s = CorrespondenceMatrix::from_entries(n, (0..side * side).map(|_| rng.gen_range(0.0..=1.0)).collect())
            .unwrap();
        let dim = rng.gen_range(1..8usize);
        let mut feats = || {
            PatchFeatureSet::new(side, dim, (0..side * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let (fx, fy) = (feats(), feats());
        let cfg = CorrespondenceConfig {
            n,
            literal_mode: true,
            ..CorrespondenceConfig::default()
        };
        let loss = correspondence_loss(&s, &fx, &fy, &cfg).unwrap();
        let st = s.transpose();
        let h = |m: &CorrespondenceMatrix| {
            (0..side).map(|i| target_distribution(m, i, cfg.tau_target).entropy()).sum::<f64>() / side as f64
        };
        worst = worst.max(h(&s) - loss.x_to_y).max(h(&st) - loss.y_to_x);
    }
    result("cross_entropy_minus_entropy_violation", trials, worst, 1e-9)
}

fn overlap_symmetry(seed: u64, scenes: usize) -> PropertyResult {
    let mut worst = 0.0f64;
    let spec = SynthSpec {
        views: 2,
        width: 16,
        height: 16,
        focal_px: 14.0,
        ..SynthSpec::default()
    };
    let cfg = CorrespondenceConfig::default();
    for k in 0..scenes {
        let scene = synth_scene(&spec, seed.wrapping_add(k as u64)).unwrap();
        let (x, y) = (&scene.manifest.views[0], &scene.manifest.views[1]);
        let (mxy, myx) = (directional_overlap(x, y, &cfg).unwrap(), directional_overlap(y, x, &cfg).unwrap());
        let s_xy = symmetric_overlap(&mxy, &myx).unwrap();
        let s_yx = symmetric_overlap(&myx, &mxy).unwrap().transpose();
        for (a, b) in s_xy.entries().iter().zip(s_yx.entries()) {
            worst = worst.max((a - b).abs());
        }
    }
    result("overlap_symmetry", scenes, worst, 0.0)
}

/// Runs every property; `trials` random cases each (scene-level checks use
/// one scene per hundred trials, at least one).
pub fn run(opts: &SelfCheckOptions) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let t = opts.trials;
    let mut out = Vec::new();
    out.extend(compile_roundtrip(&mut rng, t, opts.inject_fault));
    out.push(pose_inverse(&mut rng, t));
    out.push(reprojection(&mut rng, t));
    out.push(annotation_roundtrip(&mut rng, t));
    out.push(cross_entropy_bound(&mut rng, t));
    let scenes = if t == 0 { 0 } else { t.div_ceil(100) };
    out.push(overlap_symmetry(opts.seed, scenes));
    out
}
