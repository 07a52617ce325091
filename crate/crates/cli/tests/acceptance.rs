//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances and time limits are pinned in each line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hatch_core::action::{compile, execute, ActionPlan, AtomicAction, CompileTolerances};
use hatch_core::annotations::{parse_annotations, ActionAnnotationSet};
use hatch_core::correspondence::{
    correspondence_loss, directional_overlap, symmetric_overlap, CorrespondenceConfig, CorrespondenceMatrix,
    PatchFeatureSet,
};
use hatch_core::geometry::{CameraView, DepthMap, Intrinsics, Pose, RelativePose};
use hatch_core::rewards::answer::mra_numeric;
use hatch_core::rewards::{
    action_accuracy_reward, format_reward, score, total_reward, GroundTruth, QuestionType, RewardConfig,
    SubCategory,
};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- A1

fn ry(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rx(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn angle_between_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let m = a * b.transpose();
    let s = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm() / 2.0;
    let c = (m.trace() - 1.0) / 2.0;
    s.atan2(c).to_degrees()
}

fn a1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: Vec<RelativePose> = (0..1000)
        .map(|_| {
            let yaw = rng.gen_range(-179.0..=179.0);
            let pitch = rng.gen_range(-80.0..=80.0);
            let p = loop {
                let v = Vector3::new(rng.gen_range(-5.0..=5.0), rng.gen_range(-5.0..=5.0), rng.gen_range(-5.0..=5.0));
                if v.norm() <= 5.0 {
                    break v;
                }
            };
            // camera turns by yaw then pitch and ends up at p (old camera frame);
            // the relative pose maps old camera coordinates to new ones
            let o = ry(yaw) * rx(pitch);
            RelativePose::new(o.transpose(), -(o.transpose() * p)).unwrap()
        })
        .collect();
    let tol = CompileTolerances::default();
    let start = Instant::now();
    let (mut dt, mut dr) = (0.0f64, 0.0f64);
    for rel in &cases {
        let Ok(plan) = compile(rel, &tol) else {
            return outcome(false, "a roll-free pose was rejected");
        };
        let back = execute(&plan);
        dt = dt.max((back.translation() - rel.translation()).norm());
        dr = dr.max(angle_between_deg(back.rotation(), rel.rotation()));
    }
    let elapsed = start.elapsed();
    outcome(
        dt < 1e-6 && dr < 1e-4 && elapsed < Duration::from_secs(1),
        format!("1000 poses, max d_t {dt:.2e} m (< 1e-6), max d_r {dr:.2e} deg (< 1e-4), {elapsed:.2?} (< 1 s)"),
    )
}

// ---------------------------------------------------------------- A2, A3

const W: usize = 16;
const H: usize = 16;

struct Cam {
    k: [f64; 4],
    r: [[f64; 3]; 3],
    t: [f64; 3],
    depth: Vec<f32>,
}

fn mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn random_cam(rng: &mut ChaCha8Rng, plane_z: f64) -> Cam {
    let r = ry(rng.gen_range(-15.0..15.0)) * rx(rng.gen_range(-8.0..8.0));
    let r = [0, 1, 2].map(|i| [0, 1, 2].map(|j| r[(i, j)]));
    let t = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
    let f = rng.gen_range(10.0..20.0);
    let k = [f, f * rng.gen_range(0.9..1.1), rng.gen_range(7.0..9.0), rng.gen_range(7.0..9.0)];
    let mut depth = Vec::with_capacity(W * H);
    for v in 0..H {
        for u in 0..W {
            let d = mul(&r, [(u as f64 - k[2]) / k[0], (v as f64 - k[3]) / k[1], 1.0]);
            let mut z = ((plane_z - t[2]) / d[2]) as f32;
            match rng.gen_range(0..16) {
                0 => z = 0.0,
                1 => z += 0.25,
                _ => {}
            }
            depth.push(z);
        }
    }
    Cam { k, r, t, depth }
}

fn brute_force(x: &Cam, y: &Cam, n: usize, threshold: f64) -> Vec<f64> {
    let side = n * n;
    let patch = |u: usize, v: usize| (v / (H / n)).min(n - 1) * n + (u / (W / n)).min(n - 1);
    let ok = |d: f32| (d.is_finite() && d > 0.0).then_some(d as f64);
    let rt = [0, 1, 2].map(|i| [0, 1, 2].map(|j| y.r[j][i]));
    let mut hits = vec![0.0; side * side];
    let mut totals = vec![0.0; side];
    for v in 0..H {
        for u in 0..W {
            let Some(z) = ok(x.depth[v * W + u]) else { continue };
            let i = patch(u, v);
            totals[i] += 1.0;
            let c = [(u as f64 - x.k[2]) * z / x.k[0], (v as f64 - x.k[3]) * z / x.k[1], z];
            let w = mul(&x.r, c);
            let q = mul(&rt, [w[0] + x.t[0] - y.t[0], w[1] + x.t[1] - y.t[1], w[2] + x.t[2] - y.t[2]]);
            if q[2] <= 0.0 {
                continue;
            }
            let pu = (y.k[0] * q[0] / q[2] + y.k[2] + 0.5).floor();
            let pv = (y.k[1] * q[1] / q[2] + y.k[3] + 0.5).floor();
            if !(0.0..W as f64).contains(&pu) || !(0.0..H as f64).contains(&pv) {
                continue;
            }
            let (pu, pv) = (pu as usize, pv as usize);
            if let Some(obs) = ok(y.depth[pv * W + pu]) {
                if (q[2] - obs).abs() <= threshold {
                    hits[i * side + patch(pu, pv)] += 1.0;
                }
            }
        }
    }
    for i in 0..side {
        if totals[i] > 0.0 {
            hits[i * side..(i + 1) * side].iter_mut().for_each(|h| *h /= totals[i]);
        }
    }
    hits
}

fn to_view(c: &Cam) -> CameraView {
    let k = Intrinsics::new(c.k[0], c.k[1], c.k[2], c.k[3], W, H).unwrap();
    let pose = Pose::new(Matrix3::from_fn(|i, j| c.r[i][j]), Vector3::from(c.t)).unwrap();
    CameraView::new(k, pose, DepthMap::new(W, H, c.depth.clone()).unwrap(), "a2").unwrap()
}

fn scene_pairs() -> Vec<(Cam, Cam)> {
    (0..20u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let plane = rng.gen_range(2.0..4.0);
            (random_cam(&mut rng, plane), random_cam(&mut rng, plane))
        })
        .collect()
}

fn a2() -> Outcome {
    let cfg = CorrespondenceConfig::default();
    let pairs = scene_pairs();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut nonzero = 0;
    for (x, y) in &pairs {
        for (a, b) in [(x, y), (y, x)] {
            let expected = brute_force(a, b, cfg.n, cfg.depth_threshold);
            let got = directional_overlap(&to_view(a), &to_view(b), &cfg).unwrap();
            for (g, e) in got.entries().iter().zip(&expected) {
                worst = worst.max((g - e).abs());
            }
            nonzero += expected.iter().filter(|e| **e > 0.0).count();
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && nonzero > 0 && elapsed < Duration::from_secs(5),
        format!("20 pairs x 2 directions, n=4, max |diff| {worst:.1e} (<= 1e-12), {nonzero} nonzero entries, {elapsed:.2?} (< 5 s)"),
    )
}

fn a3() -> Outcome {
    let cfg = CorrespondenceConfig::default();
    let mut symmetric = true;
    for (x, y) in scene_pairs() {
        let (vx, vy) = (to_view(&x), to_view(&y));
        let mxy = directional_overlap(&vx, &vy, &cfg).unwrap();
        let myx = directional_overlap(&vy, &vx, &cfg).unwrap();
        let s_xy = symmetric_overlap(&mxy, &myx).unwrap();
        let s_yx = symmetric_overlap(&myx, &mxy).unwrap();
        symmetric &= s_xy == s_yx.transpose();
    }
    let k = Intrinsics::new(14.0, 14.0, 8.0, 8.0, W, H).unwrap();
    let v = CameraView::new(k, Pose::identity(), DepthMap::constant(W, H, 2.5), "dup").unwrap();
    let m = directional_overlap(&v, &v, &cfg).unwrap();
    let s = symmetric_overlap(&m, &m).unwrap();
    let identity = s == CorrespondenceMatrix::identity(cfg.n);
    outcome(
        symmetric && identity,
        format!("S(X,Y) == S(Y,X)^T exactly on 20 pairs: {symmetric}; duplicated fronto-parallel view gives identity: {identity}"),
    )
}

// ---------------------------------------------------------------- A4

fn mean_entropy(s: &[f64], side: usize, tau: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..side {
        let row = &s[i * side..(i + 1) * side];
        let z: f64 = row.iter().map(|x| (x / tau).exp()).sum();
        total -= row
            .iter()
            .map(|x| {
                let p = (x / tau).exp() / z;
                p * p.ln()
            })
            .sum::<f64>();
    }
    total / side as f64
}

fn a4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_bound, mut worst_eq) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(1..=4usize);
        let side = n * n;
        let s: Vec<f64> = (0..side * side).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let sm = CorrespondenceMatrix::from_entries(n, s.clone()).unwrap();
        let st: Vec<f64> = (0..side * side).map(|k| s[(k % side) * side + k / side]).collect();

        // random features: the bound
        let dim = rng.gen_range(2..10usize);
        let mut feats = || PatchFeatureSet::new(side, dim, (0..side * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (fx, fy) = (feats(), feats());
        let cfg = CorrespondenceConfig { n, literal_mode: true, ..Default::default() };
        let loss = correspondence_loss(&sm, &fx, &fy, &cfg).unwrap();
        let (hx, hy) = (mean_entropy(&s, side, cfg.tau_target), mean_entropy(&st, side, cfg.tau_target));
        worst_bound = worst_bound.max(hx - loss.x_to_y).max(hy - loss.y_to_x);

        // features with cos(e_i, f_j) / tau_pred = S_ij / tau_target: q equals p
        let cfg = CorrespondenceConfig { n, literal_mode: true, tau_target: 1.0, tau_pred: 0.1, ..Default::default() };
        let scale = cfg.tau_pred / cfg.tau_target;
        let d = side + 1;
        let mut ex = vec![0.0; side * d];
        let mut fy = vec![0.0; side * d];
        for i in 0..side {
            let row = &mut ex[i * d..(i + 1) * d];
            for j in 0..side {
                row[j] = scale * s[i * side + j];
            }
            row[side] = (1.0 - row[..side].iter().map(|a| a * a).sum::<f64>()).sqrt();
            fy[i * d + i] = 1.0;
        }
        let fx = PatchFeatureSet::new(side, d, ex).unwrap();
        let fy = PatchFeatureSet::new(side, d, fy).unwrap();
        let loss = correspondence_loss(&sm, &fx, &fy, &cfg).unwrap();
        let (hx, hy) = (mean_entropy(&s, side, 1.0), mean_entropy(&st, side, 1.0));
        worst_eq = worst_eq.max((loss.x_to_y - hx).abs()).max((loss.y_to_x - hy).abs());
    }
    outcome(
        worst_bound <= 1e-9 && worst_eq <= 1e-9,
        format!("100 cases, max H - CE {worst_bound:.1e} (<= 1e-9), max |CE - H| with q = p {worst_eq:.1e} (<= 1e-9)"),
    )
}

// ---------------------------------------------------------------- A5

fn plans(pairs: &[((usize, usize), Vec<AtomicAction>)]) -> ActionAnnotationSet {
    let mut set = ActionAnnotationSet::new();
    for ((i, j), a) in pairs {
        set.insert(*i, *j, ActionPlan::new(a.clone())).unwrap();
    }
    set
}

fn a5() -> Outcome {
    let cfg = RewardConfig::default();
    let gold = parse_annotations(THREE_VIEW).unwrap();
    let gt = GroundTruth {
        gold_actions: gold.clone(),
        gold_answer: "B".into(),
        sub_category: SubCategory::General,
        question_type: QuestionType::Select,
        n_views: 3,
        gold_box: None,
        gold_motion: None,
    };
    let perfect = score(&format!("<action>{THREE_VIEW}</action><answer>B</answer>"), &gt, &cfg).act_acc;

    let fwd = |m| AtomicAction::move_forward(m).unwrap();
    let g1 = plans(&[((0, 1), vec![fwd(1.0)])]);
    let off = action_accuracy_reward(&plans(&[((0, 1), vec![fwd(1.0 + cfg.tau_t)])]), &g1, &cfg);
    let e_inv = (-1.0f64).exp();

    let g2 = plans(&[((0, 1), vec![AtomicAction::turn_left(40.0).unwrap(), fwd(1.0), AtomicAction::move_up(0.2).unwrap()])]);
    let a = plans(&[((0, 1), vec![AtomicAction::turn_left(90.0).unwrap(), fwd(1.0)])]);
    let b = plans(&[(
        (0, 1),
        vec![
            AtomicAction::turn_right(200.0).unwrap(),
            AtomicAction::turn_right(70.0).unwrap(),
            AtomicAction::move_up(0.4).unwrap(),
            AtomicAction::move_down(0.4).unwrap(),
            fwd(0.25),
            fwd(0.75),
        ],
    )]);
    let (ra, rb) = (action_accuracy_reward(&a, &g2, &cfg), action_accuracy_reward(&b, &g2, &cfg));
    outcome(
        (perfect - 1.0).abs() <= 1e-9 && (off - e_inv).abs() <= 1e-9 && (ra - rb).abs() <= 1e-9 && ra < 1.0,
        format!(
            "perfect {perfect} (1 +- 1e-9), d_t = tau_t gives {off:.12} (e^-1 +- 1e-9), equivalent encodings {ra:.12} vs {rb:.12} (+- 1e-9)"
        ),
    )
}

// ---------------------------------------------------------------- A6

fn a6() -> Outcome {
    let th = RewardConfig::default().mra_thresholds;
    let exact = mra_numeric("3.75", "3.75", &th);
    let rel26 = mra_numeric("126", "100", &th);
    let two = mra_numeric("either 2 or 3", "2", &th);
    outcome(
        exact == 1.0 && rel26 == 0.5 && two == 0.0,
        format!("exact {exact} (1.0), relative error 0.26 {rel26} (0.5), two numbers {two} (0)"),
    )
}

// ---------------------------------------------------------------- A7

const THREE_VIEW: &str = r#"[
  {"from": 0, "to": 1, "action": [{"turn_right_deg": 30}, {"turn_up_deg": 15}, {"move_forward_m": 1.4}, {"move_up_m": 0.3}]},
  {"from": 0, "to": 2, "action": [{"turn_left_deg": 45}, {"move_forward_m": 2.0}]},
  {"from": 1, "to": 2, "action": [{"turn_down_deg": 10}]}
]"#;

fn wrap(actions: &str) -> String {
    format!("<action>{actions}</action>\n<answer>B</answer>")
}

fn a7() -> Outcome {
    let full = format_reward(&wrap(THREE_VIEW), 3);
    let lines: Vec<&str> = THREE_VIEW.lines().collect();
    let mut dropped = Vec::new();
    for k in 1..=3 {
        let mut kept: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        kept.remove(k);
        // keep the remaining entries a valid JSON array
        let body = kept[1..kept.len() - 1].join("\n");
        let body = body.trim_end().trim_end_matches(',');
        let text = format!("[\n{body}\n]");
        assert!(parse_annotations(&text).is_ok(), "{text}");
        dropped.push(format_reward(&wrap(&text), 3));
    }
    let broken = format_reward(&wrap(&THREE_VIEW.replacen("\"to\": 1,", "\"to\": 1", 1)), 3);
    let no_close_action = format_reward(&wrap(THREE_VIEW).replace("</action>", ""), 3);
    let no_close_answer = format_reward(&wrap(THREE_VIEW).replace("</answer>", ""), 3);
    outcome(
        full == 1 && dropped == [0, 0, 0] && broken == 0 && no_close_action == 0 && no_close_answer == 0,
        format!(
            "full {full} (1), each pair removed {dropped:?} (0), broken JSON {broken} (0), missing </action> {no_close_action} (0), missing </answer> {no_close_answer} (0)"
        ),
    )
}

// ---------------------------------------------------------------- A8

fn a8() -> Outcome {
    let t = total_reward(1.0, 1.0, 1, &RewardConfig::default()).total;
    outcome(t == 3.0, format!("total {t} (exactly 3)"))
}

// ---------------------------------------------------------------- A9

fn hatch(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hatch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run hatch");
    if !out.status.success() {
        eprintln!("hatch {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let path = e.path();
        let name = e.file_name().to_string_lossy().into_owned();
        if path.is_dir() {
            for (k, v) in tree(&path) {
                files.insert(format!("{name}/{k}"), v);
            }
        } else {
            files.insert(name, fs::read(path).unwrap());
        }
    }
    files
}

/// Ten model outputs of varying quality for the scene's gold plans.
fn simulated_outputs(gold: &str) -> Vec<String> {
    let set = parse_annotations(gold).unwrap();
    let nudged: String = {
        let mut s = ActionAnnotationSet::new();
        for ((i, j), p) in set.iter() {
            let scaled: Vec<AtomicAction> = p
                .actions()
                .iter()
                .map(|a| AtomicAction::new(a.kind(), a.magnitude() * 1.1).unwrap())
                .collect();
            s.insert(i, j, ActionPlan::new(scaled)).unwrap();
        }
        hatch_core::annotations::serialize_annotations(&s)
    };
    let first_pair_only = {
        let mut s = ActionAnnotationSet::new();
        let ((i, j), p) = set.iter().next().unwrap();
        s.insert(i, j, p.clone()).unwrap();
        hatch_core::annotations::serialize_annotations(&s)
    };
    let stop = r#"[{"from":0,"to":1,"action":[]},{"from":0,"to":2,"action":[]},{"from":1,"to":2,"action":[]}]"#;
    vec![
        format!("<action>{gold}</action><answer>B</answer>"),
        format!("<action>{gold}</action><answer>C</answer>"),
        format!("<action>{nudged}</action><answer>B</answer>"),
        format!("<action>{first_pair_only}</action><answer>B</answer>"),
        format!("<action>{stop}</action><answer>(B) the chair</answer>"),
        format!("<action>{}</action><answer>B</answer>", &gold[..gold.len() / 2]),
        format!("<action>{gold}<answer>B</answer>"),
        "B".to_string(),
        String::new(),
        format!("thinking...\n<action>\n{gold}\n</action>\n<answer> b </answer>"),
    ]
}

fn run_pipeline(root: &Path) -> Result<(Duration, BTreeMap<String, Vec<u8>>), String> {
    let start = Instant::now();
    let (code, _) = hatch(&["synth", "--seed", "0", "--views", "3", "--out", "scene"], root);
    if code != 0 {
        return Err(format!("synth exit {code}"));
    }
    let (code, summary) = hatch(&["supervise", "scene/manifest.json", "--out", "bundle"], root);
    if code != 0 || summary.lines().count() != 3 {
        return Err(format!("supervise exit {code}, {} summary lines", summary.lines().count()));
    }
    let gold = fs::read_to_string(root.join("bundle/actions.json")).unwrap();
    let gt = serde_json::json!({
        "gold_actions": serde_json::from_str::<serde_json::Value>(&gold).unwrap(),
        "gold_answer": "B",
        "sub_category": "general",
        "question_type": "select",
        "n_views": 3,
    });
    let mut batch = String::new();
    let mut gts = String::new();
    for (k, raw) in simulated_outputs(gold.trim()).iter().enumerate() {
        batch += &format!("{}\n", serde_json::json!({ "id": k, "raw_output": raw }));
        gts += &format!("{}\n", serde_json::json!({ "id": k, "ground_truth": gt }));
    }
    fs::write(root.join("batch.jsonl"), batch).unwrap();
    fs::write(root.join("gt.jsonl"), gts).unwrap();
    let (code, scored) = hatch(&["reward", "batch.jsonl", "--gt", "gt.jsonl"], root);
    let elapsed = start.elapsed();
    if code != 0 {
        return Err(format!("reward exit {code}"));
    }
    let lines: Vec<serde_json::Value> = scored.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    if lines.len() != 11 || lines[0]["total"] != 3.0 || lines[8]["total"] != 0.0 {
        return Err(format!("unexpected reward output:\n{scored}"));
    }
    if (0..10).any(|k| lines[k]["id"] != k) {
        return Err("reward output out of order".into());
    }
    fs::write(root.join("scored.jsonl"), scored).unwrap();
    Ok((elapsed, tree(root)))
}

fn a9() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = match run_pipeline(a.path()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let second = match run_pipeline(b.path()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let identical = first.1 == second.1;
    outcome(
        identical && first.0 < Duration::from_secs(5),
        format!(
            "synth -> supervise -> reward (10 outputs) exit 0 in {:.2?} (< 5 s); rerun bit-identical over {} files: {identical}",
            first.0,
            first.1.len()
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("A1", "action round trip", a1),
        ("A2", "overlap oracle equivalence", a2),
        ("A3", "symmetry and self-correspondence", a3),
        ("A4", "loss bound", a4),
        ("A5", "reward closed forms", a5),
        ("A6", "MRA arithmetic", a6),
        ("A7", "format reward conformance", a7),
        ("A8", "weighted total", a8),
        ("A9", "end-to-end desk run", a9),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let o = check();
        println!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
