use hatch_core::correspondence::{directional_overlap, symmetric_overlap, CorrespondenceConfig};
use hatch_core::geometry::{CameraView, DepthMap, Intrinsics, Pose};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M3 = [[f64; 3]; 3];
type V3 = [f64; 3];

fn mat_vec(m: &M3, v: &V3) -> V3 {
    [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

fn transpose(m: &M3) -> M3 {
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| m[c][r]))
}

fn mat_mul(a: &M3, b: &M3) -> M3 {
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| (0..3).map(|k| a[r][k] * b[k][c]).sum()))
}

fn axis_rotation(axis: usize, deg: f64) -> M3 {
    let (s, c) = deg.to_radians().sin_cos();
    let (i, j) = match axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let mut m = [[0.0; 3]; 3];
    m[axis][axis] = 1.0;
    m[i][i] = c;
    m[j][j] = c;
    m[i][j] = -s;
    m[j][i] = s;
    m
}

struct Cam {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    r: M3,
    t: V3,
    depth: Vec<f32>,
}

const W: usize = 16;
const H: usize = 16;

/// Ray casts the plane `normal . w = offset`, then knocks out and perturbs a
/// few pixels so both validity and depth-consistency tests get exercised.
fn render(rng: &mut ChaCha8Rng, k: [f64; 4], r: M3, t: V3, plane: (V3, f64)) -> Cam {
    let [fx, fy, cx, cy] = k;
    let (normal, offset) = plane;
    let mut depth = vec![0.0f32; W * H];
    for v in 0..H {
        for u in 0..W {
            let dir = mat_vec(&r, &[(u as f64 - cx) / fx, (v as f64 - cy) / fy, 1.0]);
            let denom: f64 = (0..3).map(|k| normal[k] * dir[k]).sum();
            let num = offset - (0..3).map(|k| normal[k] * t[k]).sum::<f64>();
            let s = num / denom;
            let mut d = if s > 0.0 { s as f32 } else { 0.0 };
            match rng.gen_range(0..20) {
                0 => d = 0.0,
                1 => d = f32::NAN,
                2 => d += 0.3,
                _ => {}
            }
            depth[v * W + u] = d;
        }
    }
    Cam { fx, fy, cx, cy, r, t, depth }
}

fn random_pair(seed: u64) -> (Cam, Cam) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal_tilt = axis_rotation(0, rng.gen_range(-20.0..20.0));
    let normal = mat_vec(&normal_tilt, &[0.0, 0.0, 1.0]);
    let plane = (normal, rng.gen_range(2.0..4.0));
    let cam = |rng: &mut ChaCha8Rng| {
        let r = mat_mul(
            &mat_mul(&axis_rotation(1, rng.gen_range(-12.0..12.0)), &axis_rotation(0, rng.gen_range(-8.0..8.0))),
            &axis_rotation(2, rng.gen_range(-5.0..5.0)),
        );
        let t = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
        let f = rng.gen_range(10.0..20.0);
        let (cx, cy) = (rng.gen_range(7.0..9.0), rng.gen_range(7.0..9.0));
        let fy = f * rng.gen_range(0.9..1.1);
        render(rng, [f, fy, cx, cy], r, t, plane)
    };
    let x = cam(&mut rng);
    let y = cam(&mut rng);
    (x, y)
}

fn valid(d: f32) -> Option<f64> {
    (d.is_finite() && d > 0.0).then_some(d as f64)
}

fn patch(n: usize, u: usize, v: usize) -> usize {
    let col = (u / (W / n)).min(n - 1);
    let row = (v / (H / n)).min(n - 1);
    row * n + col
}

/// Per-pixel brute force: unproject, go through world coordinates, project.
fn brute_force(x: &Cam, y: &Cam, n: usize, threshold: f64) -> Vec<f64> {
    let side = n * n;
    let mut hits = vec![0.0; side * side];
    let mut totals = vec![0.0; side];
    let ryt = transpose(&y.r);
    for v in 0..H {
        for u in 0..W {
            let Some(z) = valid(x.depth[v * W + u]) else { continue };
            let i = patch(n, u, v);
            totals[i] += 1.0;
            let cam_x = [(u as f64 - x.cx) * z / x.fx, (v as f64 - x.cy) * z / x.fy, z];
            let rotated = mat_vec(&x.r, &cam_x);
            let world = [rotated[0] + x.t[0], rotated[1] + x.t[1], rotated[2] + x.t[2]];
            let q = mat_vec(&ryt, &[world[0] - y.t[0], world[1] - y.t[1], world[2] - y.t[2]]);
            if q[2] <= 0.0 {
                continue;
            }
            let pu = (y.fx * q[0] / q[2] + y.cx + 0.5).floor();
            let pv = (y.fy * q[1] / q[2] + y.cy + 0.5).floor();
            if pu < 0.0 || pv < 0.0 || pu >= W as f64 || pv >= H as f64 {
                continue;
            }
            let (pu, pv) = (pu as usize, pv as usize);
            let Some(observed) = valid(y.depth[pv * W + pu]) else { continue };
            if (q[2] - observed).abs() <= threshold {
                hits[i * side + patch(n, pu, pv)] += 1.0;
            }
        }
    }
    for i in 0..side {
        if totals[i] > 0.0 {
            for j in 0..side {
                hits[i * side + j] /= totals[i];
            }
        }
    }
    hits
}

fn view(c: &Cam) -> CameraView {
    let k = Intrinsics::new(c.fx, c.fy, c.cx, c.cy, W, H).unwrap();
    let r = Matrix3::from_fn(|i, j| c.r[i][j]);
    let pose = Pose::new(r, Vector3::from(c.t)).unwrap();
    CameraView::new(k, pose, DepthMap::new(W, H, c.depth.clone()).unwrap(), "plane").unwrap()
}

#[test]
fn overlap_matches_brute_force() {
    let cfg = CorrespondenceConfig::default();
    let mut nonzero = 0;
    for seed in 0..40 {
        let (x, y) = random_pair(seed);
        let expected = brute_force(&x, &y, cfg.n, cfg.depth_threshold);
        let got = directional_overlap(&view(&x), &view(&y), &cfg).unwrap();
        for (k, (a, b)) in got.entries().iter().zip(&expected).enumerate() {
            assert!((a - b).abs() <= 1e-12, "seed {seed} entry {k}: {a} vs {b}");
        }
        nonzero += expected.iter().filter(|&&e| e > 0.0).count();
    }
    // the scenes overlap, so the comparison is not vacuous
    assert!(nonzero > 200, "{nonzero}");
}

#[test]
fn overlap_matches_brute_force_for_other_grids() {
    for n in [1, 2, 3, 5] {
        let cfg = CorrespondenceConfig {
            n,
            ..Default::default()
        };
        for seed in 100..105 {
            let (x, y) = random_pair(seed);
            let expected = brute_force(&x, &y, n, cfg.depth_threshold);
            let got = directional_overlap(&view(&x), &view(&y), &cfg).unwrap();
            for (a, b) in got.entries().iter().zip(&expected) {
                assert!((a - b).abs() <= 1e-12, "n={n} seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn swapping_views_transposes_s() {
    let cfg = CorrespondenceConfig::default();
    for seed in 200..210 {
        let (x, y) = random_pair(seed);
        let (vx, vy) = (view(&x), view(&y));
        let mxy = directional_overlap(&vx, &vy, &cfg).unwrap();
        let myx = directional_overlap(&vy, &vx, &cfg).unwrap();
        let s = symmetric_overlap(&mxy, &myx).unwrap();
        let swapped = symmetric_overlap(&myx, &mxy).unwrap();
        assert_eq!(swapped, s.transpose());
    }
}
