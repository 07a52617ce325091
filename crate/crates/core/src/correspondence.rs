//! Geometry-derived patch correspondence and the cross-view alignment loss.
//!
//! Each image is tiled into an `n x n` patch grid. For an ordered view pair
//! `(X, Y)` the directional overlap `M[i, j]` is the fraction of valid-depth
//! pixels of patch `i` in `X` whose back-projected points land, depth
//! consistently, in patch `j` of `Y`. The symmetric correspondence matrix is
//! `S = (M_xy + M_yx^T) / 2`. Targets are row-wise softmaxes of `S / tau1`,
//! predictions row-wise softmaxes of patch-feature cosine similarity over
//! `tau2`, and the loss is their cross-entropy in both directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{depth_consistent, project, unproject_with_depth, CameraView};

pub const HSUP_MAGIC: &[u8; 4] = b"HSUP";
pub const HSUP_HEADER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrespondenceConfig {
    /// Patches per image side.
    pub n: usize,
    /// Depth agreement threshold in meters.
    pub depth_threshold: f64,
    /// Target temperature.
    pub tau_target: f64,
    /// Prediction temperature.
    pub tau_pred: f64,
    /// Minimum row-max overlap for a row to enter the loss.
    pub mask_threshold: f64,
    /// Average over every row, including rows without geometric overlap.
    pub literal_mode: bool,
}

impl Default for CorrespondenceConfig {
    fn default() -> Self {
        CorrespondenceConfig {
            n: 4,
            depth_threshold: 0.05,
            tau_target: 0.1,
            tau_pred: 0.07,
            mask_threshold: 0.01,
            literal_mode: false,
        }
    }
}

impl CorrespondenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Config(reason));
        if self.n == 0 || self.n > u16::MAX as usize {
            return bad(format!("grid side n={} out of range", self.n));
        }
        if !(self.depth_threshold > 0.0 && self.depth_threshold.is_finite()) {
            return bad(format!("depth threshold must be > 0, got {}", self.depth_threshold));
        }
        if !(self.tau_target > 0.0 && self.tau_target.is_finite()) {
            return bad(format!("tau_target must be > 0, got {}", self.tau_target));
        }
        if !(self.tau_pred > 0.0 && self.tau_pred.is_finite()) {
            return bad(format!("tau_pred must be > 0, got {}", self.tau_pred));
        }
        if !(self.mask_threshold >= 0.0) {
            return bad(format!("mask threshold must be >= 0, got {}", self.mask_threshold));
        }
        Ok(())
    }
}

/// Row-major `n x n` tiling of a raster. Remainder pixels belong to the last
/// row and column of patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    n: usize,
    width: usize,
    height: usize,
    cell_w: usize,
    cell_h: usize,
}

impl PatchGrid {
    pub fn new(n: usize, width: usize, height: usize) -> Result<Self> {
        if n == 0 || n > width.min(height) {
            return Err(Error::Config(format!(
                "grid side {n} does not fit a {width}x{height} raster"
            )));
        }
        Ok(PatchGrid {
            n,
            width,
            height,
            cell_w: width / n,
            cell_h: height / n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn patch_of(&self, u: usize, v: usize) -> usize {
        let col = (u / self.cell_w).min(self.n - 1);
        let row = (v / self.cell_h).min(self.n - 1);
        row * self.n + col
    }

    /// Half-open pixel ranges `(u0..u1, v0..v1)` of a patch.
    pub fn rect(&self, patch: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (row, col) = (patch / self.n, patch % self.n);
        let u0 = col * self.cell_w;
        let u1 = if col + 1 == self.n { self.width } else { u0 + self.cell_w };
        let v0 = row * self.cell_h;
        let v1 = if row + 1 == self.n { self.height } else { v0 + self.cell_h };
        (u0..u1, v0..v1)
    }
}

fn square_index(side: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < side && j < side);
    i * side + j
}

/// Directional patch overlap `M_{X->Y}`, `n² x n²`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl OverlapMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        check_square(n, &entries, "overlap matrix")?;
        let side = n * n;
        for i in 0..side {
            let row = &entries[i * side..(i + 1) * side];
            if row.iter().sum::<f64>() > 1.0 + 1e-9 {
                return Err(Error::invalid("overlap matrix", format!("row {i} sums above 1")));
            }
        }
        Ok(OverlapMatrix { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        OverlapMatrix {
            n,
            entries: identity_entries(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.n * self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[square_index(self.side(), i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let side = self.side();
        &self.entries[i * side..(i + 1) * side]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Symmetric correspondence `S`, `n² x n²` with entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMatrix {
    n: usize,
    entries: Vec<f64>,
}

fn identity_entries(n: usize) -> Vec<f64> {
    let side = n * n;
    let mut e = vec![0.0; side * side];
    for i in 0..side {
        e[i * side + i] = 1.0;
    }
    e
}

fn check_square(n: usize, entries: &[f64], what: &'static str) -> Result<()> {
    let side = n * n;
    if n == 0 || entries.len() != side * side {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {} entries for n={n}",
            entries.len()
        )));
    }
    if let Some(k) = entries.iter().position(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::invalid(
            what,
            format!("entry ({}, {}) = {} outside [0, 1]", k / side, k % side, entries[k]),
        ));
    }
    Ok(())
}

impl CorrespondenceMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        check_square(n, &entries, "correspondence matrix")?;
        Ok(CorrespondenceMatrix { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        CorrespondenceMatrix {
            n,
            entries: identity_entries(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.n * self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[square_index(self.side(), i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let side = self.side();
        &self.entries[i * side..(i + 1) * side]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> CorrespondenceMatrix {
        let side = self.side();
        let mut entries = vec![0.0; side * side];
        for i in 0..side {
            for j in 0..side {
                entries[j * side + i] = self.entries[i * side + j];
            }
        }
        CorrespondenceMatrix { n: self.n, entries }
    }

    /// Mean of all entries.
    pub fn mean_mass(&self) -> f64 {
        self.entries.iter().sum::<f64>() / self.entries.len() as f64
    }

    /// Rounds every entry to the nearest `f32`, the on-disk precision.
    pub fn quantized(&self) -> CorrespondenceMatrix {
        CorrespondenceMatrix {
            n: self.n,
            entries: self.entries.iter().map(|&x| x as f32 as f64).collect(),
        }
    }

    /// `HSUP` block: magic, u16 n, u16 reserved (0), then row-major
    /// little-endian f32 entries.
    pub fn to_hsup_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HSUP_HEADER_LEN + 4 * self.entries.len());
        out.extend_from_slice(HSUP_MAGIC);
        out.extend_from_slice(&(self.n as u16).to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        for &x in &self.entries {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out
    }

    pub fn from_hsup_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HSUP_HEADER_LEN {
            return Err(Error::Format(format!("truncated header ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != HSUP_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        let n = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
        let reserved = u16::from_le_bytes([bytes[6], bytes[7]]);
        if reserved != 0 {
            return Err(Error::Format(format!(
                "unsupported header version field {reserved}"
            )));
        }
        let side = n * n;
        let expected = HSUP_HEADER_LEN + 4 * side * side;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "body size mismatch: {} bytes, expected {expected} for n={n}",
                bytes.len()
            )));
        }
        let entries = bytes[HSUP_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        CorrespondenceMatrix::from_entries(n, entries)
    }
}

/// Per-patch feature vectors of a common dimension, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatureSet {
    dim: usize,
    data: Vec<f64>,
}

impl PatchFeatureSet {
    pub fn new(count: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != count * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values for {count} patches of dimension {dim}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "patch features",
                format!("non-finite value in patch {}", k / dim),
            ));
        }
        Ok(PatchFeatureSet { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(k) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "patch {k} has dimension {}, expected {dim}",
                rows[k].len()
            )));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// A point of the probability simplex over target patches.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow(Vec<f64>);

impl DistributionRow {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }
}

/// Numerically stable `log softmax` of `logits`.
fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

fn softmax(logits: &[f64]) -> DistributionRow {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    DistributionRow(exps.into_iter().map(|e| e / total).collect())
}

/// Cosine similarity, defined as 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

pub fn directional_overlap(
    x: &CameraView,
    y: &CameraView,
    cfg: &CorrespondenceConfig,
) -> Result<OverlapMatrix> {
    directional_overlap_strided(x, y, cfg, 1)
}

/// [`directional_overlap`] over every `stride`-th pixel of `x` in both axes.
pub fn directional_overlap_strided(
    x: &CameraView,
    y: &CameraView,
    cfg: &CorrespondenceConfig,
    stride: usize,
) -> Result<OverlapMatrix> {
    cfg.validate()?;
    if stride == 0 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    if x.frame() != y.frame() {
        return Err(Error::Config(format!(
            "views live in different world frames ({:?} vs {:?})",
            x.frame(),
            y.frame()
        )));
    }
    let kx = x.intrinsics();
    let ky = y.intrinsics();
    let grid_x = PatchGrid::new(cfg.n, kx.width, kx.height)?;
    let grid_y = PatchGrid::new(cfg.n, ky.width, ky.height)?;
    let side = grid_x.len();

    // X camera -> Y camera, folded into one rigid transform
    let ry_t = y.pose().rotation().transpose();
    let rot = ry_t * x.pose().rotation();
    let trans = ry_t * (x.pose().translation() - y.pose().translation());

    let mut counts = vec![0u64; side * side];
    let mut valid = vec![0u64; side];
    for v in (0..kx.height).step_by(stride) {
        for u in (0..kx.width).step_by(stride) {
            let Some(z) = x.depth().get(u, v) else {
                continue;
            };
            let i = grid_x.patch_of(u, v);
            valid[i] += 1;
            let p = unproject_with_depth(u as f64, v as f64, z, kx);
            let q = rot * p + trans;
            let Some((px, zq)) = project(&q, ky) else {
                continue;
            };
            let (pu, pv) = ((px.x + 0.5).floor(), (px.y + 0.5).floor());
            if !(pu >= 0.0 && pv >= 0.0 && pu < ky.width as f64 && pv < ky.height as f64) {
                continue;
            }
            let (pu, pv) = (pu as usize, pv as usize);
            let Some(observed) = y.depth().get(pu, pv) else {
                continue;
            };
            if depth_consistent(zq, observed, cfg.depth_threshold) {
                counts[i * side + grid_y.patch_of(pu, pv)] += 1;
            }
        }
    }
    let entries = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| match valid[k / side] {
            0 => 0.0,
            total => c as f64 / total as f64,
        })
        .collect();
    Ok(OverlapMatrix { n: cfg.n, entries })
}

pub fn symmetric_overlap(m_xy: &OverlapMatrix, m_yx: &OverlapMatrix) -> Result<CorrespondenceMatrix> {
    if m_xy.n != m_yx.n {
        return Err(Error::DimensionMismatch(format!(
            "overlap matrices with n={} and n={}",
            m_xy.n, m_yx.n
        )));
    }
    let side = m_xy.side();
    let mut entries = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..side {
            entries[i * side + j] = 0.5 * (m_xy.get(i, j) + m_yx.get(j, i));
        }
    }
    Ok(CorrespondenceMatrix { n: m_xy.n, entries })
}

/// `softmax_j(S[i, :] / tau)`.
pub fn target_distribution(s: &CorrespondenceMatrix, row: usize, tau: f64) -> DistributionRow {
    let logits: Vec<f64> = s.row(row).iter().map(|x| x / tau).collect();
    softmax(&logits)
}

fn similarity_logits(fx: &PatchFeatureSet, fy: &PatchFeatureSet, row: usize, tau: f64) -> Vec<f64> {
    let e = fx.vector(row);
    (0..fy.len()).map(|j| cosine(e, fy.vector(j)) / tau).collect()
}

fn check_features(fx: &PatchFeatureSet, fy: &PatchFeatureSet) -> Result<()> {
    if fx.dim != fy.dim {
        return Err(Error::DimensionMismatch(format!(
            "feature dimensions {} and {}",
            fx.dim, fy.dim
        )));
    }
    Ok(())
}

/// `softmax_j(cos(e_i^X, e_j^Y) / tau)`.
pub fn predicted_distribution(
    fx: &PatchFeatureSet,
    fy: &PatchFeatureSet,
    row: usize,
    tau: f64,
) -> Result<DistributionRow> {
    check_features(fx, fy)?;
    if row >= fx.len() {
        return Err(Error::DimensionMismatch(format!(
            "row {row} of {} patches",
            fx.len()
        )));
    }
    Ok(softmax(&similarity_logits(fx, fy, row, tau)))
}

/// Loss of one view pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub x_to_y: f64,
    pub y_to_x: f64,
    pub rows_x_to_y: usize,
    pub rows_y_to_x: usize,
}

fn directional_loss(
    s: &CorrespondenceMatrix,
    fx: &PatchFeatureSet,
    fy: &PatchFeatureSet,
    cfg: &CorrespondenceConfig,
) -> (f64, usize) {
    let mut sum = 0.0;
    let mut rows = 0;
    for i in 0..s.side() {
        let target = s.row(i);
        let row_max = target.iter().copied().fold(0.0, f64::max);
        if !cfg.literal_mode && row_max < cfg.mask_threshold {
            continue;
        }
        let p = target_distribution(s, i, cfg.tau_target);
        let log_q = log_softmax(&similarity_logits(fx, fy, i, cfg.tau_pred));
        sum -= p.0.iter().zip(&log_q).map(|(p, lq)| p * lq).sum::<f64>();
        rows += 1;
    }
    if rows == 0 {
        (0.0, 0)
    } else {
        (sum / rows as f64, rows)
    }
}

/// Bidirectional cross-entropy between geometric targets and feature
/// similarities for one view pair. Rows whose best overlap is below the mask
/// threshold are skipped unless `literal_mode` is set.
pub fn correspondence_loss(
    s: &CorrespondenceMatrix,
    fx: &PatchFeatureSet,
    fy: &PatchFeatureSet,
    cfg: &CorrespondenceConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    check_features(fx, fy)?;
    let side = s.side();
    if fx.len() != side || fy.len() != side {
        return Err(Error::DimensionMismatch(format!(
            "{} and {} feature vectors for {side} patches",
            fx.len(),
            fy.len()
        )));
    }
    let (x_to_y, rows_x_to_y) = directional_loss(s, fx, fy, cfg);
    let (y_to_x, rows_y_to_x) = directional_loss(&s.transpose(), fy, fx, cfg);
    Ok(LossBreakdown {
        total: x_to_y + y_to_x,
        x_to_y,
        y_to_x,
        rows_x_to_y,
        rows_y_to_x,
    })
}

/// Unweighted mean of pair losses.
pub fn mean_pair_loss(pairs: &[LossBreakdown]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|l| l.total).sum::<f64>() / pairs.len() as f64
}
