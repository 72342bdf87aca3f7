//! Interpolating-wavelet compression of the scan grid.
//!
//! The `N x N` grid is the finest level `J = floor(log2 N)` of a hierarchy of
//! nested grids; level `j - 1` keeps the even-indexed nodes of level `j` along
//! each axis. A node that first appears on level `j + 1` carries a detail
//! coefficient: the map value there minus its interpolation from level `j`.
//! The compressed grid is the coarsest level plus every node whose detail
//! magnitude reaches the threshold.

use crate::beamform::BeamMap;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Interpolation stencil used to predict a level from the next coarser one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Two-point (piecewise linear) interpolation.
    #[default]
    Linear,
    /// Four-point cubic (Deslauriers-Dubuc) interpolation.
    Cubic,
}

impl Stencil {
    pub fn points(self) -> usize {
        match self {
            Stencil::Linear => 2,
            Stencil::Cubic => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stencil::Linear => "linear",
            Stencil::Cubic => "cubic",
        }
    }
}

impl std::str::FromStr for Stencil {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "2" => Ok(Stencil::Linear),
            "cubic" | "4" => Ok(Stencil::Cubic),
            other => Err(Error::Config(format!("unknown stencil '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// Threshold is `epsilon * max|b|`.
    #[default]
    Relative,
    /// Threshold is `epsilon` itself.
    Absolute,
}

impl ThresholdMode {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdMode::Relative => "relative",
            ThresholdMode::Absolute => "absolute",
        }
    }
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(ThresholdMode::Relative),
            "absolute" => Ok(ThresholdMode::Absolute),
            other => Err(Error::Config(format!("unknown threshold mode '{other}'"))),
        }
    }
}

/// Per-axis node sets of the nested dyadic grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedGrids {
    n: usize,
    max_level: usize,
    axes: Vec<Vec<usize>>,
}

impl NestedGrids {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Finest level `J`.
    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Grid indices present along one axis at `level`.
    pub fn axis(&self, level: usize) -> &[usize] {
        &self.axes[level]
    }

    /// Distance between neighbouring nodes at `level`, in fine-grid steps.
    pub fn stride(&self, level: usize) -> usize {
        1 << (self.max_level - level)
    }

    /// Flat indices of every node on `level`, ascending.
    pub fn level_indices(&self, level: usize) -> Vec<usize> {
        let axis = &self.axes[level];
        let mut out = Vec::with_capacity(axis.len() * axis.len());
        for &r in axis {
            for &c in axis {
                out.push(r * self.n + c);
            }
        }
        out
    }
}

pub fn build_nested_grids(n: usize) -> Result<NestedGrids> {
    if n < 2 {
        return Err(Error::Config(format!("nested grids need N >= 2, got {n}")));
    }
    let max_level = (usize::BITS - 1 - n.leading_zeros()) as usize;
    let axes = (0..=max_level)
        .map(|j| (0..n).step_by(1 << (max_level - j)).collect())
        .collect();
    Ok(NestedGrids { n, max_level, axes })
}

/// Lagrange weights for interpolating at odd fine position `a` from coarse
/// nodes at even positions `2q`, `q < coarse_len`. The stencil is centred on
/// the target and shifted inward at the boundaries.
fn stencil_weights<T: Real>(a: usize, coarse_len: usize, stencil: Stencil) -> Vec<(usize, T)> {
    debug_assert!(a % 2 == 1);
    let p = stencil.points().min(coarse_len);
    let left = a / 2; // coarse node just left of the target
    let mut start = (left + 1).saturating_sub(p / 2);
    if start + p > coarse_len {
        start = coarse_len - p;
    }
    let nodes: Vec<usize> = (start..start + p).collect();
    let x = a as f64;
    nodes
        .iter()
        .map(|&q| {
            let xq = (2 * q) as f64;
            let w: f64 = nodes
                .iter()
                .filter(|&&o| o != q)
                .map(|&o| {
                    let xo = (2 * o) as f64;
                    (x - xo) / (xq - xo)
                })
                .product();
            (q, T::lit(w))
        })
        .collect()
}

/// Predicts every node of level `coarse_level + 1` that is not on
/// `coarse_level`, reading only the coarse-level entries of `values`.
///
/// Nodes on an even row and odd column are interpolated along the row, odd
/// row and even column along the column, and odd/odd nodes by interpolating
/// the coarse rows first and then along the column. Returns
/// `(flat index, prediction)` in ascending index order.
pub fn predict<T: Real>(
    grids: &NestedGrids,
    coarse_level: usize,
    values: &[T],
    stencil: Stencil,
) -> Vec<(usize, T)> {
    assert!(
        coarse_level < grids.max_level(),
        "no finer level to predict"
    );
    let n = grids.n();
    let fine_stride = grids.stride(coarse_level + 1);
    let coarse_stride = 2 * fine_stride;
    let fine_len = grids.axis(coarse_level + 1).len();
    let coarse_len = grids.axis(coarse_level).len();
    let at = |qr: usize, qc: usize| values[qr * coarse_stride * n + qc * coarse_stride];

    let weights: Vec<Vec<(usize, T)>> = (0..fine_len)
        .map(|a| {
            if a % 2 == 1 {
                stencil_weights(a, coarse_len, stencil)
            } else {
                Vec::new()
            }
        })
        .collect();

    let mut out = Vec::with_capacity(fine_len * fine_len - coarse_len * coarse_len);
    for ra in 0..fine_len {
        for ca in 0..fine_len {
            let value = match (ra % 2, ca % 2) {
                (0, 0) => continue,
                (0, _) => weights[ca]
                    .iter()
                    .fold(T::zero(), |acc, &(qc, w)| acc + w * at(ra / 2, qc)),
                (_, 0) => weights[ra]
                    .iter()
                    .fold(T::zero(), |acc, &(qr, w)| acc + w * at(qr, ca / 2)),
                _ => weights[ra].iter().fold(T::zero(), |acc, &(qr, wr)| {
                    let row = weights[ca]
                        .iter()
                        .fold(T::zero(), |s, &(qc, wc)| s + wc * at(qr, qc));
                    acc + wr * row
                }),
            };
            out.push((ra * fine_stride * n + ca * fine_stride, value));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressOptions {
    pub epsilon: f64,
    pub mode: ThresholdMode,
    pub stencil: Stencil,
}

impl CompressOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            mode: ThresholdMode::Relative,
            stencil: Stencil::Linear,
        }
    }
}

/// Retained grid points, ascending, each tagged with the level it first
/// appears on.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedGrid {
    n: usize,
    kept: Vec<usize>,
    levels: Vec<u8>,
    options: CompressOptions,
    threshold: f64,
}

impl CompressedGrid {
    pub fn from_parts(
        n: usize,
        kept: Vec<usize>,
        levels: Vec<u8>,
        options: CompressOptions,
        threshold: f64,
    ) -> Result<Self> {
        if kept.len() != levels.len() {
            return Err(Error::Input(
                "one level tag per retained point is required".into(),
            ));
        }
        if kept.is_empty() {
            return Err(Error::Input("retained grid is empty".into()));
        }
        if kept.windows(2).any(|w| w[0] >= w[1]) || kept.last().is_some_and(|&k| k >= n * n) {
            return Err(Error::Input(
                "retained indices must be strictly increasing and inside the grid".into(),
            ));
        }
        Ok(Self {
            n,
            kept,
            levels,
            options,
            threshold,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn options(&self) -> CompressOptions {
        self.options
    }

    /// Threshold actually applied to the detail magnitudes.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Compression ratio `S / S~`.
    pub fn sigma(&self) -> f64 {
        (self.n * self.n) as f64 / self.kept.len() as f64
    }

    pub fn contains(&self, index: usize) -> bool {
        self.kept.binary_search(&index).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n * self.n];
        for &k in &self.kept {
            mask[k] = true;
        }
        mask
    }
}

/// Builds the compressed grid from a beamformer map.
///
/// Every level is predicted from the exact map values on the next coarser
/// level, and a node is retained when `|predicted - actual| >= threshold`.
pub fn compress<T: Real>(b: &BeamMap<T>, options: CompressOptions) -> Result<CompressedGrid> {
    if !(options.epsilon > 0.0) || !options.epsilon.is_finite() {
        return Err(Error::Config(format!(
            "epsilon must be positive and finite, got {}",
            options.epsilon
        )));
    }
    let grids = build_nested_grids(b.n())?;
    let threshold = match options.mode {
        ThresholdMode::Relative => options.epsilon * b.max_abs().as_f64(),
        ThresholdMode::Absolute => options.epsilon,
    };
    let values = b.values();

    let mut tagged: Vec<(usize, u8)> = grids.level_indices(0).into_iter().map(|i| (i, 0)).collect();
    for j in (0..grids.max_level()).rev() {
        for (idx, pred) in predict(&grids, j, values, options.stencil) {
            let detail = (pred - values[idx]).abs().as_f64();
            if detail >= threshold {
                tagged.push((idx, (j + 1) as u8));
            }
        }
    }
    tagged.sort_unstable_by_key(|t| t.0);
    let (kept, levels) = tagged.into_iter().unzip();
    CompressedGrid::from_parts(b.n(), kept, levels, options, threshold)
}

/// Rebuilds the map from its retained values by cascading the interpolation
/// from the coarsest level upwards (discarded details set to zero) and
/// returns the largest absolute deviation from `b`.
pub fn reconstruct_error_bound_check<T: Real>(b: &BeamMap<T>, cg: &CompressedGrid) -> Result<T> {
    if cg.n() != b.n() {
        return Err(Error::Input(format!(
            "compressed grid is for N = {}, map has N = {}",
            cg.n(),
            b.n()
        )));
    }
    let grids = build_nested_grids(b.n())?;
    let mask = cg.mask();
    let values = b.values();
    let mut recon = vec![T::zero(); values.len()];
    for i in grids.level_indices(0) {
        recon[i] = values[i];
    }
    for j in 0..grids.max_level() {
        for (idx, pred) in predict(&grids, j, &recon, cg.options().stencil) {
            recon[idx] = if mask[idx] { values[idx] } else { pred };
        }
    }
    Ok(values
        .iter()
        .zip(&recon)
        .fold(T::zero(), |m, (a, r)| m.max((*a - *r).abs())))
}
