//! DAMAS: projected Gauss-Seidel sweeps for `A x = b` subject to `x >= 0`,
//! on the full grid or on any retained subset of grid points.

use std::time::Instant;

use crate::beamform::{BeamMap, PsfSystem};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, DenseMatrix};
use crate::scalar::Real;
use crate::wavelet::CompressedGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// `i = 0, 1, ..., S-1` in every sweep.
    Forward,
    /// Forward on even sweeps, backward on odd ones.
    Alternating,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Forward => "forward",
            SweepMode::Alternating => "alternating",
        }
    }
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(SweepMode::Forward),
            "alternating" => Ok(SweepMode::Alternating),
            other => Err(Error::Config(format!("unknown sweep mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess<T> {
    Zero,
    Provided(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig<T> {
    pub iterations: usize,
    pub sweep: SweepMode,
    pub initial: InitialGuess<T>,
}

impl<T> SolveConfig<T> {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            sweep: SweepMode::Forward,
            initial: InitialGuess::Zero,
        }
    }
}

impl<T> Default for SolveConfig<T> {
    fn default() -> Self {
        Self::new(1000)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub x: Vec<T>,
    /// `||A x - b||_2` after each sweep.
    pub residuals: Vec<T>,
    /// Wall time of each sweep in seconds; residual evaluation is excluded.
    pub sweep_seconds: Vec<f64>,
}

impl<T: Real> SolveResult<T> {
    pub fn total_seconds(&self) -> f64 {
        self.sweep_seconds.iter().sum()
    }

    pub fn seconds_per_iteration(&self) -> f64 {
        if self.sweep_seconds.is_empty() {
            0.0
        } else {
            self.total_seconds() / self.sweep_seconds.len() as f64
        }
    }

    pub fn final_residual(&self) -> Option<T> {
        self.residuals.last().copied()
    }
}

/// One projected Gauss-Seidel update of component `i`, in place.
///
/// `r_i = sum_j A_ij x_j - b_i` uses the already-updated entries, which is
/// exactly the split into new (`j < i`) and old (`j >= i`) values.
#[inline]
fn relax<T: Real>(a: &DenseMatrix<T>, b: &[T], x: &mut [T], i: usize) -> Result<()> {
    let r = dot(a.row(i), x) - b[i];
    let next = x[i] - r / a.get(i, i);
    if !next.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite iterate at component {i}"
        )));
    }
    x[i] = next.max(T::zero());
    Ok(())
}

/// Runs a single sweep in the given direction.
pub fn damas_sweep<T: Real>(
    a: &DenseMatrix<T>,
    b: &[T],
    x: &mut [T],
    backward: bool,
) -> Result<()> {
    let n = a.dim();
    if backward {
        for i in (0..n).rev() {
            relax(a, b, x, i)?;
        }
    } else {
        for i in 0..n {
            relax(a, b, x, i)?;
        }
    }
    Ok(())
}

pub fn damas_solve<T: Real>(
    a: &DenseMatrix<T>,
    b: &[T],
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Input(format!(
            "right-hand side has {} entries, matrix is {n}x{n}",
            b.len()
        )));
    }
    if cfg.iterations == 0 {
        return Err(Error::Config("at least one iteration is required".into()));
    }
    if let Some(i) = (0..n).find(|&i| !(a.get(i, i) > T::zero())) {
        return Err(Error::Solver(format!(
            "diagonal entry {i} is {} but must be positive",
            a.get(i, i)
        )));
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "right-hand side entry {i} is not finite"
        )));
    }
    let mut x = match &cfg.initial {
        InitialGuess::Zero => vec![T::zero(); n],
        InitialGuess::Provided(x0) => {
            if x0.len() != n {
                return Err(Error::Input(format!(
                    "initial guess has {} entries, expected {n}",
                    x0.len()
                )));
            }
            x0.clone()
        }
    };

    let mut residuals = Vec::with_capacity(cfg.iterations);
    let mut sweep_seconds = Vec::with_capacity(cfg.iterations);
    let mut scratch = vec![T::zero(); n];
    for k in 0..cfg.iterations {
        let backward = cfg.sweep == SweepMode::Alternating && k % 2 == 1;
        let start = Instant::now();
        damas_sweep(a, b, &mut x, backward)?;
        sweep_seconds.push(start.elapsed().as_secs_f64());
        debug_assert!(x.iter().all(|v| *v >= T::zero()));

        for (i, out) in scratch.iter_mut().enumerate() {
            *out = dot(a.row(i), &x) - b[i];
        }
        residuals.push(norm2(&scratch));
    }
    Ok(SolveResult {
        x,
        residuals,
        sweep_seconds,
    })
}

/// Linear system restricted to a retained subset of grid points.
#[derive(Debug, Clone)]
pub struct RestrictedSystem<T> {
    pub matrix: DenseMatrix<T>,
    pub rhs: Vec<T>,
    /// Full-grid index of each unknown.
    pub keep: Vec<usize>,
}

/// `A[keep, keep]` and `b[keep]`.
pub fn restrict_system<T: Real>(
    psf: &PsfSystem<T>,
    b: &BeamMap<T>,
    keep: &CompressedGrid,
) -> Result<RestrictedSystem<T>> {
    restrict_indices(psf, b, keep.kept())
}

pub fn restrict_indices<T: Real>(
    psf: &PsfSystem<T>,
    b: &BeamMap<T>,
    keep: &[usize],
) -> Result<RestrictedSystem<T>> {
    let s = psf.len();
    if b.len() != s {
        return Err(Error::Input(format!(
            "beamformer map has {} points, PSF system has {s}",
            b.len()
        )));
    }
    check_keep(keep, s)?;
    Ok(RestrictedSystem {
        matrix: psf.matrix().submatrix(keep),
        rhs: keep.iter().map(|&i| b.values()[i]).collect(),
        keep: keep.to_vec(),
    })
}

fn check_keep(keep: &[usize], s: usize) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::Input("retained grid is empty".into()));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input(
            "retained indices must be strictly increasing".into(),
        ));
    }
    if let Some(&last) = keep.last() {
        if last >= s {
            return Err(Error::Input(format!(
                "retained index {last} out of range for {s} points"
            )));
        }
    }
    Ok(())
}

/// Scatters a restricted solution back onto the full `n x n` grid.
pub fn embed_solution<T: Real>(x: &[T], keep: &[usize], n: usize) -> Result<BeamMap<T>> {
    if x.len() != keep.len() {
        return Err(Error::Input(format!(
            "{} values for {} retained points",
            x.len(),
            keep.len()
        )));
    }
    check_keep(keep, n * n)?;
    let mut full = vec![T::zero(); n * n];
    for (&i, &v) in keep.iter().zip(x) {
        full[i] = v;
    }
    BeamMap::new(n, full)
}
