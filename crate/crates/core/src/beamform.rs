//! Steering vectors, the delay-and-sum map and the PSF matrix of the
//! deconvolution system `A x = b`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ArraySetup, ScanGrid};
use crate::matrix::DenseMatrix;
use crate::parallel::Parallelism;
use crate::scalar::Real;
use crate::synth::SpectralData;

/// Default ceiling for the dense PSF matrix: 2 GiB.
pub const DEFAULT_MEMORY_BUDGET: u128 = 2 << 30;

/// Real map on the `N x N` scan grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMap<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Real> BeamMap<T> {
    pub fn new(n: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Input(format!(
                "map of side {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("map value {i} is not finite")));
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![T::zero(); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.n + col]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Index of the largest value; the first one wins on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| *v * factor).collect(),
        }
    }
}

/// Steering (`v`) and propagation (`g`) vectors for every grid point.
///
/// Both are stored point-major: entry `(s, m)` lives at `s * M + m`.
#[derive(Debug, Clone)]
pub struct SteeringSet<T> {
    num_points: usize,
    num_mics: usize,
    wavenumber: T,
    steer: Vec<Complex<T>>,
    propagation: Vec<Complex<T>>,
}

impl<T: Real> SteeringSet<T> {
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_mics(&self) -> usize {
        self.num_mics
    }

    pub fn wavenumber(&self) -> T {
        self.wavenumber
    }

    /// Steering vector `v(r_s)`.
    pub fn steer(&self, s: usize) -> &[Complex<T>] {
        &self.steer[s * self.num_mics..(s + 1) * self.num_mics]
    }

    /// Propagation vector `g(r_s)`, the column of `G` for point `s`.
    pub fn propagation(&self, s: usize) -> &[Complex<T>] {
        &self.propagation[s * self.num_mics..(s + 1) * self.num_mics]
    }
}

fn mic_distance<T: Real>(point: [T; 3], mic: [T; 3]) -> T {
    let dx = point[0] - mic[0];
    let dy = point[1] - mic[1];
    let dz = point[2] - mic[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn centre_distance<T: Real>(point: [T; 3]) -> T {
    (point[0] * point[0] + point[1] * point[1] + point[2] * point[2]).sqrt()
}

/// `g_m(r) = |r| / |r - r_m| * exp(-j k |r - r_m|)`.
///
/// The amplitude is normalised to the pressure a source produces at the array
/// centre.
pub fn propagation_vector<T: Real>(
    setup: &ArraySetup<T>,
    point: [T; 3],
) -> Result<Vec<Complex<T>>> {
    let k = setup.wavenumber();
    let r0 = centre_distance(point);
    if r0 == T::zero() {
        return Err(Error::Input("focus point at the array centre".into()));
    }
    setup
        .mics()
        .iter()
        .enumerate()
        .map(|(m, mic)| {
            let d = mic_distance(point, *mic);
            if d == T::zero() {
                return Err(Error::Singularity { point: 0, mic: m });
            }
            Ok(Complex::from_polar(r0 / d, -k * d))
        })
        .collect()
}

/// `v_m(r) = |r - r_m| / |r| * exp(-j k |r - r_m|)`.
pub fn steering_vector<T: Real>(setup: &ArraySetup<T>, point: [T; 3]) -> Result<Vec<Complex<T>>> {
    let k = setup.wavenumber();
    let r0 = centre_distance(point);
    if r0 == T::zero() {
        return Err(Error::Input("focus point at the array centre".into()));
    }
    setup
        .mics()
        .iter()
        .enumerate()
        .map(|(m, mic)| {
            let d = mic_distance(point, *mic);
            if d == T::zero() {
                return Err(Error::Singularity { point: 0, mic: m });
            }
            Ok(Complex::from_polar(d / r0, -k * d))
        })
        .collect()
}

pub fn steering<T: Real>(
    setup: &ArraySetup<T>,
    grid: &ScanGrid<T>,
    par: Parallelism,
) -> Result<SteeringSet<T>> {
    let m = setup.num_mics();
    type Pair<T> = (Vec<Complex<T>>, Vec<Complex<T>>);
    let per_point: Vec<Result<Pair<T>>> = par.install(|| {
        grid.points()
            .par_iter()
            .enumerate()
            .map(|(s, p)| {
                let tag = |e: Error| match e {
                    Error::Singularity { mic, .. } => Error::Singularity { point: s, mic },
                    other => other,
                };
                let v = steering_vector(setup, *p).map_err(tag)?;
                let g = propagation_vector(setup, *p).map_err(tag)?;
                Ok((v, g))
            })
            .collect()
    });
    let mut steer = Vec::with_capacity(grid.len() * m);
    let mut propagation = Vec::with_capacity(grid.len() * m);
    for item in per_point {
        let (v, g) = item?;
        steer.extend(v);
        propagation.extend(g);
    }
    Ok(SteeringSet {
        num_points: grid.len(),
        num_mics: m,
        wavenumber: setup.wavenumber(),
        steer,
        propagation,
    })
}

/// Mean-square delay-and-sum output `v^H C v / M^2` at every grid point.
///
/// With a diagonal-removed CSM the normalisation becomes `M^2 - M` and
/// negative values are clamped to zero.
pub fn das_map<T: Real>(
    data: &SpectralData<T>,
    steer: &SteeringSet<T>,
    n: usize,
    par: Parallelism,
) -> Result<BeamMap<T>> {
    let m = data.num_mics();
    if m != steer.num_mics() {
        return Err(Error::Input(format!(
            "CSM has {m} microphones but steering set has {}",
            steer.num_mics()
        )));
    }
    if n * n != steer.num_points() {
        return Err(Error::Input(format!(
            "steering set has {} points, expected {}",
            steer.num_points(),
            n * n
        )));
    }
    let mf = T::lit(m as f64);
    let norm = if data.diagonal_removed() {
        mf * mf - mf
    } else {
        mf * mf
    };
    let csm = data.csm();
    let values: Vec<T> = par.install(|| {
        (0..steer.num_points())
            .into_par_iter()
            .map(|s| {
                let v = steer.steer(s);
                let mut acc = Complex::new(T::zero(), T::zero());
                for (i, vi) in v.iter().enumerate() {
                    let row = &csm[i * m..(i + 1) * m];
                    let mut cv = Complex::new(T::zero(), T::zero());
                    for (c, vj) in row.iter().zip(v) {
                        cv = cv + *c * *vj;
                    }
                    acc = acc + vi.conj() * cv;
                }
                let b = acc.re / norm;
                if data.diagonal_removed() {
                    b.max(T::zero())
                } else {
                    b
                }
            })
            .collect()
    });
    BeamMap::new(n, values)
}

#[derive(Debug, Clone, Copy)]
pub struct PsfOptions {
    /// Build the PSF of a beamformer that runs on a diagonal-removed CSM.
    pub diagonal_removed: bool,
    pub memory_budget: u128,
}

impl Default for PsfOptions {
    fn default() -> Self {
        Self {
            diagonal_removed: false,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Dense PSF matrix: column `s` is the beamformer response to a unit source
/// at grid point `s`.
#[derive(Debug, Clone)]
pub struct PsfSystem<T> {
    n: usize,
    diagonal_removed: bool,
    matrix: DenseMatrix<T>,
}

impl<T: Real> PsfSystem<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.dim() == 0
    }

    pub fn diagonal_removed(&self) -> bool {
        self.diagonal_removed
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.matrix.get(row, col)
    }

    pub fn column(&self, s: usize) -> Vec<T> {
        self.matrix.column(s)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.matrix.get(i, i)).collect()
    }
}

/// Assembles `A[r, s] = |v(r)^H g(r_s)|^2 / M^2`.
///
/// Rows are filled in parallel; every entry is computed independently, so the
/// result does not depend on the parallelism width.
pub fn psf_matrix<T: Real>(
    grid: &ScanGrid<T>,
    steer: &SteeringSet<T>,
    options: PsfOptions,
    par: Parallelism,
) -> Result<PsfSystem<T>> {
    let s_count = grid.len();
    if steer.num_points() != s_count {
        return Err(Error::Input(format!(
            "steering set has {} points, grid has {s_count}",
            steer.num_points()
        )));
    }
    let required = (s_count as u128) * (s_count as u128) * std::mem::size_of::<T>() as u128;
    if required > options.memory_budget {
        return Err(Error::Resource {
            required_bytes: required,
            budget_bytes: options.memory_budget,
        });
    }
    let m = steer.num_mics();
    let mf = T::lit(m as f64);
    let norm = if options.diagonal_removed {
        mf * mf - mf
    } else {
        mf * mf
    };

    // Split real/imaginary parts of G for a tight inner loop.
    let g_re: Vec<T> = steer.propagation.iter().map(|c| c.re).collect();
    let g_im: Vec<T> = steer.propagation.iter().map(|c| c.im).collect();
    let g_abs2: Vec<T> = steer.propagation.iter().map(|c| c.norm_sqr()).collect();

    let mut data = vec![T::zero(); s_count * s_count];
    par.install(|| {
        data.par_chunks_mut(s_count)
            .enumerate()
            .for_each(|(r, row)| {
                let v = steer.steer(r);
                // conj(v) = (a - j b)
                let a: Vec<T> = v.iter().map(|c| c.re).collect();
                let b: Vec<T> = v.iter().map(|c| c.im).collect();
                let v_abs2: Vec<T> = v.iter().map(|c| c.norm_sqr()).collect();
                for (s, out) in row.iter_mut().enumerate() {
                    let gr = &g_re[s * m..(s + 1) * m];
                    let gi = &g_im[s * m..(s + 1) * m];
                    let mut re = T::zero();
                    let mut im = T::zero();
                    for i in 0..m {
                        re = re + a[i] * gr[i] + b[i] * gi[i];
                        im = im + a[i] * gi[i] - b[i] * gr[i];
                    }
                    let mut value = re * re + im * im;
                    if options.diagonal_removed {
                        let ga = &g_abs2[s * m..(s + 1) * m];
                        let self_terms: T = v_abs2.iter().zip(ga).map(|(x, y)| *x * *y).sum();
                        value = value - self_terms;
                    }
                    *out = (value / norm).max(T::zero());
                }
            });
    });
    Ok(PsfSystem {
        n: grid.n(),
        diagonal_removed: options.diagonal_removed,
        matrix: DenseMatrix::from_row_major(s_count, data)?,
    })
}

/// Forward model `b = A x` for a nonnegative source distribution.
pub fn dirty_map_from_sources<T: Real>(psf: &PsfSystem<T>, x: &BeamMap<T>) -> Result<BeamMap<T>> {
    if x.len() != psf.len() {
        return Err(Error::Input(format!(
            "source map has {} points, PSF system has {}",
            x.len(),
            psf.len()
        )));
    }
    if x.values().iter().any(|v| *v < T::zero()) {
        return Err(Error::Input(
            "source distribution must be nonnegative".into(),
        ));
    }
    BeamMap::new(psf.n(), psf.matrix.mul_vec(x.values()))
}
