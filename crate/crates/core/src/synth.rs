//! Synthetic source scenes and their cross-spectral matrices.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::beamform::propagation_vector;
use crate::error::{Error, Result};
use crate::geometry::{ArraySetup, ScanGrid};
use crate::scalar::Real;

/// Incoherent point source on a grid node. `amplitude` is the pressure it
/// produces at the array centre, in Pa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource<T> {
    pub row: usize,
    pub col: usize,
    pub amplitude: T,
}

impl<T: Real> PointSource<T> {
    pub fn new(row: usize, col: usize, amplitude: T) -> Self {
        Self {
            row,
            col,
            amplitude,
        }
    }

    /// Power descriptor `|q|^2` placed in the source distribution `x`.
    pub fn power(&self) -> T {
        self.amplitude * self.amplitude
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceScene<T> {
    pub sources: Vec<PointSource<T>>,
    pub frequency: T,
}

impl<T: Real> SourceScene<T> {
    pub fn new(sources: Vec<PointSource<T>>, frequency: T) -> Self {
        Self { sources, frequency }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Sum of the power descriptors.
    pub fn total_power(&self) -> T {
        self.sources.iter().map(PointSource::power).sum()
    }

    /// Checks indices and amplitudes against an `n x n` grid and returns the
    /// flat grid index of each source.
    pub fn indices(&self, n: usize) -> Result<Vec<usize>> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(self.sources.len());
        for (i, src) in self.sources.iter().enumerate() {
            if src.row >= n || src.col >= n {
                return Err(Error::Input(format!(
                    "source {i} at ({}, {}) lies outside the {n}x{n} grid",
                    src.row, src.col
                )));
            }
            if !(src.amplitude >= T::zero()) || !src.amplitude.is_finite() {
                return Err(Error::Input(format!(
                    "source {i} has invalid amplitude {}",
                    src.amplitude
                )));
            }
            let s = src.row * n + src.col;
            if !seen.insert(s) {
                return Err(Error::Input(format!(
                    "duplicate source at ({}, {})",
                    src.row, src.col
                )));
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Source distribution of power descriptors on the `n x n` grid.
    pub fn power_map(&self, n: usize) -> Result<Vec<T>> {
        let mut x = vec![T::zero(); n * n];
        for (s, src) in self.indices(n)?.into_iter().zip(&self.sources) {
            x[s] = src.power();
        }
        Ok(x)
    }
}

/// Hermitian cross-spectral matrix at one angular frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData<T> {
    m: usize,
    csm: Vec<Complex<T>>,
    omega: T,
    frames: usize,
    diagonal_removed: bool,
}

impl<T: Real> SpectralData<T> {
    pub fn new(m: usize, csm: Vec<Complex<T>>, omega: T, frames: usize) -> Result<Self> {
        if csm.len() != m * m {
            return Err(Error::Input(format!(
                "CSM for {m} microphones needs {} entries, got {}",
                m * m,
                csm.len()
            )));
        }
        Ok(Self {
            m,
            csm,
            omega,
            frames,
            diagonal_removed: false,
        })
    }

    pub fn num_mics(&self) -> usize {
        self.m
    }

    /// Row-major `M x M` entries.
    pub fn csm(&self) -> &[Complex<T>] {
        &self.csm
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.csm[i * self.m + j]
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn diagonal_removed(&self) -> bool {
        self.diagonal_removed
    }

    pub fn trace(&self) -> T {
        (0..self.m).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.csm.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest `|C - C^H|` entry.
    pub fn hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.m {
            for j in 0..self.m {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            csm: self.csm.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }
}

/// Exact noiseless CSM of incoherent sources, `C = sum_s |q_s|^2 g_s g_s^H`.
pub fn scene_csm_ideal<T: Real>(
    scene: &SourceScene<T>,
    setup: &ArraySetup<T>,
    grid: &ScanGrid<T>,
) -> Result<SpectralData<T>> {
    check_frequency(scene, setup)?;
    let indices = scene.indices(grid.n())?;
    let m = setup.num_mics();
    let mut csm = vec![Complex::new(T::zero(), T::zero()); m * m];
    for (s, src) in indices.iter().zip(&scene.sources) {
        let u: Vec<Complex<T>> = propagation_vector(setup, grid.point(*s))?
            .into_iter()
            .map(|g| g * src.amplitude)
            .collect();
        accumulate_outer(&mut csm, &u);
    }
    SpectralData::new(m, csm, setup.angular_frequency(), 1)
}

/// Phasor model for the per-frame source signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePhasors {
    /// Independent circular complex Gaussian draws with variance `|q|^2`.
    CircularGaussian,
    /// Real phasor equal to the amplitude in every frame.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    pub frames: usize,
    /// Array-averaged signal-to-noise ratio in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
    pub phasors: SourcePhasors,
}

impl SamplingOptions {
    pub fn new(frames: usize, snr_db: f64, seed: u64) -> Self {
        Self {
            frames,
            snr_db,
            seed,
            phasors: SourcePhasors::CircularGaussian,
        }
    }
}

/// Frame-averaged CSM, `C = (1/I) sum_i p_i p_i^H`, with each frame holding
/// fresh source phasors plus white microphone noise.
///
/// The noise variance per microphone is the array-averaged signal power of
/// the ideal CSM divided by `10^(snr_db / 10)`.
pub fn scene_csm_sampled<T: Real>(
    scene: &SourceScene<T>,
    setup: &ArraySetup<T>,
    grid: &ScanGrid<T>,
    options: SamplingOptions,
) -> Result<SpectralData<T>> {
    if options.frames == 0 {
        return Err(Error::Input("at least one frame is required".into()));
    }
    if options.snr_db.is_nan() {
        return Err(Error::Input("SNR must not be NaN".into()));
    }
    check_frequency(scene, setup)?;
    let indices = scene.indices(grid.n())?;
    let m = setup.num_mics();

    let columns: Vec<Vec<Complex<T>>> = indices
        .iter()
        .map(|s| propagation_vector(setup, grid.point(*s)))
        .collect::<Result<_>>()?;

    let noise_sigma = if options.snr_db.is_finite() {
        let signal: f64 = columns
            .iter()
            .zip(&scene.sources)
            .map(|(g, src)| {
                src.power().as_f64() * g.iter().map(|c| c.norm_sqr().as_f64()).sum::<f64>()
            })
            .sum::<f64>()
            / m as f64;
        if !(signal > 0.0) {
            return Err(Error::Input(
                "signal power is zero, so a finite SNR has no reference".into(),
            ));
        }
        Some((signal / 10f64.powf(options.snr_db / 10.0)).sqrt())
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut gauss = |scale: f64| -> Complex<T> {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex::new(T::lit(re * scale * half), T::lit(im * scale * half))
    };

    let mut csm = vec![Complex::new(T::zero(), T::zero()); m * m];
    let mut p = vec![Complex::new(T::zero(), T::zero()); m];
    for _ in 0..options.frames {
        p.iter_mut()
            .for_each(|v| *v = Complex::new(T::zero(), T::zero()));
        for (g, src) in columns.iter().zip(&scene.sources) {
            let a = match options.phasors {
                SourcePhasors::CircularGaussian => gauss(src.amplitude.as_f64()),
                SourcePhasors::Fixed => Complex::new(src.amplitude, T::zero()),
            };
            for (pm, gm) in p.iter_mut().zip(g) {
                *pm = *pm + *gm * a;
            }
        }
        if let Some(sigma) = noise_sigma {
            for pm in p.iter_mut() {
                *pm = *pm + gauss(sigma);
            }
        }
        accumulate_outer(&mut csm, &p);
    }
    let inv = T::one() / T::lit(options.frames as f64);
    csm.iter_mut().for_each(|c| *c = *c * inv);
    SpectralData::new(m, csm, setup.angular_frequency(), options.frames)
}

/// Zeros the CSM diagonal. Removing it twice is an error.
pub fn remove_diagonal<T: Real>(data: &SpectralData<T>) -> Result<SpectralData<T>> {
    if data.diagonal_removed {
        return Err(Error::State("CSM diagonal already removed".into()));
    }
    let mut out = data.clone();
    for i in 0..out.m {
        out.csm[i * out.m + i] = Complex::new(T::zero(), T::zero());
    }
    out.diagonal_removed = true;
    Ok(out)
}

fn accumulate_outer<T: Real>(csm: &mut [Complex<T>], u: &[Complex<T>]) {
    let m = u.len();
    for i in 0..m {
        for j in 0..m {
            csm[i * m + j] = csm[i * m + j] + u[i] * u[j].conj();
        }
    }
}

fn check_frequency<T: Real>(scene: &SourceScene<T>, setup: &ArraySetup<T>) -> Result<()> {
    let (a, b) = (scene.frequency.as_f64(), setup.frequency().as_f64());
    if (a - b).abs() > 1e-9 * b.abs() {
        return Err(Error::Input(format!(
            "scene frequency {a} Hz differs from setup frequency {b} Hz"
        )));
    }
    Ok(())
}

/// Side of the grid the built-in cases are laid out on.
pub const BUILTIN_GRID_SIDE: usize = 50;

/// Frequency of the built-in cases in Hz.
pub const BUILTIN_FREQUENCY: f64 = 3000.0;

/// "DAMAS" in a 3/3/5/3/3-wide, 6-row font. Each cell maps to grid column
/// `5 + 2 * x` and row `20 + 2 * y`.
const DAMAS_RASTER: [&str; 6] = [
    "XX. XXX X...X XXX XXX",
    "X.X X.X XX.XX X.X X..",
    "X.X X.X X.X.X X.X XXX",
    "X.X XXX X.X.X XXX ..X",
    "X.X X.X X...X X.X X.X",
    "XXX X.X X...X X.X XXX",
];

/// Built-in simulation scenes on the 50 x 50 grid at 3 kHz.
///
/// 1. unit source at (24, 24)
/// 2. unit sources at (24, 24) and (24, 25)
/// 3. 1.000 Pa at (24, 24) and 0.316 Pa at (24, 28)
/// 4. 70 unit sources spelling "DAMAS"
///
/// Positions are zero-based `(row, col)`. In one-based `(x, y)` labels the
/// first three cases sit at (25, 25), (26, 25) and (29, 25).
pub fn builtin_case<T: Real>(case_id: u32) -> Result<SourceScene<T>> {
    let unit = T::one();
    let sources = match case_id {
        1 => vec![PointSource::new(24, 24, unit)],
        2 => vec![
            PointSource::new(24, 24, unit),
            PointSource::new(24, 25, unit),
        ],
        3 => vec![
            PointSource::new(24, 24, unit),
            PointSource::new(24, 28, T::lit(0.316)),
        ],
        4 => damas_raster()
            .into_iter()
            .map(|(row, col)| PointSource::new(row, col, unit))
            .collect(),
        other => {
            return Err(Error::Input(format!(
                "unknown case {other}; expected 1..=4"
            )))
        }
    };
    Ok(SourceScene::new(sources, T::lit(BUILTIN_FREQUENCY)))
}

fn damas_raster() -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for (y, line) in DAMAS_RASTER.iter().enumerate() {
        for (x, ch) in line.chars().enumerate() {
            if ch == 'X' {
                cells.push((20 + 2 * y, 5 + 2 * x));
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_scan_grid, default_array};

    fn small() -> (ArraySetup<f64>, ScanGrid<f64>) {
        let setup = ArraySetup::new(
            default_array(4, 1.0, 0).unwrap(),
            1.0,
            5.0,
            60f64.to_radians(),
            3000.0,
            340.0,
        )
        .unwrap();
        let grid = build_scan_grid(&setup, 8).unwrap();
        (setup, grid)
    }

    #[test]
    fn empty_scene_gives_zero_csm() {
        let (setup, grid) = small();
        let c = scene_csm_ideal(&SourceScene::new(vec![], 3000.0), &setup, &grid).unwrap();
        assert!(c.csm().iter().all(|v| v.norm() == 0.0));
        assert_eq!(c.frames(), 1);
    }

    #[test]
    fn single_source_is_rank_one() {
        let (setup, grid) = small();
        let scene = SourceScene::new(vec![PointSource::new(3, 5, 1.0)], 3000.0);
        let c = scene_csm_ideal(&scene, &setup, &grid).unwrap();
        let g = propagation_vector(&setup, grid.point(grid.index(3, 5))).unwrap();
        let trace: f64 = g.iter().map(|v| v.norm_sqr()).sum();
        assert!((c.trace() - trace).abs() < 1e-12 * trace);
        // every 2x2 minor vanishes for a rank-one matrix
        for i in 0..4 {
            for j in 0..4 {
                let minor = c.get(0, 0) * c.get(i, j) - c.get(0, j) * c.get(i, 0);
                assert!(minor.norm() < 1e-12);
            }
        }
        assert_eq!(c.hermitian_defect(), 0.0);
    }

    #[test]
    fn two_sources_sum_term_by_term() {
        let (setup, grid) = small();
        let scene = SourceScene::new(
            vec![PointSource::new(1, 1, 1.0), PointSource::new(6, 2, 1.0)],
            3000.0,
        );
        let c = scene_csm_ideal(&scene, &setup, &grid).unwrap();
        let ga = propagation_vector(&setup, grid.point(grid.index(1, 1))).unwrap();
        let gb = propagation_vector(&setup, grid.point(grid.index(6, 2))).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = ga[i] * ga[j].conj() + gb[i] * gb[j].conj();
                assert!((c.get(i, j) - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn out_of_range_and_duplicate_sources_are_rejected() {
        let (setup, grid) = small();
        let bad = SourceScene::new(vec![PointSource::new(8, 0, 1.0)], 3000.0);
        assert!(matches!(
            scene_csm_ideal(&bad, &setup, &grid),
            Err(Error::Input(_))
        ));
        let dup = SourceScene::new(
            vec![PointSource::new(1, 1, 1.0), PointSource::new(1, 1, 2.0)],
            3000.0,
        );
        assert!(scene_csm_ideal(&dup, &setup, &grid).is_err());
        let neg = SourceScene::new(vec![PointSource::new(1, 1, -1.0)], 3000.0);
        assert!(scene_csm_ideal(&neg, &setup, &grid).is_err());
    }

    #[test]
    fn fixed_phasor_noiseless_single_frame_is_exact() {
        let (setup, grid) = small();
        let scene = SourceScene::new(vec![PointSource::new(2, 3, 0.7)], 3000.0);
        let ideal = scene_csm_ideal(&scene, &setup, &grid).unwrap();
        let opts = SamplingOptions {
            frames: 1,
            snr_db: f64::INFINITY,
            seed: 9,
            phasors: SourcePhasors::Fixed,
        };
        let sampled = scene_csm_sampled(&scene, &setup, &grid, opts).unwrap();
        assert_eq!(ideal.csm(), sampled.csm());
    }

    #[test]
    fn sampled_is_deterministic_per_seed() {
        let (setup, grid) = small();
        let scene = SourceScene::new(vec![PointSource::new(2, 3, 1.0)], 3000.0);
        let opts = SamplingOptions::new(20, 15.0, 42);
        let a = scene_csm_sampled(&scene, &setup, &grid, opts).unwrap();
        let b = scene_csm_sampled(&scene, &setup, &grid, opts).unwrap();
        assert_eq!(a, b);
        let c =
            scene_csm_sampled(&scene, &setup, &grid, SamplingOptions::new(20, 15.0, 43)).unwrap();
        assert_ne!(a, c);
        assert!(a.hermitian_defect() < 1e-12);
    }

    #[test]
    fn zero_scene_with_finite_snr_is_an_error() {
        let (setup, grid) = small();
        let scene = SourceScene::new(vec![PointSource::new(2, 3, 0.0)], 3000.0);
        assert!(
            scene_csm_sampled(&scene, &setup, &grid, SamplingOptions::new(4, 15.0, 0)).is_err()
        );
        let silent = scene_csm_sampled(
            &scene,
            &setup,
            &grid,
            SamplingOptions::new(4, f64::INFINITY, 0),
        )
        .unwrap();
        assert!(silent.csm().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn diagonal_removal() {
        let (setup, grid) = small();
        let scene = SourceScene::new(vec![PointSource::new(2, 3, 1.0)], 3000.0);
        let c =
            scene_csm_sampled(&scene, &setup, &grid, SamplingOptions::new(10, 10.0, 1)).unwrap();
        let d = remove_diagonal(&c).unwrap();
        assert!(d.diagonal_removed());
        assert_eq!(d.trace(), 0.0);
        assert!(d.hermitian_defect() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(d.get(i, j), c.get(i, j));
                }
            }
        }
        assert!(matches!(remove_diagonal(&d), Err(Error::State(_))));

        let mut eye = vec![Complex::new(0.0, 0.0); 9];
        for i in 0..3 {
            eye[i * 3 + i] = Complex::new(1.0, 0.0);
        }
        let eye = SpectralData::new(3, eye, 1.0, 1).unwrap();
        let z = remove_diagonal(&eye).unwrap();
        assert!(z.csm().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn builtin_cases() {
        let c1: SourceScene<f64> = builtin_case(1).unwrap();
        assert_eq!(c1.sources, vec![PointSource::new(24, 24, 1.0)]);
        let c2: SourceScene<f64> = builtin_case(2).unwrap();
        assert_eq!(c2.len(), 2);
        let c3: SourceScene<f64> = builtin_case(3).unwrap();
        let amps: Vec<f64> = c3.sources.iter().map(|s| s.amplitude).collect();
        assert_eq!(amps, vec![1.0, 0.316]);
        let level_db = 10.0 * (c3.sources[0].power() / c3.sources[1].power()).log10();
        assert!((level_db - 10.0).abs() < 0.01);

        let c4: SourceScene<f64> = builtin_case(4).unwrap();
        assert_eq!(c4.len(), 70);
        assert!(c4.sources.iter().all(|s| s.amplitude == 1.0));
        let cols: Vec<usize> = c4.sources.iter().map(|s| s.col).collect();
        let rows: Vec<usize> = c4.sources.iter().map(|s| s.row).collect();
        assert_eq!(*cols.iter().min().unwrap(), 5);
        assert_eq!(*cols.iter().max().unwrap(), 45);
        assert_eq!(*rows.iter().min().unwrap(), 20);
        assert_eq!(*rows.iter().max().unwrap(), 30);
        assert!(c4.indices(BUILTIN_GRID_SIDE).is_ok());

        assert!(builtin_case::<f64>(0).is_err());
        assert!(builtin_case::<f64>(5).is_err());
    }
}
