//! Microphone array, scan plane and derived resolution quantities.
//!
//! The array lies in the plane `z = 0` with its centre at the origin. The scan
//! plane is parallel to it at `z = z0` and is sampled by an `N x N` equidistant
//! lattice spanning `[-L/2, L/2]` in both `x` and `y`, where
//! `L = 2 z0 tan(alpha / 2)`. Grid index `s = row * N + col`, with rows running
//! along `y` and columns along `x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Slack allowed when checking that microphones sit inside the aperture.
const APERTURE_TOL: f64 = 1e-9;

/// Largest recommended ratio between grid spacing and beamwidth.
pub const MAX_SPACING_RATIO: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ArraySetup<T> {
    mics: Vec<[T; 3]>,
    aperture: T,
    standoff: T,
    opening_angle: T,
    off_axis_angle: T,
    frequency: T,
    speed_of_sound: T,
}

impl<T: Real> ArraySetup<T> {
    /// Builds a validated setup. The off-axis angle defaults to half the
    /// opening angle, i.e. the corner direction of the scan plane.
    pub fn new(
        mics: Vec<[T; 3]>,
        aperture: T,
        standoff: T,
        opening_angle: T,
        frequency: T,
        speed_of_sound: T,
    ) -> Result<Self> {
        let setup = Self {
            mics,
            aperture,
            standoff,
            opening_angle,
            off_axis_angle: opening_angle / T::lit(2.0),
            frequency,
            speed_of_sound,
        };
        setup.validate()?;
        Ok(setup)
    }

    /// The simulation setup used by the built-in cases: 60-microphone spiral
    /// of 1 m aperture, scan plane 5 m away, 60 degree opening angle, 3 kHz,
    /// c0 = 340 m/s.
    pub fn simulation_default() -> Self {
        let aperture = T::lit(1.0);
        Self::new(
            default_array(60, aperture, 0).expect("valid spiral"),
            aperture,
            T::lit(5.0),
            T::lit(60f64.to_radians()),
            T::lit(3000.0),
            T::lit(340.0),
        )
        .expect("valid default setup")
    }

    pub fn with_off_axis_angle(mut self, phi: T) -> Result<Self> {
        self.off_axis_angle = phi;
        self.validate()?;
        Ok(self)
    }

    pub fn with_frequency(mut self, frequency: T) -> Result<Self> {
        self.frequency = frequency;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.aperture,
            self.standoff,
            self.opening_angle,
            self.off_axis_angle,
            self.frequency,
            self.speed_of_sound,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("setup parameters must be finite".into()));
        }
        if self.mics.len() < 2 {
            return Err(Error::Config(format!(
                "at least 2 microphones required, got {}",
                self.mics.len()
            )));
        }
        if !(self.aperture > T::zero()) {
            return Err(Error::Config("aperture diameter must be positive".into()));
        }
        if !(self.standoff > T::zero()) {
            return Err(Error::Config(
                "scan plane distance z0 must be positive".into(),
            ));
        }
        if !(self.opening_angle > T::zero() && self.opening_angle < T::PI()) {
            return Err(Error::Config("opening angle must lie in (0, pi)".into()));
        }
        if !(self.off_axis_angle.abs() < T::FRAC_PI_2()) {
            return Err(Error::Config(
                "off-axis angle must lie in (-pi/2, pi/2)".into(),
            ));
        }
        if !(self.frequency > T::zero()) {
            return Err(Error::Config("frequency must be positive".into()));
        }
        if !(self.speed_of_sound > T::zero()) {
            return Err(Error::Config("speed of sound must be positive".into()));
        }
        let limit = self.aperture.as_f64() / 2.0 + APERTURE_TOL;
        for (m, p) in self.mics.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!(
                    "microphone {m} has a non-finite coordinate"
                )));
            }
            let r = p[0].as_f64().hypot(p[1].as_f64());
            if r > limit {
                return Err(Error::Config(format!(
                    "microphone {m} at radius {r:.6} m lies outside the {:.6} m aperture",
                    self.aperture
                )));
            }
        }
        Ok(())
    }

    pub fn mics(&self) -> &[[T; 3]] {
        &self.mics
    }

    pub fn num_mics(&self) -> usize {
        self.mics.len()
    }

    pub fn aperture(&self) -> T {
        self.aperture
    }

    pub fn standoff(&self) -> T {
        self.standoff
    }

    pub fn opening_angle(&self) -> T {
        self.opening_angle
    }

    pub fn off_axis_angle(&self) -> T {
        self.off_axis_angle
    }

    pub fn frequency(&self) -> T {
        self.frequency
    }

    pub fn speed_of_sound(&self) -> T {
        self.speed_of_sound
    }

    pub fn angular_frequency(&self) -> T {
        T::TAU() * self.frequency
    }

    /// Wavenumber `k = omega / c0`.
    pub fn wavenumber(&self) -> T {
        self.angular_frequency() / self.speed_of_sound
    }

    /// Side length of the scan plane, `2 z0 tan(alpha / 2)`.
    pub fn scan_length(&self) -> T {
        T::lit(2.0) * self.standoff * (self.opening_angle / T::lit(2.0)).tan()
    }
}

/// Equidistant square lattice on the scan plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid<T> {
    n: usize,
    side_length: T,
    spacing: T,
    standoff: T,
    points: Vec<[T; 3]>,
}

impl<T: Real> ScanGrid<T> {
    pub fn new(setup: &ArraySetup<T>, n: usize) -> Result<Self> {
        build_scan_grid(setup, n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points `S = N * N`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn side_length(&self) -> T {
        self.side_length
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn standoff(&self) -> T {
        self.standoff
    }

    pub fn points(&self) -> &[[T; 3]] {
        &self.points
    }

    pub fn point(&self, s: usize) -> [T; 3] {
        self.points[s]
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.n && col < self.n);
        row * self.n + col
    }

    #[inline]
    pub fn row_col(&self, s: usize) -> (usize, usize) {
        (s / self.n, s % self.n)
    }

    /// In-plane distance between two grid points in meters.
    pub fn distance(&self, a: usize, b: usize) -> T {
        let (pa, pb) = (self.points[a], self.points[b]);
        (pa[0] - pb[0]).hypot(pa[1] - pb[1])
    }
}

pub fn build_scan_grid<T: Real>(setup: &ArraySetup<T>, n: usize) -> Result<ScanGrid<T>> {
    if n < 2 {
        return Err(Error::Config(format!(
            "grid needs at least 2 points per side, got {n}"
        )));
    }
    let side_length = setup.scan_length();
    let spacing = side_length / T::lit((n - 1) as f64);
    let half = side_length / T::lit(2.0);
    let z0 = setup.standoff();
    let mut points = Vec::with_capacity(n * n);
    for row in 0..n {
        let y = -half + spacing * T::lit(row as f64);
        for col in 0..n {
            let x = -half + spacing * T::lit(col as f64);
            points.push([x, y, z0]);
        }
    }
    Ok(ScanGrid {
        n,
        side_length,
        spacing,
        standoff: z0,
        points,
    })
}

/// 3 dB beamwidth from Rayleigh's criterion,
/// `B = 1.22 z0 c0 / (cos^3(phi) D f)`.
pub fn rayleigh_beamwidth<T: Real>(setup: &ArraySetup<T>) -> T {
    let cos_phi = setup.off_axis_angle().cos();
    T::lit(1.22) * setup.standoff() * setup.speed_of_sound()
        / (cos_phi * cos_phi * cos_phi * setup.aperture() * setup.frequency())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingRatio<T> {
    pub ratio: T,
    /// Set when the ratio exceeds the recommended maximum of 0.2.
    pub too_coarse: bool,
}

pub fn spacing_ratio<T: Real>(grid: &ScanGrid<T>, beamwidth: T) -> Result<SpacingRatio<T>> {
    if !(beamwidth > T::zero()) {
        return Err(Error::Input("beamwidth must be positive".into()));
    }
    let ratio = grid.spacing() / beamwidth;
    Ok(SpacingRatio {
        ratio,
        too_coarse: ratio > T::lit(MAX_SPACING_RATIO),
    })
}

/// Deterministic multi-arm logarithmic spiral filling a disc of diameter
/// `aperture`. Five arms are used when `m >= 5`; the seed only sets the
/// global rotation of the layout.
pub fn default_array<T: Real>(m: usize, aperture: T, seed: u64) -> Result<Vec<[T; 3]>> {
    if m < 2 {
        return Err(Error::Config(format!(
            "at least 2 microphones required, got {m}"
        )));
    }
    let aperture = aperture.as_f64();
    if !(aperture > 0.0 && aperture.is_finite()) {
        return Err(Error::Config("aperture diameter must be positive".into()));
    }
    let arms = m.min(5);
    let per_arm = m.div_ceil(arms);
    let r_inner = 0.06 * aperture;
    let r_outer = 0.49 * aperture;
    // Spiral angle of 50 degrees from the radial direction.
    let twist = 1.0 / 50f64.to_radians().tan();
    let rotation = ChaCha8Rng::seed_from_u64(seed).random::<f64>() * std::f64::consts::TAU;

    let mut mics = Vec::with_capacity(m);
    for i in 0..m {
        let arm = i % arms;
        let step = i / arms;
        let t = if per_arm > 1 {
            step as f64 / (per_arm - 1) as f64
        } else {
            1.0
        };
        let r = r_inner * (r_outer / r_inner).powf(t);
        let theta = rotation
            + arm as f64 * std::f64::consts::TAU / arms as f64
            + twist * (r / r_inner).ln();
        mics.push([T::lit(r * theta.cos()), T::lit(r * theta.sin()), T::zero()]);
    }
    Ok(mics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_setup() -> ArraySetup<f64> {
        ArraySetup::simulation_default()
    }

    #[test]
    fn scan_length_matches_reference_geometry() {
        let setup = table_setup();
        assert!((setup.scan_length() - 5.773_502_691_896_258).abs() < 1e-12);
        let grid = build_scan_grid(&setup, 50).unwrap();
        assert_eq!(grid.len(), 2500);
        assert!((grid.spacing() - setup.scan_length() / 49.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_grid_has_corner_points() {
        let setup = table_setup();
        let grid = build_scan_grid(&setup, 2).unwrap();
        let h = setup.scan_length() / 2.0;
        assert_eq!(grid.len(), 4);
        assert_eq!(grid.spacing(), setup.scan_length());
        assert_eq!(grid.point(0)[..2], [-h, -h]);
        assert_eq!(grid.point(3)[..2], [h, h]);
    }

    #[test]
    fn grid_is_centred_and_uniform() {
        let grid = build_scan_grid(&table_setup(), 7).unwrap();
        let sum_x: f64 = grid.points().iter().map(|p| p[0]).sum();
        let sum_y: f64 = grid.points().iter().map(|p| p[1]).sum();
        assert!(sum_x.abs() < 1e-12 && sum_y.abs() < 1e-12);
        for row in 0..7 {
            for col in 1..7 {
                let d =
                    grid.point(grid.index(row, col))[0] - grid.point(grid.index(row, col - 1))[0];
                assert!((d - grid.spacing()).abs() < 1e-12);
            }
        }
        assert!(grid.points().iter().all(|p| p[2] == 5.0));
    }

    #[test]
    fn rejects_degenerate_grid() {
        assert!(matches!(
            build_scan_grid(&table_setup(), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn beamwidth_reference_value() {
        let b = rayleigh_beamwidth(&table_setup());
        assert!((b - 1.0644).abs() < 1e-4, "B = {b}");
    }

    #[test]
    fn beamwidth_on_axis_collapses() {
        let setup = ArraySetup::<f64>::new(
            default_array(8, 1.0, 0).unwrap(),
            1.0,
            1.0,
            0.5,
            340.0,
            340.0,
        )
        .unwrap()
        .with_off_axis_angle(0.0)
        .unwrap();
        assert!((rayleigh_beamwidth(&setup) - 1.22).abs() < 1e-12);
        let doubled = setup.clone().with_frequency(680.0).unwrap();
        assert!((rayleigh_beamwidth(&doubled) - 0.61).abs() < 1e-12);
    }

    #[test]
    fn spacing_ratio_flags_coarse_grids() {
        let setup = table_setup();
        let grid = build_scan_grid(&setup, 50).unwrap();
        let sr = spacing_ratio(&grid, rayleigh_beamwidth(&setup)).unwrap();
        assert!((sr.ratio - 0.11).abs() < 0.005);
        assert!(!sr.too_coarse);

        let at_one = spacing_ratio(&grid, grid.spacing()).unwrap();
        assert_eq!(at_one.ratio, 1.0);
        assert!(at_one.too_coarse);

        assert!(
            !spacing_ratio(&grid, grid.spacing() * 5.01)
                .unwrap()
                .too_coarse
        );
        assert!(
            spacing_ratio(&grid, grid.spacing() * 4.99)
                .unwrap()
                .too_coarse
        );

        assert!(spacing_ratio(&grid, 0.0).is_err());
    }

    #[test]
    fn spiral_fits_aperture_and_is_deterministic() {
        let mics: Vec<[f64; 3]> = default_array(60, 1.0, 0).unwrap();
        assert_eq!(mics.len(), 60);
        for a in &mics {
            for b in &mics {
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                assert!(d <= 1.0);
            }
        }
        assert_eq!(mics, default_array(60, 1.0, 0).unwrap());
        assert_ne!(mics, default_array(60, 1.0, 1).unwrap());

        let pair: Vec<[f64; 3]> = default_array(2, 1.0, 3).unwrap();
        assert!(pair.iter().all(|p| p[0].hypot(p[1]) <= 0.5));
        assert!(default_array::<f64>(1, 1.0, 0).is_err());
    }

    #[test]
    fn setup_validation() {
        let mics = default_array(4, 1.0, 0).unwrap();
        let ok = ArraySetup::new(mics.clone(), 1.0, 5.0, 1.0, 3000.0, 340.0);
        assert!(ok.is_ok());
        assert!(ArraySetup::new(vec![[0.0; 3]], 1.0, 5.0, 1.0, 3000.0, 340.0).is_err());
        assert!(ArraySetup::new(mics.clone(), 1.0, 0.0, 1.0, 3000.0, 340.0).is_err());
        assert!(ArraySetup::new(mics.clone(), 1.0, 5.0, 3.2, 3000.0, 340.0).is_err());
        assert!(ArraySetup::new(mics.clone(), 1.0, 5.0, 1.0, 0.0, 340.0).is_err());
        assert!(ArraySetup::new(mics.clone(), 1.0, 5.0, 1.0, 3000.0, -1.0).is_err());
        let outside = vec![[0.0, 0.0, 0.0], [0.6, 0.0, 0.0]];
        assert!(ArraySetup::new(outside, 1.0, 5.0, 1.0, 3000.0, 340.0).is_err());
    }

    #[test]
    fn table_wavenumber() {
        let k = table_setup().wavenumber();
        assert!((k - 2.0 * std::f64::consts::PI * 3000.0 / 340.0).abs() < 1e-12);
        assert!((k - 55.44).abs() < 0.005);
    }
}
