//! Integrated source power, per-source attribution, timing statistics and the
//! per-case report.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::beamform::BeamMap;
use crate::error::{Error, Result};
use crate::geometry::ScanGrid;
use crate::scalar::Real;
use crate::synth::SourceScene;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region<T> {
    All,
    /// Grid points within `radius` meters of grid point `center`.
    Disc {
        center: usize,
        radius: T,
    },
}

/// Sum of `x` over a region of the grid.
pub fn integrated_power<T: Real>(
    x: &BeamMap<T>,
    grid: &ScanGrid<T>,
    region: Region<T>,
) -> Result<T> {
    if x.len() != grid.len() {
        return Err(Error::Input(format!(
            "map has {} points, grid has {}",
            x.len(),
            grid.len()
        )));
    }
    match region {
        Region::All => Ok(x.sum()),
        Region::Disc { center, radius } => {
            if center >= grid.len() {
                return Err(Error::Input(format!(
                    "disc centre {center} outside the grid"
                )));
            }
            let mut total = T::zero();
            let mut count = 0usize;
            for (s, v) in x.values().iter().enumerate() {
                if grid.distance(s, center) <= radius {
                    total = total + *v;
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::Input(
                    "integration region contains no grid points".into(),
                ));
            }
            Ok(total)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution<T> {
    /// Power assigned to each source, in scene order.
    pub per_source: Vec<T>,
    /// Power on points farther than the radius from every source.
    pub unassigned: T,
}

/// Assigns each grid point's power to the nearest true source within
/// `radius` meters. Ties go to the source listed first.
pub fn attribute_to_sources<T: Real>(
    x: &BeamMap<T>,
    grid: &ScanGrid<T>,
    scene: &SourceScene<T>,
    radius: T,
) -> Result<Attribution<T>> {
    if !(radius > T::zero()) {
        return Err(Error::Input("attribution radius must be positive".into()));
    }
    if x.len() != grid.len() {
        return Err(Error::Input(format!(
            "map has {} points, grid has {}",
            x.len(),
            grid.len()
        )));
    }
    let centres = scene.indices(grid.n())?;
    let mut per_source = vec![T::zero(); centres.len()];
    let mut unassigned = T::zero();
    for (s, v) in x.values().iter().enumerate() {
        if *v == T::zero() {
            continue;
        }
        let nearest = centres
            .iter()
            .enumerate()
            .map(|(k, c)| (k, grid.distance(s, *c)))
            .filter(|(_, d)| *d <= radius)
            .fold(None, |best: Option<(usize, T)>, (k, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((k, d)),
            });
        match nearest {
            Some((k, _)) => per_source[k] = per_source[k] + *v,
            None => unassigned = unassigned + *v,
        }
    }
    Ok(Attribution {
        per_source,
        unassigned,
    })
}

/// Relative shortfall `(P0 - P) / P0`.
pub fn power_error(set_power: f64, recovered: f64) -> f64 {
    (set_power - recovered) / set_power
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchStats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Times `task` `repeats` times after one untimed warm-up run.
pub fn bench<R>(repeats: usize, mut task: impl FnMut() -> R) -> Result<BenchStats> {
    if repeats == 0 {
        return Err(Error::Config("at least one repeat is required".into()));
    }
    std::hint::black_box(task());
    let mut times: Vec<f64> = (0..repeats)
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(task());
            start.elapsed().as_secs_f64()
        })
        .collect();
    Ok(stats(&mut times))
}

/// Median/min/max of a set of timings. The slice is sorted in place.
pub fn stats(times: &mut [f64]) -> BenchStats {
    times.sort_by(f64::total_cmp);
    let k = times.len();
    let median = if k % 2 == 1 {
        times[k / 2]
    } else {
        0.5 * (times[k / 2 - 1] + times[k / 2])
    };
    BenchStats {
        median,
        min: times[0],
        max: times[k - 1],
    }
}

/// Recovered power of one run, total and per source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSummary {
    pub total: f64,
    pub per_source: Vec<f64>,
    pub unassigned: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub label: String,
    pub num_mics: usize,
    pub aperture_m: f64,
    pub standoff_m: f64,
    pub opening_angle_deg: f64,
    pub scan_length_m: f64,
    pub frequency_hz: f64,
    pub beamwidth_m: f64,
    pub grid_side: usize,
    pub grid_points: usize,
    pub spacing_ratio: f64,
    pub num_sources: usize,
    /// Set power per source, `|q|^2`.
    pub set_power: Vec<f64>,
    pub p0: f64,
    pub iterations: usize,
    pub t1_seconds: f64,
    pub full: PowerSummary,
    pub epsilon: f64,
    pub threshold_mode: String,
    pub stencil: String,
    pub compressed_points: usize,
    pub sigma: f64,
    pub compression_seconds: f64,
    pub t2_seconds: f64,
    pub efficiency_gain: f64,
    pub compressed: PowerSummary,
}

impl CaseReport {
    pub fn eta1(&self) -> f64 {
        self.full.eta
    }

    pub fn eta2(&self) -> f64 {
        self.compressed.eta
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Aligned plain-text table, one quantity per row.
    pub fn to_table(&self) -> String {
        let powers = |v: &[f64], digits: usize| {
            if v.len() > 4 {
                let first = v.first().copied().unwrap_or(0.0);
                if v.iter().all(|p| *p == first) {
                    return format!("{}x{first:.digits$}", v.len());
                }
                return format!(
                    "{:.digits$} over {} sources",
                    v.iter().sum::<f64>(),
                    v.len()
                );
            }
            v.iter()
                .map(|p| format!("{p:.digits$}"))
                .collect::<Vec<_>>()
                .join("+")
        };
        let rows: Vec<(&str, String)> = vec![
            ("Case", self.label.clone()),
            ("Number of microphones, M", self.num_mics.to_string()),
            (
                "Array aperture diameter, D (m)",
                format!("{:.3}", self.aperture_m),
            ),
            (
                "Dis. between array plane and observation plane, z0 (m)",
                format!("{:.3}", self.standoff_m),
            ),
            (
                "Opening angle, alpha (deg)",
                format!("{:.1}", self.opening_angle_deg),
            ),
            (
                "Scanning length, L (m)",
                format!("{:.3}", self.scan_length_m),
            ),
            (
                "Frequency, f (kHz)",
                format!("{:.3}", self.frequency_hz / 1000.0),
            ),
            (
                "Beamformer resolution, B (m)",
                format!("{:.3}", self.beamwidth_m),
            ),
            ("Original grid", format!("{0}x{0}", self.grid_side)),
            (
                "Number of original grid points, S",
                self.grid_points.to_string(),
            ),
            ("dx/B", format!("{:.3}", self.spacing_ratio)),
            (
                "Integrated source power setting, P0 (Pa^2)",
                powers(&self.set_power, 3),
            ),
            ("DAMAS iterations", self.iterations.to_string()),
            (
                "Run time on original grid, T1 (s)",
                format!("{:.4}", self.t1_seconds),
            ),
            (
                "Integrated source power on original grid, P1",
                powers(&self.full.per_source, 3),
            ),
            (
                "Total recovered power on original grid",
                format!("{:.3}", self.full.total),
            ),
            (
                "Error of integ. source power on ori. grid, eta1",
                format!("{:.1}%", 100.0 * self.full.eta),
            ),
            (
                "epsilon",
                format!(
                    "{} ({}, {})",
                    self.epsilon, self.threshold_mode, self.stencil
                ),
            ),
            (
                "Number of compr. grid points, S~",
                self.compressed_points.to_string(),
            ),
            (
                "Compression ratio, sigma = S/S~",
                format!("{:.1}", self.sigma),
            ),
            (
                "Time of grid compression (s)",
                format!("{:.6}", self.compression_seconds),
            ),
            (
                "Run time on compr. grid, T2 (s)",
                format!("{:.6}", self.t2_seconds),
            ),
            (
                "Efficiency increasing, (T1-T2)/T1",
                format!("{:.1}%", 100.0 * self.efficiency_gain),
            ),
            (
                "Integrated source power on compression grid, P2",
                powers(&self.compressed.per_source, 3),
            ),
            (
                "Total recovered power on compression grid",
                format!("{:.3}", self.compressed.total),
            ),
            (
                "Error of integ. source power on comp. grid, eta2",
                format!("{:.1}%", 100.0 * self.compressed.eta),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

/// `(T1 - T2) / T1`.
pub fn efficiency_gain(t1: f64, t2: f64) -> f64 {
    (t1 - t2) / t1
}
