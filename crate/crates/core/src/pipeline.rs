//! End-to-end case runner: simulate, beamform, compress, solve and report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::beamform::{
    das_map, dirty_map_from_sources, psf_matrix, steering, BeamMap, PsfOptions, PsfSystem,
};
use crate::error::{Error, Result};
use crate::geometry::{
    build_scan_grid, default_array, rayleigh_beamwidth, spacing_ratio, ArraySetup, ScanGrid,
};
use crate::io::{self, MapHeader, SolveMeta};
use crate::metrics::{
    self, attribute_to_sources, efficiency_gain, power_error, CaseReport, PowerSummary,
};
use crate::parallel::Parallelism;
use crate::render::render_heatmap;
use crate::scalar::Real;
use crate::solver::{
    damas_solve, embed_solution, restrict_system, SolveConfig, SolveResult, SweepMode,
};
use crate::synth::{
    builtin_case, remove_diagonal, scene_csm_sampled, SamplingOptions, SourceScene,
};
use crate::wavelet::{compress, CompressOptions, CompressedGrid, Stencil, ThresholdMode};

#[derive(Debug, Clone, PartialEq)]
pub enum MicLayout {
    Spiral { count: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub layout: MicLayout,
    pub aperture: f64,
    pub standoff: f64,
    pub opening_angle_deg: f64,
    pub frequency: f64,
    pub speed_of_sound: f64,
    pub n: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            layout: MicLayout::Spiral { count: 60, seed: 0 },
            aperture: 1.0,
            standoff: 5.0,
            opening_angle_deg: 60.0,
            frequency: 3000.0,
            speed_of_sound: 340.0,
            n: 50,
        }
    }
}

impl GeometryConfig {
    pub fn setup<T: Real>(&self) -> Result<ArraySetup<T>> {
        let aperture = T::lit(self.aperture);
        let mics = match &self.layout {
            MicLayout::Spiral { count, seed } => default_array(*count, aperture, *seed)?,
            MicLayout::File(path) => io::read_layout(path)?,
        };
        ArraySetup::new(
            mics,
            aperture,
            T::lit(self.standoff),
            T::lit(self.opening_angle_deg.to_radians()),
            T::lit(self.frequency),
            T::lit(self.speed_of_sound),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    Builtin(u32),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthesisPath {
    /// Noiseless `b = A x`.
    Ideal,
    /// Frame-averaged CSM with microphone noise, then delay-and-sum.
    Sampled {
        frames: usize,
        snr_db: f64,
        seed: u64,
    },
}

impl Default for SynthesisPath {
    fn default() -> Self {
        SynthesisPath::Sampled {
            frames: 1000,
            snr_db: 15.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub scene: SceneSource,
    pub synthesis: SynthesisPath,
    pub diagonal_removal: bool,
    pub iterations: usize,
    pub sweep: SweepMode,
    pub compression: CompressOptions,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub dynamic_range_db: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            scene: SceneSource::Builtin(1),
            synthesis: SynthesisPath::default(),
            diagonal_removal: false,
            iterations: 1000,
            sweep: SweepMode::Forward,
            compression: CompressOptions {
                epsilon: 0.1,
                mode: ThresholdMode::Relative,
                stencil: Stencil::Linear,
            },
            threads: 1,
            out: None,
            dynamic_range_db: 20.0,
        }
    }
}

/// Threshold used for each built-in case.
pub fn builtin_epsilon(case_id: u32) -> f64 {
    match case_id {
        2 => 0.3,
        _ => 0.1,
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.geometry.n < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points per side, got {}",
                self.geometry.n
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if let SceneSource::File(p) = &self.scene {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "scene file {} does not exist",
                    p.display()
                )));
            }
        }
        if let MicLayout::File(p) = &self.geometry.layout {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "layout file {} does not exist",
                    p.display()
                )));
            }
        }
        if let SynthesisPath::Sampled { frames: 0, .. } = self.synthesis {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::Config("dynamic range must be positive".into()));
        }
        Ok(())
    }

    pub fn parallelism(&self) -> Parallelism {
        Parallelism::new(self.threads)
    }

    pub fn label(&self) -> String {
        match &self.scene {
            SceneSource::Builtin(k) => format!("case {k}"),
            SceneSource::File(p) => p.display().to_string(),
        }
    }

    pub fn solve_config<T>(&self) -> SolveConfig<T> {
        let mut cfg = SolveConfig::new(self.iterations);
        cfg.sweep = self.sweep;
        cfg
    }
}

/// Error from a named pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

trait Stage<V> {
    fn stage(self, name: &'static str) -> std::result::Result<V, StageError>;
}

impl<V> Stage<V> for Result<V> {
    fn stage(self, name: &'static str) -> std::result::Result<V, StageError> {
        self.map_err(|error| StageError { stage: name, error })
    }
}

/// Geometry, scene and DAMAS system shared by the later stages.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub setup: ArraySetup<T>,
    pub grid: ScanGrid<T>,
    pub scene: SourceScene<T>,
    pub psf: PsfSystem<T>,
    pub beamwidth: T,
    pub spacing_ratio: T,
    pub too_coarse: bool,
}

pub fn load_scene<T: Real>(source: &SceneSource, frequency: T) -> Result<SourceScene<T>> {
    match source {
        SceneSource::Builtin(k) => {
            let mut scene = builtin_case(*k)?;
            scene.frequency = frequency;
            Ok(scene)
        }
        SceneSource::File(path) => io::read_scene(path, frequency),
    }
}

pub fn prepare<T: Real>(cfg: &RunConfig) -> std::result::Result<Prepared<T>, StageError> {
    cfg.validate().stage("config")?;
    let setup: ArraySetup<T> = cfg.geometry.setup().stage("geometry")?;
    let grid = build_scan_grid(&setup, cfg.geometry.n).stage("geometry")?;
    let beamwidth = rayleigh_beamwidth(&setup);
    let sr = spacing_ratio(&grid, beamwidth).stage("geometry")?;
    let scene = load_scene(&cfg.scene, setup.frequency()).stage("scene")?;
    scene.indices(grid.n()).stage("scene")?;
    let par = cfg.parallelism();
    let st = steering(&setup, &grid, par).stage("steering")?;
    let options = PsfOptions {
        diagonal_removed: cfg.diagonal_removal,
        ..PsfOptions::default()
    };
    let psf = psf_matrix(&grid, &st, options, par).stage("psf")?;
    Ok(Prepared {
        setup,
        grid,
        scene,
        psf,
        beamwidth,
        spacing_ratio: sr.ratio,
        too_coarse: sr.too_coarse,
    })
}

/// Beamformer map for the configured synthesis path.
pub fn beamformer_map<T: Real>(cfg: &RunConfig, prep: &Prepared<T>) -> Result<BeamMap<T>> {
    match cfg.synthesis {
        SynthesisPath::Ideal => {
            let x = BeamMap::new(prep.grid.n(), prep.scene.power_map(prep.grid.n())?)?;
            dirty_map_from_sources(&prep.psf, &x)
        }
        SynthesisPath::Sampled {
            frames,
            snr_db,
            seed,
        } => {
            let data = scene_csm_sampled(
                &prep.scene,
                &prep.setup,
                &prep.grid,
                SamplingOptions::new(frames, snr_db, seed),
            )?;
            let data = if cfg.diagonal_removal {
                remove_diagonal(&data)?
            } else {
                data
            };
            let par = cfg.parallelism();
            let st = steering(&prep.setup, &prep.grid, par)?;
            das_map(&data, &st, prep.grid.n(), par)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseOutcome<T> {
    pub report: CaseReport,
    pub beamformer: BeamMap<T>,
    pub full: SolveResult<T>,
    pub full_map: BeamMap<T>,
    pub compressed_grid: CompressedGrid,
    pub compressed: SolveResult<T>,
    pub compressed_map: BeamMap<T>,
    pub map_header: MapHeader,
}

fn summarize<T: Real>(x: &BeamMap<T>, prep: &Prepared<T>, p0: f64) -> Result<PowerSummary> {
    let total = metrics::integrated_power(x, &prep.grid, metrics::Region::All)?.as_f64();
    let radius = prep.beamwidth / T::lit(2.0);
    let attribution = attribute_to_sources(x, &prep.grid, &prep.scene, radius)?;
    Ok(PowerSummary {
        total,
        per_source: attribution.per_source.iter().map(|v| v.as_f64()).collect(),
        unassigned: attribution.unassigned.as_f64(),
        eta: power_error(p0, total),
    })
}

/// Repeats used to time the grid compression.
const COMPRESSION_TIMING_REPEATS: usize = 5;

pub fn run_case<T: Real>(cfg: &RunConfig) -> std::result::Result<CaseOutcome<T>, StageError> {
    let prep = prepare::<T>(cfg)?;
    let b = beamformer_map(cfg, &prep).stage("beamform")?;

    let solve_cfg = cfg.solve_config();
    let full = damas_solve(prep.psf.matrix(), b.values(), &solve_cfg).stage("solve-full")?;
    let full_map = BeamMap::new(prep.grid.n(), full.x.clone()).stage("solve-full")?;

    let compressed_grid = compress(&b, cfg.compression).stage("compress")?;
    let timing = metrics::bench(COMPRESSION_TIMING_REPEATS, || compress(&b, cfg.compression))
        .stage("compress")?;

    let restricted = restrict_system(&prep.psf, &b, &compressed_grid).stage("restrict")?;
    let compressed =
        damas_solve(&restricted.matrix, &restricted.rhs, &solve_cfg).stage("solve-compressed")?;
    let compressed_map =
        embed_solution(&compressed.x, &restricted.keep, prep.grid.n()).stage("solve-compressed")?;

    let set_power: Vec<f64> = prep
        .scene
        .sources
        .iter()
        .map(|s| s.power().as_f64())
        .collect();
    let p0: f64 = set_power.iter().sum();
    let full_summary = summarize(&full_map, &prep, p0).stage("metrics")?;
    let compressed_summary = summarize(&compressed_map, &prep, p0).stage("metrics")?;
    let (t1, t2) = (full.total_seconds(), compressed.total_seconds());

    let setup = &prep.setup;
    let report = CaseReport {
        label: cfg.label(),
        num_mics: setup.num_mics(),
        aperture_m: setup.aperture().as_f64(),
        standoff_m: setup.standoff().as_f64(),
        opening_angle_deg: setup.opening_angle().as_f64().to_degrees(),
        scan_length_m: prep.grid.side_length().as_f64(),
        frequency_hz: setup.frequency().as_f64(),
        beamwidth_m: prep.beamwidth.as_f64(),
        grid_side: prep.grid.n(),
        grid_points: prep.grid.len(),
        spacing_ratio: prep.spacing_ratio.as_f64(),
        num_sources: prep.scene.len(),
        set_power,
        p0,
        iterations: cfg.iterations,
        t1_seconds: t1,
        full: full_summary,
        epsilon: cfg.compression.epsilon,
        threshold_mode: cfg.compression.mode.name().into(),
        stencil: cfg.compression.stencil.name().into(),
        compressed_points: compressed_grid.len(),
        sigma: compressed_grid.sigma(),
        compression_seconds: timing.median,
        t2_seconds: t2,
        efficiency_gain: efficiency_gain(t1, t2),
        compressed: compressed_summary,
    };
    let map_header = MapHeader {
        side_length: prep.grid.side_length().as_f64(),
        frequency: setup.frequency().as_f64(),
        units: "Pa^2".into(),
    };
    Ok(CaseOutcome {
        report,
        beamformer: b,
        full,
        full_map,
        compressed_grid,
        compressed,
        compressed_map,
        map_header,
    })
}

/// Writes maps, heatmaps, the compressed grid, solve metadata and the report
/// into `dir`.
pub fn write_artifacts<T: Real>(
    outcome: &CaseOutcome<T>,
    cfg: &RunConfig,
    dir: &Path,
) -> std::result::Result<(), StageError> {
    let h = &outcome.map_header;
    let dr = cfg.dynamic_range_db;
    let maps = [
        ("beamform", &outcome.beamformer),
        ("damas_full", &outcome.full_map),
        ("damas_compressed", &outcome.compressed_map),
    ];
    for (name, map) in maps {
        io::write_map_csv(&dir.join(format!("{name}.csv")), map, h).stage("write")?;
        render_heatmap(map, &dir.join(format!("{name}.ppm")), dr).stage("write")?;
    }
    let mask = BeamMap::new(
        outcome.compressed_grid.n(),
        outcome
            .compressed_grid
            .mask()
            .into_iter()
            .map(|k| if k { T::one() } else { T::zero() })
            .collect(),
    )
    .stage("write")?;
    render_heatmap(&mask, &dir.join("compressed_grid.ppm"), dr).stage("write")?;
    io::write_compressed_grid(&dir.join("compressed_grid.txt"), &outcome.compressed_grid)
        .stage("write")?;
    let sweep = cfg.sweep.name();
    io::write_text(
        &dir.join("solve_full.json"),
        &SolveMeta::new(&outcome.full, sweep).to_json(),
    )
    .stage("write")?;
    io::write_text(
        &dir.join("solve_compressed.json"),
        &SolveMeta::new(&outcome.compressed, sweep).to_json(),
    )
    .stage("write")?;
    io::write_text(&dir.join("report.txt"), &outcome.report.to_table()).stage("write")?;
    io::write_text(&dir.join("report.json"), &outcome.report.to_json()).stage("write")?;
    Ok(())
}

/// Runs the case and, when an output directory is configured, writes its
/// artifacts.
pub fn run_and_write<T: Real>(cfg: &RunConfig) -> std::result::Result<CaseOutcome<T>, StageError> {
    let start = Instant::now();
    let outcome = run_case::<T>(cfg)?;
    if let Some(dir) = &cfg.out {
        write_artifacts(&outcome, cfg, dir)?;
    }
    log_line(&format!(
        "{} finished in {:.1} s",
        cfg.label(),
        start.elapsed().as_secs_f64()
    ));
    Ok(outcome)
}

fn log_line(msg: &str) {
    eprintln!("{msg}");
}

/// Config for built-in case `k`, derived from `base` with the case's own
/// epsilon unless `epsilon_override` is given.
pub fn builtin_config(base: &RunConfig, case_id: u32, epsilon_override: Option<f64>) -> RunConfig {
    let mut cfg = base.clone();
    cfg.scene = SceneSource::Builtin(case_id);
    cfg.compression.epsilon = epsilon_override.unwrap_or_else(|| builtin_epsilon(case_id));
    cfg.out = base.out.as_ref().map(|d| d.join(format!("case{case_id}")));
    cfg
}
