//! Command-line front end and the flat `key = value` configuration format.
//!
//! A configuration file groups keys under `[section]` headers; `#` starts a
//! comment. Every key can be overridden by the matching command-line flag.
//!
//! ```text
//! [geometry]
//! mics = 60
//! array_seed = 0
//! # layout = my_array.txt
//! aperture_m = 1.0
//! standoff_m = 5.0
//! opening_angle_deg = 60
//! frequency_hz = 3000
//! speed_of_sound = 340
//! n = 50
//!
//! [scene]
//! case = 1
//! # file = my_scene.txt
//!
//! [synthesis]
//! path = sampled
//! frames = 1000
//! snr_db = 15
//! seed = 0
//! diagonal_removal = false
//!
//! [solver]
//! iterations = 1000
//! sweep = forward
//!
//! [compression]
//! epsilon = 0.1
//! mode = relative
//! stencil = linear
//!
//! [output]
//! dir = out
//! dynamic_range_db = 20
//! threads = 1
//! ```

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::beamform::{psf_matrix, steering, PsfOptions};
use crate::benchmarks::sweep_scaling;
use crate::error::{Error, Result};
use crate::geometry::build_scan_grid;
use crate::io::{self, MapHeader, SolveMeta};
use crate::metrics::bench;
use crate::pipeline::{
    beamformer_map, builtin_config, builtin_epsilon, prepare, run_and_write, GeometryConfig,
    MicLayout, RunConfig, SceneSource, SynthesisPath,
};
use crate::render::render_heatmap;
use crate::solver::{damas_solve, embed_solution, restrict_indices, SweepMode};
use crate::wavelet::{compress, CompressOptions, Stencil, ThresholdMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Ideal,
    Sampled,
}

impl std::str::FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(PathKind::Ideal),
            "sampled" => Ok(PathKind::Sampled),
            other => Err(Error::Config(format!("unknown synthesis path '{other}'"))),
        }
    }
}

/// Flat view of every configurable value, filled from defaults, then the
/// config file, then command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub mics: usize,
    pub array_seed: u64,
    pub layout: Option<PathBuf>,
    pub aperture: f64,
    pub standoff: f64,
    pub opening_angle_deg: f64,
    pub frequency: f64,
    pub speed_of_sound: f64,
    pub n: usize,
    pub case: Option<u32>,
    pub scene_file: Option<PathBuf>,
    pub path: PathKind,
    pub frames: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub diagonal_removal: bool,
    pub iterations: usize,
    pub sweep: SweepMode,
    pub epsilon: Option<f64>,
    pub mode: ThresholdMode,
    pub stencil: Stencil,
    pub out: Option<PathBuf>,
    pub dynamic_range_db: f64,
    pub threads: usize,
}

impl Default for Settings {
    fn default() -> Self {
        let g = GeometryConfig::default();
        Self {
            mics: 60,
            array_seed: 0,
            layout: None,
            aperture: g.aperture,
            standoff: g.standoff,
            opening_angle_deg: g.opening_angle_deg,
            frequency: g.frequency,
            speed_of_sound: g.speed_of_sound,
            n: g.n,
            case: None,
            scene_file: None,
            path: PathKind::Sampled,
            frames: 1000,
            snr_db: 15.0,
            seed: 0,
            diagonal_removal: false,
            iterations: 1000,
            sweep: SweepMode::Forward,
            epsilon: None,
            mode: ThresholdMode::Relative,
            stencil: Stencil::Linear,
            out: None,
            dynamic_range_db: 20.0,
            threads: 1,
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "line {line}: invalid boolean '{value}' for '{key}'"
        ))),
    }
}

impl Settings {
    /// Applies a config file's `[section]` / `key = value` entries.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {ln}: expected 'key = value'")))?;
            match (section.as_str(), key) {
                ("geometry", "mics") => self.mics = parse_value(key, value, ln)?,
                ("geometry", "array_seed") => self.array_seed = parse_value(key, value, ln)?,
                ("geometry", "layout") => self.layout = Some(PathBuf::from(value)),
                ("geometry", "aperture_m") => self.aperture = parse_value(key, value, ln)?,
                ("geometry", "standoff_m") => self.standoff = parse_value(key, value, ln)?,
                ("geometry", "opening_angle_deg") => {
                    self.opening_angle_deg = parse_value(key, value, ln)?
                }
                ("geometry", "frequency_hz") => self.frequency = parse_value(key, value, ln)?,
                ("geometry", "speed_of_sound") => {
                    self.speed_of_sound = parse_value(key, value, ln)?
                }
                ("geometry", "n") => self.n = parse_value(key, value, ln)?,
                ("scene", "case") => self.case = Some(parse_value(key, value, ln)?),
                ("scene", "file") => self.scene_file = Some(PathBuf::from(value)),
                ("synthesis", "path") => self.path = value.parse()?,
                ("synthesis", "frames") => self.frames = parse_value(key, value, ln)?,
                ("synthesis", "snr_db") => self.snr_db = parse_value(key, value, ln)?,
                ("synthesis", "seed") => self.seed = parse_value(key, value, ln)?,
                ("synthesis", "diagonal_removal") => {
                    self.diagonal_removal = parse_bool(key, value, ln)?
                }
                ("solver", "iterations") => self.iterations = parse_value(key, value, ln)?,
                ("solver", "sweep") => self.sweep = value.parse()?,
                ("compression", "epsilon") => self.epsilon = Some(parse_value(key, value, ln)?),
                ("compression", "mode") => self.mode = value.parse()?,
                ("compression", "stencil") => self.stencil = value.parse()?,
                ("output", "dir") => self.out = Some(PathBuf::from(value)),
                ("output", "dynamic_range_db") => {
                    self.dynamic_range_db = parse_value(key, value, ln)?
                }
                ("output", "threads") => self.threads = parse_value(key, value, ln)?,
                _ => {
                    return Err(Error::Config(format!(
                        "line {ln}: unknown key '{key}' in section [{section}]"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn apply_args(&mut self, a: &CommonArgs) -> Result<()> {
        if let Some(v) = a.mics {
            self.mics = v;
        }
        if let Some(v) = a.array_seed {
            self.array_seed = v;
        }
        if let Some(v) = &a.layout {
            self.layout = Some(v.clone());
        }
        if let Some(v) = a.n {
            self.n = v;
        }
        if let Some(v) = a.frequency {
            self.frequency = v;
        }
        if let Some(v) = a.case {
            self.case = Some(v);
            self.scene_file = None;
        }
        if let Some(v) = &a.scene {
            self.scene_file = Some(v.clone());
            self.case = None;
        }
        if let Some(v) = &a.path {
            self.path = v.parse()?;
        }
        if let Some(v) = a.frames {
            self.frames = v;
        }
        if let Some(v) = a.snr_db {
            self.snr_db = v;
        }
        if let Some(v) = a.seed {
            self.seed = v;
        }
        if a.diagonal_removal {
            self.diagonal_removal = true;
        }
        if let Some(v) = a.iterations {
            self.iterations = v;
        }
        if let Some(v) = &a.sweep {
            self.sweep = v.parse()?;
        }
        if let Some(v) = a.epsilon {
            self.epsilon = Some(v);
        }
        if let Some(v) = &a.mode {
            self.mode = v.parse()?;
        }
        if let Some(v) = &a.stencil {
            self.stencil = v.parse()?;
        }
        if let Some(v) = a.threads {
            self.threads = v;
        }
        if let Some(v) = a.range_db {
            self.dynamic_range_db = v;
        }
        Ok(())
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let scene = match (&self.scene_file, self.case) {
            (Some(path), _) => SceneSource::File(path.clone()),
            (None, Some(k)) => SceneSource::Builtin(k),
            (None, None) => SceneSource::Builtin(1),
        };
        let epsilon = self.epsilon.unwrap_or(match scene {
            SceneSource::Builtin(k) => builtin_epsilon(k),
            SceneSource::File(_) => 0.1,
        });
        let cfg = RunConfig {
            geometry: GeometryConfig {
                layout: match &self.layout {
                    Some(p) => MicLayout::File(p.clone()),
                    None => MicLayout::Spiral {
                        count: self.mics,
                        seed: self.array_seed,
                    },
                },
                aperture: self.aperture,
                standoff: self.standoff,
                opening_angle_deg: self.opening_angle_deg,
                frequency: self.frequency,
                speed_of_sound: self.speed_of_sound,
                n: self.n,
            },
            scene,
            synthesis: match self.path {
                PathKind::Ideal => SynthesisPath::Ideal,
                PathKind::Sampled => SynthesisPath::Sampled {
                    frames: self.frames,
                    snr_db: self.snr_db,
                    seed: self.seed,
                },
            },
            diagonal_removal: self.diagonal_removal,
            iterations: self.iterations,
            sweep: self.sweep,
            compression: CompressOptions {
                epsilon,
                mode: self.mode,
                stencil: self.stencil,
            },
            threads: self.threads,
            out: self.out.clone(),
            dynamic_range_db: self.dynamic_range_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Configuration file (`[section]` + `key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in case 1..4.
    #[arg(long)]
    pub case: Option<u32>,
    /// Scene file with `row col amplitude_Pa` lines.
    #[arg(long, conflicts_with = "case")]
    pub scene: Option<PathBuf>,
    /// Number of microphones in the default spiral.
    #[arg(long)]
    pub mics: Option<usize>,
    #[arg(long)]
    pub array_seed: Option<u64>,
    /// Microphone layout file with `x y z` lines.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Grid points per side.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub frequency: Option<f64>,
    /// `ideal` (b = A x) or `sampled` (noisy frames, then delay-and-sum).
    #[arg(long)]
    pub path: Option<String>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub diagonal_removal: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// `forward` or `alternating`.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `relative` or `absolute`.
    #[arg(long)]
    pub mode: Option<String>,
    /// `linear` or `cubic`.
    #[arg(long)]
    pub stencil: Option<String>,
    /// Worker threads; never changes numerical output.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Heatmap dynamic range in dB.
    #[arg(long)]
    pub range_db: Option<f64>,
}

impl CommonArgs {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            s.apply_config(&text)?;
        }
        s.apply_args(self)?;
        Ok(s)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "wavedamas",
    version,
    about = "DAMAS deconvolution on wavelet-compressed scan grids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate, beamform, compress, solve on both grids and report.
    RunCase {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory for maps, images and reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the four built-in cases.
    RunAllCases {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the beamformer map of a scene as CSV.
    Beamform {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also render a heatmap.
        #[arg(long)]
        ppm: Option<PathBuf>,
    },
    /// Build the compressed grid of a map CSV.
    Compress {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value = "relative")]
        mode: String,
        #[arg(long, default_value = "linear")]
        stencil: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run DAMAS on a map CSV, optionally restricted to a compressed grid.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Output map CSV; metadata goes next to it with a .json extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time DAMAS sweeps, PSF assembly and grid compression.
    Bench {
        /// Unknown counts for the sweep-scaling measurement.
        #[arg(long, value_delimiter = ',', default_value = "625,1250,2500")]
        sizes: Vec<usize>,
        /// Grid sides for the PSF-assembly measurement.
        #[arg(long, value_delimiter = ',', default_value = "25,35,50")]
        psf_sides: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        repeats: usize,
        #[arg(long)]
        threads: Option<usize>,
        /// Optional JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a map CSV as a PPM heatmap.
    Render {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        range_db: f64,
    },
}

type CliResult = std::result::Result<(), Box<dyn std::error::Error>>;

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::RunCase { common, out } => {
            let mut settings = common.settings()?;
            if out.is_some() {
                settings.out = out;
            }
            let cfg = settings.run_config()?;
            if let Some(dir) = &cfg.out {
                write_effective_config(&settings, dir)?;
            }
            let outcome = run_and_write::<f64>(&cfg)?;
            print!("{}", outcome.report.to_table());
            Ok(())
        }
        Command::RunAllCases { common, out } => {
            let mut settings = common.settings()?;
            if out.is_some() {
                settings.out = out;
            }
            let base = settings.run_config()?;
            for k in 1..=4 {
                let cfg = builtin_config(&base, k, common.epsilon);
                let outcome = run_and_write::<f64>(&cfg)?;
                println!("{}", outcome.report.to_table());
            }
            Ok(())
        }
        Command::Beamform { common, out, ppm } => {
            let settings = common.settings()?;
            let cfg = settings.run_config()?;
            let prep = prepare::<f64>(&cfg)?;
            if prep.too_coarse {
                eprintln!(
                    "warning: grid spacing / beamwidth = {:.3} exceeds the recommended 0.2",
                    prep.spacing_ratio
                );
            }
            let b = beamformer_map(&cfg, &prep)?;
            let header = MapHeader {
                side_length: prep.grid.side_length(),
                frequency: prep.setup.frequency(),
                units: "Pa^2".into(),
            };
            io::write_map_csv(&out, &b, &header)?;
            if let Some(p) = ppm {
                render_heatmap(&b, &p, cfg.dynamic_range_db)?;
            }
            Ok(())
        }
        Command::Compress {
            map,
            epsilon,
            mode,
            stencil,
            out,
        } => {
            let (b, _) = io::read_map_csv::<f64>(&map)?;
            let options = CompressOptions {
                epsilon,
                mode: mode.parse()?,
                stencil: stencil.parse()?,
            };
            let cg = compress(&b, options)?;
            io::write_compressed_grid(&out, &cg)?;
            println!(
                "kept {} of {} points, sigma = {:.2}",
                cg.len(),
                b.len(),
                cg.sigma()
            );
            Ok(())
        }
        Command::Solve {
            common,
            map,
            grid,
            out,
        } => {
            let settings = common.settings()?;
            let (b, header) = io::read_map_csv::<f64>(&map)?;
            let mut settings = settings;
            settings.n = b.n();
            let cfg = settings.run_config()?;
            let setup = cfg.geometry.setup::<f64>()?;
            let scan = build_scan_grid(&setup, b.n())?;
            let par = cfg.parallelism();
            let st = steering(&setup, &scan, par)?;
            let psf = psf_matrix(
                &scan,
                &st,
                PsfOptions {
                    diagonal_removed: cfg.diagonal_removal,
                    ..PsfOptions::default()
                },
                par,
            )?;
            let keep: Vec<usize> = match grid {
                Some(path) => io::read_compressed_grid(&path)?.kept().to_vec(),
                None => (0..b.len()).collect(),
            };
            let sys = restrict_indices(&psf, &b, &keep)?;
            let result = damas_solve(&sys.matrix, &sys.rhs, &cfg.solve_config())?;
            let x = embed_solution(&result.x, &sys.keep, b.n())?;
            io::write_map_csv(&out, &x, &header)?;
            let meta = SolveMeta::new(&result, cfg.sweep.name());
            io::write_text(&out.with_extension("json"), &meta.to_json())?;
            println!("{}", meta.to_json());
            Ok(())
        }
        Command::Bench {
            sizes,
            psf_sides,
            repeats,
            threads,
            out,
        } => {
            let json = run_bench(&sizes, &psf_sides, repeats, threads.unwrap_or(1))?;
            if let Some(path) = out {
                io::write_text(&path, &json)?;
            }
            Ok(())
        }
        Command::Render { map, out, range_db } => {
            let (m, _) = io::read_map_csv::<f64>(&map)?;
            render_heatmap(&m, &out, range_db)?;
            Ok(())
        }
    }
}

fn write_effective_config(settings: &Settings, dir: &Path) -> Result<()> {
    io::write_text(&dir.join("config.txt"), &format!("{settings:#?}\n"))
}

fn run_bench(
    sizes: &[usize],
    psf_sides: &[usize],
    repeats: usize,
    threads: usize,
) -> Result<String> {
    use crate::geometry::ArraySetup;
    use crate::parallel::Parallelism;

    println!("# DAMAS sweep on dense random systems (median of {repeats})");
    println!(
        "{:>10} {:>14} {:>14}",
        "unknowns", "s/sweep", "ratio to prev"
    );
    let sweeps = sweep_scaling::<f64>(sizes, repeats, 0)?;
    for (i, t) in sweeps.iter().enumerate() {
        let ratio = if i > 0 {
            format!("{:.2}", t.per_sweep.median / sweeps[i - 1].per_sweep.median)
        } else {
            "-".into()
        };
        println!(
            "{:>10} {:>14.6e} {:>14}",
            t.unknowns, t.per_sweep.median, ratio
        );
    }

    println!(
        "# PSF matrix assembly, M = 60 (median of {})",
        repeats.min(3)
    );
    println!("{:>10} {:>14} {:>18}", "points", "seconds", "s / (S^2 M)");
    let setup = ArraySetup::<f64>::simulation_default();
    let par = Parallelism::new(threads);
    let mut psf_rows = Vec::new();
    let mut compression = None;
    for &n in psf_sides {
        let grid = build_scan_grid(&setup, n)?;
        let st = steering(&setup, &grid, par)?;
        let stats = bench(repeats.min(3), || {
            psf_matrix(&grid, &st, PsfOptions::default(), par)
        })?;
        let s = grid.len() as f64;
        println!(
            "{:>10} {:>14.6e} {:>18.3e}",
            grid.len(),
            stats.median,
            stats.median / (s * s * setup.num_mics() as f64)
        );
        psf_rows.push(serde_json::json!({ "points": grid.len(), "seconds": stats }));
        if n == *psf_sides.iter().max().unwrap_or(&n) {
            let psf = psf_matrix(&grid, &st, PsfOptions::default(), par)?;
            let mut x = vec![0.0; grid.len()];
            x[grid.index(n / 2, n / 2)] = 1.0;
            let b = crate::beamform::BeamMap::new(n, psf.matrix().mul_vec(&x))?;
            let ctime = bench(repeats, || compress(&b, CompressOptions::new(0.1)))?;
            let mut xs = vec![0.0; grid.len()];
            let stime = bench(repeats, || {
                crate::solver::damas_sweep(psf.matrix(), b.values(), &mut xs, false)
            })?;
            println!(
                "# grid compression vs one full-grid sweep at S = {}",
                grid.len()
            );
            println!(
                "compression {:.6e} s, sweep {:.6e} s",
                ctime.median, stime.median
            );
            compression = Some(serde_json::json!({
                "points": grid.len(),
                "compression_seconds": ctime,
                "sweep_seconds": stime,
            }));
        }
    }
    let json = serde_json::json!({
        "sweep_scaling": sweeps,
        "psf_assembly": psf_rows,
        "compression": compression,
    });
    Ok(serde_json::to_string_pretty(&json).expect("bench json"))
}
