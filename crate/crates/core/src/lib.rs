//! Delay-and-sum beamforming and DAMAS deconvolution on a wavelet-compressed
//! scan grid.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the scalar type.
//!
//! ```
//! use wavedamas::{compress, CompressOptions, BeamMap64};
//!
//! let b = BeamMap64::new(4, (0..16).map(|i| i as f64).collect()).unwrap();
//! let grid = compress(&b, CompressOptions::new(0.1)).unwrap();
//! assert!(grid.len() <= 16);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod benchmarks;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod render;
pub mod scalar;
pub mod solver;
pub mod synth;
pub mod wavelet;

pub use beamform::{
    das_map, dirty_map_from_sources, psf_matrix, steering, BeamMap, PsfOptions, PsfSystem,
    SteeringSet,
};
pub use error::{Error, Result};
pub use geometry::{
    build_scan_grid, default_array, rayleigh_beamwidth, spacing_ratio, ArraySetup, ScanGrid,
};
pub use matrix::DenseMatrix;
pub use metrics::{attribute_to_sources, integrated_power, CaseReport, Region};
pub use parallel::Parallelism;
pub use pipeline::{run_case, CaseOutcome, RunConfig, SynthesisPath};
pub use scalar::Real;
pub use solver::{damas_solve, restrict_system, SolveConfig, SolveResult, SweepMode};
pub use synth::{
    builtin_case, remove_diagonal, scene_csm_ideal, scene_csm_sampled, PointSource,
    SamplingOptions, SourceScene, SpectralData,
};
pub use wavelet::{compress, CompressOptions, CompressedGrid, Stencil, ThresholdMode};

pub type ArraySetup64 = ArraySetup<f64>;
pub type ScanGrid64 = ScanGrid<f64>;
pub type BeamMap64 = BeamMap<f64>;
pub type PsfSystem64 = PsfSystem<f64>;
pub type SourceScene64 = SourceScene<f64>;
pub type SpectralData64 = SpectralData<f64>;
pub type DenseMatrix64 = DenseMatrix<f64>;

pub type ArraySetup32 = ArraySetup<f32>;
pub type ScanGrid32 = ScanGrid<f32>;
pub type BeamMap32 = BeamMap<f32>;
pub type PsfSystem32 = PsfSystem<f32>;
pub type SourceScene32 = SourceScene<f32>;
pub type SpectralData32 = SpectralData<f32>;
pub type DenseMatrix32 = DenseMatrix<f32>;
