//! Acceptance suite. Runs every criterion sequentially (timing criteria must
//! not compete with other tests for cores) and prints one line per criterion.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavedamas::benchmarks::sweep_scaling;
use wavedamas::pipeline::{builtin_config, run_case, CaseOutcome};
use wavedamas::solver::damas_sweep;
use wavedamas::wavelet::{build_nested_grids, reconstruct_error_bound_check};
use wavedamas::{
    build_scan_grid, compress, damas_solve, das_map, psf_matrix, rayleigh_beamwidth,
    scene_csm_ideal, spacing_ratio, steering, ArraySetup64, BeamMap64, CompressOptions,
    Parallelism, PointSource, PsfOptions, RunConfig, SolveConfig, SourceScene64, Stencil,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("1 geometry constants", c1_geometry),
        ("2 self-PSF normalisation", c2_self_psf),
        ("3 small-grid oracle equivalence", c3_oracle),
        ("4 case 1 end to end", c4_case1),
        ("5 case 3 dynamic range", c5_case3),
        ("6 epsilon sweep monotonicity", c6_monotone),
        ("7 per-sweep O(S^2) scaling", c7_scaling),
        ("8 wavelet invariants", c8_wavelet),
        ("9 compression overhead", c9_overhead),
        ("10 determinism", c10_determinism),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let t = Instant::now();
        let o = run();
        println!(
            "criterion {name}: {} ({:.1} s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn c1_geometry() -> Outcome {
    let setup = ArraySetup64::simulation_default();
    let grid = build_scan_grid(&setup, 50).unwrap();
    let b = rayleigh_beamwidth(&setup);
    let ratio = spacing_ratio(&grid, b).unwrap().ratio;
    let l = grid.side_length();
    let pass = (l - 5.77).abs() <= 0.01
        && (b - 1.06).abs() <= 0.01
        && grid.len() == 2500
        && (ratio - 0.11).abs() <= 0.005;
    outcome(
        pass,
        format!(
            "L = {l:.4} m, B = {b:.4} m, S = {}, dx/B = {ratio:.4}",
            grid.len()
        ),
    )
}

fn c2_self_psf() -> Outcome {
    let setup = ArraySetup64::simulation_default();
    let grid = build_scan_grid(&setup, 50).unwrap();
    let par = Parallelism::default();
    let st = steering(&setup, &grid, par).unwrap();
    let psf = psf_matrix(&grid, &st, PsfOptions::default(), par).unwrap();
    let worst = (0..grid.len())
        .map(|s| (psf.get(s, s) - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-9, format!("max |A[s,s] - 1| = {worst:.3e}"))
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Delay-and-sum map of an incoherent scene written out from the definitions:
/// `b(r) = sum_s q_s^2 |v(r)^H g(r_s)|^2 / M^2`.
fn das_oracle(
    setup: &ArraySetup64,
    grid: &wavedamas::ScanGrid64,
    scene: &SourceScene64,
) -> Vec<f64> {
    let k = setup.wavenumber();
    let o = [0.0; 3];
    let m = setup.num_mics() as f64;
    (0..grid.len())
        .map(|r| {
            let pr = grid.point(r);
            scene
                .sources
                .iter()
                .map(|src| {
                    let ps = grid.point(grid.index(src.row, src.col));
                    let sum: Complex64 = setup
                        .mics()
                        .iter()
                        .map(|&mic| {
                            let (dr, ds) = (dist(pr, mic), dist(ps, mic));
                            let v = Complex64::from_polar(dr / dist(pr, o), -k * dr);
                            let g = Complex64::from_polar(dist(ps, o) / ds, -k * ds);
                            v.conj() * g
                        })
                        .sum();
                    src.amplitude * src.amplitude * sum.norm_sqr() / (m * m)
                })
                .sum()
        })
        .collect()
}

fn c3_oracle() -> Outcome {
    let setup = ArraySetup64::simulation_default();
    let grid = build_scan_grid(&setup, 8).unwrap();
    let par = Parallelism::new(1);
    let st = steering(&setup, &grid, par).unwrap();
    let psf = psf_matrix(&grid, &st, PsfOptions::default(), par).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_x, mut worst_b) = (0.0f64, 0.0f64);
    for trial in 0..16 {
        let count = 1 + trial % 2;
        let mut sources: Vec<PointSource<f64>> = Vec::new();
        while sources.len() < count {
            let (row, col) = (rng.random_range(0..8), rng.random_range(0..8));
            if sources.iter().all(|s| (s.row, s.col) != (row, col)) {
                sources.push(PointSource::new(row, col, rng.random_range(0.3..1.5)));
            }
        }
        let scene = SourceScene64::new(sources, setup.frequency());
        let csm = scene_csm_ideal(&scene, &setup, &grid).unwrap();
        let b = das_map(&csm, &st, 8, par).unwrap();

        let oracle = das_oracle(&setup, &grid, &scene);
        let x_true = scene.power_map(8).unwrap();
        let ax = psf.matrix().mul_vec(&x_true);
        for ((lib, orc), col) in b.values().iter().zip(&oracle).zip(&ax) {
            let scale = orc.abs().max(1e-300);
            worst_b = worst_b
                .max((lib - orc).abs() / scale)
                .max((lib - col).abs() / scale);
        }

        let x = damas_solve(psf.matrix(), b.values(), &SolveConfig::new(1000))
            .unwrap()
            .x;
        let err: f64 = x
            .iter()
            .zip(&x_true)
            .map(|(a, t)| (a - t).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = x_true.iter().map(|t| t * t).sum::<f64>().sqrt();
        worst_x = worst_x.max(err / norm);
    }
    outcome(
        worst_x < 1e-3 && worst_b <= 1e-9,
        format!("worst relative L2 error of x = {worst_x:.3e}, worst DAS vs A-column deviation = {worst_b:.3e}"),
    )
}

fn case_with(id: u32, epsilon: Option<f64>, stencil: Stencil) -> CaseOutcome<f64> {
    let base = RunConfig {
        threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..RunConfig::default()
    };
    let mut cfg = builtin_config(&base, id, epsilon);
    cfg.compression.stencil = stencil;
    run_case::<f64>(&cfg).unwrap()
}

fn case(id: u32, epsilon: Option<f64>) -> CaseOutcome<f64> {
    case_with(id, epsilon, Stencil::Linear)
}

fn argmax_rc(map: &BeamMap64) -> (usize, usize) {
    let i = map.argmax();
    (i / map.n(), i % map.n())
}

fn c4_case1() -> Outcome {
    let out = case(1, Some(0.1));
    let r = &out.report;
    let (pf, pc) = (argmax_rc(&out.full_map), argmax_rc(&out.compressed_map));
    let per_iter_ratio = out.compressed.seconds_per_iteration() / out.full.seconds_per_iteration();
    let pass = pf == (24, 24)
        && pc == (24, 24)
        && r.full.eta.abs() <= 0.05
        && r.compressed.eta.abs() <= 0.06
        && r.sigma >= 50.0
        && per_iter_ratio <= 0.01;
    outcome(
        pass,
        format!(
            "peaks {pf:?}/{pc:?}, eta1 = {:.2}%, eta2 = {:.2}%, sigma = {:.1}, T2/T1 per iteration = {per_iter_ratio:.2e}",
            100.0 * r.full.eta,
            100.0 * r.compressed.eta,
            r.sigma
        ),
    )
}

/// A source counts as resolved when some positive local maximum (over its
/// 8-neighbourhood) lies within one grid step of it.
fn resolved(map: &BeamMap64, row: usize, col: usize) -> bool {
    let n = map.n() as isize;
    let at = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= n || c >= n {
            0.0
        } else {
            map.get(r as usize, c as usize)
        }
    };
    let is_peak = |r: isize, c: isize| {
        let v = at(r, c);
        v > 0.0 && (-1..=1).all(|dr| (-1..=1).all(|dc| at(r + dr, c + dc) <= v))
    };
    let (r0, c0) = (row as isize, col as isize);
    (-1..=1).any(|dr| (-1..=1).any(|dc| is_peak(r0 + dr, c0 + dc)))
}

struct Case3 {
    resolved: bool,
    db_full: f64,
    db_compressed: f64,
    eta_gap: f64,
}

impl Case3 {
    fn pass(&self) -> bool {
        self.resolved
            && (self.db_full - 10.0).abs() <= 1.5
            && (self.db_compressed - 10.0).abs() <= 1.5
            && self.eta_gap <= 0.03
    }
}

fn case3(stencil: Stencil) -> Case3 {
    let out = case_with(3, Some(0.1), stencil);
    let r = &out.report;
    let sources = [(24, 24), (24, 28)];
    let db = |p: &[f64]| 10.0 * (p[0] / p[1]).log10();
    Case3 {
        resolved: [&out.full_map, &out.compressed_map]
            .iter()
            .all(|m| sources.iter().all(|&(row, col)| resolved(m, row, col))),
        db_full: db(&r.full.per_source),
        db_compressed: db(&r.compressed.per_source),
        eta_gap: (r.compressed.eta - r.full.eta).abs(),
    }
}

fn c5_case3() -> Outcome {
    let describe = |c: &Case3| {
        format!(
            "resolved = {}, ratio {:.2} dB / {:.2} dB, eta gap {:.2} pp",
            c.resolved,
            c.db_full,
            c.db_compressed,
            100.0 * c.eta_gap
        )
    };
    let linear = case3(Stencil::Linear);
    let cubic = case3(Stencil::Cubic);
    outcome(
        linear.pass(),
        format!(
            "linear stencil: {}; cubic stencil (informational, {}): {}",
            describe(&linear),
            if cubic.pass() {
                "would pass"
            } else {
                "would fail"
            },
            describe(&cubic)
        ),
    )
}

fn c6_monotone() -> Outcome {
    let eps = [0.01, 0.05, 0.1, 0.2];
    let rows: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let r = case(4, Some(e)).report;
            (r.sigma, r.compressed.eta)
        })
        .collect();
    let sigma_up = rows.windows(2).all(|w| w[1].0 > w[0].0);
    let eta_up = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    let spread = rows[3].0 / rows[0].0;
    let table: Vec<String> = eps
        .iter()
        .zip(&rows)
        .map(|(e, (s, eta))| format!("eps {e}: sigma {s:.1} eta {:.1}%", 100.0 * eta))
        .collect();
    outcome(
        sigma_up && eta_up && spread >= 3.0,
        format!("{}; sigma(0.2)/sigma(0.01) = {spread:.1}", table.join(", ")),
    )
}

fn c7_scaling() -> Outcome {
    let t = sweep_scaling::<f64>(&[1250, 2500], 15, 7).unwrap();
    let ratio = t[1].per_sweep.median / t[0].per_sweep.median;
    outcome(
        (3.0..=5.0).contains(&ratio),
        format!(
            "median sweep {:.3e} s at 1250, {:.3e} s at 2500, ratio {ratio:.2}",
            t[0].per_sweep.median, t[1].per_sweep.median
        ),
    )
}

fn gaussians(n: usize) -> BeamMap64 {
    let blobs = [
        (0.3, 0.4, 0.12, 1.0),
        (0.7, 0.6, 0.2, 0.6),
        (0.5, 0.2, 0.08, 0.8),
    ];
    let mut v = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let (y, x) = (r as f64 / (n - 1) as f64, c as f64 / (n - 1) as f64);
            v.push(
                blobs
                    .iter()
                    .map(|(cx, cy, w, a)| {
                        a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp()
                    })
                    .sum(),
            );
        }
    }
    BeamMap64::new(n, v).unwrap()
}

fn c8_wavelet() -> Outcome {
    let mut problems = Vec::new();
    let mut worst_bound = 0.0f64;
    for n in [9, 17, 32, 50] {
        let grids = build_nested_grids(n).unwrap();
        let coarsest = grids.level_indices(0);
        let map = gaussians(n);
        let mut previous: Option<Vec<usize>> = None;
        for eps in [0.2, 0.1, 0.05, 0.01, 0.001] {
            let cg = compress(&map, CompressOptions::new(eps)).unwrap();
            if !coarsest.iter().all(|i| cg.contains(*i)) {
                problems.push(format!("N={n} eps={eps}: coarsest level missing"));
            }
            if let Some(prev) = &previous {
                if !prev.iter().all(|i| cg.contains(*i)) {
                    problems.push(format!("N={n} eps={eps}: kept set not nested"));
                }
            }
            if eps == 0.1 {
                let err = reconstruct_error_bound_check(&map, &cg).unwrap();
                worst_bound = worst_bound.max(err / cg.threshold());
            }
            previous = Some(cg.kept().to_vec());
        }
        let constant = BeamMap64::new(n, vec![0.7; n * n]).unwrap();
        if compress(&constant, CompressOptions::new(0.05))
            .unwrap()
            .kept()
            != coarsest.as_slice()
        {
            problems.push(format!(
                "N={n}: constant map not reduced to the coarsest level"
            ));
        }
        if compress(&map, CompressOptions::new(1e-14)).unwrap().sigma() != 1.0 {
            problems.push(format!("N={n}: tiny epsilon does not keep every point"));
        }
    }
    if worst_bound > 10.0 {
        problems.push(format!("reconstruction error {worst_bound:.2} x threshold"));
    }
    let detail = if problems.is_empty() {
        format!("worst reconstruction error = {worst_bound:.2} x eps_eff")
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn c9_overhead() -> Outcome {
    let setup = ArraySetup64::simulation_default();
    let grid = build_scan_grid(&setup, 50).unwrap();
    let par = Parallelism::default();
    let st = steering(&setup, &grid, par).unwrap();
    let psf = psf_matrix(&grid, &st, PsfOptions::default(), par).unwrap();
    let scene: SourceScene64 = wavedamas::builtin_case(1).unwrap();
    let csm = scene_csm_ideal(&scene, &setup, &grid).unwrap();
    let b = das_map(&csm, &st, 50, par).unwrap();

    let compression =
        wavedamas::metrics::bench(21, || compress(&b, CompressOptions::new(0.1))).unwrap();
    let mut x = vec![0.0; grid.len()];
    let sweep =
        wavedamas::metrics::bench(21, || damas_sweep(psf.matrix(), b.values(), &mut x, false))
            .unwrap();
    let ratio = compression.median / sweep.median;
    outcome(
        ratio <= 2.0,
        format!(
            "compression {:.3e} s, one full-grid sweep {:.3e} s, ratio {ratio:.4}",
            compression.median, sweep.median
        ),
    )
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "ppm")))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_wavedamas"))
            .args(["run-case", "--case", "1", "--seed", "11", "--out"])
            .arg(&dir)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        outputs(&dir)
    };
    let (a, b) = (run("a"), run("b"));
    let same = !a.is_empty() && a == b;
    outcome(same, format!("{} CSV/PPM files compared", a.len()))
}
