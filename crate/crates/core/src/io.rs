//! Text file formats: array layouts, scenes, maps, compressed grids and solve
//! metadata.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::beamform::BeamMap;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::SolveResult;
use crate::synth::{PointSource, SourceScene};
use crate::wavelet::{CompressOptions, CompressedGrid};

/// Non-empty, comment-stripped lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((i + 1, content))
    })
}

fn parse_num<V: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<V> {
    token
        .parse()
        .map_err(|_| Error::Input(format!("line {line}: cannot parse {what} from '{token}'")))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Microphone layout: one `x y z` triple in meters per line.
pub fn parse_layout<T: Real>(text: &str) -> Result<Vec<[T; 3]>> {
    data_lines(text)
        .map(|(ln, line)| {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 3 {
                return Err(Error::Input(format!("line {ln}: expected 'x y z'")));
            }
            let mut p = [T::zero(); 3];
            for (slot, tok) in p.iter_mut().zip(&tokens) {
                *slot = T::lit(parse_num::<f64>(tok, ln, "coordinate")?);
            }
            Ok(p)
        })
        .collect()
}

pub fn read_layout<T: Real>(path: &Path) -> Result<Vec<[T; 3]>> {
    parse_layout(&read(path)?)
}

pub fn format_layout<T: Real>(mics: &[[T; 3]]) -> String {
    let mut out = String::from("# x y z (m)\n");
    for p in mics {
        let _ = writeln!(
            out,
            "{:e} {:e} {:e}",
            p[0].as_f64(),
            p[1].as_f64(),
            p[2].as_f64()
        );
    }
    out
}

/// Scene: one `row col amplitude_Pa` triple per line.
pub fn parse_scene<T: Real>(text: &str, frequency: T) -> Result<SourceScene<T>> {
    let sources = data_lines(text)
        .map(|(ln, line)| {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 3 {
                return Err(Error::Input(format!(
                    "line {ln}: expected 'row col amplitude'"
                )));
            }
            Ok(PointSource::new(
                parse_num(tokens[0], ln, "row")?,
                parse_num(tokens[1], ln, "col")?,
                T::lit(parse_num::<f64>(tokens[2], ln, "amplitude")?),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SourceScene::new(sources, frequency))
}

pub fn read_scene<T: Real>(path: &Path, frequency: T) -> Result<SourceScene<T>> {
    parse_scene(&read(path)?, frequency)
}

pub fn format_scene<T: Real>(scene: &SourceScene<T>) -> String {
    let mut out = String::from("# row col amplitude_Pa\n");
    for s in &scene.sources {
        let _ = writeln!(out, "{} {} {}", s.row, s.col, s.amplitude.as_f64());
    }
    out
}

/// Metadata carried in the comment header of a map CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MapHeader {
    pub side_length: f64,
    pub frequency: f64,
    pub units: String,
}

/// `N` rows of `N` comma-separated values, preceded by `#` header lines.
pub fn format_map_csv<T: Real>(map: &BeamMap<T>, header: &MapHeader) -> String {
    let n = map.n();
    let mut out = String::new();
    let _ = writeln!(out, "# n={n}");
    let _ = writeln!(out, "# side_length_m={}", header.side_length);
    let _ = writeln!(out, "# frequency_hz={}", header.frequency);
    let _ = writeln!(out, "# units={}", header.units);
    for row in map.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{:e}", v.as_f64())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_map_csv<T: Real>(text: &str) -> Result<(BeamMap<T>, MapHeader)> {
    let mut header = MapHeader {
        side_length: f64::NAN,
        frequency: f64::NAN,
        units: String::new(),
    };
    let mut declared_n = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "n" => declared_n = Some(parse_num::<usize>(v, i + 1, "n")?),
                    "side_length_m" => header.side_length = parse_num(v, i + 1, "side length")?,
                    "frequency_hz" => header.frequency = parse_num(v, i + 1, "frequency")?,
                    "units" => header.units = v.to_string(),
                    _ => {}
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split(',') {
            values.push(T::lit(parse_num::<f64>(tok.trim(), i + 1, "map value")?));
        }
        let w = values.len() - before;
        if *width.get_or_insert(w) != w {
            return Err(Error::Input(format!("line {}: ragged map row", i + 1)));
        }
        rows += 1;
    }
    let n = declared_n.unwrap_or(rows);
    if rows != n || width.unwrap_or(0) != n {
        return Err(Error::Input(format!("map is not {n}x{n}")));
    }
    Ok((BeamMap::new(n, values)?, header))
}

pub fn write_map_csv<T: Real>(path: &Path, map: &BeamMap<T>, header: &MapHeader) -> Result<()> {
    write(path, format_map_csv(map, header))
}

pub fn read_map_csv<T: Real>(path: &Path) -> Result<(BeamMap<T>, MapHeader)> {
    parse_map_csv(&read(path)?)
}

/// Header `# epsilon=<v> mode=<m> sigma=<v>`, then `index row col level` per
/// retained point.
pub fn format_compressed_grid(cg: &CompressedGrid) -> String {
    let o = cg.options();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# epsilon={} mode={} sigma={}",
        o.epsilon,
        o.mode.name(),
        cg.sigma()
    );
    let _ = writeln!(
        out,
        "# n={} stencil={} threshold={}",
        cg.n(),
        o.stencil.name(),
        cg.threshold()
    );
    for (&i, &lvl) in cg.kept().iter().zip(cg.levels()) {
        let _ = writeln!(out, "{i} {} {} {lvl}", i / cg.n(), i % cg.n());
    }
    out
}

pub fn parse_compressed_grid(text: &str) -> Result<CompressedGrid> {
    let mut options = CompressOptions::new(f64::NAN);
    let mut n = None;
    let mut threshold = f64::NAN;
    let mut kept = Vec::new();
    let mut levels = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(meta) = line.strip_prefix('#') {
            for field in meta.split_whitespace() {
                if let Some((k, v)) = field.split_once('=') {
                    match k {
                        "epsilon" => options.epsilon = parse_num(v, i + 1, "epsilon")?,
                        "mode" => options.mode = v.parse()?,
                        "stencil" => options.stencil = v.parse()?,
                        "n" => n = Some(parse_num::<usize>(v, i + 1, "n")?),
                        "threshold" => threshold = parse_num(v, i + 1, "threshold")?,
                        _ => {}
                    }
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 {
            return Err(Error::Input(format!(
                "line {}: expected 'index row col level'",
                i + 1
            )));
        }
        kept.push(parse_num::<usize>(t[0], i + 1, "index")?);
        rows.push((
            parse_num::<usize>(t[1], i + 1, "row")?,
            parse_num::<usize>(t[2], i + 1, "col")?,
        ));
        levels.push(parse_num::<u8>(t[3], i + 1, "level")?);
    }
    let n = n.ok_or_else(|| Error::Input("compressed grid file lacks the 'n=' header".into()))?;
    for (&i, &(r, c)) in kept.iter().zip(&rows) {
        if r >= n || c >= n || r * n + c != i {
            return Err(Error::Input(format!(
                "index {i} does not match row {r}, col {c}"
            )));
        }
    }
    CompressedGrid::from_parts(n, kept, levels, options, threshold)
}

pub fn write_compressed_grid(path: &Path, cg: &CompressedGrid) -> Result<()> {
    write(path, format_compressed_grid(cg))
}

pub fn read_compressed_grid(path: &Path) -> Result<CompressedGrid> {
    parse_compressed_grid(&read(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveMeta {
    pub iterations: usize,
    pub sweep_mode: String,
    pub unknowns: usize,
    pub total_seconds: f64,
    pub seconds_per_iteration: f64,
    pub final_residual: f64,
}

impl SolveMeta {
    pub fn new<T: Real>(result: &SolveResult<T>, sweep_mode: &str) -> Self {
        Self {
            iterations: result.residuals.len(),
            sweep_mode: sweep_mode.to_string(),
            unknowns: result.x.len(),
            total_seconds: result.total_seconds(),
            seconds_per_iteration: result.seconds_per_iteration(),
            final_residual: result.final_residual().map_or(f64::NAN, |r| r.as_f64()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serialises")
    }
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    write(path, contents)
}

pub fn write_bytes(path: &Path, contents: &[u8]) -> Result<()> {
    write(path, contents)
}
