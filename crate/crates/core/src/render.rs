//! Binary PPM (P6) heatmaps of grid maps.
//!
//! Values are converted to dB relative to the map maximum and clipped at
//! `-dynamic_range_db`. The clipped level is quantised to `0..=255` with
//! `floor`, so only pixels equal to the maximum reach the top colour.
//! Colours follow a black-red-yellow-white ramp computed with integer
//! arithmetic:
//!
//! ```text
//! r = min(3t, 255), g = clamp(3t - 255, 0, 255), b = clamp(3t - 510, 0, 255)
//! ```
//!
//! Image row `i` is grid row `i` (grid `y` increases downwards in the image).

use std::path::Path;

use crate::beamform::BeamMap;
use crate::error::{Error, Result};
use crate::io::write_bytes;
use crate::scalar::Real;

pub fn colormap(level: u8) -> [u8; 3] {
    let t = 3 * level as i32;
    [
        t.min(255) as u8,
        (t - 255).clamp(0, 255) as u8,
        (t - 510).clamp(0, 255) as u8,
    ]
}

/// Colour level of every pixel.
pub fn heatmap_levels<T: Real>(map: &BeamMap<T>, dynamic_range_db: f64) -> Result<Vec<u8>> {
    if !(dynamic_range_db > 0.0) || !dynamic_range_db.is_finite() {
        return Err(Error::Input(format!(
            "dynamic range must be positive, got {dynamic_range_db}"
        )));
    }
    let max = map.max().as_f64();
    Ok(map
        .values()
        .iter()
        .map(|v| {
            let v = v.as_f64();
            if !(max > 0.0) || !(v > 0.0) {
                return 0;
            }
            let db = (10.0 * (v / max).log10()).max(-dynamic_range_db);
            let level = ((db + dynamic_range_db) / dynamic_range_db * 255.0).floor();
            if v == max {
                255
            } else {
                level.clamp(0.0, 254.0) as u8
            }
        })
        .collect())
}

pub fn heatmap_ppm<T: Real>(map: &BeamMap<T>, dynamic_range_db: f64) -> Result<Vec<u8>> {
    let levels = heatmap_levels(map, dynamic_range_db)?;
    let n = map.n();
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    out.reserve(levels.len() * 3);
    for level in levels {
        out.extend_from_slice(&colormap(level));
    }
    Ok(out)
}

pub fn render_heatmap<T: Real>(map: &BeamMap<T>, path: &Path, dynamic_range_db: f64) -> Result<()> {
    write_bytes(path, &heatmap_ppm(map, dynamic_range_db)?)
}
