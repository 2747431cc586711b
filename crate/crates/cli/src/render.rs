//! Raster maps of per-node fields on regular lat/lon grids.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use gridsync_core::correction::{CorrectedField, FieldStage};
use gridsync_core::{GridSpec, MetricField};

use crate::config::{Palette, RenderConfig};
use crate::CliError;

pub const UNDEFINED_COLOR: [u8; 3] = [255, 0, 255];
pub const NO_DATA_COLOR: [u8; 3] = [255, 255, 255];

const MAX_CELLS: usize = 16_000_000;

const VIRIDIS: [[u8; 3]; 5] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];

/// Color for `t` in [0, 1].
pub fn ramp(palette: Palette, t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    match palette {
        Palette::Gray => {
            // Stays clear of the white no-data color.
            let v = (32.0 + t * 192.0).round() as u8;
            [v, v, v]
        }
        Palette::Viridis => {
            let x = t * (VIRIDIS.len() - 1) as f64;
            let k = (x.floor() as usize).min(VIRIDIS.len() - 2);
            let f = x - k as f64;
            let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
            let mix = |i: usize| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * f).round() as u8;
            [mix(0), mix(1), mix(2)]
        }
    }
}

/// Cell geometry of a (nearly) regular grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterGeometry {
    pub lat_max: f64,
    pub lon_min: f64,
    pub lat_step: f64,
    pub lon_step: f64,
    pub rows: usize,
    pub cols: usize,
}

fn axis(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let step = v
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 1e-9)
        .fold(f64::INFINITY, f64::min);
    (v[0], *v.last().expect("non-empty"), step)
}

pub fn raster_geometry(grid: &GridSpec) -> Result<RasterGeometry, CliError> {
    if grid.is_empty() {
        return Err(CliError::runtime("cannot render an empty field"));
    }
    let (lat_min, lat_max, lat_step) = axis(grid.nodes().iter().map(|n| n.lat));
    let (lon_min, lon_max, lon_step) = axis(grid.nodes().iter().map(|n| n.lon));
    let count = |lo: f64, hi: f64, step: f64| {
        if step.is_finite() { ((hi - lo) / step).round() as usize + 1 } else { 1 }
    };
    let rows = count(lat_min, lat_max, lat_step);
    let cols = count(lon_min, lon_max, lon_step);
    if rows.saturating_mul(cols) > MAX_CELLS {
        return Err(CliError::runtime(format!("raster of {rows} x {cols} cells is too large")));
    }
    Ok(RasterGeometry {
        lat_max,
        lon_min,
        lat_step: if lat_step.is_finite() { lat_step } else { 1.0 },
        lon_step: if lon_step.is_finite() { lon_step } else { 1.0 },
        rows,
        cols,
    })
}

impl RasterGeometry {
    /// Nearest cell; row 0 is the northern edge.
    pub fn cell(&self, lat: f64, lon: f64) -> (usize, usize) {
        let r = ((self.lat_max - lat) / self.lat_step).round().max(0.0) as usize;
        let c = ((lon - self.lon_min) / self.lon_step).round().max(0.0) as usize;
        (r.min(self.rows - 1), c.min(self.cols - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterInfo {
    pub rows: usize,
    pub cols: usize,
    pub width: u32,
    pub height: u32,
    pub range: (f64, f64),
    pub undefined: usize,
}

/// Renders `values` with a linear ramp over `range` (or the min/max of the
/// defined values). Writes the raster and a `.txt` legend next to it.
pub fn render_values(
    values: &[f64],
    undefined: &[bool],
    grid: &GridSpec,
    range: Option<(f64, f64)>,
    title: &str,
    opts: &RenderConfig,
    path: &Path,
) -> Result<RasterInfo, CliError> {
    if values.is_empty() || values.len() != grid.len() || undefined.len() != values.len() {
        return Err(CliError::runtime(format!("cannot render {title}: field and grid sizes differ or are empty")));
    }
    let geo = raster_geometry(grid)?;
    let defined = || values.iter().zip(undefined).filter(|(v, &u)| !u && v.is_finite()).map(|(v, _)| *v);
    let (lo, hi) = range.unwrap_or_else(|| {
        defined().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    });
    let scale = opts.scale.max(1);
    let width = geo.cols as u32 * scale;
    let height = geo.rows as u32 * scale;
    let mut img = RgbImage::from_pixel(width, height, Rgb(NO_DATA_COLOR));
    let mut n_undefined = 0;
    for i in 0..values.len() {
        let (lat, lon) = grid.coords(i);
        let (r, c) = geo.cell(lat, lon);
        let color = if undefined[i] || !values[i].is_finite() {
            n_undefined += 1;
            UNDEFINED_COLOR
        } else if hi > lo {
            ramp(opts.palette, (values[i] - lo) / (hi - lo))
        } else {
            ramp(opts.palette, 0.5)
        };
        for dy in 0..scale {
            for dx in 0..scale {
                img.put_pixel(c as u32 * scale + dx, r as u32 * scale + dy, Rgb(color));
            }
        }
    }
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ppm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::runtime(format!("{}: {e}", parent.display())))?;
    }
    img.save_with_format(path, format)
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?;

    let hex = |c: [u8; 3]| format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
    let mut legend = String::new();
    let _ = writeln!(legend, "field: {title}");
    let _ = writeln!(legend, "palette: {:?}", opts.palette);
    let _ = writeln!(legend, "min: {lo} -> {}", hex(ramp(opts.palette, 0.0)));
    let _ = writeln!(legend, "max: {hi} -> {}", hex(ramp(opts.palette, 1.0)));
    let _ = writeln!(legend, "undefined: {n_undefined} nodes -> {}", hex(UNDEFINED_COLOR));
    let _ = writeln!(legend, "no data: {}", hex(NO_DATA_COLOR));
    let _ = writeln!(legend, "cells: {} rows x {} cols, {scale} px per cell", geo.rows, geo.cols);
    let legend_path = path.with_extension("txt");
    fs::write(&legend_path, legend).map_err(|e| CliError::runtime(format!("writing {}: {e}", legend_path.display())))?;

    Ok(RasterInfo {
        rows: geo.rows,
        cols: geo.cols,
        width,
        height,
        range: (lo, hi),
        undefined: n_undefined,
    })
}

pub fn render_metric(mf: &MetricField, grid: &GridSpec, opts: &RenderConfig, path: &Path) -> Result<RasterInfo, CliError> {
    // Flagged nodes carry a real conventional value and are drawn as such.
    render_values(&mf.values, &vec![false; mf.len()], grid, None, mf.metric.code(), opts, path)
}

pub fn render_corrected(
    cf: &CorrectedField,
    stage: FieldStage,
    grid: &GridSpec,
    opts: &RenderConfig,
    path: &Path,
) -> Result<RasterInfo, CliError> {
    let title = format!("{} {} ({stage:?})", cf.metric, cf.method);
    match stage {
        FieldStage::Normalized => render_values(&cf.normalized, &cf.undefined, grid, Some((0.0, 1.0)), &title, opts, path),
        FieldStage::Corrected => render_values(&cf.corrected, &cf.undefined, grid, None, &title, opts, path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridsync_core::synth::regular_grid;
    use gridsync_core::Metric;

    #[test]
    fn conus_raster_dimensions() {
        // 0.5 degree grid over 24.5..49.5 N, 125..67 W.
        let grid = regular_grid(24.5, -125.0, 51, 117, 0.5).unwrap();
        let g = raster_geometry(&grid).unwrap();
        assert_eq!((g.rows, g.cols), ((49.5 - 24.5) as usize * 2 + 1, (125 - 67) * 2 + 1));
    }

    #[test]
    fn constant_field_is_one_color() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let grid = regular_grid(30.0, -100.0, 3, 4, 0.5).unwrap();
        let mf = MetricField::new(Metric::Degree, vec![2.0; 12]);
        render_metric(&mf, &grid, &RenderConfig::default(), &p).unwrap();
        let img = image::open(&p).unwrap().to_rgb8();
        let first = *img.get_pixel(0, 0);
        assert!(img.pixels().all(|px| *px == first));
        assert!(fs::read_to_string(p.with_extension("txt")).unwrap().contains("min: 2"));
    }

    #[test]
    fn normalized_ramp_endpoints_and_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.ppm");
        let grid = regular_grid(30.0, -100.0, 1, 3, 1.0).unwrap();
        let opts = RenderConfig { scale: 1, ..RenderConfig::default() };
        let info = render_values(&[0.0, 1.0, f64::NAN], &[false, false, true], &grid, Some((0.0, 1.0)), "t", &opts, &p).unwrap();
        assert_eq!((info.range, info.undefined, info.width, info.height), ((0.0, 1.0), 1, 3, 1));
        let img = image::open(&p).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(0, 0).0, ramp(Palette::Viridis, 0.0));
        assert_eq!(img.get_pixel(1, 0).0, ramp(Palette::Viridis, 1.0));
        assert_eq!(img.get_pixel(2, 0).0, UNDEFINED_COLOR);
        assert_eq!(ramp(Palette::Viridis, 0.0), VIRIDIS[0]);
        assert_eq!(ramp(Palette::Viridis, 1.0), VIRIDIS[4]);
    }

    #[test]
    fn gaps_in_the_grid_stay_no_data() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        let grid = GridSpec::new(vec![(0.0, 0.0), (0.0, 1.0), (1.0, 2.0)]).unwrap();
        let opts = RenderConfig { scale: 1, ..RenderConfig::default() };
        let info = render_values(&[1.0, 2.0, 3.0], &[false; 3], &grid, None, "g", &opts, &p).unwrap();
        assert_eq!((info.rows, info.cols), (2, 3));
        let img = image::open(&p).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(0, 0).0, NO_DATA_COLOR);
        assert_eq!(img.get_pixel(1, 0).0, NO_DATA_COLOR);
        assert_eq!(img.get_pixel(2, 0).0, ramp(Palette::Viridis, 1.0));
        assert_eq!(img.get_pixel(0, 1).0, ramp(Palette::Viridis, 0.0));
    }

    #[test]
    fn empty_field_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let grid = regular_grid(0.0, 0.0, 1, 1, 1.0).unwrap();
        assert!(render_values(&[], &[], &grid, None, "e", &RenderConfig::default(), &dir.path().join("e.png")).is_err());
    }
}
