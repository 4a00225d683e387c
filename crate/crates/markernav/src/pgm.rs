//! Binary PGM (P5) grids with a plain-text sidecar.
//!
//! Occupancy values map to grey levels as -1 -> 205, 0 -> 254, 100 -> 0 and
//! `p -> round(254 - 2.54 p)` in between. Row 0 of the image is the top of
//! the map (largest y).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use markernav_core::mapping::{OCCUPIED, UNKNOWN};
use markernav_core::raster::{BitGrid, Grid, GridGeometry};

use crate::error::{CliError, Result};

pub const UNKNOWN_GREY: u8 = 205;
/// Grey level used to draw paths into overlays.
pub const PATH_GREY: u8 = 128;

pub fn grey_of(value: i8) -> u8 {
    if value < 0 {
        UNKNOWN_GREY
    } else {
        (254.0 - 2.54 * f64::from(value.min(OCCUPIED))).round() as u8
    }
}

pub fn value_of(grey: u8) -> Option<i8> {
    if grey == UNKNOWN_GREY {
        return Some(UNKNOWN);
    }
    (0..=OCCUPIED).find(|&p| grey_of(p) == grey)
}

/// Text written as `#` comment lines into every output file.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub seed: u64,
    pub params: String,
}

impl Provenance {
    pub fn new(seed: u64, params: impl Into<String>) -> Self {
        Self {
            seed,
            params: params.into(),
        }
    }

    pub fn comment_lines(&self) -> String {
        let mut s = format!("# seed {}\n", self.seed);
        for line in self.params.lines() {
            let _ = writeln!(s, "# {line}");
        }
        s
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn encode_p5(width: usize, height: usize, maxval: u32, prov: &Provenance, mut pixel: impl FnMut(usize, usize, &mut Vec<u8>)) -> Vec<u8> {
    let mut out = format!("P5\n{}{width} {height}\n{maxval}\n", prov.comment_lines()).into_bytes();
    for row in 0..height {
        let y = height - 1 - row;
        for x in 0..width {
            pixel(x, y, &mut out);
        }
    }
    out
}

pub fn encode_grid(values: &Grid<i8>, prov: &Provenance) -> Vec<u8> {
    encode_p5(values.width(), values.height(), 255, prov, |x, y, out| out.push(grey_of(*values.get(x, y))))
}

/// Raw image bytes drawn bottom-up, as an 8-bit PGM.
pub fn encode_grey(pixels: &Grid<u8>, prov: &Provenance) -> Vec<u8> {
    encode_p5(pixels.width(), pixels.height(), 255, prov, |x, y, out| out.push(*pixels.get(x, y)))
}

/// Per-cell observation counts as a 16-bit PGM, saturating at 65535.
pub fn encode_counts(counts: &Grid<u32>, prov: &Provenance) -> Vec<u8> {
    encode_p5(counts.width(), counts.height(), 65535, prov, |x, y, out| {
        let v = (*counts.get(x, y)).min(65535) as u16;
        out.extend_from_slice(&v.to_be_bytes());
    })
}

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let bad = |m: &str| CliError::format(path, m.to_string());
    if !bytes.starts_with(b"P5") {
        return Err(bad("not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(bad("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed header number"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after maxval"));
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("invalid dimensions or maxval"));
    }
    Ok(Header {
        width: w as usize,
        height: h as usize,
        maxval: maxval as u32,
        data_start: pos + 1,
    })
}

/// Raw 8-bit pixels, bottom row first.
pub fn decode_grey(bytes: &[u8], path: &Path) -> Result<Grid<u8>> {
    let h = parse_header(bytes, path)?;
    if h.maxval > 255 {
        return Err(CliError::format(path, "expected an 8-bit PGM"));
    }
    let data = &bytes[h.data_start..];
    if data.len() != h.width * h.height {
        return Err(CliError::format(
            path,
            format!("expected {} pixels, found {}", h.width * h.height, data.len()),
        ));
    }
    Ok(Grid::from_fn(h.width, h.height, |x, y| data[(h.height - 1 - y) * h.width + x]))
}

pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<Grid<i8>> {
    let grey = decode_grey(bytes, path)?;
    let mut out = Grid::new(grey.width(), grey.height(), UNKNOWN);
    for y in 0..grey.height() {
        for x in 0..grey.width() {
            let g = *grey.get(x, y);
            let v = value_of(g).ok_or_else(|| {
                CliError::format(path, format!("grey level {g} at cell ({x}, {y}) is not an occupancy value"))
            })?;
            out.set(x, y, v);
        }
    }
    Ok(out)
}

/// Geometry and threshold stored next to a grid image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sidecar {
    pub geometry: GridGeometry,
    pub threshold: i8,
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("txt")
}

pub fn encode_sidecar(sc: &Sidecar, width: usize, height: usize, prov: &Provenance) -> String {
    let g = &sc.geometry;
    format!(
        "{}width {width}\nheight {height}\nresolution {}\norigin_x {}\norigin_y {}\nthreshold {}\n",
        prov.comment_lines(),
        g.resolution,
        g.origin.0,
        g.origin.1,
        sc.threshold
    )
}

pub fn decode_sidecar(text: &str, path: &Path) -> Result<Sidecar> {
    let mut resolution = None;
    let mut origin = (None, None);
    let mut threshold = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, value) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| CliError::format(path, format!("malformed line {line:?}")))?;
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::format(path, format!("bad number for {key}: {v:?}")))
        };
        match key {
            "resolution" => resolution = Some(num(value)?),
            "origin_x" => origin.0 = Some(num(value)?),
            "origin_y" => origin.1 = Some(num(value)?),
            "threshold" => threshold = Some(num(value)?),
            "width" | "height" => {}
            other => return Err(CliError::format(path, format!("unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| CliError::format(path, format!("missing {k}"));
    let threshold = threshold.ok_or_else(|| missing("threshold"))?;
    if !(0.0..=100.0).contains(&threshold) || threshold.fract() != 0.0 {
        return Err(CliError::format(path, "threshold must be an integer in 0..=100"));
    }
    let geometry = GridGeometry::new(
        resolution.ok_or_else(|| missing("resolution"))?,
        (origin.0.ok_or_else(|| missing("origin_x"))?, origin.1.ok_or_else(|| missing("origin_y"))?),
    )?;
    Ok(Sidecar {
        geometry,
        threshold: threshold as i8,
    })
}

/// A grid image with its sidecar.
#[derive(Debug, Clone)]
pub struct MapFile {
    pub values: Grid<i8>,
    pub sidecar: Sidecar,
}

impl MapFile {
    pub fn load(path: &Path) -> Result<Self> {
        let values = decode_grid(&read_file(path)?, path)?;
        let sc_path = sidecar_path(path);
        let text = String::from_utf8(read_file(&sc_path)?).map_err(|_| CliError::format(&sc_path, "not UTF-8"))?;
        Ok(Self {
            values,
            sidecar: decode_sidecar(&text, &sc_path)?,
        })
    }

    pub fn save(&self, path: &Path, prov: &Provenance) -> Result<()> {
        write_file(path, &encode_grid(&self.values, prov))?;
        let text = encode_sidecar(&self.sidecar, self.values.width(), self.values.height(), prov);
        write_file(&sidecar_path(path), text.as_bytes())
    }

    /// Cells at or above the threshold.
    pub fn obstacles(&self) -> BitGrid {
        self.values.map(|&v| v >= self.sidecar.threshold)
    }

    /// Observed cells below the threshold.
    pub fn free(&self) -> BitGrid {
        self.values.map(|&v| v >= 0 && v < self.sidecar.threshold)
    }

    pub fn known(&self) -> BitGrid {
        self.values.map(|&v| v >= 0)
    }

    pub fn from_obstacles(obstacles: &BitGrid, geometry: GridGeometry) -> Self {
        Self {
            values: obstacles.map(|&o| if o { OCCUPIED } else { 0 }),
            sidecar: Sidecar {
                geometry,
                threshold: markernav_core::mapping::POSSIBLE,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_mapping_anchors() {
        assert_eq!(grey_of(-1), 205);
        assert_eq!(grey_of(0), 254);
        assert_eq!(grey_of(100), 0);
        assert_eq!(grey_of(50), 127);
        for v in -1..=100 {
            assert_eq!(value_of(grey_of(v)), Some(v));
        }
        assert_eq!(value_of(255), None);
    }

    #[test]
    fn rows_are_stored_top_down() {
        let g = Grid::from_fn(2, 2, |x, y| if (x, y) == (0, 1) { 100 } else { 0 });
        let bytes = encode_grid(&g, &Provenance::new(1, ""));
        let data = &bytes[bytes.len() - 4..];
        assert_eq!(data, &[0, 254, 254, 254]);
    }

    #[test]
    fn header_with_comments_parses() {
        let g = Grid::from_fn(3, 2, |x, _| x as i8 * 50 - 1);
        let bytes = encode_grid(&g, &Provenance::new(9, "a = 1\nb = \"x\""));
        assert_eq!(decode_grid(&bytes, Path::new("t.pgm")).unwrap(), g);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let bytes = b"P5\n2 2\n255\n\x00\x00\x00".to_vec();
        assert!(decode_grid(&bytes, Path::new("t.pgm")).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let sc = Sidecar {
            geometry: GridGeometry::new(20.0, (500.0, 500.0)).unwrap(),
            threshold: 50,
        };
        let text = encode_sidecar(&sc, 1000, 1000, &Provenance::new(3, "k = 2"));
        assert_eq!(decode_sidecar(&text, Path::new("m.txt")).unwrap(), sc);
    }
}
