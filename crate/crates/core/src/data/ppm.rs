//! Plain (P3) and raw (P6) PPM images as `H x W x channels` tensors.

use std::io::Write;
use std::path::Path;

use crate::error::{NortError, Result};
use crate::tensor::{DenseTensor3, Shape3};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Interleaved RGB samples, row-major.
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                NortError::parse(start, format!("unexpected end of file, expected {what}"))
            } else {
                NortError::parse(start, format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| NortError::parse(start, format!("{what} out of range")))
    }
}

/// Parses a P3 or P6 image.
pub fn parse_ppm(bytes: &[u8]) -> Result<PpmImage> {
    if bytes.len() < 2 {
        return Err(NortError::parse(
            0,
            "unexpected end of file in magic number",
        ));
    }
    let raw = match &bytes[..2] {
        b"P3" => false,
        b"P6" => true,
        _ => return Err(NortError::parse(0, "expected magic P3 or P6")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let max_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(NortError::parse(
            max_at,
            "image dimensions must be positive",
        ));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(NortError::parse(
            max_at,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or_else(|| NortError::parse(0, "image too large"))?;
    let mut samples = Vec::with_capacity(n);
    if raw {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(NortError::parse(
                cur.pos,
                "expected whitespace after maxval",
            ));
        }
        cur.pos += 1;
        let width_bytes = if maxval < 256 { 1 } else { 2 };
        let need = n * width_bytes;
        if bytes.len() - cur.pos < need {
            return Err(NortError::parse(
                bytes.len(),
                format!("unexpected end of file: raster needs {need} bytes"),
            ));
        }
        let raster = &bytes[cur.pos..cur.pos + need];
        if width_bytes == 1 {
            samples.extend(raster.iter().map(|&b| b as u16));
        } else {
            samples.extend(
                raster
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]])),
            );
        }
        for (i, &s) in samples.iter().enumerate() {
            if s as usize > maxval {
                return Err(NortError::parse(
                    cur.pos + i * width_bytes,
                    "sample exceeds maxval",
                ));
            }
        }
    } else {
        for _ in 0..n {
            cur.skip_space_and_comments();
            let at = cur.pos;
            let s = cur.number("sample")?;
            if s > maxval {
                return Err(NortError::parse(
                    at,
                    format!("sample {s} exceeds maxval {maxval}"),
                ));
            }
            samples.push(s as u16);
        }
    }
    Ok(PpmImage {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

/// Stacks images into an `H x W x 3n` tensor with values scaled to `[0, 1]`.
pub fn ppm_to_tensor(images: &[PpmImage]) -> Result<DenseTensor3> {
    let first = images
        .first()
        .ok_or_else(|| NortError::config("no images to ingest"))?;
    let (h, w) = (first.height, first.width);
    if let Some(bad) = images.iter().find(|im| im.height != h || im.width != w) {
        return Err(NortError::shape(format!(
            "image is {}x{}, expected {h}x{w}",
            bad.height, bad.width
        )));
    }
    let shape = Shape3::new(h, w, 3 * images.len())?;
    Ok(DenseTensor3::from_fn(shape, |[y, x, band]| {
        let im = &images[band / 3];
        im.samples[3 * (y * w + x) + band % 3] as f64 / im.maxval as f64
    }))
}

/// Reads PPM files in order into one tensor.
pub fn ingest_ppm<P: AsRef<Path>>(paths: &[P]) -> Result<DenseTensor3> {
    let images = paths
        .iter()
        .map(|p| parse_ppm(&std::fs::read(p)?))
        .collect::<Result<Vec<_>>>()?;
    ppm_to_tensor(&images)
}

/// Writes three bands starting at `band` as an 8-bit image. Values are
/// clamped to `[0, 1]` and rounded to the nearest level.
pub fn write_ppm<W: Write>(t: &DenseTensor3, band: usize, plain: bool, mut w: W) -> Result<()> {
    let [h, wd, bands] = t.shape().dims();
    if band + 3 > bands {
        return Err(NortError::shape(format!(
            "bands {}..{} requested from a tensor with {bands}",
            band + 1,
            band + 3
        )));
    }
    let level = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    if plain {
        writeln!(w, "P3\n{wd} {h}\n255")?;
        for y in 0..h {
            let row: Vec<String> = (0..wd)
                .flat_map(|x| (0..3).map(move |c| (x, c)))
                .map(|(x, c)| level(t.get([y, x, band + c])).to_string())
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    } else {
        write!(w, "P6\n{wd} {h}\n255\n")?;
        let mut raster = Vec::with_capacity(h * wd * 3);
        for y in 0..h {
            for x in 0..wd {
                for c in 0..3 {
                    raster.push(level(t.get([y, x, band + c])));
                }
            }
        }
        w.write_all(&raster)?;
    }
    Ok(())
}

pub fn export_ppm(
    t: &DenseTensor3,
    band: usize,
    plain: bool,
    path: impl AsRef<Path>,
) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_ppm(t, band, plain, f)
}
