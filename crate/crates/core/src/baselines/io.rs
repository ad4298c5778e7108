use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::arg(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::arg(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Splits the header into tokens while skipping `#` comments; returns the tokens and the
/// offset just past the single whitespace byte that ends the header.
fn header_tokens(buf: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < buf.len() && buf[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < buf.len() && buf[i] == b'#' {
            while i < buf.len() && buf[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < buf.len() && !buf[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&buf[start..i]).into_owned());
    }
    Ok((tokens, i + 1))
}

/// Parses ASCII (`P2`) or binary (`P5`, 8 or 16 bit) portable graymaps.
pub fn read_pgm<R: Read>(mut input: R) -> Result<GrayImage> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let (head, offset) = header_tokens(&buf, 4)?;
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    let (width, height, maxval) = (num(&head[1])?, num(&head[2])?, num(&head[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let n = width * height;
    let raw: Vec<usize> = match head[0].as_str() {
        "P2" => {
            let text = std::str::from_utf8(buf.get(offset..).unwrap_or_default())
                .map_err(|_| Error::Format("PGM raster is not ASCII".into()))?;
            let vals = text.split_ascii_whitespace().take(n).map(num).collect::<Result<Vec<_>>>()?;
            vals
        }
        "P5" => {
            let bytes = if maxval < 256 { 1 } else { 2 };
            let body = buf
                .get(offset..offset + n * bytes)
                .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
            if bytes == 1 {
                body.iter().map(|&b| b as usize).collect()
            } else {
                body.chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                    .collect()
            }
        }
        other => return Err(Error::Format(format!("unsupported image magic {other:?}; expected P2 or P5"))),
    };
    if raw.len() != n {
        return Err(Error::Format(format!("PGM has {} of {n} pixels", raw.len())));
    }
    if raw.iter().any(|&v| v > maxval) {
        return Err(Error::Format("PGM sample exceeds maxval".into()));
    }
    GrayImage::new(width, height, raw.into_iter().map(|v| v as f64 / maxval as f64).collect())
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pgm(BufReader::new(file))
}

/// One whitespace-separated descriptor per line; every row must have `dim` values when given,
/// otherwise the width of the first row.
pub fn read_descriptors<R: BufRead>(input: R, dim: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = dim;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        let expected = *width.get_or_insert(row.len());
        if row.len() != expected || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected {expected} finite values, got {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_descriptors(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_descriptors(BufReader::new(file), dim)
}
