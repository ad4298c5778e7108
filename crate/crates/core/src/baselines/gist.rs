use std::f64::consts::PI;

use rayon::prelude::*;

use super::io::GrayImage;
use crate::error::{Error, Result};

pub const SCALES: usize = 4;
pub const ORIENTATIONS: usize = 8;
pub const GRID: usize = 4;
pub const KERNEL_SIZE: usize = 31;
pub const GIST_DIM: usize = SCALES * ORIENTATIONS * GRID * GRID;
const MIN_SIDE: usize = 16;

/// One complex Gabor kernel, stored as separate real and imaginary planes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    pub wavelength: f64,
    pub theta: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// 4 scales x 8 orientations. Scale `s` uses wavelength `3 * 1.6^s` pixels with an
/// envelope of `sigma = 0.56 * wavelength` (about one octave of bandwidth) and aspect
/// ratio 0.5; every kernel has its mean removed and unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborBank {
    pub size: usize,
    pub kernels: Vec<GaborKernel>,
}

impl Default for GaborBank {
    fn default() -> Self {
        Self::new(KERNEL_SIZE)
    }
}

impl GaborBank {
    pub fn new(size: usize) -> Self {
        let half = (size / 2) as isize;
        let mut kernels = Vec::with_capacity(SCALES * ORIENTATIONS);
        for s in 0..SCALES {
            let wavelength = 3.0 * 1.6f64.powi(s as i32);
            let sigma = 0.56 * wavelength;
            for o in 0..ORIENTATIONS {
                let theta = o as f64 * PI / ORIENTATIONS as f64;
                let (sin, cos) = theta.sin_cos();
                let mut re = Vec::with_capacity(size * size);
                let mut im = Vec::with_capacity(size * size);
                for y in -half..=half {
                    for x in -half..=half {
                        let (x, y) = (x as f64, y as f64);
                        let xr = x * cos + y * sin;
                        let yr = -x * sin + y * cos;
                        let env = (-(xr * xr + 0.25 * yr * yr) / (2.0 * sigma * sigma)).exp();
                        let phase = 2.0 * PI * xr / wavelength;
                        re.push(env * phase.cos());
                        im.push(env * phase.sin());
                    }
                }
                for plane in [&mut re, &mut im] {
                    let mean = plane.iter().sum::<f64>() / plane.len() as f64;
                    plane.iter_mut().for_each(|v| *v -= mean);
                }
                let norm = re.iter().chain(&im).map(|v| v * v).sum::<f64>().sqrt();
                re.iter_mut().chain(im.iter_mut()).for_each(|v| *v /= norm);
                kernels.push(GaborKernel {
                    wavelength,
                    theta,
                    re,
                    im,
                });
            }
        }
        GaborBank { size, kernels }
    }
}

/// Mirror index without repeating the edge pixel, periodic so any offset is valid.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

/// Per-cell means of the response magnitude, cells row-major.
fn cell_energy(img: &GrayImage, k: &GaborKernel, size: usize) -> [f64; GRID * GRID] {
    let (w, h) = (img.width, img.height);
    let half = (size / 2) as isize;
    // Pad once so the inner loop is branch-free.
    let pw = w + 2 * half as usize;
    let ph = h + 2 * half as usize;
    let mut padded = vec![0.0; pw * ph];
    for py in 0..ph {
        let sy = reflect(py as isize - half, h);
        for px in 0..pw {
            padded[py * pw + px] = img.pixels[sy * w + reflect(px as isize - half, w)];
        }
    }
    let mut sums = [0.0; GRID * GRID];
    let mut counts = [0usize; GRID * GRID];
    for y in 0..h {
        let cy = y * GRID / h;
        for x in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for ky in 0..size {
                let row = &padded[(y + ky) * pw + x..(y + ky) * pw + x + size];
                let kre = &k.re[ky * size..(ky + 1) * size];
                let kim = &k.im[ky * size..(ky + 1) * size];
                for kx in 0..size {
                    re += row[kx] * kre[kx];
                    im += row[kx] * kim[kx];
                }
            }
            let cell = cy * GRID + x * GRID / w;
            sums[cell] += (re * re + im * im).sqrt();
            counts[cell] += 1;
        }
    }
    for (s, c) in sums.iter_mut().zip(counts) {
        *s /= c as f64;
    }
    sums
}

/// 512-dimensional GIST: for each filter (scale-major, then orientation) the 16 cell means
/// of its response magnitude. Images are reflect-padded at the borders.
pub fn gist_extract(img: &GrayImage, bank: &GaborBank) -> Result<Vec<f64>> {
    if img.width < MIN_SIDE || img.height < MIN_SIDE {
        return Err(Error::arg(format!(
            "image is {}x{}, GIST needs at least {MIN_SIDE}x{MIN_SIDE}",
            img.width, img.height
        )));
    }
    let cells: Vec<[f64; GRID * GRID]> = bank.kernels.par_iter().map(|k| cell_energy(img, k, bank.size)).collect();
    Ok(cells.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_shape_and_dc_removed() {
        let bank = GaborBank::default();
        assert_eq!(bank.kernels.len(), 32);
        for k in &bank.kernels {
            assert_eq!(k.re.len(), 31 * 31);
            assert!(k.re.iter().sum::<f64>().abs() < 1e-12);
            assert!(k.im.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn reflect_indices() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn small_image_rejected() {
        let img = GrayImage::constant(15, 40, 0.5);
        assert!(gist_extract(&img, &GaborBank::default()).is_err());
    }

    #[test]
    fn constant_image_has_no_energy() {
        let img = GrayImage::constant(32, 24, 0.7);
        let g = gist_extract(&img, &GaborBank::default()).unwrap();
        assert_eq!(g.len(), GIST_DIM);
        assert!(g.iter().all(|v| v.abs() < 1e-6));
    }
}
