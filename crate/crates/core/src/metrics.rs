//! Image comparison metrics.

use crate::error::{ensure, Result};
use crate::map::Map;

/// Display transform used before non-linear comparisons.
#[inline]
pub fn tonemap_value(v: f64) -> f64 {
    v.clamp(0.0, 1.0).powf(1.0 / 2.2)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn to_psnr(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// `10 log10(1 / MSE)`. Unless `linear`, both images are clamped to
/// `[0, 1]` and gamma encoded first. Identical images give infinity.
pub fn psnr(a: &Map, b: &Map, linear: bool) -> Result<f64> {
    ensure!(a.same_shape(b), Dimensions, "images differ in shape");
    if linear {
        Ok(to_psnr(mse(a.data(), b.data())))
    } else {
        Ok(to_psnr(mse(
            a.map_values(tonemap_value).data(),
            b.map_values(tonemap_value).data(),
        )))
    }
}

/// Linear PSNR over masked pixels only.
pub fn psnr_masked(a: &Map, b: &Map, mask: &[bool]) -> f64 {
    let c = a.channels();
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|m| *m.1) {
        for k in 0..c {
            let d = a.data()[i * c + k] - b.data()[i * c + k];
            sum += d * d;
        }
        n += c;
    }
    to_psnr(if n == 0 { 0.0 } else { sum / n as f64 })
}

pub fn mae(a: &Map, b: &Map) -> Result<f64> {
    ensure!(a.same_shape(b), Dimensions, "images differ in shape");
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5)
/// over positions where the window fits, averaged over channels. Data
/// range 1. Unless `linear`, images are tonemapped first.
pub fn ssim(a: &Map, b: &Map, linear: bool) -> Result<f64> {
    ensure!(a.same_shape(b), Dimensions, "images differ in shape");
    ensure!(
        a.width() >= SSIM_WINDOW && a.height() >= SSIM_WINDOW,
        Dimensions,
        "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}"
    );
    let (a, b) = if linear {
        (a.clone(), b.clone())
    } else {
        (a.map_values(tonemap_value), b.map_values(tonemap_value))
    };
    let g = gaussian_window();
    let (w, h, c) = (a.width(), a.height(), a.channels());
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        for y0 in 0..=h - SSIM_WINDOW {
            for x0 in 0..=w - SSIM_WINDOW {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (j, gy) in g.iter().enumerate() {
                    for (i, gx) in g.iter().enumerate() {
                        let wt = gx * gy;
                        let va = a.get(x0 + i, y0 + j, ch);
                        let vb = b.get(x0 + i, y0 + j, ch);
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        sab += wt * va * vb;
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}
