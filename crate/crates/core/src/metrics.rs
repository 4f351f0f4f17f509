//! Full-reference image metrics.

use crate::error::{Error, Result};
use crate::render::Frame;

/// Reported PSNR for identical frames.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const PEAK: f64 = 255.0;

fn same_size(a: &Frame, b: &Frame) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// `10·log10(255² / MSE)` over all channels, capped at [`PSNR_CAP`].
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    same_size(a, b)?;
    let sse: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP);
    }
    let mse = sse as f64 / a.pixels().len() as f64;
    Ok((10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP))
}

fn luma(f: &Frame) -> Vec<f64> {
    f.pixels()
        .chunks_exact(3)
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - c;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|v| v / sum)
}

/// Separable valid-mode filter; output is `(w − 10) × (h − 10)`.
fn filter(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, a)| a * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean single-scale SSIM of the luma channels.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    same_size(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w.min(h) < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let (ya, yb) = (luma(a), luma(b));
    let k = gaussian_kernel();
    let product = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter(&ya, w, h, &k);
    let mu_b = filter(&yb, w, h, &k);
    let aa = filter(&product(&ya, &ya), w, h, &k);
    let bb = filter(&product(&yb, &yb), w, h, &k);
    let ab = filter(&product(&ya, &yb), w, h, &k);
    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);
    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(sum / mu_a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub psnr: f64,
    pub ssim: f64,
}

/// Scores corresponding frames of two equally long sequences.
pub fn score_sequence(rendered: &[Frame], reference: &[Frame]) -> Result<Vec<FrameScore>> {
    if rendered.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frames vs {} reference frames",
            rendered.len(),
            reference.len()
        )));
    }
    if rendered.is_empty() {
        return Err(Error::EmptySequence);
    }
    rendered
        .iter()
        .zip(reference)
        .map(|(a, b)| {
            Ok(FrameScore {
                psnr: psnr(a, b)?,
                ssim: ssim(a, b)?,
            })
        })
        .collect()
}

/// Arithmetic means of PSNR and SSIM.
pub fn mean_score(scores: &[FrameScore]) -> FrameScore {
    let n = scores.len().max(1) as f64;
    FrameScore {
        psnr: scores.iter().map(|s| s.psnr).sum::<f64>() / n,
        ssim: scores.iter().map(|s| s.ssim).sum::<f64>() / n,
    }
}
