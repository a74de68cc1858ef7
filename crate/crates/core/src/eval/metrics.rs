//! Full-reference and no-reference image metrics plus word error rate.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::Frame;

fn same_shape(a: &Frame, b: &Frame) -> Result<()> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::Shape(format!(
            "frames differ in size: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// RGB PSNR on the 8-bit scale; identical frames give `+inf`.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    same_shape(a, b)?;
    let (la, lb) = (a.levels(), b.levels());
    let mse = la.iter().zip(&lb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / la.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// PSNR on luma instead of RGB.
pub fn psnr_luma(a: &Frame, b: &Frame) -> Result<f64> {
    same_shape(a, b)?;
    let (la, lb) = (a.luma(), b.luma());
    let mse = la.iter().zip(&lb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / la.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Normalized 1-D Gaussian of odd length `n`.
pub fn gaussian_kernel(n: usize, sigma: f64) -> Vec<f64> {
    let r = (n / 2) as f64;
    let k: Vec<f64> = (0..n).map(|i| (-(i as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of an `h x w` plane.
fn filter_valid(x: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for xo in 0..ow {
            tmp[y * ow + xo] = (0..n).map(|i| k[i] * x[y * w + xo + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for yo in 0..oh {
        for xo in 0..ow {
            out[yo * ow + xo] = (0..n).map(|i| k[i] * tmp[(yo + i) * ow + xo]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean SSIM of luma (0-255) over all valid 11x11 Gaussian windows.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    same_shape(a, b)?;
    ssim_planes(&a.luma(), &b.luma(), a.height(), a.width())
}

pub fn ssim_planes(x: &[f64], y: &[f64], h: usize, w: usize) -> Result<f64> {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Shape(format!("image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")));
    }
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, oh, ow) = filter_valid(x, h, w, &k);
    let (my, ..) = filter_valid(y, h, w, &k);
    let (sxx, ..) = filter_valid(&xx, h, w, &k);
    let (syy, ..) = filter_valid(&yy, h, w, &k);
    let (sxy, ..) = filter_valid(&xy, h, w, &k);
    let mut total = 0.0;
    for i in 0..oh * ow {
        let (ma, mb) = (mx[i], my[i]);
        let va = sxx[i] - ma * ma;
        let vb = syy[i] - mb * mb;
        let cov = sxy[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(total / (oh * ow) as f64)
}

pub const FDBM_THRESHOLD: f64 = 1.0 / 1000.0;

/// Fraction of 2-D spectrum coefficients above `max |F| / 1000`.
pub fn fdbm(img: &Frame) -> f64 {
    fdbm_with(img, FDBM_THRESHOLD)
}

pub fn fdbm_with(img: &Frame, rel_threshold: f64) -> f64 {
    let (h, w) = (img.height(), img.width());
    let mut data: Vec<Complex<f64>> = img.luma().into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_forward(w);
    for r in data.chunks_exact_mut(w) {
        row.process(r);
    }
    let col = planner.plan_fft_forward(h);
    let mut buf = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            buf[y] = data[y * w + x];
        }
        col.process(&mut buf);
        for y in 0..h {
            data[y * w + x] = buf[y];
        }
    }
    let mags: Vec<f64> = data.iter().map(|c| c.norm()).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let thr = max * rel_threshold;
    mags.iter().filter(|&&m| m > thr).count() as f64 / (h * w) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpbdParams {
    pub beta: f64,
    pub p_threshold: f64,
    pub block: usize,
    pub edge_block_fraction: f64,
    pub contrast_split: f64,
    pub w_jnb_low_contrast: f64,
    pub w_jnb_high_contrast: f64,
}

impl Default for CpbdParams {
    fn default() -> Self {
        Self {
            beta: 3.6,
            p_threshold: 0.63,
            block: 64,
            edge_block_fraction: 0.002,
            contrast_split: 50.0,
            w_jnb_low_contrast: 5.0,
            w_jnb_high_contrast: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpbdResult {
    pub score: f64,
    pub edges: usize,
    /// Set when no edge was found; the score is then 0.
    pub no_edges: bool,
}

pub fn cpbd(img: &Frame) -> f64 {
    cpbd_with(img, &CpbdParams::default()).score
}

/// Horizontal-gradient edge map (thinned) of a luma plane.
fn sobel_edges(l: &[f64], h: usize, w: usize) -> Vec<bool> {
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        l[y * w + x]
    };
    let mut s = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            s[y as usize * w + x as usize] = (gx / 8.0).powi(2);
        }
    }
    let thr = 4.0 * s.iter().sum::<f64>() / s.len() as f64;
    let mut edges = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let v = s[y * w + x];
            if v <= thr {
                continue;
            }
            let left = if x > 0 { s[y * w + x - 1] } else { 0.0 };
            let right = if x + 1 < w { s[y * w + x + 1] } else { 0.0 };
            edges[y * w + x] = v > left && v >= right;
        }
    }
    edges
}

/// Width of the edge at (y, x) between the surrounding local extrema along the row.
fn marziliano_width(l: &[f64], w: usize, y: usize, x: usize, rising: bool) -> usize {
    let row = &l[y * w..(y + 1) * w];
    let mut left = 0;
    while x >= left + 2 {
        let (inner, outer) = (row[x - 1 - left], row[x - 2 - left]);
        let d = outer - inner;
        if (rising && d >= 0.0) || (!rising && d <= 0.0) {
            break;
        }
        left += 1;
    }
    let mut right = 0;
    while x + 2 + right < w {
        let (inner, outer) = (row[x + 1 + right], row[x + 2 + right]);
        let d = outer - inner;
        if (rising && d <= 0.0) || (!rising && d >= 0.0) {
            break;
        }
        right += 1;
    }
    left + 1 + right + 1
}

/// Cumulative probability of blur detection.
pub fn cpbd_with(img: &Frame, p: &CpbdParams) -> CpbdResult {
    let (h, w) = (img.height(), img.width());
    let l = img.luma();
    let edges = sobel_edges(&l, h, w);
    let mut probs = Vec::new();
    for by in (0..h).step_by(p.block) {
        for bx in (0..w).step_by(p.block) {
            let (ye, xe) = ((by + p.block).min(h), (bx + p.block).min(w));
            let n = (ye - by) * (xe - bx);
            let count = (by..ye).flat_map(|y| (bx..xe).map(move |x| (y, x))).filter(|&(y, x)| edges[y * w + x]).count();
            if (count as f64) <= p.edge_block_fraction * n as f64 {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for y in by..ye {
                for &v in &l[y * w + bx..y * w + xe] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let w_jnb = if hi - lo <= p.contrast_split { p.w_jnb_low_contrast } else { p.w_jnb_high_contrast };
            for y in by..ye {
                for x in bx..xe {
                    if !edges[y * w + x] {
                        continue;
                    }
                    let gx = l[y * w + (x + 1).min(w - 1)] - l[y * w + x.saturating_sub(1)];
                    let gy = l[(y + 1).min(h - 1) * w + x] - l[y.saturating_sub(1) * w + x];
                    // keep edges whose gradient is within 22.5 degrees of horizontal
                    if gx == 0.0 || gy.abs() > gx.abs() * (std::f64::consts::PI / 8.0).tan() {
                        continue;
                    }
                    let width = marziliano_width(&l, w, y, x, gx > 0.0) as f64;
                    probs.push(1.0 - (-(width / w_jnb).powf(p.beta)).exp());
                }
            }
        }
    }
    if probs.is_empty() {
        return CpbdResult { score: 0.0, edges: 0, no_edges: true };
    }
    let sharp = probs.iter().filter(|&&pb| pb <= p.p_threshold).count();
    CpbdResult { score: sharp as f64 / probs.len() as f64, edges: probs.len(), no_edges: false }
}

/// Gaussian blur with periodic boundaries, applied per channel.
pub fn gaussian_blur(img: &Frame, sigma: f64) -> Frame {
    if sigma <= 0.0 {
        return img.clone();
    }
    let (h, w) = (img.height(), img.width());
    let r = (4.0 * sigma).ceil() as isize;
    let k = gaussian_kernel(2 * r as usize + 1, sigma);
    let mut out = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        let plane: Vec<f64> = (0..h * w).map(|i| img.get(c, i / w, i % w) as f64).collect();
        let mut tmp = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = (-r..=r)
                    .map(|d| k[(d + r) as usize] * plane[y * w + (x as isize + d).rem_euclid(w as isize) as usize])
                    .sum();
            }
        }
        for y in 0..h {
            for x in 0..w {
                out.push(
                    (-r..=r)
                        .map(|d| k[(d + r) as usize] * tmp[(y as isize + d).rem_euclid(h as isize) as usize * w + x])
                        .sum::<f64>(),
                );
            }
        }
    }
    Frame::from_clamped(h, w, out).expect("same size")
}

/// Word-level Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn wer<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Validation("word error rate needs a nonempty reference".into()));
    }
    let r: Vec<&str> = reference.iter().map(|s| s.as_ref()).collect();
    let h: Vec<&str> = hypothesis.iter().map(|s| s.as_ref()).collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Frame {
        let plane: Vec<f64> = (0..h * w).map(|i| f(i / w, i % w) / 127.5 - 1.0).collect();
        Frame::from_clamped(h, w, plane.iter().chain(&plane).chain(&plane).copied()).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = gray(8, 8, |_, _| 100.0);
        let b = gray(8, 8, |_, _| 110.0);
        assert!((psnr(&a, &b).unwrap() - 10.0 * (255f64.powi(2) / 100.0).log10()).abs() < 1e-6);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let z = gray(8, 8, |_, _| 0.0);
        let f = gray(8, 8, |_, _| 255.0);
        assert!(psnr(&z, &f).unwrap().abs() < 1e-9);
    }

    #[test]
    fn ssim_identity_and_small_image() {
        let a = gray(16, 16, |y, x| ((y * 7 + x * 3) % 17) as f64 * 10.0);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&gray(8, 8, |_, _| 0.0), &gray(8, 8, |_, _| 0.0)).is_err());
    }

    #[test]
    fn fdbm_constant_image() {
        let a = gray(16, 16, |_, _| 90.0);
        assert!((fdbm(&a) - 1.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn cpbd_blank_and_step() {
        let blank = gray(64, 64, |_, _| 80.0);
        let r = cpbd_with(&blank, &CpbdParams::default());
        assert!(r.no_edges && r.score == 0.0);
        let step = gray(64, 64, |_, x| if x < 32 { 20.0 } else { 220.0 });
        let r = cpbd_with(&step, &CpbdParams::default());
        assert!(!r.no_edges);
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn wer_examples() {
        let r = ["bin", "blue", "at", "f", "two", "now"];
        assert_eq!(wer(&r, &r).unwrap(), 0.0);
        let h = ["bin", "blue", "at", "g", "two", "now"];
        assert!((wer(&r, &h).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(wer(&r[..4], &[] as &[&str]).unwrap(), 1.0);
        assert!(wer(&[] as &[&str], &r).is_err());
    }
}
