//! Quantitative evaluation: PSNR, SSIM, flow end-point error, and
//! temporal-profile extraction.
//!
//! PSNR and SSIM assume `[0, 1]` dynamic range. Both accept full frames;
//! PSNR and EPE optionally restrict to a region mask (1 = included), the
//! more diagnostic hole-only convention.

use std::io::Write;

use crate::error::{Error, Result};
use crate::raster::{FlowField, Frame, Mask, CHANNELS};

/// PSNR cap for identical inputs, keeping aggregation finite.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_geometry(a: &Frame, b: &Frame, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::geometry(what, a.dims(), b.dims()));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over the region (default full frame),
/// channels pooled. Identical inputs return [`PSNR_CAP`].
pub fn psnr(a: &Frame, b: &Frame, region: Option<&Mask>) -> Result<f64> {
    check_geometry(a, b, "psnr")?;
    let (w, h) = a.dims();
    let mut se = 0.0f64;
    let mut n = 0usize;
    match region {
        Some(mask) => {
            if mask.dims() != (w, h) {
                return Err(Error::geometry("psnr region", (w, h), mask.dims()));
            }
            for (x, y) in mask.iter_holes() {
                let pa = a.pixel(x, y);
                let pb = b.pixel(x, y);
                for c in 0..CHANNELS {
                    let d = pa[c] as f64 - pb[c] as f64;
                    se += d * d;
                }
                n += 1;
            }
        }
        None => {
            for (&va, &vb) in a.data().iter().zip(b.data()) {
                let d = va as f64 - vb as f64;
                se += d * d;
            }
            n = w * h;
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    let mse = se / (n * CHANNELS) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0f64; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode convolution with the SSIM Gaussian kernel.
/// Output dims: (w - 10) x (h - 10).
fn conv_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0f64; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += plane[y * w + x + k] * kv;
            }
            rows[y * ow + x] = s;
        }
    }
    let mut out = vec![0.0f64; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += rows[(y + k) * ow + x] * kv;
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1.0; per-channel then averaged.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    check_geometry(a, b, "ssim")?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::RasterTooSmall {
            w,
            h,
            context: format!("ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}"),
        });
    }
    let kernel = gaussian_kernel();
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);

    let mut total = 0.0f64;
    for c in 0..CHANNELS {
        let pa: Vec<f64> = a.data().iter().skip(c).step_by(CHANNELS).map(|&v| v as f64).collect();
        let pb: Vec<f64> = b.data().iter().skip(c).step_by(CHANNELS).map(|&v| v as f64).collect();
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();

        let mu_a = conv_valid(&pa, w, h, &kernel);
        let mu_b = conv_valid(&pb, w, h, &kernel);
        let m_aa = conv_valid(&aa, w, h, &kernel);
        let m_bb = conv_valid(&bb, w, h, &kernel);
        let m_ab = conv_valid(&ab, w, h, &kernel);

        let mut sum = 0.0f64;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = m_aa[i] - ma * ma;
            let var_b = m_bb[i] - mb * mb;
            let cov = m_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / CHANNELS as f64)
}

/// Mean end-point error over the region (default all pixels).
pub fn flow_epe(f: &FlowField, reference: &FlowField, region: Option<&Mask>) -> Result<f64> {
    let (w, h) = f.dims();
    if reference.dims() != (w, h) {
        return Err(Error::geometry("flow_epe", (w, h), reference.dims()));
    }
    let mut sum = 0.0f64;
    let mut n = 0usize;
    match region {
        Some(mask) => {
            if mask.dims() != (w, h) {
                return Err(Error::geometry("flow_epe region", (w, h), mask.dims()));
            }
            for (x, y) in mask.iter_holes() {
                let (u1, v1) = f.get(x, y);
                let (u2, v2) = reference.get(x, y);
                let (du, dv) = ((u1 - u2) as f64, (v1 - v2) as f64);
                sum += (du * du + dv * dv).sqrt();
                n += 1;
            }
        }
        None => {
            for i in 0..w * h {
                let du = (f.u[i] - reference.u[i]) as f64;
                let dv = (f.v[i] - reference.v[i]) as f64;
                sum += (du * du + dv * dv).sqrt();
            }
            n = w * h;
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(sum / n as f64)
}

/// Stacks one scan line across all frames: output row t is frame t's pixel
/// row `row`. The result is a T×W frame.
pub fn temporal_profile(frames: &[Frame], row: usize) -> Result<Frame> {
    if frames.is_empty() {
        return Err(Error::InvalidParameter("no frames for profile".into()));
    }
    let (w, h) = frames[0].dims();
    for (i, f) in frames.iter().enumerate() {
        if f.dims() != (w, h) {
            return Err(Error::geometry(format!("profile frame {i}"), (w, h), f.dims()));
        }
    }
    if row >= h {
        return Err(Error::IndexOutOfRange { index: row, len: h });
    }
    Ok(Frame::from_fn(w, frames.len(), |x, t| {
        frames[t].pixel(x, row)
    }))
}

/// One row of a metric report.
#[derive(Debug, Clone, Copy)]
pub struct MetricRow {
    pub frame: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Writes the comma-separated metric table with a mean footer row.
pub fn write_metric_table<W: Write>(mut w: W, rows: &[MetricRow]) -> std::io::Result<()> {
    writeln!(w, "frame,psnr,ssim")?;
    for r in rows {
        writeln!(w, "{},{:.4},{:.6}", r.frame, r.psnr, r.ssim)?;
    }
    let n = rows.len().max(1) as f64;
    let mp = rows.iter().map(|r| r.psnr).sum::<f64>() / n;
    let ms = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
    writeln!(w, "mean,{mp:.4},{ms:.6}")
}

/// Machine-readable key=value summary of a metric table.
pub fn metric_summary(rows: &[MetricRow]) -> String {
    let n = rows.len().max(1) as f64;
    let mp = rows.iter().map(|r| r.psnr).sum::<f64>() / n;
    let ms = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
    format!("frames={}\nmean_psnr={mp:.4}\nmean_ssim={ms:.6}", rows.len())
}
