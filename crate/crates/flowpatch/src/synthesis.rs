//! Synthesis of never-visible residue: pixels that survive propagation in
//! the remaining masks are filled per channel with the discrete harmonic
//! extension of the surrounding content. The module boundary is a plain
//! function so a learned filler can be swapped in behind it.

use crate::error::{Error, Result};
use crate::raster::{Frame, Mask, CHANNELS};
use crate::solve::{gauss_seidel_fill, EdgeWeights};

/// Replaces `remaining` pixels with the harmonic extension of the
/// surrounding valid or filled pixels; everything else is untouched.
pub fn diffuse_fill(frame: &Frame, remaining: &Mask, tol: f64, max_iter: usize) -> Result<Frame> {
    let (w, h) = frame.dims();
    if remaining.dims() != (w, h) {
        return Err(Error::geometry("diffuse_fill", (w, h), remaining.dims()));
    }
    if remaining.is_empty() {
        return Ok(frame.clone());
    }
    if remaining.count() == w * h {
        return Err(Error::UnsolvableFill);
    }

    let mut planes: Vec<Vec<f64>> = (0..CHANNELS)
        .map(|c| {
            frame
                .data()
                .iter()
                .skip(c)
                .step_by(CHANNELS)
                .map(|&v| v as f64)
                .collect()
        })
        .collect();
    {
        let weights = EdgeWeights::uniform(w, h);
        let mut refs: Vec<&mut [f64]> = planes.iter_mut().map(|p| p.as_mut_slice()).collect();
        gauss_seidel_fill(w, h, remaining, &weights, &mut refs, tol, max_iter)?;
    }

    let mut out = frame.clone();
    for (x, y) in remaining.iter_holes() {
        let i = y * w + x;
        out.set_pixel(
            x,
            y,
            [
                planes[0][i].clamp(0.0, 1.0) as f32,
                planes[1][i].clamp(0.0, 1.0) as f32,
                planes[2][i].clamp(0.0, 1.0) as f32,
            ],
        );
    }
    Ok(out)
}
