//! Warping and mask-geometry kernels: backward warping with bilinear
//! sampling, mask warping with conservative validity, flow composition
//! for long-range flows, and morphological dilation.
//!
//! Out-of-bounds policy: a sample whose bilinear footprint leaves the
//! raster is invalid, never clamped to the edge. Taps with zero weight
//! (exact integer sample positions) are not part of the footprint, so
//! warping with zero flow is the exact identity.

use crate::error::{Error, Result};
use crate::raster::{FlowField, Frame, Mask, CHANNELS};

/// A backward-warped frame plus the per-pixel in-bounds flags.
///
/// Wherever `inbounds` is 0 the image samples are defined (zero-filled)
/// but carry no meaning and must not be consumed as valid data.
#[derive(Debug, Clone)]
pub struct WarpResult {
    pub image: Frame,
    pub inbounds: Mask,
}

/// Bilinear warp of a mask treated as a real field in `[0, 1]`.
///
/// Out-of-bounds taps and invalid flow pixels count as fully masked
/// (coverage 1). Any nonzero coverage means the footprint touched a hole.
#[derive(Debug, Clone)]
pub struct WarpedMask {
    width: usize,
    height: usize,
    coverage: Vec<f32>,
}

impl WarpedMask {
    pub fn coverage(&self) -> &[f32] {
        &self.coverage
    }

    #[inline]
    pub fn coverage_at(&self, x: usize, y: usize) -> f32 {
        self.coverage[y * self.width + x]
    }

    /// Conservative validity flags: 1 exactly where the warped footprint
    /// touched no hole pixel at all.
    pub fn validity(&self) -> Mask {
        Mask::from_fn(self.width, self.height, |x, y| {
            self.coverage[y * self.width + x] == 0.0
        })
    }
}

#[inline]
fn in_sample_range(sx: f32, sy: f32, w: usize, h: usize) -> bool {
    sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f32 && sy <= (h - 1) as f32
}

/// Samples `src` bilinearly at `(sx, sy)`, assuming the position is within
/// `[0, w-1] x [0, h-1]`. Zero-weight taps never touch out-of-range rows
/// or columns with nonzero weight, so missing taps read as 0 harmlessly.
#[inline]
fn bilinear_rgb(src: &Frame, sx: f32, sy: f32) -> [f32; CHANNELS] {
    let (w, h) = src.dims();
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let fx = sx - x0 as f32;
    let fy = sy - y0 as f32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);

    let p00 = src.pixel(x0, y0);
    let p10 = src.pixel(x1, y0);
    let p01 = src.pixel(x0, y1);
    let p11 = src.pixel(x1, y1);

    let mut out = [0.0f32; CHANNELS];
    for c in 0..CHANNELS {
        let top = p00[c] * (1.0 - fx) + p10[c] * fx;
        let bot = p01[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Backward-warps `src` by `flow`: output(p) = src(p + flow(p)).
///
/// `inbounds(p) = 1` iff the flow is valid at `p` and every contributing
/// bilinear tap lies inside the raster.
pub fn backward_warp(src: &Frame, flow: &FlowField) -> Result<WarpResult> {
    let (w, h) = src.dims();
    if flow.dims() != (w, h) {
        return Err(Error::geometry("backward_warp", (w, h), flow.dims()));
    }
    let mut image = Frame::filled(w, h, 0.0);
    let mut inbounds = Mask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if !flow.is_valid(x, y) {
                continue;
            }
            let (u, v) = flow.get(x, y);
            let sx = x as f32 + u;
            let sy = y as f32 + v;
            if !in_sample_range(sx, sy, w, h) {
                continue;
            }
            image.set_pixel(x, y, bilinear_rgb(src, sx, sy));
            inbounds.set(x, y, true);
        }
    }
    Ok(WarpResult { image, inbounds })
}

/// Warps a reference mask by `flow`, treating it as a real field.
///
/// Out-of-bounds samples and invalid flow pixels return coverage 1.
pub fn warp_mask(mask: &Mask, flow: &FlowField) -> Result<WarpedMask> {
    let (w, h) = mask.dims();
    if flow.dims() != (w, h) {
        return Err(Error::geometry("warp_mask", (w, h), flow.dims()));
    }
    let mut coverage = vec![1.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            if !flow.is_valid(x, y) {
                continue;
            }
            let (u, v) = flow.get(x, y);
            let sx = x as f32 + u;
            let sy = y as f32 + v;
            if !in_sample_range(sx, sy, w, h) {
                continue;
            }
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let fx = sx - x0 as f32;
            let fy = sy - y0 as f32;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let m00 = mask.get(x0, y0) as f32;
            let m10 = mask.get(x1, y0) as f32;
            let m01 = mask.get(x0, y1) as f32;
            let m11 = mask.get(x1, y1) as f32;
            let top = m00 * (1.0 - fx) + m10 * fx;
            let bot = m01 * (1.0 - fx) + m11 * fx;
            coverage[y * w + x] = top * (1.0 - fy) + bot * fy;
        }
    }
    Ok(WarpedMask {
        width: w,
        height: h,
        coverage,
    })
}

/// Samples a flow field bilinearly at `(sx, sy)`.
///
/// Returns `None` when the position leaves the raster or any contributing
/// tap is invalid.
fn sample_flow(flow: &FlowField, sx: f32, sy: f32) -> Option<(f32, f32)> {
    let (w, h) = flow.dims();
    if !in_sample_range(sx, sy, w, h) {
        return None;
    }
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let fx = sx - x0 as f32;
    let fy = sy - y0 as f32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);

    let need_x1 = fx > 0.0;
    let need_y1 = fy > 0.0;
    if !flow.is_valid(x0, y0)
        || (need_x1 && !flow.is_valid(x1, y0))
        || (need_y1 && !flow.is_valid(x0, y1))
        || (need_x1 && need_y1 && !flow.is_valid(x1, y1))
    {
        return None;
    }

    let (u00, v00) = flow.get(x0, y0);
    let (u10, v10) = flow.get(x1, y0);
    let (u01, v01) = flow.get(x0, y1);
    let (u11, v11) = flow.get(x1, y1);
    let u = (u00 * (1.0 - fx) + u10 * fx) * (1.0 - fy) + (u01 * (1.0 - fx) + u11 * fx) * fy;
    let v = (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy;
    Some((u, v))
}

/// Chains two flows: `f_ac(p) = f_ab(p) + f_bc(p + f_ab(p))`.
///
/// A pixel stays valid only when `f_ab` is valid there and the chained
/// sample point lands in-bounds with all contributing taps valid.
pub fn compose_flows(f_ab: &FlowField, f_bc: &FlowField) -> Result<FlowField> {
    let (w, h) = f_ab.dims();
    if f_bc.dims() != (w, h) {
        return Err(Error::geometry("compose_flows", (w, h), f_bc.dims()));
    }
    let mut out = FlowField::zero(w, h);
    for y in 0..h {
        for x in 0..w {
            if !f_ab.is_valid(x, y) {
                out.set_valid(x, y, false);
                continue;
            }
            let (u1, v1) = f_ab.get(x, y);
            match sample_flow(f_bc, x as f32 + u1, y as f32 + v1) {
                Some((u2, v2)) => out.set(x, y, u1 + u2, v1 + v2),
                None => out.set_valid(x, y, false),
            }
        }
    }
    Ok(out)
}

/// Morphological dilation with a k×k square structuring element, clipped
/// at the raster borders. `k` must be odd and positive.
pub fn dilate(mask: &Mask, k: usize) -> Result<Mask> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "dilation factor must be odd and positive, got {k}"
        )));
    }
    let (w, h) = mask.dims();
    let r = k / 2;
    // Separable square element: horizontal run, then vertical.
    let mut horiz = Mask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            let hit = (lo..=hi).any(|xx| mask.is_hole(xx, y));
            horiz.set(x, y, hit);
        }
    }
    let mut out = Mask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let lo = y.saturating_sub(r);
            let hi = (y + r).min(h - 1);
            let hit = (lo..=hi).any(|yy| horiz.is_hole(x, yy));
            out.set(x, y, hit);
        }
    }
    Ok(out)
}
