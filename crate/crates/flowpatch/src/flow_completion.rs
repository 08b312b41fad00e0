//! Completed adjacent-frame flows from corrupted inputs, guided by roughly
//! completed RGB.
//!
//! The guidance frames come from a zero-motion temporal fill: each hole
//! pixel copies the temporally nearest valid sample in a `±N` window. The
//! flow values over the pair's combined hole are then re-solved as a
//! guided diffusion with Dirichlet boundary from the trusted flow samples,
//! so that completed flows respect intensity edges of the guidance RGB.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::read_flo;
use crate::raster::{FlowField, Frame, Mask, Sequence, CHANNELS};
use crate::solve::{boundary_mean, gauss_seidel_fill, EdgeWeights};

/// Knobs for the guided diffusion solve.
#[derive(Debug, Clone, Copy)]
pub struct GuidedSolveConfig {
    /// Edge sensitivity on `[0,1]` guide values; 0 disables guidance.
    pub beta: f64,
    /// Stop once the largest per-pixel update falls below this.
    pub tol: f64,
    /// Sweep cap.
    pub max_iter: usize,
}

impl Default for GuidedSolveConfig {
    fn default() -> Self {
        GuidedSolveConfig {
            beta: 10.0,
            tol: 1e-4,
            max_iter: 2000,
        }
    }
}

impl GuidedSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be in (0, 1), got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Full configuration for [`build_completed_flows`].
#[derive(Debug, Clone, Copy)]
pub struct FlowCompletionConfig {
    pub solve: GuidedSolveConfig,
    /// Temporal search radius N of the guidance fill.
    pub temporal_radius: usize,
    /// Search radius (pixels) of the block-match fallback.
    pub block_radius: usize,
    /// Patch side (odd pixels) of the block-match fallback.
    pub block_patch: usize,
}

impl Default for FlowCompletionConfig {
    fn default() -> Self {
        FlowCompletionConfig {
            solve: GuidedSolveConfig::default(),
            temporal_radius: 5,
            block_radius: 8,
            block_patch: 7,
        }
    }
}

/// Completed bi-directional adjacent flows. `forward[t]` maps frame t to
/// t+1; `backward[t]` maps frame t+1 to t.
#[derive(Debug, Clone, Default)]
pub struct CompletedFlows {
    pub forward: Vec<FlowField>,
    pub backward: Vec<FlowField>,
}

/// Reconstructs a locally coherent frame for guidance: every hole pixel of
/// frame `t` copies the value at the same position from the temporally
/// nearest frame in `[t-n, t+n]` where that pixel is valid, ties toward
/// the earlier frame. Pixels valid nowhere in the window fall back to a
/// harmonic fill from the already-resolved surround.
pub fn local_temporal_fill(seq: &Sequence, t: usize, n: usize) -> Result<Frame> {
    if t >= seq.len() {
        return Err(Error::IndexOutOfRange {
            index: t,
            len: seq.len(),
        });
    }
    let (w, h) = (seq.width(), seq.height());
    let mut out = seq.frame(t).clone();
    let mut unresolved = Mask::empty(w, h);
    for (x, y) in seq.mask(t).iter_holes() {
        let mut copied = false;
        for d in 1..=n {
            if t >= d && !seq.mask(t - d).is_hole(x, y) {
                out.set_pixel(x, y, seq.frame(t - d).pixel(x, y));
                copied = true;
                break;
            }
            if t + d < seq.len() && !seq.mask(t + d).is_hole(x, y) {
                out.set_pixel(x, y, seq.frame(t + d).pixel(x, y));
                copied = true;
                break;
            }
        }
        if !copied {
            unresolved.set(x, y, true);
        }
    }
    if unresolved.is_empty() {
        return Ok(out);
    }
    if unresolved.count() == w * h {
        // No valid sample anywhere in the window; neutral gray is as good
        // as any guidance.
        return Ok(Frame::filled(w, h, 0.5));
    }
    let mut planes: Vec<Vec<f64>> = (0..CHANNELS)
        .map(|c| out.data().iter().skip(c).step_by(CHANNELS).map(|&v| v as f64).collect())
        .collect();
    {
        let mut refs: Vec<&mut [f64]> = planes.iter_mut().map(|p| p.as_mut_slice()).collect();
        let weights = EdgeWeights::uniform(w, h);
        gauss_seidel_fill(w, h, &unresolved, &weights, &mut refs, 1e-4, 2000)?;
    }
    for (x, y) in unresolved.iter_holes() {
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

/// Inpaints the hole of a flow field by guided diffusion.
///
/// Inside the hole each component solves the weighted-Laplace system with
/// Dirichlet boundary from the trusted flow outside; weights follow the
/// guide image. Outside the hole the flow is returned unchanged, and all
/// validity flags are set.
pub fn complete_flow(
    flow: &FlowField,
    hole: &Mask,
    guide: &Frame,
    cfg: &GuidedSolveConfig,
) -> Result<FlowField> {
    cfg.validate()?;
    let (w, h) = flow.dims();
    if hole.dims() != (w, h) {
        return Err(Error::geometry("complete_flow hole", (w, h), hole.dims()));
    }
    if guide.dims() != (w, h) {
        return Err(Error::geometry("complete_flow guide", (w, h), guide.dims()));
    }

    let mut u: Vec<f64> = flow.u.iter().map(|&v| v as f64).collect();
    let mut v: Vec<f64> = flow.v.iter().map(|&v| v as f64).collect();
    if !hole.is_empty() {
        let (mu, mv) = (boundary_mean(&u, hole), boundary_mean(&v, hole));
        for (x, y) in hole.iter_holes() {
            let i = y * w + x;
            u[i] = mu;
            v[i] = mv;
        }
        let weights = EdgeWeights::from_guide(guide, cfg.beta);
        gauss_seidel_fill(
            w,
            h,
            hole,
            &weights,
            &mut [&mut u, &mut v],
            cfg.tol,
            cfg.max_iter,
        )?;
    }

    let mut out = flow.clone();
    for (x, y) in hole.iter_holes() {
        let i = y * w + x;
        out.u[i] = u[i] as f32;
        out.v[i] = v[i] as f32;
    }
    out.valid.fill(1);
    Ok(out)
}

fn downsample_half(src: &Frame) -> Frame {
    let (w, h) = src.dims();
    let nw = (w / 2).max(1);
    let nh = (h / 2).max(1);
    Frame::from_fn(nw, nh, |x, y| {
        let mut acc = [0.0f32; CHANNELS];
        let mut n = 0.0f32;
        for dy in 0..2 {
            for dx in 0..2 {
                let sx = 2 * x + dx;
                let sy = 2 * y + dy;
                if sx < w && sy < h {
                    let p = src.pixel(sx, sy);
                    for c in 0..CHANNELS {
                        acc[c] += p[c];
                    }
                    n += 1.0;
                }
            }
        }
        [acc[0] / n, acc[1] / n, acc[2] / n]
    })
}

/// Mean absolute difference between the patch at `(px,py)` in `a` and the
/// patch at `(px+du, py+dv)` in `b`, over taps where both windows are
/// in-raster. Infinite when no tap overlaps.
fn sad_cost(a: &Frame, b: &Frame, px: i64, py: i64, du: i64, dv: i64, r: i64) -> f64 {
    let (w, h) = a.dims();
    let (w, h) = (w as i64, h as i64);
    let mut sum = 0.0f64;
    let mut count = 0u32;
    for oy in -r..=r {
        for ox in -r..=r {
            let ax = px + ox;
            let ay = py + oy;
            let bx = ax + du;
            let by = ay + dv;
            if ax < 0 || ay < 0 || ax >= w || ay >= h || bx < 0 || by < 0 || bx >= w || by >= h {
                continue;
            }
            let pa = a.pixel(ax as usize, ay as usize);
            let pb = b.pixel(bx as usize, by as usize);
            for c in 0..CHANNELS {
                sum += (pa[c] - pb[c]).abs() as f64;
            }
            count += 1;
        }
    }
    if count == 0 {
        f64::INFINITY
    } else {
        sum / (count as f64 * CHANNELS as f64)
    }
}

/// Searches candidate displacements around `init` within `span`, keeping
/// the total displacement inside `±limit`. Ties break toward the smaller
/// displacement magnitude, then lexicographic (u, v).
fn best_displacement(
    a: &Frame,
    b: &Frame,
    px: i64,
    py: i64,
    init: (i64, i64),
    span: i64,
    limit: i64,
    patch_r: i64,
) -> (i64, i64) {
    let mut candidates: Vec<(i64, i64)> = Vec::with_capacity(((2 * span + 1) * (2 * span + 1)) as usize);
    for dv in -span..=span {
        for du in -span..=span {
            let tu = init.0 + du;
            let tv = init.1 + dv;
            if tu.abs() <= limit && tv.abs() <= limit {
                candidates.push((tu, tv));
            }
        }
    }
    candidates.sort_by_key(|&(u, v)| (u * u + v * v, u, v));
    candidates.dedup();
    let mut best = (0i64, 0i64);
    let mut best_cost = f64::INFINITY;
    for &(tu, tv) in &candidates {
        let cost = sad_cost(a, b, px, py, tu, tv, patch_r);
        if cost < best_cost {
            best_cost = cost;
            best = (tu, tv);
        }
    }
    best
}

/// Per-pixel integer block matching, coarse-to-fine over a 3-level
/// pyramid. A fallback flow source when no external flows are supplied.
pub fn estimate_flow_blockmatch(
    a: &Frame,
    b: &Frame,
    radius: usize,
    patch: usize,
) -> Result<FlowField> {
    if patch % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "patch side must be odd, got {patch}"
        )));
    }
    if radius < 1 {
        return Err(Error::InvalidParameter("radius must be >= 1".into()));
    }
    let (w, h) = a.dims();
    if b.dims() != (w, h) {
        return Err(Error::geometry("estimate_flow_blockmatch", (w, h), b.dims()));
    }

    let patch_r = (patch / 2) as i64;
    let mut pyr_a = vec![a.clone()];
    let mut pyr_b = vec![b.clone()];
    for _ in 1..3 {
        let next = downsample_half(pyr_a.last().unwrap());
        if next.width() < patch || next.height() < patch {
            break;
        }
        pyr_b.push(downsample_half(pyr_b.last().unwrap()));
        pyr_a.push(next);
    }

    let levels = pyr_a.len();
    let mut flow_u: Vec<i64> = Vec::new();
    let mut flow_v: Vec<i64> = Vec::new();
    for level in (0..levels).rev() {
        let la = &pyr_a[level];
        let lb = &pyr_b[level];
        let (lw, lh) = la.dims();
        let limit = (((radius as i64) + (1 << level) - 1) >> level).max(1);
        let coarsest = level == levels - 1;
        let span = if coarsest { limit } else { 2 };
        let mut new_u = vec![0i64; lw * lh];
        let mut new_v = vec![0i64; lw * lh];
        for y in 0..lh {
            for x in 0..lw {
                let init = if coarsest {
                    (0, 0)
                } else {
                    let cw = pyr_a[level + 1].width();
                    let ci = (y / 2).min(pyr_a[level + 1].height() - 1) * cw + (x / 2).min(cw - 1);
                    (
                        (flow_u[ci] * 2).clamp(-limit, limit),
                        (flow_v[ci] * 2).clamp(-limit, limit),
                    )
                };
                let best = best_displacement(
                    la,
                    lb,
                    x as i64,
                    y as i64,
                    init,
                    span,
                    limit,
                    patch_r,
                );
                new_u[y * lw + x] = best.0;
                new_v[y * lw + x] = best.1;
            }
        }
        flow_u = new_u;
        flow_v = new_v;
    }

    let mut out = FlowField::zero(w, h);
    for i in 0..w * h {
        out.u[i] = flow_u[i] as f32;
        out.v[i] = flow_v[i] as f32;
    }
    Ok(out)
}

fn external_pair(dir: &Path, t: usize, dims: (usize, usize)) -> Result<(FlowField, FlowField)> {
    let mut pair = Vec::with_capacity(2);
    for suffix in ["fwd", "bwd"] {
        let path = dir.join(format!("{t}_{suffix}.flo"));
        if !path.exists() {
            return Err(Error::MissingFlow { path });
        }
        let flow = read_flo(&path)?;
        if flow.dims() != dims {
            return Err(Error::geometry(
                format!("external flow {}", path.display()),
                dims,
                flow.dims(),
            ));
        }
        pair.push(flow);
    }
    let bwd = pair.pop().unwrap();
    let fwd = pair.pop().unwrap();
    Ok((fwd, bwd))
}

/// Builds completed forward and backward flows for every adjacent pair.
///
/// The completion hole of a pair is the union of both frames' masks: flow
/// values computed within or into holes are untrusted. External flows, if
/// given, are read as `<t>_fwd.flo` / `<t>_bwd.flo` per 0-based pair index;
/// otherwise block matching on the guidance frames supplies the input.
pub fn build_completed_flows(
    seq: &Sequence,
    cfg: &FlowCompletionConfig,
    external_flows: Option<&Path>,
) -> Result<CompletedFlows> {
    cfg.solve.validate()?;
    let t_len = seq.len();
    if t_len < 2 {
        return Ok(CompletedFlows::default());
    }
    let guides: Vec<Frame> = (0..t_len)
        .map(|t| local_temporal_fill(seq, t, cfg.temporal_radius))
        .collect::<Result<_>>()?;

    let pairs: Vec<(FlowField, FlowField)> = (0..t_len - 1)
        .into_par_iter()
        .map(|t| {
            let hole = seq.mask(t).union(seq.mask(t + 1));
            let (raw_fwd, raw_bwd) = match external_flows {
                Some(dir) => external_pair(dir, t, (seq.width(), seq.height()))?,
                None => (
                    estimate_flow_blockmatch(
                        &guides[t],
                        &guides[t + 1],
                        cfg.block_radius,
                        cfg.block_patch,
                    )?,
                    estimate_flow_blockmatch(
                        &guides[t + 1],
                        &guides[t],
                        cfg.block_radius,
                        cfg.block_patch,
                    )?,
                ),
            };
            let fwd = complete_flow(&raw_fwd, &hole, &guides[t], &cfg.solve)?;
            let bwd = complete_flow(&raw_bwd, &hole, &guides[t + 1], &cfg.solve)?;
            Ok((fwd, bwd))
        })
        .collect::<Result<_>>()?;

    let (forward, backward) = pairs.into_iter().unzip();
    Ok(CompletedFlows { forward, backward })
}
