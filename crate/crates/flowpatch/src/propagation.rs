//! Iterative flow-guided pixel propagation with overfill.
//!
//! Each target frame is filled from reference frames in nearest-first
//! order. A reference contributes only pixels whose warped footprint is
//! fully in-bounds and touches no reference hole. Hole pixels are written
//! first-writer-wins; the band between the hole and its dilation is
//! rewritten on every iteration so the error fit always measures the
//! current reference against known-valid original pixels.
//!
//! Targets are filled independently from the original corrupted inputs;
//! inpainted content is never chained target-to-target, so per-step errors
//! cannot accumulate across frames.

use rayon::prelude::*;

use crate::compensation::{CompensationOutcome, Compensator, ErrorMap, PhotometricModel};
use crate::error::{Error, Result};
use crate::flow_completion::CompletedFlows;
use crate::geometry::{backward_warp, compose_flows, dilate, warp_mask};
use crate::raster::{FlowField, Frame, Mask, Sequence};

/// Per-target propagation bundle: the filled and overfilled frames plus
/// every bookkeeping mask.
#[derive(Debug, Clone)]
pub struct PropagationState {
    /// Filled frame x̃: input frame with propagated hole pixels.
    pub filled: Frame,
    /// Overfilled frame x̃ᵈ: propagated over the dilated hole, band included.
    pub overfilled: Frame,
    /// Original hole m (fixed for the whole target).
    pub hole: Mask,
    /// Dilated hole mᵈ (fixed; computed once from the original hole).
    pub dilated_hole: Mask,
    /// Propagation mask mᵖ: hole pixels filled so far, cumulative.
    pub prop_mask: Mask,
    /// Remaining mask mʳ = m − mᵖ.
    pub remaining: Mask,
    /// Error mask mᵉ: band pixels written by the current iteration.
    pub err_mask: Mask,
    /// Hole pixels written by the current iteration.
    pub iter_hole: Mask,
    pub(crate) undo_filled: Vec<(usize, [f32; 3])>,
    pub(crate) undo_overfilled: Vec<(usize, [f32; 3])>,
}

impl PropagationState {
    /// Initializes the state for one target frame, dilating its hole by a
    /// k×k square element.
    pub fn new(frame: &Frame, mask: &Mask, dilation: usize) -> Result<PropagationState> {
        if !mask.same_geometry_frame(frame) {
            return Err(Error::geometry(
                "propagation state",
                frame.dims(),
                mask.dims(),
            ));
        }
        let dilated_hole = dilate(mask, dilation)?;
        let (w, h) = frame.dims();
        Ok(PropagationState {
            filled: frame.clone(),
            overfilled: frame.clone(),
            hole: mask.clone(),
            dilated_hole,
            prop_mask: Mask::empty(w, h),
            remaining: mask.clone(),
            err_mask: Mask::empty(w, h),
            iter_hole: Mask::empty(w, h),
            undo_filled: Vec::new(),
            undo_overfilled: Vec::new(),
        })
    }

    fn begin_iteration(&mut self) {
        let (w, h) = self.filled.dims();
        self.err_mask = Mask::empty(w, h);
        self.iter_hole = Mask::empty(w, h);
        self.undo_filled.clear();
        self.undo_overfilled.clear();
    }

    /// Accepts the current iteration's writes as-is, dropping undo data.
    pub(crate) fn commit_iteration(&mut self) {
        self.undo_filled.clear();
        self.undo_overfilled.clear();
    }

    /// Reverts the current iteration: hole pixels return to remaining and
    /// band writes are erased.
    pub(crate) fn revert_iteration(&mut self) {
        let w = self.filled.width();
        for &(i, px) in &self.undo_filled {
            let (x, y) = (i % w, i / w);
            self.filled.set_pixel(x, y, px);
        }
        for &(i, px) in &self.undo_overfilled {
            let (x, y) = (i % w, i / w);
            self.overfilled.set_pixel(x, y, px);
        }
        self.undo_filled.clear();
        self.undo_overfilled.clear();
        self.remaining = self.remaining.union(&self.iter_hole);
        self.prop_mask = self.prop_mask.subtract(&self.iter_hole);
        let (fw, fh) = self.filled.dims();
        self.err_mask = Mask::empty(fw, fh);
        self.iter_hole = Mask::empty(fw, fh);
    }
}

/// Reference order for a target: nearest first, alternating sides,
/// starting with the earlier neighbor.
pub fn plan_references(t: usize, len: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(len.saturating_sub(1));
    for d in 1..len {
        if t >= d {
            order.push(t - d);
        }
        if t + d < len {
            order.push(t + d);
        }
    }
    order
}

/// Propagates valid reference pixels into the target state for one
/// reference.
///
/// Validity requires the warped footprint fully in-bounds and free of
/// reference-hole contamination. Remaining hole pixels are written once
/// (first writer wins); band pixels are rewritten from the current
/// reference and recorded in `err_mask` for the error fit.
pub fn propagate_once(
    state: &mut PropagationState,
    ref_frame: &Frame,
    ref_mask: &Mask,
    flow: &FlowField,
) -> Result<()> {
    let (w, h) = state.filled.dims();
    if ref_frame.dims() != (w, h) {
        return Err(Error::geometry(
            "propagate_once reference",
            (w, h),
            ref_frame.dims(),
        ));
    }
    if !ref_mask.same_geometry_frame(ref_frame) {
        return Err(Error::geometry(
            "propagate_once reference mask",
            (w, h),
            ref_mask.dims(),
        ));
    }

    state.begin_iteration();
    let warp = backward_warp(ref_frame, flow)?;
    let coverage = warp_mask(ref_mask, flow)?;

    for y in 0..h {
        for x in 0..w {
            let valid = warp.inbounds.get(x, y) == 1 && coverage.coverage_at(x, y) == 0.0;
            if !valid {
                continue;
            }
            let i = y * w + x;
            if state.remaining.is_hole(x, y) {
                state.undo_filled.push((i, state.filled.pixel(x, y)));
                state.undo_overfilled.push((i, state.overfilled.pixel(x, y)));
                let p = warp.image.pixel(x, y);
                state.filled.set_pixel(x, y, p);
                state.overfilled.set_pixel(x, y, p);
                state.iter_hole.set(x, y, true);
                state.prop_mask.set(x, y, true);
                state.remaining.set(x, y, false);
            } else if state.dilated_hole.is_hole(x, y) && !state.hole.is_hole(x, y) {
                state.undo_overfilled.push((i, state.overfilled.pixel(x, y)));
                state.overfilled.set_pixel(x, y, warp.image.pixel(x, y));
                state.err_mask.set(x, y, true);
            }
        }
    }
    Ok(())
}

/// Propagation knobs.
#[derive(Debug, Clone, Copy)]
pub struct PropagationConfig {
    /// Square dilation factor producing the overfill band.
    pub dilation: usize,
    /// Record per-iteration diagnostics (error maps, mask snapshots).
    pub record_diagnostics: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            dilation: 17,
            record_diagnostics: false,
        }
    }
}

/// Snapshot of one propagate-compensate iteration, for diagnostics dumps.
#[derive(Debug, Clone)]
pub struct IterationDiag {
    pub target: usize,
    pub reference: usize,
    pub error_map: ErrorMap,
    pub err_mask: Mask,
    pub prop_mask: Mask,
    pub remaining: Mask,
    pub accepted: bool,
    pub model: Option<PhotometricModel>,
}

/// Result of [`run_propagation`]: completed frames, per-frame remaining
/// masks, and optional per-target diagnostics.
#[derive(Debug)]
pub struct PropagationOutcome {
    pub frames: Vec<Frame>,
    pub remaining: Vec<Mask>,
    pub diagnostics: Vec<Vec<IterationDiag>>,
}

fn propagate_target(
    seq: &Sequence,
    flows: &CompletedFlows,
    t: usize,
    compensator: Option<&Compensator>,
    cfg: &PropagationConfig,
) -> Result<(Frame, Mask, Vec<IterationDiag>)> {
    let (w, h) = (seq.width(), seq.height());
    if seq.mask(t).is_empty() {
        return Ok((seq.frame(t).clone(), Mask::empty(w, h), Vec::new()));
    }
    let mut state = PropagationState::new(seq.frame(t), seq.mask(t), cfg.dilation)?;
    let mut diags = Vec::new();
    let mut acc_left: Option<FlowField> = None;
    let mut acc_right: Option<FlowField> = None;

    for j in plan_references(t, seq.len()) {
        let flow = if j < t {
            let next = match acc_left.take() {
                None => flows.backward[t - 1].clone(),
                Some(acc) => compose_flows(&acc, &flows.backward[j])?,
            };
            acc_left = Some(next);
            acc_left.as_ref().unwrap()
        } else {
            let next = match acc_right.take() {
                None => flows.forward[t].clone(),
                Some(acc) => compose_flows(&acc, &flows.forward[j - 1])?,
            };
            acc_right = Some(next);
            acc_right.as_ref().unwrap()
        };

        propagate_once(&mut state, seq.frame(j), seq.mask(j), flow)?;
        let outcome: Option<CompensationOutcome> = match compensator {
            Some(c) => Some(c.run(&mut state, seq.frame(t))),
            None => {
                state.commit_iteration();
                None
            }
        };
        if cfg.record_diagnostics {
            diags.push(IterationDiag {
                target: t,
                reference: j,
                error_map: outcome
                    .as_ref()
                    .map(|o| o.error_map.clone())
                    .unwrap_or_else(|| ErrorMap::zero(w, h)),
                err_mask: state.err_mask.clone(),
                prop_mask: state.prop_mask.clone(),
                remaining: state.remaining.clone(),
                accepted: outcome.as_ref().map(|o| o.accepted).unwrap_or(true),
                model: outcome.map(|o| o.model),
            });
        }
        if state.remaining.is_empty() {
            break;
        }
    }

    // Pixels outside the original hole always equal the input exactly.
    let mut out = seq.frame(t).clone();
    for (x, y) in state.hole.iter_holes() {
        out.set_pixel(x, y, state.overfilled.pixel(x, y));
    }
    Ok((out, state.remaining, diags))
}

/// Runs propagate-compensate over every target frame.
///
/// Targets are independent given the read-only flow set and are processed
/// in parallel; within one target, reference iterations are a sequential
/// fold. Pass `None` as compensator to propagate uncorrected.
pub fn run_propagation(
    seq: &Sequence,
    flows: &CompletedFlows,
    compensator: Option<&Compensator>,
    cfg: &PropagationConfig,
) -> Result<PropagationOutcome> {
    if seq.len() >= 2
        && (flows.forward.len() != seq.len() - 1 || flows.backward.len() != seq.len() - 1)
    {
        return Err(Error::InvalidParameter(format!(
            "expected {} flow pairs for {} frames, got {} fwd / {} bwd",
            seq.len() - 1,
            seq.len(),
            flows.forward.len(),
            flows.backward.len()
        )));
    }
    let results: Vec<(Frame, Mask, Vec<IterationDiag>)> = (0..seq.len())
        .into_par_iter()
        .map(|t| propagate_target(seq, flows, t, compensator, cfg))
        .collect::<Result<_>>()?;

    let mut frames = Vec::with_capacity(results.len());
    let mut remaining = Vec::with_capacity(results.len());
    let mut diagnostics = Vec::with_capacity(results.len());
    for (f, r, d) in results {
        frames.push(f);
        remaining.push(r);
        diagnostics.push(d);
    }
    Ok(PropagationOutcome {
        frames,
        remaining,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_order_alternates_nearest_first() {
        assert_eq!(plan_references(2, 5), vec![1, 3, 0, 4]);
        assert_eq!(plan_references(0, 4), vec![1, 2, 3]);
        assert_eq!(plan_references(3, 4), vec![2, 1, 0]);
        assert_eq!(plan_references(0, 1), Vec::<usize>::new());
    }

    #[test]
    fn plan_covers_all_other_indices_once() {
        for len in 1..9 {
            for t in 0..len {
                let mut order = plan_references(t, len);
                order.sort_unstable();
                let expect: Vec<usize> = (0..len).filter(|&j| j != t).collect();
                assert_eq!(order, expect);
            }
        }
    }

    fn texture(w: usize, h: usize, seed: u64) -> Frame {
        Frame::from_fn(w, h, |x, y| {
            let mut v = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((x * 31 + y * 101) as u64);
            v ^= v >> 33;
            v = v.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
            v ^= v >> 33;
            [
                (v & 0xFF) as f32 / 255.0,
                ((v >> 8) & 0xFF) as f32 / 255.0,
                ((v >> 16) & 0xFF) as f32 / 255.0,
            ]
        })
    }

    #[test]
    fn fully_masked_reference_changes_nothing() {
        let (w, h) = (16, 16);
        let frame = texture(w, h, 1);
        let mask = Mask::from_fn(w, h, |x, y| (6..10).contains(&x) && (6..10).contains(&y));
        let mut state = PropagationState::new(&frame, &mask, 5).unwrap();
        let before = state.clone();
        propagate_once(&mut state, &texture(w, h, 2), &Mask::full(w, h), &FlowField::zero(w, h))
            .unwrap();
        assert_eq!(state.filled.data(), before.filled.data());
        assert_eq!(state.overfilled.data(), before.overfilled.data());
        assert_eq!(state.remaining, before.remaining);
        assert!(state.err_mask.is_empty());
    }

    #[test]
    fn exact_flow_fills_hole_from_clean_reference() {
        let (w, h) = (24, 24);
        let big = texture(w + 4, h + 4, 9);
        // target is big shifted by (0,0); reference shows the same scene
        // shifted by 1px, so flow (1,0) aligns it exactly
        let truth = Frame::from_fn(w, h, |x, y| big.pixel(x, y));
        let reference = Frame::from_fn(w, h, |x, y| big.pixel(x + 1, y));
        let mask = Mask::from_fn(w, h, |x, y| (8..16).contains(&x) && (8..16).contains(&y));
        let mut corrupted = truth.clone();
        for (x, y) in mask.iter_holes() {
            corrupted.set_pixel(x, y, [0.0; 3]);
        }
        let mut state = PropagationState::new(&corrupted, &mask, 5).unwrap();
        let flow = FlowField::constant(w, h, -1.0, 0.0);
        propagate_once(&mut state, &reference, &Mask::empty(w, h), &flow).unwrap();
        assert!(state.remaining.is_empty());
        for (x, y) in mask.iter_holes() {
            let got = state.filled.pixel(x, y);
            let want = truth.pixel(x, y);
            for c in 0..3 {
                assert_eq!(got[c], want[c], "at {x},{y},{c}");
            }
        }
    }

    #[test]
    fn first_writer_wins_across_references() {
        let (w, h) = (12, 12);
        let mask = Mask::from_fn(w, h, |x, y| x == 6 && y == 6);
        let corrupted = Frame::filled(w, h, 0.5);
        let mut state = PropagationState::new(&corrupted, &mask, 3).unwrap();
        let ref1 = Frame::filled(w, h, 0.25);
        let ref2 = Frame::filled(w, h, 0.75);
        propagate_once(&mut state, &ref1, &Mask::empty(w, h), &FlowField::zero(w, h)).unwrap();
        state.commit_iteration();
        propagate_once(&mut state, &ref2, &Mask::empty(w, h), &FlowField::zero(w, h)).unwrap();
        state.commit_iteration();
        assert_eq!(state.filled.get(6, 6, 0), 0.25);
    }

    #[test]
    fn no_holes_means_untouched_output() {
        let (w, h) = (16, 16);
        let frames: Vec<Frame> = (0..3).map(|t| texture(w, h, t as u64)).collect();
        let masks = vec![Mask::empty(w, h); 3];
        let seq = Sequence::new(frames.clone(), masks).unwrap();
        let flows = CompletedFlows {
            forward: vec![FlowField::zero(w, h); 2],
            backward: vec![FlowField::zero(w, h); 2],
        };
        let out = run_propagation(
            &seq,
            &flows,
            Some(&Compensator::default()),
            &PropagationConfig::default(),
        )
        .unwrap();
        for (got, want) in out.frames.iter().zip(&frames) {
            assert_eq!(got.data(), want.data());
        }
        assert!(out.remaining.iter().all(|m| m.is_empty()));
    }

    #[test]
    fn outside_hole_is_bit_identical() {
        let (w, h) = (20, 20);
        let big = texture(w + 32, h + 32, 5);
        let t_len = 4usize;
        let mut frames = Vec::new();
        let mut masks = Vec::new();
        for t in 0..t_len {
            frames.push(Frame::from_fn(w, h, |x, y| big.pixel(x + t, y)));
            masks.push(Mask::from_fn(w, h, |x, y| {
                (6..12).contains(&x) && (6..12).contains(&y) && t == 1
            }));
        }
        let seq = Sequence::new(frames.clone(), masks.clone()).unwrap();
        // frame t+1 shows the scene shifted one pixel left of frame t, so
        // the true forward flow is (-1, 0)
        let flows = CompletedFlows {
            forward: vec![FlowField::constant(w, h, -1.0, 0.0); t_len - 1],
            backward: vec![FlowField::constant(w, h, 1.0, 0.0); t_len - 1],
        };
        let out = run_propagation(
            &seq,
            &flows,
            Some(&Compensator::default()),
            &PropagationConfig::default(),
        )
        .unwrap();
        for t in 0..t_len {
            for y in 0..h {
                for x in 0..w {
                    if !masks[t].is_hole(x, y) {
                        assert_eq!(out.frames[t].pixel(x, y), frames[t].pixel(x, y));
                    }
                }
            }
        }
        assert!(out.remaining[1].is_empty());
    }
}
