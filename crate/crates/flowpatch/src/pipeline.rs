//! End-to-end inpainting driver: flow completion, propagate-compensate,
//! then diffusion synthesis of whatever the propagation could not see.

use std::path::Path;

use crate::compensation::Compensator;
use crate::error::Result;
use crate::flow_completion::{build_completed_flows, FlowCompletionConfig};
use crate::propagation::{run_propagation, IterationDiag, PropagationConfig};
use crate::raster::{Frame, Mask, Sequence};
use crate::synthesis::diffuse_fill;

/// Whole-pipeline configuration with the published defaults.
#[derive(Debug, Clone)]
pub struct InpaintConfig {
    pub flow: FlowCompletionConfig,
    pub propagation: PropagationConfig,
    /// `None` disables the compensation stage entirely.
    pub compensator: Option<Compensator>,
    /// Diffusion synthesis stop tolerance.
    pub synth_tol: f64,
    /// Diffusion synthesis sweep cap.
    pub synth_max_iter: usize,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        InpaintConfig {
            flow: FlowCompletionConfig::default(),
            propagation: PropagationConfig::default(),
            compensator: Some(Compensator::default()),
            synth_tol: 1e-4,
            synth_max_iter: 2000,
        }
    }
}

/// Pipeline output: completed frames, the per-frame masks of pixels the
/// synthesis stage had to invent, and optional diagnostics.
#[derive(Debug)]
pub struct InpaintResult {
    pub frames: Vec<Frame>,
    pub remaining: Vec<Mask>,
    pub diagnostics: Vec<Vec<IterationDiag>>,
}

/// Runs the full pipeline on a sequence. `external_flows`, when given,
/// replaces the block-match fallback with precomputed `.flo` pairs.
pub fn inpaint_sequence(
    seq: &Sequence,
    external_flows: Option<&Path>,
    cfg: &InpaintConfig,
) -> Result<InpaintResult> {
    let flows = build_completed_flows(seq, &cfg.flow, external_flows)?;
    let prop = run_propagation(seq, &flows, cfg.compensator.as_ref(), &cfg.propagation)?;

    let mut frames = Vec::with_capacity(seq.len());
    for (frame, remaining) in prop.frames.iter().zip(&prop.remaining) {
        if remaining.is_empty() {
            frames.push(frame.clone());
        } else {
            frames.push(diffuse_fill(frame, remaining, cfg.synth_tol, cfg.synth_max_iter)?);
        }
    }
    Ok(InpaintResult {
        frames,
        remaining: prop.remaining,
        diagnostics: prop.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Frame, Mask};

    #[test]
    fn hole_free_sequence_is_identity() {
        let (w, h) = (32, 32);
        let frames: Vec<Frame> = (0..3)
            .map(|t| {
                Frame::from_fn(w, h, |x, y| {
                    let v = ((x * 3 + y * 5 + t * 7) % 16) as f32 / 16.0;
                    [v, v, v]
                })
            })
            .collect();
        let masks = vec![Mask::empty(w, h); 3];
        let seq = Sequence::new(frames.clone(), masks).unwrap();
        let out = inpaint_sequence(&seq, None, &InpaintConfig::default()).unwrap();
        for (got, want) in out.frames.iter().zip(&frames) {
            assert_eq!(got.data(), want.data());
        }
        assert!(out.remaining.iter().all(|m| m.is_empty()));
    }

    #[test]
    fn single_frame_sequence_falls_back_to_synthesis() {
        let (w, h) = (32, 32);
        let frame = Frame::filled(w, h, 0.5);
        let mask = Mask::from_fn(w, h, |x, y| (12..20).contains(&x) && (12..20).contains(&y));
        let seq = Sequence::new(vec![frame], vec![mask.clone()]).unwrap();
        let out = inpaint_sequence(&seq, None, &InpaintConfig::default()).unwrap();
        assert_eq!(out.remaining[0], mask);
        for (x, y) in mask.iter_holes() {
            assert!((out.frames[0].get(x, y, 0) - 0.5).abs() < 1e-3);
        }
    }
}
