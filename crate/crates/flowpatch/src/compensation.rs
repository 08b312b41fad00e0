//! Error guidance maps and in-hole error compensation.
//!
//! The band between the hole and its dilation holds propagated pixels
//! whose ground truth is known from the input frame. The signed difference
//! there (propagated minus truth) is the error guidance map. Propagated
//! pixels on the band and the hole share error tendencies, so a per-channel
//! model affine in position, fitted on the band, predicts the in-hole
//! error. Low-frequency photometric offsets fit well and get subtracted;
//! misalignment leaves a large fit residual and is rejected instead, which
//! routes the affected pixels back to the remaining mask for synthesis.

use crate::propagation::PropagationState;
use crate::raster::{Frame, Mask, CHANNELS};

/// Signed 3-channel raster holding the error guidance map.
#[derive(Debug, Clone)]
pub struct ErrorMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ErrorMap {
    pub fn zero(width: usize, height: usize) -> ErrorMap {
        ErrorMap {
            width,
            height,
            data: vec![0.0; width * height * CHANNELS],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * CHANNELS + c] = v;
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, &v| m.max(v.abs()))
    }
}

/// Per-channel planar photometric model `ê_c(x,y) = a_c + b_c·x̂ + c_c·ŷ`
/// with coordinates normalized to `[-1, 1]` over the raster.
#[derive(Debug, Clone, Copy)]
pub struct PhotometricModel {
    /// Per channel: `[a, b, c]`.
    pub coeffs: [[f64; 3]; CHANNELS],
    /// Pooled RMS of the fit residual over the band samples.
    pub rms_residual: f64,
    /// Number of band samples the fit saw.
    pub sample_count: usize,
}

impl PhotometricModel {
    pub fn zero() -> PhotometricModel {
        PhotometricModel {
            coeffs: [[0.0; 3]; CHANNELS],
            rms_residual: 0.0,
            sample_count: 0,
        }
    }

    #[inline]
    pub fn eval(&self, c: usize, xh: f64, yh: f64) -> f64 {
        let [a, b, cc] = self.coeffs[c];
        a + b * xh + cc * yh
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(|&v| v == 0.0)
    }
}

#[inline]
fn norm_coord(i: usize, n: usize) -> f64 {
    if n > 1 {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    } else {
        0.0
    }
}

/// Computes the error guidance map: `e(p) = overfilled(p) - original(p)`
/// on the error mask, zero elsewhere. Sign convention: e measures
/// propagated minus truth.
pub fn compute_error_guidance(state: &PropagationState, original: &Frame) -> (ErrorMap, Mask) {
    let (w, h) = original.dims();
    debug_assert_eq!(state.filled.dims(), (w, h));
    let mut e = ErrorMap::zero(w, h);
    for (x, y) in state.err_mask.iter_holes() {
        let prop = state.overfilled.pixel(x, y);
        let truth = original.pixel(x, y);
        for c in 0..CHANNELS {
            e.set(x, y, c, prop[c] - truth[c]);
        }
    }
    (e, state.err_mask.clone())
}

/// Solves a symmetric 3×3 system by Gaussian elimination with partial
/// pivoting. `None` when the design is singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = b[col];
        for k in col + 1..3 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Ordinary least squares of the error map against `{1, x̂, ŷ}` per
/// channel, over the band pixels.
///
/// Fewer than `min_samples` band pixels yield the zero model. A degenerate
/// design (band collapsed to a point or a line) falls back to a mean-only
/// fit with b = c = 0.
pub fn fit_photometric(e: &ErrorMap, m_e: &Mask, min_samples: usize) -> PhotometricModel {
    let (w, h) = (e.width(), e.height());
    let samples: Vec<(usize, usize)> = m_e.iter_holes().collect();
    let n = samples.len();
    if n < min_samples {
        return PhotometricModel {
            sample_count: n,
            ..PhotometricModel::zero()
        };
    }

    let mut gram = [[0.0f64; 3]; 3];
    let mut rhs = [[0.0f64; 3]; CHANNELS];
    for &(x, y) in &samples {
        let basis = [1.0, norm_coord(x, w), norm_coord(y, h)];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] += basis[i] * basis[j];
            }
            for c in 0..CHANNELS {
                rhs[c][i] += e.get(x, y, c) as f64 * basis[i];
            }
        }
    }

    let mut coeffs = [[0.0f64; 3]; CHANNELS];
    let mut degenerate = false;
    for c in 0..CHANNELS {
        match solve3(gram, rhs[c]) {
            Some(v) => coeffs[c] = v,
            None => {
                degenerate = true;
                break;
            }
        }
    }
    if degenerate {
        for c in 0..CHANNELS {
            coeffs[c] = [rhs[c][0] / n as f64, 0.0, 0.0];
        }
    }

    let mut ss = 0.0f64;
    for &(x, y) in &samples {
        let xh = norm_coord(x, w);
        let yh = norm_coord(y, h);
        for c in 0..CHANNELS {
            let [a, b, cc] = coeffs[c];
            let r = e.get(x, y, c) as f64 - (a + b * xh + cc * yh);
            ss += r * r;
        }
    }
    PhotometricModel {
        coeffs,
        rms_residual: (ss / (n * CHANNELS) as f64).sqrt(),
        sample_count: n,
    }
}

/// Applies or rejects the fitted correction.
///
/// Accepted (`rms_residual <= tau`): the model prediction is subtracted
/// from this iteration's newly written pixels on both the filled and the
/// overfilled frame, clamped to `[0, 1]`. Rejected: the iteration's hole
/// pixels revert to remaining and its band writes are erased.
pub fn apply_compensation(state: &mut PropagationState, model: &PhotometricModel, tau: f64) -> bool {
    if model.rms_residual > tau {
        state.revert_iteration();
        return false;
    }
    let (w, h) = state.filled.dims();
    if !model.is_zero() {
        for (x, y) in state.iter_hole.clone().iter_holes() {
            let xh = norm_coord(x, w);
            let yh = norm_coord(y, h);
            let mut pf = state.filled.pixel(x, y);
            for (c, v) in pf.iter_mut().enumerate() {
                *v = (*v - model.eval(c, xh, yh) as f32).clamp(0.0, 1.0);
            }
            state.filled.set_pixel(x, y, pf);
            state.overfilled.set_pixel(x, y, pf);
        }
        for (x, y) in state.err_mask.clone().iter_holes() {
            let xh = norm_coord(x, w);
            let yh = norm_coord(y, h);
            let mut p = state.overfilled.pixel(x, y);
            for (c, v) in p.iter_mut().enumerate() {
                *v = (*v - model.eval(c, xh, yh) as f32).clamp(0.0, 1.0);
            }
            state.overfilled.set_pixel(x, y, p);
        }
    }
    state.commit_iteration();
    true
}

/// Result of one compensate call: the gate decision, the fitted model, and
/// the error map that drove it.
#[derive(Debug, Clone)]
pub struct CompensationOutcome {
    pub accepted: bool,
    pub model: PhotometricModel,
    pub error_map: ErrorMap,
}

/// Bundles the compensation knobs and runs the guidance-fit-gate step.
#[derive(Debug, Clone, Copy)]
pub struct Compensator {
    /// Gate threshold on the pooled fit RMS, `[0,1]` intensity scale.
    pub tau: f64,
    /// Minimum band samples for a meaningful fit.
    pub min_samples: usize,
}

impl Default for Compensator {
    fn default() -> Self {
        Compensator {
            tau: 0.05,
            min_samples: 32,
        }
    }
}

impl Compensator {
    pub fn run(&self, state: &mut PropagationState, original: &Frame) -> CompensationOutcome {
        let (error_map, m_e) = compute_error_guidance(state, original);
        let model = fit_photometric(&error_map, &m_e, self.min_samples);
        let accepted = apply_compensation(state, &model, self.tau);
        CompensationOutcome {
            accepted,
            model,
            error_map,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::{propagate_once, PropagationState};
    use crate::raster::FlowField;

    fn band_ring_state(w: usize, h: usize, frame: &Frame) -> (PropagationState, Mask) {
        let mask = Mask::from_fn(w, h, |x, y| {
            (w / 2 - 2..w / 2 + 2).contains(&x) && (h / 2 - 2..h / 2 + 2).contains(&y)
        });
        let state = PropagationState::new(frame, &mask, 7).unwrap();
        (state, mask)
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
                0.15 + 0.7 * ((v & 0xFF) as f32 / 255.0),
                0.15 + 0.7 * (((v >> 8) & 0xFF) as f32 / 255.0),
                0.15 + 0.7 * (((v >> 16) & 0xFF) as f32 / 255.0),
            ]
        })
    }

    #[test]
    fn consistent_reference_gives_zero_error_map() {
        let (w, h) = (32, 32);
        let frame = texture(w, h, 1);
        let (mut state, _) = band_ring_state(w, h, &frame);
        propagate_once(&mut state, &frame, &Mask::empty(w, h), &FlowField::zero(w, h)).unwrap();
        let (e, m_e) = compute_error_guidance(&state, &frame);
        assert!(!m_e.is_empty());
        assert_eq!(e.max_abs(), 0.0);
    }

    #[test]
    fn brighter_reference_shows_constant_error() {
        let (w, h) = (32, 32);
        let frame = texture(w, h, 2);
        let bright = Frame::from_fn(w, h, |x, y| {
            let p = frame.pixel(x, y);
            [p[0] + 0.1, p[1] + 0.1, p[2] + 0.1]
        });
        let (mut state, _) = band_ring_state(w, h, &frame);
        propagate_once(&mut state, &bright, &Mask::empty(w, h), &FlowField::zero(w, h)).unwrap();
        let (e, m_e) = compute_error_guidance(&state, &frame);
        for (x, y) in m_e.iter_holes() {
            for c in 0..CHANNELS {
                assert!((e.get(x, y, c) - 0.1).abs() < 1e-6, "at {x},{y},{c}");
            }
        }
    }

    #[test]
    fn empty_err_mask_yields_zero_map() {
        let (w, h) = (16, 16);
        let frame = texture(w, h, 3);
        let mask = Mask::from_fn(w, h, |x, y| x == 8 && y == 8);
        let state = PropagationState::new(&frame, &mask, 3).unwrap();
        let (e, m_e) = compute_error_guidance(&state, &frame);
        assert!(m_e.is_empty());
        assert_eq!(e.max_abs(), 0.0);
    }

    #[test]
    fn constant_error_fits_constant_model() {
        let (w, h) = (16, 16);
        let mut e = ErrorMap::zero(w, h);
        let band = Mask::from_fn(w, h, |x, y| x < 8 && y < 8);
        for (x, y) in band.iter_holes() {
            for c in 0..CHANNELS {
                e.set(x, y, c, 0.1);
            }
        }
        let model = fit_photometric(&e, &band, 32);
        for c in 0..CHANNELS {
            assert!((model.coeffs[c][0] - 0.1f32 as f64).abs() < 1e-9);
            assert!(model.coeffs[c][1].abs() < 1e-9);
            assert!(model.coeffs[c][2].abs() < 1e-9);
        }
        assert!(model.rms_residual < 1e-9);
    }

    #[test]
    fn zero_error_fits_zero_model() {
        let (w, h) = (16, 16);
        let e = ErrorMap::zero(w, h);
        let band = Mask::from_fn(w, h, |x, y| x < 8 && y < 8);
        let model = fit_photometric(&e, &band, 32);
        assert!(model.is_zero());
        assert!(model.rms_residual < 1e-12);
    }

    #[test]
    fn linear_ramp_error_recovers_slope() {
        let (w, h) = (32, 32);
        let mut e = ErrorMap::zero(w, h);
        let band = Mask::from_fn(w, h, |x, y| x < w && y < h && (x + y) % 2 == 0);
        for (x, y) in band.iter_holes() {
            let xh = 2.0 * x as f64 / (w - 1) as f64 - 1.0;
            for c in 0..CHANNELS {
                e.set(x, y, c, (0.05 * xh) as f32);
            }
        }
        let model = fit_photometric(&e, &band, 32);
        for c in 0..CHANNELS {
            assert!(model.coeffs[c][0].abs() < 1e-6);
            assert!((model.coeffs[c][1] - 0.05).abs() < 1e-6);
            assert!(model.coeffs[c][2].abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_samples_returns_zero_model() {
        let (w, h) = (16, 16);
        let mut e = ErrorMap::zero(w, h);
        let band = Mask::from_fn(w, h, |x, y| x < 3 && y == 0);
        for (x, y) in band.iter_holes() {
            e.set(x, y, 0, 0.5);
        }
        let model = fit_photometric(&e, &band, 32);
        assert!(model.is_zero());
        assert_eq!(model.sample_count, 3);
        assert_eq!(model.rms_residual, 0.0);
    }

    #[test]
    fn degenerate_line_band_falls_back_to_mean() {
        let (w, h) = (64, 64);
        let mut e = ErrorMap::zero(w, h);
        // all samples on one row: x̂ varies but ŷ is constant -> singular
        let band = Mask::from_fn(w, h, |_, y| y == 10);
        for (x, y) in band.iter_holes() {
            for c in 0..CHANNELS {
                e.set(x, y, c, 0.2);
            }
        }
        let model = fit_photometric(&e, &band, 32);
        for c in 0..CHANNELS {
            assert!((model.coeffs[c][0] - 0.2f32 as f64).abs() < 1e-9);
            assert_eq!(model.coeffs[c][1], 0.0);
            assert_eq!(model.coeffs[c][2], 0.0);
        }
    }

    #[test]
    fn accepted_compensation_subtracts_model() {
        let (w, h) = (32, 32);
        let frame = texture(w, h, 4);
        let bright = Frame::from_fn(w, h, |x, y| {
            let p = frame.pixel(x, y);
            [p[0] + 0.1, p[1] + 0.1, p[2] + 0.1]
        });
        let (mut state, mask) = band_ring_state(w, h, &frame);
        propagate_once(&mut state, &bright, &Mask::empty(w, h), &FlowField::zero(w, h)).unwrap();
        let comp = Compensator::default();
        let outcome = comp.run(&mut state, &frame);
        assert!(outcome.accepted);
        for (x, y) in mask.iter_holes() {
            for c in 0..CHANNELS {
                assert!(
                    (state.filled.get(x, y, c) - frame.get(x, y, c)).abs() < 1e-3,
                    "at {x},{y},{c}"
                );
            }
        }
    }

    #[test]
    fn rejection_restores_remaining() {
        let (w, h) = (32, 32);
        // checkerboard: shifting the reference misaligns hard edges
        let frame = Frame::from_fn(w, h, |x, y| {
            let v = if (x / 2 + y / 2) % 2 == 0 { 0.15 } else { 0.85 };
            [v, v, v]
        });
        let (mut state, mask) = band_ring_state(w, h, &frame);
        let before_remaining = state.remaining.clone();
        let before_filled = state.filled.clone();
        // flow off by 3px: propagated band content disagrees with truth
        let flow = FlowField::constant(w, h, 3.0, 0.0);
        propagate_once(&mut state, &frame, &Mask::empty(w, h), &flow).unwrap();
        assert!(!state.iter_hole.is_empty());
        let comp = Compensator::default();
        let outcome = comp.run(&mut state, &frame);
        assert!(!outcome.accepted);
        assert!(outcome.model.rms_residual > comp.tau);
        assert_eq!(state.remaining, before_remaining);
        assert_eq!(state.filled.data(), before_filled.data());
        assert!(state.prop_mask.is_empty());
        let _ = mask;
    }

    #[test]
    fn gate_is_monotone_in_tau() {
        let model = PhotometricModel {
            coeffs: [[0.01, 0.0, 0.0]; CHANNELS],
            rms_residual: 0.04,
            sample_count: 100,
        };
        let frame = Frame::filled(16, 16, 0.5);
        let mask = Mask::from_fn(16, 16, |x, y| x == 8 && y == 8);
        for (lo, hi) in [(0.04, 0.05), (0.05, 0.5)] {
            let mut s1 = PropagationState::new(&frame, &mask, 3).unwrap();
            let mut s2 = PropagationState::new(&frame, &mask, 3).unwrap();
            let at_lo = apply_compensation(&mut s1, &model, lo);
            let at_hi = apply_compensation(&mut s2, &model, hi);
            assert!(!at_lo || at_hi, "accept at {lo} implies accept at {hi}");
        }
    }
}
