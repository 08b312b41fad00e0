//! Independent oracles and synthetic scenes backing the test suites.
//!
//! Everything here deliberately avoids the implementation paths it checks:
//! the Laplace oracle is a dense direct solve, the SSIM oracle a direct
//! windowed computation, and the visibility oracle a brute-force chase of
//! ground-truth flows.

use flowpatch::flow_completion::CompletedFlows;
use flowpatch::raster::{FlowField, Frame, Mask, Sequence, CHANNELS};

/// Deterministic high-frequency color texture on an unbounded canvas.
/// Values stay within `[0.15, 0.85]` so photometric corruptions up to
/// ±0.15 cannot clip.
pub fn hash_texture(x: i64, y: i64, seed: u64) -> [f32; 3] {
    let mut v = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((x.wrapping_mul(31).wrapping_add(y.wrapping_mul(10_007))) as u64);
    v ^= v >> 33;
    v = v.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    v ^= v >> 33;
    v = v.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    v ^= v >> 33;
    [
        0.15 + 0.7 * ((v & 0xFF) as f32 / 255.0),
        0.15 + 0.7 * (((v >> 8) & 0xFF) as f32 / 255.0),
        0.15 + 0.7 * (((v >> 16) & 0xFF) as f32 / 255.0),
    ]
}

/// A synthetic scene translating rigidly by `motion` pixels per frame.
#[derive(Debug, Clone, Copy)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub t_len: usize,
    /// Integer content motion per frame: a scene point at p in frame t is
    /// at p + motion in frame t+1.
    pub motion: (i64, i64),
    pub seed: u64,
}

impl SceneSpec {
    /// Uncorrupted frame t.
    pub fn truth_frame(&self, t: usize) -> Frame {
        let (dx, dy) = self.motion;
        Frame::from_fn(self.width, self.height, |x, y| {
            hash_texture(
                x as i64 - t as i64 * dx,
                y as i64 - t as i64 * dy,
                self.seed,
            )
        })
    }

    pub fn truth_frames(&self) -> Vec<Frame> {
        (0..self.t_len).map(|t| self.truth_frame(t)).collect()
    }

    /// Exact adjacent flows of the rigid translation.
    pub fn gt_flows(&self) -> CompletedFlows {
        let (w, h) = (self.width, self.height);
        let (dx, dy) = (self.motion.0 as f32, self.motion.1 as f32);
        CompletedFlows {
            forward: vec![FlowField::constant(w, h, dx, dy); self.t_len - 1],
            backward: vec![FlowField::constant(w, h, -dx, -dy); self.t_len - 1],
        }
    }

    /// Corrupted sequence: per-frame transformed truth with hole pixels
    /// zeroed out.
    pub fn corrupted_with(
        &self,
        masks: &[Mask],
        transform: impl Fn(usize, usize, usize, [f32; 3]) -> [f32; 3],
    ) -> Sequence {
        assert_eq!(masks.len(), self.t_len);
        let frames: Vec<Frame> = (0..self.t_len)
            .map(|t| {
                let truth = self.truth_frame(t);
                Frame::from_fn(self.width, self.height, |x, y| {
                    if masks[t].is_hole(x, y) {
                        [0.0; 3]
                    } else {
                        transform(t, x, y, truth.pixel(x, y))
                    }
                })
            })
            .collect();
        Sequence::new(frames, masks.to_vec()).unwrap()
    }

    pub fn corrupted(&self, masks: &[Mask]) -> Sequence {
        self.corrupted_with(masks, |_, _, _, p| p)
    }

    /// Brute-force visibility: the set of hole pixels of frame `t` that no
    /// reference frame shows. A pixel p is visible in frame j when the
    /// chased position p + motion·(j−t) is in-raster and valid there.
    pub fn occluded_everywhere(&self, masks: &[Mask], t: usize) -> Mask {
        let (w, h) = (self.width, self.height);
        Mask::from_fn(w, h, |x, y| {
            if !masks[t].is_hole(x, y) {
                return false;
            }
            for j in 0..self.t_len {
                if j == t {
                    continue;
                }
                let qx = x as i64 + self.motion.0 * (j as i64 - t as i64);
                let qy = y as i64 + self.motion.1 * (j as i64 - t as i64);
                if qx >= 0
                    && qy >= 0
                    && (qx as usize) < w
                    && (qy as usize) < h
                    && !masks[j].is_hole(qx as usize, qy as usize)
                {
                    return false;
                }
            }
            true
        })
    }
}

/// Dense direct solve of the Dirichlet Laplace system over `hole`:
/// Gaussian elimination on the full unknown-by-unknown matrix. Returns the
/// plane with hole values replaced by the exact solution.
pub fn dense_laplace_solve(width: usize, height: usize, hole: &Mask, plane: &[f64]) -> Vec<f64> {
    assert_eq!(plane.len(), width * height);
    let unknowns: Vec<usize> = (0..width * height)
        .filter(|&i| hole.data()[i] != 0)
        .collect();
    let n = unknowns.len();
    if n == 0 {
        return plane.to_vec();
    }
    let mut index = vec![usize::MAX; width * height];
    for (r, &i) in unknowns.iter().enumerate() {
        index[i] = r;
    }

    let mut a = vec![vec![0.0f64; n]; n];
    let mut b = vec![0.0f64; n];
    for (r, &i) in unknowns.iter().enumerate() {
        let (x, y) = (i % width, i / width);
        let mut neighbors = Vec::with_capacity(4);
        if x > 0 {
            neighbors.push(i - 1);
        }
        if x + 1 < width {
            neighbors.push(i + 1);
        }
        if y > 0 {
            neighbors.push(i - width);
        }
        if y + 1 < height {
            neighbors.push(i + width);
        }
        a[r][r] = neighbors.len() as f64;
        for q in neighbors {
            if index[q] != usize::MAX {
                a[r][index[q]] -= 1.0;
            } else {
                b[r] += plane[q];
            }
        }
    }

    // plain Gaussian elimination with partial pivoting
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-12, "singular Laplace system");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }

    let mut out = plane.to_vec();
    for (r, &i) in unknowns.iter().enumerate() {
        out[i] = x[r];
    }
    out
}

/// Direct-window SSIM reference: 11×11 Gaussian (σ = 1.5), valid windows
/// only, per channel then averaged. Uses the centered-moment route rather
/// than convolutions of squares.
pub fn ssim_reference(a: &Frame, b: &Frame) -> f64 {
    const WIN: usize = 11;
    const SIGMA: f64 = 1.5;
    let (w, h) = a.dims();
    assert_eq!(b.dims(), (w, h));
    assert!(w >= WIN && h >= WIN);

    let mut kernel = [[0.0f64; WIN]; WIN];
    let c = (WIN / 2) as f64;
    let mut total = 0.0;
    for (i, row) in kernel.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            *v = (-(di * di + dj * dj) / (2.0 * SIGMA * SIGMA)).exp();
            total += *v;
        }
    }
    for row in &mut kernel {
        for v in row {
            *v /= total;
        }
    }

    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;
    let mut sum_channels = 0.0f64;
    for ch in 0..CHANNELS {
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for wy in 0..=h - WIN {
            for wx in 0..=w - WIN {
                let mut mu1 = 0.0;
                let mut mu2 = 0.0;
                for i in 0..WIN {
                    for j in 0..WIN {
                        mu1 += kernel[i][j] * a.get(wx + j, wy + i, ch) as f64;
                        mu2 += kernel[i][j] * b.get(wx + j, wy + i, ch) as f64;
                    }
                }
                let mut var1 = 0.0;
                let mut var2 = 0.0;
                let mut cov = 0.0;
                for i in 0..WIN {
                    for j in 0..WIN {
                        let da = a.get(wx + j, wy + i, ch) as f64 - mu1;
                        let db = b.get(wx + j, wy + i, ch) as f64 - mu2;
                        var1 += kernel[i][j] * da * da;
                        var2 += kernel[i][j] * db * db;
                        cov += kernel[i][j] * da * db;
                    }
                }
                sum += ((2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2))
                    / ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
                count += 1;
            }
        }
        sum_channels += sum / count as f64;
    }
    sum_channels / CHANNELS as f64
}

/// RMS difference over a region mask (1 = included), channels pooled.
pub fn rms_error(a: &Frame, b: &Frame, region: &Mask) -> f64 {
    let mut ss = 0.0f64;
    let mut n = 0usize;
    for (x, y) in region.iter_holes() {
        let pa = a.pixel(x, y);
        let pb = b.pixel(x, y);
        for c in 0..CHANNELS {
            let d = pa[c] as f64 - pb[c] as f64;
            ss += d * d;
        }
        n += 1;
    }
    assert!(n > 0, "empty region");
    (ss / (n * CHANNELS) as f64).sqrt()
}

/// Simple xorshift for reproducible test randomness without extra deps.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> TestRng {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn next_range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo) as u64) as usize
    }

    pub fn frame(&mut self, w: usize, h: usize) -> Frame {
        let mut data = Vec::with_capacity(w * h * CHANNELS);
        for _ in 0..w * h * CHANNELS {
            data.push(self.next_f64() as f32);
        }
        Frame::from_data(w, h, data).unwrap()
    }
}
