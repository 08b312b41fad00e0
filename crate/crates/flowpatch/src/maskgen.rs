//! Benchmark mask generators: the stationary 5×4 square grid and seeded
//! moving free-form strokes.
//!
//! Both generators are pure functions of the configuration, seed, and
//! geometry: the same inputs always produce byte-identical mask stacks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::raster::Mask;

/// Which benchmark mask family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Identical grid of small squares in every frame.
    Stationary,
    /// Per-frame free-form strokes drifting smoothly over time.
    Moving,
}

/// Generator configuration. Grid shape applies to stationary masks,
/// stroke parameters to moving masks.
#[derive(Debug, Clone)]
pub struct MaskGenConfig {
    pub kind: MaskKind,
    pub seed: u64,
    pub grid_cols: usize,
    pub grid_rows: usize,
    /// Stroke count drawn uniformly from this inclusive range.
    pub stroke_count: (usize, usize),
    /// Brush diameter as a fraction of min(H, W), uniform in this range.
    pub stroke_width_frac: (f64, f64),
    /// Segments per stroke, uniform in this inclusive range.
    pub stroke_segments: (usize, usize),
    /// Segment step length as a fraction of min(H, W).
    pub step_frac: f64,
    /// Per-segment heading perturbation in radians.
    pub angle_jitter: f64,
    /// Per-frame control-point drift as a fraction of min(H, W).
    pub drift_frac: f64,
    /// Acceptable hole-area ratio per frame.
    pub ratio_bounds: (f64, f64),
}

impl MaskGenConfig {
    pub fn stationary() -> MaskGenConfig {
        MaskGenConfig {
            kind: MaskKind::Stationary,
            seed: 0,
            ..MaskGenConfig::moving(0)
        }
    }

    pub fn moving(seed: u64) -> MaskGenConfig {
        MaskGenConfig {
            kind: MaskKind::Moving,
            seed,
            grid_cols: 5,
            grid_rows: 4,
            stroke_count: (1, 3),
            stroke_width_frac: (0.06, 0.12),
            stroke_segments: (3, 6),
            step_frac: 0.14,
            angle_jitter: 0.6,
            drift_frac: 0.015,
            ratio_bounds: (0.02, 0.15),
        }
    }

    fn validate(&self, h: usize, w: usize) -> Result<()> {
        if h < 32 || w < 32 {
            return Err(Error::RasterTooSmall {
                w,
                h,
                context: "mask generation needs at least 32x32".into(),
            });
        }
        if self.grid_cols * self.grid_rows == 0 {
            return Err(Error::InvalidParameter("grid must be nonempty".into()));
        }
        if self.stroke_count.0 > self.stroke_count.1
            || self.stroke_count.0 == 0
            || self.stroke_width_frac.0 > self.stroke_width_frac.1
            || self.stroke_segments.0 > self.stroke_segments.1
        {
            return Err(Error::InvalidParameter("empty stroke parameter range".into()));
        }
        Ok(())
    }
}

/// Generates `t_len` masks of geometry `h`×`w` per the configuration.
pub fn gen_masks(cfg: &MaskGenConfig, h: usize, w: usize, t_len: usize) -> Result<Vec<Mask>> {
    cfg.validate(h, w)?;
    match cfg.kind {
        MaskKind::Stationary => Ok(vec![stationary_grid(cfg, h, w); t_len]),
        MaskKind::Moving => moving_strokes(cfg, h, w, t_len),
    }
}

/// The stationary grid: squares of side `min(H,W)/12` centered on a
/// uniform `cols`×`rows` grid, identical in every frame.
fn stationary_grid(cfg: &MaskGenConfig, h: usize, w: usize) -> Mask {
    let side = (h.min(w) / 12).max(1);
    let mut mask = Mask::empty(w, h);
    for j in 0..cfg.grid_rows {
        for i in 0..cfg.grid_cols {
            let cx = (i as f64 + 0.5) * w as f64 / cfg.grid_cols as f64;
            let cy = (j as f64 + 0.5) * h as f64 / cfg.grid_rows as f64;
            let x0 = (cx - side as f64 / 2.0).floor().max(0.0) as usize;
            let y0 = (cy - side as f64 / 2.0).floor().max(0.0) as usize;
            for y in y0..(y0 + side).min(h) {
                for x in x0..(x0 + side).min(w) {
                    mask.set(x, y, true);
                }
            }
        }
    }
    mask
}

struct Stroke {
    /// Control points at frame 0.
    points: Vec<(f64, f64)>,
    /// Per-frame drift velocity, pixels/frame.
    velocity: (f64, f64),
    /// Brush radius in pixels before scaling.
    radius: f64,
}

/// Reflects a coordinate into `[0, n-1]`.
fn reflect(v: f64, n: usize) -> f64 {
    let hi = (n - 1) as f64;
    if hi <= 0.0 {
        return 0.0;
    }
    let period = 2.0 * hi;
    let mut m = v.rem_euclid(period);
    if m > hi {
        m = period - m;
    }
    m
}

fn stamp_disk(mask: &mut Mask, cx: f64, cy: f64, r: f64) {
    let (w, h) = (mask.width(), mask.height());
    let x0 = ((cx - r).floor().max(0.0)) as usize;
    let x1 = ((cx + r).ceil().min((w - 1) as f64)) as usize;
    let y0 = ((cy - r).floor().max(0.0)) as usize;
    let y1 = ((cy + r).ceil().min((h - 1) as f64)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r * r {
                mask.set(x, y, true);
            }
        }
    }
}

fn rasterize(strokes: &[Stroke], scale: f64, frame: usize, h: usize, w: usize) -> Mask {
    let mut mask = Mask::empty(w, h);
    for s in strokes {
        let r = (s.radius * scale).max(1.0);
        let shift = (s.velocity.0 * frame as f64, s.velocity.1 * frame as f64);
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .map(|&(x, y)| (reflect(x + shift.0, w), reflect(y + shift.1, h)))
            .collect();
        for pair in pts.windows(2) {
            let (x0, y0) = pair[0];
            let (x1, y1) = pair[1];
            let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
            let steps = (len / (r * 0.5).max(0.5)).ceil().max(1.0) as usize;
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                stamp_disk(&mut mask, x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, r);
            }
        }
        if pts.len() == 1 {
            stamp_disk(&mut mask, pts[0].0, pts[0].1, r);
        }
    }
    mask
}

fn moving_strokes(cfg: &MaskGenConfig, h: usize, w: usize, t_len: usize) -> Result<Vec<Mask>> {
    let mind = h.min(w) as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let count = rng.gen_range(cfg.stroke_count.0..=cfg.stroke_count.1);
    let mut strokes = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = rng.gen_range(0.15 * w as f64..0.85 * w as f64);
        let mut y = rng.gen_range(0.15 * h as f64..0.85 * h as f64);
        let mut angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let segments = rng.gen_range(cfg.stroke_segments.0..=cfg.stroke_segments.1);
        let mut points = vec![(x, y)];
        for _ in 0..segments {
            angle += rng.gen_range(-cfg.angle_jitter..=cfg.angle_jitter);
            let step = cfg.step_frac * mind * rng.gen_range(0.5..1.0);
            x = reflect(x + step * angle.cos(), w);
            y = reflect(y + step * angle.sin(), h);
            points.push((x, y));
        }
        let drift_angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let speed = cfg.drift_frac * mind;
        let radius =
            rng.gen_range(cfg.stroke_width_frac.0..=cfg.stroke_width_frac.1) * mind / 2.0;
        strokes.push(Stroke {
            points,
            velocity: (speed * drift_angle.cos(), speed * drift_angle.sin()),
            radius,
        });
    }

    // All randomness is drawn above; the area adjustment below only scales
    // brush radii, so the stack stays deterministic.
    let area = (w * h) as f64;
    let (lo, hi) = cfg.ratio_bounds;
    let mut scale = 1.0f64;
    let mut masks = Vec::new();
    for _ in 0..40 {
        masks = (0..t_len)
            .map(|t| rasterize(&strokes, scale, t, h, w))
            .collect();
        let ratios: Vec<f64> = masks.iter().map(|m| m.count() as f64 / area).collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(1.0, f64::min);
        if max > hi {
            scale *= 0.85;
        } else if min < lo {
            scale *= 1.2;
        } else {
            break;
        }
    }
    Ok(masks)
}
