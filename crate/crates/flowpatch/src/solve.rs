//! Weighted-Laplace Dirichlet fill, the numerical core behind flow
//! completion and diffusion synthesis.
//!
//! For every hole pixel p the solver enforces
//! `sum_q w_pq (x_p - x_q) = 0` over 4-neighborhoods, with values outside
//! the hole fixed as boundary data. Iteration is Gauss–Seidel with a
//! forward raster sweep, so single-solver runs are reproducible.

use crate::error::{Error, Result};
use crate::raster::{Frame, Mask};

/// Per-edge weights between horizontally and vertically adjacent pixels.
///
/// `right[y*w + x]` weighs the edge (x,y)-(x+1,y); `down` the edge
/// (x,y)-(x,y+1). Weights are strictly positive.
pub(crate) struct EdgeWeights {
    right: Vec<f64>,
    down: Vec<f64>,
}

impl EdgeWeights {
    /// Uniform unit weights (plain Laplace).
    pub fn uniform(width: usize, height: usize) -> EdgeWeights {
        EdgeWeights {
            right: vec![1.0; width * height],
            down: vec![1.0; width * height],
        }
    }

    /// Edge-sensitive weights from a guide image:
    /// `w_pq = exp(-beta * |guide(p) - guide(q)|_1)` with the L1 norm over
    /// the color channels.
    pub fn from_guide(guide: &Frame, beta: f64) -> EdgeWeights {
        let (w, h) = guide.dims();
        let mut right = vec![1.0; w * h];
        let mut down = vec![1.0; w * h];
        if beta == 0.0 {
            return EdgeWeights { right, down };
        }
        for y in 0..h {
            for x in 0..w {
                let p = guide.pixel(x, y);
                if x + 1 < w {
                    let q = guide.pixel(x + 1, y);
                    let d = (p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs();
                    right[y * w + x] = (-beta * d as f64).exp();
                }
                if y + 1 < h {
                    let q = guide.pixel(x, y + 1);
                    let d = (p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs();
                    down[y * w + x] = (-beta * d as f64).exp();
                }
            }
        }
        EdgeWeights { right, down }
    }
}

/// Solves the weighted-Laplace system over `hole` for every plane at once,
/// sharing one sweep schedule. Planes hold boundary data outside the hole
/// and an initial guess inside. Returns the number of sweeps used.
pub(crate) fn gauss_seidel_fill(
    width: usize,
    height: usize,
    hole: &Mask,
    weights: &EdgeWeights,
    planes: &mut [&mut [f64]],
    tol: f64,
    max_iter: usize,
) -> Result<usize> {
    if hole.count() == width * height {
        return Err(Error::UnsolvableFill);
    }
    if hole.is_empty() {
        return Ok(0);
    }

    assert!(planes.len() <= 4, "solver shares sweeps across at most 4 planes");
    let hole_idx: Vec<usize> = (0..width * height)
        .filter(|&i| hole.data()[i] != 0)
        .collect();

    for sweep in 1..=max_iter {
        let mut max_update = 0.0f64;
        for &i in &hole_idx {
            let x = i % width;
            let y = i / width;
            let mut num = [0.0f64; 4];
            let mut den = 0.0f64;
            if x > 0 {
                let wgt = weights.right[i - 1];
                den += wgt;
                for (k, plane) in planes.iter().enumerate() {
                    num[k] += wgt * plane[i - 1];
                }
            }
            if x + 1 < width {
                let wgt = weights.right[i];
                den += wgt;
                for (k, plane) in planes.iter().enumerate() {
                    num[k] += wgt * plane[i + 1];
                }
            }
            if y > 0 {
                let wgt = weights.down[i - width];
                den += wgt;
                for (k, plane) in planes.iter().enumerate() {
                    num[k] += wgt * plane[i - width];
                }
            }
            if y + 1 < height {
                let wgt = weights.down[i];
                den += wgt;
                for (k, plane) in planes.iter().enumerate() {
                    num[k] += wgt * plane[i + width];
                }
            }
            for (k, plane) in planes.iter_mut().enumerate() {
                let new = num[k] / den;
                let update = (new - plane[i]).abs();
                if update > max_update {
                    max_update = update;
                }
                plane[i] = new;
            }
        }
        if max_update < tol {
            return Ok(sweep);
        }
    }
    Ok(max_iter)
}

/// Mean of the boundary (non-hole) values of a plane; warm start for the
/// hole interior.
pub(crate) fn boundary_mean(plane: &[f64], hole: &Mask) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &v) in plane.iter().enumerate() {
        if hole.data()[i] == 0 {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_boundary_fills_to_constant() {
        let (w, h) = (8, 8);
        let hole = Mask::from_fn(w, h, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
        let mut plane = vec![0.5f64; w * h];
        for (x, y) in hole.iter_holes() {
            plane[y * w + x] = 0.0;
        }
        let weights = EdgeWeights::uniform(w, h);
        gauss_seidel_fill(w, h, &hole, &weights, &mut [&mut plane], 1e-10, 10_000).unwrap();
        for (x, y) in hole.iter_holes() {
            assert!((plane[y * w + x] - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn full_hole_is_unsolvable() {
        let (w, h) = (4, 4);
        let hole = Mask::full(w, h);
        let mut plane = vec![0.0f64; w * h];
        let weights = EdgeWeights::uniform(w, h);
        let err = gauss_seidel_fill(w, h, &hole, &weights, &mut [&mut plane], 1e-6, 100);
        assert!(matches!(err, Err(Error::UnsolvableFill)));
    }

    #[test]
    fn empty_hole_is_noop() {
        let (w, h) = (4, 4);
        let hole = Mask::empty(w, h);
        let mut plane = vec![0.25f64; w * h];
        let weights = EdgeWeights::uniform(w, h);
        let sweeps =
            gauss_seidel_fill(w, h, &hole, &weights, &mut [&mut plane], 1e-6, 100).unwrap();
        assert_eq!(sweeps, 0);
        assert!(plane.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn maximum_principle_holds() {
        let (w, h) = (10, 10);
        let hole = Mask::from_fn(w, h, |x, y| (3..7).contains(&x) && (3..7).contains(&y));
        let mut plane: Vec<f64> = (0..w * h)
            .map(|i| ((i * 37) % 101) as f64 / 100.0)
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..w * h {
            if hole.data()[i] == 0 {
                lo = lo.min(plane[i]);
                hi = hi.max(plane[i]);
            } else {
                plane[i] = 0.0;
            }
        }
        let weights = EdgeWeights::uniform(w, h);
        gauss_seidel_fill(w, h, &hole, &weights, &mut [&mut plane], 1e-12, 20_000).unwrap();
        for (x, y) in hole.iter_holes() {
            let v = plane[y * w + x];
            assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }
}
