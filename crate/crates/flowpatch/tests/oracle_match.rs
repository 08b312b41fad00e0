//! The iterative solvers and the SSIM implementation against their
//! independent oracles.

use flowpatch::flow_completion::{complete_flow, GuidedSolveConfig};
use flowpatch::metrics::ssim;
use flowpatch::raster::{FlowField, Frame, Mask};
use flowpatch::synthesis::diffuse_fill;
use flowpatch_testkit::{dense_laplace_solve, ssim_reference, TestRng};

fn random_mask_interior(rng: &mut TestRng, w: usize, h: usize) -> Mask {
    // random blob that leaves at least the border valid
    let cx = rng.next_range(2, w - 2);
    let cy = rng.next_range(2, h - 2);
    let rw = rng.next_range(1, w / 2);
    let rh = rng.next_range(1, h / 2);
    Mask::from_fn(w, h, |x, y| {
        x > 0
            && y > 0
            && x + 1 < w
            && y + 1 < h
            && x.abs_diff(cx) <= rw
            && y.abs_diff(cy) <= rh
    })
}

#[test]
fn complete_flow_matches_dense_solve_on_8x8() {
    let (w, h) = (8, 8);
    let mut rng = TestRng::new(0x51DE);
    let mut flow = FlowField::zero(w, h);
    for i in 0..w * h {
        flow.u[i] = (rng.next_f64() * 4.0 - 2.0) as f32;
        flow.v[i] = (rng.next_f64() * 4.0 - 2.0) as f32;
    }
    let hole = Mask::from_fn(w, h, |x, y| (2..6).contains(&x) && (3..6).contains(&y));
    let cfg = GuidedSolveConfig {
        beta: 0.0,
        tol: 1e-10,
        max_iter: 50_000,
    };
    let guide = Frame::filled(w, h, 0.5);
    let done = complete_flow(&flow, &hole, &guide, &cfg).unwrap();

    let u_plane: Vec<f64> = flow.u.iter().map(|&v| v as f64).collect();
    let v_plane: Vec<f64> = flow.v.iter().map(|&v| v as f64).collect();
    let u_exact = dense_laplace_solve(w, h, &hole, &u_plane);
    let v_exact = dense_laplace_solve(w, h, &hole, &v_plane);
    for (x, y) in hole.iter_holes() {
        let i = y * w + x;
        assert!((done.u[i] as f64 - u_exact[i]).abs() <= 1e-3, "u at {x},{y}");
        assert!((done.v[i] as f64 - v_exact[i]).abs() <= 1e-3, "v at {x},{y}");
    }
}

#[test]
fn diffuse_fill_matches_dense_solve_on_gradient_boundary() {
    let (w, h) = (10, 10);
    let frame = Frame::from_fn(w, h, |x, y| {
        let v = 0.1 + 0.8 * (x as f32 / 9.0 + y as f32 / 9.0) / 2.0;
        [v, v * 0.9, 1.0 - v]
    });
    let hole = Mask::from_fn(w, h, |x, y| (3..7).contains(&x) && (3..7).contains(&y));
    let out = diffuse_fill(&frame, &hole, 1e-10, 50_000).unwrap();
    for c in 0..3 {
        let plane: Vec<f64> = frame
            .data()
            .iter()
            .skip(c)
            .step_by(3)
            .map(|&v| v as f64)
            .collect();
        let exact = dense_laplace_solve(w, h, &hole, &plane);
        for (x, y) in hole.iter_holes() {
            let i = y * w + x;
            assert!(
                (out.get(x, y, c) as f64 - exact[i]).abs() <= 1e-3,
                "channel {c} at {x},{y}"
            );
        }
    }
}

#[test]
fn solvers_match_dense_solve_on_random_instances() {
    let mut rng = TestRng::new(0xBEEF);
    for case in 0..10 {
        let w = rng.next_range(6, 13);
        let h = rng.next_range(6, 13);
        let hole = random_mask_interior(&mut rng, w, h);
        if hole.is_empty() {
            continue;
        }
        let frame = rng.frame(w, h);
        let out = diffuse_fill(&frame, &hole, 1e-10, 50_000).unwrap();
        for c in 0..3 {
            let plane: Vec<f64> = frame
                .data()
                .iter()
                .skip(c)
                .step_by(3)
                .map(|&v| v as f64)
                .collect();
            let exact = dense_laplace_solve(w, h, &hole, &plane);
            for (x, y) in hole.iter_holes() {
                let i = y * w + x;
                assert!(
                    (out.get(x, y, c) as f64 - exact[i]).abs() <= 1e-3,
                    "case {case} channel {c} at {x},{y}"
                );
            }
        }
    }
}

#[test]
fn ssim_matches_direct_window_oracle_on_inverted_pattern() {
    // high-contrast pattern vs its negative
    let a = Frame::from_fn(16, 16, |x, y| {
        let v = if (x / 2 + y / 2) % 2 == 0 { 0.9 } else { 0.1 };
        [v, v, v]
    });
    let b = Frame::from_fn(16, 16, |x, y| {
        let p = a.pixel(x, y);
        [1.0 - p[0], 1.0 - p[1], 1.0 - p[2]]
    });
    let got = ssim(&a, &b).unwrap();
    let want = ssim_reference(&a, &b);
    assert!((got - want).abs() < 1e-6, "got {got}, oracle {want}");
    assert!(got < 0.0, "inverted pattern should anti-correlate");
}

#[test]
fn ssim_matches_direct_window_oracle_on_random_pairs() {
    let mut rng = TestRng::new(0xA11CE);
    for _ in 0..5 {
        let a = rng.frame(14, 17);
        let b = rng.frame(14, 17);
        let got = ssim(&a, &b).unwrap();
        let want = ssim_reference(&a, &b);
        assert!((got - want).abs() < 1e-6, "got {got}, oracle {want}");
    }
}
