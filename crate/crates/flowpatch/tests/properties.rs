//! Property tests over the geometry, I/O, and metric invariants.

use proptest::prelude::*;

use flowpatch::geometry::{backward_warp, compose_flows, dilate};
use flowpatch::io::{read_flo, write_flo};
use flowpatch::metrics::{psnr, ssim};
use flowpatch::raster::{FlowField, Frame, Mask, CHANNELS};

fn arb_frame(w: usize, h: usize) -> impl Strategy<Value = Frame> {
    proptest::collection::vec(0.0f32..=1.0, w * h * CHANNELS)
        .prop_map(move |data| Frame::from_data(w, h, data).unwrap())
}

fn arb_mask(w: usize, h: usize) -> impl Strategy<Value = Mask> {
    proptest::collection::vec(any::<bool>(), w * h)
        .prop_map(move |bits| Mask::from_fn(w, h, |x, y| bits[y * w + x]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn warp_with_zero_flow_is_identity(frame in arb_frame(12, 9)) {
        let warp = backward_warp(&frame, &FlowField::zero(12, 9)).unwrap();
        prop_assert_eq!(warp.image.data(), frame.data());
        prop_assert_eq!(warp.inbounds.count(), 12 * 9);
    }

    #[test]
    fn dilation_is_extensive_and_monotone(
        mask in arb_mask(16, 16),
        extra in arb_mask(16, 16),
        k in prop::sample::select(vec![1usize, 3, 5, 9]),
    ) {
        let bigger = mask.union(&extra);
        let d_small = dilate(&mask, k).unwrap();
        let d_big = dilate(&bigger, k).unwrap();
        prop_assert!(mask.is_subset_of(&d_small));
        prop_assert!(d_small.is_subset_of(&d_big));
    }

    #[test]
    fn composing_translations_sums_vectors(
        u1 in -3.0f32..3.0, v1 in -3.0f32..3.0,
        u2 in -3.0f32..3.0, v2 in -3.0f32..3.0,
    ) {
        let a = FlowField::constant(16, 16, u1, v1);
        let b = FlowField::constant(16, 16, u2, v2);
        let c = compose_flows(&a, &b).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                if c.is_valid(x, y) {
                    let (u, v) = c.get(x, y);
                    // bilinear resampling of a constant rounds within an ulp
                    prop_assert!((u - (u1 + u2)).abs() < 1e-5);
                    prop_assert!((v - (v1 + v2)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn flo_round_trip_is_bit_exact(
        w in 1usize..12, h in 1usize..12,
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            f32::from_bits((state as u32 & 0x3F7F_FFFF) | 0x3800_0000)
        };
        let mut flow = FlowField::zero(w, h);
        for i in 0..w * h {
            flow.u[i] = next();
            flow.v[i] = -next();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.flo");
        write_flo(&flow, &path).unwrap();
        let back = read_flo(&path).unwrap();
        prop_assert_eq!(back.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        flow.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back.v.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        flow.v.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn psnr_and_ssim_are_symmetric(a in arb_frame(12, 12), b in arb_frame(12, 12)) {
        prop_assert_eq!(psnr(&a, &b, None).unwrap(), psnr(&b, &a, None).unwrap());
        let s_ab = ssim(&a, &b).unwrap();
        let s_ba = ssim(&b, &a).unwrap();
        prop_assert!((s_ab - s_ba).abs() < 1e-12);
    }

    #[test]
    fn warp_mask_validity_is_conservative(
        mask in arb_mask(10, 10),
        du in -2.0f32..2.0, dv in -2.0f32..2.0,
    ) {
        let flow = FlowField::constant(10, 10, du, dv);
        let warped = flowpatch::geometry::warp_mask(&mask, &flow).unwrap();
        let validity = warped.validity();
        for y in 0..10 {
            for x in 0..10 {
                if validity.get(x, y) == 1 {
                    // every tap of the footprint must be a non-hole pixel
                    let sx = x as f32 + du;
                    let sy = y as f32 + dv;
                    if sx >= 0.0 && sy >= 0.0 && sx <= 9.0 && sy <= 9.0 {
                        let x0 = sx.floor() as usize;
                        let y0 = sy.floor() as usize;
                        for (tx, ty) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let px = (x0 + tx).min(9);
                            let py = (y0 + ty).min(9);
                            let wx = if tx == 0 { 1.0 - (sx - x0 as f32) } else { sx - x0 as f32 };
                            let wy = if ty == 0 { 1.0 - (sy - y0 as f32) } else { sy - y0 as f32 };
                            if wx * wy > 0.0 {
                                prop_assert!(!mask.is_hole(px, py));
                            }
                        }
                    }
                }
            }
        }
    }
}
