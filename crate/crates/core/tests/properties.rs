use proptest::prelude::*;

use seganet::augment::{augment_pipeline, AugmentSpec, SliceSample};
use seganet::io::{decode_tensor, encode_tensor, TensorData};
use seganet::metrics::{dice_coefficient, hausdorff_distance, median_contour_distance};
use seganet::numfmt::format_sig;
use seganet::stack::MaskStack;
use seganet::tensor::Tensor;
use seganet::train::dice_loss;
use seganet::volumetrics::{cohort_compare, ejection_fractions, find_landmarks, VolumeCurve};

const SP: [f64; 3] = [1.25, 1.5, 4.0];

fn mask_bits(len: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(prop::bool::weighted(0.35), len)
}

/// Masks of `inner` size placed at `(dr, dc)` inside a larger empty canvas.
fn placed(bits: &[bool], s: usize, inner: usize, canvas: usize, dr: usize, dc: usize) -> MaskStack {
    MaskStack::from_fn([s, canvas, canvas], SP, |k, r, c| {
        let (r, c) = (r.wrapping_sub(dr), c.wrapping_sub(dc));
        r < inner && c < inner && bits[(k * inner + r) * inner + c]
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_are_symmetric(a in mask_bits(2 * 12 * 12), b in mask_bits(2 * 12 * 12)) {
        let (a, b) = (placed(&a, 2, 12, 12, 0, 0), placed(&b, 2, 12, 12, 0, 0));
        prop_assert_eq!(dice_coefficient(&a, &b).unwrap(), dice_coefficient(&b, &a).unwrap());
        prop_assert_eq!(hausdorff_distance(&a, &b).ok(), hausdorff_distance(&b, &a).ok());
        prop_assert_eq!(median_contour_distance(&a, &b).ok(), median_contour_distance(&b, &a).ok());
    }

    #[test]
    fn metrics_are_translation_invariant(
        a in mask_bits(2 * 10 * 10),
        b in mask_bits(2 * 10 * 10),
        dr in 1usize..6,
        dc in 1usize..6,
    ) {
        let base = (placed(&a, 2, 10, 18, 1, 1), placed(&b, 2, 10, 18, 1, 1));
        let moved = (placed(&a, 2, 10, 18, dr, dc), placed(&b, 2, 10, 18, dr, dc));
        prop_assert_eq!(dice_coefficient(&base.0, &base.1).unwrap(), dice_coefficient(&moved.0, &moved.1).unwrap());
        let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-9,
            (None, None) => true,
            _ => false,
        };
        prop_assert!(close(hausdorff_distance(&base.0, &base.1).ok(), hausdorff_distance(&moved.0, &moved.1).ok()));
        prop_assert!(close(
            median_contour_distance(&base.0, &base.1).ok(),
            median_contour_distance(&moved.0, &moved.1).ok()
        ));
    }

    #[test]
    fn dice_and_distances_are_bounded(a in mask_bits(12 * 12), b in mask_bits(12 * 12)) {
        let (a, b) = (placed(&a, 1, 12, 12, 0, 0), placed(&b, 1, 12, 12, 0, 0));
        let d = dice_coefficient(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        if let (Ok(hd), Ok(mcd)) = (hausdorff_distance(&a, &b), median_contour_distance(&a, &b)) {
            prop_assert!(mcd <= hd && mcd >= 0.0);
        }
    }

    #[test]
    fn ejection_fractions_are_scale_invariant(
        curve in prop::collection::vec(10.0f64..200.0, 8..40),
        scale in 0.01f64..100.0,
    ) {
        let base = find_landmarks(&VolumeCurve::new(curve.clone()), 1);
        let scaled = find_landmarks(&VolumeCurve::new(curve.iter().map(|v| v * scale).collect()), 1);
        match (base, scaled) {
            (Ok(l), Ok(s)) => {
                prop_assert_eq!((l.max_phase, l.min_phase, l.prea_phase), (s.max_phase, s.min_phase, s.prea_phase));
                let (bl, bs) = (ejection_fractions(&l).unwrap(), ejection_fractions(&s).unwrap());
                prop_assert!((bl.ef_percent - bs.ef_percent).abs() <= 1e-9);
                prop_assert!((bl.aef_percent - bs.aef_percent).abs() <= 1e-9);
                prop_assert!(bl.ef_percent >= bl.aef_percent - 1e-9);
            }
            (Err(_), Err(_)) => {}
            (b, s) => prop_assert!(false, "{:?} vs {:?}", b, s),
        }
    }

    #[test]
    fn landmarks_follow_cyclic_rotation(
        curve in prop::collection::vec(10.0f64..200.0, 8..40),
        shift in 0usize..40,
    ) {
        let n = curve.len();
        let shift = shift % n;
        let rotated: Vec<f64> = (0..n).map(|i| curve[(i + n - shift) % n]).collect();
        if let Ok(l) = find_landmarks(&VolumeCurve::new(curve), 1) {
            let r = find_landmarks(&VolumeCurve::new(rotated), 1).unwrap();
            prop_assert_eq!(r.max_phase, (l.max_phase + shift) % n);
            prop_assert_eq!(r.min_phase, (l.min_phase + shift) % n);
            prop_assert_eq!(r.prea_phase, (l.prea_phase + shift) % n);
            prop_assert_eq!((r.v_max_ml, r.v_min_ml, r.v_prea_ml), (l.v_max_ml, l.v_min_ml, l.v_prea_ml));
        }
    }

    #[test]
    fn augmentation_keeps_masks_binary(seed in any::<u64>(), bits in mask_bits(24 * 20)) {
        let image: Vec<f32> = bits.iter().enumerate().map(|(i, &b)| if b { 0.8 } else { (i % 7) as f32 / 10.0 }).collect();
        let mask: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
        let s = SliceSample::new(24, 20, image, mask, [1.25, 1.25]).unwrap();
        let spec = AugmentSpec { prob: [0.7; 6], seed, ..AugmentSpec::default() };
        let out = augment_pipeline(&s, &spec, &mut spec.rng()).unwrap();
        prop_assert_eq!((out.height(), out.width()), (24, 20));
        prop_assert!(out.mask().iter().all(|&m| m <= 1));
        prop_assert!(out.image().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn tensor_container_round_trip(dims in prop::collection::vec(1usize..6, 1..4), seed in any::<u32>()) {
        let n: usize = dims.iter().product();
        let data: Vec<f32> = (0..n).map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32) & 0x7f7f_ffff)).collect();
        let t = TensorData::F32 { dims: dims.clone(), data };
        prop_assert_eq!(decode_tensor(&encode_tensor(&t).unwrap()).unwrap(), t);
        let m = TensorData::U8 { dims, data: (0..n).map(|i| (i as u32 ^ seed) as u8).collect() };
        prop_assert_eq!(decode_tensor(&encode_tensor(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn six_significant_digits_round_trip(x in prop::num::f64::NORMAL) {
        let parsed: f64 = format_sig(x, 6).parse().unwrap();
        prop_assert!((parsed - x).abs() <= 5e-6 * x.abs());
    }

    #[test]
    fn soft_dice_loss_in_unit_interval(
        pred in prop::collection::vec(0.0f64..=1.0, 2 * 16),
        target in prop::collection::vec(prop::bool::ANY, 2 * 16),
    ) {
        let p = Tensor::new(vec![2, 1, 4, 4], pred).unwrap();
        let t = Tensor::new(vec![2, 1, 4, 4], target.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        let l = dice_loss(&p, &t, 1e-5).unwrap();
        prop_assert!((0.0..=1.0).contains(&l));
    }

    #[test]
    fn welch_test_is_antisymmetric(
        a in prop::collection::vec(-50.0f64..50.0, 2..20),
        b in prop::collection::vec(-50.0f64..50.0, 2..20),
    ) {
        let ab = cohort_compare(&a, &b, false).unwrap();
        let ba = cohort_compare(&b, &a, false).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab.p));
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert_eq!(ab.p, ba.p);
        prop_assert_eq!(ab.df, ba.df);
    }
}
