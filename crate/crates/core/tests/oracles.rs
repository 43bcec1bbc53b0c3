mod support;

use cineseg_core::metrics::{assd, dice, euclidean_distance_transform, hd95, surface_distances};
use cineseg_core::student::LossWeights;
use cineseg_core::Structure;
use support::*;

#[test]
fn metrics_match_brute_force() {
    let mut r = rng(0x0dd1ce);
    for case in 0..200 {
        let shape = random_shape(&mut r, 12);
        let sp = random_spacing(&mut r);
        let a = random_labels(&mut r, shape, sp);
        let b = random_labels(&mut r, shape, sp);
        for s in [
            Structure::LvMyo,
            Structure::Lv,
            Structure::Rv,
            Structure::Aorta,
        ] {
            assert_eq!(
                dice(&a, &b, s).unwrap(),
                brute_dice(&a, &b, s),
                "case {case} {s}"
            );
            let fast = surface_distances(&a, &b, s).unwrap();
            let slow = brute_surface_distances(&a, &b, s);
            match (fast, slow) {
                (None, None) => {}
                (Some(f), Some((ab, ba))) => {
                    assert_eq!(f.len(), ab.len() + ba.len());
                    assert!(
                        (hd95(&f) - brute_hd95(&ab, &ba)).abs() < 1e-9,
                        "case {case} {s}"
                    );
                    assert!(
                        (assd(&f) - brute_assd(&ab, &ba)).abs() < 1e-9,
                        "case {case} {s}"
                    );
                }
                (f, sl) => panic!(
                    "case {case} {s}: defined-ness differs {:?} {:?}",
                    f.is_some(),
                    sl.is_some()
                ),
            }
        }
    }
}

#[test]
fn edt_matches_full_scan() {
    let mut r = rng(0xed7);
    for case in 0..100 {
        let shape = random_shape(&mut r, 12);
        let sp = random_spacing(&mut r);
        let m = random_mask(&mut r, shape);
        let fast = euclidean_distance_transform(&m, sp);
        let slow = brute_edt(&m, sp);
        for (f, s) in fast.values().iter().zip(&slow) {
            assert!(f == s || (f - s).abs() < 1e-9, "case {case}: {f} vs {s}");
        }
    }
}

#[test]
fn loss_gradient_matches_central_differences() {
    let mut r = rng(0x96ad);
    for case in 0..20 {
        let (logits, target) = random_loss_instance(&mut r, 64);
        let w = LossWeights { ce: 1.0, dice: 1.0 };
        let err = gradient_check(&logits, &target, w, 1e-4);
        assert!(err < 1e-3, "case {case}: relative error {err}");
    }
}
