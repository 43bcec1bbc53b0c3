//! Invariant suites driven by proptest's runner. Each returns the number of
//! cases it executed, or the failure message with the shrunk input.

use cineseg_core::foundation::{corrupt, CorruptionConfig};
use cineseg_core::grid::{CineStudy, GridShape, LabelVolume, Spacing, Structure, NUM_CLASSES};
use cineseg_core::metrics::{
    assd, connected_components, dice, euclidean_distance_transform, hd95, keep_largest_component,
    surface_distances,
};
use cineseg_core::phantom::{generate_phantom, PhantomConfig};
use cineseg_core::selftrain::{run_self_training, GroundTruth, Mode, SelfTrainConfig};
use cineseg_core::student::{
    argmax, combined_loss, softmax_rows, LossWeights, StudentLearner, TrainConfig,
};
use cineseg_core::temporal::count_extremes;
use cineseg_core::{foundation::FoundationSim, Mask, Sequential};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub type Outcome = Result<u32, String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map(|_| cases)
        .map_err(|e| e.to_string())
}

fn shape(max: usize) -> impl Strategy<Value = GridShape> {
    (1..=max, 1..=max, 1..=max).prop_map(|(x, y, z)| GridShape::new(x, y, z).unwrap())
}

fn spacing() -> impl Strategy<Value = Spacing> {
    (0.5..2.5f64, 0.5..2.5f64, 0.5..2.5f64).prop_map(|(a, b, c)| Spacing::new(a, b, c).unwrap())
}

/// Two label volumes on one grid, codes drawn from `0..codes`.
fn volume_pair(max: usize, codes: u8) -> impl Strategy<Value = (LabelVolume, LabelVolume)> {
    (shape(max), spacing()).prop_flat_map(move |(sh, sp)| {
        let n = sh.len();
        (
            proptest::collection::vec(0..codes, n),
            proptest::collection::vec(0..codes, n),
        )
            .prop_map(move |(a, b)| {
                (
                    LabelVolume::new(sh, sp, a).unwrap(),
                    LabelVolume::new(sh, sp, b).unwrap(),
                )
            })
    })
}

fn volume(max: usize, codes: u8) -> impl Strategy<Value = LabelVolume> {
    volume_pair(max, codes).prop_map(|(a, _)| a)
}

fn structure() -> impl Strategy<Value = Structure> {
    (0..7usize).prop_map(|i| Structure::FOREGROUND[i])
}

pub fn dice_symmetry() -> Outcome {
    run(200, (volume_pair(8, 3), structure()), |((a, b), s)| {
        let ab = dice(&a, &b, s).unwrap();
        prop_assert_eq!(ab, dice(&b, &a, s).unwrap());
        if let Some(d) = ab {
            prop_assert!((0.0..=1.0).contains(&d));
        }
        if a.count(s) > 0 {
            prop_assert_eq!(dice(&a, &a, s).unwrap(), Some(1.0));
        }
        Ok(())
    })
}

pub fn surface_distance_symmetry() -> Outcome {
    run(150, volume_pair(7, 3), |(a, b)| {
        let s = Structure::LvMyo;
        let ab = surface_distances(&a, &b, s).unwrap();
        let ba = surface_distances(&b, &a, s).unwrap();
        prop_assert_eq!(ab.is_some(), ba.is_some());
        if let (Some(x), Some(y)) = (ab, ba) {
            prop_assert_eq!(hd95(&x), hd95(&y));
            prop_assert!((assd(&x) - assd(&y)).abs() < 1e-12);
            prop_assert!(hd95(&x) >= 0.0 && assd(&x) >= 0.0);
        }
        if let Some(same) = surface_distances(&a, &a, s).unwrap() {
            prop_assert_eq!(hd95(&same), 0.0);
        }
        Ok(())
    })
}

pub fn extremes_reversal_invariance() -> Outcome {
    let series = proptest::collection::vec(-5i32..5, 3..16);
    run(200, series, |v| {
        let f: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        let mut rev = f.clone();
        rev.reverse();
        let neg: Vec<f64> = f.iter().map(|x| -x).collect();
        let n = count_extremes(&f).unwrap();
        prop_assert_eq!(n, count_extremes(&rev).unwrap());
        prop_assert_eq!(n, count_extremes(&neg).unwrap());
        prop_assert!(n <= f.len() - 2);
        Ok(())
    })
}

pub fn keep_largest_monotone() -> Outcome {
    run(150, (volume(9, 3), structure()), |(v, s)| {
        let s = if v.count(s) == 0 { Structure::LvMyo } else { s };
        let kept = keep_largest_component(&v, s);
        let before = connected_components(&v, s);
        let after = connected_components(&kept, s);
        prop_assert!(after.component_count <= 1);
        prop_assert_eq!(
            kept.count(s),
            before.component_sizes.first().copied().unwrap_or(0)
        );
        for (i, (&old, &new)) in v.labels().iter().zip(kept.labels()).enumerate() {
            if new == s.code() {
                prop_assert_eq!(old, new, "voxel {} gained {}", i, s);
            } else if old != s.code() {
                prop_assert_eq!(old, new, "voxel {} of another label changed", i);
            } else {
                prop_assert_eq!(new, 0);
            }
        }
        prop_assert_eq!(keep_largest_component(&kept, s), kept);
        Ok(())
    })
}

pub fn corruption_identity() -> Outcome {
    run(
        100,
        (volume(10, NUM_CLASSES as u8), any::<u64>(), any::<u64>()),
        |(v, seed, key)| {
            let cfg = CorruptionConfig {
                seed,
                ..CorruptionConfig::identity()
            };
            prop_assert_eq!(corrupt(&v, key, &cfg), v);
            Ok(())
        },
    )
}

pub fn corruption_determinism() -> Outcome {
    run(50, (volume(10, 4), any::<u64>()), |(v, key)| {
        let cfg = CorruptionConfig::default();
        prop_assert_eq!(corrupt(&v, key, &cfg), corrupt(&v, key, &cfg));
        Ok(())
    })
}

pub fn index_round_trip() -> Outcome {
    run(
        200,
        shape(40).prop_flat_map(|sh| (Just(sh), 0..sh.len())),
        |(sh, i)| {
            let (x, y, z) = sh.delinearize(i);
            prop_assert!(sh.contains(x, y, z));
            prop_assert_eq!(sh.linear_index(x, y, z).unwrap(), i);
            prop_assert!(sh.linear_index(sh.nx(), y, z).is_err());
            Ok(())
        },
    )
}

pub fn label_partition() -> Outcome {
    run(100, volume(10, NUM_CLASSES as u8), |v| {
        let total: usize = Structure::ALL.iter().map(|&s| v.count(s)).sum();
        prop_assert_eq!(total, v.shape().len());
        let masks: Vec<Mask> = Structure::ALL
            .iter()
            .map(|&s| v.foreground_mask(s))
            .collect();
        for i in 0..v.shape().len() {
            prop_assert_eq!(masks.iter().filter(|m| m.as_slice()[i]).count(), 1);
        }
        Ok(())
    })
}

pub fn edt_zero_exactly_on_foreground() -> Outcome {
    let mask = (shape(8), spacing()).prop_flat_map(|(sh, sp)| {
        proptest::collection::vec(any::<bool>(), sh.len())
            .prop_map(move |d| (Mask::new(sh, d).unwrap(), sp))
    });
    run(100, mask, |(m, sp)| {
        let f = euclidean_distance_transform(&m, sp);
        for (&inside, &d) in m.as_slice().iter().zip(f.values()) {
            if m.is_empty() {
                prop_assert!(d.is_infinite());
            } else {
                prop_assert_eq!(inside, d == 0.0);
                prop_assert!(inside || d >= sp.min_component() - 1e-12);
            }
        }
        Ok(())
    })
}

pub fn loss_bounds_and_shift_invariance() -> Outcome {
    let inst = (1..40usize).prop_flat_map(|n| {
        (
            proptest::collection::vec(-6.0..6.0f64, n * NUM_CLASSES),
            proptest::collection::vec(0..NUM_CLASSES as u8, n),
            -50.0..50.0f64,
        )
    });
    run(150, inst, |(logits, target, shift)| {
        let out = combined_loss(&softmax_rows(&logits), &target, LossWeights::default()).unwrap();
        prop_assert!(out.loss >= 0.0);
        prop_assert!((0.0..=1.0).contains(&out.mean_soft_dice));
        for row in logits.chunks_exact(NUM_CLASSES) {
            let z: [f64; NUM_CLASSES] = row.try_into().unwrap();
            let shifted = z.map(|v| v + shift);
            prop_assert_eq!(argmax(&z), argmax(&shifted));
        }
        Ok(())
    })
}

fn tiny_phantom() -> PhantomConfig {
    PhantomConfig {
        shape: GridShape::new(17, 17, 17).unwrap(),
        spacing: Spacing::isotropic(4.0).unwrap(),
        frames: 3,
        ..PhantomConfig::default()
    }
}

pub fn manual_labels_immutable() -> Outcome {
    run(
        8,
        (any::<u64>(), 0..3usize, 0.05..0.9f64),
        |(seed, rounds, fraction)| {
            let pc = PhantomConfig {
                seed,
                ..tiny_phantom()
            };
            let pseudo = generate_phantom(&pc, "p").unwrap();
            let manual = generate_phantom(&pc, "m").unwrap();
            let manual = CineStudy::new("m", manual.frames().to_vec(), true).unwrap();
            let mut sim = FoundationSim::new(CorruptionConfig {
                seed,
                ..CorruptionConfig::default()
            })
            .unwrap();
            sim.insert_truth("p", pseudo.labels().cloned().collect());
            let before: Vec<LabelVolume> = manual.labels().cloned().collect();
            let cfg = SelfTrainConfig {
                rounds,
                mode: Mode::PseudoMixed,
                manual_fraction: fraction,
                seed,
                train: TrainConfig {
                    epochs: 2,
                    batch_voxels: 256,
                    steps_per_epoch: 2,
                    ..TrainConfig::default()
                },
            };
            let learner = StudentLearner { cfg: cfg.train };
            let out = run_self_training(
                vec![pseudo, manual],
                None::<&GroundTruth>,
                &sim,
                &learner,
                &cfg,
                &Sequential,
                |_, _| {},
            )
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let after: Vec<LabelVolume> = out.studies[1].labels().cloned().collect();
            prop_assert_eq!(after, before);
            prop_assert_eq!(out.reports.len(), rounds + 1);
            Ok(())
        },
    )
}

pub type Suite = (&'static str, fn() -> Outcome);

/// Every suite, by name.
pub fn all() -> Vec<Suite> {
    vec![
        ("dice symmetry", dice_symmetry as fn() -> Outcome),
        ("surface distance symmetry", surface_distance_symmetry),
        ("extremes reversal invariance", extremes_reversal_invariance),
        ("keep_largest_component monotonicity", keep_largest_monotone),
        ("corruption identity element", corruption_identity),
        ("corruption determinism", corruption_determinism),
        ("linear index round trip", index_round_trip),
        ("label partition", label_partition),
        ("edt zero on foreground", edt_zero_exactly_on_foreground),
        (
            "loss bounds and argmax shift invariance",
            loss_bounds_and_shift_invariance,
        ),
        ("manual label immutability", manual_labels_immutable),
    ]
}
