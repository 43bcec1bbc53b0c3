mod common;

use cineseg::container::{
    read_manifest, read_model, read_studies, read_study, study_dirs, write_studies, write_study,
};
use cineseg::Error;
use cineseg_core::grid::{GridShape, Spacing};
use cineseg_core::phantom::{generate_phantom, PhantomConfig};
use common::*;
use proptest::prelude::*;

fn small_phantom() -> PhantomConfig {
    PhantomConfig {
        shape: GridShape::new(32, 32, 32).unwrap(),
        spacing: Spacing::isotropic(2.0).unwrap(),
        frames: 3,
        ..PhantomConfig::default()
    }
}

#[test]
fn phantom_round_trip_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let study = generate_phantom(&small_phantom(), "subject_00").unwrap();
    write_study(&study, tmp.path()).unwrap();
    let back = read_study(tmp.path()).unwrap();
    assert!(studies_bit_equal(&study, &back));
    assert_eq!(study, back);
}

#[test]
fn random_studies_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut r = rng(0xc0ffee);
    let studies: Vec<_> = (0..20)
        .map(|i| random_study(&mut r, &format!("s{i:02}")))
        .collect();
    write_studies(&studies, tmp.path()).unwrap();
    let back = read_studies(tmp.path()).unwrap();
    assert_eq!(back.len(), studies.len());
    for (a, b) in studies.iter().zip(&back) {
        assert!(studies_bit_equal(a, b), "{}", a.subject_id());
    }
}

#[test]
fn writing_twice_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut r = rng(3);
    let s = random_study(&mut r, "same");
    write_study(&s, &tmp.path().join("a")).unwrap();
    write_study(&s, &tmp.path().join("b")).unwrap();
    for name in ["study.json", "frame_000.img", "frame_000.lbl"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(name)).unwrap(),
            std::fs::read(tmp.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}

fn written(seed: u64) -> (tempfile::TempDir, std::path::PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("study");
    write_study(&random_study(&mut rng(seed), "victim"), &dir).unwrap();
    (tmp, dir)
}

#[test]
fn wrong_hash_is_an_integrity_error() {
    let (_tmp, dir) = written(1);
    let m = dir.join("study.json");
    let text = std::fs::read_to_string(&m).unwrap();
    let h = read_manifest(&dir).unwrap().frames[0].labels_sha256.clone();
    std::fs::write(&m, text.replace(&h, &"0".repeat(64))).unwrap();
    assert!(matches!(read_study(&dir), Err(Error::Integrity { .. })));
}

#[test]
fn flipped_byte_is_an_integrity_error() {
    let (_tmp, dir) = written(2);
    let p = dir.join("frame_000.img");
    let mut b = std::fs::read(&p).unwrap();
    b[0] ^= 0x40;
    std::fs::write(&p, b).unwrap();
    assert!(matches!(read_study(&dir), Err(Error::Integrity { .. })));
}

#[test]
fn short_file_is_truncated_and_long_file_has_trailing_data() {
    let (_tmp, dir) = written(4);
    let p = dir.join("frame_000.lbl");
    let b = std::fs::read(&p).unwrap();
    std::fs::write(&p, &b[..b.len() - 1]).unwrap();
    assert!(matches!(read_study(&dir), Err(Error::Truncated { .. })));
    let mut longer = b.clone();
    longer.push(0);
    std::fs::write(&p, longer).unwrap();
    assert!(matches!(read_study(&dir), Err(Error::TrailingData { .. })));
}

#[test]
fn label_nine_is_a_label_range_error() {
    let (_tmp, dir) = written(5);
    let mut b = std::fs::read(dir.join("frame_000.lbl")).unwrap();
    let last = b.len() - 1;
    b[last] = 9;
    replace_with_valid_hash(&dir, "frame_000.lbl", &b);
    match read_study(&dir) {
        Err(Error::LabelRange { index, value, .. }) => {
            assert_eq!(index, last);
            assert_eq!(value, 9);
        }
        other => panic!("expected a label-range error, got {other:?}"),
    }
}

#[test]
fn malformed_manifests_are_manifest_errors() {
    let cases: [(&str, &str); 5] = [
        ("\"format\": \"cineseg-study\"", "\"format\": \"other\""),
        ("\"version\": 1", "\"version\": 2"),
        ("\"subject_id\": \"victim\"", "\"subject_id\": \"../x\""),
        ("\"frame_000.img\"", "\"../frame_000.img\""),
        ("\"is_manual\"", "\"surprise\": 1, \"is_manual\""),
    ];
    for (from, to) in cases {
        let (_tmp, dir) = written(6);
        let m = dir.join("study.json");
        let text = std::fs::read_to_string(&m).unwrap();
        assert!(text.contains(from), "{from}");
        std::fs::write(&m, text.replacen(from, to, 1)).unwrap();
        assert!(
            matches!(read_study(&dir), Err(Error::Manifest { .. })),
            "{to}"
        );
    }
    let (_tmp, dir) = written(7);
    std::fs::write(dir.join("study.json"), "{ not json").unwrap();
    assert!(matches!(read_study(&dir), Err(Error::Manifest { .. })));
}

#[test]
fn missing_frame_file_is_an_io_error() {
    let (_tmp, dir) = written(8);
    std::fs::remove_file(dir.join("frame_000.img")).unwrap();
    assert!(matches!(read_study(&dir), Err(Error::Io { .. })));
}

#[test]
fn study_discovery_layouts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut r = rng(9);
    let a = random_study(&mut r, "b_second");
    let b = random_study(&mut r, "a_first");
    write_studies([&a, &b], &tmp.path().join("studies")).unwrap();
    let names = |p: &std::path::Path| -> Vec<String> {
        study_dirs(p)
            .unwrap()
            .iter()
            .map(|d| d.file_name().unwrap().to_string_lossy().into_owned())
            .collect()
    };
    assert_eq!(names(tmp.path()), ["a_first", "b_second"]);
    assert_eq!(names(&tmp.path().join("studies")), ["a_first", "b_second"]);
    assert_eq!(names(&tmp.path().join("studies/a_first")), ["a_first"]);
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(read_studies(empty.path()), Err(Error::Empty(_))));
}

#[test]
fn unusable_subject_ids_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let s = random_study(&mut rng(10), "../escape");
    assert!(write_study(&s, tmp.path()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn round_trip_any_seed(seed in any::<u64>()) {
        let tmp = tempfile::tempdir().unwrap();
        let s = random_study(&mut rng(seed), "p");
        write_study(&s, tmp.path()).unwrap();
        prop_assert!(studies_bit_equal(&s, &read_study(tmp.path()).unwrap()));
    }
}

#[test]
fn malformed_model_is_a_manifest_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("model.json");
    std::fs::write(&p, b"{\"weights\": []}").unwrap();
    assert!(matches!(read_model(&p), Err(Error::Manifest { .. })));
    assert!(matches!(
        read_model(&tmp.path().join("none.json")),
        Err(Error::Io { .. })
    ));
}
