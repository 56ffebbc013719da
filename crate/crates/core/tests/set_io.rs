use pcgen_core::{
    io::render_lpc, read_set, write_lpc, write_lpcs, write_set, CoreError, LabeledPointCloud, PartVocabulary,
    PointCloudSet, SetFormat, SetManifest,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, parts: usize, f32_exact: bool) -> LabeledPointCloud {
    let n = rng.random_range(1..20);
    let pts = (0..n * 3)
        .map(|_| {
            let v: f64 = rng.random_range(-2.0..2.0);
            if f32_exact { v as f32 as f64 } else { v }
        })
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..parts) as u16).collect();
    LabeledPointCloud::new(pts, 3, labels, parts).unwrap()
}

#[test]
fn directory_order_is_lexicographic() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_cloud(&mut rng, 2, false);
    let b = random_cloud(&mut rng, 2, false);
    // Written b first so creation order disagrees with name order.
    write_lpc(&b, dir.path().join("b.lpc")).unwrap();
    write_lpc(&a, dir.path().join("a.lpc")).unwrap();
    let set = read_set(dir.path()).unwrap();
    assert_eq!(set.clouds(), &[a, b]);
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_set(dir.path()), Err(CoreError::EmptySet(_))));
}

#[test]
fn vocab_mismatch_between_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    write_lpc(&random_cloud(&mut rng, 2, false), dir.path().join("a.lpc")).unwrap();
    write_lpc(&random_cloud(&mut rng, 3, false), dir.path().join("b.lpc")).unwrap();
    assert!(matches!(read_set(dir.path()), Err(CoreError::VocabMismatch { .. })));
}

#[test]
fn binary_twin_equals_text() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let clouds = vec![random_cloud(&mut rng, 3, true), random_cloud(&mut rng, 3, true)];
    let text_dir = tempfile::tempdir().unwrap();
    for (i, c) in clouds.iter().enumerate() {
        write_lpc(c, text_dir.path().join(format!("{i}.lpc"))).unwrap();
    }
    let bin_dir = tempfile::tempdir().unwrap();
    write_lpcs(&clouds, bin_dir.path().join("all.lpcs")).unwrap();
    let text = read_set(text_dir.path()).unwrap();
    let bin = read_set(bin_dir.path()).unwrap();
    assert_eq!(bin.len(), 2);
    assert_eq!(text.clouds(), bin.clouds());
}

#[test]
fn manifest_round_trip_both_formats() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab = PartVocabulary::new(vec!["body".into(), "wing".into(), "tail".into()]).unwrap();
    let clouds: Vec<_> = (0..5).map(|_| random_cloud(&mut rng, 3, true)).collect();
    let set = PointCloudSet::new("planes", vocab, clouds).unwrap();
    for format in [SetFormat::Text, SetFormat::Binary] {
        let dir = tempfile::tempdir().unwrap();
        write_set(&set, dir.path(), format).unwrap();
        let back = read_set(dir.path()).unwrap();
        assert_eq!(back, set);
        let via_json = read_set(dir.path().join("manifest.json")).unwrap();
        assert_eq!(via_json, set);
    }
}

#[test]
fn manifest_count_is_checked() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let set = PointCloudSet::new(
        "s",
        PartVocabulary::anonymous(2).unwrap(),
        vec![random_cloud(&mut rng, 2, false)],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = write_set(&set, dir.path(), SetFormat::Text).unwrap();
    manifest.files[0].count = 2;
    manifest.save(&dir.path().join("manifest.json")).unwrap();
    assert!(matches!(read_set(dir.path()), Err(CoreError::Manifest(_))));
}

#[test]
fn manifest_json_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let set = PointCloudSet::new(
        "s",
        PartVocabulary::anonymous(2).unwrap(),
        vec![random_cloud(&mut rng, 2, false)],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_set(&set, dir.path(), SetFormat::Text).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(v["name"], "s");
    assert_eq!(v["part_names"][1], "part1");
    assert_eq!(v["files"][0]["path"], "cloud_000000.lpc");
    assert_eq!(v["files"][0]["count"], 1);
    assert_eq!(v["version"], 1);
    let m = SetManifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.files.len(), 1);
    assert!(render_lpc(&set.clouds()[0]).starts_with("LPC v1"));
}
