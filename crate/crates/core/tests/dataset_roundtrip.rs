use std::fs;

use crackwave::dataset::{
    build_dataset, generate_sample, load_dataset, plan_dataset, BuildOptions, DatasetConfig, SampleType,
    PARTIAL_MANIFEST_FILE,
};
use crackwave::Error;

fn config() -> DatasetConfig {
    let mut c = DatasetConfig::desk_scale(12, 6, 40, 144);
    c.master_seed = 2024;
    c.type_c_group = 4;
    c.special_cases = 1;
    c
}

#[test]
fn builds_are_reproducible_and_load_back_exactly() {
    let cfg = config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = build_dataset(&cfg, a.path(), &BuildOptions { workers: Some(4) }).unwrap();
    let rb = build_dataset(&cfg, b.path(), &BuildOptions { workers: Some(1) }).unwrap();
    let sums = |r: &crackwave::dataset::BuildReport| -> Vec<String> {
        r.manifest.samples.iter().map(|e| e.checksum.clone()).collect()
    };
    assert_eq!(sums(&ra), sums(&rb));
    assert_eq!(ra.manifest.counts.train.total(), 12);
    assert_eq!(ra.manifest.counts.test.total(), 6);
    assert_eq!(ra.manifest.counts.total, 18);
    assert_eq!(fs::read(&ra.manifest_path).unwrap(), fs::read(&rb.manifest_path).unwrap());

    let reader = load_dataset(&ra.manifest_path).unwrap();
    let plans = plan_dataset(&cfg).unwrap();
    let loaded: Vec<_> = reader.iter().collect::<Result<_, _>>().unwrap();
    assert_eq!(loaded.len(), plans.len());
    for (s, plan) in loaded.iter().zip(&plans) {
        assert_eq!(s.meta.id, plan.id);
        let fresh = generate_sample(plan, &cfg).unwrap();
        assert_eq!(s, &fresh);
        assert!(fresh.record.data.iter().zip(&s.record.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(s.meta.sample_type == SampleType::R, s.label100.is_empty());
    }
}

#[test]
fn truncated_sample_is_reported_as_corruption() {
    let cfg = config();
    let dir = tempfile::tempdir().unwrap();
    let report = build_dataset(&cfg, dir.path(), &BuildOptions::default()).unwrap();
    let victim = &report.manifest.samples[3];
    let path = dir.path().join(&victim.file);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
    let reader = load_dataset(&report.manifest_path).unwrap();
    let results: Vec<_> = reader.iter().collect();
    assert!(results[..3].iter().all(|r| r.is_ok()));
    match &results[3] {
        Err(Error::Corruption { id, .. }) => assert_eq!(id, &victim.meta.id),
        other => panic!("expected corruption, got {other:?}"),
    }

    let mut flipped = bytes.clone();
    flipped[100] ^= 1;
    fs::write(&path, flipped).unwrap();
    assert!(matches!(reader.read_entry(victim), Err(Error::Corruption { .. })));
}

#[test]
fn interrupted_build_resumes_from_partial_manifest() {
    let cfg = config();
    let dir = tempfile::tempdir().unwrap();
    // a directory squatting on one sample's path makes that write fail
    let blocker = dir.path().join("samples/train-00004.wsmp");
    fs::create_dir_all(&blocker).unwrap();
    let err = build_dataset(&cfg, dir.path(), &BuildOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
    assert!(dir.path().join(PARTIAL_MANIFEST_FILE).exists());
    assert!(!dir.path().join("manifest.json").exists());

    fs::remove_dir(&blocker).unwrap();
    let report = build_dataset(&cfg, dir.path(), &BuildOptions::default()).unwrap();
    assert_eq!(report.reused, 17);
    assert_eq!(report.generated, 1);
    assert!(!dir.path().join(PARTIAL_MANIFEST_FILE).exists());

    let clean = tempfile::tempdir().unwrap();
    let fresh = build_dataset(&cfg, clean.path(), &BuildOptions::default()).unwrap();
    assert_eq!(report.manifest, fresh.manifest);
}
