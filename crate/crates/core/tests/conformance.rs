//! The committed fixture was written by an independent packer (see
//! fixtures/make_vae_sample.py), not by this crate.

use std::path::{Path, PathBuf};

use ensmem::data::{read_dataset, write_dataset};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/vae_sample.emc")
}

#[test]
fn reads_the_exported_sample() {
    let ds = read_dataset(&fixture()).unwrap();
    assert_eq!((ds.d, ds.m), (512, 10));
    assert_eq!((ds.train.len(), ds.test.len()), (80, 20));
    assert_eq!(ds.train.class_counts(10), vec![8; 10]);
    assert_eq!(ds.test.class_counts(10), vec![2; 10]);
    assert_eq!(&ds.train.labels()[..5], &[1, 5, 1, 6, 8]);
    assert_eq!(&ds.test.labels()[..5], &[3, 2, 3, 2, 1]);
    assert_eq!(ds.test.label(19), 9);
    assert_eq!(&ds.train.vector(0)[..3], &[0.03446581f32, -0.7672325, -0.66544664]);
    assert_eq!(ds.test.vector(19)[511], -0.597_337_66f32);
    let total: f64 = ds.train.iter().chain(ds.test.iter()).flat_map(|(v, _)| v.iter().map(|&x| x as f64)).sum();
    assert!((total - 157.08302013414868).abs() < 1e-9, "{total}");
}

#[test]
fn reads_the_sidecar() {
    let ds = read_dataset(&fixture()).unwrap();
    assert_eq!(ds.meta.source, "vae-mnist");
    assert_eq!(ds.meta.class_names, (0..10).map(|c| c.to_string()).collect::<Vec<_>>());
    assert_eq!(ds.meta.params["latent"], 512);
    assert_eq!(ds.meta.params["encoder"], "vae");
}

#[test]
fn rewriting_reproduces_the_bytes() {
    let ds = read_dataset(&fixture()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.emc");
    write_dataset(&ds, &out).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(fixture()).unwrap());
}
