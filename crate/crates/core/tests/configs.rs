use std::path::PathBuf;

use kato_lab::harness::{ExperimentConfig, ModeKind};

fn configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_load_and_resolve() {
    let all = configs();
    assert!(all.len() >= 3, "{all:?}");
    for p in all {
        let c = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        c.resolve().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn default_file_matches_built_in_defaults() {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let mut c = ExperimentConfig::load(&p).unwrap();
    assert_eq!(c.mode, ModeKind::Kato);
    c.output = ExperimentConfig::default().output;
    assert_eq!(c, ExperimentConfig::default());
}
