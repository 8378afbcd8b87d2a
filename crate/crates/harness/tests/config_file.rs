use std::path::{Path, PathBuf};

use dcop_harness::config::{ExperimentConfig, Settings};

fn shipped() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

#[test]
fn shipped_config_spells_out_the_defaults() {
    let file = Settings::from_file(&shipped()).unwrap();
    let resolved = ExperimentConfig::resolve(file, Settings::default(), None).unwrap();
    assert_eq!(resolved, ExperimentConfig::default());
}

#[test]
fn flags_win_over_the_shipped_file() {
    let file = Settings::from_file(&shipped()).unwrap();
    let flags = Settings { runs: Some(3), pf: Some(0.3), ..Settings::default() };
    let resolved = ExperimentConfig::resolve(file, flags, Some(PathBuf::from("elsewhere"))).unwrap();
    assert_eq!(resolved.runs, 3);
    assert_eq!(resolved.strategy.pf, 0.3);
    assert_eq!(resolved.out, PathBuf::from("elsewhere"));
}
