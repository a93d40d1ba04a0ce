use uplift_core::harness::BaseFamily;
use uplift_core::{ExperimentConfig, LearnerKind, Setting};

/// Keeps the config example in the README parseable.
#[test]
fn readme_config_example_parses() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + 8;
    let end = start + readme[start..].find("```").unwrap();
    let cfg = ExperimentConfig::from_toml_str(&readme[start..end]).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.settings, vec![Setting::A, Setting::B]);
    assert_eq!(cfg.models.len(), LearnerKind::ALL.len());
    assert_eq!(cfg.base_family, BaseFamily::Gbdt);
    assert_eq!(cfg.knobs_for(Setting::A), vec![0.8, 1.6, 2.4]);
    assert_eq!(cfg.knobs_for(Setting::B), vec![0.4, 0.5, 0.6]);
}
