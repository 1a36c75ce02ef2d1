#![no_main]
use libfuzzer_sys::fuzz_target;
use pcd_lab::harness::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let _ = cfg.validate();
        let again = ExperimentConfig::parse(&cfg.canonical()).expect("canonical form parses");
        assert_eq!(again.canonical(), cfg.canonical());
    }
});
