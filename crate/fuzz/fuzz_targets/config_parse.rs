#![no_main]

use libfuzzer_sys::fuzz_target;
use nlmc_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = ExperimentConfig::from_toml(text, ".") else { return };
    let again = ExperimentConfig::from_toml(&cfg.to_toml(), ".").expect("printed config parses");
    assert_eq!(cfg, again);
});
