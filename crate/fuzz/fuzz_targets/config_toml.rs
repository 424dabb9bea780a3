#![no_main]

use libfuzzer_sys::fuzz_target;
use scop::pipeline::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::from_toml_str(text) {
        assert_eq!(ExperimentConfig::from_toml_str(&config.to_toml()).unwrap(), config);
    }
});
