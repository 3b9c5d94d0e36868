#![no_main]

use layerhom::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    // accepted configs must survive a JSON round trip unchanged
    if let Ok(cfg) = ExperimentConfig::from_toml_str(s) {
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), cfg);
    }
});
