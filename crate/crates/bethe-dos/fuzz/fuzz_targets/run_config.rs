#![no_main]

use bethe_dos::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = serde_json::from_str::<RunConfig>(text) else { return };
    // Overlay and resolution must never panic, only return errors.
    let overlaid = config.clone().overlay(RunConfig::default());
    assert_eq!(overlaid, config);
    let _ = config.resolve();
});
