#![no_main]

use bethe_dos::config::WindowSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = serde_json::from_str::<WindowSpec>(text) else { return };
    if let Ok(window) = spec.to_window() {
        let round = WindowSpec::from_window(&window);
        let json = serde_json::to_string(&round).expect("serializable");
        let back: WindowSpec = serde_json::from_str(&json).expect("re-parses");
        assert_eq!(back, round);
        // Basic geometry must hold for any accepted window.
        assert!(window.delta() < window.delta0());
        assert!(window.eta_length() > 0.0);
    }
});
