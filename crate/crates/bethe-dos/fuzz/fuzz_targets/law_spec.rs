#![no_main]

use bethe_dos::config::LawSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = serde_json::from_str::<LawSpec>(text) else { return };
    // Conversion must never panic, only return errors.
    if let Ok(law) = spec.to_law() {
        // Emitted JSON must re-parse to the same spec.
        let round = LawSpec::from_law(&law);
        let json = serde_json::to_string(&round).expect("serializable");
        let back: LawSpec = serde_json::from_str(&json).expect("re-parses");
        assert_eq!(back, round);
    }
});
