#![no_main]

use bethe_dos::config::McResultRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(record) = serde_json::from_str::<McResultRecord>(text) else { return };
    let json = serde_json::to_string(&record).expect("serializable");
    let back: McResultRecord = serde_json::from_str(&json).expect("re-parses");
    assert_eq!(back, record);
    let _ = record.mean_complex();
});
