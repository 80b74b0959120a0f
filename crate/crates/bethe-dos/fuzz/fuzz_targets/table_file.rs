#![no_main]

use bethe_dos::config::TableFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = serde_json::from_str::<TableFile>(text) else { return };
    // Reconstruction and re-serialization must never panic.
    let table = file.to_table();
    if let Ok(round) = TableFile::from_table(&table) {
        let json = serde_json::to_string(&round).expect("serializable");
        let back: TableFile = serde_json::from_str(&json).expect("re-parses");
        assert_eq!(back.to_table().max_order(), table.max_order());
    }
});
