#![no_main]

use epr_core::ingest::{parse_count_table, write_count_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Anything that parses must survive a write/parse cycle unchanged.
    if let Ok(table) = parse_count_table(data) {
        let text = write_count_table(&table);
        let again = parse_count_table(text.as_bytes()).expect("writer output parses");
        assert_eq!(again, table);
        let _ = table.to_physical_distribution();
    }
});
