#![no_main]

use epr_core::states::StateSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(spec) = s.parse::<StateSpec>() {
            assert_eq!(spec.to_string().parse::<StateSpec>().ok(), Some(spec));
        }
    }
});
