#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok((k, v)) = kacou::config::parse_override(s) {
            assert!(!k.is_empty());
            assert_eq!(v, v.trim());
        }
    }
});
