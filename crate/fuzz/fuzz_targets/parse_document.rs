#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doc) = kacou::config::parse_document(text) {
            // the canonical form must parse back to the same document
            let again = kacou::config::parse_document(&doc.canonical()).expect("canonical text parses");
            assert_eq!(again.canonical(), doc.canonical());
        }
    }
});
