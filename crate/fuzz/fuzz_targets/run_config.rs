#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // the last line doubles as an override so both entry points are exercised
    let (body, last) = text.rsplit_once('\n').unwrap_or((text, ""));
    let overrides: Vec<String> = if last.contains('=') { vec![last.to_string()] } else { Vec::new() };
    let _ = kacou::config::RunConfig::from_text(body, &overrides);
});
