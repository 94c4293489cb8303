//! Fuzzes the experiment-configuration parser: arbitrary bytes must never
//! panic, only produce a config or a structured error (both strict and
//! lenient modes).

#![no_main]

use libfuzzer_sys::fuzz_target;
use solitonlab::config::load_config_str;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = load_config_str(text, true);
        if let Ok((config, _)) = load_config_str(text, false) {
            // a successfully parsed config must echo into a reparsable one
            let echoed = config.echo();
            let _ = load_config_str(&echoed, false);
        }
    }
});
