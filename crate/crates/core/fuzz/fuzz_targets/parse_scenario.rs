#![no_main]

use flagtune::runner::ScenarioSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ScenarioSpec::from_toml_str(text, std::path::Path::new("."));
});
