#![no_main]

use flagtune::paramspace::parse_space;
use flagtune::runner::CommandTemplate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let space = parse_space("x integer [0, 10] [3]\nm {a, b} [a]\nx | m in {a}").unwrap();
    if let Ok(t) = CommandTemplate::parse(text) {
        if t.check_against(&space).is_ok() {
            let _ = t.render(&space.default_config(), "inst", 7);
        }
    }
});
