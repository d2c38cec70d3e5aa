#![no_main]

use flagtune::paramspace::{parse_space, render_space};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(space) = parse_space(text) {
        let rendered = render_space(&space);
        let again = parse_space(&rendered).expect("rendered space parses");
        assert_eq!(rendered, render_space(&again));
        let _ = space.sample_random(0);
    }
});
