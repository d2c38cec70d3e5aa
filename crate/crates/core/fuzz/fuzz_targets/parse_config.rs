#![no_main]

use flagtune::paramspace::parse_space;
use libfuzzer_sys::fuzz_target;

const SPACE: &str = "\
solver {cdcl, dpll} [cdcl]
restarts integer [0, 1000] [100]
decay real [0.5, 0.999] [0.95]
luby {true, false} [false]
step real [0.001, 10] [1] log
luby | solver in {cdcl}
{solver=dpll, restarts=0}
";

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let space = parse_space(SPACE).unwrap();
    if let Ok(c) = space.parse_config(text) {
        assert_eq!(space.parse_config(&c.canonical()).unwrap(), c);
    }
});
