#![no_main]

use flagtune::paramspace::parse_space;
use flagtune::runner::read_records;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let space = parse_space("x integer [0, 100] [0]\ny integer [0, 100] [0]").unwrap();
    if let Ok(records) = read_records(data) {
        for r in records {
            let _ = r.into_result(&space);
        }
    }
});
