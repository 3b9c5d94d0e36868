#![no_main]

use layerhom::harness::ConvergenceReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = ConvergenceReport::from_json(s) {
        let _ = r.to_csv();
        let _ = r.passed();
    }
});
