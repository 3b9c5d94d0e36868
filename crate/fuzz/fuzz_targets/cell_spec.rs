#![no_main]

use layerhom::geometry::{build_unit_cell, CellSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<CellSpec>(data) else { return };
    if let Ok(cell) = build_unit_cell(&spec) {
        assert!(cell.eta > 0.0);
        assert_eq!(cell.centers.len(), cell.inclusions.len());
    }
});
