#![no_main]

use layerhom::expr::{Expr, VectorExpr};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(e) = Expr::parse(s) {
        let _ = e.eval([0.5, -0.25, 1.0], [0.1, 0.2, 0.3]);
        // the source text re-parses to the same expression
        assert_eq!(Expr::parse(e.source()).unwrap(), e);
    }
    let _ = serde_json::from_str::<VectorExpr>(s);
});
