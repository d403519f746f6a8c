//! Crossing codes through cancellation and knot detection, including the
//! fake knots that only cancellation exposes as trivial.

use dlo_trace::topology::{cancel_crossings, detect_knots, TopologyState};

fn main() {
    for code in ["U1 O2 U3 O1 U2 O3", "O1 U1 U2 O3 U4 O2 U3 O4", "U1 O2 O3 O1 U2 U3", "U1 U2 O2 O1"] {
        let raw = TopologyState::from_code(code).expect("valid code");
        let simple = cancel_crossings(&raw);
        let knots = detect_knots(&simple);
        let uncancelled = detect_knots(&raw);
        println!(
            "{code:26} -> {:20} knots {} (without cancellation {})",
            if simple.is_empty() { "(empty)".to_string() } else { simple.code() },
            knots.len(),
            uncancelled.len()
        );
    }
}
