//! Parses every corpus file, validates it and checks that the canonical
//! rendering parses back to the same system.

use chronoreach::sysparse::{parse_system, serialize_system};

const CORPUS: [(&str, &str); 6] = [
    ("exp1d", include_str!("../../../corpus/exp1d.ctrl")),
    ("double_integrator", include_str!("../../../corpus/double_integrator.ctrl")),
    ("brockett", include_str!("../../../corpus/brockett.ctrl")),
    ("brockett_cubic", include_str!("../../../corpus/brockett_cubic.ctrl")),
    ("chain4", include_str!("../../../corpus/chain4.ctrl")),
    ("chain4_perturbed", include_str!("../../../corpus/chain4_perturbed.ctrl")),
];

fn main() -> chronoreach::Result<()> {
    for (file, text) in CORPUS {
        let sys = parse_system(text)?;
        let canonical = serialize_system(&sys);
        let again = parse_system(&canonical)?;
        println!(
            "{file:<18} n = {}, m = {}, round trip {}",
            sys.dim(),
            sys.m(),
            if again == sys && serialize_system(&again) == canonical { "ok" } else { "CHANGED" }
        );
    }

    println!("\ncanonical form of brockett_cubic:\n{}", serialize_system(&parse_system(CORPUS[3].1)?));

    // Errors carry a position.
    let bad = "system broken\ndim 2\ncontrols 1\nX0 = [x1, x3]\nX1 = [1, 0]\n";
    match parse_system(bad) {
        Err(e) => println!("malformed input: {e}"),
        Ok(_) => unreachable!("x3 is out of range in dimension 2"),
    }
    Ok(())
}
