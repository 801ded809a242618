//! Contact of Brockett with its cubic-drift copy, and what it implies for the
//! truncated flow expansions: equal up to order 2, different from order 4.

use chronoreach::perturb::{contact_flow_identity, random_rational_controls};
use chronoreach::polyalg::kth_contact;
use chronoreach::sysparse::parse_system;

fn main() -> chronoreach::Result<()> {
    let x = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let y = parse_system(include_str!("../../../corpus/brockett_cubic.ctrl"))?;
    let x0 = x.basepoint_or_origin();
    for k in 0..=4 {
        let contact = kth_contact(&x, &y, &x0, k)?;
        let controls = random_rational_controls(x.m(), 3, 8, k as u64);
        let r = contact_flow_identity(&x, &y, &x0, k, &controls)?;
        print!("k = {k}: contact {:<5} expansions ", contact.holds);
        match r.difference {
            None => println!("equal"),
            Some(d) => println!("differ at x{} coefficient of s^{:?}: {} vs {}", d.coordinate + 1, d.monomial, d.left, d.right),
        }
        if let Some(w) = contact.witness {
            println!("        first differing derivative: D^{:?} of X{} component {}", w.index, w.field, w.component + 1);
        }
    }

    // The chain system and its x1^58 copy agree to order 57.
    let c = parse_system(include_str!("../../../corpus/chain4.ctrl"))?;
    let cp = parse_system(include_str!("../../../corpus/chain4_perturbed.ctrl"))?;
    let origin = c.basepoint_or_origin();
    println!(
        "chain4: contact at 57 {}, at 58 {}",
        kth_contact(&c, &cp, &origin, 57)?.holds,
        kth_contact(&c, &cp, &origin, 58)?.holds
    );
    Ok(())
}
