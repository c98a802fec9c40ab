//! One line per acceptance criterion. Run with `--nocapture` to see them.

use std::time::Instant;

use radkernel::checks::{self, all_pass, Check};
use radkernel::grid::Dimension;

fn report(id: usize, title: &str, checks: &[Check]) -> bool {
    let ok = all_pass(checks);
    let detail: Vec<String> =
        checks.iter().map(|c| format!("{}={:.3e}{}", c.name, c.value, if c.passed { "" } else { "!" })).collect();
    println!("criterion {id:>2}: {} {title} [{}]", if ok { "PASS" } else { "FAIL" }, detail.join(", "));
    ok
}

#[test]
fn acceptance() {
    let mut rng = checks::rng(2024);
    let mut ok = true;

    let start = Instant::now();
    let mut c1 = checks::round_trip_check().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    c1.push(Check::at_most("runtime_s", elapsed, 10.0));
    ok &= report(1, "radial round trip", &c1);

    ok &= report(2, "integration-by-parts identity", &[checks::ibp_identity_check(&mut rng, 20, 201).unwrap()]);
    ok &= report(3, "exponential identity", &checks::exp_identity_check(&mut rng, 20, 201).unwrap());
    ok &= report(4, "contraction", &checks::contraction_check(&mut rng, 10, 32).unwrap());
    ok &= report(5, "time march vs Picard", &[checks::cross_method_check(32).unwrap()]);
    ok &= report(6, "coefficient invariants", &checks::coefficient_checks(&mut rng, None, 10_000).unwrap());
    ok &= report(7, "decomposition order", &checks::decomposition_check(&mut rng, 5, &[16, 32, 64]).unwrap());

    let mut c8 = checks::k0_check(Dimension::Two, &[8, 16, 32]).unwrap();
    c8.extend(checks::k0_check(Dimension::Three, &[8, 16, 32]).unwrap());
    ok &= report(8, "initial kernel", &c8);

    ok &= report(9, "forward solver", &checks::forward_checks().unwrap());
    ok &= report(10, "annihilation", &checks::annihilation_check(&mut rng, 10, 12).unwrap());

    assert!(ok, "at least one acceptance criterion failed");
}
