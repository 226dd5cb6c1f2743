//! Runs acceptance criteria A1-A9, prints one PASS/FAIL line each, and
//! exits non-zero if any failed.

use std::time::Instant;

use punctura_validation::*;

fn report(name: &'static str, o: Outcome, results: &mut Vec<(&'static str, Outcome)>) {
    println!("{name} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    results.push((name, o));
}

fn main() {
    let mut results: Vec<(&'static str, Outcome)> = Vec::new();

    let t = Instant::now();
    let curve = circle_curve();
    let spectrum = circle_spectrum(&curve);
    let secs = t.elapsed().as_secs_f64();
    report("A1", a1(&curve, &spectrum, secs), &mut results);
    report("A2", a2(&curve, &spectrum), &mut results);

    let t = Instant::now();
    let (_, circle_sweep) = run_sweep(CIRCLE, 5.0, 5);
    report("A3", a3(&circle_sweep, t.elapsed().as_secs_f64()), &mut results);

    let (_, broken_sweep) = run_sweep(BROKEN, 1.0, 5);
    report("A4", a4(&broken_sweep), &mut results);
    report("A5", a5(), &mut results);
    report("A6", a6(&curve, &spectrum), &mut results);
    report("A7", a7(&curve, &spectrum), &mut results);
    report("A8", a8((&curve, &spectrum), &[&circle_sweep, &broken_sweep]), &mut results);
    report("A9", a9(), &mut results);

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: {} of {} criteria fail: {}", failed.len(), results.len(), failed.join(", "));
        std::process::exit(1);
    }
}
