//! Finite-difference check of every layer's backward pass, in f64.
//!
//! ```bash
//! cargo run -p airpad-core --example gradient_check
//! ```

use airpad_core::nn::gradcheck::run_suite;

fn main() {
    let started = std::time::Instant::now();
    let reports = run_suite(0).expect("gradcheck");
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!("{status}  {:<26} {:.3e}  (tol {:.0e}, {} entries)", r.name, r.max_rel_error, r.tolerance, r.checked);
    }
    println!("{} checks in {:.2}s", reports.len(), started.elapsed().as_secs_f64());
    if reports.iter().any(|r| !r.passed()) {
        std::process::exit(1);
    }
}
