//! Admissibility gate for relaxation kernels.
//!
//! A kernel g drives a well-posed, exponentially stable problem when
//!
//! ```text
//! g >= 0,    ell = 1 - int_0^inf g(s) ds > 0,    -zeta1 g <= g' <= -zeta0 g
//! ```
//!
//! for some 0 < zeta0 <= zeta1. The two-sided pinching forces exponential
//! decay of the kernel itself and is what makes the memory term strictly
//! dissipative. This example runs the gate on three candidates: an
//! exponential kernel (always admissible once a, b > 0 and a/b < 1), a
//! tabulated kernel whose samples actually decay like exp(-s), and a
//! tabulated polynomial tail 1/(1+s)^3 whose logarithmic slope -3/(1+s)
//! flattens with s and must fail the lower pinching bound.
//!
//! Run with:
//!
//! ```bash
//! cargo run --release --example verify_kernel
//! ```

use viscowave::kernel::Kernel;

fn report(label: &str, kernel: &Kernel) {
    let report = kernel.verify_assumptions();
    println!("{label}");
    println!(
        "  g0 = {:.6}, ell = {:.6}, zeta0 = {}, zeta1 = {}",
        report.g0, report.ell, report.zeta0, report.zeta1
    );
    for check in &report.checks {
        let mark = if check.pass { "pass" } else { "FAIL" };
        println!("  [{mark}] {:<24} {}", check.name, check.detail);
    }
    println!(
        "  => {}",
        if report.pass { "admissible" } else { "not admissible" }
    );
    println!();
}

fn main() {
    let exponential = Kernel::exponential(0.5, 1.0).unwrap();
    report("exponential kernel g(s) = 0.5 exp(-s)", &exponential);

    let s: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
    let g: Vec<f64> = s.iter().map(|&x| 0.4 * (-x).exp()).collect();
    let tabulated = Kernel::from_samples(s, g, 0.9, 1.1).unwrap();
    report("tabulated samples of 0.4 exp(-s)", &tabulated);

    let s: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
    let g: Vec<f64> = s.iter().map(|&x| 0.8 / (1.0 + x).powi(3)).collect();
    let polynomial = Kernel::from_samples(s, g, 0.5, 3.0).unwrap();
    report("tabulated polynomial tail 0.8 / (1+s)^3", &polynomial);
}
