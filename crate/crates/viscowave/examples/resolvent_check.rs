//! Reduced resolvent against the dense one.
//!
//! The stepper and the axis sweep never factor the full (2+K) n state
//! matrix. The age recursion of (lambda I - A) V = F is eliminated level
//! by level, which condenses everything onto one complex n x n boundary
//! problem in u; v and the history levels are recovered afterwards. This
//! example applies both the dense LU solve and the eliminated solve to the
//! same right-hand sides over a range of shifts lambda and reports the
//! worst relative deviation, which should sit at the round-off floor.
//!
//! Run with:
//!
//! ```bash
//! cargo run --release --example resolvent_check
//! ```

use nalgebra::DVector;
use num_complex::Complex64;
use viscowave::analysis::{resolvent_dense, resolvent_reduced, to_complex};
use viscowave::dynamics::WaveSystem;
use viscowave::history::AgeGrid;
use viscowave::kernel::{Kernel, DEFAULT_TAIL_TOLERANCE};
use viscowave::mesh::{DiscreteOperators, Mesh};

const N_CELLS: usize = 24;
const S_NODES: usize = 24;

fn main() {
    let kernel = Kernel::exponential(0.4, 0.8).unwrap();
    let ops = DiscreteOperators::assemble(Mesh::new(N_CELLS).unwrap());
    let s_max = kernel.support_radius(DEFAULT_TAIL_TOLERANCE);
    let grid = AgeGrid::geometric(&kernel, s_max, S_NODES).unwrap();
    let sys = WaveSystem::new(ops, kernel, grid);

    let dim = sys.state_dim();
    let a_c = to_complex(&sys.generator());
    let f = DVector::from_fn(dim, |i, _| {
        let t = i as f64;
        Complex64::new((0.7 * t).sin(), (1.3 * t + 0.4).cos())
    });

    let shifts = [
        Complex64::new(2.0, 0.0),
        Complex64::new(0.5, 1.0),
        Complex64::new(0.0, 4.0),
        Complex64::new(0.0, -25.0),
        Complex64::new(1e-3, 0.3),
        Complex64::new(40.0, 0.0),
    ];

    println!("state dimension {dim}; solving (lambda I - A) x = f both ways");
    println!();
    println!("{:>22} {:>16} {:>14}", "lambda", "|x|", "rel deviation");
    let mut worst = 0.0_f64;
    for &lambda in &shifts {
        let dense = resolvent_dense(&a_c, lambda, &f).unwrap();
        let reduced = resolvent_reduced(&sys, lambda, &f).unwrap();
        let dev = (&dense - &reduced).norm() / dense.norm();
        worst = worst.max(dev);
        println!(
            "{:>10.3} {:+10.3}i {:16.6e} {:14.3e}",
            lambda.re,
            lambda.im,
            dense.norm(),
            dev
        );
    }
    println!();
    println!("worst relative deviation {worst:.3e}");
}
