//! The memoryless limit conserves energy exactly.
//!
//! With g identically zero the history variables vanish, the dissipation
//! functional is zero, and the system degenerates to the plain wave
//! equation with a tip mass,
//!
//! ```text
//! u_tt - u_xx = 0,    u(0) = 0,    u_tt(1) = -u_x(1),
//! ```
//!
//! whose energy 1/2 (|u_x|^2 + |u_t|^2 + w^2) is a constant of motion. The
//! implicit midpoint rule conserves quadratic invariants, so the discrete
//! energy drift over any horizon should sit at the round-off floor. This
//! is the sharpest available test of the stepper: any leakage in the
//! resolvent elimination or the boundary coupling shows up as drift.
//!
//! Run with:
//!
//! ```bash
//! cargo run --release --example conservative_limit
//! ```

use std::f64::consts::PI;
use viscowave::analysis::{run_simulation, Formulation};
use viscowave::dynamics::{InitialData, Past, WaveSystem};
use viscowave::history::AgeGrid;
use viscowave::kernel::Kernel;
use viscowave::mesh::{DiscreteOperators, Mesh};

const N_CELLS: usize = 64;
const T_FINAL: f64 = 20.0;

fn main() {
    let kernel = Kernel::zero();
    let ops = DiscreteOperators::assemble(Mesh::new(N_CELLS).unwrap());
    let grid = AgeGrid::empty();
    let sys = WaveSystem::new(ops, kernel, grid);

    let u0 = sys.ops.mesh.interpolate(|x| (0.5 * PI * x).sin());
    let v0 = sys.ops.mesh.interpolate(|x| 0.3 * (1.5 * PI * x).sin());
    let init = InitialData {
        u0,
        v0,
        past: Past::Zero,
    };

    let dt = 0.5 / N_CELLS as f64;
    let n_steps = (T_FINAL / dt).round() as usize;
    let traj = run_simulation(&sys, Formulation::Dafermos, dt, n_steps, &init, 64).unwrap();

    let e0 = traj.records[0].e_hilbert;
    let drift = traj
        .records
        .iter()
        .map(|r| (r.e_hilbert - e0).abs())
        .fold(0.0, f64::max);

    println!("zero kernel, {} cells, dt = {dt}, horizon T = {T_FINAL}", N_CELLS);
    println!();
    println!("{:>8} {:>20} {:>14}", "t", "E(t)", "E(t) - E(0)");
    for record in traj.records.iter().step_by(traj.records.len() / 10) {
        println!(
            "{:8.2} {:20.15} {:14.3e}",
            record.t,
            record.e_hilbert,
            record.e_hilbert - e0
        );
    }
    println!();
    println!("relative energy drift            {:.3e}", drift / e0);
    println!("max single-step energy increase  {:.3e}", traj.max_energy_increase);
}
