//! Three independent realisations of the same memory term.
//!
//! For an exponential kernel g(s) = a exp(-b s) the convolution admits an
//! exact ODE reduction: z(t) = int_0^inf g(s) u(t-s) ds obeys
//! z' = a u - b z, so the memory becomes one extra field with no history
//! storage at all. A third route keeps the raw convolution and integrates
//! it by quadrature over stored displacement snapshots. All three must
//! produce the same displacement up to their respective discretization
//! errors, which makes the triad a strong cross-check: the history
//! transport, the reduction, and the quadrature share no code path.
//!
//! The runs start from the same pluck with a constant prescribed past and
//! are compared in the mass-weighted L2 norm, maximised over time.
//!
//! Run with:
//!
//! ```bash
//! cargo run --release --example formulation_triad
//! ```

use std::f64::consts::PI;
use viscowave::analysis::{max_l2_discrepancy, run_simulation, Formulation};
use viscowave::dynamics::{InitialData, Past, WaveSystem};
use viscowave::history::AgeGrid;
use viscowave::kernel::{Kernel, DEFAULT_TAIL_TOLERANCE};
use viscowave::mesh::{DiscreteOperators, Mesh};

const N_CELLS: usize = 64;
const S_NODES: usize = 64;
const T_FINAL: f64 = 2.0;
const DT: f64 = 1e-3;

fn main() {
    let kernel = Kernel::exponential(0.5, 1.0).unwrap();
    let ops = DiscreteOperators::assemble(Mesh::new(N_CELLS).unwrap());
    let s_max = kernel.support_radius(DEFAULT_TAIL_TOLERANCE);
    let grid = AgeGrid::geometric(&kernel, s_max, S_NODES).unwrap();
    let sys = WaveSystem::new(ops, kernel, grid);

    let u0 = sys.ops.mesh.interpolate(|x| (0.5 * PI * x).sin());
    let init = InitialData {
        u0,
        v0: nalgebra::DVector::zeros(sys.n_free()),
        past: Past::Constant,
    };

    let n_steps = (T_FINAL / DT).round() as usize;
    println!(
        "{} cells, {} age nodes, dt = {DT}, horizon T = {T_FINAL}",
        N_CELLS, S_NODES
    );
    let runs: Vec<_> = [
        Formulation::Dafermos,
        Formulation::Prony,
        Formulation::Convolution,
    ]
    .iter()
    .map(|&f| {
        let traj = run_simulation(&sys, f, DT, n_steps, &init, 1).unwrap();
        println!(
            "  {:?}: final energy {:.9e}, max energy increase {:.3e}",
            f,
            traj.records.last().unwrap().e_hilbert,
            traj.max_energy_increase
        );
        traj
    })
    .collect();

    println!();
    println!("max-in-time L2 displacement discrepancies");
    println!(
        "  history    vs reduction   {:.3e}",
        max_l2_discrepancy(&sys, &runs[0], &runs[1])
    );
    println!(
        "  history    vs convolution {:.3e}",
        max_l2_discrepancy(&sys, &runs[0], &runs[2])
    );
    println!(
        "  reduction  vs convolution {:.3e}",
        max_l2_discrepancy(&sys, &runs[1], &runs[2])
    );
}
