//! Acceptance gate: one test per behavioural guarantee of the laboratory,
//! each printing a single PASS/FAIL line with the measured values.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscowave::analysis::{
    certify, eigen_certificate, fit_decay, real_eigenvector, resolvent_dense, resolvent_reduced,
    resolvent_sweep, run_history_from_state, run_simulation, to_complex, Formulation, Verdict,
};
use viscowave::dynamics::{InitialData, Past, State, WaveSystem};
use viscowave::history::{AgeGrid, HistoryField};
use viscowave::kernel::Kernel;
use viscowave::mesh::{DiscreteOperators, Mesh};

fn gate(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn fmt_exp(v: &[f64]) -> String {
    let body: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", body.join(", "))
}

fn fmt_fix(v: &[f64]) -> String {
    let body: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", body.join(", "))
}

fn system(n_cells: usize, kernel: Kernel, k_nodes: usize) -> WaveSystem {
    let ops = DiscreteOperators::assemble(Mesh::new(n_cells).unwrap());
    let s_max = kernel.support_radius(1e-8);
    let grid = AgeGrid::geometric(&kernel, s_max, k_nodes).unwrap();
    WaveSystem::new(ops, kernel, grid)
}

fn random_state(sys: &WaveSystem, rng: &mut impl Rng) -> State {
    let n = sys.n_free();
    State {
        u: DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5),
        v: DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5),
        eta: HistoryField {
            levels: (0..sys.grid.len())
                .map(|_| DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5))
                .collect(),
        },
    }
}

fn sine_displacement(sys: &WaveSystem) -> InitialData {
    InitialData {
        u0: sys
            .ops
            .mesh
            .interpolate(|x| (0.5 * std::f64::consts::PI * x).sin()),
        v0: DVector::zeros(sys.n_free()),
        past: Past::Zero,
    }
}

fn sine_impulse(sys: &WaveSystem) -> InitialData {
    InitialData {
        u0: DVector::zeros(sys.n_free()),
        v0: sys
            .ops
            .mesh
            .interpolate(|x| (0.5 * std::f64::consts::PI * x).sin()),
        past: Past::Zero,
    }
}

/// The discrete generator is dissipative in the phase-space inner product:
/// Re <A V, V>_H <= 0 up to roundoff, for arbitrary states.
#[test]
fn criterion_1_generator_dissipativity() {
    let sys = system(32, Kernel::exponential(0.5, 1.0).unwrap(), 64);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let x = random_state(&sys, &mut rng);
        let rate = sys.h_inner(&sys.derivative(&x), &x) / sys.h_norm_sq(&x);
        worst = worst.max(rate);
    }
    gate(
        "1 (generator dissipativity)",
        worst <= 1e-12,
        &format!("max Re<AV,V>/|V|^2 over 100 random states = {worst:.3e}, tolerance 1e-12"),
    );
}

/// A damped run keeps the phase-space energy nonincreasing at every step,
/// never violates the energy balance upward beyond 1e-6, and the balance
/// residual magnitude (the age-grid resolution error) at least halves per
/// simultaneous (dt, age-node) refinement.
///
/// The run starts from a velocity impulse: with a quiescent past the history
/// field then grows smoothly in age, so the upwind jump terms shrink with the
/// age resolution. A displacement start with a quiescent past instead carries
/// an order-one front at age zero whose jump terms no refinement removes.
///
/// Each refinement level halves dt and quadruples the age-node count: the
/// balance residual is first order in the age resolution and second order in
/// dt, so this schedule shrinks both error components by the same factor.
#[test]
fn criterion_2_energy_audit_and_refinement() {
    let kernel = Kernel::exponential(0.5, 1.0).unwrap();
    let n_cells = 64;
    let base_dt = 0.5 / n_cells as f64;
    let t_final = 20.0;
    let mut increases = Vec::new();
    let mut violations = Vec::new();
    let mut residuals = Vec::new();
    let mut e0 = 0.0;
    for (level, (dt_div, k_nodes)) in [(1, 64), (2, 256), (4, 1024)].into_iter().enumerate() {
        let sys = system(n_cells, kernel.clone(), k_nodes);
        let dt = base_dt / dt_div as f64;
        let n_steps = (t_final / dt).round() as usize;
        let traj = run_simulation(
            &sys,
            Formulation::Dafermos,
            dt,
            n_steps,
            &sine_impulse(&sys),
            n_steps,
        )
        .unwrap();
        if level == 0 {
            e0 = traj.initial_energy;
        }
        increases.push(traj.max_energy_increase);
        violations.push(traj.max_residual_violation);
        residuals.push(traj.max_abs_residual);
    }
    let monotone = increases.iter().all(|&i| i <= 1e-12 * e0);
    let bounded = violations.iter().all(|&v| v <= 1e-6);
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let converging = ratios.iter().all(|&r| r >= 2.0);
    gate(
        "2 (energy audit and refinement)",
        monotone && bounded && converging,
        &format!(
            "max energy increase {} (tol 1e-12 rel), max residual violation {} (tol 1e-6), |residual| per level {}, decrease ratios {} (required >= 2)",
            fmt_exp(&increases),
            fmt_exp(&violations),
            fmt_exp(&residuals),
            fmt_fix(&ratios)
        ),
    );
}

/// With the kernel removed the implicit midpoint rule conserves the
/// phase-space energy to relative 1e-10 over 1000 steps.
#[test]
fn criterion_3_conservative_limit() {
    let sys = system(32, Kernel::zero(), 0);
    let dt = 0.5 * sys.ops.mesh.h;
    let stepper = sys.stepper(dt).unwrap();
    let mut x = sine_displacement(&sys).state(&sys.grid);
    let e0 = sys.energies(&x).hilbert;
    let mut drift = 0.0_f64;
    for _ in 0..1000 {
        x = stepper.step(&x).unwrap();
        drift = drift.max((sys.energies(&x).hilbert - e0).abs() / e0);
    }
    gate(
        "3 (conservative limit)",
        drift <= 1e-10,
        &format!("max relative energy drift over 1000 undamped steps = {drift:.3e}, tolerance 1e-10"),
    );
}

/// The three memory formulations integrate the same dynamics: the history
/// formulation stays within 1e-3 of the other two (its age quadrature is the
/// only first-order ingredient), and the exponential reduction agrees with
/// the direct convolution to 1e-6.
#[test]
fn criterion_4_formulation_triad() {
    let sys = system(64, Kernel::exponential(0.5, 1.0).unwrap(), 128);
    let dt = 1e-3;
    let n_steps = 5000;
    let init = sine_impulse(&sys);
    let daf = run_simulation(&sys, Formulation::Dafermos, dt, n_steps, &init, n_steps).unwrap();
    let pro = run_simulation(&sys, Formulation::Prony, dt, n_steps, &init, n_steps).unwrap();
    let con = run_simulation(&sys, Formulation::Convolution, dt, n_steps, &init, n_steps).unwrap();
    let l2 = |a: &DVector<f64>, b: &DVector<f64>| {
        let d = a - b;
        sys.ops.mass_product(&d, &d).sqrt()
    };
    let mut d_dp = 0.0_f64;
    let mut d_dc = 0.0_f64;
    let mut d_pc = 0.0_f64;
    for i in 0..daf.displacements.len() {
        d_dp = d_dp.max(l2(&daf.displacements[i], &pro.displacements[i]));
        d_dc = d_dc.max(l2(&daf.displacements[i], &con.displacements[i]));
        d_pc = d_pc.max(l2(&pro.displacements[i], &con.displacements[i]));
    }
    gate(
        "4 (formulation triad)",
        d_dp <= 1e-3 && d_dc <= 1e-3 && d_pc <= 1e-6,
        &format!(
            "max L2 discrepancy history/reduction {d_dp:.3e} (tol 1e-3), history/convolution {d_dc:.3e} (tol 1e-3), reduction/convolution {d_pc:.3e} (tol 1e-6)"
        ),
    );
}

/// The fitted energy decay rate matches the spectral abscissa of the same
/// discretization within 20%, across three kernel masses. When the rightmost
/// eigenvalue sits on an oscillatory wave pair, a smooth displacement release
/// reaches its rate directly; at large kernel mass the abscissa moves onto
/// the real overdamped memory branch, which smooth data leaves essentially
/// unexcited, so that trajectory is seeded with the rightmost eigenvector
/// itself.
#[test]
fn criterion_5_decay_rate_vs_abscissa() {
    let mut detail = String::new();
    let mut pass = true;
    for g0 in [0.25, 0.5, 0.75] {
        let sys = system(16, Kernel::exponential(g0, 1.0).unwrap(), 32);
        let dt = 0.5 * sys.ops.mesh.h;
        let n_steps = (40.0 / dt).round() as usize;
        let generator = sys.generator();
        let eig = eigen_certificate(&generator).unwrap();
        let rightmost_is_real = eig.eigenvalues[0][1].abs() <= 1e-8 * (1.0 + eig.abscissa.abs());
        let traj = if rightmost_is_real {
            let mode = real_eigenvector(&generator, eig.abscissa).unwrap();
            run_history_from_state(&sys, sys.unflatten(&mode), dt, n_steps, 1).unwrap()
        } else {
            run_simulation(
                &sys,
                Formulation::Dafermos,
                dt,
                n_steps,
                &sine_displacement(&sys),
                1,
            )
            .unwrap()
        };
        let fit = fit_decay(&traj.records).unwrap();
        let gamma_spec = -eig.abscissa;
        let rel = (fit.gamma - gamma_spec).abs() / gamma_spec;
        let ok = fit.gamma > 0.0 && fit.r_squared >= 0.95 && eig.abscissa < 0.0 && rel <= 0.2;
        pass &= ok;
        detail.push_str(&format!(
            "[g0={g0}{}: gamma_fit={:.4e}, r2={:.4}, abscissa={:.4e}, rel dev={:.3}] ",
            if rightmost_is_real { " (mode-seeded)" } else { "" },
            fit.gamma,
            fit.r_squared,
            eig.abscissa,
            rel
        ));
    }
    gate(
        "5 (decay rate vs abscissa)",
        pass,
        &format!("{detail}(require gamma>0, r2>=0.95, abscissa<0, deviation<=0.2)"),
    );
}

/// Frequency-domain machinery: the spectrum keeps a positive distance from
/// the imaginary axis, the weighted resolvent sweep is finite and symmetric
/// under beta -> -beta, and the elimination-based resolvent agrees with the
/// dense solve on random data at three abscissas.
#[test]
fn criterion_6_frequency_domain() {
    let small = system(12, Kernel::exponential(0.5, 1.0).unwrap(), 24);
    let report = certify(&small, None, 24, 3).unwrap();
    let margin_ok = report.eigen.axis_distance > 1e-8 && report.verdict == Verdict::Stable;
    let finite_ok = report.sweep.sup_r.is_finite();
    let m = report.sweep.betas.len();
    let mut sym_dev = 0.0_f64;
    for i in 0..m / 2 {
        let r_neg = report.sweep.r_values[i];
        let r_pos = report.sweep.r_values[m - 1 - i];
        sym_dev = sym_dev.max((r_neg - r_pos).abs() / r_pos.max(1e-300));
    }
    let sym_ok = sym_dev <= 1e-10;

    let sys = system(16, Kernel::exponential(0.5, 1.0).unwrap(), 32);
    let a_c = to_complex(&sys.generator());
    let dim = sys.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut max_rel = 0.0_f64;
    for i in 0..50 {
        let re = [0.0, 0.5, 1.0][i % 3];
        let im = 40.0 * (rng.gen::<f64>() - 0.5);
        let lambda = Complex64::new(re, im);
        let f = DVector::from_fn(dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let dense = resolvent_dense(&a_c, lambda, &f).unwrap();
        let reduced = resolvent_reduced(&sys, lambda, &f).unwrap();
        max_rel = max_rel.max((&dense - &reduced).norm() / dense.norm());
    }
    let solve_ok = max_rel <= 1e-8;

    gate(
        "6 (frequency domain)",
        margin_ok && finite_ok && sym_ok && solve_ok,
        &format!(
            "axis distance {:.3e} (require > 1e-8), sup r(beta) {:.3e} finite, sweep symmetry deviation {sym_dev:.3e} (tol 1e-10), dense-vs-reduced resolvent max rel {max_rel:.3e} over 50 draws (tol 1e-8)",
            report.eigen.axis_distance, report.sweep.sup_r
        ),
    );
}

/// The kernel admissibility gate: an exponential kernel passes, a
/// polynomially decaying kernel fails with the violated bound named, and the
/// zero kernel passes with full residual stiffness.
#[test]
fn criterion_7_kernel_gate() {
    let exp_pass = Kernel::exponential(0.5, 1.0).unwrap().verify_assumptions().pass;

    let s: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
    let g: Vec<f64> = s.iter().map(|&x| 0.5 / (1.0 + x).powi(2)).collect();
    let poly = Kernel::from_samples(s, g, 0.1, 3.0).unwrap();
    let poly_report = poly.verify_assumptions();
    let poly_fails_decay = !poly_report.pass
        && poly_report.checks.iter().any(|c| {
            c.name == "decay pinching" && !c.pass && c.detail.contains("lower bound violated")
        });

    let zero = Kernel::zero();
    let zero_report = zero.verify_assumptions();
    let zero_ok = zero_report.pass && zero.ell == 1.0;

    gate(
        "7 (kernel admissibility gate)",
        exp_pass && poly_fails_decay && zero_ok,
        &format!(
            "exponential pass = {exp_pass}, polynomial kernel rejected naming the bound = {poly_fails_decay}, zero kernel pass with ell = 1: {zero_ok}"
        ),
    );
}

/// Spatial convergence: the discrete elastic energy of the interpolated
/// quarter-wave eigenfunction converges to pi^2/8 at second order (error
/// drops about fourfold per mesh halving).
#[test]
fn criterion_8_elastic_energy_convergence() {
    let exact = std::f64::consts::PI * std::f64::consts::PI / 8.0;
    let errs: Vec<f64> = [16usize, 32, 64, 128]
        .iter()
        .map(|&n| {
            let ops = DiscreteOperators::assemble(Mesh::new(n).unwrap());
            let u = ops
                .mesh
                .interpolate(|x| (0.5 * std::f64::consts::PI * x).sin());
            (ops.stiffness_product(&u, &u) - exact).abs()
        })
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|&r| (3.8..=4.2).contains(&r));
    gate(
        "8 (elastic energy convergence)",
        ok,
        &format!(
            "errors {}, halving ratios {} (required within [3.8, 4.2])",
            fmt_exp(&errs),
            fmt_fix(&ratios)
        ),
    );
}

/// Keeping the resolvent sweep helper honest: it exists as a standalone
/// entry point used by the certificate above.
#[test]
fn sweep_entry_point_is_consistent_with_certificate() {
    let sys = system(8, Kernel::exponential(0.5, 1.0).unwrap(), 12);
    let a = sys.generator();
    let eig = eigen_certificate(&a).unwrap();
    let sweep = resolvent_sweep(&sys, &a, (5.0 * eig.max_imag).max(1.0), 12, 1).unwrap();
    assert!(sweep.sup_r.is_finite());
    assert!(sweep.n_evaluations >= 25);
}
