//! The coupled first-order system V = (u, v, eta), its phase-space geometry,
//! and the time integrators.
//!
//! Semi-discrete equations (K the constrained stiffness, M~ the consistent
//! mass plus the unit tip mass, w_k / ds_k the age-grid weights and cells):
//!
//! ```text
//! du/dt      = v
//! M~ dv/dt   = -ell K u - sum_k w_k K eta_k
//! deta_k/dt  = v - (eta_k - eta_{k-1}) / ds_k,        eta_0 = 0
//! ```
//!
//! The boundary row of the v equation is Newton's law for the tip mass under
//! the memory-consistent flux; no separate boundary unknown is needed because
//! the trace of v carries the point mass inside M~.
//!
//! The phase-space inner product is
//! `ell (K u1, u2) + (M~ v1, v2) + sum_k w_k (K eta1_k, eta2_k)`; against it
//! the generator satisfies, exactly,
//!
//! ```text
//! <A V, V>_H = (1/2) sum_k w'_k |eta_k|_K^2  -  (1/2) sum_k (w_k/ds_k) |eta_k - eta_{k-1}|_K^2
//! ```
//!
//! with the summation-by-parts g'-weights w'_k <= 0, so every state is
//! dissipated: the first term is the discrete memory dissipation, the second
//! the extra damping of the upwind derivative.
//!
//! Time stepping is the implicit midpoint rule, realised as a resolvent
//! application: (I - dt/2 A) V+ = (I + dt/2 A) V is equivalent to
//! V+ = 2 lambda (lambda I - A)^{-1} V - V with lambda = 2/dt, and the
//! resolvent solve reduces to an n_u x n_u system after eliminating v and the
//! history levels (see [`ReducedResolvent`]). The same elimination, run over
//! complex scalars, is the frequency-domain solver used by the analysis
//! module.

use crate::error::{Error, Result};
use crate::history::{AgeGrid, HistoryField};
use crate::kernel::Kernel;
use crate::mesh::DiscreteOperators;
use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn};
use num_complex::Complex64;

/// State of the first-order system.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub eta: HistoryField,
}

impl State {
    pub fn zeros(n_free: usize, grid: &AgeGrid) -> Self {
        State {
            u: DVector::zeros(n_free),
            v: DVector::zeros(n_free),
            eta: HistoryField::zeros(n_free, grid),
        }
    }

    /// Linear combination a*self + b*other.
    pub fn lin_comb(&self, a: f64, other: &State, b: f64) -> State {
        State {
            u: a * &self.u + b * &other.u,
            v: a * &self.v + b * &other.v,
            eta: HistoryField {
                levels: self
                    .eta
                    .levels
                    .iter()
                    .zip(other.eta.levels.iter())
                    .map(|(x, y)| a * x + b * y)
                    .collect(),
            },
        }
    }
}

/// Energies and the dissipation functional of a state.
#[derive(Debug, Clone, Copy)]
pub struct Energies {
    /// (1/2)(|v|^2 + |grad u|^2 + |eta|_M^2): u measured with the full
    /// stiffness, v without the tip mass.
    pub classical: f64,
    /// (1/2)(ell |grad u|^2 + |v|^2 + w^2 + |eta|_M^2): the phase-space norm,
    /// the quantity the dynamics actually dissipates.
    pub hilbert: f64,
    /// Weighted memory norm squared |eta|_M^2.
    pub memory_sq: f64,
    /// (1/2) sum_k w'_k |eta_k|_K^2 <= 0, the discrete memory dissipation.
    pub dissipation: f64,
}

/// Prescribed displacement history for t <= 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Past {
    /// u(-s) = 0.
    Zero,
    /// u(-s) = u0: frozen at the initial displacement.
    Constant,
    /// u(-s) = u0 - s v0: backward extrapolation compatible with the initial
    /// velocity.
    Linear,
}

impl Past {
    /// Nodal displacement s time units before t = 0.
    pub fn eval(&self, u0: &DVector<f64>, v0: &DVector<f64>, s: f64) -> DVector<f64> {
        match self {
            Past::Zero => DVector::zeros(u0.len()),
            Past::Constant => u0.clone(),
            Past::Linear => u0 - s * v0,
        }
    }

    /// g-weighted integral of the past, int_0^inf g(s) u(-s) ds, evaluated
    /// exactly per preset (the exponential moments are closed-form).
    pub fn memory_integral(&self, kernel: &Kernel, u0: &DVector<f64>, v0: &DVector<f64>) -> DVector<f64> {
        match self {
            Past::Zero => DVector::zeros(u0.len()),
            Past::Constant => kernel.g0 * u0,
            Past::Linear => {
                let mu1 = match kernel.exponential_parameters() {
                    Some((a, b)) => a / (b * b),
                    // First moment by fine trapezoid for non-exponential kernels.
                    None => {
                        let s_max = kernel.support_radius(1e-12);
                        let n = 20_000;
                        let h = s_max / n as f64;
                        (0..=n)
                            .map(|i| {
                                let s = i as f64 * h;
                                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                                w * h * s * kernel.eval(s)
                            })
                            .sum()
                    }
                };
                kernel.g0 * u0 - mu1 * v0
            }
        }
    }
}

/// Initial data of a run: displacement, velocity, and the prescribed past.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: DVector<f64>,
    pub v0: DVector<f64>,
    pub past: Past,
}

impl InitialData {
    /// Assembles the full initial state, with eta_k = u0 - u(-s_k).
    pub fn state(&self, grid: &AgeGrid) -> State {
        let eta = HistoryField::from_past(grid, |s| {
            if s == 0.0 {
                self.u0.clone()
            } else {
                self.past.eval(&self.u0, &self.v0, s)
            }
        });
        State {
            u: self.u0.clone(),
            v: self.v0.clone(),
            eta,
        }
    }
}

/// The assembled system: spatial operators, kernel, age grid.
#[derive(Debug, Clone)]
pub struct WaveSystem {
    pub ops: DiscreteOperators,
    pub kernel: Kernel,
    pub grid: AgeGrid,
}

impl WaveSystem {
    pub fn new(ops: DiscreteOperators, kernel: Kernel, grid: AgeGrid) -> Self {
        WaveSystem { ops, kernel, grid }
    }

    pub fn n_free(&self) -> usize {
        self.ops.n_free()
    }

    /// Dimension of the stacked state: u and v plus K history levels.
    pub fn state_dim(&self) -> usize {
        (2 + self.grid.len()) * self.n_free()
    }

    /// Phase-space inner product.
    pub fn h_inner(&self, x: &State, y: &State) -> f64 {
        self.kernel.ell * self.ops.stiffness_product(&x.u, &y.u)
            + (&self.ops.mass_aug * &x.v).dot(&y.v)
            + x.eta.memory_inner(&y.eta, &self.ops, &self.grid)
    }

    pub fn h_norm_sq(&self, x: &State) -> f64 {
        self.h_inner(x, x)
    }

    pub fn energies(&self, x: &State) -> Energies {
        let kuu = self.ops.stiffness_product(&x.u, &x.u);
        let mvv = self.ops.mass_product(&x.v, &x.v);
        let w = x.v[self.ops.boundary_index()];
        let mem = x.eta.memory_norm_sq(&self.ops, &self.grid);
        Energies {
            classical: 0.5 * (mvv + kuu + mem),
            hilbert: 0.5 * (self.kernel.ell * kuu + mvv + crate::mesh::BOUNDARY_MASS * w * w + mem),
            memory_sq: mem,
            dissipation: x.eta.dissipation(&self.ops, &self.grid),
        }
    }

    /// Right-hand side A V of the evolution.
    pub fn derivative(&self, x: &State) -> State {
        let mut force = -self.kernel.ell * (&self.ops.stiffness * &x.u);
        for (eta, &w) in x.eta.levels.iter().zip(self.grid.weights.iter()) {
            force -= w * (&self.ops.stiffness * eta);
        }
        State {
            u: x.v.clone(),
            v: self.ops.solve_mass_aug(&force),
            eta: HistoryField {
                levels: x.eta.transport_rate(&self.grid, &x.v),
            },
        }
    }

    /// Implicit midpoint stepper with the factorization cached for this dt.
    pub fn stepper(&self, dt: f64) -> Result<MidpointStepper> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let solver = self.reduced_resolvent(2.0 / dt)?;
        Ok(MidpointStepper {
            dt,
            lambda: 2.0 / dt,
            solver,
        })
    }

    /// Builds the elimination-based solver for (lambda I - A) X = F. Works
    /// over both real and complex scalars.
    pub fn reduced_resolvent<T: ComplexField<RealField = f64>>(
        &self,
        lambda: T,
    ) -> Result<ReducedResolvent<T>> {
        ReducedResolvent::new(self, lambda)
    }

    /// Dense generator matrix A_h acting on stacked states [u; v; eta_1 ..
    /// eta_K].
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.n_free();
        let dim = self.state_dim();
        let k_levels = self.grid.len();
        let mut a = DMatrix::zeros(dim, dim);

        // du/dt = v.
        for i in 0..n {
            a[(i, n + i)] = 1.0;
        }

        // M~ dv/dt = -ell K u - sum_k w_k K eta_k, solved column-block-wise.
        let chol = Cholesky::new(self.ops.mass_aug.clone()).expect("mass is positive definite");
        let mut rhs = DMatrix::zeros(n, dim);
        rhs.view_mut((0, 0), (n, n))
            .copy_from(&(-self.kernel.ell * &self.ops.stiffness));
        for k in 0..k_levels {
            rhs.view_mut((0, (2 + k) * n), (n, n))
                .copy_from(&(-self.grid.weights[k] * &self.ops.stiffness));
        }
        let vdot = chol.solve(&rhs);
        a.view_mut((n, 0), (n, dim)).copy_from(&vdot);

        // deta_k/dt = v - (eta_k - eta_{k-1}) / ds_k.
        for k in 0..k_levels {
            let row0 = (2 + k) * n;
            let inv = 1.0 / self.grid.deltas[k];
            for i in 0..n {
                a[(row0 + i, n + i)] = 1.0;
                a[(row0 + i, row0 + i)] -= inv;
                if k > 0 {
                    a[(row0 + i, row0 - n + i)] += inv;
                }
            }
        }
        a
    }

    /// Gram matrix of the phase-space inner product (block diagonal:
    /// ell K, M~, w_k K).
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.n_free();
        let dim = self.state_dim();
        let mut g = DMatrix::zeros(dim, dim);
        g.view_mut((0, 0), (n, n))
            .copy_from(&(self.kernel.ell * &self.ops.stiffness));
        g.view_mut((n, n), (n, n)).copy_from(&self.ops.mass_aug);
        for k in 0..self.grid.len() {
            let o = (2 + k) * n;
            g.view_mut((o, o), (n, n))
                .copy_from(&(self.grid.weights[k] * &self.ops.stiffness));
        }
        g
    }

    pub fn flatten(&self, x: &State) -> DVector<f64> {
        let n = self.n_free();
        let mut out = DVector::zeros(self.state_dim());
        out.rows_mut(0, n).copy_from(&x.u);
        out.rows_mut(n, n).copy_from(&x.v);
        for (k, eta) in x.eta.levels.iter().enumerate() {
            out.rows_mut((2 + k) * n, n).copy_from(eta);
        }
        out
    }

    pub fn unflatten(&self, x: &DVector<f64>) -> State {
        let n = self.n_free();
        State {
            u: x.rows(0, n).into_owned(),
            v: x.rows(n, n).into_owned(),
            eta: HistoryField {
                levels: (0..self.grid.len())
                    .map(|k| x.rows((2 + k) * n, n).into_owned())
                    .collect(),
            },
        }
    }
}

/// Solver for (lambda I - A) X = F by block elimination.
///
/// With F = (f_u, f_v, f_eta) the unknowns satisfy v = lambda u - f_u and the
/// bidiagonal-in-age transport rows give the forward recursion
///
/// ```text
/// eta_k = q_k (f_eta_k + v) + r_k eta_{k-1},
/// q_k = ds_k / (lambda ds_k + 1),   r_k = 1 / (lambda ds_k + 1),
/// ```
///
/// so the weighted history sum collapses to sum_k w_k eta_k = C(lambda) v +
/// (data term), with the scalar C(lambda) = sum_k w_k c_k, c_k = q_k +
/// r_k c_{k-1}. C is the discrete counterpart of (g0 - ghat(lambda)) /
/// lambda, so the final system for u alone,
///
/// ```text
/// [lambda^2 M~ + (ell + lambda C(lambda)) K] u = M~ (f_v + lambda f_u)
///                                              + K (C(lambda) f_u - m_f),
/// ```
///
/// carries the modified stiffness coefficient ell + lambda C ~ 1 -
/// ghat(lambda) and the lambda^2-weighted tip mass at the dynamic node. Back
/// substitution recovers v and the history levels.
pub struct ReducedResolvent<T: ComplexField<RealField = f64>> {
    pub lambda: T,
    n: usize,
    q: Vec<T>,
    r: Vec<T>,
    weights: Vec<f64>,
    /// C(lambda): coefficient of v in the weighted history sum.
    pub memory_coef: T,
    /// ell + lambda C(lambda): the modified stiffness coefficient.
    pub stiffness_coef: T,
    stiffness: DMatrix<T>,
    mass_aug: DMatrix<T>,
    lu: nalgebra::linalg::LU<T, Dyn, Dyn>,
}

impl<T: ComplexField<RealField = f64>> ReducedResolvent<T> {
    fn new(sys: &WaveSystem, lambda: T) -> Result<Self> {
        let n = sys.n_free();
        let one = T::one();
        let mut q = Vec::with_capacity(sys.grid.len());
        let mut r = Vec::with_capacity(sys.grid.len());
        let mut c_run = T::zero();
        let mut memory_coef = T::zero();
        for k in 0..sys.grid.len() {
            let ds = T::from_real(sys.grid.deltas[k]);
            let denom = lambda.clone() * ds.clone() + one.clone();
            let qk = ds / denom.clone();
            let rk = one.clone() / denom;
            c_run = qk.clone() + rk.clone() * c_run;
            memory_coef += T::from_real(sys.grid.weights[k]) * c_run.clone();
            q.push(qk);
            r.push(rk);
        }
        let stiffness_coef = T::from_real(sys.kernel.ell) + lambda.clone() * memory_coef.clone();
        let stiffness = sys.ops.stiffness.map(T::from_real);
        let mass_aug = sys.ops.mass_aug.map(T::from_real);
        let reduced = &mass_aug * (lambda.clone() * lambda.clone()) + &stiffness * stiffness_coef.clone();
        let lu = reduced.lu();
        // A cheap singularity probe: a pivot at roundoff scale means lambda
        // sits on (or numerically on) the spectrum.
        let dmin = (0..n)
            .map(|i| lu.u().get((i, i)).unwrap().clone().modulus())
            .fold(f64::INFINITY, f64::min);
        let dmax = (0..n)
            .map(|i| lu.u().get((i, i)).unwrap().clone().modulus())
            .fold(0.0_f64, f64::max);
        if !(dmin > dmax * 1e-14) {
            return Err(Error::NearSingular {
                lambda: format!("{lambda:?}"),
                distance: dmin / dmax.max(1.0),
            });
        }
        Ok(ReducedResolvent {
            lambda,
            n,
            q,
            r,
            weights: sys.grid.weights.clone(),
            memory_coef,
            stiffness_coef,
            stiffness,
            mass_aug,
            lu,
        })
    }

    /// Solves (lambda I - A)(u, v, eta) = (f_u, f_v, f_eta).
    pub fn solve(
        &self,
        f_u: &DVector<T>,
        f_v: &DVector<T>,
        f_eta: &[DVector<T>],
    ) -> Result<(DVector<T>, DVector<T>, Vec<DVector<T>>)> {
        assert_eq!(f_eta.len(), self.q.len(), "history level count mismatch");
        let lambda = self.lambda.clone();

        // Data part of the weighted history sum: m_f = sum_k w_k d_k with
        // d_k = q_k f_eta_k + r_k d_{k-1}.
        let mut d_run = DVector::<T>::zeros(self.n);
        let mut m_f = DVector::<T>::zeros(self.n);
        for k in 0..self.q.len() {
            d_run = f_eta[k].clone() * self.q[k].clone() + d_run * self.r[k].clone();
            m_f += d_run.clone() * T::from_real(self.weights[k]);
        }

        let rhs = &self.mass_aug * (f_v + f_u * lambda.clone())
            + &self.stiffness * (f_u * self.memory_coef.clone() - m_f);
        let u = self.lu.solve(&rhs).ok_or_else(|| Error::NearSingular {
            lambda: format!("{:?}", self.lambda),
            distance: 0.0,
        })?;
        let v = u.clone() * lambda - f_u;

        let mut eta: Vec<DVector<T>> = Vec::with_capacity(self.q.len());
        for k in 0..self.q.len() {
            let prev = if k == 0 {
                DVector::zeros(self.n)
            } else {
                eta[k - 1].clone()
            };
            eta.push((f_eta[k].clone() + v.clone()) * self.q[k].clone() + prev * self.r[k].clone());
        }
        Ok((u, v, eta))
    }
}

/// Implicit midpoint rule (I - dt/2 A) V+ = (I + dt/2 A) V, realised as
/// V+ = 2 lambda R(lambda) V - V with lambda = 2/dt and the cached reduced
/// factorization. Exactly energy-conserving when the kernel vanishes, and
/// exactly dissipative otherwise, because the scheme inherits the quadratic
/// form identities of A.
pub struct MidpointStepper {
    pub dt: f64,
    lambda: f64,
    solver: ReducedResolvent<f64>,
}

impl MidpointStepper {
    pub fn step(&self, x: &State) -> Result<State> {
        let (ru, rv, reta) = self.solver.solve(&x.u, &x.v, &x.eta.levels)?;
        let two_lambda = 2.0 * self.lambda;
        Ok(State {
            u: two_lambda * ru - &x.u,
            v: two_lambda * rv - &x.v,
            eta: HistoryField {
                levels: reta
                    .into_iter()
                    .zip(x.eta.levels.iter())
                    .map(|(r, e)| two_lambda * r - e)
                    .collect(),
            },
        })
    }

    /// Midpoint state of the step from x to its successor.
    pub fn midpoint(&self, x: &State, next: &State) -> State {
        x.lin_comb(0.5, next, 0.5)
    }
}

/// Exact reduction of an exponential kernel to one auxiliary field
/// z(t) = int_0^inf g(s) u(t - s) ds, which obeys dz/dt = a u - b z. The
/// memory force is then K z with no age grid at all, which makes this
/// formulation an s-grid-free cross-check of the history dynamics.
pub struct PronySimulator<'a> {
    ops: &'a DiscreteOperators,
    pub dt: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub z: DVector<f64>,
    a: f64,
    b: f64,
    /// Cached factor of M~ - sigma (dt^2/4) K.
    chol: Cholesky<f64, Dyn>,
    sigma: f64,
}

impl<'a> PronySimulator<'a> {
    /// Builds the simulator; the kernel must be exponential (or zero, which
    /// degenerates to the plain wave equation).
    pub fn new(
        ops: &'a DiscreteOperators,
        kernel: &Kernel,
        dt: f64,
        init: &InitialData,
    ) -> Result<Self> {
        let (a, b) = if kernel.is_zero() {
            (0.0, 1.0)
        } else {
            kernel
                .exponential_parameters()
                .ok_or(Error::NonExponentialKernel("prony"))?
        };
        let z = init.past.memory_integral(kernel, &init.u0, &init.v0);
        // Midpoint step after eliminating z and u:
        //   [M~ - sigma (dt^2/4) K] v+ = M~ v + dt K [sigma u + sigma (dt/4) v
        //                                            + z / (1 + b dt/2)]
        // with sigma = -1 + (a dt/2)/(1 + b dt/2) < 0 (since a < b).
        let c = 0.5 * b * dt;
        let sigma = -1.0 + (0.5 * a * dt) / (1.0 + c);
        let lhs = &ops.mass_aug - (sigma * dt * dt / 4.0) * &ops.stiffness;
        let chol = Cholesky::new(lhs).ok_or_else(|| {
            Error::Config("midpoint system for the exponential reduction is not positive definite".into())
        })?;
        Ok(PronySimulator {
            ops,
            dt,
            u: init.u0.clone(),
            v: init.v0.clone(),
            z,
            a,
            b,
            chol,
            sigma,
        })
    }

    /// One implicit midpoint step of the (u, v, z) system; algebraically the
    /// full 3-block midpoint solve, performed by exact elimination.
    pub fn step(&mut self) {
        let dt = self.dt;
        let c = 0.5 * self.b * dt;
        let inv1pc = 1.0 / (1.0 + c);
        let rhs = &self.ops.mass_aug * &self.v
            + dt * (&self.ops.stiffness
                * (self.sigma * &self.u + (self.sigma * dt / 4.0) * &self.v + inv1pc * &self.z));
        let v_next = self.chol.solve(&rhs);
        let u_mid = &self.u + (dt / 4.0) * (&self.v + &v_next);
        let u_next = &self.u + (dt / 2.0) * (&self.v + &v_next);
        let z_next = inv1pc * ((1.0 - c) * &self.z + (self.a * dt) * u_mid);
        self.u = u_next;
        self.v = v_next;
        self.z = z_next;
    }
}

/// Direct convolution formulation: the memory force at time t is the
/// quadrature of g(s) K u(t - s) over the stored trajectory (uniform grid in
/// s at the step size, trapezoid weights), extended by the prescribed past
/// for ages beyond the elapsed time. Keeps every displacement snapshot.
pub struct ConvolutionSimulator<'a> {
    ops: &'a DiscreteOperators,
    pub dt: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    /// u at t_0, t_1, ..., t_n.
    pub snapshots: Vec<DVector<f64>>,
    init: InitialData,
    /// Kernel samples g(j dt), j = 0 ..= j_max.
    g_samples: Vec<f64>,
    /// z at the current time, maintained across steps.
    z: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    theta: f64,
}

impl<'a> ConvolutionSimulator<'a> {
    pub fn new(
        ops: &'a DiscreteOperators,
        kernel: &Kernel,
        dt: f64,
        s_max: f64,
        init: &InitialData,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let j_max = (s_max / dt).round().max(1.0) as usize;
        let g_samples: Vec<f64> = (0..=j_max).map(|j| kernel.eval(j as f64 * dt)).collect();
        // Midpoint step with the newest quadrature node implicit:
        //   [M~ - theta (dt^2/2) K] v+ = M~ v + dt K [theta (u + dt/2 v)
        //                                            - u/2 + (z_n + ztilde)/2]
        // with theta = -1/2 + (dt/4) g(0).
        let theta = -0.5 + 0.25 * dt * g_samples[0];
        let lhs = &ops.mass_aug - (theta * dt * dt / 2.0) * &ops.stiffness;
        let chol = Cholesky::new(lhs).ok_or_else(|| {
            Error::Config("midpoint system for the convolution formulation is not positive definite".into())
        })?;
        let mut sim = ConvolutionSimulator {
            ops,
            dt,
            u: init.u0.clone(),
            v: init.v0.clone(),
            snapshots: vec![init.u0.clone()],
            init: init.clone(),
            g_samples,
            z: DVector::zeros(ops.n_free()),
            chol,
            theta,
        };
        sim.z = sim.quadrature_z(0);
        Ok(sim)
    }

    /// Displacement at time index m (negative indices come from the past).
    fn u_at(&self, m: isize) -> DVector<f64> {
        if m >= 0 {
            self.snapshots[m as usize].clone()
        } else {
            self.init
                .past
                .eval(&self.init.u0, &self.init.v0, (-m) as f64 * self.dt)
        }
    }

    /// Effective truncation of the age sum at time index n: with a zero past
    /// the integrand vanishes beyond the elapsed time, so the sum stops at
    /// the initial snapshot.
    fn j_cut(&self, n: usize) -> usize {
        let j_max = self.g_samples.len() - 1;
        match self.init.past {
            Past::Zero => j_max.min(n),
            _ => j_max,
        }
    }

    /// Trapezoid quadrature z_n = sum_j w_j g(j dt) u_{n-j} dt.
    fn quadrature_z(&self, n: usize) -> DVector<f64> {
        let cut = self.j_cut(n);
        let mut z = DVector::zeros(self.ops.n_free());
        for j in 0..=cut {
            let w = if j == 0 || j == cut { 0.5 } else { 1.0 };
            z += (w * self.dt * self.g_samples[j]) * self.u_at(n as isize - j as isize);
        }
        z
    }

    /// Known part of z_{n+1}: every quadrature node except j = 0 (which holds
    /// the unknown u_{n+1}).
    fn z_next_known(&self) -> DVector<f64> {
        let n_next = self.snapshots.len();
        let cut = self.j_cut(n_next);
        let mut z = DVector::zeros(self.ops.n_free());
        for j in 1..=cut {
            let w = if j == cut { 0.5 } else { 1.0 };
            z += (w * self.dt * self.g_samples[j]) * self.u_at(n_next as isize - 1 - (j as isize - 1));
        }
        z
    }

    pub fn step(&mut self) {
        let dt = self.dt;
        let z_known = self.z_next_known();
        let u_tilde = &self.u + (0.5 * dt) * &self.v;
        let rhs = &self.ops.mass_aug * &self.v
            + dt * (&self.ops.stiffness
                * (self.theta * &u_tilde - 0.5 * &self.u + 0.5 * (&self.z + &z_known)));
        let v_next = self.chol.solve(&rhs);
        let u_next = u_tilde + (0.5 * dt) * &v_next;
        // j = 0 always carries the trapezoid end weight 1/2.
        let z_next = z_known + (0.5 * dt * self.g_samples[0]) * &u_next;
        self.snapshots.push(u_next.clone());
        self.u = u_next;
        self.v = v_next;
        self.z = z_next;
    }

    /// Reconstructs the history field on an age grid from the stored
    /// trajectory (linear interpolation between snapshots, prescribed past
    /// beyond), for energy monitoring of the convolution and reduction runs.
    pub fn reconstruct_history(
        snapshots: &[DVector<f64>],
        init: &InitialData,
        dt: f64,
        n: usize,
        grid: &AgeGrid,
    ) -> HistoryField {
        let t_n = n as f64 * dt;
        let u_now = &snapshots[n];
        let levels = (0..grid.len())
            .map(|k| {
                let t_past = t_n - grid.age(k);
                let u_past = if t_past >= 0.0 {
                    let j = (t_past / dt).floor() as usize;
                    let frac = (t_past - j as f64 * dt) / dt;
                    if j + 1 <= n && frac > 0.0 {
                        (1.0 - frac) * &snapshots[j] + frac * &snapshots[j + 1]
                    } else {
                        snapshots[j.min(n)].clone()
                    }
                } else {
                    init.past.eval(&init.u0, &init.v0, -t_past)
                };
                u_now - u_past
            })
            .collect();
        HistoryField { levels }
    }
}

/// Complex stacked-vector helpers shared with the analysis module.
pub fn split_complex(
    sys: &WaveSystem,
    x: &DVector<Complex64>,
) -> (DVector<Complex64>, DVector<Complex64>, Vec<DVector<Complex64>>) {
    let n = sys.n_free();
    (
        x.rows(0, n).into_owned(),
        x.rows(n, n).into_owned(),
        (0..sys.grid.len())
            .map(|k| x.rows((2 + k) * n, n).into_owned())
            .collect(),
    )
}

pub fn join_complex(
    sys: &WaveSystem,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
    eta: &[DVector<Complex64>],
) -> DVector<Complex64> {
    let n = sys.n_free();
    let mut out = DVector::zeros(sys.state_dim());
    out.rows_mut(0, n).copy_from(u);
    out.rows_mut(n, n).copy_from(v);
    for (k, e) in eta.iter().enumerate() {
        out.rows_mut((2 + k) * n, n).copy_from(e);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(n_cells: usize, kernel: Kernel, k_nodes: usize) -> WaveSystem {
        let ops = DiscreteOperators::assemble(Mesh::new(n_cells).unwrap());
        let s_max = kernel.support_radius(1e-8).max(1.0);
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

    /// The generator is dissipative in the phase-space inner product for
    /// arbitrary states; the conservative couplings cancel exactly.
    #[test]
    fn generator_is_dissipative_on_random_states() {
        let sys = system(8, Kernel::exponential(0.5, 1.0).unwrap(), 24);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_state(&sys, &mut rng);
            let rate = sys.h_inner(&sys.derivative(&x), &x);
            assert!(
                rate <= 1e-12 * sys.h_norm_sq(&x),
                "positive energy rate {rate:e}"
            );
        }
    }

    /// The energy rate equals dissipation minus upwind surplus, exactly.
    #[test]
    fn energy_rate_identity_holds_exactly() {
        let sys = system(6, Kernel::exponential(0.4, 1.2).unwrap(), 16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = random_state(&sys, &mut rng);
            let rate = sys.h_inner(&sys.derivative(&x), &x);
            let expect = x.eta.dissipation(&sys.ops, &sys.grid)
                - x.eta.upwind_surplus(&sys.ops, &sys.grid);
            assert_relative_eq!(rate, expect, max_relative = 1e-10, epsilon = 1e-13);
        }
    }

    /// With g = 0 the system is the plain wave equation with a tip mass:
    /// eigenvectors of the constrained pencil (K, M~) rotate at frequency
    /// sqrt(mu) and the derivative of (x, 0) is (0, -mu x).
    #[test]
    fn memoryless_derivative_rotates_stiffness_eigenvectors() {
        let sys = system(12, Kernel::zero(), 0);
        // Solve K x = mu M~ x through the mass Cholesky.
        let chol = Cholesky::new(sys.ops.mass_aug.clone()).unwrap();
        let l_inv_k = chol.solve(&sys.ops.stiffness);
        // Power iteration on the inverse for the smallest eigenpair.
        let lu = l_inv_k.clone().lu();
        let mut x = DVector::from_element(sys.n_free(), 1.0);
        for _ in 0..200 {
            x = lu.solve(&x).unwrap();
            x /= x.norm();
        }
        let mu = (sys.ops.stiffness_product(&x, &x)) / ((&sys.ops.mass_aug * &x).dot(&x));
        let state = State {
            u: x.clone(),
            v: DVector::zeros(sys.n_free()),
            eta: HistoryField::zeros(sys.n_free(), &sys.grid),
        };
        let rate = sys.derivative(&state);
        assert_relative_eq!(rate.u.amax(), 0.0, epsilon = 1e-14);
        let residual = (&rate.v + mu * &x).amax();
        assert!(residual <= 1e-9 * mu, "residual {residual:e}");
    }

    /// History constant in age equal to u makes the total stiffness force
    /// collapse to -(ell + sum_k w_k) K u, a multiple of -K u within the
    /// quadrature's mass defect of 1.
    #[test]
    fn constant_history_telescopes_the_stiffness() {
        let sys = system(8, Kernel::exponential(0.5, 1.0).unwrap(), 64);
        let u = sys.ops.mesh.interpolate(|x| x * (1.5 - x));
        let x = State {
            u: u.clone(),
            v: DVector::zeros(sys.n_free()),
            eta: HistoryField {
                levels: vec![u.clone(); sys.grid.len()],
            },
        };
        let rate = sys.derivative(&x);
        let scale = sys.kernel.ell + sys.grid.total_weight();
        let expect = sys.ops.solve_mass_aug(&(-scale * (&sys.ops.stiffness * &u)));
        assert!(
            (&rate.v - &expect).amax() <= 1e-12 * expect.amax().max(1.0),
            "telescoping defect {:e}",
            (&rate.v - &expect).amax()
        );
        assert!((scale - 1.0).abs() <= 1e-3, "captured mass defect {:e}", scale - 1.0);
    }

    /// The dense generator reproduces the derivative routine on random
    /// stacked states.
    #[test]
    fn generator_matches_derivative() {
        let sys = system(5, Kernel::exponential(0.3, 0.9).unwrap(), 12);
        let a = sys.generator();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let x = random_state(&sys, &mut rng);
            let via_matrix = &a * sys.flatten(&x);
            let via_routine = sys.flatten(&sys.derivative(&x));
            let scale = via_routine.amax().max(1.0);
            assert!(
                (via_matrix - via_routine).amax() <= 1e-12 * scale,
                "generator action mismatch"
            );
        }
    }

    /// Gram matrix reproduces the phase-space inner product.
    #[test]
    fn gram_matches_h_inner() {
        let sys = system(6, Kernel::exponential(0.5, 1.0).unwrap(), 10);
        let g = sys.gram();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_state(&sys, &mut rng);
        let y = random_state(&sys, &mut rng);
        let via_gram = (&g * sys.flatten(&x)).dot(&sys.flatten(&y));
        assert_relative_eq!(via_gram, sys.h_inner(&x, &y), max_relative = 1e-12);
    }

    /// The midpoint step solves (I - dt/2 A) V+ = (I + dt/2 A) V: checked
    /// against a dense solve with the assembled generator.
    #[test]
    fn midpoint_step_matches_dense_solve() {
        let sys = system(6, Kernel::exponential(0.5, 1.0).unwrap(), 14);
        let dt = 0.05;
        let stepper = sys.stepper(dt).unwrap();
        let a = sys.generator();
        let dim = sys.state_dim();
        let lhs = DMatrix::identity(dim, dim) - (dt / 2.0) * &a;
        let rhs_m = DMatrix::identity(dim, dim) + (dt / 2.0) * &a;
        let lu = lhs.lu();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let x = random_state(&sys, &mut rng);
            let dense = lu.solve(&(&rhs_m * sys.flatten(&x))).unwrap();
            let fast = sys.flatten(&stepper.step(&x).unwrap());
            assert!(
                (dense - &fast).amax() <= 1e-10 * fast.amax().max(1.0),
                "reduced step deviates from dense midpoint solve"
            );
        }
    }

    /// Midpoint stepping is linear in the state.
    #[test]
    fn step_is_linear() {
        let sys = system(7, Kernel::exponential(0.4, 1.0).unwrap(), 12);
        let stepper = sys.stepper(0.03).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_state(&sys, &mut rng);
        let y = random_state(&sys, &mut rng);
        let alpha = 1.7;
        let combo = stepper.step(&x.lin_comb(alpha, &y, 1.0)).unwrap();
        let separate = stepper.step(&x).unwrap().lin_comb(alpha, &stepper.step(&y).unwrap(), 1.0);
        let diff = sys.flatten(&combo) - sys.flatten(&separate);
        let scale = sys.flatten(&separate).amax().max(1.0);
        assert!(diff.amax() <= 1e-12 * scale, "nonlinearity {:e}", diff.amax());
    }

    /// With g = 0 the midpoint rule conserves the Hilbert energy to roundoff
    /// over a long run.
    #[test]
    fn memoryless_run_conserves_energy() {
        let sys = system(16, Kernel::zero(), 0);
        let dt = 0.5 * sys.ops.mesh.h;
        let stepper = sys.stepper(dt).unwrap();
        let init = InitialData {
            u0: sys.ops.mesh.interpolate(|x| (0.5 * std::f64::consts::PI * x).sin()),
            v0: DVector::zeros(sys.n_free()),
            past: Past::Zero,
        };
        let mut x = init.state(&sys.grid);
        let e0 = sys.energies(&x).hilbert;
        let mut max_drift = 0.0_f64;
        for _ in 0..1000 {
            x = stepper.step(&x).unwrap();
            max_drift = max_drift.max((sys.energies(&x).hilbert - e0).abs() / e0);
        }
        assert!(max_drift <= 1e-10, "relative drift {max_drift:e}");
    }

    /// The exponential-kernel reduction step equals the dense midpoint solve
    /// of the full (u, v, z) block system.
    #[test]
    fn prony_step_matches_dense_block_midpoint() {
        let ops = DiscreteOperators::assemble(Mesh::new(9).unwrap());
        let kernel = Kernel::exponential(0.5, 1.0).unwrap();
        let (a, b) = kernel.exponential_parameters().unwrap();
        let n = ops.n_free();
        let dt = 0.04;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let init = InitialData {
            u0: DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5),
            v0: DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5),
            past: Past::Constant,
        };
        let mut sim = PronySimulator::new(&ops, &kernel, dt, &init).unwrap();

        // Dense 3n x 3n generator of the (u, v, z) system.
        let mut big = DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            big[(i, n + i)] = 1.0;
            big[(2 * n + i, i)] = a;
            big[(2 * n + i, 2 * n + i)] = -b;
        }
        let chol = Cholesky::new(ops.mass_aug.clone()).unwrap();
        let minus_k = chol.solve(&(-1.0 * &ops.stiffness));
        big.view_mut((n, 0), (n, n)).copy_from(&minus_k);
        big.view_mut((n, 2 * n), (n, n)).copy_from(&(-1.0 * &minus_k));

        let mut state = DVector::zeros(3 * n);
        state.rows_mut(0, n).copy_from(&sim.u);
        state.rows_mut(n, n).copy_from(&sim.v);
        state.rows_mut(2 * n, n).copy_from(&sim.z);
        let lhs = DMatrix::identity(3 * n, 3 * n) - (dt / 2.0) * &big;
        let rhs = DMatrix::identity(3 * n, 3 * n) + (dt / 2.0) * &big;
        let lu = lhs.lu();
        for _ in 0..3 {
            state = lu.solve(&(&rhs * &state)).unwrap();
            sim.step();
        }
        let mut got = DVector::zeros(3 * n);
        got.rows_mut(0, n).copy_from(&sim.u);
        got.rows_mut(n, n).copy_from(&sim.v);
        got.rows_mut(2 * n, n).copy_from(&sim.z);
        assert!(
            (got - state).amax() <= 1e-11,
            "reduction deviates from block midpoint"
        );
    }

    /// Reconstructing the history from convolution snapshots reproduces the
    /// prescribed initial history at t = 0.
    #[test]
    fn reconstructed_history_matches_initialization() {
        let sys = system(8, Kernel::exponential(0.5, 1.0).unwrap(), 20);
        let init = InitialData {
            u0: sys.ops.mesh.interpolate(|x| x),
            v0: sys.ops.mesh.interpolate(|x| 0.3 * x),
            past: Past::Linear,
        };
        let snapshots = vec![init.u0.clone()];
        let rec = ConvolutionSimulator::reconstruct_history(&snapshots, &init, 0.01, 0, &sys.grid);
        let direct = init.state(&sys.grid).eta;
        for (r, d) in rec.levels.iter().zip(direct.levels.iter()) {
            assert!((r - d).amax() <= 1e-12);
        }
    }
}
