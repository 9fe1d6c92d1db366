//! P1 finite elements on the unit interval with a clamped left end and a
//! dynamic right end.
//!
//! The mesh is uniform with n_cells elements. The node at x = 0 carries the
//! homogeneous Dirichlet condition and is eliminated from all constrained
//! operators; the node at x = 1 is an ordinary unknown that additionally
//! carries a unit point mass, which is how the dynamic (tip-mass) boundary
//! condition enters the weak form. The mass matrix is the consistent one.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Uniform mesh of the interval (0, 1).
#[derive(Debug, Clone)]
pub struct Mesh {
    pub n_cells: usize,
    pub h: f64,
}

impl Mesh {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Config(format!(
                "n_cells must be at least 2, got {n_cells}"
            )));
        }
        Ok(Mesh {
            n_cells,
            h: 1.0 / n_cells as f64,
        })
    }

    /// Number of free nodes (every node except the clamped one at x = 0).
    pub fn n_free(&self) -> usize {
        self.n_cells
    }

    /// Coordinate of free node i; the free nodes are x_1 .. x_N with
    /// x_N = 1, so free node i sits at (i + 1) h.
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    /// Nodal interpolant of f on the free nodes.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_fn(self.n_free(), |i, _| f(self.node(i)))
    }
}

/// Assembled constrained operators of the spatial discretization.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub mesh: Mesh,
    /// Constrained stiffness: (K u, w) = int u' w' for P1 functions vanishing
    /// at x = 0.
    pub stiffness: DMatrix<f64>,
    /// Constrained consistent mass (no boundary augmentation).
    pub mass: DMatrix<f64>,
    /// Mass plus the unit point mass at the dynamic node: M + e_N e_N^T.
    pub mass_aug: DMatrix<f64>,
    /// Cached Cholesky factor of mass_aug.
    mass_aug_chol: Cholesky<f64, Dyn>,
}

/// Point mass attached to the dynamic boundary node (unit tip mass in 1D).
pub const BOUNDARY_MASS: f64 = 1.0;

impl DiscreteOperators {
    pub fn assemble(mesh: Mesh) -> Self {
        let n = mesh.n_free();
        let h = mesh.h;
        let mut k = DMatrix::zeros(n, n);
        let mut m = DMatrix::zeros(n, n);
        // Element loop over cells [x_e, x_{e+1}], e = 0..n_cells; local nodes
        // map to free indices e-1 and e (index -1 is the clamped node).
        for e in 0..mesh.n_cells {
            let (ke, me) = (1.0 / h, h / 6.0);
            let local_k = [[ke, -ke], [-ke, ke]];
            let local_m = [[2.0 * me, me], [me, 2.0 * me]];
            for (a, &ga) in [e as isize - 1, e as isize].iter().enumerate() {
                if ga < 0 {
                    continue;
                }
                for (b, &gb) in [e as isize - 1, e as isize].iter().enumerate() {
                    if gb < 0 {
                        continue;
                    }
                    k[(ga as usize, gb as usize)] += local_k[a][b];
                    m[(ga as usize, gb as usize)] += local_m[a][b];
                }
            }
        }
        let mut m_aug = m.clone();
        m_aug[(n - 1, n - 1)] += BOUNDARY_MASS;
        let chol = Cholesky::new(m_aug.clone()).expect("augmented mass is positive definite");
        DiscreteOperators {
            mesh,
            stiffness: k,
            mass: m,
            mass_aug: m_aug,
            mass_aug_chol: chol,
        }
    }

    pub fn n_free(&self) -> usize {
        self.mesh.n_free()
    }

    /// Index of the dynamic boundary node inside the free numbering.
    pub fn boundary_index(&self) -> usize {
        self.n_free() - 1
    }

    /// Solves (M + M_Gamma) x = rhs with the cached factorization.
    pub fn solve_mass_aug(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.mass_aug_chol.solve(rhs)
    }

    /// Stiffness bilinear form (K u, w) = int u' w'.
    pub fn stiffness_product(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        (&self.stiffness * u).dot(w)
    }

    /// Consistent-mass bilinear form (M u, w) = int u w.
    pub fn mass_product(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        (&self.mass * u).dot(w)
    }

    /// Discrete outward flux u'(1) of a P1 function (one-sided derivative on
    /// the last cell, which is what the constrained stiffness row at the
    /// boundary node pairs against).
    pub fn flux_at_boundary(&self, u: &DVector<f64>) -> f64 {
        let n = self.n_free();
        let h = self.mesh.h;
        if n == 1 {
            u[0] / h
        } else {
            (u[n - 1] - u[n - 2]) / h
        }
    }

    /// Residual of the discrete Green identity
    ///   (K u, w) = u'(1) w(1) - sum_i [u']_i w(x_i)
    /// where [u']_i is the jump of u' at interior node x_i. Exact (up to
    /// roundoff) for P1 functions, with both sides assembled independently.
    pub fn greens_identity_residual(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let lhs = self.stiffness_product(u, w);
        let n = self.n_free();
        let h = self.mesh.h;
        let val = |i: isize| -> f64 {
            if i < 0 {
                0.0
            } else {
                u[i as usize]
            }
        };
        let mut rhs = self.flux_at_boundary(u) * w[n - 1];
        for i in 0..n - 1 {
            let jump = (val(i as isize + 1) - 2.0 * val(i as isize) + val(i as isize - 1)) / h;
            rhs -= jump * w[i];
        }
        lhs - rhs
    }

    /// Best constant B_h in the discrete trace inequality
    /// u(1)^2 <= B_h^2 (K u, u): the square root of the boundary entry of
    /// K^{-1} (Rayleigh quotient of a rank-one form against the stiffness).
    pub fn trace_constant(&self) -> f64 {
        let n = self.n_free();
        let mut e = DVector::zeros(n);
        e[n - 1] = 1.0;
        let z = self
            .stiffness
            .clone()
            .lu()
            .solve(&e)
            .expect("constrained stiffness is nonsingular");
        z[n - 1].sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two cells, h = 1/2: element stiffness 2*[[1,-1],[-1,1]] assembled over
    /// nodes (0,1,2) and constrained at node 0 leaves [[4,-2],[-2,2]].
    #[test]
    fn two_cell_stiffness_is_the_hand_assembled_matrix() {
        let ops = DiscreteOperators::assemble(Mesh::new(2).unwrap());
        let expect = DMatrix::from_row_slice(2, 2, &[4.0, -2.0, -2.0, 2.0]);
        assert_eq!(ops.stiffness, expect);
    }

    /// Row sums of the constrained consistent mass equal int phi_i against
    /// the sum of the free hat functions: h at interior nodes, h - h/6 next
    /// to the clamp (the clamped column is dropped), h/2 at the dynamic end.
    #[test]
    fn mass_row_sums_are_hat_function_integrals() {
        let ops = DiscreteOperators::assemble(Mesh::new(8).unwrap());
        let h = ops.mesh.h;
        let ones = DVector::from_element(ops.n_free(), 1.0);
        let sums = &ops.mass * ones;
        assert_relative_eq!(sums[0], h - h / 6.0, max_relative = 1e-13);
        for i in 1..ops.n_free() - 1 {
            assert_relative_eq!(sums[i], h, max_relative = 1e-13);
        }
        assert_relative_eq!(sums[ops.n_free() - 1], 0.5 * h, max_relative = 1e-13);
    }

    #[test]
    fn mass_aug_adds_the_unit_tip_mass() {
        let ops = DiscreteOperators::assemble(Mesh::new(5).unwrap());
        let i = ops.boundary_index();
        assert_relative_eq!(ops.mass_aug[(i, i)] - ops.mass[(i, i)], 1.0);
    }

    /// u = x is piecewise-linear with unit slope, so the discrete flux at the
    /// dynamic end is exactly 1 on every mesh.
    #[test]
    fn flux_of_linear_function_is_exact() {
        for n in [2, 7, 32] {
            let ops = DiscreteOperators::assemble(Mesh::new(n).unwrap());
            let u = ops.mesh.interpolate(|x| x);
            assert_relative_eq!(ops.flux_at_boundary(&u), 1.0, max_relative = 1e-13);
        }
    }

    /// In 1D the trace constant is exactly 1 at every resolution (the
    /// maximizer of u(1)^2 / int u'^2 over P1 is the linear function); the
    /// n = 2 value is frozen from the 2x2 solve (K^{-1})_{22} = 1.
    #[test]
    fn trace_constant_is_one() {
        let ops = DiscreteOperators::assemble(Mesh::new(2).unwrap());
        assert_relative_eq!(ops.trace_constant(), 1.0, max_relative = 1e-13);
        for n in [4, 16, 64] {
            let ops = DiscreteOperators::assemble(Mesh::new(n).unwrap());
            assert_relative_eq!(ops.trace_constant(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn greens_identity_holds_for_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ops = DiscreteOperators::assemble(Mesh::new(17).unwrap());
        for _ in 0..20 {
            let u = DVector::from_fn(ops.n_free(), |_, _| rng.gen::<f64>() - 0.5);
            let w = DVector::from_fn(ops.n_free(), |_, _| rng.gen::<f64>() - 0.5);
            let scale = ops.stiffness_product(&u, &u).abs().max(1.0);
            assert!(
                ops.greens_identity_residual(&u, &w).abs() <= 1e-12 * scale,
                "residual {:e}",
                ops.greens_identity_residual(&u, &w)
            );
        }
    }

    /// The Dirichlet energy of the interpolated quarter-sine converges to
    /// pi^2/8 at second order: the error drops ~4x per mesh halving.
    #[test]
    fn interpolated_sine_energy_converges_at_second_order() {
        let exact = std::f64::consts::PI * std::f64::consts::PI / 8.0;
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let ops = DiscreteOperators::assemble(Mesh::new(n).unwrap());
                let u = ops.mesh.interpolate(|x| (0.5 * std::f64::consts::PI * x).sin());
                (ops.stiffness_product(&u, &u) - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
        }
    }
}
