//! Relaxation kernels g(s) of the memory term and the admissibility checks
//! they must pass before a simulation is trusted.
//!
//! A kernel is admissible when g >= 0, its total mass g0 = int_0^inf g(s) ds
//! stays below 1 (so the residual stiffness ell = 1 - g0 is positive), and its
//! logarithmic decay rate is pinched between two positive constants:
//! -zeta1 * g(s) <= g'(s) <= -zeta0 * g(s). The exponential family
//! g(s) = a*exp(-b*s) satisfies the pinching exactly with zeta0 = zeta1 = b;
//! sampled kernels carry declared bounds that are verified numerically.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Relative slack applied to the ratio bounds -g'/g in [zeta0, zeta1].
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// Tail mass below which the history domain [0, S_max] is considered to
/// capture the whole kernel.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

/// 8-point Gauss-Legendre nodes on (-1, 1) and their weights, used per panel
/// when integrating sampled kernels.
const GL_NODES: [f64; 8] = [
    -0.9602898564975363,
    -0.7966664774136267,
    -0.525532409916329,
    -0.18343464249564978,
    0.18343464249564978,
    0.525532409916329,
    0.7966664774136267,
    0.9602898564975363,
];
const GL_WEIGHTS: [f64; 8] = [
    0.10122853629037669,
    0.22238103445337434,
    0.31370664587788705,
    0.36268378337836193,
    0.36268378337836193,
    0.31370664587788705,
    0.22238103445337434,
    0.10122853629037669,
];

#[derive(Debug, Clone)]
enum Family {
    /// g(s) = a * exp(-b * s).
    Exponential { a: f64, b: f64 },
    /// Piecewise-linear interpolant of tabulated samples (s_i, g_i).
    Sampled { s: Vec<f64>, g: Vec<f64> },
    /// g identically zero: the memoryless wave equation.
    Zero,
}

/// A relaxation kernel together with its derived constants.
#[derive(Debug, Clone)]
pub struct Kernel {
    family: Family,
    /// Total mass int_0^inf g(s) ds.
    pub g0: f64,
    /// Residual stiffness ell = 1 - g0.
    pub ell: f64,
    /// Lower pinching constant for -g'/g.
    pub zeta0: f64,
    /// Upper pinching constant for -g'/g.
    pub zeta1: f64,
}

/// Outcome of one admissibility check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Full report of the admissibility gate.
#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub g0: f64,
    pub ell: f64,
    pub zeta0: f64,
    pub zeta1: f64,
    pub pass: bool,
    pub checks: Vec<CheckOutcome>,
}

impl Kernel {
    /// Exponential kernel g(s) = a*exp(-b*s); errors unless a, b > 0 and the
    /// total mass a/b stays below 1.
    pub fn exponential(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::Kernel(format!(
                "exponential kernel requires a > 0 and b > 0, got a = {a}, b = {b}"
            )));
        }
        let g0 = a / b;
        let ell = 1.0 - g0;
        if ell <= 0.0 {
            return Err(Error::Assumption(format!(
                "ell = 1 - g0 <= 0: total mass g0 = a/b = {g0} must be below 1"
            )));
        }
        Ok(Kernel {
            family: Family::Exponential { a, b },
            g0,
            ell,
            zeta0: b,
            zeta1: b,
        })
    }

    /// The zero kernel: no memory, pure wave equation with ell = 1.
    pub fn zero() -> Self {
        Kernel {
            family: Family::Zero,
            g0: 0.0,
            ell: 1.0,
            zeta0: f64::INFINITY,
            zeta1: f64::INFINITY,
        }
    }

    /// Kernel tabulated as samples (s_i, g_i) with declared pinching bounds.
    /// The interpolant is piecewise linear; the mass beyond the last sample is
    /// bounded by the exponential envelope g(S)*exp(-zeta0*(s-S)).
    pub fn from_samples(s: Vec<f64>, g: Vec<f64>, zeta0: f64, zeta1: f64) -> Result<Self> {
        if s.len() != g.len() || s.len() < 2 {
            return Err(Error::Kernel(format!(
                "need at least two samples with matching lengths, got {} abscissae and {} values",
                s.len(),
                g.len()
            )));
        }
        if s[0] != 0.0 {
            return Err(Error::Kernel(format!(
                "samples must start at s = 0, got s[0] = {}",
                s[0]
            )));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Kernel("sample abscissae must be strictly increasing".into()));
        }
        if !(zeta0 > 0.0) || !(zeta1 >= zeta0) {
            return Err(Error::Kernel(format!(
                "declared bounds must satisfy 0 < zeta0 <= zeta1, got zeta0 = {zeta0}, zeta1 = {zeta1}"
            )));
        }
        let body: f64 = s
            .windows(2)
            .zip(g.windows(2))
            .map(|(sw, gw)| 0.5 * (gw[0] + gw[1]) * (sw[1] - sw[0]))
            .sum();
        let tail = g[g.len() - 1] / zeta0;
        let g0 = body + tail;
        let ell = 1.0 - g0;
        if ell <= 0.0 {
            return Err(Error::Assumption(format!(
                "ell = 1 - g0 <= 0: integrated mass {g0} must be below 1"
            )));
        }
        Ok(Kernel {
            family: Family::Sampled { s, g },
            g0,
            ell,
            zeta0,
            zeta1,
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, Family::Zero)
    }

    /// Exponential parameters (a, b) when this is an exponential kernel.
    pub fn exponential_parameters(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Exponential { a, b } => Some((a, b)),
            _ => None,
        }
    }

    /// Point value g(s).
    pub fn eval(&self, s: f64) -> f64 {
        match &self.family {
            Family::Exponential { a, b } => a * (-b * s).exp(),
            Family::Zero => 0.0,
            Family::Sampled { s: xs, g } => {
                let n = xs.len();
                if s <= 0.0 {
                    return g[0];
                }
                if s >= xs[n - 1] {
                    // Exponential envelope continuation beyond the table.
                    return g[n - 1] * (-self.zeta0 * (s - xs[n - 1])).exp();
                }
                let i = xs.partition_point(|&x| x <= s).min(n - 1);
                let (x0, x1) = (xs[i - 1], xs[i]);
                let t = (s - x0) / (x1 - x0);
                g[i - 1] * (1.0 - t) + g[i] * t
            }
        }
    }

    /// Derivative g'(s): analytic for the exponential family, centred
    /// differences on the sample grid otherwise.
    pub fn deriv(&self, s: f64) -> f64 {
        match &self.family {
            Family::Exponential { a, b } => -b * a * (-b * s).exp(),
            Family::Zero => 0.0,
            Family::Sampled { s: xs, .. } => {
                let n = xs.len();
                let h = if s <= xs[0] {
                    xs[1] - xs[0]
                } else if s >= xs[n - 1] {
                    xs[n - 1] - xs[n - 2]
                } else {
                    let i = xs.partition_point(|&x| x <= s).min(n - 1);
                    xs[i] - xs[i - 1]
                };
                (self.eval(s + 0.5 * h) - self.eval((s - 0.5 * h).max(0.0)))
                    / (s + 0.5 * h - (s - 0.5 * h).max(0.0))
            }
        }
    }

    /// Exact integral of the (interpolated) kernel over a cell [s0, s1].
    pub fn cell_mass(&self, s0: f64, s1: f64) -> f64 {
        debug_assert!(s1 >= s0);
        match &self.family {
            Family::Exponential { a, b } => (a / b) * ((-b * s0).exp() - (-b * s1).exp()),
            Family::Zero => 0.0,
            Family::Sampled { s: xs, .. } => {
                // Trapezoid on the union of cell endpoints and interior sample
                // nodes: exact for the piecewise-linear interpolant.
                let mut pts = vec![s0];
                for &x in xs.iter() {
                    if x > s0 && x < s1 {
                        pts.push(x);
                    }
                }
                pts.push(s1);
                pts.windows(2)
                    .map(|w| 0.5 * (self.eval(w[0]) + self.eval(w[1])) * (w[1] - w[0]))
                    .sum()
            }
        }
    }

    /// Mass of the kernel beyond S: int_S^inf g(s) ds (exact for the
    /// exponential family, interpolant integral plus exponential tail bound
    /// for sampled kernels).
    pub fn tail_mass(&self, s_max: f64) -> f64 {
        match &self.family {
            Family::Exponential { a, b } => (a / b) * (-b * s_max).exp(),
            Family::Zero => 0.0,
            Family::Sampled { s: xs, g } => {
                let n = xs.len();
                let last = xs[n - 1];
                if s_max >= last {
                    return g[n - 1] * (-self.zeta0 * (s_max - last)).exp() / self.zeta0;
                }
                self.cell_mass(s_max, last) + g[n - 1] / self.zeta0
            }
        }
    }

    /// Laplace transform ghat(lambda) = int_0^inf g(s) exp(-lambda s) ds,
    /// analytic a/(b + lambda) for exponential kernels, composite
    /// Gauss-Legendre over the sample cells plus the exponential tail bound
    /// for sampled ones.
    pub fn laplace_transform(&self, lambda: Complex64) -> Complex64 {
        match &self.family {
            Family::Exponential { a, b } => Complex64::new(*a, 0.0) / (lambda + *b),
            Family::Zero => Complex64::new(0.0, 0.0),
            Family::Sampled { .. } => self.laplace_sampled(lambda, 1),
        }
    }

    /// Gauss-Legendre transform of a sampled kernel with each sample cell cut
    /// into `split` panels; exposed so refinement studies can check
    /// convergence of the quadrature.
    pub fn laplace_sampled(&self, lambda: Complex64, split: usize) -> Complex64 {
        let Family::Sampled { s: xs, g } = &self.family else {
            return self.laplace_transform(lambda);
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for w in xs.windows(2) {
            let panel = (w[1] - w[0]) / split as f64;
            for p in 0..split {
                let (p0, p1) = (w[0] + p as f64 * panel, w[0] + (p + 1) as f64 * panel);
                let mid = 0.5 * (p0 + p1);
                let half = 0.5 * (p1 - p0);
                for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                    let s = mid + half * x;
                    acc += wt * half * self.eval(s) * (-lambda * s).exp();
                }
            }
        }
        // Tail beyond the last sample under the exponential envelope:
        // int_S^inf g(S) e^{-zeta0 (s-S)} e^{-lambda s} ds.
        let s_last = xs[xs.len() - 1];
        let g_last = g[g.len() - 1];
        acc + g_last * (-lambda * s_last).exp() / (lambda + self.zeta0)
    }

    /// Finite-window transform int_0^S g(s) e^{-lambda s} ds.
    pub fn laplace_truncated(&self, lambda: Complex64, s_max: f64) -> Complex64 {
        match &self.family {
            Family::Exponential { a, b } => {
                let bl = lambda + *b;
                if bl.norm() < 1e-300 {
                    return Complex64::new(a * s_max, 0.0);
                }
                (Complex64::new(1.0, 0.0) - (-bl * s_max).exp()) * *a / bl
            }
            Family::Zero => Complex64::new(0.0, 0.0),
            Family::Sampled { s: xs, g } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for w in xs.windows(2) {
                    let (p0, p1) = (w[0].min(s_max), w[1].min(s_max));
                    if p1 <= p0 {
                        break;
                    }
                    let mid = 0.5 * (p0 + p1);
                    let half = 0.5 * (p1 - p0);
                    for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                        let s = mid + half * x;
                        acc += wt * half * self.eval(s) * (-lambda * s).exp();
                    }
                }
                let s_last = xs[xs.len() - 1];
                if s_max > s_last {
                    // Remaining window under the exponential envelope.
                    let g_last = g[g.len() - 1];
                    let zl = lambda + self.zeta0;
                    let piece = if zl.norm() < 1e-300 {
                        Complex64::new(s_max - s_last, 0.0)
                    } else {
                        (Complex64::new(1.0, 0.0) - (-zl * (s_max - s_last)).exp()) / zl
                    };
                    acc += g_last * (-lambda * s_last).exp() * piece;
                }
                acc
            }
        }
    }

    /// 8-point Gauss-Legendre integral of g(s)·f(s) over [s0, s1].
    pub(crate) fn weighted_panel(&self, s0: f64, s1: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mid = 0.5 * (s0 + s1);
        let half = 0.5 * (s1 - s0);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(x, wt)| {
                let s = mid + half * x;
                wt * half * self.eval(s) * f(s)
            })
            .sum()
    }

    /// Smallest S with tail_mass(S) <= tol.
    pub fn support_radius(&self, tol: f64) -> f64 {
        match &self.family {
            Family::Exponential { a, b } => ((a / b) / tol).ln().max(0.0) / b,
            Family::Zero => 0.0,
            Family::Sampled { .. } => {
                if self.tail_mass(0.0) <= tol {
                    return 0.0;
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                while self.tail_mass(hi) > tol {
                    hi *= 2.0;
                    if hi > 1e9 {
                        return hi;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.tail_mass(mid) > tol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Runs the admissibility gate; `Ok` carries the full report, `Err` a
    /// report-bearing message naming the first violated bound.
    pub fn verify_assumptions(&self) -> KernelReport {
        let mut checks = Vec::new();

        let positive = match &self.family {
            Family::Zero => true,
            Family::Exponential { .. } => true,
            Family::Sampled { g, .. } => g.iter().all(|&v| v >= 0.0),
        };
        checks.push(CheckOutcome {
            name: "nonnegativity".into(),
            pass: positive,
            detail: if positive {
                "g(s) >= 0 on the sample range".into()
            } else {
                "negative sample value found".into()
            },
        });

        let mass_ok = self.ell > 0.0;
        checks.push(CheckOutcome {
            name: "residual stiffness".into(),
            pass: mass_ok,
            detail: format!("g0 = {:.6e}, ell = 1 - g0 = {:.6e}", self.g0, self.ell),
        });

        let (ratio_ok, ratio_detail) = self.check_ratio_bounds();
        checks.push(CheckOutcome {
            name: "decay pinching".into(),
            pass: ratio_ok,
            detail: ratio_detail,
        });

        let pass = checks.iter().all(|c| c.pass);
        KernelReport {
            g0: self.g0,
            ell: self.ell,
            zeta0: self.zeta0,
            zeta1: self.zeta1,
            pass,
            checks,
        }
    }

    /// Checks zeta0 <= -g'/g <= zeta1 (with RATIO_TOLERANCE relative slack) on
    /// the natural grid of the kernel; vacuous where g vanishes.
    fn check_ratio_bounds(&self) -> (bool, String) {
        match &self.family {
            Family::Zero => (true, "vacuous: g is identically zero".into()),
            Family::Exponential { b, .. } => (
                true,
                format!("-g'/g = b = {b} exactly; zeta0 = zeta1 = b"),
            ),
            Family::Sampled { s: xs, g } => {
                let lo = self.zeta0 * (1.0 - RATIO_TOLERANCE);
                let hi = self.zeta1 * (1.0 + RATIO_TOLERANCE);
                let floor = g.iter().cloned().fold(0.0_f64, f64::max) * 1e-14;
                let mut ratio_min = f64::INFINITY;
                let mut ratio_max = f64::NEG_INFINITY;
                for (i, (&s, &gv)) in xs.iter().zip(g.iter()).enumerate() {
                    if gv <= floor {
                        continue;
                    }
                    // Centred difference across the neighbouring samples.
                    let (jm, jp) = (i.saturating_sub(1), (i + 1).min(xs.len() - 1));
                    if jp == jm {
                        continue;
                    }
                    let dg = (g[jp] - g[jm]) / (xs[jp] - xs[jm]);
                    let ratio = -dg / gv;
                    ratio_min = ratio_min.min(ratio);
                    ratio_max = ratio_max.max(ratio);
                    if ratio < lo {
                        return (
                            false,
                            format!(
                                "lower bound violated at s = {s}: -g'/g = {ratio:.6e} < zeta0 = {:.6e}",
                                self.zeta0
                            ),
                        );
                    }
                    if ratio > hi {
                        return (
                            false,
                            format!(
                                "upper bound violated at s = {s}: -g'/g = {ratio:.6e} > zeta1 = {:.6e}",
                                self.zeta1
                            ),
                        );
                    }
                }
                if !ratio_min.is_finite() {
                    return (true, "vacuous: g vanishes at every sample".into());
                }
                (
                    true,
                    format!(
                        "worst -g'/g ratios [{ratio_min:.6e}, {ratio_max:.6e}] inside the declared [{:.6e}, {:.6e}]",
                        self.zeta0, self.zeta1
                    ),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_mass_and_residual() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        assert_relative_eq!(k.g0, 0.5);
        assert_relative_eq!(k.ell, 0.5);

        let k = Kernel::exponential(1.0, 4.0).unwrap();
        assert_relative_eq!(k.g0, 0.25);
        assert_relative_eq!(k.ell, 0.75);
    }

    #[test]
    fn exponential_with_unit_mass_or_more_is_rejected() {
        let err = Kernel::exponential(2.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("ell = 1 - g0 <= 0"), "got: {err}");
        assert!(Kernel::exponential(1.0, 1.0).is_err());
        assert!(Kernel::exponential(-1.0, 1.0).is_err());
        assert!(Kernel::exponential(0.5, 0.0).is_err());
    }

    #[test]
    fn laplace_transform_of_exponential_at_i() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        let got = k.laplace_transform(Complex64::new(0.0, 1.0));
        // 0.5 / (1 + i) = 0.25 - 0.25i.
        assert_relative_eq!(got.re, 0.25, max_relative = 1e-15);
        assert_relative_eq!(got.im, -0.25, max_relative = 1e-15);

        let at_one = k.laplace_transform(Complex64::new(1.0, 0.0));
        assert_relative_eq!(at_one.re, 0.25, max_relative = 1e-15);
        assert_relative_eq!(1.0 - at_one.re, 0.75, max_relative = 1e-15);
    }

    #[test]
    fn tail_mass_matches_closed_forms() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        assert_relative_eq!(k.tail_mass(10.0), 0.5 * (-10.0_f64).exp(), max_relative = 1e-14);
        assert!((k.tail_mass(10.0) - 2.2699964881242427e-5).abs() < 1e-18);

        let k = Kernel::exponential(1.0, 4.0).unwrap();
        assert_relative_eq!(k.tail_mass(2.0), 0.25 * (-8.0_f64).exp(), max_relative = 1e-14);
        assert!((k.tail_mass(2.0) - 8.386565697562796e-5).abs() < 1e-18);
    }

    #[test]
    fn support_radius_inverts_tail_mass() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        let s = k.support_radius(1e-8);
        assert_relative_eq!(k.tail_mass(s), 1e-8, max_relative = 1e-10);
    }

    #[test]
    fn zero_kernel_passes_the_gate_with_unit_stiffness() {
        let k = Kernel::zero();
        assert_eq!(k.g0, 0.0);
        assert_eq!(k.ell, 1.0);
        let report = k.verify_assumptions();
        assert!(report.pass);
    }

    #[test]
    fn exponential_passes_the_gate() {
        let report = Kernel::exponential(0.5, 1.0).unwrap().verify_assumptions();
        assert!(report.pass);
        assert!(report.checks.iter().all(|c| c.pass));
    }

    /// g(s) = 0.5/(1+s)^2 has -g'/g = 2/(1+s) -> 0, so no positive zeta0 can
    /// hold; the gate must fail and name the violated bound.
    #[test]
    fn polynomial_decay_fails_the_pinching_bound() {
        let s: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
        let g: Vec<f64> = s.iter().map(|&x| 0.5 / (1.0 + x).powi(2)).collect();
        let k = Kernel::from_samples(s, g, 0.05, 2.5).unwrap();
        let report = k.verify_assumptions();
        assert!(!report.pass);
        let failing = report.checks.iter().find(|c| !c.pass).unwrap();
        assert_eq!(failing.name, "decay pinching");
        assert!(failing.detail.contains("lower bound violated"), "got: {}", failing.detail);
    }

    /// Sampled version of an exponential passes with honestly declared bounds.
    #[test]
    fn sampled_exponential_passes_the_gate() {
        let s: Vec<f64> = (0..=600).map(|i| i as f64 * 0.02).collect();
        let g: Vec<f64> = s.iter().map(|&x| 0.5 * (-x).exp()).collect();
        let k = Kernel::from_samples(s, g, 0.9, 1.1).unwrap();
        assert_relative_eq!(k.g0, 0.5, max_relative = 1e-4);
        assert!(k.verify_assumptions().pass);
    }

    /// The sampled-kernel Laplace quadrature is converged: successive panel
    /// refinements agree to 1e-10 and the coarse evaluation sits within 1e-9
    /// of the refined reference.
    #[test]
    fn sampled_laplace_quadrature_is_converged() {
        let s: Vec<f64> = (0..=240).map(|i| i as f64 * 0.05).collect();
        let g: Vec<f64> = s.iter().map(|&x| 0.3 * (-2.0 * x).exp()).collect();
        let k = Kernel::from_samples(s, g, 1.9, 2.1).unwrap();
        let lam = Complex64::new(2.0, 0.0);
        let q1 = k.laplace_sampled(lam, 1);
        let q2 = k.laplace_sampled(lam, 2);
        let q4 = k.laplace_sampled(lam, 4);
        assert!((q2 - q4).norm() <= 1e-10 * q4.norm(), "refinements differ: {:e}", (q2 - q4).norm());
        assert!((q1 - q4).norm() <= 1e-9 * q4.norm());
        // The interpolant is close to 0.3 exp(-2s), whose transform at 2 is 0.075.
        assert_relative_eq!(q4.re, 0.075, max_relative = 1e-3);
    }

    #[test]
    fn cell_mass_sums_to_total_mass() {
        let k = Kernel::exponential(0.5, 1.0).unwrap();
        let nodes: Vec<f64> = (0..=50).map(|i| i as f64 * 0.4).collect();
        let total: f64 = nodes.windows(2).map(|w| k.cell_mass(w[0], w[1])).sum();
        assert_relative_eq!(total + k.tail_mass(20.0), k.g0, max_relative = 1e-13);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// |ghat(lambda)| <= g0 whenever Re(lambda) >= 0, for any admissible
        /// exponential kernel.
        #[test]
        fn laplace_transform_bounded_by_total_mass(
            a in 0.05_f64..0.95,
            scale in 1.0_f64..8.0,
            re in 0.0_f64..10.0,
            im in -50.0_f64..50.0,
        ) {
            // b > a guarantees g0 = a/b < 1.
            let b = a * scale + 0.01;
            let k = Kernel::exponential(a, b).unwrap();
            let val = k.laplace_transform(Complex64::new(re, im));
            prop_assert!(val.norm() <= k.g0 * (1.0 + 1e-12));
        }

        /// Tail mass is nonincreasing in S and bounded by g0.
        #[test]
        fn tail_mass_monotone(a in 0.05_f64..0.9, s1 in 0.0_f64..20.0, ds in 0.0_f64..20.0) {
            let k = Kernel::exponential(a, 1.0).unwrap();
            let t1 = k.tail_mass(s1);
            let t2 = k.tail_mass(s1 + ds);
            prop_assert!(t2 <= t1 + 1e-15);
            prop_assert!(t1 <= k.g0 + 1e-15);
        }
    }
}
