//! Exponentially-mapped Legendre collocation basis on `[x_B, inf)`.
//!
//! The half line is mapped to `u in [-1, 1)` by `u = 1 - 2 e^{-(x-x_B)/L}`,
//! and the basis is `E_n(x) = P_n(u(x))` with the Legendre polynomials
//! `P_n`. Under the induced weight `w_e(x) = (2/L) e^{-(x-x_B)/L}` the basis
//! is exactly orthogonal: `int E_n E_m w_e dx = 2 delta_nm / (2n+1)`.

use crate::greens::k1_at_s_equals_tau;
use crate::quad::{gauss_legendre, gl_integrate};
use crate::volterra::VolterraSolver;

#[derive(Debug, Clone)]
pub struct ELBasis {
    /// highest polynomial degree (basis size is n + 1)
    pub n: usize,
    /// map length scale
    pub l: f64,
    /// left endpoint (exercise boundary)
    pub x_b: f64,
}

impl ELBasis {
    pub fn new(n: usize, l: f64, x_b: f64) -> Self {
        assert!(l > 0.0);
        ELBasis { n, l, x_b }
    }

    pub fn size(&self) -> usize {
        self.n + 1
    }

    /// Mapped coordinate `u(x) = 1 - 2 e^{-(x - x_B)/L}`.
    pub fn u_of_x(&self, x: f64) -> f64 {
        1.0 - 2.0 * (-(x - self.x_b) / self.l).exp()
    }

    /// Inverse map `x(u) = x_B - L ln((1-u)/2)`.
    pub fn x_of_u(&self, u: f64) -> f64 {
        self.x_b - self.l * ((1.0 - u) / 2.0).ln()
    }

    /// Orthogonality weight `w_e(x) = (2/L) e^{-(x-x_B)/L}`.
    pub fn weight(&self, x: f64) -> f64 {
        2.0 / self.l * (-(x - self.x_b) / self.l).exp()
    }

    /// All basis values `E_0..E_n` at `x` by the Legendre three-term
    /// recurrence `(k+1) P_{k+1} = (2k+1) u P_k - k P_{k-1}`.
    pub fn eval_basis(&self, x: f64) -> Vec<f64> {
        let u = self.u_of_x(x);
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(1.0);
        if self.n >= 1 {
            out.push(u);
        }
        for k in 1..self.n {
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0) * u * out[k] - kf * out[k - 1]) / (kf + 1.0);
            out.push(next);
        }
        out
    }

    /// Series evaluation `sum_n c_n E_n(x)`.
    pub fn eval_series(&self, coeffs: &[f64], x: f64) -> f64 {
        self.eval_basis(x).iter().zip(coeffs).map(|(e, c)| e * c).sum()
    }

    /// Orthogonal projection of `f` onto the basis:
    ///   c_j = (2j+1)/2 int_{-1}^{1} f(x(u)) P_j(u) du,
    /// by 64-point Gauss-Legendre in the mapped coordinate.
    pub fn project<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        let (gn, gw) = gauss_legendre(64);
        let mut coeffs = vec![0.0; self.n + 1];
        for (&u, &w) in gn.iter().zip(&gw) {
            let fv = f(self.x_of_u(u));
            // Legendre values at u
            let mut p0 = 1.0;
            let mut p1 = u;
            for (j, c) in coeffs.iter_mut().enumerate() {
                let pj = match j {
                    0 => 1.0,
                    1 => u,
                    _ => {
                        let kf = (j - 1) as f64;
                        let p2 = ((2.0 * kf + 1.0) * u * p1 - kf * p0) / (kf + 1.0);
                        p0 = p1;
                        p1 = p2;
                        p2
                    }
                };
                *c += w * fv * pj;
            }
        }
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c *= (2.0 * j as f64 + 1.0) / 2.0;
        }
        coeffs
    }
}

/// Discretized collocation system for the price at a committed node.
#[derive(Debug, Clone)]
pub struct DiscretizedSystem {
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// collocation points in x
    pub points: Vec<f64>,
    pub basis: ELBasis,
}

/// Build the discretized system for the price at committed node `i`: the
/// price is expanded as `P = sum c_n E_n` and tested against the basis
/// under its orthogonality weight (Galerkin on a 64-point mapped
/// Gauss-Legendre rule, so the pure-basis block is the exact diagonal
/// `2/(2n+1)`). The same-time (`s = tau`) jump-source slab couples the
/// unknown price to itself; through the recovery ODE that coupling is
///   DP(x) = e^{-phi x} h wt c_lam int K1|_{s=tau}(x, eta) P(eta) d eta
/// (with `K1|_{s=tau}` the collapsed kernel and `wt` the end trapezoid
/// weight), which is linear in the coefficients and therefore moves to the
/// left-hand side. Everything else — the price rebuilt with the self-slab
/// removed — forms the right-hand side.
pub fn assemble_discretized_system(sol: &VolterraSolver, i: usize, n: usize, l: f64) -> DiscretizedSystem {
    let bs = &sol.bs;
    assert!(i < bs.committed && i >= 1, "need a committed non-expiry node");
    let basis = ELBasis::new(n, l, bs.x_b[i]);
    let (phi, h, f, x_b) = (bs.phi_at[i], bs.h_at[i], bs.f_at[i], bs.x_b[i]);
    let wt = 0.5 * (bs.tau_nodes[i] - bs.tau_nodes[i - 1]);
    let c_lam = bs.c_lam[i];
    let size = n + 1;
    // quadrature points in the mapped coordinate, ascending in x
    let (gu, gw) = gauss_legendre(64);
    let points: Vec<f64> = gu.iter().map(|&u| basis.x_of_u(u)).collect();
    let (gq, gwq) = gauss_legendre(32);
    // base price at all quadrature points by one incremental sweep of the
    // recovery integral; the transformed premium has decayed past the
    // solver's row span, so the integral is frozen there
    let c0 = bs.s_star * (bs.k.exp() - x_b.exp()) * (phi * x_b).exp();
    let x_cut = x_b + sol.cfg.span;
    let mut base = vec![0.0; points.len()];
    let mut cum = 0.0;
    let mut prev = x_b;
    for (j, &xj) in points.iter().enumerate() {
        let seg_end = xj.min(x_cut);
        if seg_end > prev {
            let n_panels = ((seg_end - prev) / 0.25).ceil().max(1.0) as usize;
            for q in 0..n_panels {
                let pa = prev + (seg_end - prev) * q as f64 / n_panels as f64;
                let pb = prev + (seg_end - prev) * (q + 1) as f64 / n_panels as f64;
                cum += gl_integrate(
                    |eta| (phi * eta).exp() * sol.rep_without_self_slab(i, eta - f),
                    pa,
                    pb,
                    &gq,
                    &gwq,
                );
            }
            prev = seg_end;
        }
        base[j] = (-phi * xj).exp() * (c0 + h * cum);
    }
    // self-slab coupling per basis column, same incremental sweep; the
    // collapsed kernel reduces the double integral to a running cumulative
    // of e^{phi eta} E_col(eta)
    let mut coupling = vec![vec![0.0; size]; points.len()];
    let mut cum_cols = vec![0.0; size];
    prev = x_b;
    for (j, &xj) in points.iter().enumerate() {
        if xj > prev {
            let n_panels = ((xj - prev) / 0.25).ceil().max(1.0) as usize;
            for q in 0..n_panels {
                let pa = prev + (xj - prev) * q as f64 / n_panels as f64;
                let pb = prev + (xj - prev) * (q + 1) as f64 / n_panels as f64;
                for col in 0..size {
                    cum_cols[col] += gl_integrate(
                        |eta| {
                            k1_at_s_equals_tau(phi, xj, eta, x_b)
                                * basis.eval_basis(eta)[col]
                        },
                        pa,
                        pb,
                        &gq,
                        &gwq,
                    );
                }
            }
            prev = xj;
        }
        coupling[j].copy_from_slice(&cum_cols);
    }
    // Galerkin assembly: rows tested with E_m under the u-rule weight
    let mut matrix = vec![vec![0.0; size]; size];
    let mut rhs = vec![0.0; size];
    for (j, &xj) in points.iter().enumerate() {
        let e_vals = basis.eval_basis(xj);
        for m in 0..size {
            let test = gw[j] * e_vals[m];
            rhs[m] += test * base[j];
            for col in 0..size {
                let a_col = e_vals[col]
                    - (-phi * xj).exp() * h * wt * c_lam * coupling[j][col];
                matrix[m][col] += test * a_col;
            }
        }
    }
    DiscretizedSystem { matrix, rhs, points, basis }
}

impl DiscretizedSystem {
    /// Solve by Gaussian elimination with partial pivoting; returns the
    /// basis coefficients.
    pub fn solve(&self) -> Vec<f64> {
        let n = self.rhs.len();
        let mut a: Vec<Vec<f64>> = self.matrix.clone();
        let mut b = self.rhs.clone();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let d = a[col][col];
            for row in col + 1..n {
                let m = a[row][col] / d;
                for cc in col..n {
                    a[row][cc] -= m * a[col][cc];
                }
                b[row] -= m * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut s = b[row];
            for cc in row + 1..n {
                s -= a[row][cc] * x[cc];
            }
            x[row] = s / a[row][row];
        }
        x
    }

    /// Value-matching residual of solved coefficients at the boundary:
    /// the expansion must hit the intrinsic value `K - S_B` there (each
    /// `E_n(x_B) = P_n(-1) = (-1)^n`).
    pub fn algebraic_residual(&self, coeffs: &[f64], intrinsic_at_boundary: f64) -> f64 {
        let at_b: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * if n % 2 == 0 { 1.0 } else { -1.0 })
            .sum();
        at_b - intrinsic_at_boundary
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_time_change, test_param_set};
    use crate::quad::gl_integrate;
    use crate::volterra::SolverConfig;

    #[test]
    fn basis_recurrence_matches_explicit_legendre() {
        let b = ELBasis::new(4, 10.0, -0.5);
        for &x in &[-0.5, 0.0, 1.0, 5.0, 20.0] {
            let u = b.u_of_x(x);
            let e = b.eval_basis(x);
            let p2 = 0.5 * (3.0 * u * u - 1.0);
            let p3 = 0.5 * (5.0 * u * u * u - 3.0 * u);
            let p4 = 0.125 * (35.0 * u.powi(4) - 30.0 * u * u + 3.0);
            assert!((e[0] - 1.0).abs() < 1e-13);
            assert!((e[1] - u).abs() < 1e-13);
            assert!((e[2] - p2).abs() < 1e-13);
            assert!((e[3] - p3).abs() < 1e-13);
            assert!((e[4] - p4).abs() < 1e-13);
        }
    }

    #[test]
    fn basis_orthogonality_under_mapped_weight() {
        // int E_n E_m w_e dx = int P_n P_m du; 64-point GL in u is exact for
        // degree <= 24 products
        let b = ELBasis::new(12, 10.0, -0.7);
        let (gn, gw) = gauss_legendre(64);
        for n in 0..=12usize {
            for m in 0..=12usize {
                let v = gl_integrate(
                    |u| {
                        let x = b.x_of_u(u);
                        let e = b.eval_basis(x);
                        e[n] * e[m]
                    },
                    -1.0,
                    1.0,
                    &gn,
                    &gw,
                );
                let expect = if n == m { 2.0 / (2.0 * n as f64 + 1.0) } else { 0.0 };
                assert!(
                    (v - expect).abs() < 1e-10,
                    "({n},{m}): {v} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn projection_recovers_polynomial() {
        let b = ELBasis::new(6, 10.0, 0.0);
        // f = 2 E_0 - 0.7 E_3 + 0.1 E_6
        let f = |x: f64| {
            let e = b.eval_basis(x);
            2.0 * e[0] - 0.7 * e[3] + 0.1 * e[6]
        };
        let c = b.project(f);
        let expect = [2.0, 0.0, 0.0, -0.7, 0.0, 0.0, 0.1];
        for (j, (&cj, &ej)) in c.iter().zip(&expect).enumerate() {
            assert!((cj - ej).abs() < 1e-12, "coeff {j}: {cj} vs {ej}");
        }
    }

    #[test]
    fn collocation_system_reproduces_solver_price() {
        let p = test_param_set(60.0);
        let tc = build_time_change(&p);
        let mut sol = crate::volterra::VolterraSolver::new(
            &p,
            &tc,
            SolverConfig { m: 8, ..Default::default() },
        )
        .unwrap();
        sol.solve_boundary().unwrap();
        let i = 8;
        let sys = assemble_discretized_system(&sol, i, 12, 10.0);
        let coeffs = sys.solve();
        // reconstruction vs the solver's own price at probe points
        for &dx in &[0.1, 0.4, 0.9, 1.6, 2.5] {
            let x = sol.bs.x_b[i] + dx;
            let rec = sys.basis.eval_series(&coeffs, x);
            let truth = crate::pricer::price_at(
                &sol,
                &crate::pricer::PriceQuery { node: i, spot: 60.0 * x.exp() },
            )
            .price;
            let rel = ((rec - truth) / truth).abs();
            assert!(rel < 5e-3, "x = {x}: collocation {rec} vs price {truth} (rel {rel})");
        }
        // boundary value-matching residual of the solved expansion; the
        // mapped endpoint u = -1 carries the largest truncation error of a
        // degree-12 Legendre expansion, so only truncation-level agreement
        // is expected there
        let intrinsic = 60.0 * (1.0 - sol.bs.x_b[i].exp());
        let res = sys.algebraic_residual(&coeffs, intrinsic);
        assert!(res.abs() < 0.02 * intrinsic, "algebraic residual {res}");
    }
}
