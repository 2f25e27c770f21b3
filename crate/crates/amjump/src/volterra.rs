//! Sequential free-boundary solver for the transformed heat problem.
//!
//! Nodes march forward in backward time `tau`. At each node the boundary
//! location `x_B` is pinned by smooth fit (continuity of the price slope
//! across the boundary), the boundary Gamma `P_xx` by the PIDE evaluated at
//! the boundary from the exercise side, and the price row on
//! `[x_B, x_B + span]` by the closed-form ODE recovery. The three updates
//! are iterated to a joint fixed point before the node commits.
//!
//! The whole-line representation evaluated here writes the transformed
//! premium-style unknown as
//!   Ubar = init + (exercise-side source) + (jump source) - (Gamma-jump layer),
//! where the exercise-side source integrates `mu = A + B e^{zeta+f}` below
//! the boundary in closed form, the jump source integrates
//! `c_lam * P` above the boundary numerically, and the Gamma-jump single
//! layer carries the density `Jg = (P_xx + S* e^{x_B}) / h`.

use crate::greens::BoundaryState;
use crate::params::{ParamError, ParamSet, TimeChange};
use crate::special::{erfc, heat_kernel};
use thiserror::Error;

const SQRT_PI: f64 = 1.772453850905516;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "jump intensity is identically zero with constant jump scale: the resolvent \
         collapse degenerates (a_j = 0) and the heat-potential system loses its source; \
         use the lattice or FD oracle for the pure-diffusion problem"
    )]
    SingularNoJump,
    #[error("node {node}: no sign change for the smooth-fit residual on [{lo}, {hi}] (f = {flo}, {fhi})")]
    NoBracket { node: usize, lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("node {node}: fixed point not converged after {iters} iterations (delta = {delta})")]
    NotConverged { node: usize, iters: usize, delta: f64 },
    #[error("node {node}: non-finite value encountered ({what})")]
    NonFinite { node: usize, what: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Backward-time grid family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// equal tau spacing (kept for comparison; the expiry corner is under-resolved)
    Uniform,
    /// ratio-geometric refinement toward tau = 0 where the boundary has a
    /// square-root-type corner: tau_i = tau0 * rho^{M-i} with rho = 0.7^{20/M},
    /// so grids at different M nest exactly
    GeometricNearExpiry,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// number of time steps (nodes 0..=M)
    pub m: usize,
    pub grid: GridKind,
    /// fixed-point convergence on max(|dx_B|, |dP_xx|/(1+|P_xx|))
    pub node_tol: f64,
    /// cap on fixed-point iterations per node
    pub max_iters: usize,
    /// Brent tolerance on the smooth-fit root
    pub root_tol: f64,
    /// s-quadrature sub-intervals per committed interval (in v = sqrt(tau-s))
    pub nsub: usize,
    /// price-row resolution on [x_B, x_B + span]
    pub n_xi: usize,
    pub span: f64,
    /// trapezoid points for the jump-source inner integral
    pub nz: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m: 20,
            grid: GridKind::GeometricNearExpiry,
            node_tol: 1e-8,
            max_iters: 10,
            root_tol: 1e-10,
            nsub: 8,
            n_xi: 120,
            span: 8.0,
            nz: 300,
        }
    }
}

/// Per-node convergence record.
#[derive(Debug, Clone)]
pub struct NodeDiagnostics {
    pub node: usize,
    pub tau: f64,
    pub t: f64,
    pub x_b: f64,
    pub pxx: f64,
    /// fixed-point iterations used
    pub iterations: usize,
    /// final fixed-point delta
    pub delta: f64,
    pub converged: bool,
}

/// Trial values for the node currently being iterated (not yet committed).
#[derive(Debug, Clone)]
struct Trial {
    y: f64,
    x_b: f64,
    jg: f64,
    /// price row from the previous fixed-point pass: (x grid, P values)
    row: Option<(Vec<f64>, Vec<f64>)>,
}

pub struct VolterraSolver<'a> {
    pub p: &'a ParamSet,
    pub tc: &'a TimeChange,
    pub cfg: SolverConfig,
    pub bs: BoundaryState,
}

impl<'a> VolterraSolver<'a> {
    pub fn new(
        p: &'a ParamSet,
        tc: &'a TimeChange,
        cfg: SolverConfig,
    ) -> Result<Self, SolverError> {
        if p.is_singular_no_jump() {
            return Err(SolverError::SingularNoJump);
        }
        let m = cfg.m;
        let tau0 = tc.tau0();
        let mut tau_nodes = Vec::with_capacity(m + 1);
        tau_nodes.push(0.0);
        match cfg.grid {
            GridKind::Uniform => {
                for i in 1..=m {
                    tau_nodes.push(tau0 * i as f64 / m as f64);
                }
            }
            GridKind::GeometricNearExpiry => {
                let rho = 0.7f64.powf(20.0 / m as f64);
                for i in 1..=m {
                    tau_nodes.push(tau0 * rho.powi((m - i) as i32));
                }
            }
        }
        let n = m + 1;
        let s_star = p.s_star;
        let k = p.log_moneyness();
        let mut t_at = Vec::with_capacity(n);
        let mut f_at = Vec::with_capacity(n);
        let mut h_at = Vec::with_capacity(n);
        let mut phi_at = Vec::with_capacity(n);
        let mut c_lam = Vec::with_capacity(n);
        let mut mu_a = Vec::with_capacity(n);
        let mut mu_b = Vec::with_capacity(n);
        for &tau in &tau_nodes {
            let t = tc.t_of_tau(tau);
            let (f, h) = (tc.f_of_t(t), tc.h_of_t(t));
            let co = p.coeffs_exponential(t)?;
            let (phi, dphi) = (p.phi.eval(t), p.phi.deriv(t));
            let (rv, qv, lv) = (p.r.eval(t), p.q.eval(t), p.lam.eval(t));
            t_at.push(t);
            f_at.push(f);
            h_at.push(h);
            phi_at.push(phi);
            c_lam.push(co.a_j / (co.a_v * h));
            // exercise-side source mu(t, zeta) = (d/dtau - d_zz) E = A + B e^{zeta + f}
            mu_a.push(s_star * k.exp() * (phi * (rv + lv) - dphi) / (co.a_v * h));
            mu_b.push(-s_star * (qv * (1.0 + phi) + lv * phi - dphi) / (co.a_v * h));
        }
        let bs = BoundaryState {
            tau_nodes,
            t_at,
            f_at,
            h_at,
            phi_at,
            x_b: vec![0.0; n],
            y: vec![0.0; n],
            pxx: vec![0.0; n],
            g: vec![0.0; n],
            jg: vec![0.0; n],
            c_lam,
            mu_a,
            mu_b,
            x_grids: vec![Vec::new(); n],
            p_rows: vec![Vec::new(); n],
            committed: 0,
            s_star,
            k,
        };
        Ok(VolterraSolver { p, tc, cfg, bs })
    }

    /// Boundary Gamma from the PIDE evaluated at the boundary: inside the
    /// exercise region the price is intrinsic and value/slope are continuous,
    /// so the PIDE pins the continuation-side second derivative:
    ///   P_xx(x_B) = S* [ (2r/sigma^2) e^k - (2q/sigma^2 + 1) e^{x_B} ].
    pub fn solve_pxx_node(&self, i: usize, x_b: f64) -> f64 {
        let t = self.bs.t_at[i];
        let s2 = self.p.sigma.eval(t).powi(2);
        self.bs.s_star
            * ((2.0 * self.p.r.eval(t) / s2) * self.bs.k.exp()
                - (2.0 * self.p.q.eval(t) / s2 + 1.0) * x_b.exp())
    }

    /// Gamma-jump layer density `(P_xx + S* e^{x_B}) / h`.
    fn jg_val(&self, i: usize, x_b: f64) -> f64 {
        (self.solve_pxx_node(i, x_b) + self.bs.s_star * x_b.exp()) / self.bs.h_at[i]
    }

    /// Boundary data with the half-line payoff coefficient (1 for tau > 0,
    /// 1/2 at the expiry kink).
    fn g_val(&self, i: usize, x_b: f64) -> f64 {
        let gamma_b = if self.bs.tau_nodes[i] == 0.0 { 0.5 } else { 1.0 };
        self.bs.s_star / self.bs.h_at[i]
            * (self.bs.phi_at[i] * self.bs.k.exp() - (gamma_b + self.bs.phi_at[i]) * x_b.exp())
    }

    /// Price at committed node `j`: intrinsic at or below the boundary,
    /// tabulated row above, zero beyond the row span.
    pub fn p_at(&self, j: usize, x: f64) -> f64 {
        if x <= self.bs.x_b[j] {
            return self.bs.s_star * (self.bs.k.exp() - x.exp());
        }
        interp_right_zero(&self.bs.x_grids[j], &self.bs.p_rows[j], x)
    }

    /// Exercise-payoff closed form `E(tau_i, z) = (S*/h)[phi e^k - (1+phi) e^{z+f}]`.
    pub fn e_fun(&self, i: usize, z: f64) -> f64 {
        self.bs.s_star / self.bs.h_at[i]
            * (self.bs.phi_at[i] * self.bs.k.exp()
                - (1.0 + self.bs.phi_at[i]) * (z + self.bs.f_at[i]).exp())
    }

    /// Initial-layer closed form: the exercise payoff at expiry diffused
    /// from the half line below the kink,
    ///   int_{-inf}^{k} E(0, zeta) Gamma(z - zeta, tau) dzeta,
    /// with `E(0, zeta) = S*[phi_T - (1 + phi_T) e^zeta]` (h = 1, f = 0 at expiry).
    fn init_term(&self, tau: f64, z: f64) -> f64 {
        let ph_t = self.bs.phi_at[0];
        let st = tau.sqrt();
        let d = (z - self.bs.k) / (2.0 * st);
        let i0 = 0.5 * erfc(d);
        let i1 = (z + tau).exp() * 0.5 * erfc(d + st);
        self.bs.s_star * (ph_t * i0 - (1.0 + ph_t) * i1)
    }

    /// Closed form of the exercise-side source layer at past node `j`:
    ///   int_{-inf}^{y_j} (A_j + B_j e^{zeta + f_j}) Gamma(z - zeta, w) dzeta.
    fn mu_term_inner(&self, j: usize, w: f64, z: f64) -> f64 {
        let sw = w.sqrt();
        let d = (z - self.bs.y[j]) / (2.0 * sw);
        let i0 = 0.5 * erfc(d);
        let i1 = (z + w).exp() * 0.5 * erfc(d + sw);
        self.bs.mu_a[j] * i0 + self.bs.mu_b[j] * self.bs.f_at[j].exp() * i1
    }

    /// Jump-source layer at past node `j`:
    ///   int_{y_j}^{y_j + span} c_lam_j P(s_j, zeta + f_j) Gamma(z - zeta, w) dzeta,
    /// trapezoid on the committed price row (the price is ~0 past the span).
    fn lam_term_inner(&self, j: usize, w: f64, z: f64) -> f64 {
        let n = self.cfg.nz;
        let dz = self.cfg.span / n as f64;
        let mut total = 0.0;
        for iq in 0..=n {
            let zeta = self.bs.y[j] + iq as f64 * dz;
            let val = self.bs.c_lam[j]
                * self.p_at(j, zeta + self.bs.f_at[j])
                * heat_kernel(z - zeta, w);
            total += if iq == 0 || iq == n { 0.5 * val } else { val };
        }
        total * dz
    }

    /// Ascending `v = sqrt(tau - s)` quadrature grid for node `i`: `nsub`
    /// uniform points per committed interval plus the v = 0 endpoint.
    fn v_grid(&self, i: usize) -> Vec<f64> {
        let tau = self.bs.tau_nodes[i];
        let nsub = self.cfg.nsub;
        let mut v = vec![0.0];
        for j in (0..i).rev() {
            // interval [tau_j, tau_{j+1}] maps to v in [vend_{j+1}, vend_j]
            let v_hi = (tau - self.bs.tau_nodes[j]).sqrt();
            let v_lo = (tau - self.bs.tau_nodes[j + 1]).sqrt();
            for q in 0..nsub {
                v.push(v_lo + (v_hi - v_lo) * q as f64 / nsub as f64);
            }
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Piecewise-linear node-value interpolation in s over nodes `0..=i`,
    /// with node `i` taken from `last`.
    fn interp_nodes(&self, i: usize, last: f64, vals: &[f64], s: f64) -> f64 {
        let taus = &self.bs.tau_nodes;
        let at = |j: usize| if j == i { last } else { vals[j] };
        if s <= taus[0] {
            return at(0);
        }
        if s >= taus[i] {
            return at(i);
        }
        let j = taus[..=i].partition_point(|&t| t <= s) - 1;
        let a = (s - taus[j]) / (taus[j + 1] - taus[j]);
        at(j) * (1.0 - a) + at(j + 1) * a
    }

    /// Delta-collapsed `s = tau_i` contribution of the source terms, with
    /// the plain-s trapezoid end weight `(tau_i - tau_{i-1})/2`. The mu and
    /// jump sources collapse pointwise (half weight each exactly on the
    /// boundary); the jump source above the boundary reads the trial row.
    fn delta_slab(&self, i: usize, z: f64, trial: &Trial) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let wt = 0.5 * (self.bs.tau_nodes[i] - self.bs.tau_nodes[i - 1]);
        let (y_i, x_b_i) = (trial.y, trial.x_b);
        let (mu_c, lam_c);
        if z < y_i - 1e-12 {
            mu_c = self.bs.mu_a[i] + self.bs.mu_b[i] * (z + self.bs.f_at[i]).exp();
            lam_c = 0.0;
        } else if (z - y_i).abs() <= 1e-12 {
            mu_c = 0.5 * (self.bs.mu_a[i] + self.bs.mu_b[i] * (z + self.bs.f_at[i]).exp());
            lam_c = 0.5
                * self.bs.c_lam[i]
                * self.bs.s_star
                * (self.bs.k.exp() - x_b_i.exp());
        } else {
            mu_c = 0.0;
            lam_c = match &trial.row {
                Some((xg, pr)) => {
                    let xq = z + self.bs.f_at[i];
                    let pv = if xq > x_b_i {
                        interp_right_zero(xg, pr, xq)
                    } else {
                        self.bs.s_star * (self.bs.k.exp() - xq.exp())
                    };
                    self.bs.c_lam[i] * pv
                }
                None => 0.0,
            };
        }
        wt * (mu_c + lam_c)
    }

    /// Whole-line representation of the transformed unknown at `(tau_i, z)`,
    /// with node-i quantities taken from `trial`. Set `with_j` false to drop
    /// the Gamma-jump single layer (that variant is smooth across the
    /// boundary and is what the smooth-fit derivative differences).
    fn rep_impl(&self, i: usize, z: f64, trial: &Trial, with_j: bool) -> f64 {
        let tau = self.bs.tau_nodes[i];
        let mut total = self.init_term(tau, z);
        if i > 0 {
            // past-node closed-form inner values, interpolated linearly in s
            let mut mu_nodes = vec![0.0; i + 1];
            let mut lam_nodes = vec![0.0; i + 1];
            for j in 0..i {
                let w = tau - self.bs.tau_nodes[j];
                mu_nodes[j] = self.mu_term_inner(j, w, z);
                lam_nodes[j] = self.lam_term_inner(j, w, z);
            }
            // mu/lam at s = tau_i enter through the delta slab instead
            let v = self.v_grid(i);
            let mut integ = vec![0.0; v.len()];
            for (idx, &vv) in v.iter().enumerate() {
                let w = vv * vv;
                let s = tau - w;
                if w < 1e-300 {
                    // v = 0 endpoint: sources vanish with the 2v Jacobian;
                    // the Gamma-jump kernel collapses on-curve to 1/sqrt(pi)
                    integ[idx] = if with_j && (z - trial.y).abs() < 1e-12 {
                        -trial.jg / SQRT_PI
                    } else {
                        0.0
                    };
                    continue;
                }
                let mu_v = self.interp_nodes(i, 0.0, &mu_nodes, s);
                let lam_v = self.interp_nodes(i, 0.0, &lam_nodes, s);
                let mut val = mu_v + lam_v;
                if with_j {
                    let y_s = self.interp_nodes(i, trial.y, &self.bs.y, s);
                    let jg_s = self.interp_nodes(i, trial.jg, &self.bs.jg, s);
                    val -= jg_s * heat_kernel(z - y_s, w);
                }
                integ[idx] = val * 2.0 * vv;
            }
            total += trapezoid(&v, &integ);
            total += self.delta_slab(i, z, trial);
        }
        total
    }

    /// On-curve principal value of `d/dz` of the Gamma-jump single layer at
    /// `z = y_i`. The odd dipole kernel cancels to leading order along the
    /// curve; the surviving v = 0 endpoint value is `Jg_i y'_i / (2 sqrt(pi))`.
    fn jterm_pv_z(&self, i: usize, trial: &Trial) -> f64 {
        let tau = self.bs.tau_nodes[i];
        let v = self.v_grid(i);
        let mut out = vec![0.0; v.len()];
        for (idx, &vv) in v.iter().enumerate() {
            let w = vv * vv;
            let s = tau - w;
            if w < 1e-300 {
                let yp = if i >= 1 {
                    (trial.y - self.bs.y[i - 1]) / (tau - self.bs.tau_nodes[i - 1])
                } else {
                    0.0
                };
                out[idx] = trial.jg * yp / (2.0 * SQRT_PI);
                continue;
            }
            let y_s = self.interp_nodes(i, trial.y, &self.bs.y, s);
            let jg_s = self.interp_nodes(i, trial.jg, &self.bs.jg, s);
            let dz = trial.y - y_s;
            out[idx] = jg_s * dz / (2.0 * w) * heat_kernel(dz, w) * 2.0 * vv;
        }
        trapezoid(&v, &out)
    }

    /// Smooth-fit residual at trial boundary `x_b`: the exercise-side slope
    /// of the representation must match the payoff slope,
    ///   d/dz[rep_noJ](y-) + (PV of the layer derivative - Jg/2) - E_z(y) = 0,
    /// with the smooth part differenced one-sidedly from below (second order).
    fn resid(&self, i: usize, x_b: f64, row: &Option<(Vec<f64>, Vec<f64>)>) -> f64 {
        let dstep = (0.02 * self.bs.tau_nodes[i].sqrt()).max(1e-7);
        let y_i = x_b - self.bs.f_at[i];
        let trial = Trial { y: y_i, x_b, jg: self.jg_val(i, x_b), row: row.clone() };
        let r1 = self.rep_impl(i, y_i - dstep, &trial, false);
        let r0 = self.rep_impl(i, y_i - 2.0 * dstep, &trial, false);
        let rm = self.rep_impl(i, y_i - 3.0 * dstep, &trial, false);
        let dz_no_j = (3.0 * r1 - 4.0 * r0 + rm) / (2.0 * dstep);
        let jz = self.jterm_pv_z(i, &trial) - trial.jg / 2.0;
        let ez = -self.bs.s_star / self.bs.h_at[i] * (1.0 + self.bs.phi_at[i]) * x_b.exp();
        dz_no_j + jz - ez
    }

    /// Recover the price row at node `i` from the first-order ODE
    /// `phi P + P_x = h Ubar`:
    ///   P(x) = e^{-phi x} [ S*(e^k - e^{x_B}) e^{phi x_B}
    ///                       + h int_{x_B}^{x} e^{phi eta} Ubar(tau, eta - f) deta ].
    fn recover_row(&self, i: usize, trial: &Trial) -> (Vec<f64>, Vec<f64>) {
        let n = self.cfg.n_xi;
        let (phi, h, f) = (self.bs.phi_at[i], self.bs.h_at[i], self.bs.f_at[i]);
        let xg: Vec<f64> = (0..=n)
            .map(|q| trial.x_b + self.cfg.span * q as f64 / n as f64)
            .collect();
        let integ: Vec<f64> = xg
            .iter()
            .map(|&x| (phi * x).exp() * self.rep_impl(i, x - f, trial, true))
            .collect();
        let c0 = self.bs.s_star * (self.bs.k.exp() - trial.x_b.exp()) * (phi * trial.x_b).exp();
        let mut cum = 0.0;
        let mut row = Vec::with_capacity(n + 1);
        for q in 0..=n {
            if q > 0 {
                cum += 0.5 * (integ[q] + integ[q - 1]) * (xg[q] - xg[q - 1]);
            }
            row.push((-phi * xg[q]).exp() * (c0 + h * cum));
        }
        (xg, row)
    }

    /// Brent root find of the smooth-fit residual on the standard bracket
    /// `[x_B^{i-1} - 0.8, min(x_B^{i-1} + 0.25, -1e-9)]`.
    pub fn solve_xb_node(
        &self,
        i: usize,
        row: &Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<f64, SolverError> {
        let prev = self.bs.x_b[i - 1];
        let lo = prev - 0.8;
        let hi = (prev + 0.25).min(-1e-9);
        let flo = self.resid(i, lo, row);
        let fhi = self.resid(i, hi, row);
        if !flo.is_finite() || !fhi.is_finite() {
            return Err(SolverError::NonFinite { node: i, what: "smooth-fit residual".into() });
        }
        if flo * fhi > 0.0 {
            return Err(SolverError::NoBracket { node: i, lo, hi, flo, fhi });
        }
        Ok(brent(|x| self.resid(i, x, row), lo, hi, flo, fhi, self.cfg.root_tol))
    }

    /// Commit node 0 (expiry): boundary at the kink, PIDE Gamma, zero
    /// transformed premium row.
    pub fn init_node0(&mut self) {
        let k = self.bs.k;
        self.bs.x_b[0] = k;
        self.bs.y[0] = k - self.bs.f_at[0];
        self.bs.pxx[0] = self.solve_pxx_node(0, k);
        self.bs.jg[0] = self.jg_val(0, k);
        self.bs.g[0] = self.g_val(0, k);
        let n = self.cfg.n_xi;
        self.bs.x_grids[0] = (0..=n)
            .map(|q| k + self.cfg.span * q as f64 / n as f64)
            .collect();
        self.bs.p_rows[0] = vec![0.0; n + 1];
        self.bs.committed = 1;
    }

    /// Solve node `i` to its joint fixed point (boundary root, PIDE Gamma,
    /// price row) and commit it.
    pub fn advance_node(&mut self, i: usize) -> Result<NodeDiagnostics, SolverError> {
        assert_eq!(i, self.bs.committed, "nodes must be advanced in order");
        let mut row: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut x_b = self.bs.x_b[i - 1];
        let mut pxx = self.bs.pxx[i - 1];
        let mut delta = f64::INFINITY;
        let mut iters = 0;
        for it in 1..=self.cfg.max_iters {
            iters = it;
            let x_new = self.solve_xb_node(i, &row)?;
            let pxx_new = self.solve_pxx_node(i, x_new);
            let trial = Trial {
                y: x_new - self.bs.f_at[i],
                x_b: x_new,
                jg: self.jg_val(i, x_new),
                row: row.take(),
            };
            let (xg, pr) = self.recover_row(i, &trial);
            if pr.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite { node: i, what: "price row".into() });
            }
            delta = (x_new - x_b).abs().max((pxx_new - pxx).abs() / (1.0 + pxx.abs()));
            x_b = x_new;
            pxx = pxx_new;
            row = Some((xg, pr));
            // the first pass has no row at all, so its delta is not a
            // meaningful fixed-point gap; always do at least two passes
            if it >= 2 && delta < self.cfg.node_tol {
                break;
            }
        }
        let converged = delta < self.cfg.node_tol;
        if !converged {
            return Err(SolverError::NotConverged { node: i, iters, delta });
        }
        let (xg, pr) = row.expect("row populated");
        self.bs.x_b[i] = x_b;
        self.bs.y[i] = x_b - self.bs.f_at[i];
        self.bs.pxx[i] = pxx;
        self.bs.jg[i] = self.jg_val(i, x_b);
        self.bs.g[i] = self.g_val(i, x_b);
        self.bs.x_grids[i] = xg;
        self.bs.p_rows[i] = pr;
        self.bs.committed = i + 1;
        Ok(NodeDiagnostics {
            node: i,
            tau: self.bs.tau_nodes[i],
            t: self.bs.t_at[i],
            x_b,
            pxx,
            iterations: iters,
            delta,
            converged,
        })
    }

    /// Run the full sequential solve and return per-node diagnostics.
    pub fn solve_boundary(&mut self) -> Result<Vec<NodeDiagnostics>, SolverError> {
        self.init_node0();
        let mut diags = Vec::with_capacity(self.cfg.m);
        for i in 1..=self.cfg.m {
            diags.push(self.advance_node(i)?);
        }
        Ok(diags)
    }

    /// Transformed unknown `Ubar(tau_i, z)` at a committed node.
    pub fn rep(&self, i: usize, z: f64) -> f64 {
        assert!(i < self.bs.committed, "node {i} not committed");
        let trial = Trial {
            y: self.bs.y[i],
            x_b: self.bs.x_b[i],
            jg: self.bs.jg[i],
            row: Some((self.bs.x_grids[i].clone(), self.bs.p_rows[i].clone())),
        };
        self.rep_impl(i, z, &trial, true)
    }

    /// `Ubar` with the same-time jump-source slab dropped (above the
    /// boundary the slab reads the node's own price row; the collocation
    /// assembly moves exactly that coupling onto its left-hand side).
    pub fn rep_without_self_slab(&self, i: usize, z: f64) -> f64 {
        assert!(i < self.bs.committed, "node {i} not committed");
        let trial = Trial {
            y: self.bs.y[i],
            x_b: self.bs.x_b[i],
            jg: self.bs.jg[i],
            row: None,
        };
        self.rep_impl(i, z, &trial, true)
    }
}

/// Linear interpolation with zero extrapolation on the right and clamped
/// left value (callers handle the region left of the grid themselves).
fn interp_right_zero(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= *xs.last().unwrap() {
        return 0.0;
    }
    let j = xs.partition_point(|&v| v <= x) - 1;
    let a = (x - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] * (1.0 - a) + ys[j + 1] * a
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 1..x.len() {
        s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    s
}

/// Brent's method on a bracketing interval (inverse-quadratic /secant steps
/// with bisection fallback). `fa`, `fb` are pre-evaluated endpoint values.
fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> f64 {
    if fa.abs() < fb.abs() {
        core::mem::swap(&mut a, &mut b);
        core::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..100 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let rr = fb / fc;
                p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1 * xm.signum() };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    b
}
