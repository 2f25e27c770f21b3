//! Green's-function representation of the transformed free-boundary heat
//! problem: the image-pair kernel `G`, its boundary limits, the boundary
//! data `g`, the gradient `Psi`, and the closed-form kernel integrals
//! (`K1`, `I1`–`I3`, the collapsed gamma integral) used by the pricer and
//! the Kou reduction.
//!
//! Everything here works in transformed coordinates: backward time
//! `tau = int_t^T a_v`, space `z = x - f(t)`, boundary `y(tau) = x_B - f`.
//! The half-line heat problem for `U = u/h` (with `u = phi P + P_x`) has
//! boundary data
//!   g(tau) = (S*/h) [ phi e^k - (gamma_b + phi) e^{x_B} ],
//! with `gamma_b = 1` for `tau > 0` (full coefficient of the exercise
//! payoff; anything less breaks value matching against the terminal
//! condition) and `gamma_b = 1/2` exactly at `tau = 0` where the boundary
//! sits at the payoff kink `x_B = k`.

use crate::params::{ParamSet, TimeChange};
use crate::special::{erf, erfc, erfcx};
use thiserror::Error;

const SQRT_PI: f64 = 1.772453850905516;

#[derive(Debug, Error)]
pub enum GreensError {
    #[error("tau {tau} outside the solved range [0, {max}]")]
    TauOutOfRange { tau: f64, max: f64 },
    #[error("tau {tau} is not a committed node")]
    NotANode { tau: f64 },
    #[error("node {i} not committed (committed = {committed})")]
    Uncommitted { i: usize, committed: usize },
    #[error("z = {z} is at or below the boundary y = {y}; interior formula invalid")]
    BelowBoundary { z: f64, y: f64 },
    #[error("s = {s} must be strictly less than tau = {tau}; use the s = tau branch")]
    DegenerateS { s: f64, tau: f64 },
}

/// Per-node state of the sequentially solved exercise boundary.
///
/// Nodes `0..committed` are final; the solver may carry trial values for
/// the node currently being iterated outside of this struct. All arrays
/// share one length and are indexed by the `tau_nodes` grid (`tau_0 = 0`).
#[derive(Debug, Clone)]
pub struct BoundaryState {
    /// increasing backward times, `tau_nodes[0] = 0`
    pub tau_nodes: Vec<f64>,
    /// calendar times `t(tau_i)` (decreasing)
    pub t_at: Vec<f64>,
    pub f_at: Vec<f64>,
    pub h_at: Vec<f64>,
    pub phi_at: Vec<f64>,
    /// log-boundary `x_B(tau_i)`; `x_B[0] = k`
    pub x_b: Vec<f64>,
    /// transformed boundary `y = x_B - f`
    pub y: Vec<f64>,
    /// boundary Gamma `P_xx(tau_i, x_B)`, continuation-side limit
    pub pxx: Vec<f64>,
    /// boundary data `g(tau_i)` of the transformed heat problem
    pub g: Vec<f64>,
    /// single-layer density `(P_xx + S* e^{x_B}) / h` (the Gamma jump)
    pub jg: Vec<f64>,
    /// source scale `a_j / (a_v h)` at the nodes
    pub c_lam: Vec<f64>,
    /// exercise-side source `mu(s, zeta) = mu_a + mu_b e^{zeta + f}` coefficients
    pub mu_a: Vec<f64>,
    pub mu_b: Vec<f64>,
    /// per-node price tabulation in `x` on `[x_B, x_B + span]`
    pub x_grids: Vec<Vec<f64>>,
    pub p_rows: Vec<Vec<f64>>,
    /// number of committed nodes (entries `0..committed` are final)
    pub committed: usize,
    pub s_star: f64,
    pub k: f64,
}

impl BoundaryState {
    pub fn len(&self) -> usize {
        self.tau_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_nodes.is_empty()
    }

    /// Piecewise-linear interpolation of a committed nodal array in tau.
    fn interp(&self, vals: &[f64], tau: f64) -> f64 {
        let n = self.committed;
        let taus = &self.tau_nodes[..n];
        if tau <= taus[0] {
            return vals[0];
        }
        if tau >= taus[n - 1] {
            return vals[n - 1];
        }
        let j = taus.partition_point(|&t| t <= tau) - 1;
        let a = (tau - taus[j]) / (taus[j + 1] - taus[j]);
        vals[j] * (1.0 - a) + vals[j + 1] * a
    }

    pub fn y_at(&self, tau: f64) -> f64 {
        self.interp(&self.y, tau)
    }

    /// `dy/dtau` at a node: forward difference at node 0, central at
    /// interior nodes, backward at the newest committed node (the solver is
    /// sequential, so no future nodes exist to difference against).
    pub fn y_prime(&self, i: usize) -> f64 {
        let n = self.committed;
        let (t, y) = (&self.tau_nodes, &self.y);
        if n < 2 {
            return 0.0;
        }
        if i == 0 {
            (y[1] - y[0]) / (t[1] - t[0])
        } else if i + 1 >= n {
            (y[i] - y[i - 1]) / (t[i] - t[i - 1])
        } else {
            // central difference on a non-uniform grid
            let (dl, dr) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            let wl = dr / (dl * (dl + dr));
            let wr = dl / (dr * (dl + dr));
            wl * (y[i] - y[i - 1]) + wr * (y[i + 1] - y[i])
        }
    }

    /// Index of the committed node with backward time `tau` (1e-12 match).
    pub fn node_of_tau(&self, tau: f64) -> Result<usize, GreensError> {
        self.tau_nodes[..self.committed]
            .iter()
            .position(|&t| (t - tau).abs() <= 1e-12 * (1.0 + tau))
            .ok_or(GreensError::NotANode { tau })
    }
}

/// Boundary data of the transformed heat problem at backward time `tau`,
/// with `y` (equivalently `x_B`) interpolated between committed nodes:
///   g(tau) = (S*/h) [ phi e^k - (gamma_b + phi) e^{x_B} ],
/// `gamma_b = 1/2` at `tau = 0` (boundary at the payoff kink), else 1.
pub fn g_boundary(
    bs: &BoundaryState,
    tc: &TimeChange,
    p: &ParamSet,
    tau: f64,
) -> Result<f64, GreensError> {
    let max = bs.tau_nodes[bs.committed - 1];
    if !(0.0..=max + 1e-12).contains(&tau) {
        return Err(GreensError::TauOutOfRange { tau, max });
    }
    let t = tc.t_of_tau(tau);
    let (phi, h) = (p.phi.eval(t), tc.h_of_t(t));
    let x_b = bs.y_at(tau) - tc.f_of_t(t);
    let gamma_b = if tau == 0.0 { 0.5 } else { 1.0 };
    Ok(bs.s_star / h * (phi * bs.k.exp() - (gamma_b + phi) * x_b.exp()))
}

/// Gradient of the transformed solution at the boundary,
/// `Psi = (P_zz - S* phi e^{x_B}) / h`, with `P_zz` the continuation-side
/// limit (the committed `pxx`; the second derivative jumps across the
/// boundary while value and slope are continuous by smooth fit).
pub fn psi(bs: &BoundaryState, i: usize) -> Result<f64, GreensError> {
    if i >= bs.committed {
        return Err(GreensError::Uncommitted { i, committed: bs.committed });
    }
    Ok((bs.pxx[i] - bs.s_star * bs.phi_at[i] * bs.x_b[i].exp()) / bs.h_at[i])
}

// ---------------------------------------------------------------------------
// Interval-exact layer primitives.
//
// On one s-sub-interval the boundary is linear in s, so with w = tau - s the
// kernel arguments are affine in w: z - y(s) = e + m w (direct) and
// z - 2y(tau) + y(s) = et - m w (image, et = 2(z - y(tau)) - e). Both layer
// kernels then have elementary antiderivatives in w, which is what makes the
// z -> y(tau)+ limit exact rather than a quadrature artifact.
// ---------------------------------------------------------------------------

/// `e^{a} erfc(v)` with the product formed through erfcx for `v >= 0`, so
/// `a` up to ~700 combined with tiny erfc stays accurate.
fn exp_erfc(a: f64, v: f64) -> f64 {
    if v >= 0.0 {
        (a - v * v).exp() * erfcx(v)
    } else {
        a.exp() * erfc(v)
    }
}

/// `e^{a} erfc(v)` for `v >= 0` in the layer-primitive context, where
/// `a = -e m` and `v = (e -+ m w)/(2 sqrt w)` give `a - v^2 <= 0`; the
/// result is therefore bounded by 1 and carries full relative accuracy.
fn exp_erfc_bounded(a: f64, v: f64) -> f64 {
    debug_assert!(v >= 0.0);
    (a - v * v).exp() * erfcx(v)
}

/// Antiderivative in `w` of the single-layer kernel `Gamma(e + m w, w)`:
///   A(w) = [ e^{-e m} erfc((e - m w)/(2 sqrt w)) - erfc((e + m w)/(2 sqrt w)) ] / (2m),
/// with the `m -> 0` branch
///   A0(w) = [ sqrt(w) e^{-e^2/4w} - (|e|/2) sqrt(pi) erfc(|e|/(2 sqrt w)) ] / sqrt(pi).
fn single_anti(e: f64, m: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let sw = w.sqrt();
    if m.abs() < 3e-7 {
        let c = 0.5 * e.abs();
        return (sw * (-c * c / w).exp() - c * SQRT_PI * erfc(c / sw)) / SQRT_PI;
    }
    let vm = (e - m * w) / (2.0 * sw);
    let vp = (e + m * w) / (2.0 * sw);
    (exp_erfc(-e * m, vm) - erfc(vp)) / (2.0 * m)
}

// Pair-difference forms of the layer antiderivatives. Steep committed
// intervals make `a = -e m` run into the hundreds, where the plateau value
// `e^{a}` (the erfc argument gone negative) overflows even though every
// endpoint difference is bounded: the plateau is constant in `w`, so it
// cancels exactly unless the erfc argument changes sign inside the
// interval — and a sign change at `w* > 0` forces `e = m w*`, hence
// `a = -m^2 w* <= 0` and a representable plateau. The helpers below split
// each endpoint value into a bounded erfcx part plus a plateau count and
// assemble the difference from those pieces.

/// Endpoint difference `D(wb) - D(wa)` of the dipole antiderivative
///   D(w) = 1/2 e^{-e m} erfc((e - m w) / (2 sqrt w)),
/// which integrates the dipole kernel
/// `(e + m w) / (4 sqrt(pi) w^{3/2}) * exp(-(e + m w)^2 / 4w)` in `w`.
/// At `w = 0` the endpoint value is the `w -> 0+` limit taken before
/// `e -> 0` (zero for `e >= 0`), the ordering the boundary limit needs.
fn dipole_anti_diff(e: f64, m: f64, wa: f64, wb: f64) -> f64 {
    let a = -e * m;
    // (bounded part, plateau count)
    let part = |w: f64| -> (f64, f64) {
        if w <= 0.0 {
            return (0.0, if e < 0.0 { 1.0 } else { 0.0 });
        }
        let v = (e - m * w) / (2.0 * w.sqrt());
        if v >= 0.0 {
            (0.5 * exp_erfc_bounded(a, v), 0.0)
        } else {
            // e^a erfc(v) = 2 e^a - e^a erfc(-v)
            (-0.5 * exp_erfc_bounded(a, -v), 1.0)
        }
    };
    let (ba, sa) = part(wa);
    let (bb, sb) = part(wb);
    let mut d = bb - ba;
    if sb != sa {
        d += (sb - sa) * a.exp();
    }
    d
}

/// Endpoint difference `A(wb) - A(wa)` of the single-layer antiderivative
/// (see `single_anti` for the formula), overflow-safe.
fn single_anti_diff(e: f64, m: f64, wa: f64, wb: f64) -> f64 {
    if m.abs() < 3e-7 {
        return single_anti(e, m, wb) - single_anti(e, m, wa);
    }
    let a = -e * m;
    let part = |w: f64| -> (f64, f64) {
        if w <= 0.0 {
            // w -> 0+ limit: e^a erfc(vm) -> 2 e^a [e<0], erfc(vp) -> 2 [e<0]
            return if e < 0.0 { (-1.0 / m, 1.0) } else { (0.0, 0.0) };
        }
        let sw = w.sqrt();
        let vm = (e - m * w) / (2.0 * sw);
        let vp = (e + m * w) / (2.0 * sw);
        let (first, count) = if vm >= 0.0 {
            (exp_erfc_bounded(a, vm), 0.0)
        } else {
            (-exp_erfc_bounded(a, -vm), 1.0)
        };
        ((first - erfc(vp)) / (2.0 * m), count)
    };
    let (ba, sa) = part(wa);
    let (bb, sb) = part(wb);
    let mut d = bb - ba;
    if sb != sa {
        d += (sb - sa) * a.exp() / m;
    }
    d
}

/// Endpoint difference of `dD/de` (the boundary limit of `G_z` needs it):
///   dD/de = -m/2 e^{-em} erfc(v) - e^{-em - v^2} / (2 sqrt(pi w)),
/// with `v = (e - m w) / (2 sqrt w)`. Overflow-safe.
fn dipole_anti_de_diff(e: f64, m: f64, wa: f64, wb: f64) -> f64 {
    let a = -e * m;
    let part = |w: f64| -> (f64, f64) {
        if w <= 0.0 {
            return (0.0, if e < 0.0 { 1.0 } else { 0.0 });
        }
        let sw = w.sqrt();
        let v = (e - m * w) / (2.0 * sw);
        let gauss = (a - v * v).exp() / (2.0 * SQRT_PI * sw);
        if v >= 0.0 {
            (-0.5 * m * exp_erfc_bounded(a, v) - gauss, 0.0)
        } else {
            (0.5 * m * exp_erfc_bounded(a, -v) - gauss, 1.0)
        }
    };
    let (ba, sa) = part(wa);
    let (bb, sb) = part(wb);
    let mut d = bb - ba;
    if sb != sa {
        d += (sb - sa) * (-m) * a.exp();
    }
    d
}

/// Node densities `Psi(s) + y'(s) g(s)` for the single-layer term.
fn psig_nodes(bs: &BoundaryState, upto: usize) -> Vec<f64> {
    (0..=upto)
        .map(|j| {
            let psi_j = (bs.pxx[j] - bs.s_star * bs.phi_at[j] * bs.x_b[j].exp()) / bs.h_at[j];
            psi_j + bs.y_prime(j) * bs.g[j]
        })
        .collect()
}

/// Interior value of the image-pair representation `G(tau, z, y(tau))` at a
/// committed node, for `z > y(tau)`:
///   G = (point-mass initial term) - int [Psi + y' g] (Gamma_d - Gamma_i) ds
///       + int g (dipole_d + dipole_i) ds,
/// with the s-integrals evaluated through the interval-exact layer
/// antiderivatives above (`nsub = 16` sub-intervals per committed interval).
pub fn g_interior(
    bs: &BoundaryState,
    tau: f64,
    z: f64,
) -> Result<f64, GreensError> {
    g_interior_with(bs, tau, z, 16)
}

pub fn g_interior_with(
    bs: &BoundaryState,
    tau: f64,
    z: f64,
    nsub: usize,
) -> Result<f64, GreensError> {
    let i = bs.node_of_tau(tau)?;
    let y_tau = bs.y[i];
    if z <= y_tau {
        return Err(GreensError::BelowBoundary { z, y: y_tau });
    }
    if i == 0 {
        // tau = 0 carries the distributional initial datum; the pointwise
        // value away from the kink is 0
        return Ok(0.0);
    }
    let tau = bs.tau_nodes[i];
    let (k, f_tau) = (bs.k, bs.f_at[i]);
    // collapsed point-mass initial term
    let pref = -bs.s_star * (k - f_tau).exp() / (4.0 * (core::f64::consts::PI * tau).sqrt());
    let mut total = pref
        * ((-(k - z) * (k - z) / (4.0 * tau)).exp()
            - (-(k + z - 2.0 * y_tau) * (k + z - 2.0 * y_tau) / (4.0 * tau)).exp());
    let psig = psig_nodes(bs, i);
    // re-walk with explicit g density (layer_sum's closure carries psig only)
    let mut single = 0.0;
    let mut double = 0.0;
    for j in 0..i {
        let (s_lo, s_hi) = (bs.tau_nodes[j], bs.tau_nodes[j + 1]);
        let m = (bs.y[j + 1] - bs.y[j]) / (s_hi - s_lo);
        let e = z - bs.y[j + 1] - m * (tau - s_hi);
        let et = 2.0 * (z - y_tau) - e;
        let (v_hi, v_lo) = ((tau - s_lo).sqrt(), (tau - s_hi).sqrt());
        for q in 0..nsub {
            let va = v_lo + (v_hi - v_lo) * q as f64 / nsub as f64;
            let vb = v_lo + (v_hi - v_lo) * (q + 1) as f64 / nsub as f64;
            let (wa, wb) = (va * va, vb * vb);
            let s_pt = if j + 1 == i && q == 0 { tau } else { tau - 0.5 * (wa + wb) };
            let a = ((s_pt - s_lo) / (s_hi - s_lo)).clamp(0.0, 1.0);
            let pg = psig[j] * (1.0 - a) + psig[j + 1] * a;
            let gv = bs.g[j] * (1.0 - a) + bs.g[j + 1] * a;
            single -= pg
                * (single_anti_diff(e, m, wa, wb) - single_anti_diff(et, -m, wa, wb));
            double += gv
                * (dipole_anti_diff(e, m, wa, wb) + dipole_anti_diff(et, -m, wa, wb));
        }
    }
    total += single + double;
    Ok(total)
}

/// Boundary limit of `G`: analytically `lim_{z -> y+} G = g(tau)` — on the
/// curve the direct and image kernels cancel identically, so only the
/// double-layer jump survives and equals the density at `tau`. Returned
/// through `g_boundary` rather than any numerical limit.
pub fn g_at_boundary(
    bs: &BoundaryState,
    tc: &TimeChange,
    p: &ParamSet,
    tau: f64,
) -> Result<f64, GreensError> {
    g_boundary(bs, tc, p, tau)
}

/// Boundary limit of `G_z` at committed node `i`, from the continuation
/// side. Uses the exact `d/dz` of the interval layer antiderivatives
/// evaluated at `z = y(tau)` (the limit exists; term-by-term interchange of
/// limit and s-integral does not, so no raw kernel quadrature here).
pub fn gz_at_boundary(bs: &BoundaryState, i: usize) -> Result<f64, GreensError> {
    gz_at_boundary_with(bs, i, 16)
}

pub fn gz_at_boundary_with(bs: &BoundaryState, i: usize, nsub: usize) -> Result<f64, GreensError> {
    if i >= bs.committed {
        return Err(GreensError::Uncommitted { i, committed: bs.committed });
    }
    if i == 0 {
        return Ok(0.0); // empty s-range; initial dipole term vanishes at y(0) = k
    }
    let tau = bs.tau_nodes[i];
    let (k, f_tau, y_tau) = (bs.k, bs.f_at[i], bs.y[i]);
    // z-derivative of the collapsed initial term at z = y(tau):
    // -S* e^{k-f}/(4 sqrt(pi tau)) * (k - y)/tau * e^{-(k-y)^2/4tau}
    let mut total = -bs.s_star * (k - f_tau).exp()
        / (4.0 * (core::f64::consts::PI * tau).sqrt())
        * (k - y_tau)
        / tau
        * (-(k - y_tau) * (k - y_tau) / (4.0 * tau)).exp();
    let psig = psig_nodes(bs, i);
    for j in 0..i {
        let (s_lo, s_hi) = (bs.tau_nodes[j], bs.tau_nodes[j + 1]);
        let m = (bs.y[j + 1] - bs.y[j]) / (s_hi - s_lo);
        let e = y_tau - bs.y[j + 1] - m * (tau - s_hi); // z = y(tau)
        let et = -e; // 2(z - y_tau) - e at z = y_tau
        let (v_hi, v_lo) = ((tau - s_lo).sqrt(), (tau - s_hi).sqrt());
        for q in 0..nsub {
            let va = v_lo + (v_hi - v_lo) * q as f64 / nsub as f64;
            let vb = v_lo + (v_hi - v_lo) * (q + 1) as f64 / nsub as f64;
            let (wa, wb) = (va * va, vb * vb);
            let s_pt = if j + 1 == i && q == 0 { tau } else { tau - 0.5 * (wa + wb) };
            let a = ((s_pt - s_lo) / (s_hi - s_lo)).clamp(0.0, 1.0);
            let pg = psig[j] * (1.0 - a) + psig[j + 1] * a;
            let gv = bs.g[j] * (1.0 - a) + bs.g[j + 1] * a;
            // d/dz of the single layer: +psig [D(e,m) - D(et,-m)]
            total += pg
                * (dipole_anti_diff(e, m, wa, wb) - dipole_anti_diff(et, -m, wa, wb));
            // d/dz of the double layer: +g [dD/de(e,m) + dD/de(et,-m)]
            total += gv
                * (dipole_anti_de_diff(e, m, wa, wb) + dipole_anti_de_diff(et, -m, wa, wb));
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Closed-form kernel integrals.
// ---------------------------------------------------------------------------

/// A kernel value with an optional log-scale split: when the assembling
/// exponent would exceed the f64 range (|exponent| > 700), `value` holds a
/// sign/mantissa in ±[1, e) and `log_scale` the natural-log magnitude.
#[derive(Debug, Clone, Copy)]
pub struct KernelEval {
    pub value: f64,
    pub log_scale: Option<f64>,
}

impl KernelEval {
    pub fn plain(value: f64) -> Self {
        KernelEval { value, log_scale: None }
    }

    /// Collapse to f64 (may overflow to inf if the split was populated for
    /// a genuinely out-of-range magnitude).
    pub fn to_f64(&self) -> f64 {
        match self.log_scale {
            None => self.value,
            Some(ls) => self.value * ls.exp(),
        }
    }
}

/// `e^{expo} * (erf(u_hi) - erf(u_lo))` assembled overflow-safely: large
/// same-sign arguments route through erfcx so the difference of nearly-equal
/// erfc tails never underflows before the exponential is applied.
fn exp_erf_delta(expo: f64, u_hi: f64, u_lo: f64) -> KernelEval {
    let (log_mag, sign) = if u_hi >= 6.0 && u_lo >= 6.0 {
        // erf(u_hi) - erf(u_lo) = erfc(u_lo) - erfc(u_hi)
        let (a, b) = (u_lo, u_hi); // a <= b after ordering below
        let (a, b, sg) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let bracket = erfcx(a) - (a * a - b * b).exp() * erfcx(b);
        (expo - a * a + bracket.max(1e-300).ln(), sg)
    } else if u_hi <= -6.0 && u_lo <= -6.0 {
        // erf(u_hi) - erf(u_lo) = erfc(-u_lo) - erfc(-u_hi), both tails
        let (a, b) = (-u_hi, -u_lo);
        let (a, b, sg) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let bracket = erfcx(a) - (a * a - b * b).exp() * erfcx(b);
        (expo - a * a + bracket.max(1e-300).ln(), sg)
    } else {
        let d = erf(u_hi) - erf(u_lo);
        if d == 0.0 {
            return KernelEval::plain(0.0);
        }
        (expo + d.abs().ln(), d.signum())
    };
    if log_mag.abs() <= 700.0 {
        KernelEval::plain(sign * log_mag.exp())
    } else {
        KernelEval { value: sign * (log_mag - log_mag.floor()).exp(), log_scale: Some(log_mag.floor()) }
    }
}

fn ke_add(a: KernelEval, b: KernelEval) -> KernelEval {
    match (a.log_scale, b.log_scale) {
        (None, None) => KernelEval::plain(a.value + b.value),
        _ => {
            let (la, lb) = (a.log_scale.unwrap_or(0.0), b.log_scale.unwrap_or(0.0));
            let l = la.max(lb);
            let v = a.value * (la - l).exp() + b.value * (lb - l).exp();
            if l.abs() <= 700.0 {
                KernelEval::plain(v * l.exp())
            } else {
                KernelEval { value: v, log_scale: Some(l) }
            }
        }
    }
}

fn ke_neg(a: KernelEval) -> KernelEval {
    KernelEval { value: -a.value, log_scale: a.log_scale }
}

/// Closed form of the image-pair kernel integral
///   K1(tau, x, s, xi) = 1/(2 sqrt(pi w)) int_{x_B}^{x} e^{phi eta}
///       [ e^{-(xi - eta - f_w)^2/4w} - e^{-(xi - 2 y_tau + eta + f_w)^2/4w} ] d eta,
/// with `w = tau - s` and `f_w = f(t(w))`. Each Gaussian integrates to an
/// erf difference after completing the square in `eta`.
#[allow(clippy::too_many_arguments)]
pub fn k1_closed(
    tc: &TimeChange,
    p: &ParamSet,
    tau: f64,
    x: f64,
    s: f64,
    xi: f64,
    x_b_tau: f64,
    y_tau: f64,
) -> Result<KernelEval, GreensError> {
    if s >= tau {
        return Err(GreensError::DegenerateS { s, tau });
    }
    let w = tau - s;
    let f_w = tc.f_of_t(tc.t_of_tau(w));
    let phi = p.phi.eval(tc.t_of_tau(tau));
    let sw = w.sqrt();
    // direct image: center m1 = xi - f_w, exponent phi*m1 + phi^2 w
    let m1 = xi - f_w;
    let t1 = exp_erf_delta(
        phi * m1 + phi * phi * w,
        (x - m1 - 2.0 * w * phi) / (2.0 * sw),
        (x_b_tau - m1 - 2.0 * w * phi) / (2.0 * sw),
    );
    // mirrored image: center m2 = 2 y_tau - xi - f_w
    let m2 = 2.0 * y_tau - xi - f_w;
    let t2 = exp_erf_delta(
        phi * m2 + phi * phi * w,
        (x - m2 - 2.0 * w * phi) / (2.0 * sw),
        (x_b_tau - m2 - 2.0 * w * phi) / (2.0 * sw),
    );
    let sum = ke_add(t1, ke_neg(t2));
    Ok(KernelEval { value: 0.5 * sum.value, log_scale: sum.log_scale })
}

/// Degenerate `s = tau` branch of `K1`: the heat kernel collapses to a
/// delta pair; for `xi >= x_B` only the direct delta can land inside the
/// integration range, giving the piecewise values
///   0 (x < xi),  e^{phi xi}/2 (x = xi),  e^{phi xi} (x > xi).
pub fn k1_at_s_equals_tau(phi: f64, x: f64, xi: f64, x_b: f64) -> f64 {
    debug_assert!(xi >= x_b - 1e-12);
    let _ = x_b;
    if x < xi - 1e-14 {
        0.0
    } else if (x - xi).abs() <= 1e-14 {
        0.5 * (phi * xi).exp()
    } else {
        (phi * xi).exp()
    }
}

/// `d/dxi` of `k1_closed`, in closed form (differentiate the erf arguments
/// and the exponents; the mirrored image flips the sign of `dxi`).
#[allow(clippy::too_many_arguments)]
pub fn k1_dxi_closed(
    tc: &TimeChange,
    p: &ParamSet,
    tau: f64,
    x: f64,
    s: f64,
    xi: f64,
    x_b_tau: f64,
    y_tau: f64,
) -> Result<f64, GreensError> {
    if s >= tau {
        return Err(GreensError::DegenerateS { s, tau });
    }
    let w = tau - s;
    let f_w = tc.f_of_t(tc.t_of_tau(w));
    let phi = p.phi.eval(tc.t_of_tau(tau));
    let sw = w.sqrt();
    let gaussian = |u: f64| (-u * u).exp();
    // direct term: 1/2 e^{phi m1 + phi^2 w} [erf(u_x) - erf(u_b)], m1 = xi - f_w
    let m1 = xi - f_w;
    let (u1x, u1b) = (
        (x - m1 - 2.0 * w * phi) / (2.0 * sw),
        (x_b_tau - m1 - 2.0 * w * phi) / (2.0 * sw),
    );
    let e1 = (phi * m1 + phi * phi * w).exp();
    // d/dxi: exponent contributes +phi; u-args contribute -1/(2 sqrt w)
    let d1 = 0.5
        * e1
        * (phi * (erf(u1x) - erf(u1b))
            - (gaussian(u1x) - gaussian(u1b)) / (SQRT_PI * sw));
    // mirrored term: m2 = 2 y_tau - xi - f_w; dm2/dxi = -1
    let m2 = 2.0 * y_tau - xi - f_w;
    let (u2x, u2b) = (
        (x - m2 - 2.0 * w * phi) / (2.0 * sw),
        (x_b_tau - m2 - 2.0 * w * phi) / (2.0 * sw),
    );
    let e2 = (phi * m2 + phi * phi * w).exp();
    let d2 = 0.5
        * e2
        * (-phi * (erf(u2x) - erf(u2b))
            + (gaussian(u2x) - gaussian(u2b)) / (SQRT_PI * sw));
    Ok(d1 - d2)
}

/// Arguments shared by the `I1`–`I3` closed forms.
#[derive(Debug, Clone, Copy)]
pub struct IArgs {
    pub tau: f64,
    pub x: f64,
    pub x_b: f64,
    pub y_tau: f64,
    pub f_tau: f64,
    pub phi: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IVals {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

/// Antiderivative of `e^{a eta} erfc((eta - b)/c)`:
///   (1/a) [ e^{a eta} erfc((eta-b)/c) + e^{a b + a^2 c^2/4} erf((eta - b - a c^2/2)/c) ].
fn anti_exp_erfc_rising(a: f64, b: f64, c: f64, eta: f64) -> f64 {
    ((a * eta).exp() * erfc((eta - b) / c)
        + (a * b + 0.25 * a * a * c * c).exp() * erf((eta - b - 0.5 * a * c * c) / c))
        / a
}

/// Antiderivative of `e^{a eta} erfc((b - eta)/c)`:
///   (1/a) [ e^{a eta} erfc((b-eta)/c) - e^{a b + a^2 c^2/4} erf((eta - b - a c^2/2)/c) ].
fn anti_exp_erfc_falling(a: f64, b: f64, c: f64, eta: f64) -> f64 {
    ((a * eta).exp() * erfc((b - eta) / c)
        - (a * b + 0.25 * a * a * c * c).exp() * erf((eta - b - 0.5 * a * c * c) / c))
        / a
}

/// Closed form of the double integral
///   I1 = int_{x_B}^{x} e^{phi eta} int_{y0}^{inf} e^{xi}
///        [ e^{-(xi - eta - f)^2/4tau} - e^{-(xi + eta + f - 2 y_tau)^2/4tau} ] dxi deta.
/// The inner xi-integral is a shifted Gaussian tail (erfc); the outer
/// eta-integral then reduces to the `e^{a eta} erfc` antiderivatives. The
/// `a = phi - 1` factor of the mirrored part crosses zero at `phi = 1`, so
/// that branch falls back to direct quadrature near the pole.
pub fn i1_closed(a: &IArgs) -> f64 {
    let (tau, x, x_b, y_tau, f, phi, y0) =
        (a.tau, a.x, a.x_b, a.y_tau, a.f_tau, a.phi, a.y0);
    let c = 2.0 * tau.sqrt();
    let spt = (core::f64::consts::PI * tau).sqrt();
    // direct: inner = sqrt(pi tau) e^{eta + f + tau} erfc((y0 - eta - f - 2 tau)/c)
    let ap = phi + 1.0;
    let b1 = y0 - f - 2.0 * tau;
    let direct = spt
        * (tau + f).exp()
        * (anti_exp_erfc_falling(ap, b1, c, x) - anti_exp_erfc_falling(ap, b1, c, x_b));
    // mirrored: inner = sqrt(pi tau) e^{2 y_tau - eta - f + tau} erfc((eta - b2)/c)
    let am = phi - 1.0;
    let b2 = 2.0 * y_tau + 2.0 * tau - y0 - f;
    let mirrored = if am.abs() < 1e-6 {
        // near the phi = 1 pole: quadrature of the eta-integral directly
        spt * (tau + 2.0 * y_tau - f).exp()
            * crate::quad::adaptive_quad(
                |eta| (am * eta).exp() * erfc((eta - b2) / c),
                x_b,
                x,
                1e-12,
                1e-12,
            )
    } else {
        spt * (tau + 2.0 * y_tau - f).exp()
            * (anti_exp_erfc_rising(am, b2, c, x) - anti_exp_erfc_rising(am, b2, c, x_b))
    };
    direct - mirrored
}

/// Closed form of
///   I2 = int_{x_B}^{x} e^{phi eta}
///        [ e^{-(eta + f_s - y_s)^2/4w} - e^{-(eta + f_s + y_s - 2 y_tau)^2/4w} ] deta.
pub fn i2_closed(a: &IArgs, s: f64, y_s: f64, f_s: f64) -> f64 {
    i2_generic(a, s, y_s, f_s, -1.0)
}

/// Sum-variant of I2 (needed inside I3, where integration by parts pairs
/// the two Gaussians with a PLUS sign).
fn i2_sum(a: &IArgs, s: f64, y_s: f64, f_s: f64) -> f64 {
    i2_generic(a, s, y_s, f_s, 1.0)
}

fn i2_generic(a: &IArgs, s: f64, y_s: f64, f_s: f64, sign: f64) -> f64 {
    let w = a.tau - s;
    let sw = w.sqrt();
    let spw = (core::f64::consts::PI * w).sqrt();
    let phi = a.phi;
    let term = |center: f64| {
        spw * (phi * center + phi * phi * w).exp()
            * (erf((a.x - center - 2.0 * w * phi) / (2.0 * sw))
                - erf((a.x_b - center - 2.0 * w * phi) / (2.0 * sw)))
    };
    let c1 = y_s - f_s;
    let c2 = 2.0 * a.y_tau - y_s - f_s;
    term(c1) + sign * term(c2)
}

/// Closed form of
///   I3 = int_{x_B}^{x} e^{phi eta} [ (eta + f_s - y_s) g1 + (eta + f_s + y_s - 2 y_tau) g2 ] deta,
/// `g1`, `g2` the two Gaussians of I2. Since `(eta - c) g = -2w dg/deta`,
/// integration by parts gives
///   I3 = 2w { phi * I2sum - [ e^{phi eta} (g1 + g2) ]_{x_B}^{x} },
/// where I2sum is the SUM pairing of the two Gaussians (the difference
/// pairing of I2 does not integrate this kernel).
pub fn i3_closed(a: &IArgs, s: f64, y_s: f64, f_s: f64) -> f64 {
    let w = a.tau - s;
    let g1 = |eta: f64| (-(eta + f_s - y_s).powi(2) / (4.0 * w)).exp();
    let g2 = |eta: f64| (-(eta + f_s + y_s - 2.0 * a.y_tau).powi(2) / (4.0 * w)).exp();
    let bdry = |eta: f64| (a.phi * eta).exp() * (g1(eta) + g2(eta));
    2.0 * w * (a.phi * i2_sum(a, s, y_s, f_s) - (bdry(a.x) - bdry(a.x_b)))
}

/// Bundled evaluation: `I1` always; `I2`, `I3` when an `(s, y_s, f_s)`
/// triple is supplied (they live under the past-time s-integral).
pub fn i_integrals(a: &IArgs, past: Option<(f64, f64, f64)>) -> IVals {
    let mut out = IVals { i1: i1_closed(a), ..Default::default() };
    if let Some((s, y_s, f_s)) = past {
        out.i2 = i2_closed(a, s, y_s, f_s);
        out.i3 = i3_closed(a, s, y_s, f_s);
    }
    out
}

/// Collapsed half-line gamma integral
///   int_{-inf}^{y0} S* e^{-f} [ Gamma(z - xi, tau) - Gamma(z + xi - 2 y_tau, tau) ] dxi
///   = (S*/2) e^{-f} [ erf((y0 - z)/(2 sqrt tau)) - erf((y0 + z - 2 y_tau)/(2 sqrt tau)) ].
pub fn gamma_integral_closed(s_star: f64, f_tau: f64, tau: f64, z: f64, y_tau: f64, y0: f64) -> f64 {
    assert!(tau > 0.0, "tau = 0 must use the pointwise delta collapse");
    let c = 2.0 * tau.sqrt();
    0.5 * s_star
        * (-f_tau).exp()
        * (erf((y0 - z) / c) - erf((y0 + z - 2.0 * y_tau) / c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_time_change, test_param_set};
    use crate::quad::adaptive_quad;
    use crate::special::heat_kernel;

    /// A small synthetic committed state with hand-set densities.
    fn synthetic_state() -> BoundaryState {
        let taus = vec![0.0, 0.02, 0.05, 0.09];
        let y = vec![0.0, -0.25, -0.38, -0.47];
        let n = taus.len();
        BoundaryState {
            tau_nodes: taus,
            t_at: vec![1.0, 0.8, 0.5, 0.1],
            f_at: vec![0.0; n],
            h_at: vec![1.0; n],
            phi_at: vec![0.25; n],
            x_b: y.clone(),
            y,
            pxx: vec![20.0, 26.0, 30.0, 33.0],
            g: vec![-30.0, -22.0, -19.0, -17.0],
            jg: vec![0.0; n],
            c_lam: vec![0.0; n],
            mu_a: vec![0.0; n],
            mu_b: vec![0.0; n],
            x_grids: vec![Vec::new(); n],
            p_rows: vec![Vec::new(); n],
            committed: n,
            s_star: 60.0,
            k: 0.0,
        }
    }

    fn brute_force_g(bs: &BoundaryState, i: usize, z: f64) -> f64 {
        let tau = bs.tau_nodes[i];
        let (k, f_tau, y_tau, s_star) = (bs.k, bs.f_at[i], bs.y[i], bs.s_star);
        let psig = psig_nodes(bs, i);
        let interp = |vals: &[f64], s: f64| -> f64 {
            let taus = &bs.tau_nodes[..=i];
            let j = taus.partition_point(|&t| t <= s).min(i) - 1;
            let a = (s - taus[j]) / (taus[j + 1] - taus[j]);
            vals[j] * (1.0 - a) + vals[j + 1] * a
        };
        let pref = -s_star * (k - f_tau).exp() / (4.0 * (core::f64::consts::PI * tau).sqrt());
        let mut total = pref
            * ((-(k - z) * (k - z) / (4.0 * tau)).exp()
                - (-(k + z - 2.0 * y_tau) * (k + z - 2.0 * y_tau) / (4.0 * tau)).exp());
        // integrate per committed interval in v = sqrt(tau - s)
        for j in 0..i {
            let (v_lo, v_hi) =
                ((tau - bs.tau_nodes[j + 1]).sqrt(), (tau - bs.tau_nodes[j]).sqrt());
            total += adaptive_quad(
                |v| {
                    let w = v * v;
                    let s = tau - w;
                    if w < 1e-300 {
                        return 0.0;
                    }
                    let ys = interp(&bs.y, s);
                    let pg = interp(&psig, s);
                    let gv = interp(&bs.g, s);
                    let single = -pg
                        * (heat_kernel(z - ys, w) - heat_kernel(z - 2.0 * y_tau + ys, w));
                    let dip = |u: f64| {
                        u / (4.0 * SQRT_PI * w.powf(1.5)) * (-u * u / (4.0 * w)).exp()
                    };
                    let double = gv * (dip(z - ys) + dip(z + ys - 2.0 * y_tau));
                    (single + double) * 2.0 * v
                },
                v_lo,
                v_hi,
                1e-12,
                1e-12,
            );
        }
        total
    }

    #[test]
    fn g_interior_matches_brute_force_quadrature() {
        let bs = synthetic_state();
        for &(i, dz) in &[(1usize, 0.3), (2, 0.15), (3, 0.5), (3, 0.05)] {
            let z = bs.y[i] + dz;
            let fast = g_interior_with(&bs, bs.tau_nodes[i], z, 192).unwrap();
            let slow = brute_force_g(&bs, i, z);
            assert!(
                (fast - slow).abs() < 2e-6 * (1.0 + slow.abs()),
                "node {i} dz={dz}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn g_interior_vanishes_far_from_boundary() {
        let bs = synthetic_state();
        let v = g_interior(&bs, bs.tau_nodes[3], bs.y[3] + 40.0).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn g_interior_rejects_exercise_side() {
        let bs = synthetic_state();
        assert!(g_interior(&bs, bs.tau_nodes[2], bs.y[2] - 0.1).is_err());
        assert!(g_interior(&bs, 0.033, 1.0).is_err()); // not a node
    }

    #[test]
    fn boundary_limit_reproduces_density() {
        // the load-bearing identity: Richardson extrapolation of G at
        // z -> y(tau)+ recovers g(tau) — on-curve the image pairs cancel
        // identically and only the double-layer jump survives
        let bs = synthetic_state();
        for i in 1..bs.committed {
            let tau = bs.tau_nodes[i];
            let scale = (tau - bs.tau_nodes[i - 1]).sqrt();
            let eps: Vec<f64> = [0.1, 0.03, 0.01, 0.003].iter().map(|e| e * scale).collect();
            let vals: Vec<f64> = eps
                .iter()
                .map(|&e| g_interior(&bs, tau, bs.y[i] + e).unwrap())
                .collect();
            // Neville polynomial extrapolation to eps = 0
            let mut p = vals.clone();
            for lvl in 1..p.len() {
                for j in 0..p.len() - lvl {
                    p[j] = (eps[j + lvl] * p[j] - eps[j] * p[j + 1]) / (eps[j + lvl] - eps[j]);
                }
            }
            let g_i = bs.g[i];
            assert!(
                (p[0] - g_i).abs() < 1e-6 * (1.0 + g_i.abs()),
                "node {i}: extrapolated {} vs g {}",
                p[0],
                g_i
            );
        }
    }

    #[test]
    fn g_boundary_at_expiry_is_minus_half_s_star() {
        let p = test_param_set(60.0);
        let tc = build_time_change(&p);
        let mut bs = synthetic_state();
        bs.committed = 1; // only the tau = 0 node
        let g0 = g_boundary(&bs, &tc, &p, 0.0).unwrap();
        assert!((g0 - (-30.0)).abs() < 1e-12, "g(0) = {g0}");
    }

    #[test]
    fn psi_cancellation() {
        let mut bs = synthetic_state();
        let i = 2;
        bs.pxx[i] = bs.s_star * bs.phi_at[i] * bs.x_b[i].exp();
        assert!(psi(&bs, i).unwrap().abs() < 1e-14);
        assert!(psi(&bs, 99).is_err());
    }

    #[test]
    fn gz_constant_boundary_zero_densities() {
        let mut bs = synthetic_state();
        let y0 = -0.2;
        for j in 0..bs.len() {
            bs.y[j] = y0;
            bs.x_b[j] = y0;
            bs.g[j] = 0.0;
            // make Psi + y' g vanish: pxx = S* phi e^{x_b}
            bs.pxx[j] = bs.s_star * bs.phi_at[j] * y0.exp();
        }
        let i = 3;
        let gz = gz_at_boundary(&bs, i).unwrap();
        // only the initial-dipole term survives
        let tau = bs.tau_nodes[i];
        let expect = -bs.s_star * (bs.k).exp() / (4.0 * (core::f64::consts::PI * tau).sqrt())
            * (bs.k - y0)
            / tau
            * (-(bs.k - y0) * (bs.k - y0) / (4.0 * tau)).exp();
        assert!((gz - expect).abs() < 1e-12, "{gz} vs {expect}");
    }

    #[test]
    fn gz_matches_quadrature_when_double_layer_absent() {
        // with g = 0 the G_z boundary limit is a plain convergent integral
        // (the single-layer derivative limit); compare against quadrature
        let mut bs = synthetic_state();
        for j in 0..bs.len() {
            bs.g[j] = 0.0;
        }
        let i = 3;
        let tau = bs.tau_nodes[i];
        let y_tau = bs.y[i];
        let psig = psig_nodes(&bs, i);
        let interp = |vals: &[f64], s: f64| -> f64 {
            let taus = &bs.tau_nodes[..=i];
            let j = taus.partition_point(|&t| t <= s).min(i) - 1;
            let a = (s - taus[j]) / (taus[j + 1] - taus[j]);
            vals[j] * (1.0 - a) + vals[j + 1] * a
        };
        let mut slow = -bs.s_star / (4.0 * (core::f64::consts::PI * tau).sqrt())
            * (bs.k - y_tau)
            / tau
            * (-(bs.k - y_tau) * (bs.k - y_tau) / (4.0 * tau)).exp();
        for j in 0..i {
            let (v_lo, v_hi) =
                ((tau - bs.tau_nodes[j + 1]).sqrt(), (tau - bs.tau_nodes[j]).sqrt());
            slow += adaptive_quad(
                |v| {
                    let w = v * v;
                    if w < 1e-300 {
                        return 0.0;
                    }
                    let s = tau - w;
                    let ys = interp(&bs.y, s);
                    let pg = interp(&psig, s);
                    let d = y_tau - ys;
                    pg * d / (2.0 * SQRT_PI * w.powf(1.5))
                        * (-d * d / (4.0 * w)).exp()
                        * 2.0
                        * v
                },
                v_lo,
                v_hi,
                1e-12,
                1e-12,
            );
        }
        let fast = gz_at_boundary_with(&bs, i, 256).unwrap();
        assert!((fast - slow).abs() < 5e-5 * (1.0 + slow.abs()), "{fast} vs {slow}");
    }

    // ---- closed-form kernels vs their defining integrals ----

    fn k1_brute(
        tc: &TimeChange,
        p: &ParamSet,
        tau: f64,
        x: f64,
        s: f64,
        xi: f64,
        x_b: f64,
        y_tau: f64,
    ) -> f64 {
        let w = tau - s;
        let f_w = tc.f_of_t(tc.t_of_tau(w));
        let phi = p.phi.eval(tc.t_of_tau(tau));
        adaptive_quad(
            |eta| {
                (phi * eta).exp()
                    * ((-(xi - eta - f_w).powi(2) / (4.0 * w)).exp()
                        - (-(xi - 2.0 * y_tau + eta + f_w).powi(2) / (4.0 * w)).exp())
            },
            x_b,
            x,
            1e-13,
            1e-13,
        ) / (2.0 * (core::f64::consts::PI * w).sqrt())
    }

    #[test]
    fn k1_closed_matches_quadrature() {
        let p = test_param_set(60.0);
        let tc = build_time_change(&p);
        let tau = 0.08;
        let (x_b, y_tau) = (-0.9, -0.85);
        for &(x, s, xi) in &[(0.4, 0.03, -0.2), (-0.1, 0.07, 0.5), (1.2, 0.001, -0.8)] {
            let fast = k1_closed(&tc, &p, tau, x, s, xi, x_b, y_tau).unwrap().to_f64();
            let slow = k1_brute(&tc, &p, tau, x, s, xi, x_b, y_tau);
            assert!(
                (fast - slow).abs() <= 1e-8 * slow.abs().max(1e-8),
                "x={x} s={s} xi={xi}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn k1_empty_range_is_zero() {
        let p = test_param_set(60.0);
        let tc = build_time_change(&p);
        let v = k1_closed(&tc, &p, 0.08, -0.9, 0.03, 0.1, -0.9, -0.85).unwrap().to_f64();
        assert!(v.abs() < 1e-15);
        assert!(k1_closed(&tc, &p, 0.08, 0.0, 0.08, 0.1, -0.9, -0.85).is_err());
    }

    #[test]
    fn k1_s_equals_tau_three_branches() {
        let phi = 0.27;
        let xi = -0.3;
        assert_eq!(k1_at_s_equals_tau(phi, -0.5, xi, -0.9), 0.0);
        assert!((k1_at_s_equals_tau(phi, xi, xi, -0.9) - 0.5 * (phi * xi).exp()).abs() < 1e-15);
        assert!((k1_at_s_equals_tau(phi, 0.2, xi, -0.9) - (phi * xi).exp()).abs() < 1e-15);
    }

    #[test]
    fn k1_dxi_matches_finite_differences() {
        let p = test_param_set(60.0);
        let tc = build_time_change(&p);
        let (tau, x, s, x_b, y_tau) = (0.08, 0.4, 0.03, -0.9, -0.85);
        for &xi in &[-0.6, -0.1, 0.3] {
            let d = 1e-6;
            let fd = (k1_closed(&tc, &p, tau, x, s, xi + d, x_b, y_tau).unwrap().to_f64()
                - k1_closed(&tc, &p, tau, x, s, xi - d, x_b, y_tau).unwrap().to_f64())
                / (2.0 * d);
            let an = k1_dxi_closed(&tc, &p, tau, x, s, xi, x_b, y_tau).unwrap();
            assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "xi={xi}: {an} vs fd {fd}");
        }
    }

    fn sample_iargs() -> IArgs {
        IArgs { tau: 0.09, x: 0.5, x_b: -0.8, y_tau: -0.75, f_tau: 0.12, phi: 0.3, y0: 0.0 }
    }

    #[test]
    fn i1_matches_double_quadrature() {
        let a = sample_iargs();
        let inner = |eta: f64| {
            adaptive_quad(
                |xi| {
                    xi.exp()
                        * ((-(xi - eta - a.f_tau).powi(2) / (4.0 * a.tau)).exp()
                            - (-(xi + eta + a.f_tau - 2.0 * a.y_tau).powi(2) / (4.0 * a.tau))
                                .exp())
                },
                a.y0,
                a.y0 + 30.0,
                1e-12,
                1e-12,
            )
        };
        let slow = adaptive_quad(|eta| (a.phi * eta).exp() * inner(eta), a.x_b, a.x, 1e-10, 1e-10);
        let fast = i1_closed(&a);
        assert!((fast - slow).abs() < 1e-8 * slow.abs().max(1.0), "{fast} vs {slow}");
    }

    #[test]
    fn i1_near_phi_one_pole_falls_back() {
        let mut a = sample_iargs();
        a.phi = 1.0 + 1e-9;
        let v_pole = i1_closed(&a);
        a.phi = 1.001;
        let v_near = i1_closed(&a);
        assert!(v_pole.is_finite());
        assert!((v_pole - v_near).abs() < 1e-2 * v_near.abs().max(1.0));
    }

    #[test]
    fn i2_i3_match_quadrature() {
        let a = sample_iargs();
        let (s, y_s, f_s) = (0.03, -0.5, 0.05);
        let w = a.tau - s;
        let slow2 = adaptive_quad(
            |eta| {
                (a.phi * eta).exp()
                    * ((-(eta + f_s - y_s).powi(2) / (4.0 * w)).exp()
                        - (-(eta + f_s - 2.0 * a.y_tau + y_s).powi(2) / (4.0 * w)).exp())
            },
            a.x_b,
            a.x,
            1e-13,
            1e-13,
        );
        let fast2 = i2_closed(&a, s, y_s, f_s);
        assert!((fast2 - slow2).abs() < 1e-8 * slow2.abs().max(1e-6), "{fast2} vs {slow2}");

        let slow3 = adaptive_quad(
            |eta| {
                (a.phi * eta).exp()
                    * ((eta + f_s - y_s) * (-(eta + f_s - y_s).powi(2) / (4.0 * w)).exp()
                        + (y_s + eta + f_s - 2.0 * a.y_tau)
                            * (-(eta + f_s + y_s - 2.0 * a.y_tau).powi(2) / (4.0 * w)).exp())
            },
            a.x_b,
            a.x,
            1e-13,
            1e-13,
        );
        let fast3 = i3_closed(&a, s, y_s, f_s);
        assert!((fast3 - slow3).abs() < 1e-8 * slow3.abs().max(1e-6), "{fast3} vs {slow3}");
    }

    #[test]
    fn i2_vanishes_on_empty_range() {
        let mut a = sample_iargs();
        a.x = a.x_b;
        assert_eq!(i2_closed(&a, 0.03, -0.5, 0.05), 0.0);
        assert_eq!(i3_closed(&a, 0.03, -0.5, 0.05), 0.0);
    }

    #[test]
    fn gamma_integral_matches_quadrature() {
        let (s_star, f_tau, tau, z, y_tau, y0) = (60.0, 0.1f64, 0.07, -0.2, -0.6, 0.0);
        let slow = adaptive_quad(
            |xi| {
                s_star
                    * (-f_tau).exp()
                    * (heat_kernel(z - xi, tau) - heat_kernel(z + xi - 2.0 * y_tau, tau))
            },
            y0 - 40.0,
            y0,
            1e-13,
            1e-13,
        );
        let fast = gamma_integral_closed(s_star, f_tau, tau, z, y_tau, y0);
        assert!((fast - slow).abs() < 1e-10 * (1.0 + slow.abs()), "{fast} vs {slow}");
        // symmetric cancellation when z = y_tau = y0
        assert_eq!(gamma_integral_closed(s_star, f_tau, tau, 0.0, 0.0, 0.0), 0.0);
    }
}
