//! Quadrature utilities: adaptive Gauss–Kronrod (G7/K15) and fixed
//! Gauss–Legendre rules.
//!
//! The adaptive driver bisects intervals until the embedded K15-vs-G7
//! error estimate meets the requested absolute/relative tolerance. This is
//! the workhorse behind every "closed form vs brute-force quadrature"
//! verification in the crate, so it favors robustness over raw speed.

/// 7-point Gauss nodes (positive half) and weights.
const G7_NODES: [f64; 4] = [
    0.0,
    0.405845151377397166906606412076961,
    0.741531185599394439863864773280788,
    0.949107912342758524526189684047851,
];
const G7_WEIGHTS: [f64; 4] = [
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
];

/// 15-point Kronrod nodes (positive half) and weights.
const K15_NODES: [f64; 8] = [
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
];
const K15_WEIGHTS: [f64; 8] = [
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
];

/// One G7/K15 panel on [a, b]: returns (K15 estimate, |K15 - G7|).
fn gk15_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut g = 0.0;
    let mut k = 0.0;
    // center point
    let fc = f(c);
    g += G7_WEIGHTS[0] * fc;
    k += K15_WEIGHTS[0] * fc;
    for i in 1..4 {
        let x = h * G7_NODES[i];
        let s = f(c + x) + f(c - x);
        g += G7_WEIGHTS[i] * s;
        // Gauss nodes are the even Kronrod nodes 2,4,6
        k += K15_WEIGHTS[2 * i] * s;
    }
    for i in [1usize, 3, 5, 7] {
        let x = h * K15_NODES[i];
        k += K15_WEIGHTS[i] * (f(c + x) + f(c - x));
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive quadrature of `f` on [a, b] to the given absolute/relative
/// tolerance. Interval-halving recursion; the depth cap of 45 allows
/// sub-intervals down to ~(b-a) * 3e-14, enough to resolve integrable
/// endpoint singularities without ever recursing unboundedly.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        err: f64,
        abs_tol: f64,
        rel_tol: f64,
        depth: u32,
    ) -> f64 {
        if depth >= 45 || err <= abs_tol.max(rel_tol * whole.abs()) {
            return whole;
        }
        let c = 0.5 * (a + b);
        let (l, le) = gk15_panel(f, a, c);
        let (r, re) = gk15_panel(f, c, b);
        recurse(f, a, c, l, le, 0.5 * abs_tol, rel_tol, depth + 1)
            + recurse(f, c, b, r, re, 0.5 * abs_tol, rel_tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    let (whole, err) = gk15_panel(&f, a, b);
    recurse(&f, a, b, whole, err, abs_tol, rel_tol, 0)
}

/// Fixed n-point Gauss–Legendre nodes/weights on [-1, 1], computed by
/// Newton iteration on the Legendre recurrence (standard Golub-free
/// approach; accurate to machine precision for n <= a few hundred).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with a fixed-order Gauss–Legendre rule.
pub fn gl_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        s += w * f(c + h * x);
    }
    s * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_quad_polynomial_exact() {
        let v = adaptive_quad(|x| 3.0 * x * x, 0.0, 2.0, 1e-14, 1e-14);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_quad_gaussian() {
        // int_{-inf}^{inf} e^{-x^2} dx = sqrt(pi); truncate at +-8
        let v = adaptive_quad(|x| (-x * x).exp(), -8.0, 8.0, 1e-13, 1e-13);
        assert!((v - core::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn adaptive_quad_mild_endpoint_singularity() {
        // int_0^1 1/sqrt(x) dx = 2; integrable singularity stresses the
        // subdivision logic
        let v = adaptive_quad(|x| 1.0 / x.max(1e-300).sqrt(), 1e-12, 1.0, 1e-10, 1e-10);
        assert!((v - 2.0).abs() < 1e-5);
    }

    #[test]
    fn gauss_legendre_integrates_high_degree() {
        let (n, w) = gauss_legendre(16);
        // degree-25 polynomial is exact under a 16-point rule (2n-1 = 31)
        let v = gl_integrate(|x| x.powi(24), -1.0, 1.0, &n, &w);
        assert!((v - 2.0 / 25.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_64_orthogonality_weight() {
        let (n, w) = gauss_legendre(64);
        let v = gl_integrate(|x| (3.0 * x).cos(), -1.0, 1.0, &n, &w);
        let exact = 2.0 * (3.0f64).sin() / 3.0;
        assert!((v - exact).abs() < 1e-14);
    }
}
