//! Gauss-Legendre rules and an adaptive integrator.

use std::f64::consts::PI;

/// A one-dimensional quadrature rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// `n`-point Gauss-Legendre rule mapped to `[0, 1]`, exact for degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one point");
        let (x, w) = gauss_legendre_symmetric(n);
        Rule {
            points: x.iter().map(|&xi| 0.5 * (xi + 1.0)).collect(),
            weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(a + len * s))
            .sum::<f64>()
            * len
    }
}

/// Nodes and weights on `[-1, 1]`, ascending, by Newton iteration on `P_n`.
fn gauss_legendre_symmetric(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Adaptive Gauss-Legendre integration of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Each panel compares a 10-point rule against the sum over its two halves and
/// bisects until they agree. Kinks (e.g. `|f'|` through a sonic point) are
/// resolved by local refinement.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    thread_local! {
        static RULE: Rule = Rule::gauss_legendre(10);
    }
    RULE.with(|rule| {
        let whole = rule.integrate(a, b, f);
        adaptive_step(rule, f, a, b, whole, tol, 0)
    })
}

fn adaptive_step<F: Fn(f64) -> f64>(
    rule: &Rule,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let refined = left + right;
    if (refined - whole).abs() <= tol || depth >= 48 {
        return refined;
    }
    adaptive_step(rule, f, a, mid, left, 0.5 * tol, depth + 1)
        + adaptive_step(rule, f, mid, b, right, 0.5 * tol, depth + 1)
}

/// `∫_a^b |g(r)| dr` (negative when `b < a`). The interval is split at sign changes of
/// `g`, located by bisection, so each piece is smooth for smooth `g`.
pub fn integrate_abs<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate_abs(g, b, a, tol);
    }
    const SAMPLES: usize = 32;
    let mut breaks = vec![a];
    let mut prev_x = a;
    let mut prev_g = g(a);
    for k in 1..=SAMPLES {
        let x = a + (b - a) * k as f64 / SAMPLES as f64;
        let gx = g(x);
        if prev_g * gx < 0.0 {
            let (mut lo, mut hi, mut glo) = (prev_x, x, prev_g);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = g(mid);
                if gm * glo > 0.0 {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        } else if gx == 0.0 && k < SAMPLES {
            breaks.push(x);
        }
        prev_x = x;
        prev_g = gx;
    }
    breaks.push(b);
    let pieces = (breaks.len() - 1) as f64;
    breaks
        .windows(2)
        .map(|w| adaptive(&|r: f64| g(r).abs(), w[0], w[1], tol / pieces))
        .sum()
}
