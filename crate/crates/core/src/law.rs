//! Scalar conservation laws `u_t + f(u)_x = 0`, entropy pairs and the
//! Bardos-LeRoux-Nédélec boundary diagnostic.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance used for entropy-flux integrals.
pub const ENTROPY_FLUX_TOL: f64 = 1e-12;

/// A scalar conservation law with spatial flux `f`.
///
/// The space-time flux is `F(u) = (u, f(u))`, so `F'(u) = (1, f'(u))`.
#[derive(Clone)]
pub struct ConservationLaw {
    name: String,
    f: ScalarFn,
    f_prime: ScalarFn,
    f_second: ScalarFn,
    /// Bound on `|F'(u)|` over the declared state range.
    c0: f64,
    state_bound: f64,
}

impl fmt::Debug for ConservationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConservationLaw")
            .field("name", &self.name)
            .field("c0", &self.c0)
            .field("state_bound", &self.state_bound)
            .finish()
    }
}

impl ConservationLaw {
    /// Builds a law from its flux and first two derivatives. `C0` is estimated on `[-1, 1]`
    /// until [`ConservationLaw::with_state_bound`] declares the actual range.
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let law = ConservationLaw {
            name: name.into(),
            f: Arc::new(f),
            f_prime: Arc::new(f_prime),
            f_second: Arc::new(f_second),
            c0: 0.0,
            state_bound: 1.0,
        };
        law.with_state_bound(1.0)
    }

    /// Burgers' equation, `f(u) = u²/2`.
    pub fn burgers() -> Self {
        Self::new("burgers", |u| 0.5 * u * u, |u| u, |_| 1.0)
    }

    /// Linear advection, `f(u) = a u`.
    pub fn advection(a: f64) -> Self {
        Self::new(format!("advection:{a}"), move |u| a * u, move |_| a, |_| 0.0)
    }

    /// Buckley-Leverett, `f(u) = u² / (u² + (1-u)²/2)`.
    pub fn buckley_leverett() -> Self {
        // d(u) = u^2 + (1-u)^2 / 2 = 1.5u^2 - u + 0.5
        let d = |u: f64| 1.5 * u * u - u + 0.5;
        let dd = |u: f64| 3.0 * u - 1.0;
        let fp = move |u: f64| {
            let den = d(u);
            (u - u * u) / (den * den)
        };
        let fpp = move |u: f64| {
            let den = d(u);
            ((1.0 - 2.0 * u) * den - 2.0 * (u - u * u) * dd(u)) / (den * den * den)
        };
        Self::new("buckley_leverett", move |u| u * u / d(u), fp, fpp)
    }

    /// Catalog lookup: `burgers`, `advection:<a>`, `buckley_leverett`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        match name {
            "burgers" => Ok(Self::burgers()),
            "buckley_leverett" => Ok(Self::buckley_leverett()),
            _ => {
                if let Some(speed) = name.strip_prefix("advection:") {
                    let a: f64 = speed
                        .trim()
                        .parse()
                        .map_err(|_| Error::UnknownLaw(name.to_string()))?;
                    if !a.is_finite() {
                        return Err(Error::UnknownLaw(name.to_string()));
                    }
                    Ok(Self::advection(a))
                } else {
                    Err(Error::UnknownLaw(name.to_string()))
                }
            }
        }
    }

    /// Recomputes `C0 = max |(1, f'(u))|` over `u ∈ [-bound, bound]`.
    pub fn with_state_bound(mut self, bound: f64) -> Self {
        let bound = bound.abs().max(f64::MIN_POSITIVE);
        let samples = 2001;
        self.c0 = (0..samples)
            .map(|k| -bound + 2.0 * bound * k as f64 / (samples - 1) as f64)
            .map(|u| self.flux_derivative_norm(u))
            .fold(0.0, f64::max);
        self.state_bound = bound;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn state_bound(&self) -> f64 {
        self.state_bound
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    #[inline]
    pub fn f_prime(&self, u: f64) -> f64 {
        (self.f_prime)(u)
    }

    #[inline]
    pub fn f_second(&self, u: f64) -> f64 {
        (self.f_second)(u)
    }

    /// `F(u) = (u, f(u))`: time component first.
    pub fn space_time_flux(&self, u: f64) -> [f64; 2] {
        [u, self.f(u)]
    }

    /// Euclidean norm of `F'(u) = (1, f'(u))`; never below one.
    #[inline]
    pub fn flux_derivative_norm(&self, u: f64) -> f64 {
        self.f_prime(u).hypot(1.0)
    }

    /// Largest relative finite-difference mismatch of `f'` against `f` at the given states.
    pub fn derivative_mismatch(&self, states: &[f64]) -> f64 {
        states
            .iter()
            .map(|&u| {
                let h = 1e-6 * (1.0 + u.abs());
                let fd = (self.f(u + h) - self.f(u - h)) / (2.0 * h);
                let exact = self.f_prime(u);
                (fd - exact).abs() / (1.0 + exact.abs())
            })
            .fold(0.0, f64::max)
    }
}

/// A convex entropy `η` with its first two derivatives.
#[derive(Clone)]
pub struct Entropy {
    pub eta: ScalarFn,
    pub eta_prime: ScalarFn,
    pub eta_second: ScalarFn,
}

impl fmt::Debug for Entropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Entropy { .. }")
    }
}

impl Entropy {
    pub fn new(
        eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        eta_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        eta_second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Entropy {
            eta: Arc::new(eta),
            eta_prime: Arc::new(eta_prime),
            eta_second: Arc::new(eta_second),
        }
    }

    /// `η(u) = u^q / q` for an integer power `q ≥ 2`.
    pub fn power(q: u32) -> Self {
        let qi = q as i32;
        let qf = q as f64;
        Entropy::new(
            move |u| u.powi(qi) / qf,
            move |u| u.powi(qi - 1),
            move |u| (qf - 1.0) * u.powi(qi - 2),
        )
    }

    pub fn quadratic() -> Self {
        Self::power(2)
    }
}

/// An entropy pair `(η, q)` with `q(u) = ∫_{ref}^u η'(r) f'(r) dr`.
#[derive(Clone, Debug)]
pub struct EntropyPair {
    pub entropy: Entropy,
    pub law: ConservationLaw,
    pub reference_state: f64,
}

impl EntropyPair {
    /// Builds the pair after checking `η'' ≥ 0` on a grid over the law's state range.
    pub fn build(law: &ConservationLaw, entropy: Entropy, reference_state: f64) -> Result<Self> {
        let m = law.state_bound().max(reference_state.abs());
        for k in 0..=400 {
            let u = -m + 2.0 * m * k as f64 / 400.0;
            let second = (entropy.eta_second)(u);
            if second < 0.0 || !second.is_finite() {
                return Err(Error::NonConvexEntropy { at: u, value: second });
            }
        }
        Ok(EntropyPair {
            entropy,
            law: law.clone(),
            reference_state,
        })
    }

    pub fn eta(&self, u: f64) -> f64 {
        (self.entropy.eta)(u)
    }

    pub fn eta_prime(&self, u: f64) -> f64 {
        (self.entropy.eta_prime)(u)
    }

    pub fn eta_second(&self, u: f64) -> f64 {
        (self.entropy.eta_second)(u)
    }

    /// Entropy flux relative to the pair's reference state.
    pub fn q_flux(&self, u: f64) -> f64 {
        self.flux_increment(self.reference_state, u)
    }

    /// `∫_a^b η'(r) f'(r) dr`.
    pub fn flux_increment(&self, a: f64, b: f64) -> f64 {
        let integrand = |r: f64| self.eta_prime(r) * self.law.f_prime(r);
        quadrature::adaptive(&integrand, a, b, ENTROPY_FLUX_TOL)
    }

    /// Space-time entropy flux `Q(u) = (η(u), q(u))`.
    pub fn space_time_flux(&self, u: f64) -> [f64; 2] {
        [self.eta(u), self.q_flux(u)]
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Largest violation of the BLN boundary inequality over `k_grid`.
///
/// Returns `max_k max(0, -(sign(u-k) - sign(g-k)) (f(u) - f(k)) n)`; zero means the
/// inequality holds at every sampled `k`.
pub fn bln_violation(
    law: &ConservationLaw,
    trace_u: f64,
    g: f64,
    normal: f64,
    k_grid: &[f64],
) -> Result<f64> {
    if k_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let fu = law.f(trace_u);
    Ok(k_grid
        .iter()
        .map(|&k| {
            let value = (sign(trace_u - k) - sign(g - k)) * (fu - law.f(k)) * normal;
            (-value).max(0.0)
        })
        .fold(0.0, f64::max))
}

/// Uniform grid over `[min(u,g) - margin, max(u,g) + margin]`, including `u` and `g`.
pub fn bln_grid(trace_u: f64, g: f64, margin: f64, n: usize) -> Vec<f64> {
    let lo = trace_u.min(g) - margin;
    let hi = trace_u.max(g) + margin;
    let n = n.max(2);
    let mut grid: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    grid.push(trace_u);
    grid.push(g);
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn space_time_flux_values() {
        assert_eq!(ConservationLaw::burgers().space_time_flux(2.0), [2.0, 2.0]);
        assert_eq!(ConservationLaw::burgers().space_time_flux(0.0), [0.0, 0.0]);
        assert_eq!(ConservationLaw::advection(3.0).space_time_flux(1.0), [1.0, 3.0]);
    }

    #[test]
    fn catalog_names() {
        assert_eq!(ConservationLaw::from_name("burgers").unwrap().name(), "burgers");
        let adv = ConservationLaw::from_name("advection:2.5").unwrap();
        assert_eq!(adv.f(2.0), 5.0);
        assert!(ConservationLaw::from_name("buckley_leverett").is_ok());
        assert!(matches!(
            ConservationLaw::from_name("euler"),
            Err(Error::UnknownLaw(_))
        ));
        assert!(ConservationLaw::from_name("advection:x").is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let states: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
        for law in [
            ConservationLaw::burgers(),
            ConservationLaw::advection(-1.5),
            ConservationLaw::buckley_leverett(),
        ] {
            assert!(law.derivative_mismatch(&states) < 1e-6, "{}", law.name());
            for &u in &states {
                let h = 1e-5;
                let fd = (law.f_prime(u + h) - law.f_prime(u - h)) / (2.0 * h);
                assert!((fd - law.f_second(u)).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn c0_bounds_flux_derivative_on_range() {
        let law = ConservationLaw::burgers().with_state_bound(3.0);
        assert!((law.c0() - 10f64.sqrt()).abs() < 1e-12);
        for k in 0..50 {
            let u = -3.0 + 6.0 * k as f64 / 49.0;
            assert!(law.c0() >= law.flux_derivative_norm(u) - 1e-15);
        }
    }

    #[test]
    fn entropy_flux_examples() {
        let burgers = ConservationLaw::burgers();
        let pair = EntropyPair::build(&burgers, Entropy::quadratic(), 0.0).unwrap();
        assert!((pair.q_flux(1.0) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(pair.q_flux(0.0), 0.0);

        let shifted = EntropyPair::build(&burgers, Entropy::quadratic(), 0.7).unwrap();
        assert_eq!(shifted.q_flux(0.7), 0.0);

        let adv = ConservationLaw::advection(3.0);
        let pair = EntropyPair::build(&adv, Entropy::quadratic(), 0.0).unwrap();
        assert!((pair.q_flux(2.0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_flux_is_compatible() {
        let law = ConservationLaw::buckley_leverett();
        let pair = EntropyPair::build(&law, Entropy::power(4), 0.2).unwrap();
        for k in 0..40 {
            let u = -0.9 + 1.8 * k as f64 / 39.0;
            // Richardson-extrapolated central differences, O(h^4)
            let central = |h: f64| (pair.q_flux(u + h) - pair.q_flux(u - h)) / (2.0 * h);
            let h = 1e-3;
            let dq = (4.0 * central(h / 2.0) - central(h)) / 3.0;
            let expected = pair.eta_prime(u) * law.f_prime(u);
            assert!((dq - expected).abs() < 1e-8, "u={u}: {dq} vs {expected}");
        }
    }

    #[test]
    fn non_convex_entropy_is_rejected() {
        let law = ConservationLaw::burgers();
        let bad = Entropy::new(|u| u.powi(3), |u| 3.0 * u * u, |u| 6.0 * u);
        assert!(matches!(
            EntropyPair::build(&law, bad, 0.0),
            Err(Error::NonConvexEntropy { .. })
        ));
    }

    #[test]
    fn bln_examples() {
        let law = ConservationLaw::burgers();
        let grid = bln_grid(0.3, 0.3, 1.0, 50);
        assert_eq!(bln_violation(&law, 0.3, 0.3, 1.0, &grid).unwrap(), 0.0);

        let k_grid: Vec<f64> = (0..=200).map(|k| -0.5 + 2.0 * k as f64 / 200.0).collect();
        assert_eq!(bln_violation(&law, 1.0, 0.0, 1.0, &k_grid).unwrap(), 0.0);

        let v = bln_violation(&law, 1.0, 0.0, -1.0, &[0.5]).unwrap();
        assert!((v - 0.75).abs() < 1e-15);

        assert_eq!(bln_violation(&law, 1.0, 0.0, 1.0, &[]), Err(Error::EmptyGrid));
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(-2.0), -1.0);
    }

    proptest::proptest! {
        #[test]
        fn bln_violation_nonnegative(u in -3.0f64..3.0, g in -3.0f64..3.0, n in proptest::bool::ANY) {
            let law = ConservationLaw::burgers();
            let normal = if n { 1.0 } else { -1.0 };
            let grid = bln_grid(u, g, 0.5, 64);
            let v = bln_violation(&law, u, g, normal, &grid).unwrap();
            proptest::prop_assert!(v >= 0.0);
            let same = bln_violation(&law, u, u, normal, &grid).unwrap();
            proptest::prop_assert_eq!(same, 0.0);
        }
    }
}
