//! Initial/boundary data and the scenario catalog.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::law::ConservationLaw;
use crate::quadrature::Rule;

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const SUP_SAMPLES: usize = 2001;

/// Initial datum `u0`, boundary datum `g_D(t, x)` on the two walls, and optionally the
/// exact solution when the scenario has one.
#[derive(Clone)]
pub struct ProblemData {
    name: String,
    u0: SpaceFn,
    g_d: SpaceTimeFn,
    exact: Option<SpaceTimeFn>,
    domain: [f64; 2],
    t_final: f64,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("t_final", &self.t_final)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemData {
    pub fn new(
        name: impl Into<String>,
        u0: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_d: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        domain: [f64; 2],
        t_final: f64,
    ) -> Result<Self> {
        if !(domain[0] < domain[1]) || !domain[0].is_finite() || !domain[1].is_finite() {
            return Err(Error::DegenerateDomain {
                left: domain[0],
                right: domain[1],
            });
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidMesh(format!("T_final must be positive, got {t_final}")));
        }
        let problem = ProblemData {
            name: name.into(),
            u0: Arc::new(u0),
            g_d: Arc::new(g_d),
            exact: None,
            domain,
            t_final,
        };
        for (what, value) in [("u0", problem.u0_sup()), ("g_D", problem.g_sup())] {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: what.to_string(),
                    value,
                });
            }
        }
        Ok(problem)
    }

    pub fn with_exact(mut self, exact: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn u0(&self, x: f64) -> f64 {
        (self.u0)(x)
    }

    pub fn g_d(&self, t: f64, x: f64) -> f64 {
        (self.g_d)(t, x)
    }

    pub fn exact(&self, t: f64, x: f64) -> Option<f64> {
        self.exact.as_ref().map(|e| e(t, x))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// `‖u0‖_∞` over a uniform sample grid.
    pub fn u0_sup(&self) -> f64 {
        let [a, b] = self.domain;
        (0..SUP_SAMPLES)
            .map(|k| self.u0(a + (b - a) * k as f64 / (SUP_SAMPLES - 1) as f64).abs())
            .fold(0.0, sup_propagating)
    }

    /// `‖g_D‖_∞` over both walls, sampled in time.
    pub fn g_sup(&self) -> f64 {
        let mut m = 0.0f64;
        for k in 0..SUP_SAMPLES {
            let t = self.t_final * k as f64 / (SUP_SAMPLES - 1) as f64;
            for x in self.domain {
                m = sup_propagating(m, self.g_d(t, x).abs());
            }
        }
        m
    }

    /// State range `max(‖u0‖_∞, ‖g_D‖_∞) + 1` used for `C0`.
    pub fn state_bound(&self) -> f64 {
        self.u0_sup().max(self.g_sup()) + 1.0
    }

    /// `‖u0‖_{0,2,Ω}` by composite Gauss quadrature.
    pub fn u0_l2(&self) -> f64 {
        let [a, b] = self.domain;
        composite(|x| self.u0(x).powi(2), a, b).sqrt()
    }

    /// `‖g_D‖_{0,2,Σ_T}`: both walls integrated over `[0, T]`.
    pub fn g_l2(&self) -> f64 {
        self.domain
            .iter()
            .map(|&x| composite(|t| self.g_d(t, x).powi(2), 0.0, self.t_final))
            .sum::<f64>()
            .sqrt()
    }
}

/// `max` that keeps NaN instead of discarding it.
fn sup_propagating(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let rule = Rule::gauss_legendre(8);
    let panels = 512;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| rule.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &f))
        .sum()
}

/// Catalog scenarios selectable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// `u0 = c`, `g_D = c`.
    Constant { value: f64 },
    /// Step from `left` to `right` at `x0`.
    Riemann { left: f64, right: f64, x0: f64 },
    /// `u0 = amplitude · sin(2π x)`.
    Sine { amplitude: f64 },
    /// Piecewise constant: `values[k]` on `[breaks[k-1], breaks[k])`, `values.len() = breaks.len() + 1`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Constant { .. } => "constant",
            Scenario::Riemann { .. } => "riemann",
            Scenario::Sine { .. } => "sine",
            Scenario::Piecewise { .. } => "piecewise",
        }
    }

    /// Builds the problem on `domain × (0, T)`. The boundary datum is the exact
    /// solution wherever one is known, otherwise `u0` at the wall.
    pub fn build(&self, law: &ConservationLaw, domain: [f64; 2], t_final: f64) -> Result<ProblemData> {
        let name = self.name();
        match self.clone() {
            Scenario::Constant { value } => {
                ProblemData::new(name, move |_| value, move |_, _| value, domain, t_final)
                    .map(|p| p.with_exact(move |_, _| value))
            }
            Scenario::Riemann { left, right, x0 } => {
                let u0 = move |x: f64| if x < x0 { left } else { right };
                match riemann_exact(law, left, right, x0) {
                    Some(exact) => {
                        let g = exact.clone();
                        ProblemData::new(name, u0, move |t, x| g(t, x), domain, t_final)
                            .map(|p| p.with_exact(move |t, x| exact(t, x)))
                    }
                    None => ProblemData::new(name, u0, move |_, x| u0(x), domain, t_final),
                }
            }
            Scenario::Sine { amplitude } => {
                let u0 = move |x: f64| amplitude * (2.0 * std::f64::consts::PI * x).sin();
                match advection_speed(law) {
                    Some(a) => ProblemData::new(name, u0, move |t, x| u0(x - a * t), domain, t_final)
                        .map(|p| p.with_exact(move |t, x| u0(x - a * t))),
                    None => ProblemData::new(name, u0, move |_, x| u0(x), domain, t_final),
                }
            }
            Scenario::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(Error::DimensionMismatch {
                        expected: breaks.len() + 1,
                        got: values.len(),
                    });
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidMesh("piecewise breaks must increase".into()));
                }
                let u0 = move |x: f64| values[breaks.partition_point(|&b| b <= x)];
                let g = u0.clone();
                ProblemData::new(name, u0, move |_, x| g(x), domain, t_final)
            }
        }
    }
}

/// The speed `a` if `law` is linear advection.
pub fn advection_speed(law: &ConservationLaw) -> Option<f64> {
    law.name().strip_prefix("advection:")?.trim().parse().ok()
}

type Exact = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Entropy solution of the Riemann problem for advection and Burgers.
fn riemann_exact(law: &ConservationLaw, left: f64, right: f64, x0: f64) -> Option<Exact> {
    if let Some(a) = advection_speed(law) {
        return Some(Arc::new(move |t, x| if x - a * t < x0 { left } else { right }));
    }
    if law.name() != "burgers" {
        return None;
    }
    if left > right {
        let s = 0.5 * (left + right);
        Some(Arc::new(move |t, x| if x < x0 + s * t { left } else { right }))
    } else {
        Some(Arc::new(move |t, x| {
            if t <= 0.0 {
                return if x < x0 { left } else { right };
            }
            let xi = (x - x0) / t;
            xi.clamp(left, right)
        }))
    }
}
