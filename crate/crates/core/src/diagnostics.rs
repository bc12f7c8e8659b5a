//! Entropy balance terms, time-slice norms and the bound checks run on discrete solutions.
//!
//! The entropy terms follow the face decomposition of `b(U, η'(U))`:
//!
//! ```text
//! E0 = Σ_T (δ L, η''(U) L)_T                                   streamline diffusion
//! E1 = Σ_n ∫ η(U⁻) − η(U⁺) − η'(U⁺)(U⁻ − U⁺)                    time levels
//! E2 = Σ_interior ∫ ⟦Q·n⟧ − ⟦F·n⟧ {η'(U)}
//! E3 = Σ_interior ∫ C_T ⟦η'(U)⟧ ⟦U⟧
//! E4, E5 as E2, E3 on the walls with U⁻ = g_D
//! F  = −Σ_walls ∫ (½⟦F·n⟧ + C_T ⟦U⟧) η'(g_D)
//! ```
//!
//! For `η = U²/2` testing the scheme with `U` itself gives
//!
//! ```text
//! ∫η(U⁻^N) + E0 + Σ ε̂‖∇U‖² + E1 + … + E5 + Σ_walls ∫ q(g_D)·n = ∫η(U⁻^0) + F
//! ```
//!
//! where `U⁻^0` is the interpolated initial datum the scheme actually sees and `q` is
//! the entropy flux vanishing at 0. The wall term is the standalone `∫ Q(v)·n` of the
//! decomposition; it drops out for `g_D = 0` or when both walls carry the same value.

use crate::elements::ReferenceElement;
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::law::{Entropy, EntropyPair};
use crate::quadrature::Rule;
use crate::solver::{ct_coefficient, DGSolution, Scheme};
use crate::solver::flux::jump_term;

/// Gauss points per slab used when sampling `sup_t`; the slab endpoints are added.
pub const SLICE_GAUSS_POINTS: usize = 5;

/// Relative tolerance of the sign suite, multiplied by [`EnergyReport::scale`].
pub const SIGN_TOL: f64 = 1e-10;

/// Relative tolerance of the energy identity, multiplied by [`EnergyReport::scale`].
pub const IDENTITY_TOL: f64 = 1e-8;

/// CSV header shared by the run outputs.
pub const CSV_COLUMNS: [&str; 14] = [
    "slab",
    "E0",
    "E1",
    "E2",
    "E3",
    "E4",
    "E5",
    "F",
    "F1",
    "F2",
    "l2_sup",
    "linf_max",
    "ratio_thm41",
    "ratio_thm51",
];

/// Entropy terms restricted to one slab.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlabEnergy {
    pub slab: usize,
    /// `E0 … E5`
    pub e: [f64; 6],
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    /// `Σ_T ε̂ (∇U, η''(U)∇U)_T` with the stored `ε̂`.
    pub viscous: f64,
    /// `Σ_walls ∫ q(g_D)·n`
    pub wall_entropy_flux: f64,
    /// `∫ η(U⁻)` on the bottom level of the slab.
    pub entropy_below: f64,
    /// `∫ η(U)` on the top level of the slab.
    pub entropy_top: f64,
    /// `sup_t ‖U(t)‖_2` over the sampled times of the slab.
    pub l2_sup: f64,
    /// `max |U|` over nodes and volume quadrature points of the slab.
    pub linf_max: f64,
}

impl SlabEnergy {
    /// Left minus right side of the entropy identity on this slab.
    pub fn identity_defect(&self) -> f64 {
        let lhs = self.entropy_top + self.viscous + self.e.iter().sum::<f64>() + self.wall_entropy_flux;
        lhs - self.entropy_below - self.f
    }
}

/// Minima over slabs of the three quantities the sign suite asserts to be nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignMargins {
    pub e1: f64,
    pub e2_e3: f64,
    pub e4_e5_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// Power `q` of the entropy `η = U^q / q`.
    pub q_power: u32,
    pub slabs: Vec<SlabEnergy>,
    /// `½‖u0‖² + 1`, the reference magnitude for tolerances.
    pub scale: f64,
    pub l2_sup: f64,
    /// `(q, sup_t ‖U(t)‖_q)` for the requested list.
    pub lq_sup: Vec<(u32, f64)>,
    pub max_abs: f64,
    pub ratio_thm41: f64,
    pub ratio_thm51: f64,
}

impl EnergyReport {
    /// Sums over slabs. `entropy_below` is the initial level and `entropy_top` the final one.
    pub fn total(&self) -> SlabEnergy {
        let mut t = SlabEnergy::default();
        for s in &self.slabs {
            for i in 0..6 {
                t.e[i] += s.e[i];
            }
            t.f += s.f;
            t.f1 += s.f1;
            t.f2 += s.f2;
            t.viscous += s.viscous;
            t.wall_entropy_flux += s.wall_entropy_flux;
            t.l2_sup = t.l2_sup.max(s.l2_sup);
            t.linf_max = t.linf_max.max(s.linf_max);
        }
        t.slab = self.slabs.len();
        t.entropy_below = self.slabs.first().map_or(0.0, |s| s.entropy_below);
        t.entropy_top = self.slabs.last().map_or(0.0, |s| s.entropy_top);
        t
    }

    pub fn sign_margins(&self) -> SignMargins {
        let mut m = SignMargins {
            e1: f64::INFINITY,
            e2_e3: f64::INFINITY,
            e4_e5_f1: f64::INFINITY,
        };
        for s in &self.slabs {
            m.e1 = m.e1.min(s.e[1]);
            m.e2_e3 = m.e2_e3.min(s.e[2] + s.e[3]);
            m.e4_e5_f1 = m.e4_e5_f1.min(s.e[4] + s.e[5] - s.f1);
        }
        m
    }

    pub fn sign_tolerance(&self) -> f64 {
        SIGN_TOL * self.scale
    }

    /// All three sign conditions hold on every slab up to [`EnergyReport::sign_tolerance`].
    pub fn signs_hold(&self) -> bool {
        let m = self.sign_margins();
        let tol = -self.sign_tolerance();
        m.e1 >= tol && m.e2_e3 >= tol && m.e4_e5_f1 >= tol
    }

    /// Global defect of the entropy identity. Only expected to vanish for `q = 2`.
    pub fn identity_defect(&self) -> f64 {
        self.total().identity_defect()
    }

    pub fn identity_closes(&self) -> bool {
        self.identity_defect().abs() <= IDENTITY_TOL * self.scale
    }

    /// Rows for [`CSV_COLUMNS`]: one per slab, then a `total` row with the bound ratios.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let num = |x: f64| format!("{x:e}");
        let row = |label: String, s: &SlabEnergy, ratios: Option<(f64, f64)>| {
            let mut r = vec![label];
            r.extend(s.e.iter().map(|&x| num(x)));
            r.extend([num(s.f), num(s.f1), num(s.f2), num(s.l2_sup), num(s.linf_max)]);
            match ratios {
                Some((a, b)) => r.extend([num(a), num(b)]),
                None => r.extend([String::new(), String::new()]),
            }
            r
        };
        let mut rows: Vec<Vec<String>> = self
            .slabs
            .iter()
            .map(|s| row(s.slab.to_string(), s, None))
            .collect();
        let mut total = self.total();
        total.l2_sup = self.l2_sup;
        total.linf_max = self.max_abs;
        rows.push(row("total".into(), &total, Some((self.ratio_thm41, self.ratio_thm51))));
        rows
    }
}

/// `(q − 1) q^{−q/(q−1)} 3^{q/(q−1)} 2^{(q−2)/(q−1)}`, the Young constant in `F2`.
fn young_constant(q: f64) -> f64 {
    let r = q / (q - 1.0);
    (q - 1.0) * q.powf(-r) * 3f64.powf(r) * 2f64.powf((q - 2.0) / (q - 1.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn slab_terms(scheme: &Scheme, solution: &DGSolution, pair: &EntropyPair, q_power: u32, slab: usize) -> Result<SlabEnergy> {
    let law = scheme.law();
    let cfg = scheme.config();
    let reference = scheme.reference();
    let tables = scheme.tables();
    let nd = reference.n_dof();
    let cells = scheme.mesh().num_cells();
    let rule = reference.rule1d();
    let nfq = rule.len();
    let sd = scheme.slab_data(solution, slab)?;
    let coeffs = solution.slab_coefficients(slab)?;
    let eps = solution.eps_hat(slab)?;
    let cell = |c: usize| &coeffs[c * nd..(c + 1) * nd];
    let mut s = SlabEnergy {
        slab,
        ..Default::default()
    };

    for c in 0..cells {
        let cc = cell(c);
        let dx = scheme.cell_dx(c);
        let h_t = sd.dt.hypot(dx);
        for (q, &wq) in reference.quad_weights().iter().enumerate() {
            let w = wq * sd.dt * dx;
            let phi = reference.values_at_quad(q);
            let grads = reference.grads_at_quad(q);
            let u = dot(phi, cc);
            let ut: f64 = grads.iter().zip(cc).map(|(g, a)| g[0] * a).sum::<f64>() / sd.dt;
            let ux: f64 = grads.iter().zip(cc).map(|(g, a)| g[1] * a).sum::<f64>() / dx;
            let l = ut + law.f_prime(u) * ux;
            let h2 = pair.eta_second(u);
            s.e[0] += w * scheme.delta(h_t, u).0 * h2 * l * l;
            s.viscous += w * eps[c] * h2 * (ut * ut + ux * ux);
        }
        for q in 0..nfq {
            let w = rule.weights[q] * dx;
            let up = scheme.trace(&tables.bottom, cc, q);
            let um = sd.bottom[c * nfq + q];
            s.e[1] += w * (pair.eta(um) - pair.eta(up) - pair.eta_prime(up) * (um - up));
            s.entropy_below += w * pair.eta(um);
            s.entropy_top += w * pair.eta(scheme.trace(&tables.top, cc, q));
        }
    }

    let k_q = young_constant(q_power as f64);
    for k in 0..=cells {
        for q in 0..nfq {
            let w = rule.weights[q] * sd.dt;
            if k == 0 || k == cells {
                let (up, g, nx) = if k == 0 {
                    (scheme.trace(&tables.left, cell(0), q), sd.g_left[q], -1.0)
                } else {
                    (scheme.trace(&tables.right, cell(cells - 1), q), sd.g_right[q], 1.0)
                };
                let jq = pair.flux_increment(g, up) * nx;
                let jf = (law.f(up) - law.f(g)) * nx;
                let avg = 0.5 * (pair.eta_prime(up) + pair.eta_prime(g));
                let cb = ct_coefficient(cfg, law, up, g, [0.0, nx], true);
                let jump = up - g;
                let d_eta = pair.eta_prime(up) - pair.eta_prime(g);
                s.e[4] += w * (jq - jf * avg);
                s.e[5] += w * cb * d_eta * jump;
                s.f -= w * (0.5 * jf + cb * jump) * pair.eta_prime(g);
                s.f1 += w * 0.5 * cb * d_eta * jump;
                s.f2 += w * 0.5 * cb * k_q * g.abs().powi(q_power as i32);
                s.wall_entropy_flux += w * pair.q_flux(g) * nx;
            } else {
                let up = scheme.trace(&tables.right, cell(k - 1), q);
                let um = scheme.trace(&tables.left, cell(k), q);
                let jq = pair.flux_increment(um, up);
                let jf = law.f(up) - law.f(um);
                let avg = 0.5 * (pair.eta_prime(up) + pair.eta_prime(um));
                let ct = ct_coefficient(cfg, law, up, um, [0.0, 1.0], false);
                s.e[2] += w * (jq - jf * avg);
                s.e[3] += w * ct * (pair.eta_prime(up) - pair.eta_prime(um)) * (up - um);
            }
        }
    }

    s.l2_sup = slice_times()
        .iter()
        .map(|&tau| slab_slice_power(solution, slab, tau, 2).sqrt())
        .fold(0.0, f64::max);
    s.linf_max = slab_max_abs(reference, coeffs);
    Ok(s)
}

/// Entropy terms of every solved slab for `η = U^q / q`, plus the norms and bound ratios.
pub fn energy_terms(scheme: &Scheme, solution: &DGSolution, q_power: u32, q_list: &[u32]) -> Result<EnergyReport> {
    if q_power < 2 || !q_power.is_multiple_of(2) {
        return Err(Error::InvalidExponent(q_power));
    }
    scheme.check_solution(solution)?;
    let pair = EntropyPair::build(scheme.law(), Entropy::power(q_power), 0.0)?;
    let slabs = map_indexed(scheme.execution(), solution.num_solved(), |slab| {
        slab_terms(scheme, solution, &pair, q_power, slab)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let l2 = stability_check_l2(scheme, solution)?;
    let linf = boundedness_check_linf(scheme, solution, q_list)?;
    let u0 = scheme.problem().u0_l2();
    Ok(EnergyReport {
        q_power,
        slabs,
        scale: 0.5 * u0 * u0 + 1.0,
        l2_sup: l2.l2_sup,
        lq_sup: linf.lq_sup,
        max_abs: linf.max_abs,
        ratio_thm41: l2.ratio,
        ratio_thm51: linf.ratio,
    })
}

/// Reference times inside a slab at which `sup_t` is sampled.
fn slice_times() -> Vec<f64> {
    let mut taus = vec![0.0];
    taus.extend(Rule::gauss_legendre(SLICE_GAUSS_POINTS).points);
    taus.push(1.0);
    taus
}

/// `Σ_cells ∫ |U(τ, x)|^q dx` on `slab` at reference time `τ`, exact for even `q`.
fn slab_slice_power(solution: &DGSolution, slab: usize, tau: f64, q: u32) -> f64 {
    let reference = solution.reference();
    let nodes = solution.mesh().space_nodes();
    let rule = Rule::gauss_legendre((q as usize * reference.p()) / 2 + 1);
    let mut total = 0.0;
    for cell in 0..solution.mesh().num_cells() {
        let Ok(c) = solution.coefficients(slab, cell) else {
            return f64::NAN;
        };
        let dx = nodes[cell + 1] - nodes[cell];
        total += dx * rule.integrate(0.0, 1.0, |xi| reference.eval(c, [tau, xi]).abs().powi(q as i32));
    }
    total
}

fn slab_max_abs(reference: &ReferenceElement, coeffs: &[f64]) -> f64 {
    let nd = reference.n_dof();
    let mut m = 0.0f64;
    for c in coeffs.chunks(nd) {
        m = c.iter().fold(m, |m, v| m.max(v.abs()));
        for q in 0..reference.quad_points().len() {
            m = m.max(dot(reference.values_at_quad(q), c).abs());
        }
    }
    m
}

/// `sup_t ‖U(t)‖_q` over the sampled times of all solved slabs.
fn sup_slice_norm(solution: &DGSolution, q: u32) -> f64 {
    let taus = slice_times();
    (0..solution.num_solved())
        .flat_map(|slab| taus.iter().map(move |&tau| (slab, tau)))
        .map(|(slab, tau)| slab_slice_power(solution, slab, tau, q).powf(1.0 / q as f64))
        .fold(0.0, f64::max)
}

/// `‖U(t, ·)‖_{0,q,Ω}`. At a time level the later slab is used, except at `T`.
pub fn time_slice_norm(solution: &DGSolution, t: f64, q: u32) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidExponent(q));
    }
    let mesh = solution.mesh();
    let t_final = mesh.t_final();
    let slab = mesh.slab_of_time(t).ok_or(Error::TimeOutOfRange { t, t_final })?;
    let levels = mesh.time_levels();
    let tau = (t - levels[slab]) / (levels[slab + 1] - levels[slab]);
    solution.coefficients(slab, 0)?;
    Ok(slab_slice_power(solution, slab, tau, q).powf(1.0 / q as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Check {
    pub l2_sup: f64,
    /// `‖u0‖_{0,2,Ω} + ‖g_D‖_{0,2,Σ_T}`
    pub data_norm: f64,
    /// `l2_sup / data_norm`, or 0 for zero data.
    pub ratio: f64,
}

/// Empirical constant of the `L∞(L²)` bound.
pub fn stability_check_l2(scheme: &Scheme, solution: &DGSolution) -> Result<L2Check> {
    scheme.check_solution(solution)?;
    let l2_sup = sup_slice_norm(solution, 2);
    let problem = scheme.problem();
    let data_norm = problem.u0_l2() + problem.g_l2();
    let ratio = if data_norm > 0.0 { l2_sup / data_norm } else { 0.0 };
    Ok(L2Check {
        l2_sup,
        data_norm,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinfCheck {
    pub max_abs: f64,
    /// `‖u0‖_∞ + ‖g_D‖_∞`
    pub data_sup: f64,
    /// `max |U| / (data_sup + 1)`
    pub ratio: f64,
    pub lq_sup: Vec<(u32, f64)>,
    /// `(q, C_q)` with `max|U| = (C_q q / h)^{1/q} sup_t ‖U‖_q`.
    pub inverse_constants: Vec<(u32, f64)>,
    /// The inverse-inequality bound calibrated at the smallest `q` also covers the larger ones.
    pub q_scaling_ok: bool,
}

impl LinfCheck {
    /// `max |U| ≤ ‖u0‖_∞ + ‖g_D‖_∞ + tol`, the bound without the `+1`.
    pub fn within_data_bound(&self, tol: f64) -> bool {
        self.max_abs <= self.data_sup + tol
    }
}

/// Empirical check of the `L∞(L∞)` bound and of the `q` scaling behind it.
pub fn boundedness_check_linf(scheme: &Scheme, solution: &DGSolution, q_list: &[u32]) -> Result<LinfCheck> {
    scheme.check_solution(solution)?;
    if let Some(&q) = q_list.iter().find(|&&q| q == 0) {
        return Err(Error::InvalidExponent(q));
    }
    let reference = solution.reference();
    let max_abs = (0..solution.num_solved())
        .map(|slab| slab_max_abs(reference, solution.slab_coefficients(slab).unwrap_or(&[])))
        .fold(0.0, f64::max);
    let problem = scheme.problem();
    let data_sup = problem.u0_sup() + problem.g_sup();
    let lq_sup: Vec<(u32, f64)> = q_list.iter().map(|&q| (q, sup_slice_norm(solution, q))).collect();
    let h = scheme.mesh().h();
    let inverse_constants: Vec<(u32, f64)> = lq_sup
        .iter()
        .map(|&(q, n)| {
            let c = if n > 0.0 {
                (max_abs / n).powi(q as i32) * h / q as f64
            } else {
                0.0
            };
            (q, c)
        })
        .collect();
    let q_scaling_ok = match inverse_constants.iter().min_by_key(|(q, _)| *q) {
        Some(&(_, c_min)) => inverse_constants.iter().all(|&(_, c)| c <= c_min * (1.0 + 1e-12)),
        None => true,
    };
    Ok(LinfCheck {
        max_abs,
        data_sup,
        ratio: max_abs / (data_sup + 1.0),
        lq_sup,
        inverse_constants,
        q_scaling_ok,
    })
}

/// One element of [`interpolation_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEntry {
    pub element: usize,
    /// `A_T^1 … A_T^4`
    pub terms: [f64; 4],
    /// `q^{p+1} h_T² R(U) (∇U, ∇I(U^{q−1}))_T + h_T^β q^{p+1}`
    pub majorant: f64,
    /// `|gap| > 10 · majorant`
    pub flagged: bool,
}

impl GapEntry {
    pub fn gap(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// `b(U, U^{q−1}) − b(U, I(U^{q−1}))` split per element into its volume, streamline,
/// face-average and face-jump parts, next to the shock-capturing majorant.
pub fn interpolation_gap(scheme: &Scheme, solution: &DGSolution, q_power: u32) -> Result<Vec<GapEntry>> {
    if q_power < 2 || !q_power.is_multiple_of(2) {
        return Err(Error::InvalidExponent(q_power));
    }
    scheme.check_solution(solution)?;
    let per_slab = map_indexed(scheme.execution(), solution.num_solved(), |slab| {
        slab_gap(scheme, solution, q_power, slab)
    });
    Ok(per_slab.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

fn slab_gap(scheme: &Scheme, solution: &DGSolution, q_power: u32, slab: usize) -> Result<Vec<GapEntry>> {
    let law = scheme.law();
    let cfg = scheme.config();
    let reference = scheme.reference();
    let tables = scheme.tables();
    let nd = reference.n_dof();
    let cells = scheme.mesh().num_cells();
    let rule = reference.rule1d();
    let nfq = rule.len();
    let sd = scheme.slab_data(solution, slab)?;
    let coeffs = solution.slab_coefficients(slab)?;
    let indicators = scheme.indicators(&sd, coeffs);
    let qi = q_power as i32;
    let qf = q_power as f64;
    let p = reference.p() as i32;
    let beta = cfg.beta;
    let cell = |c: usize| &coeffs[c * nd..(c + 1) * nd];

    let mut out = Vec::with_capacity(cells);
    for c in 0..cells {
        let cc = cell(c);
        let icoeffs: Vec<f64> = cc.iter().map(|v| v.powi(qi - 1)).collect();
        // ψ = U^{q−1} − I(U^{q−1}) on a face, from this cell's own trace
        let psi = |table: &[f64], q: usize| {
            scheme.trace(table, cc, q).powi(qi - 1) - scheme.trace(table, &icoeffs, q)
        };
        let dx = scheme.cell_dx(c);
        let h_t = sd.dt.hypot(dx);
        let mut terms = [0.0; 4];
        let mut coupling = 0.0;
        for (q, &wq) in reference.quad_weights().iter().enumerate() {
            let w = wq * sd.dt * dx;
            let phi = reference.values_at_quad(q);
            let grads = reference.grads_at_quad(q);
            let u = dot(phi, cc);
            let grad = |a: &[f64]| -> (f64, f64) {
                let gt: f64 = grads.iter().zip(a).map(|(g, v)| g[0] * v).sum();
                let gx: f64 = grads.iter().zip(a).map(|(g, v)| g[1] * v).sum();
                (gt / sd.dt, gx / dx)
            };
            let (ut, ux) = grad(cc);
            let (it, ix) = grad(&icoeffs);
            let fp = law.f_prime(u);
            let l = ut + fp * ux;
            let dw = (qf - 1.0) * u.powi(qi - 2);
            let psi_v = u.powi(qi - 1) - dot(phi, &icoeffs);
            let (psi_t, psi_x) = (dw * ut - it, dw * ux - ix);
            terms[0] += w * l * psi_v;
            terms[1] += w * scheme.delta(h_t, u).0 * l * (psi_t + fp * psi_x);
            coupling += w * (ut * it + ux * ix);
        }
        // bottom: ½⟦F·n⟧ and C_T⟦U⟧ both equal ½(U⁺ − U⁻)
        for q in 0..nfq {
            let w = rule.weights[q] * dx;
            let half_jump = 0.5 * (scheme.trace(&tables.bottom, cc, q) - sd.bottom[c * nfq + q]);
            let ps = psi(&tables.bottom, q);
            terms[2] += w * half_jump * ps;
            terms[3] += w * half_jump * ps;
        }
        for (table, nx) in [(&tables.left, -1.0), (&tables.right, 1.0)] {
            for q in 0..nfq {
                let w = rule.weights[q] * sd.dt;
                let own = scheme.trace(table, cc, q);
                let (other, boundary) = match (nx < 0.0, c) {
                    (true, 0) => (sd.g_left[q], true),
                    (true, _) => (scheme.trace(&tables.right, cell(c - 1), q), false),
                    (false, _) if c + 1 == cells => (sd.g_right[q], true),
                    (false, _) => (scheme.trace(&tables.left, cell(c + 1), q), false),
                };
                let ps = psi(table, q);
                let flux_jump = (law.f(own) - law.f(other)) * nx;
                terms[2] -= w * 0.5 * flux_jump * ps;
                terms[3] += w * jump_term(cfg, law, own, other, boundary).value * ps;
            }
        }
        let scale = qf.powi(p + 1);
        let majorant = scale * h_t * h_t * indicators[c] * coupling + h_t.powf(beta) * scale;
        let gap: f64 = terms.iter().sum();
        out.push(GapEntry {
            element: scheme.mesh().element_id(slab, c),
            terms,
            majorant,
            flagged: gap.abs() > 10.0 * majorant,
        });
    }
    Ok(out)
}

/// `L¹` and `L²` errors of `U(t, ·)` against the exact solution, if the problem has one.
/// Each cell is split into 16 pieces so discontinuities of the exact solution are resolved.
pub fn error_norms(scheme: &Scheme, solution: &DGSolution, t: f64) -> Result<Option<(f64, f64)>> {
    let problem = scheme.problem();
    if !problem.has_exact() {
        return Ok(None);
    }
    let mesh = solution.mesh();
    let t_final = mesh.t_final();
    let slab = mesh.slab_of_time(t).ok_or(Error::TimeOutOfRange { t, t_final })?;
    let levels = mesh.time_levels();
    let tau = (t - levels[slab]) / (levels[slab + 1] - levels[slab]);
    let nodes = mesh.space_nodes();
    let rule = Rule::gauss_legendre(solution.p() + 3);
    const PIECES: usize = 16;
    let (mut l1, mut l2) = (0.0, 0.0);
    for cell in 0..mesh.num_cells() {
        let c = solution.coefficients(slab, cell)?;
        let (x0, dx) = (nodes[cell], nodes[cell + 1] - nodes[cell]);
        for k in 0..PIECES {
            let a = k as f64 / PIECES as f64;
            let b = (k + 1) as f64 / PIECES as f64;
            let diff = |xi: f64| {
                let exact = problem.exact(t, x0 + dx * xi).unwrap_or(f64::NAN);
                solution.reference().eval(c, [tau, xi]) - exact
            };
            l1 += dx * rule.integrate(a, b, |xi| diff(xi).abs());
            l2 += dx * rule.integrate(a, b, |xi| diff(xi).powi(2));
        }
    }
    Ok(Some((l1, l2.sqrt())))
}

/// Position where `U(t, ·)` crosses `level` most steeply downward, refined by bisection.
/// Returns `None` if there is no downward crossing.
pub fn shock_position(solution: &DGSolution, t: f64, level: f64) -> Result<Option<f64>> {
    const PER_CELL: usize = 16;
    let mesh = solution.mesh();
    let [a, b] = mesh.domain();
    let n = mesh.num_cells() * PER_CELL;
    let xs: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    let us = xs.iter().map(|&x| solution.eval(t, x)).collect::<Result<Vec<_>>>()?;
    let best = (0..n)
        .filter(|&k| us[k] >= level && us[k + 1] < level)
        .max_by(|&i, &j| (us[i] - us[i + 1]).total_cmp(&(us[j] - us[j + 1])));
    let Some(k) = best else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (xs[k], xs[k + 1]);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if solution.eval(t, mid)? >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_constant_at_two_is_nine_quarters() {
        assert!((young_constant(2.0) - 9.0 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn slice_times_include_endpoints() {
        let t = slice_times();
        assert_eq!(t.len(), SLICE_GAUSS_POINTS + 2);
        assert_eq!((t[0], t[t.len() - 1]), (0.0, 1.0));
    }
}
