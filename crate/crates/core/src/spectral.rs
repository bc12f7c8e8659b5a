//! Spatial numerical ranges of symmetric matrices in `l^q` and the coercivity
//! inequality `(∇v, ∇I_h^p(v^{q-1}))_T ≥ C ∫_T |∇v|² ‖v‖_∞^{q-2}` for Lagrange elements.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elements::{quadratic_form, stiffness_on_element, AffineMap, ReferenceElement};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

/// Absolute tolerance of the inclusion and lemma checks.
pub const INCLUSION_TOL: f64 = 1e-10;

/// One Hölder-equality pair `(x, y)` with `‖x‖_q = 1`, `y_i = sign(x_i)|x_i|^{q-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericalRangeSample {
    pub matrix_dim: usize,
    pub q: u32,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

impl NumericalRangeSample {
    /// `|xᵀy − 1|` and `|‖y‖_{q/(q-1)} − 1|`, the larger of the two.
    pub fn holder_defect(&self) -> f64 {
        let xy: f64 = self.x.iter().zip(&self.y).map(|(a, b)| a * b).sum();
        let r = self.q as f64 / (self.q as f64 - 1.0);
        let ynorm = self.y.iter().map(|v| v.abs().powf(r)).sum::<f64>().powf(1.0 / r);
        (xy - 1.0).abs().max((ynorm - 1.0).abs())
    }
}

fn check_exponent(q: u32) -> Result<()> {
    if q < 2 || !q.is_multiple_of(2) {
        return Err(Error::InvalidExponent(q));
    }
    Ok(())
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotSymmetric);
    }
    Ok(())
}

/// `v^k` elementwise; for nodal vectors this is the interpolant of `v^k`.
pub fn nodal_power(v: &[f64], k: u32) -> Vec<f64> {
    v.iter().map(|x| x.powi(k as i32)).collect()
}

pub fn range_sample(a: &DMatrix<f64>, q: u32, x_raw: &[f64]) -> Result<NumericalRangeSample> {
    check_exponent(q)?;
    check_symmetric(a)?;
    if x_raw.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: x_raw.len(),
        });
    }
    let norm = x_raw
        .iter()
        .map(|v| v.abs().powi(q as i32))
        .sum::<f64>()
        .powf(1.0 / q as f64);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let x: Vec<f64> = x_raw.iter().map(|v| v / norm).collect();
    // q is even, so x^{q-1} already carries the sign of x.
    let y = nodal_power(&x, q - 1);
    let value = quadratic_form(a, &x, &y);
    Ok(NumericalRangeSample {
        matrix_dim: a.nrows(),
        q,
        x,
        y,
        value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeReport {
    pub q: u32,
    pub samples: usize,
    pub min_value: f64,
    pub max_value: f64,
    pub lambda_max: f64,
    /// Samples outside `[−tol, λ_max + tol]`.
    pub violations: usize,
}

impl RangeReport {
    pub fn inclusion_holds(&self) -> bool {
        self.violations == 0
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Samples the `l^q` numerical range of a PSD matrix and checks it against `[0, λ_max]`.
pub fn verify_range_inclusion(
    a: &DMatrix<f64>,
    q: u32,
    trials: usize,
    seed: u64,
) -> Result<RangeReport> {
    check_exponent(q)?;
    check_symmetric(a)?;
    let eigenvalues = symmetric_eigenvalues(a);
    let lambda_min = eigenvalues.first().copied().unwrap_or(0.0);
    if lambda_min < -INCLUSION_TOL {
        return Err(Error::NotPsd {
            eigenvalue: lambda_min,
        });
    }
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RangeReport {
        q,
        samples: 0,
        min_value: f64::INFINITY,
        max_value: f64::NEG_INFINITY,
        lambda_max,
        violations: 0,
    };
    for _ in 0..trials {
        let x_raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sample = match range_sample(a, q, &x_raw) {
            Ok(s) => s,
            Err(Error::ZeroVector) => continue,
            Err(e) => return Err(e),
        };
        report.samples += 1;
        report.min_value = report.min_value.min(sample.value);
        report.max_value = report.max_value.max(sample.value);
        if sample.value < -INCLUSION_TOL || sample.value > lambda_max + INCLUSION_TOL {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Seeded random PSD matrix `BᵀB` with `B` uniform in `[-1,1]^{n×n}`.
pub fn random_psd_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = b.transpose() * &b;
    (&a + a.transpose()) * 0.5
}

/// `v_𝒩ᵀ Â v_𝒩^{q-1}`.
pub fn coercivity_pairing(reference: &ReferenceElement, v: &[f64], q: u32) -> Result<f64> {
    check_exponent(q)?;
    if v.len() != reference.n_dof() {
        return Err(Error::DimensionMismatch {
            expected: reference.n_dof(),
            got: v.len(),
        });
    }
    Ok(quadratic_form(reference.stiffness(), v, &nodal_power(v, q - 1)))
}

/// `∫_T̂ ∇v · ∇I_h^p(v^{q-1})` by direct quadrature over the reference element.
pub fn pairing_by_quadrature(reference: &ReferenceElement, v: &[f64], q: u32) -> Result<f64> {
    check_exponent(q)?;
    if v.len() != reference.n_dof() {
        return Err(Error::DimensionMismatch {
            expected: reference.n_dof(),
            got: v.len(),
        });
    }
    let w = nodal_power(v, q - 1);
    let mut total = 0.0;
    for (qp, weight) in reference.quad_weights().iter().enumerate() {
        let grads = reference.grads_at_quad(qp);
        let mut gv = [0.0; 2];
        let mut gw = [0.0; 2];
        for (i, g) in grads.iter().enumerate() {
            for axis in 0..2 {
                gv[axis] += v[i] * g[axis];
                gw[axis] += w[i] * g[axis];
            }
        }
        total += weight * (gv[0] * gw[0] + gv[1] * gw[1]);
    }
    Ok(total)
}

/// `Σ_{i≥2} λ_i (vᵀξ_i)(ξ_iᵀ v^{q-1})`, the pairing expanded in the eigenbasis of `Â`
/// with the kernel term dropped.
pub fn eigen_expansion(reference: &ReferenceElement, v: &[f64], q: u32) -> f64 {
    let w = nodal_power(v, q - 1);
    let xi = reference.eigenvectors();
    reference
        .eigenvalues()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, lambda)| {
            let col = xi.column(k);
            let a: f64 = col.iter().zip(v).map(|(c, x)| c * x).sum();
            let b: f64 = col.iter().zip(&w).map(|(c, x)| c * x).sum();
            lambda * a * b
        })
        .sum()
}

/// How random test vectors are drawn; trials cycle through the kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialKind {
    Uniform,
    MeanFree,
    NearKernel,
}

impl TrialKind {
    fn of_trial(trial: usize) -> Self {
        match trial % 3 {
            0 => TrialKind::Uniform,
            1 => TrialKind::MeanFree,
            _ => TrialKind::NearKernel,
        }
    }
}

const NEAR_KERNEL_EPS: f64 = 1e-3;

/// The nodal vector of trial `trial`: deterministic in `(seed, trial)` whatever the schedule.
pub fn trial_vector(n: usize, seed: u64, trial: usize) -> (TrialKind, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let kind = TrialKind::of_trial(trial);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    match kind {
        TrialKind::Uniform => {}
        TrialKind::MeanFree => {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
        TrialKind::NearKernel => {
            v.iter_mut().for_each(|x| *x = 1.0 + NEAR_KERNEL_EPS * *x);
        }
    }
    (kind, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaQReport {
    pub q: u32,
    /// Minimum of LHS/RHS over non-constant trials.
    pub min_ratio: f64,
    pub trials_used: usize,
    /// Trials where the eigen-expansion identity missed the pairing by more than the tolerance.
    pub identity_failures: usize,
    /// Mean-free trials whose `v^{q-1}` is not orthogonal to the constants.
    pub orthogonality_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub p: usize,
    pub dim: usize,
    pub n_dof: usize,
    pub lambda2: f64,
    pub lambda_max: f64,
    pub lebesgue: f64,
    pub shape_factor: f64,
    /// `(n_dof · λ_max/λ₂ · Λ_p · shape_factor)^{-1}`
    pub c_check: f64,
    pub per_q: Vec<LemmaQReport>,
}

impl LemmaReport {
    /// Every `min_ratio ≥ C_check − 1e-10`.
    pub fn bound_holds(&self) -> bool {
        self.per_q
            .iter()
            .all(|r| r.min_ratio >= self.c_check - INCLUSION_TOL)
    }

    /// `(max − min) / max` of the per-q minimum ratios.
    pub fn q_spread(&self) -> f64 {
        let max = self.per_q.iter().map(|r| r.min_ratio).fold(f64::NEG_INFINITY, f64::max);
        let min = self.per_q.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            (max - min) / max
        } else {
            0.0
        }
    }
}

struct TrialOutcome {
    ratios: Vec<Option<f64>>,
    identity_failures: Vec<bool>,
    orthogonality_failures: Vec<bool>,
}

/// Measures the coercivity ratio `(∇v,∇I(v^{q-1}))_T / (∫_T|∇v|² ‖v‖_{∞,T}^{q-2})` on the
/// element `map(T̂)` for seeded random `v`.
pub fn verify_lemma(
    reference: &ReferenceElement,
    map: &AffineMap,
    trials: usize,
    q_list: &[u32],
    seed: u64,
    exec: Execution,
) -> Result<LemmaReport> {
    if reference.p() == 0 {
        return Err(Error::UnsupportedDegree(0));
    }
    for &q in q_list {
        check_exponent(q)?;
    }
    let stiffness = stiffness_on_element(reference, map)?;
    let n = reference.n_dof();
    let shape_factor = map.condition().powi(2);
    let lambda2 = reference.lambda2();
    let lambda_max = reference.lambda_max();
    let lebesgue = reference.lebesgue_constant();
    let c_check = 1.0 / (n as f64 * (lambda_max / lambda2) * lebesgue * shape_factor);

    let outcomes = map_indexed(exec, trials, |trial| {
        let (kind, v) = trial_vector(n, seed, trial);
        let energy = quadratic_form(&stiffness, &v, &v);
        let scale = v.iter().map(|x| x * x).sum::<f64>().max(1e-300);
        let constant = energy <= 1e-14 * scale * stiffness.amax();
        let sup = if constant { 0.0 } else { reference.sup_norm(&v) };
        let mut outcome = TrialOutcome {
            ratios: Vec::with_capacity(q_list.len()),
            identity_failures: Vec::with_capacity(q_list.len()),
            orthogonality_failures: Vec::with_capacity(q_list.len()),
        };
        for &q in q_list {
            let w = nodal_power(&v, q - 1);
            let lhs = quadratic_form(&stiffness, &v, &w);
            let ratio = if constant {
                None
            } else {
                Some(lhs / (energy * sup.powi(q as i32 - 2)))
            };
            outcome.ratios.push(ratio);

            let reference_pairing = quadratic_form(reference.stiffness(), &v, &w);
            let expansion = eigen_expansion(reference, &v, q);
            let tol = INCLUSION_TOL * reference_pairing.abs().max(1.0);
            outcome
                .identity_failures
                .push((reference_pairing - expansion).abs() > tol);

            let orth = kind == TrialKind::MeanFree && {
                let wsum: f64 = w.iter().sum();
                let wnorm = w.iter().map(|x| x.abs()).sum::<f64>().max(1e-300);
                wsum.abs() > INCLUSION_TOL * wnorm
            };
            outcome.orthogonality_failures.push(orth);
        }
        outcome
    });

    let per_q = q_list
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let mut report = LemmaQReport {
                q,
                min_ratio: f64::INFINITY,
                trials_used: 0,
                identity_failures: 0,
                orthogonality_failures: 0,
            };
            for outcome in &outcomes {
                if let Some(r) = outcome.ratios[k] {
                    report.min_ratio = report.min_ratio.min(r);
                    report.trials_used += 1;
                }
                report.identity_failures += outcome.identity_failures[k] as usize;
                report.orthogonality_failures += outcome.orthogonality_failures[k] as usize;
            }
            report
        })
        .collect();

    Ok(LemmaReport {
        p: reference.p(),
        dim: reference.dim(),
        n_dof: n,
        lambda2,
        lambda_max,
        lebesgue,
        shape_factor,
        c_check,
        per_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn identity_range_is_one() {
        for q in [2, 4, 8] {
            let s = range_sample(&DMatrix::identity(3, 3), q, &[0.3, -2.0, 0.7]).unwrap();
            assert!((s.value - 1.0).abs() < 1e-14);
            assert!(s.holder_defect() < 1e-12);
        }
    }

    #[test]
    fn kernel_direction_gives_zero() {
        let a = mat(&[&[0.0, 0.0], &[0.0, 2.0]]);
        assert_eq!(range_sample(&a, 4, &[1.0, 0.0]).unwrap().value, 0.0);
    }

    #[test]
    fn laplacian_pair_value() {
        let a = mat(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let s = range_sample(&a, 4, &[1.0, -1.0]).unwrap();
        // x = ±2^{-1/4}, y = ±2^{-3/4}, A y = (2·2^{-3/4}, −2·2^{-3/4}), xᵀAy = 2·2·2^{-1}
        let x = 2f64.powf(-0.25);
        let y = x * x * x;
        let direct = x * (y + y) + (-x) * (-y - y);
        assert!((s.value - direct).abs() < 1e-14);
        assert!((s.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn range_sample_rejections() {
        let a = DMatrix::identity(2, 2);
        assert_eq!(range_sample(&a, 4, &[0.0, 0.0]), Err(Error::ZeroVector));
        assert_eq!(range_sample(&a, 3, &[1.0, 0.0]), Err(Error::InvalidExponent(3)));
        assert!(matches!(
            range_sample(&a, 2, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let b = mat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert_eq!(range_sample(&b, 2, &[1.0, 1.0]), Err(Error::NotSymmetric));
    }

    #[test]
    fn zero_matrix_inclusion() {
        let r = verify_range_inclusion(&DMatrix::zeros(4, 4), 4, 100, 1).unwrap();
        assert_eq!(r.min_value, 0.0);
        assert_eq!(r.max_value, 0.0);
        assert!(r.inclusion_holds());
    }

    #[test]
    fn diagonal_inclusion_q2() {
        let a = mat(&[&[0.0, 0.0], &[0.0, 2.0]]);
        let r = verify_range_inclusion(&a, 2, 1000, 7).unwrap();
        assert!(r.max_value <= 2.0 && r.min_value >= 0.0);
        assert_eq!(r.samples, 1000);
    }

    #[test]
    fn q2_inclusion_is_a_rayleigh_quotient() {
        for seed in 0..20 {
            let a = random_psd_matrix(6, seed);
            let r = verify_range_inclusion(&a, 2, 200, seed).unwrap();
            assert!(r.inclusion_holds(), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = mat(&[&[1.0, 0.0], &[0.0, -0.5]]);
        assert_eq!(
            verify_range_inclusion(&a, 2, 10, 0),
            Err(Error::NotPsd { eigenvalue: -0.5 })
        );
    }

    #[test]
    fn pairing_examples() {
        let r1 = ReferenceElement::with_dim(1, 1).unwrap();
        assert_eq!(coercivity_pairing(&r1, &[0.4, 0.4], 4).unwrap(), 0.0);
        let lhs = coercivity_pairing(&r1, &[1.0, -1.0], 4).unwrap();
        assert!((lhs - 4.0).abs() < 1e-14);
        // λ₂ · vᵀv^{q-1} = 2 · 2
        assert!((lhs - r1.lambda2() * 2.0).abs() < 1e-13);
        assert!((pairing_by_quadrature(&r1, &[1.0, -1.0], 4).unwrap() - 4.0).abs() < 1e-13);
        assert!(coercivity_pairing(&r1, &[1.0], 4).is_err());
    }

    #[test]
    fn pairing_matches_quadrature_and_eigen_expansion() {
        for dim in 1..=2 {
            for p in 1..=3 {
                let r = ReferenceElement::with_dim(p, dim).unwrap();
                for trial in 0..30 {
                    let (_, v) = trial_vector(r.n_dof(), 11, trial);
                    for q in [2, 4, 6] {
                        let a = coercivity_pairing(&r, &v, q).unwrap();
                        let b = pairing_by_quadrature(&r, &v, q).unwrap();
                        let c = eigen_expansion(&r, &v, q);
                        let scale = a.abs().max(1.0);
                        assert!((a - b).abs() < 1e-12 * scale, "p={p} dim={dim}: {a} {b}");
                        assert!((a - c).abs() < 1e-10 * scale);
                    }
                    let quad = quadratic_form(r.stiffness(), &v, &v);
                    assert!((coercivity_pairing(&r, &v, 2).unwrap() - quad).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn lambda2_floor_for_mean_free_quadratic_case() {
        let r = ReferenceElement::with_dim(2, 1).unwrap();
        for trial in 0..60 {
            let (kind, v) = trial_vector(3, 5, trial);
            if kind != TrialKind::MeanFree {
                continue;
            }
            let vv: f64 = v.iter().map(|x| x * x).sum();
            assert!(coercivity_pairing(&r, &v, 2).unwrap() >= r.lambda2() * vv - 1e-12);
        }
    }

    #[test]
    fn trial_vectors_are_schedule_independent() {
        let a = trial_vector(9, 42, 17);
        let b = trial_vector(9, 42, 17);
        assert_eq!(a, b);
        assert_ne!(trial_vector(9, 42, 18).1, a.1);
    }

    #[test]
    fn q2_ratio_is_exactly_one() {
        let r = ReferenceElement::with_dim(1, 1).unwrap();
        let report =
            verify_lemma(&r, &AffineMap::identity(1), 60, &[2], 3, Execution::Sequential).unwrap();
        assert!((report.per_q[0].min_ratio - 1.0).abs() < 1e-12);
        assert!(report.c_check <= 1.0);
        assert!(report.bound_holds());
    }

    #[test]
    fn lemma_report_is_deterministic_across_execution_modes() {
        let r = ReferenceElement::build(1).unwrap();
        let map = AffineMap::scaling(vec![0.1, 0.05]).unwrap();
        let a = verify_lemma(&r, &map, 90, &[2, 4], 9, Execution::Sequential).unwrap();
        let b = verify_lemma(&r, &map, 90, &[2, 4], 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!((a.shape_factor - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lemma_rejects_constants_only_degree() {
        let r = ReferenceElement::build(0).unwrap();
        assert!(verify_lemma(&r, &AffineMap::identity(2), 1, &[2], 0, Execution::Sequential).is_err());
    }
}
