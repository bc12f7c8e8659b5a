//! Tensor-product Lagrange elements on the unit interval / square.
//!
//! Nodes are equispaced (`p ≥ 1`) or the midpoint (`p = 0`). Basis function `i` of the
//! tensor element is `ℓ_a(x̂_0) ℓ_b(x̂_1)` with `i = a (p+1) + b`; in the space-time
//! solver axis 0 is time and axis 1 is space.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::LocalFace;
use crate::quadrature::Rule;

pub const MAX_DEGREE: usize = 4;

/// Reference-element point; unused trailing coordinates are zero.
pub type RefPoint = [f64; 2];

/// One-dimensional Lagrange basis on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagrange1d {
    nodes: Vec<f64>,
    denominators: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(p: usize) -> Self {
        let nodes: Vec<f64> = if p == 0 {
            vec![0.5]
        } else {
            (0..=p).map(|k| k as f64 / p as f64).collect()
        };
        let denominators = (0..nodes.len())
            .map(|i| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &xj)| nodes[i] - xj)
                    .product()
            })
            .collect();
        Lagrange1d {
            nodes,
            denominators,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values and derivatives of every basis function at `x`.
    pub fn eval(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let n = self.nodes.len();
        for i in 0..n {
            let mut value = 1.0;
            let mut deriv = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let factor = x - self.nodes[j];
                deriv = deriv * factor + value;
                value *= factor;
            }
            values[i] = value / self.denominators[i];
            derivs[i] = deriv / self.denominators[i];
        }
    }

    pub fn values(&self, x: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        let mut d = vec![0.0; self.len()];
        self.eval(x, &mut v, &mut d);
        v
    }

    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        let mut d = vec![0.0; self.len()];
        self.eval(x, &mut v, &mut d);
        d
    }
}

/// Lagrange reference element of degree `p` on `[0,1]^dim`, `dim ∈ {1, 2}`.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    p: usize,
    dim: usize,
    basis1d: Lagrange1d,
    multi_index: Vec<[usize; 2]>,
    nodes: Vec<RefPoint>,
    rule1d: Rule,
    quad_points: Vec<RefPoint>,
    quad_weights: Vec<f64>,
    /// `values[q * n_dof + i] = φ_i(x_q)`
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
    stiffness: DMatrix<f64>,
    directional: Vec<DMatrix<f64>>,
    mass: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    lebesgue: f64,
}

impl ReferenceElement {
    /// Space-time (two-dimensional) element.
    pub fn build(p: usize) -> Result<Self> {
        Self::with_dim(p, 2)
    }

    pub fn with_dim(p: usize, dim: usize) -> Result<Self> {
        if p > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(p));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::DimensionMismatch { expected: 2, got: dim });
        }
        let basis1d = Lagrange1d::new(p);
        let k = p + 1;
        let multi_index: Vec<[usize; 2]> = if dim == 1 {
            (0..k).map(|a| [a, 0]).collect()
        } else {
            (0..k).flat_map(|a| (0..k).map(move |b| [a, b])).collect()
        };
        let nodes = multi_index
            .iter()
            .map(|idx| {
                let mut pt = [0.0; 2];
                for axis in 0..dim {
                    pt[axis] = basis1d.nodes()[idx[axis]];
                }
                pt
            })
            .collect();

        let rule1d = Rule::gauss_legendre(p + 2);
        let (quad_points, quad_weights) = tensor_rule(&rule1d, dim);

        let mut element = ReferenceElement {
            p,
            dim,
            basis1d,
            multi_index,
            nodes,
            rule1d,
            quad_points,
            quad_weights,
            values: Vec::new(),
            grads: Vec::new(),
            stiffness: DMatrix::zeros(0, 0),
            directional: Vec::new(),
            mass: DMatrix::zeros(0, 0),
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
            lebesgue: 0.0,
        };
        let nd = element.n_dof();
        let nq = element.quad_points.len();
        element.values = vec![0.0; nq * nd];
        element.grads = vec![[0.0; 2]; nq * nd];
        for q in 0..nq {
            let pt = element.quad_points[q];
            let (vals, grads) = element.basis_at(pt);
            element.values[q * nd..(q + 1) * nd].copy_from_slice(&vals);
            element.grads[q * nd..(q + 1) * nd].copy_from_slice(&grads);
        }

        let mut directional = vec![DMatrix::zeros(nd, nd); dim];
        let mut mass = DMatrix::zeros(nd, nd);
        for q in 0..nq {
            let w = element.quad_weights[q];
            let vals = &element.values[q * nd..(q + 1) * nd];
            let grads = &element.grads[q * nd..(q + 1) * nd];
            for i in 0..nd {
                for j in 0..nd {
                    mass[(i, j)] += w * vals[i] * vals[j];
                    for (axis, block) in directional.iter_mut().enumerate() {
                        block[(i, j)] += w * grads[i][axis] * grads[j][axis];
                    }
                }
            }
        }
        let stiffness: DMatrix<f64> = directional
            .iter()
            .fold(DMatrix::zeros(nd, nd), |acc, m| acc + m);
        let eigen = SymmetricEigen::new(stiffness.clone());
        let mut order: Vec<usize> = (0..nd).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
        element.eigenvalues = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
        element.eigenvectors = DMatrix::from_fn(nd, nd, |r, c| eigen.eigenvectors[(r, order[c])]);
        element.stiffness = stiffness;
        element.directional = directional;
        element.mass = mass;
        element.lebesgue = element.sup_on_reference(|basis_values: &[f64]| {
            basis_values.iter().map(|v| v.abs()).sum()
        });
        Ok(element)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_dof(&self) -> usize {
        self.multi_index.len()
    }

    pub fn nodes(&self) -> &[RefPoint] {
        &self.nodes
    }

    pub fn multi_index(&self) -> &[[usize; 2]] {
        &self.multi_index
    }

    pub fn basis1d(&self) -> &Lagrange1d {
        &self.basis1d
    }

    /// The one-dimensional Gauss rule (`p + 2` points) used on faces and per axis.
    pub fn rule1d(&self) -> &Rule {
        &self.rule1d
    }

    pub fn quad_points(&self) -> &[RefPoint] {
        &self.quad_points
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Basis values at volume quadrature point `q`.
    pub fn values_at_quad(&self, q: usize) -> &[f64] {
        let nd = self.n_dof();
        &self.values[q * nd..(q + 1) * nd]
    }

    /// Reference gradients at volume quadrature point `q`.
    pub fn grads_at_quad(&self, q: usize) -> &[[f64; 2]] {
        let nd = self.n_dof();
        &self.grads[q * nd..(q + 1) * nd]
    }

    /// Reference stiffness matrix `Â_ij = ∫ ∇φ_j · ∇φ_i`.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// `∫ ∂_l φ_j ∂_l φ_i` for each axis `l`.
    pub fn directional_stiffness(&self) -> &[DMatrix<f64>] {
        &self.directional
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Eigenvalues of `Â`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors of `Â` as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Second-smallest eigenvalue of `Â` (zero for `p = 0`).
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Lebesgue constant `Λ_p = sup Σ_i |φ_i|`.
    pub fn lebesgue_constant(&self) -> f64 {
        self.lebesgue
    }

    /// Basis values and gradients at a reference point.
    pub fn basis_at(&self, pt: RefPoint) -> (Vec<f64>, Vec<[f64; 2]>) {
        let k = self.basis1d.len();
        let mut v = [[0.0; MAX_DEGREE + 1]; 2];
        let mut d = [[0.0; MAX_DEGREE + 1]; 2];
        for axis in 0..self.dim {
            self.basis1d.eval(pt[axis], &mut v[axis][..k], &mut d[axis][..k]);
        }
        let nd = self.n_dof();
        let mut values = vec![0.0; nd];
        let mut grads = vec![[0.0; 2]; nd];
        for (i, idx) in self.multi_index.iter().enumerate() {
            if self.dim == 1 {
                values[i] = v[0][idx[0]];
                grads[i] = [d[0][idx[0]], 0.0];
            } else {
                values[i] = v[0][idx[0]] * v[1][idx[1]];
                grads[i] = [d[0][idx[0]] * v[1][idx[1]], v[0][idx[0]] * d[1][idx[1]]];
            }
        }
        (values, grads)
    }

    /// Evaluates the polynomial with nodal coefficients `coeffs` at `pt`.
    pub fn eval(&self, coeffs: &[f64], pt: RefPoint) -> f64 {
        let (values, _) = self.basis_at(pt);
        values.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    /// Lagrange interpolation: the nodal values of `g`.
    pub fn interpolate<G: Fn(RefPoint) -> f64>(&self, g: G) -> Result<Vec<f64>> {
        self.nodes
            .iter()
            .map(|&pt| {
                let value = g(pt);
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::NonFinite {
                        what: format!("interpolation node {pt:?}"),
                        value,
                    })
                }
            })
            .collect()
    }

    /// Quadrature points of the face rule on a local face of the square, as reference points.
    pub fn face_points(&self, face: LocalFace) -> Vec<RefPoint> {
        self.rule1d
            .points
            .iter()
            .map(|&s| match face {
                LocalFace::Bottom => [0.0, s],
                LocalFace::Top => [1.0, s],
                LocalFace::Left => [s, 0.0],
                LocalFace::Right => [s, 1.0],
            })
            .collect()
    }

    /// Supremum over the reference element of `g(basis values)`, by dense sampling
    /// followed by pattern-search refinement of the best samples.
    pub fn sup_on_reference<G: Fn(&[f64]) -> f64>(&self, g: G) -> f64 {
        let eval = |pt: RefPoint| g(&self.basis_at(pt).0);
        sup_on_unit_box(self.dim, 8 * self.p.max(1) + 1, eval)
    }

    /// `‖v‖_{0,∞}` of the polynomial with nodal values `coeffs`.
    pub fn sup_norm(&self, coeffs: &[f64]) -> f64 {
        let nodal = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let sampled = self.sup_on_reference(|values: &[f64]| {
            values.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>().abs()
        });
        nodal.max(sampled)
    }

    /// Largest observed `|T̂| sup|∇v|² / ∫|∇v|²` over random non-constant `v`: a measured
    /// constant for the inverse estimate `∫‖∇v‖²_∞ ≤ C ∫‖∇v‖²`.
    pub fn inverse_estimate_constant(&self, trials: usize, seed: u64) -> f64 {
        if self.p == 0 {
            return 0.0;
        }
        let nd = self.n_dof();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let v: Vec<f64> = (0..nd).map(|_| rng.random_range(-1.0..1.0)).collect();
            let energy = quadratic_form(&self.stiffness, &v, &v);
            if energy < 1e-14 {
                continue;
            }
            let sup_grad2 = sup_on_unit_box(self.dim, 8 * self.p + 1, |pt| {
                let (_, grads) = self.basis_at(pt);
                let mut g = [0.0; 2];
                for (gi, vi) in grads.iter().zip(&v) {
                    g[0] += gi[0] * vi;
                    g[1] += gi[1] * vi;
                }
                g[0] * g[0] + g[1] * g[1]
            });
            worst = worst.max(sup_grad2 / energy);
        }
        worst
    }
}

/// Elements are determined by degree and dimension.
impl PartialEq for ReferenceElement {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.dim == other.dim
    }
}

fn tensor_rule(rule: &Rule, dim: usize) -> (Vec<RefPoint>, Vec<f64>) {
    if dim == 1 {
        let pts = rule.points.iter().map(|&x| [x, 0.0]).collect();
        return (pts, rule.weights.clone());
    }
    let mut pts = Vec::with_capacity(rule.len() * rule.len());
    let mut wts = Vec::with_capacity(rule.len() * rule.len());
    for (a, &xa) in rule.points.iter().enumerate() {
        for (b, &xb) in rule.points.iter().enumerate() {
            pts.push([xa, xb]);
            wts.push(rule.weights[a] * rule.weights[b]);
        }
    }
    (pts, wts)
}

/// `xᵀ A y`.
pub fn quadratic_form(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[(i, j)] * y[j];
        }
        total += x[i] * row;
    }
    total
}

/// Maximum of `f` on `[0,1]^dim`: grid sampling plus local pattern search.
pub fn sup_on_unit_box<F: Fn(RefPoint) -> f64>(dim: usize, samples_per_axis: usize, f: F) -> f64 {
    let n = samples_per_axis.max(2);
    let step = 1.0 / (n - 1) as f64;
    let mut candidates: Vec<(f64, RefPoint)> = Vec::new();
    let grid = |k: usize| k as f64 * step;
    if dim == 1 {
        for k in 0..n {
            let pt = [grid(k), 0.0];
            candidates.push((f(pt), pt));
        }
    } else {
        for a in 0..n {
            for b in 0..n {
                let pt = [grid(a), grid(b)];
                candidates.push((f(pt), pt));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.truncate(6);
    let mut best = candidates[0].0;
    for &(value, start) in &candidates {
        let mut pt = start;
        let mut current = value;
        let mut h = step;
        while h > 1e-10 {
            let mut improved = false;
            for axis in 0..dim {
                for dir in [-1.0, 1.0] {
                    let mut trial = pt;
                    trial[axis] = (trial[axis] + dir * h).clamp(0.0, 1.0);
                    let v = f(trial);
                    if v > current {
                        current = v;
                        pt = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best = best.max(current);
    }
    best
}

/// Diagonal affine map `x = J x̂ + b` from the reference element.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    scale: Vec<f64>,
    shift: Vec<f64>,
}

impl AffineMap {
    pub fn new(scale: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        if scale.len() != shift.len() {
            return Err(Error::DimensionMismatch {
                expected: scale.len(),
                got: shift.len(),
            });
        }
        if scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
            return Err(Error::SingularMap(scale));
        }
        Ok(AffineMap { scale, shift })
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    pub fn scaling(scale: Vec<f64>) -> Result<Self> {
        let n = scale.len();
        Self::new(scale, vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn det(&self) -> f64 {
        self.scale.iter().product::<f64>().abs()
    }

    /// Spectral norm `‖J‖`.
    pub fn norm(&self) -> f64 {
        self.scale.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// `‖J⁻¹‖`.
    pub fn inverse_norm(&self) -> f64 {
        self.scale.iter().fold(0.0, |m, s| m.max(1.0 / s.abs()))
    }

    /// Shape-regularity measure `‖J‖ ‖J⁻¹‖`.
    pub fn condition(&self) -> f64 {
        self.norm() * self.inverse_norm()
    }

    /// Eigenvalues `μ_l` of `K = (JᵀJ)⁻¹`; the eigenvectors are the coordinate axes.
    pub fn metric_eigenvalues(&self) -> Vec<f64> {
        self.scale.iter().map(|s| 1.0 / (s * s)).collect()
    }

    pub fn apply(&self, x_hat: &[f64]) -> Vec<f64> {
        x_hat
            .iter()
            .zip(self.scale.iter().zip(&self.shift))
            .map(|(x, (s, b))| s * x + b)
            .collect()
    }

    /// Physical gradient `J⁻ᵀ ∇̂`.
    pub fn transfer_gradient(&self, ref_grad: &[f64]) -> Vec<f64> {
        ref_grad.iter().zip(&self.scale).map(|(g, s)| g / s).collect()
    }
}

/// Element stiffness `∫_T ∇φ_j · ∇φ_i dx = |det J| Σ_l μ_l Â_l`.
pub fn stiffness_on_element(reference: &ReferenceElement, map: &AffineMap) -> Result<DMatrix<f64>> {
    if map.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            got: map.dim(),
        });
    }
    let det = map.det();
    let nd = reference.n_dof();
    Ok(reference
        .directional_stiffness()
        .iter()
        .zip(map.metric_eigenvalues())
        .fold(DMatrix::zeros(nd, nd), |acc, (block, mu)| acc + block * (det * mu)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsupported_degree() {
        assert!(matches!(
            ReferenceElement::build(5),
            Err(Error::UnsupportedDegree(5))
        ));
    }

    #[test]
    fn linear_interval_stiffness() {
        let r = ReferenceElement::with_dim(1, 1).unwrap();
        let a = r.stiffness();
        let expected = [[1.0, -1.0], [-1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)] - expected[i][j]).abs() < 1e-14);
            }
        }
        assert!(r.eigenvalues()[0].abs() < 1e-14);
        assert!((r.eigenvalues()[1] - 2.0).abs() < 1e-14);
        let kernel = r.eigenvectors().column(0);
        assert!((kernel[0] - kernel[1]).abs() < 1e-14);
    }

    #[test]
    fn quadratic_interval_stiffness_matches_hand_integration() {
        // ∫ φ_i' φ_j' for nodes 0, 1/2, 1 is (1/3)[[7,-8,1],[-8,16,-8],[1,-8,7]]
        let r = ReferenceElement::with_dim(2, 1).unwrap();
        let expected = [[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((r.stiffness()[(i, j)] - expected[i][j] / 3.0).abs() < 1e-13);
            }
        }
        assert!((r.lambda2() - 2.0).abs() < 1e-12);
        assert!((r.lambda_max() - 8.0).abs() < 1e-12);
        assert!((r.lebesgue_constant() - 1.25).abs() < 1e-9);
    }

    #[test]
    fn constant_element() {
        let r = ReferenceElement::build(0).unwrap();
        assert_eq!(r.n_dof(), 1);
        assert_eq!(r.stiffness()[(0, 0)], 0.0);
        assert_eq!(r.lambda2(), 0.0);
        for q in 0..r.quad_points().len() {
            assert_eq!(r.values_at_quad(q), &[1.0]);
        }
    }

    #[test]
    fn bilinear_square_kernel() {
        let r = ReferenceElement::build(1).unwrap();
        assert_eq!(r.n_dof(), 4);
        assert!(r.eigenvalues()[0].abs() < 1e-14);
        assert!(r.eigenvalues()[1] > 1e-3);
        let ones = vec![1.0; 4];
        let a1 = r.stiffness() * nalgebra::DVector::from_vec(ones);
        assert!(a1.amax() < 1e-14);
    }

    #[test]
    fn stiffness_invariants_all_degrees() {
        for dim in 1..=2 {
            for p in 0..=MAX_DEGREE {
                let r = ReferenceElement::with_dim(p, dim).unwrap();
                let a = r.stiffness();
                assert!((a - a.transpose()).amax() < 1e-13);
                assert!(r.eigenvalues()[0].abs() < 1e-12);
                if p >= 1 {
                    // one-dimensional kernel
                    assert!(r.eigenvalues()[1] > 1e-6, "p={p} dim={dim}");
                }
                assert!(r.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
                // partition of unity at quadrature points
                for q in 0..r.quad_points().len() {
                    let s: f64 = r.values_at_quad(q).iter().sum();
                    assert!((s - 1.0).abs() < 1e-13);
                    let g: [f64; 2] = r
                        .grads_at_quad(q)
                        .iter()
                        .fold([0.0; 2], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
                    assert!(g[0].abs() < 1e-11 && g[1].abs() < 1e-11);
                }
                // Kronecker property
                for (j, &node) in r.nodes().iter().enumerate() {
                    let (vals, _) = r.basis_at(node);
                    for (i, v) in vals.iter().enumerate() {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!((v - expected).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_lebesgue_is_square_of_interval_constant() {
        for p in 1..=3 {
            let l1 = ReferenceElement::with_dim(p, 1).unwrap().lebesgue_constant();
            let l2 = ReferenceElement::with_dim(p, 2).unwrap().lebesgue_constant();
            assert!((l2 - l1 * l1).abs() < 1e-8, "p={p}: {l2} vs {}", l1 * l1);
        }
    }

    #[test]
    fn quadrature_exactness_per_axis() {
        for p in 0..=MAX_DEGREE {
            let r = ReferenceElement::build(p).unwrap();
            let max_deg = 2 * p + 2;
            for a in 0..=max_deg {
                for b in 0..=max_deg {
                    let got: f64 = r
                        .quad_points()
                        .iter()
                        .zip(r.quad_weights())
                        .map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32))
                        .sum();
                    let exact = 1.0 / ((a + 1) * (b + 1)) as f64;
                    assert!((got - exact).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let r = ReferenceElement::with_dim(1, 1).unwrap();
        let c = r.interpolate(|x| x[0] * x[0]).unwrap();
        assert_eq!(c, vec![0.0, 1.0]);
        assert!((r.eval(&c, [0.5, 0.0]) - 0.5).abs() < 1e-15);

        let r2 = ReferenceElement::build(2).unwrap();
        let g = |x: RefPoint| 1.0 + 2.0 * x[0] - x[1] * x[1] + 3.0 * x[0] * x[0] * x[1];
        let c = r2.interpolate(g).unwrap();
        for &q in r2.quad_points() {
            assert!((r2.eval(&c, q) - g(q)).abs() < 1e-13);
        }

        let v = r2.interpolate(|x| x[0] - 2.0 * x[1]).unwrap();
        let cube = r2.interpolate(|x| (x[0] - 2.0 * x[1]).powi(3)).unwrap();
        for (a, b) in v.iter().zip(&cube) {
            assert!((a.powi(3) - b).abs() < 1e-13);
        }

        assert!(matches!(
            r2.interpolate(|_| f64::NAN),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn interpolation_converges_at_order_p_plus_one() {
        let g = |x: f64| (3.0 * x).sin() + x * x;
        for p in 1..=3 {
            let r = ReferenceElement::with_dim(p, 1).unwrap();
            let mut errors = Vec::new();
            let sizes = [0.2, 0.1, 0.05, 0.025];
            for &h in &sizes {
                let coeffs = r.interpolate(|xh| g(0.3 + h * xh[0])).unwrap();
                let err = sup_on_unit_box(1, 201, |xh| (r.eval(&coeffs, xh) - g(0.3 + h * xh[0])).abs());
                errors.push(err);
            }
            let slope = ((errors[0] / errors[3]).ln()) / ((sizes[0] / sizes[3]) as f64).ln();
            assert!((slope - (p + 1) as f64).abs() < 0.2, "p={p} slope={slope}");
        }
    }

    #[test]
    fn identity_map_reproduces_reference_stiffness() {
        let r = ReferenceElement::build(2).unwrap();
        let a = stiffness_on_element(&r, &AffineMap::identity(2)).unwrap();
        assert!((a - r.stiffness()).amax() < 1e-15);
    }

    #[test]
    fn scaled_interval_stiffness() {
        let r = ReferenceElement::with_dim(2, 1).unwrap();
        let h = 0.125;
        let map = AffineMap::new(vec![h], vec![0.4]).unwrap();
        let a = stiffness_on_element(&r, &map).unwrap();
        assert!((&a - r.stiffness() / h).amax() < 1e-12);
        // direct physical quadrature
        let rule = Rule::gauss_legendre(6);
        for i in 0..3 {
            for j in 0..3 {
                let direct = rule.integrate(0.4, 0.4 + h, |x| {
                    let xh = (x - 0.4) / h;
                    let d = r.basis1d().derivatives(xh);
                    d[i] * d[j] / (h * h)
                });
                assert!((direct - a[(i, j)]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn anisotropic_stiffness_matches_quadrature_and_gradient_transfer() {
        let r = ReferenceElement::build(2).unwrap();
        let map = AffineMap::new(vec![0.1, 0.05], vec![1.0, -2.0]).unwrap();
        let a = stiffness_on_element(&r, &map).unwrap();
        let nd = r.n_dof();
        let mut direct = DMatrix::zeros(nd, nd);
        for q in 0..r.quad_points().len() {
            let w = r.quad_weights()[q] * map.det();
            let grads: Vec<Vec<f64>> = r
                .grads_at_quad(q)
                .iter()
                .map(|g| map.transfer_gradient(g))
                .collect();
            for i in 0..nd {
                for j in 0..nd {
                    direct[(i, j)] += w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
        assert!((&a - &direct).amax() < 1e-10 * a.amax());

        // gradient transfer for u(x) = x0² x1 against a finite difference in physical space
        let u = |x: &[f64]| x[0] * x[0] * x[1];
        let x_hat = [0.3, 0.7];
        let x = map.apply(&x_hat);
        let ref_grad = [
            2.0 * x[0] * x[1] * map.scale()[0],
            x[0] * x[0] * map.scale()[1],
        ];
        let phys = map.transfer_gradient(&ref_grad);
        let h = 1e-6;
        for axis in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (u(&xp) - u(&xm)) / (2.0 * h);
            assert!((fd - phys[axis]).abs() < 1e-6);
        }
        assert!((map.condition() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_map_rejected() {
        assert!(matches!(
            AffineMap::new(vec![1.0, 0.0], vec![0.0, 0.0]),
            Err(Error::SingularMap(_))
        ));
        let r = ReferenceElement::build(1).unwrap();
        assert!(stiffness_on_element(&r, &AffineMap::identity(1)).is_err());
    }

    #[test]
    fn inverse_estimate_constant_is_finite() {
        for p in 1..=3 {
            let r = ReferenceElement::build(p).unwrap();
            let c = r.inverse_estimate_constant(50, 3);
            assert!(c >= 1.0 && c.is_finite(), "p={p}: {c}");
        }
    }
}
