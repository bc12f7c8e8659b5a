//! Slab residual, Jacobian and residual indicator.
//!
//! For a test function `φ` on element `T` the residual is
//!
//! ```text
//! ∫_T L(U)φ + (δ L(U), φ_t + f'(U)φ_x)_T + ε̂_T (∇U, ∇φ)_T + ∫_{∂T} (F̂ − F(U⁺)·n⁺) φ⁺
//! ```
//!
//! with `L(U) = U_t + f'(U)U_x`. On the slab top `F̂ = U⁺` so that face drops out, and on
//! the bottom the face term is `(U⁺ − U⁻)φ`.

use nalgebra::DMatrix;

use super::flux::space_flux;
use super::linalg::BlockTridiagonal;
use super::Scheme;
use crate::exec::map_indexed;

/// Data the slab solve treats as fixed: the trace from below and the wall values.
#[derive(Debug, Clone)]
pub(crate) struct SlabData {
    pub slab: usize,
    pub dt: f64,
    /// `U⁻` on each cell's bottom face, at the face quadrature points (`cells × nfq`).
    pub bottom: Vec<f64>,
    pub g_left: Vec<f64>,
    pub g_right: Vec<f64>,
}

/// Residual contributions of one face or element: `(cell, values)` and `(row, col, block)`.
struct Contribution {
    residual: Vec<(usize, Vec<f64>)>,
    blocks: Vec<(usize, usize, DMatrix<f64>)>,
}

/// Quantities entering the residual indicator of a face, maximised over its quadrature points.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct FaceJumps {
    /// `max |⟦F(U)·n⟧|`
    pub flux: f64,
    /// `max |C_T ⟦U⟧|`
    pub state: f64,
}

impl Scheme {
    pub(crate) fn cell_dx(&self, cell: usize) -> f64 {
        let nodes = self.mesh.space_nodes();
        nodes[cell + 1] - nodes[cell]
    }

    fn cell_diameter(&self, slab_dt: f64, cell: usize) -> f64 {
        slab_dt.hypot(self.cell_dx(cell))
    }

    /// `U` on a face from the stored face table.
    pub(crate) fn trace(&self, table: &[f64], coeffs: &[f64], q: usize) -> f64 {
        let nd = coeffs.len();
        table[q * nd..(q + 1) * nd]
            .iter()
            .zip(coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `δ = C1 h_T / |F'(U)|` and `dδ/dU`.
    pub(crate) fn delta(&self, h_t: f64, u: f64) -> (f64, f64) {
        let fp = self.law.f_prime(u);
        let s2 = 1.0 + fp * fp;
        let s = s2.sqrt();
        let delta = self.cfg.c1 * h_t / s;
        let d_delta = -self.cfg.c1 * h_t * fp * self.law.f_second(u) / (s2 * s);
        (delta, d_delta)
    }

    fn element_contribution(
        &self,
        sd: &SlabData,
        cell: usize,
        coeffs: &[f64],
        eps: f64,
        want_jacobian: bool,
    ) -> Contribution {
        let reference = &self.reference;
        let nd = reference.n_dof();
        let dt = sd.dt;
        let dx = self.cell_dx(cell);
        let h_t = dt.hypot(dx);
        let area = dt * dx;
        let mut r = vec![0.0; nd];
        let mut jac = if want_jacobian {
            Some(DMatrix::zeros(nd, nd))
        } else {
            None
        };
        let mut phi_t = vec![0.0; nd];
        let mut phi_x = vec![0.0; nd];
        for (q, &wq) in reference.quad_weights().iter().enumerate() {
            let w = wq * area;
            let phi = reference.values_at_quad(q);
            let grads = reference.grads_at_quad(q);
            let (mut u, mut ut, mut ux) = (0.0, 0.0, 0.0);
            for i in 0..nd {
                phi_t[i] = grads[i][0] / dt;
                phi_x[i] = grads[i][1] / dx;
                u += coeffs[i] * phi[i];
                ut += coeffs[i] * phi_t[i];
                ux += coeffs[i] * phi_x[i];
            }
            let fp = self.law.f_prime(u);
            let fpp = self.law.f_second(u);
            let l = ut + fp * ux;
            let (delta, d_delta) = self.delta(h_t, u);
            for i in 0..nd {
                let s_i = phi_t[i] + fp * phi_x[i];
                r[i] += w * (l * phi[i] + delta * l * s_i + eps * (ut * phi_t[i] + ux * phi_x[i]));
            }
            if let Some(jac) = jac.as_mut() {
                for j in 0..nd {
                    let dl = phi_t[j] + fpp * phi[j] * ux + fp * phi_x[j];
                    for i in 0..nd {
                        let s_i = phi_t[i] + fp * phi_x[i];
                        jac[(i, j)] += w
                            * (dl * phi[i]
                                + d_delta * phi[j] * l * s_i
                                + delta * dl * s_i
                                + delta * l * fpp * phi[j] * phi_x[i]
                                + eps * (phi_t[j] * phi_t[i] + phi_x[j] * phi_x[i]));
                    }
                }
            }
        }

        // bottom face: (U⁺ − U⁻) φ
        let rule = reference.rule1d();
        let nfq = rule.len();
        let table = &self.tables.bottom;
        for q in 0..nfq {
            let w = rule.weights[q] * dx;
            let up = self.trace(table, coeffs, q);
            let jump = up - sd.bottom[cell * nfq + q];
            let phi = &table[q * nd..(q + 1) * nd];
            for i in 0..nd {
                r[i] += w * jump * phi[i];
            }
            if let Some(jac) = jac.as_mut() {
                for j in 0..nd {
                    for i in 0..nd {
                        jac[(i, j)] += w * phi[j] * phi[i];
                    }
                }
            }
        }
        Contribution {
            residual: vec![(cell, r)],
            blocks: jac.map(|m| vec![(cell, cell, m)]).unwrap_or_default(),
        }
    }

    /// Space face `k` at `x_k`: `k = 0` and `k = cells` are the walls.
    fn face_contribution(&self, sd: &SlabData, k: usize, coeffs: &[f64], want_jacobian: bool) -> Contribution {
        let reference = &self.reference;
        let nd = reference.n_dof();
        let cells = self.mesh.num_cells();
        let rule = reference.rule1d();
        let nfq = rule.len();
        let cell_coeffs = |c: usize| &coeffs[c * nd..(c + 1) * nd];
        let mut out = Contribution {
            residual: Vec::new(),
            blocks: Vec::new(),
        };

        if k == 0 || k == cells {
            // wall: owner is the adjacent cell, U⁻ = g_D
            let (cell, nx, table, g) = if k == 0 {
                (0, -1.0, &self.tables.left, &sd.g_left)
            } else {
                (cells - 1, 1.0, &self.tables.right, &sd.g_right)
            };
            let c = cell_coeffs(cell);
            let mut r = vec![0.0; nd];
            let mut m = DMatrix::zeros(nd, nd);
            for q in 0..nfq {
                let w = rule.weights[q] * sd.dt;
                let up = self.trace(table, c, q);
                let flux = space_flux(&self.cfg, &self.law, up, g[q], nx, true);
                let phi = &table[q * nd..(q + 1) * nd];
                let value = flux.value - self.law.f(up) * nx;
                let d = flux.d_plus - self.law.f_prime(up) * nx;
                for i in 0..nd {
                    r[i] += w * value * phi[i];
                    if want_jacobian {
                        for j in 0..nd {
                            m[(i, j)] += w * d * phi[j] * phi[i];
                        }
                    }
                }
            }
            out.residual.push((cell, r));
            if want_jacobian {
                out.blocks.push((cell, cell, m));
            }
            return out;
        }

        // interior: owner is the left cell, n⁺ = (0, 1)
        let (left, right) = (k - 1, k);
        let cl = cell_coeffs(left);
        let cr = cell_coeffs(right);
        let tl = &self.tables.right;
        let tr = &self.tables.left;
        let mut rl = vec![0.0; nd];
        let mut rr = vec![0.0; nd];
        let mut m_ll = DMatrix::zeros(nd, nd);
        let mut m_lr = DMatrix::zeros(nd, nd);
        let mut m_rl = DMatrix::zeros(nd, nd);
        let mut m_rr = DMatrix::zeros(nd, nd);
        for q in 0..nfq {
            let w = rule.weights[q] * sd.dt;
            let up = self.trace(tl, cl, q);
            let um = self.trace(tr, cr, q);
            let flux = space_flux(&self.cfg, &self.law, up, um, 1.0, false);
            let pl = &tl[q * nd..(q + 1) * nd];
            let pr = &tr[q * nd..(q + 1) * nd];
            let vl = flux.value - self.law.f(up);
            let vr = -flux.value + self.law.f(um);
            for i in 0..nd {
                rl[i] += w * vl * pl[i];
                rr[i] += w * vr * pr[i];
            }
            if want_jacobian {
                let a_ll = flux.d_plus - self.law.f_prime(up);
                let a_lr = flux.d_minus;
                let a_rl = -flux.d_plus;
                let a_rr = -flux.d_minus + self.law.f_prime(um);
                for i in 0..nd {
                    for j in 0..nd {
                        m_ll[(i, j)] += w * a_ll * pl[j] * pl[i];
                        m_lr[(i, j)] += w * a_lr * pr[j] * pl[i];
                        m_rl[(i, j)] += w * a_rl * pl[j] * pr[i];
                        m_rr[(i, j)] += w * a_rr * pr[j] * pr[i];
                    }
                }
            }
        }
        out.residual.push((left, rl));
        out.residual.push((right, rr));
        if want_jacobian {
            out.blocks.push((left, left, m_ll));
            out.blocks.push((left, right, m_lr));
            out.blocks.push((right, left, m_rl));
            out.blocks.push((right, right, m_rr));
        }
        out
    }

    /// Slab residual with the elementwise `ε̂` held fixed, and optionally its Jacobian.
    pub(crate) fn slab_residual(
        &self,
        sd: &SlabData,
        coeffs: &[f64],
        eps: &[f64],
        want_jacobian: bool,
    ) -> (Vec<f64>, Option<BlockTridiagonal>) {
        let nd = self.reference.n_dof();
        let cells = self.mesh.num_cells();
        let elements = map_indexed(self.exec, cells, |cell| {
            self.element_contribution(sd, cell, &coeffs[cell * nd..(cell + 1) * nd], eps[cell], want_jacobian)
        });
        let faces = map_indexed(self.exec, cells + 1, |k| {
            self.face_contribution(sd, k, coeffs, want_jacobian)
        });
        let mut r = vec![0.0; cells * nd];
        let mut jac = want_jacobian.then(|| BlockTridiagonal::zeros(cells, nd));
        for c in elements.iter().chain(faces.iter()) {
            for (cell, values) in &c.residual {
                for (a, b) in r[cell * nd..(cell + 1) * nd].iter_mut().zip(values) {
                    *a += b;
                }
            }
            if let Some(jac) = jac.as_mut() {
                for (row, col, m) in &c.blocks {
                    jac.add(*row, *col, m);
                }
            }
        }
        (r, jac)
    }

    /// `max |L(U)|` over the volume quadrature points of a cell.
    pub(crate) fn max_strong_residual(&self, sd: &SlabData, cell: usize, coeffs: &[f64]) -> f64 {
        let reference = &self.reference;
        let dx = self.cell_dx(cell);
        let mut m = 0.0f64;
        for q in 0..reference.quad_points().len() {
            let phi = reference.values_at_quad(q);
            let grads = reference.grads_at_quad(q);
            let (mut u, mut ut, mut ux) = (0.0, 0.0, 0.0);
            for (i, c) in coeffs.iter().enumerate() {
                u += c * phi[i];
                ut += c * grads[i][0] / sd.dt;
                ux += c * grads[i][1] / dx;
            }
            m = m.max((ut + self.law.f_prime(u) * ux).abs());
        }
        m
    }

    /// Jump maxima on the bottom face of each cell.
    pub(crate) fn bottom_jumps(&self, sd: &SlabData, coeffs: &[f64]) -> Vec<FaceJumps> {
        let nd = self.reference.n_dof();
        let nfq = self.reference.rule1d().len();
        (0..self.mesh.num_cells())
            .map(|cell| {
                let c = &coeffs[cell * nd..(cell + 1) * nd];
                let mut j = FaceJumps::default();
                for q in 0..nfq {
                    let jump = (self.trace(&self.tables.bottom, c, q) - sd.bottom[cell * nfq + q]).abs();
                    j.flux = j.flux.max(jump);
                    j.state = j.state.max(0.5 * jump);
                }
                j
            })
            .collect()
    }

    /// Jump maxima on the space faces `k = 0..=cells`.
    pub(crate) fn space_jumps(&self, sd: &SlabData, coeffs: &[f64]) -> Vec<FaceJumps> {
        let nd = self.reference.n_dof();
        let cells = self.mesh.num_cells();
        let nfq = self.reference.rule1d().len();
        (0..=cells)
            .map(|k| {
                let mut j = FaceJumps::default();
                for q in 0..nfq {
                    let (up, um, boundary) = if k == 0 {
                        (self.trace(&self.tables.left, &coeffs[..nd], q), sd.g_left[q], true)
                    } else if k == cells {
                        let c = &coeffs[(cells - 1) * nd..cells * nd];
                        (self.trace(&self.tables.right, c, q), sd.g_right[q], true)
                    } else {
                        let cl = &coeffs[(k - 1) * nd..k * nd];
                        let cr = &coeffs[k * nd..(k + 1) * nd];
                        (self.trace(&self.tables.right, cl, q), self.trace(&self.tables.left, cr, q), false)
                    };
                    let flux = space_flux(&self.cfg, &self.law, up, um, 1.0, boundary);
                    j.flux = j.flux.max((self.law.f(up) - self.law.f(um)).abs());
                    j.state = j.state.max(flux.jump_term.abs());
                }
                j
            })
            .collect()
    }

    /// `R(U)|_T` for every cell of the slab.
    pub(crate) fn indicators(&self, sd: &SlabData, coeffs: &[f64]) -> Vec<f64> {
        let nd = self.reference.n_dof();
        let bottom = self.bottom_jumps(sd, coeffs);
        let space = self.space_jumps(sd, coeffs);
        map_indexed(self.exec, self.mesh.num_cells(), |cell| {
            let l = self.max_strong_residual(sd, cell, &coeffs[cell * nd..(cell + 1) * nd]);
            let faces = [bottom[cell], space[cell], space[cell + 1]];
            let flux = faces.iter().map(|f| f.flux).fold(0.0, f64::max);
            let state = faces.iter().map(|f| f.state).fold(0.0, f64::max);
            l + (flux + state) / self.cell_diameter(sd.dt, cell)
        })
    }

    /// `ε̂ = max(C2 h^{2-β} R, C3 h^{p+1/2})` with the global `h`.
    pub fn eps_hat_from_indicator(&self, r: f64) -> f64 {
        let h = self.mesh.h();
        let p = self.reference.p() as f64;
        (self.cfg.c2 * h.powf(2.0 - self.cfg.beta) * r).max(self.cfg.c3 * h.powf(p + 0.5))
    }
}
