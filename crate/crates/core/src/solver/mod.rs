//! Slab-by-slab space-time DG(p) solver.

mod assembly;
pub mod flux;
pub mod linalg;
mod solution;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elements::ReferenceElement;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::law::ConservationLaw;
use crate::mesh::{LocalFace, SpaceTimeMesh};
use crate::problem::ProblemData;

pub(crate) use assembly::SlabData;
pub use flux::{ct_coefficient, numerical_flux, FluxFamily, StabilizationConfig};
pub use solution::{DGSolution, SlabStats};

/// Newton and outer (Picard) iteration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSettings {
    pub max_iter: usize,
    /// Convergence threshold on `‖r‖_∞`.
    pub abs_tol: f64,
    /// Smallest line-search step before the solve is declared divergent.
    pub min_damping: f64,
    pub max_picard: usize,
    /// Relative change of `ε̂` below which the outer loop stops.
    pub picard_tol: f64,
    /// Amplitude of a seeded random perturbation of the initial guess.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iter: 30,
            abs_tol: 1e-10,
            min_damping: 1.0 / 1024.0,
            max_picard: 10,
            picard_tol: 1e-8,
            perturbation: 0.0,
            seed: 0,
        }
    }
}

/// History length of the Anderson-accelerated outer iteration.
const ANDERSON_DEPTH: usize = 6;

/// Anderson acceleration of the fixed-point map `x ↦ G(x)`.
#[derive(Debug)]
struct Anderson {
    depth: usize,
    xs: Vec<Vec<f64>>,
    gs: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson {
            depth,
            xs: Vec::new(),
            gs: Vec::new(),
        }
    }

    /// Records the pair `(x, G(x))` and returns the next iterate.
    fn next(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = gx.iter().zip(x).map(|(g, x)| g - x).collect();
        self.xs.push(x.to_vec());
        self.gs.push(f.clone());
        if self.xs.len() > self.depth + 1 {
            self.xs.remove(0);
            self.gs.remove(0);
        }
        let m = self.xs.len() - 1;
        if m == 0 {
            return gx.to_vec();
        }
        let n = x.len();
        let df = DMatrix::from_fn(n, m, |i, k| self.gs[k + 1][i] - self.gs[k][i]);
        let dx = DMatrix::from_fn(n, m, |i, k| self.xs[k + 1][i] - self.xs[k][i]);
        let rhs = DVector::from_column_slice(&f);
        let gamma = match df.clone().svd(true, true).solve(&rhs, 1e-12) {
            Ok(g) if g.iter().all(|v| v.is_finite()) => g,
            _ => return gx.to_vec(),
        };
        let correction = (dx + df) * gamma;
        (0..n).map(|i| x[i] + f[i] - correction[i]).collect()
    }
}

/// Extra Newton steps taken after `abs_tol` is met, while they still reduce the residual.
const POLISH_STEPS: usize = 3;

/// Basis values at the face quadrature points, `[q * n_dof + i]`.
#[derive(Debug, Clone)]
pub(crate) struct FaceTables {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl FaceTables {
    fn new(reference: &ReferenceElement) -> Self {
        let table = |face| {
            reference
                .face_points(face)
                .into_iter()
                .flat_map(|pt| reference.basis_at(pt).0)
                .collect()
        };
        FaceTables {
            bottom: table(LocalFace::Bottom),
            top: table(LocalFace::Top),
            left: table(LocalFace::Left),
            right: table(LocalFace::Right),
        }
    }
}

/// A failed march: the error and every slab solved before it.
#[derive(Debug, Clone)]
pub struct MarchFailure {
    pub error: Error,
    pub partial: Box<DGSolution>,
}

impl std::fmt::Display for MarchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} slabs solved)", self.error, self.partial.num_solved())
    }
}

impl std::error::Error for MarchFailure {}

/// The discrete problem: law, data, mesh, element and stabilization.
#[derive(Debug, Clone)]
pub struct Scheme {
    law: ConservationLaw,
    problem: ProblemData,
    cfg: StabilizationConfig,
    newton: NewtonSettings,
    mesh: SpaceTimeMesh,
    reference: ReferenceElement,
    tables: FaceTables,
    exec: Execution,
}

impl Scheme {
    /// `C0` of `law` is recomputed on the state range of `problem`.
    pub fn new(
        law: ConservationLaw,
        problem: ProblemData,
        cfg: StabilizationConfig,
        newton: NewtonSettings,
        mesh: SpaceTimeMesh,
        p: usize,
    ) -> Result<Self> {
        let law = law.with_state_bound(problem.state_bound());
        cfg.validate(&law)?;
        let [a, b] = problem.domain();
        if mesh.domain() != [a, b] {
            return Err(Error::InvalidMesh(format!(
                "mesh domain {:?} differs from problem domain {:?}",
                mesh.domain(),
                [a, b]
            )));
        }
        if mesh.t_final() > problem.t_final() * (1.0 + 1e-12) {
            return Err(Error::InvalidMesh(format!(
                "mesh ends at {} after T = {}",
                mesh.t_final(),
                problem.t_final()
            )));
        }
        if newton.max_iter == 0 || newton.max_picard == 0 || !(newton.abs_tol > 0.0) {
            return Err(Error::InvalidMesh("Newton settings need max_iter, max_picard ≥ 1 and abs_tol > 0".into()));
        }
        let reference = ReferenceElement::build(p)?;
        let tables = FaceTables::new(&reference);
        Ok(Scheme {
            law,
            problem,
            cfg,
            newton,
            mesh,
            reference,
            tables,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn law(&self) -> &ConservationLaw {
        &self.law
    }

    pub fn problem(&self) -> &ProblemData {
        &self.problem
    }

    pub fn config(&self) -> &StabilizationConfig {
        &self.cfg
    }

    pub fn newton(&self) -> &NewtonSettings {
        &self.newton
    }

    pub fn mesh(&self) -> &SpaceTimeMesh {
        &self.mesh
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub(crate) fn tables(&self) -> &FaceTables {
        &self.tables
    }

    pub fn empty_solution(&self) -> DGSolution {
        DGSolution::new(self.mesh.clone(), self.reference.clone())
    }

    pub(crate) fn check_solution(&self, solution: &DGSolution) -> Result<()> {
        if solution.mesh() != &self.mesh || solution.p() != self.reference.p() {
            return Err(Error::InvalidMesh("solution does not belong to this scheme".into()));
        }
        Ok(())
    }

    /// Nodal values of the spatial interpolant of `u0` on a cell.
    fn initial_nodal(&self, cell: usize) -> Vec<f64> {
        let nodes = self.mesh.space_nodes();
        let (x0, dx) = (nodes[cell], nodes[cell + 1] - nodes[cell]);
        self.reference
            .basis1d()
            .nodes()
            .iter()
            .map(|xi| self.problem.u0(x0 + dx * xi))
            .collect()
    }

    /// `U⁻` on the bottom face of `cell` in `slab`, at the face quadrature points.
    pub fn bottom_trace(&self, solution: &DGSolution, slab: usize, cell: usize) -> Result<Vec<f64>> {
        let rule = self.reference.rule1d();
        if slab == 0 {
            let nodal = self.initial_nodal(cell);
            let basis = self.reference.basis1d();
            return Ok(rule
                .points
                .iter()
                .map(|&s| basis.values(s).iter().zip(&nodal).map(|(a, b)| a * b).sum())
                .collect());
        }
        let prev = solution
            .coefficients(slab - 1, cell)
            .map_err(|_| Error::UnsolvedPredecessor { slab })?;
        let nd = self.reference.n_dof();
        Ok((0..rule.len())
            .map(|q| {
                self.tables.top[q * nd..(q + 1) * nd]
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub(crate) fn slab_data(&self, solution: &DGSolution, slab: usize) -> Result<SlabData> {
        if slab >= self.mesh.num_slabs() {
            return Err(Error::UnknownElement(self.mesh.element_id(slab, 0)));
        }
        if slab > solution.num_solved() {
            return Err(Error::UnsolvedPredecessor { slab });
        }
        let levels = self.mesh.time_levels();
        let (t0, dt) = (levels[slab], levels[slab + 1] - levels[slab]);
        let mut bottom = Vec::new();
        for cell in 0..self.mesh.num_cells() {
            bottom.extend(self.bottom_trace(solution, slab, cell)?);
        }
        let rule = self.reference.rule1d();
        let [xl, xr] = self.mesh.domain();
        let wall = |x: f64| -> Vec<f64> {
            rule.points.iter().map(|&s| self.problem.g_d(t0 + dt * s, x)).collect()
        };
        Ok(SlabData {
            slab,
            dt,
            bottom,
            g_left: wall(xl),
            g_right: wall(xr),
        })
    }

    /// Constant-in-time extension of the trace from below, plus the optional seeded
    /// perturbation.
    fn initial_guess(&self, solution: &DGSolution, slab: usize) -> Result<Vec<f64>> {
        let cells = self.mesh.num_cells();
        let nd = self.reference.n_dof();
        let mut guess = Vec::with_capacity(cells * nd);
        for cell in 0..cells {
            let spatial: Vec<f64> = if slab == 0 {
                self.initial_nodal(cell)
            } else {
                let prev = solution.coefficients(slab - 1, cell)?;
                self.reference
                    .basis1d()
                    .nodes()
                    .iter()
                    .map(|&xi| self.reference.eval(prev, [1.0, xi]))
                    .collect()
            };
            for idx in self.reference.multi_index() {
                guess.push(spatial[idx[1]]);
            }
        }
        if self.newton.perturbation != 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.newton.seed);
            rng.set_stream(slab as u64);
            for g in guess.iter_mut() {
                *g += self.newton.perturbation * rng.random_range(-1.0..1.0);
            }
        }
        Ok(guess)
    }

    fn eps_for(&self, sd: &SlabData, coeffs: &[f64]) -> Vec<f64> {
        self.indicators(sd, coeffs)
            .into_iter()
            .map(|r| self.eps_hat_from_indicator(r))
            .collect()
    }

    /// Damped Newton for fixed `ε̂`. Returns the iterate, iteration count and `‖r‖_∞`.
    fn newton_solve(&self, sd: &SlabData, mut coeffs: Vec<f64>, eps: &[f64]) -> Result<(Vec<f64>, usize, f64)> {
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let divergence = |iterations, residual| Error::NewtonDivergence {
            slab: sd.slab,
            iterations,
            residual,
        };
        let mut polish = 0;
        let mut converged = false;
        for iteration in 0..=self.newton.max_iter {
            let (r, jac) = self.slab_residual(sd, &coeffs, eps, true);
            let rn = norm(&r);
            if !rn.is_finite() {
                return Err(divergence(iteration, rn));
            }
            if rn <= self.newton.abs_tol {
                converged = true;
            }
            if converged && (polish == POLISH_STEPS || rn == 0.0) {
                return Ok((coeffs, iteration, rn));
            }
            if iteration == self.newton.max_iter {
                return if converged {
                    Ok((coeffs, iteration, rn))
                } else {
                    Err(divergence(iteration, rn))
                };
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let step = jac
                .expect("Jacobian requested")
                .solve(&rhs)
                .map_err(|cell| Error::SingularJacobian { slab: sd.slab, cell })?;
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = coeffs.iter().zip(&step).map(|(c, s)| c + alpha * s).collect();
                let (rt, _) = self.slab_residual(sd, &trial, eps, false);
                let rtn = norm(&rt);
                if converged {
                    // polishing: keep the step only if it helps
                    if rtn < rn {
                        coeffs = trial;
                        polish += 1;
                    } else {
                        return Ok((coeffs, iteration, rn));
                    }
                    break;
                }
                if rtn.is_finite() && rtn < (1.0 - 1e-4 * alpha) * rn {
                    coeffs = trial;
                    break;
                }
                alpha *= 0.5;
                if alpha < self.newton.min_damping {
                    return Err(divergence(iteration + 1, rn));
                }
            }
        }
        unreachable!("the loop returns on its last iteration")
    }

    /// Solves `slab` given the solved predecessors in `solution`, and appends it.
    pub fn solve_slab(&self, solution: &mut DGSolution, slab: usize) -> Result<()> {
        self.check_solution(solution)?;
        if slab != solution.num_solved() {
            return Err(Error::UnsolvedPredecessor { slab });
        }
        let sd = self.slab_data(solution, slab)?;
        let mut coeffs = self.initial_guess(solution, slab)?;
        // the previous slab's viscosity is the better predictor once the flow is under way
        let mut eps = match slab.checked_sub(1) {
            Some(prev) => solution.eps_hat(prev)?.to_vec(),
            None => self.eps_for(&sd, &coeffs),
        };
        let mut stats = SlabStats::default();
        let mut anderson = Anderson::new(ANDERSON_DEPTH);
        let floor = self.eps_hat_from_indicator(0.0);
        for outer in 1..=self.newton.max_picard {
            let (next, iterations, residual) = self.newton_solve(&sd, coeffs, &eps)?;
            coeffs = next;
            stats.newton_iterations += iterations;
            stats.picard_iterations = outer;
            stats.residual_norm = residual;
            let eps_new = self.eps_for(&sd, &coeffs);
            let scale = eps_new.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let change = eps_new
                .iter()
                .zip(&eps)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                / scale.max(f64::MIN_POSITIVE);
            if change < self.newton.picard_tol {
                stats.picard_converged = true;
                break;
            }
            if outer < self.newton.max_picard {
                eps = anderson.next(&eps, &eps_new);
                eps.iter_mut().for_each(|e| *e = e.max(floor));
            } else {
                debug!(
                    "slab {slab}: shock-capturing viscosity not settled after {outer} outer iterations (relative change {change:.2e})"
                );
            }
        }
        debug!(
            "slab {slab}: {} Newton iterations, {} outer, residual {:.2e}",
            stats.newton_iterations, stats.picard_iterations, stats.residual_norm
        );
        solution.push_slab(coeffs, eps, stats);
        Ok(())
    }

    /// Solves all slabs in order.
    pub fn march(&self) -> std::result::Result<DGSolution, MarchFailure> {
        let mut solution = self.empty_solution();
        for slab in 0..self.mesh.num_slabs() {
            if let Err(error) = self.solve_slab(&mut solution, slab) {
                return Err(MarchFailure {
                    error,
                    partial: Box::new(solution),
                });
            }
        }
        Ok(solution)
    }

    /// The discrete residual of `candidate` on `slab`. `eps = None` evaluates `ε̂` at the
    /// candidate itself.
    pub fn assemble_slab_residual(
        &self,
        solution: &DGSolution,
        slab: usize,
        candidate: &[f64],
        eps: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        self.check_solution(solution)?;
        let expected = self.mesh.num_cells() * self.reference.n_dof();
        if candidate.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: candidate.len(),
            });
        }
        let sd = self.slab_data(solution, slab)?;
        let eps = match eps {
            Some(e) => e.to_vec(),
            None => self.eps_for(&sd, candidate),
        };
        Ok(self.slab_residual(&sd, candidate, &eps, false).0)
    }

    /// `R(U)|_T` for a solved element.
    pub fn residual_indicator(&self, solution: &DGSolution, element_id: usize) -> Result<f64> {
        self.check_solution(solution)?;
        let e = *self.mesh.element(element_id)?;
        let sd = self.slab_data(solution, e.slab)?;
        let coeffs = solution.slab_coefficients(e.slab)?;
        Ok(self.indicators(&sd, coeffs)[e.cell])
    }

    /// `δ` at the volume quadrature points and `ε̂(U)` of a solved element.
    pub fn stabilization_params(&self, solution: &DGSolution, element_id: usize) -> Result<(Vec<f64>, f64)> {
        let e = *self.mesh.element(element_id)?;
        let r = self.residual_indicator(solution, element_id)?;
        let coeffs = solution.coefficients(e.slab, e.cell)?;
        let h_t = e.diameter();
        let delta = (0..self.reference.quad_points().len())
            .map(|q| {
                let u: f64 = self
                    .reference
                    .values_at_quad(q)
                    .iter()
                    .zip(coeffs)
                    .map(|(a, b)| a * b)
                    .sum();
                self.delta(h_t, u).0
            })
            .collect();
        Ok((delta, self.eps_hat_from_indicator(r)))
    }

    /// Testing the scheme with `v ≡ 1` on a slab: `∫_top U − ∫_bottom U⁻ + ∮_walls F̂·n`.
    pub fn slab_balance(&self, solution: &DGSolution, slab: usize) -> Result<f64> {
        self.check_solution(solution)?;
        let sd = self.slab_data(solution, slab)?;
        let coeffs = solution.slab_coefficients(slab)?;
        let nd = self.reference.n_dof();
        let rule = self.reference.rule1d();
        let nodes = self.mesh.space_nodes();
        let cells = self.mesh.num_cells();
        let mut total = 0.0;
        for cell in 0..cells {
            let dx = nodes[cell + 1] - nodes[cell];
            let c = &coeffs[cell * nd..(cell + 1) * nd];
            for q in 0..rule.len() {
                let top: f64 = self.tables.top[q * nd..(q + 1) * nd].iter().zip(c).map(|(a, b)| a * b).sum();
                total += rule.weights[q] * dx * (top - sd.bottom[cell * rule.len() + q]);
            }
        }
        for q in 0..rule.len() {
            let w = rule.weights[q] * sd.dt;
            let ul: f64 = self.tables.left[q * nd..(q + 1) * nd].iter().zip(&coeffs[..nd]).map(|(a, b)| a * b).sum();
            let ur: f64 = self.tables.right[q * nd..(q + 1) * nd]
                .iter()
                .zip(&coeffs[(cells - 1) * nd..])
                .map(|(a, b)| a * b)
                .sum();
            total += w * numerical_flux(&self.cfg, &self.law, ul, sd.g_left[q], [0.0, -1.0], true);
            total += w * numerical_flux(&self.cfg, &self.law, ur, sd.g_right[q], [0.0, 1.0], true);
        }
        Ok(total)
    }
}
