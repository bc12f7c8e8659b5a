//! Discrete solution storage, evaluation and the plain-text dump.

use std::fmt::Write as _;

use crate::elements::ReferenceElement;
use crate::error::{Error, Result};
use crate::mesh::SpaceTimeMesh;

/// Per-slab solve statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlabStats {
    pub newton_iterations: usize,
    pub picard_iterations: usize,
    pub picard_converged: bool,
    /// `‖r‖_∞` of the final Newton iterate.
    pub residual_norm: f64,
}

/// Coefficients of `U` on every solved slab, plus the shock-capturing viscosity that
/// was used to compute them.
#[derive(Debug, Clone, PartialEq)]
pub struct DGSolution {
    mesh: SpaceTimeMesh,
    reference: ReferenceElement,
    /// `coeffs[slab][cell * n_dof + i]`
    coeffs: Vec<Vec<f64>>,
    eps_hat: Vec<Vec<f64>>,
    stats: Vec<SlabStats>,
}

impl DGSolution {
    pub fn new(mesh: SpaceTimeMesh, reference: ReferenceElement) -> Self {
        DGSolution {
            mesh,
            reference,
            coeffs: Vec::new(),
            eps_hat: Vec::new(),
            stats: Vec::new(),
        }
    }

    pub fn mesh(&self) -> &SpaceTimeMesh {
        &self.mesh
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn p(&self) -> usize {
        self.reference.p()
    }

    pub fn n_dof(&self) -> usize {
        self.reference.n_dof()
    }

    pub fn num_solved(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_complete(&self) -> bool {
        self.coeffs.len() == self.mesh.num_slabs()
    }

    pub(crate) fn push_slab(&mut self, coeffs: Vec<f64>, eps_hat: Vec<f64>, stats: SlabStats) {
        self.coeffs.push(coeffs);
        self.eps_hat.push(eps_hat);
        self.stats.push(stats);
    }

    /// Keeps only the first `slabs` slabs.
    pub fn truncate(&mut self, slabs: usize) {
        self.coeffs.truncate(slabs);
        self.eps_hat.truncate(slabs);
        self.stats.truncate(slabs);
    }

    fn check_slab(&self, slab: usize) -> Result<()> {
        if slab >= self.coeffs.len() {
            return Err(Error::UnsolvedPredecessor { slab });
        }
        Ok(())
    }

    pub fn slab_coefficients(&self, slab: usize) -> Result<&[f64]> {
        self.check_slab(slab)?;
        Ok(&self.coeffs[slab])
    }

    pub fn coefficients(&self, slab: usize, cell: usize) -> Result<&[f64]> {
        self.check_slab(slab)?;
        let nd = self.n_dof();
        if cell >= self.mesh.num_cells() {
            return Err(Error::UnknownElement(self.mesh.element_id(slab, cell)));
        }
        Ok(&self.coeffs[slab][cell * nd..(cell + 1) * nd])
    }

    pub fn element_coefficients(&self, element_id: usize) -> Result<&[f64]> {
        let e = self.mesh.element(element_id)?;
        self.coefficients(e.slab, e.cell)
    }

    /// The elementwise `ε̂` used in the final solve of `slab`.
    pub fn eps_hat(&self, slab: usize) -> Result<&[f64]> {
        self.check_slab(slab)?;
        Ok(&self.eps_hat[slab])
    }

    pub fn stats(&self) -> &[SlabStats] {
        &self.stats
    }

    /// `U` on element `(slab, cell)` at reference coordinates `(τ̂, ξ̂)`.
    pub fn eval_local(&self, slab: usize, cell: usize, tau: f64, xi: f64) -> Result<f64> {
        let c = self.coefficients(slab, cell)?;
        Ok(self.reference.eval(c, [tau, xi]))
    }

    /// `U(t, x)`. On element interfaces the value from the later slab / right cell is
    /// returned, except at the final time and the right wall.
    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        let t_final = self.mesh.t_final();
        let slab = self
            .mesh
            .slab_of_time(t)
            .ok_or(Error::TimeOutOfRange { t, t_final })?;
        let nodes = self.mesh.space_nodes();
        let [a, b] = self.mesh.domain();
        if !(a..=b).contains(&x) {
            return Err(Error::InvalidMesh(format!("x = {x} outside [{a}, {b}]")));
        }
        let cell = (nodes.partition_point(|&n| n <= x).max(1) - 1).min(self.mesh.num_cells() - 1);
        let levels = self.mesh.time_levels();
        let tau = (t - levels[slab]) / (levels[slab + 1] - levels[slab]);
        let xi = (x - nodes[cell]) / (nodes[cell + 1] - nodes[cell]);
        self.eval_local(slab, cell, tau, xi)
    }

    /// Maximum of `|U|` over nodal values and volume quadrature points of the solved slabs.
    pub fn max_abs(&self) -> f64 {
        let nd = self.n_dof();
        let mut m = 0.0f64;
        for slab in &self.coeffs {
            for cell in slab.chunks(nd) {
                m = cell.iter().fold(m, |m, c| m.max(c.abs()));
                for q in 0..self.reference.quad_points().len() {
                    let v: f64 = self
                        .reference
                        .values_at_quad(q)
                        .iter()
                        .zip(cell)
                        .map(|(a, b)| a * b)
                        .sum();
                    m = m.max(v.abs());
                }
            }
        }
        m
    }

    /// Plain-text dump: a header, the mesh levels, and one record per element
    /// `slab element eps_hat c_0 … c_{n-1}`. Floats use shortest round-trip formatting,
    /// so [`DGSolution::load`] restores the solution bit for bit.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dgshock-solution v1 p={} slabs={} cells={} solved={}",
            self.p(),
            self.mesh.num_slabs(),
            self.mesh.num_cells(),
            self.num_solved()
        );
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "t {}", join(self.mesh.time_levels()));
        let _ = writeln!(out, "x {}", join(self.mesh.space_nodes()));
        let nd = self.n_dof();
        for (slab, coeffs) in self.coeffs.iter().enumerate() {
            for cell in 0..self.mesh.num_cells() {
                let id = self.mesh.element_id(slab, cell);
                let _ = writeln!(
                    out,
                    "{slab} {id} {:?} {}",
                    self.eps_hat[slab][cell],
                    join(&coeffs[cell * nd..(cell + 1) * nd])
                );
            }
        }
        out
    }

    /// Inverse of [`DGSolution::dump`]. Solve statistics are not stored and come back empty.
    pub fn load(text: &str) -> Result<Self> {
        let err = |line: usize, reason: &str| Error::Dump {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (n, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("dgshock-solution") || fields.next() != Some("v1") {
            return Err(err(n, "missing 'dgshock-solution v1' header"));
        }
        let mut get = |key: &str| -> Result<usize> {
            let field = fields.next().ok_or_else(|| err(n, &format!("missing {key}")))?;
            field
                .strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(n, &format!("bad {key} field '{field}'")))
        };
        let p = get("p")?;
        let slabs = get("slabs")?;
        let cells = get("cells")?;
        let solved = get("solved")?;
        let mut floats = |tag: &str| -> Result<Vec<f64>> {
            let (n, line) = lines.next().ok_or_else(|| err(0, &format!("missing '{tag}' line")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(tag) {
                return Err(err(n, &format!("expected '{tag}' line")));
            }
            it.map(|s| s.parse::<f64>().map_err(|_| err(n, &format!("bad float '{s}'"))))
                .collect()
        };
        let levels = floats("t")?;
        let nodes = floats("x")?;
        if levels.len() != slabs + 1 || nodes.len() != cells + 1 {
            return Err(err(2, "mesh size disagrees with header"));
        }
        let mesh = SpaceTimeMesh::from_levels(levels, nodes)?;
        let reference = ReferenceElement::build(p)?;
        let nd = reference.n_dof();
        if solved > slabs {
            return Err(err(1, "more solved slabs than slabs"));
        }
        let mut solution = DGSolution::new(mesh, reference);
        for slab in 0..solved {
            let mut coeffs = Vec::with_capacity(cells * nd);
            let mut eps = Vec::with_capacity(cells);
            for cell in 0..cells {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| err(0, &format!("missing record for slab {slab} cell {cell}")))?;
                let mut it = line.split_whitespace();
                let s: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| err(n, "bad slab"))?;
                let id: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| err(n, "bad id"))?;
                if s != slab || id != solution.mesh.element_id(slab, cell) {
                    return Err(err(n, "records out of order"));
                }
                let values: Vec<f64> = it
                    .map(|v| v.parse::<f64>().map_err(|_| err(n, &format!("bad float '{v}'"))))
                    .collect::<Result<_>>()?;
                if values.len() != nd + 1 {
                    return Err(err(n, &format!("expected {} numbers, got {}", nd + 1, values.len())));
                }
                eps.push(values[0]);
                coeffs.extend_from_slice(&values[1..]);
            }
            solution.push_slab(coeffs, eps, SlabStats::default());
        }
        if let Some((n, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(n, &format!("trailing content '{line}'")));
        }
        Ok(solution)
    }
}
