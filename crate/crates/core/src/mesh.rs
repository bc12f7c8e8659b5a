//! Tensor space-time mesh: one layer of rectangles `(t_n, t_{n+1}) × (x_i, x_{i+1})`
//! per time slab, with oriented faces.

use crate::error::{Error, Result};

/// Space-time point `(t, x)`.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Face at `t = t_n` seen from the slab above; the jump is against the previous
    /// slab or the initial datum.
    TimeBottom,
    /// Interior space face between two cells of one slab.
    SpaceInterior,
    /// Face on the lateral boundary `Σ`.
    SpaceBoundary,
    /// Top of the last slab.
    TimeTop,
}

/// What lies on the minus side of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Element(usize),
    /// Lateral boundary: the exterior trace is `g_D`.
    Boundary,
    /// Bottom of the first slab: the exterior trace is `u0`.
    Initial,
    /// Top of the last slab: nothing beyond `T`.
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    /// Unit outward normal of `owner_plus`, as `(n_t, n_x)`.
    pub normal: Point,
    pub owner_plus: usize,
    pub neighbor_minus: Neighbor,
    pub endpoints: [Point; 2],
}

impl Face {
    pub fn length(&self) -> f64 {
        let [a, b] = self.endpoints;
        (b[0] - a[0]).hypot(b[1] - a[1])
    }
}

/// Position of a face on the boundary of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalFace {
    Bottom,
    Top,
    Left,
    Right,
}

impl LocalFace {
    pub const ALL: [LocalFace; 4] = [
        LocalFace::Bottom,
        LocalFace::Top,
        LocalFace::Left,
        LocalFace::Right,
    ];

    /// Outward normal of the element through this face.
    pub fn outward_normal(self) -> Point {
        match self {
            LocalFace::Bottom => [-1.0, 0.0],
            LocalFace::Top => [1.0, 0.0],
            LocalFace::Left => [0.0, -1.0],
            LocalFace::Right => [0.0, 1.0],
        }
    }
}

/// Whether an element sees a face from the owner (`Plus`) or neighbor (`Minus`) side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFace {
    pub face: usize,
    pub local: LocalFace,
    pub side: Side,
    /// Member of `∂*T`: every face except the slab top.
    pub in_boundary_star: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub slab: usize,
    pub cell: usize,
    pub t: [f64; 2],
    pub x: [f64; 2],
}

impl Element {
    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn diameter(&self) -> f64 {
        self.dt().hypot(self.dx())
    }

    pub fn area(&self) -> f64 {
        self.dt() * self.dx()
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.t[0] && p[0] <= self.t[1] && p[1] >= self.x[0] && p[1] <= self.x[1]
    }
}

/// Default quasi-uniformity bound `max h_T / min h_T`.
pub const QUASI_UNIFORMITY_BOUND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeMesh {
    time_levels: Vec<f64>,
    space_nodes: Vec<f64>,
    elements: Vec<Element>,
    faces: Vec<Face>,
    element_faces: Vec<[ElementFace; 4]>,
}

impl SpaceTimeMesh {
    /// Uniform mesh of `domain × (0, t_final)`.
    pub fn build(
        domain: [f64; 2],
        t_final: f64,
        num_space_cells: usize,
        num_slabs: usize,
    ) -> Result<Self> {
        let [left, right] = domain;
        if !(left < right) || !left.is_finite() || !right.is_finite() {
            return Err(Error::DegenerateDomain { left, right });
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidMesh(format!("t_final must be positive, got {t_final}")));
        }
        if num_space_cells == 0 || num_slabs == 0 {
            return Err(Error::InvalidMesh(
                "need at least one cell and one slab".into(),
            ));
        }
        let dt = t_final / num_slabs as f64;
        let dx = (right - left) / num_space_cells as f64;
        let mut time_levels: Vec<f64> = (0..=num_slabs).map(|n| n as f64 * dt).collect();
        time_levels[num_slabs] = t_final;
        let mut space_nodes: Vec<f64> = (0..=num_space_cells)
            .map(|i| left + i as f64 * dx)
            .collect();
        space_nodes[num_space_cells] = right;
        Self::from_levels(time_levels, space_nodes)
    }

    /// Tensor mesh from explicit, strictly increasing time levels (starting at 0) and space nodes.
    pub fn from_levels(time_levels: Vec<f64>, space_nodes: Vec<f64>) -> Result<Self> {
        if space_nodes.len() < 2 {
            return Err(Error::InvalidMesh("need at least two space nodes".into()));
        }
        if time_levels.len() < 2 || time_levels[0] != 0.0 {
            return Err(Error::InvalidMesh(
                "time levels must start at 0 and contain at least one slab".into(),
            ));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1] && w[1].is_finite());
        if !increasing(&space_nodes) {
            return Err(Error::DegenerateDomain {
                left: space_nodes[0],
                right: *space_nodes.last().unwrap(),
            });
        }
        if !increasing(&time_levels) {
            return Err(Error::InvalidMesh("time levels must increase".into()));
        }

        let cells = space_nodes.len() - 1;
        let slabs = time_levels.len() - 1;
        let id = |n: usize, i: usize| n * cells + i;

        let mut elements = Vec::with_capacity(cells * slabs);
        for n in 0..slabs {
            for i in 0..cells {
                elements.push(Element {
                    slab: n,
                    cell: i,
                    t: [time_levels[n], time_levels[n + 1]],
                    x: [space_nodes[i], space_nodes[i + 1]],
                });
            }
        }

        let placeholder = ElementFace {
            face: usize::MAX,
            local: LocalFace::Bottom,
            side: Side::Plus,
            in_boundary_star: true,
        };
        let mut element_faces = vec![[placeholder; 4]; elements.len()];
        let mut faces = Vec::new();
        let attach = |faces: &mut Vec<Face>,
                          element_faces: &mut Vec<[ElementFace; 4]>,
                          face: Face,
                          plus_local: LocalFace,
                          minus_local: LocalFace| {
            let fid = faces.len();
            let slot = |l: LocalFace| l as usize;
            element_faces[face.owner_plus][slot(plus_local)] = ElementFace {
                face: fid,
                local: plus_local,
                side: Side::Plus,
                in_boundary_star: plus_local != LocalFace::Top,
            };
            if let Neighbor::Element(m) = face.neighbor_minus {
                element_faces[m][slot(minus_local)] = ElementFace {
                    face: fid,
                    local: minus_local,
                    side: Side::Minus,
                    in_boundary_star: minus_local != LocalFace::Top,
                };
            }
            faces.push(face);
        };

        for n in 0..slabs {
            let (t0, t1) = (time_levels[n], time_levels[n + 1]);
            // bottom faces at t_n, owned by the slab above
            for i in 0..cells {
                let (x0, x1) = (space_nodes[i], space_nodes[i + 1]);
                let neighbor = if n == 0 {
                    Neighbor::Initial
                } else {
                    Neighbor::Element(id(n - 1, i))
                };
                attach(
                    &mut faces,
                    &mut element_faces,
                    Face {
                        kind: FaceKind::TimeBottom,
                        normal: [-1.0, 0.0],
                        owner_plus: id(n, i),
                        neighbor_minus: neighbor,
                        endpoints: [[t0, x0], [t0, x1]],
                    },
                    LocalFace::Bottom,
                    LocalFace::Top,
                );
            }
            // space faces, owned by the cell on their left (or the only cell at the left wall)
            for k in 0..=cells {
                let x = space_nodes[k];
                let (kind, normal, owner, neighbor, plus_local) = if k == 0 {
                    (FaceKind::SpaceBoundary, [0.0, -1.0], id(n, 0), Neighbor::Boundary, LocalFace::Left)
                } else if k == cells {
                    (
                        FaceKind::SpaceBoundary,
                        [0.0, 1.0],
                        id(n, cells - 1),
                        Neighbor::Boundary,
                        LocalFace::Right,
                    )
                } else {
                    (
                        FaceKind::SpaceInterior,
                        [0.0, 1.0],
                        id(n, k - 1),
                        Neighbor::Element(id(n, k)),
                        LocalFace::Right,
                    )
                };
                attach(
                    &mut faces,
                    &mut element_faces,
                    Face {
                        kind,
                        normal,
                        owner_plus: owner,
                        neighbor_minus: neighbor,
                        endpoints: [[t0, x], [t1, x]],
                    },
                    plus_local,
                    LocalFace::Left,
                );
            }
        }
        let top = time_levels[slabs];
        for i in 0..cells {
            attach(
                &mut faces,
                &mut element_faces,
                Face {
                    kind: FaceKind::TimeTop,
                    normal: [1.0, 0.0],
                    owner_plus: id(slabs - 1, i),
                    neighbor_minus: Neighbor::Terminal,
                    endpoints: [[top, space_nodes[i]], [top, space_nodes[i + 1]]],
                },
                LocalFace::Top,
                LocalFace::Bottom,
            );
        }

        Ok(SpaceTimeMesh {
            time_levels,
            space_nodes,
            elements,
            faces,
            element_faces,
        })
    }

    pub fn time_levels(&self) -> &[f64] {
        &self.time_levels
    }

    pub fn space_nodes(&self) -> &[f64] {
        &self.space_nodes
    }

    pub fn num_slabs(&self) -> usize {
        self.time_levels.len() - 1
    }

    pub fn num_cells(&self) -> usize {
        self.space_nodes.len() - 1
    }

    pub fn t_final(&self) -> f64 {
        *self.time_levels.last().unwrap()
    }

    pub fn domain(&self) -> [f64; 2] {
        [self.space_nodes[0], *self.space_nodes.last().unwrap()]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn element_id(&self, slab: usize, cell: usize) -> usize {
        slab * self.num_cells() + cell
    }

    pub fn element(&self, id: usize) -> Result<&Element> {
        self.elements.get(id).ok_or(Error::UnknownElement(id))
    }

    /// Maximal element diameter `h`.
    pub fn h(&self) -> f64 {
        self.elements.iter().map(Element::diameter).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.elements
            .iter()
            .map(Element::diameter)
            .fold(f64::INFINITY, f64::min)
    }

    /// `max h_T / min h_T`.
    pub fn quasi_uniformity(&self) -> f64 {
        self.h() / self.h_min()
    }

    /// The four faces of an element with orientation flags, ordered bottom, top, left, right.
    pub fn faces_of(&self, element_id: usize) -> Result<[(&Face, ElementFace); 4]> {
        let ef = self
            .element_faces
            .get(element_id)
            .ok_or(Error::UnknownElement(element_id))?;
        Ok(ef.map(|e| (&self.faces[e.face], e)))
    }

    /// Index of the slab containing `t`; a time level belongs to the slab above it,
    /// except `T` which belongs to the last slab.
    pub fn slab_of_time(&self, t: f64) -> Option<usize> {
        let levels = &self.time_levels;
        if t < levels[0] || t > *levels.last().unwrap() {
            return None;
        }
        let idx = levels.partition_point(|&l| l <= t);
        Some(idx.saturating_sub(1).min(self.num_slabs() - 1))
    }
}
