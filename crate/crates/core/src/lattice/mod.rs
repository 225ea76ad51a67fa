//! Random particle lattices for rectangular plates.
//!
//! Particles are seeded on a jittered grid, connected by the edges of their
//! Delaunay triangulation, and each edge becomes a truss element whose
//! cross-section is the shared Voronoi facet length times the plate
//! thickness. Global stiffness and mass are scatter-added from the element
//! matrices in [`element`].

pub mod element;
pub mod geometry;
pub mod io;
pub mod sparse;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use element::{element_mass, element_stiffness, Mat4};
use geometry::{Cell, EdgeTag, Point};
pub use sparse::{CsrMatrix, TripletBuilder};

/// Facets shorter than this fraction of the element length are floored to it,
/// so that hull edges whose bisector falls outside the plate keep a small area.
pub const MIN_FACET_FRACTION: f64 = 0.05;

const MAX_TRIANGULATION_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSpec {
    /// Plate width `e_x` in meters.
    pub width: f64,
    /// Plate height `e_y` in meters.
    pub height: f64,
    pub youngs_modulus: f64,
    pub density: f64,
    /// Out-of-plane thickness; element areas are facet length times this.
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    pub n_particles: usize,
    #[serde(default)]
    pub seed: u64,
    /// Maximum jitter as a fraction of the grid pitch.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_thickness() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    0.45
}

impl PlateSpec {
    /// 1 cm square plate at particle scale (100x100 grid), E = 5 GPa.
    pub fn dataset_default() -> Self {
        PlateSpec {
            width: 0.01,
            height: 0.01,
            youngs_modulus: 5.0e9,
            density: 2500.0,
            thickness: 1.0,
            n_particles: 10_000,
            seed: 0,
            jitter: 0.45,
        }
    }

    /// 10 cm square plate used for wave-field inspection runs.
    pub fn showcase_default() -> Self {
        PlateSpec {
            width: 0.1,
            height: 0.1,
            n_particles: 5_000,
            ..Self::dataset_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("youngs_modulus", self.youngs_modulus),
            ("density", self.density),
            ("thickness", self.thickness),
        ];
        for (arg, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(arg, format!("must be positive, got {v}")));
            }
        }
        if self.n_particles < 4 {
            return Err(Error::invalid("n_particles", format!("need at least 4, got {}", self.n_particles)));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::invalid("jitter", format!("must lie in [0, 0.5), got {}", self.jitter)));
        }
        Ok(())
    }

    /// Grid columns and rows: `ceil(sqrt(n))` each.
    pub fn grid_dims(&self) -> (usize, usize) {
        let m = (self.n_particles as f64).sqrt().ceil() as usize;
        let m = if (m - 1) * (m - 1) >= self.n_particles { m - 1 } else { m };
        (m, m)
    }

    /// Grid pitch `(width / columns, height / rows)`.
    pub fn pitch(&self) -> (f64, f64) {
        let (nx, ny) = self.grid_dims();
        (self.width / nx as f64, self.height / ny as f64)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: usize,
    pub position: Point,
    /// Area of the particle's Voronoi cell clipped to the plate.
    pub cell_area: f64,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeElement {
    pub id: usize,
    pub node_a: usize,
    pub node_b: usize,
    pub length: f64,
    pub area: f64,
    /// `atan2(y_b - y_a, x_b - x_a)`
    pub orientation: f64,
    pub active: bool,
}

impl LatticeElement {
    pub fn dofs(&self) -> [usize; 4] {
        [2 * self.node_a, 2 * self.node_a + 1, 2 * self.node_b, 2 * self.node_b + 1]
    }
}

/// Result of scatter-adding element contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub stiffness: CsrMatrix,
    /// Diagonal of the lumped global mass matrix.
    pub mass: Vec<f64>,
    /// Particles that are not removed but have no active incident element.
    pub isolated: Vec<usize>,
}

/// Scatter-adds element blocks into global `2n x 2n` matrices.
///
/// Elements that are inactive, or touch a removed particle, contribute nothing.
/// `blocks` maps an element to its global stiffness and mass diagonal.
pub fn assemble_global<F>(particles: &[Particle], elements: &[LatticeElement], mut blocks: F) -> Result<Assembly>
where
    F: FnMut(&LatticeElement) -> Result<(Mat4, [f64; 4])>,
{
    let n = particles.len();
    let mut k = TripletBuilder::new(2 * n);
    let mut mass = vec![0.0; 2 * n];
    let mut degree = vec![0usize; n];
    for el in elements {
        if el.node_a >= n || el.node_b >= n || el.node_a == el.node_b {
            return Err(Error::invalid(
                "elements",
                format!("element {} references invalid particles ({}, {})", el.id, el.node_a, el.node_b),
            ));
        }
        if !el.active || particles[el.node_a].removed || particles[el.node_b].removed {
            continue;
        }
        let (ke, me) = blocks(el)?;
        let dofs = el.dofs();
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                k.push(gi, gj, ke[i][j]);
            }
            mass[gi] += me[i];
        }
        degree[el.node_a] += 1;
        degree[el.node_b] += 1;
    }
    let isolated: Vec<usize> = (0..n).filter(|&i| !particles[i].removed && degree[i] == 0).collect();
    if !isolated.is_empty() {
        log::warn!("{} isolated particle(s) excluded from the free DOF set", isolated.len());
    }
    Ok(Assembly {
        stiffness: k.build(),
        mass,
        isolated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    pub spec: PlateSpec,
    pub particles: Vec<Particle>,
    pub elements: Vec<LatticeElement>,
    /// Clipped Voronoi cell of each particle, indexed like `particles`.
    pub cells: Vec<Cell>,
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    /// `fixed[d]` is true when DOF `d` is constrained to zero.
    pub fixed: Vec<bool>,
    pub isolated: Vec<usize>,
}

/// Jittered-grid seed points for `spec`, drawn from `rng`.
pub fn jittered_grid(spec: &PlateSpec, rng: &mut impl Rng) -> Vec<Point> {
    let (nx, ny) = spec.grid_dims();
    let (px, py) = spec.pitch();
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (jx, jy) = if spec.jitter > 0.0 {
                (
                    rng.gen_range(-spec.jitter..=spec.jitter),
                    rng.gen_range(-spec.jitter..=spec.jitter),
                )
            } else {
                (0.0, 0.0)
            };
            pts.push([(i as f64 + 0.5 + jx) * px, (j as f64 + 0.5 + jy) * py]);
        }
    }
    pts
}

/// Builds a lattice for `spec` from a seeded jittered grid.
///
/// A collinear (degenerate) draw is retried with a perturbed seed; after 10
/// failures the error is returned.
pub fn generate_lattice(spec: &PlateSpec) -> Result<LatticeModel> {
    spec.validate()?;
    for attempt in 0..MAX_TRIANGULATION_ATTEMPTS {
        let seed = spec.seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = jittered_grid(spec, &mut rng);
        if attempt > 0 {
            let (px, py) = spec.pitch();
            for p in points.iter_mut() {
                p[0] = (p[0] + rng.gen_range(-1e-3..1e-3) * px).clamp(0.0, spec.width);
                p[1] = (p[1] + rng.gen_range(-1e-3..1e-3) * py).clamp(0.0, spec.height);
            }
        }
        match generate_lattice_from_points(spec, &points) {
            Err(Error::DegenerateTriangulation { .. }) => {
                log::warn!("degenerate triangulation on attempt {attempt}, retrying");
                continue;
            }
            other => return other,
        }
    }
    Err(Error::DegenerateTriangulation {
        attempts: MAX_TRIANGULATION_ATTEMPTS,
    })
}

/// Builds a lattice from explicit particle positions.
///
/// Particles below one grid pitch from the bottom edge are fixed.
pub fn generate_lattice_from_points(spec: &PlateSpec, points: &[Point]) -> Result<LatticeModel> {
    spec.validate()?;
    for p in points {
        if !(0.0..=spec.width).contains(&p[0]) || !(0.0..=spec.height).contains(&p[1]) {
            return Err(Error::invalid("points", format!("point {p:?} lies outside the plate")));
        }
    }
    let edges = delaunay_edges(points)?;
    let particles_n = points.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); particles_n];
    for &(a, b) in &edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let cells: Vec<Cell> = (0..particles_n)
        .map(|i| {
            geometry::voronoi_cell(
                points[i],
                neighbors[i].iter().map(|&j| (j, points[j])),
                spec.width,
                spec.height,
            )
        })
        .collect();
    let particles: Vec<Particle> = (0..particles_n)
        .map(|i| Particle {
            id: i,
            position: points[i],
            cell_area: cells[i].area(),
            removed: false,
        })
        .collect();
    let elements: Vec<LatticeElement> = edges
        .iter()
        .enumerate()
        .map(|(id, &(a, b))| {
            let (pa, pb) = (points[a], points[b]);
            let length = geometry::dist(pa, pb);
            let facet = 0.5
                * (cells[a].facet_length(EdgeTag::Neighbor(b)) + cells[b].facet_length(EdgeTag::Neighbor(a)));
            LatticeElement {
                id,
                node_a: a,
                node_b: b,
                length,
                area: facet.max(MIN_FACET_FRACTION * length) * spec.thickness,
                orientation: (pb[1] - pa[1]).atan2(pb[0] - pa[0]),
                active: true,
            }
        })
        .collect();
    let (_, py) = spec.pitch();
    let mut fixed = vec![false; 2 * particles_n];
    for p in &particles {
        if p.position[1] < py {
            fixed[2 * p.id] = true;
            fixed[2 * p.id + 1] = true;
        }
    }
    let mut model = LatticeModel {
        spec: spec.clone(),
        particles,
        elements,
        cells,
        stiffness: CsrMatrix::zeros(0),
        mass: Vec::new(),
        fixed,
        isolated: Vec::new(),
    };
    model.reassemble()?;
    Ok(model)
}

/// Unique Delaunay edges `(a, b)` with `a < b`, sorted.
fn delaunay_edges(points: &[Point]) -> Result<Vec<(usize, usize)>> {
    let pts: Vec<delaunator::Point> = points.iter().map(|p| delaunator::Point { x: p[0], y: p[1] }).collect();
    let tri = delaunator::triangulate(&pts);
    if tri.triangles.is_empty() {
        return Err(Error::DegenerateTriangulation { attempts: 1 });
    }
    let mut edges: Vec<(usize, usize)> = tri
        .triangles
        .chunks_exact(3)
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

impl LatticeModel {
    pub fn n_dofs(&self) -> usize {
        2 * self.particles.len()
    }

    /// Element stiffness and mass blocks from the plate material.
    pub fn element_blocks(&self, el: &LatticeElement) -> Result<(Mat4, [f64; 4])> {
        Ok((
            element_stiffness(self.spec.youngs_modulus, el.area, el.length, el.orientation)?,
            element_mass(self.spec.density, el.area, el.length)?,
        ))
    }

    /// Recomputes `stiffness`, `mass` and `isolated` from the current
    /// particle and element state.
    pub fn reassemble(&mut self) -> Result<()> {
        let (e, rho) = (self.spec.youngs_modulus, self.spec.density);
        let assembly = assemble_global(&self.particles, &self.elements, |el| {
            Ok((
                element_stiffness(e, el.area, el.length, el.orientation)?,
                element_mass(rho, el.area, el.length)?,
            ))
        })?;
        self.stiffness = assembly.stiffness;
        self.mass = assembly.mass;
        self.isolated = assembly.isolated;
        Ok(())
    }

    /// DOFs that take part in the solution: not fixed, not belonging to a
    /// removed or isolated particle.
    pub fn free_dofs(&self) -> Vec<usize> {
        let mut excluded = vec![false; self.n_dofs()];
        for p in &self.particles {
            if p.removed {
                excluded[2 * p.id] = true;
                excluded[2 * p.id + 1] = true;
            }
        }
        for &i in &self.isolated {
            excluded[2 * i] = true;
            excluded[2 * i + 1] = true;
        }
        (0..self.n_dofs()).filter(|&d| !self.fixed[d] && !excluded[d]).collect()
    }

    pub fn fixed_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs()).filter(|&d| self.fixed[d]).collect()
    }

    pub fn mass_matrix(&self) -> CsrMatrix {
        CsrMatrix::from_diagonal(&self.mass)
    }

    /// Σ ρ·A·L over active elements.
    pub fn element_mass_total(&self) -> f64 {
        self.active_elements().map(|e| self.spec.density * e.area * e.length).sum()
    }

    pub fn active_elements(&self) -> impl Iterator<Item = &LatticeElement> {
        self.elements
            .iter()
            .filter(|e| e.active && !self.particles[e.node_a].removed && !self.particles[e.node_b].removed)
    }

    /// Marks particles removed and deactivates their incident elements; does
    /// not reassemble.
    pub fn remove_particles(&mut self, ids: &[usize]) {
        for &i in ids {
            self.particles[i].removed = true;
        }
        for el in self.elements.iter_mut() {
            if self.particles[el.node_a].removed || self.particles[el.node_b].removed {
                el.active = false;
            }
        }
    }

    /// Index of the non-removed particle closest to `p` (lowest id on ties).
    pub fn nearest_particle(&self, p: Point) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for q in self.particles.iter().filter(|q| !q.removed) {
            let d = geometry::dist(p, q.position);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, q.id));
            }
        }
        best.map(|(_, i)| i)
    }

    /// Non-removed particles that cannot reach a fixed particle through
    /// active elements.
    pub fn floating_particles(&self) -> Vec<usize> {
        let n = self.particles.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in self.active_elements() {
            adj[el.node_a].push(el.node_b);
            adj[el.node_b].push(el.node_a);
        }
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for p in &self.particles {
            if !p.removed && (self.fixed[2 * p.id] || self.fixed[2 * p.id + 1]) {
                seen[p.id] = true;
                queue.push_back(p.id);
            }
        }
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        self.particles.iter().filter(|p| !p.removed && !seen[p.id]).map(|p| p.id).collect()
    }
}
