//! Parametric straight cracks: sampling, clipping to the plate, removal of the
//! particles they cut, and ground-truth label images.

pub mod label;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::geometry::{cross, dist, sub, Point};
use crate::lattice::{LatticeModel, PlateSpec};
pub use label::{cell_map, coverage, downsample_label, rasterize_label, LabelImage, COARSE_RESOLUTION, FINE_RESOLUTION};

/// A line crack of `length` metres leaving `start` at `angle_deg` degrees,
/// measured counterclockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crack {
    pub length: f64,
    pub angle_deg: f64,
    pub start: Point,
}

/// Closed segment between two points inside the plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrackSegment {
    pub a: Point,
    pub b: Point,
}

impl CrackSegment {
    pub fn length(&self) -> f64 {
        dist(self.a, self.b)
    }
}

impl Crack {
    /// Unclipped far end, `start + l·(cos α, sin α)`.
    pub fn end(&self) -> Point {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        [self.start[0] + self.length * c, self.start[1] + self.length * s]
    }

    pub fn max_length(plate: &PlateSpec) -> f64 {
        0.5 * plate.width.min(plate.height)
    }

    /// Checks the parameter ranges for a plate with receiver spacing `spacing`.
    pub fn validate(&self, plate: &PlateSpec, spacing: [f64; 2]) -> Result<()> {
        let lmax = Self::max_length(plate);
        if !(self.length > 0.0 && self.length <= lmax) {
            return Err(Error::invalid("crack.length", format!("{} outside (0, {lmax}]", self.length)));
        }
        if !(0.0..=360.0).contains(&self.angle_deg) {
            return Err(Error::invalid("crack.angle_deg", format!("{} outside [0, 360]", self.angle_deg)));
        }
        let (w, h) = (plate.width, plate.height);
        let [x, y] = self.start;
        if !(spacing[0]..=w - spacing[0]).contains(&x) || !(spacing[1]..=h - spacing[1]).contains(&y) {
            return Err(Error::invalid("crack.start", format!("({x}, {y}) outside the receiver-inset rectangle")));
        }
        Ok(())
    }
}

fn check_spacing(plate: &PlateSpec, spacing: [f64; 2]) -> Result<()> {
    if !(spacing[0] > 0.0 && spacing[0] < plate.width / 2.0 && spacing[1] > 0.0 && spacing[1] < plate.height / 2.0) {
        return Err(Error::invalid(
            "receiver_spacing",
            format!("({}, {}) must be positive and below half the plate size", spacing[0], spacing[1]),
        ));
    }
    Ok(())
}

/// Draws each crack parameter uniformly over its range.
///
/// Length is drawn as `l_max·(1 - u)` with `u ∈ [0, 1)` so that zero is never produced.
pub fn sample_crack(rng: &mut impl Rng, plate: &PlateSpec, spacing: [f64; 2]) -> Result<Crack> {
    check_spacing(plate, spacing)?;
    let lmax = Crack::max_length(plate);
    let length = lmax * (1.0 - rng.gen::<f64>());
    let angle_deg = 360.0 * rng.gen::<f64>();
    let x = spacing[0] + (plate.width - 2.0 * spacing[0]) * rng.gen::<f64>();
    let y = spacing[1] + (plate.height - 2.0 * spacing[1]) * rng.gen::<f64>();
    Ok(Crack {
        length,
        angle_deg,
        start: [x, y],
    })
}

/// Intersects the crack with the plate rectangle (Liang-Barsky).
pub fn clip_crack(crack: &Crack, plate: &PlateSpec) -> CrackSegment {
    let p = crack.start;
    let q = crack.end();
    let d = [q[0] - p[0], q[1] - p[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let bounds = [
        (-d[0], p[0]),
        (d[0], plate.width - p[0]),
        (-d[1], p[1]),
        (d[1], plate.height - p[1]),
    ];
    for (pk, qk) in bounds {
        if pk == 0.0 {
            continue;
        }
        let t = qk / pk;
        if pk < 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
    }
    let at = |t: f64| -> Point {
        [
            (p[0] + t * d[0]).clamp(0.0, plate.width),
            (p[1] + t * d[1]).clamp(0.0, plate.height),
        ]
    };
    CrackSegment { a: at(t0), b: at(t1.max(t0)) }
}

/// Particles whose Voronoi cell meets the segment. A degenerate segment
/// selects only the particle nearest to it.
pub fn crack_particles(model: &LatticeModel, seg: &CrackSegment) -> Vec<usize> {
    if seg.length() == 0.0 {
        return model.nearest_particle(seg.a).into_iter().collect();
    }
    model
        .particles
        .iter()
        .filter(|p| !p.removed && model.cells[p.id].intersects_segment(seg.a, seg.b, 0.0))
        .map(|p| p.id)
        .collect()
}

/// Ids of elements whose bond segment crosses the crack, sorted.
///
/// Voronoi removal alone leaves these intact when the bond is not a Gabriel
/// edge, since such a bond passes through a third particle's cell.
pub fn crossing_elements(model: &LatticeModel, seg: &CrackSegment) -> Vec<usize> {
    if seg.length() == 0.0 {
        return Vec::new();
    }
    model
        .elements
        .iter()
        .filter(|e| {
            let (p, q) = (model.particles[e.node_a].position, model.particles[e.node_b].position);
            segments_intersect(seg.a, seg.b, p, q)
        })
        .map(|e| e.id)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| cross(sub(q, p), sub(r, p));
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0 && (d1 != 0.0 || d2 != 0.0)
}

/// Copy of `model` with the cracked particles removed, every bond across the
/// crack cut, and K, M reassembled.
///
/// Removed particles take their element mass with them.
pub fn apply_crack(model: &LatticeModel, seg: &CrackSegment) -> Result<LatticeModel> {
    let removed = crack_particles(model, seg);
    let mut out = model.clone();
    out.remove_particles(&removed);
    let cut = crossing_elements(model, seg);
    for el in out.elements.iter_mut().filter(|e| cut.binary_search(&e.id).is_ok()) {
        el.active = false;
    }
    out.reassemble()?;
    let floating = out.floating_particles();
    if !floating.is_empty() {
        return Err(Error::FloatingComponent {
            particles: floating.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::generate_lattice;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn plate() -> PlateSpec {
        PlateSpec::dataset_default()
    }

    #[test]
    fn samples_respect_paper_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let c = sample_crack(&mut rng, &plate(), [0.001, 0.001]).unwrap();
            assert!(c.length > 0.0 && c.length <= 0.005);
            assert!((0.001..=0.009).contains(&c.start[0]) && (0.001..=0.009).contains(&c.start[1]));
            c.validate(&plate(), [0.001, 0.001]).unwrap();
        }
    }

    #[test]
    fn spacing_must_leave_room() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_crack(&mut rng, &plate(), [0.005, 0.001]).is_err());
        assert!(sample_crack(&mut rng, &plate(), [0.0, 0.001]).is_err());
    }

    #[test]
    fn same_seed_same_crack() {
        let a = sample_crack(&mut ChaCha8Rng::seed_from_u64(9), &plate(), [0.001, 0.001]).unwrap();
        let b = sample_crack(&mut ChaCha8Rng::seed_from_u64(9), &plate(), [0.001, 0.001]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn marginals_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let bins = 20;
        let ranges = [(0.0, 0.005), (0.0, 360.0), (0.001, 0.009), (0.001, 0.009)];
        let mut counts = vec![[0usize; 20]; 4];
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        for _ in 0..n {
            let c = sample_crack(&mut rng, &plate(), [0.001, 0.001]).unwrap();
            let vals = [c.length, c.angle_deg, c.start[0], c.start[1]];
            for k in 0..4 {
                let (a, b) = ranges[k];
                let bin = (((vals[k] - a) / (b - a)) * bins as f64).floor() as usize;
                counts[k][bin.min(bins - 1)] += 1;
                lo[k] = lo[k].min(vals[k]);
                hi[k] = hi[k].max(vals[k]);
            }
        }
        let expected = n as f64 / bins as f64;
        let chi = ChiSquared::new((bins - 1) as f64).unwrap();
        for k in 0..4 {
            let stat: f64 = counts[k].iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            let p = 1.0 - chi.cdf(stat);
            assert!(p > 0.01, "parameter {k}: chi2 {stat}, p {p}");
            let (a, b) = ranges[k];
            assert!((lo[k] - a).abs() < 0.01 * (b - a) && (hi[k] - b).abs() < 0.01 * (b - a));
        }
    }

    #[test]
    fn clip_discards_the_excess() {
        let c = Crack {
            length: 0.005,
            angle_deg: 0.0,
            start: [0.009, 0.005],
        };
        let s = clip_crack(&c, &plate());
        assert_eq!(s.a, [0.009, 0.005]);
        assert!((s.b[0] - 0.01).abs() < 1e-15 && (s.b[1] - 0.005).abs() < 1e-15);
        assert!((s.length() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn clip_keeps_interior_crack() {
        let c = Crack {
            length: 0.002,
            angle_deg: 30.0,
            start: [0.004, 0.004],
        };
        let s = clip_crack(&c, &plate());
        assert_eq!(s.a, c.start);
        assert_eq!(s.b, c.end());
    }

    #[test]
    fn clip_at_180_mirrors_0() {
        let c0 = Crack {
            length: 0.003,
            angle_deg: 0.0,
            start: [0.005, 0.005],
        };
        let c180 = Crack { angle_deg: 180.0, ..c0 };
        let (s0, s1) = (clip_crack(&c0, &plate()), clip_crack(&c180, &plate()));
        assert!((s0.b[0] - 0.005 + (s1.b[0] - 0.005)).abs() < 1e-15);
        assert!((s0.b[1] - s1.b[1]).abs() < 1e-15);
    }

    #[test]
    fn clip_through_corner_region() {
        let c = Crack {
            length: 0.005,
            angle_deg: 45.0,
            start: [0.008, 0.009],
        };
        let s = clip_crack(&c, &plate());
        // the top edge is reached first
        assert!((s.b[1] - 0.01).abs() < 1e-15 && (s.b[0] - 0.009).abs() < 1e-12);
    }

    fn small_model() -> LatticeModel {
        generate_lattice(&PlateSpec {
            n_particles: 400,
            seed: 3,
            ..plate()
        })
        .unwrap()
    }

    #[test]
    fn point_crack_removes_at_most_one() {
        let m = small_model();
        let seg = CrackSegment {
            a: [0.005, 0.005],
            b: [0.005, 0.005],
        };
        let cracked = apply_crack(&m, &seg).unwrap();
        assert_eq!(cracked.particles.iter().filter(|p| p.removed).count(), 1);
    }

    #[test]
    fn removed_particle_rows_are_zero() {
        let m = small_model();
        let seg = CrackSegment {
            a: [0.003, 0.006],
            b: [0.006, 0.006],
        };
        let cracked = apply_crack(&m, &seg).unwrap();
        let removed: Vec<usize> = cracked.particles.iter().filter(|p| p.removed).map(|p| p.id).collect();
        assert!(removed.len() >= 3);
        for &i in &removed {
            for d in [2 * i, 2 * i + 1] {
                assert!(cracked.stiffness.row(d).all(|(_, v)| v == 0.0));
                for r in 0..cracked.n_dofs() {
                    assert_eq!(cracked.stiffness.get(r, d), 0.0);
                }
                assert_eq!(cracked.mass[d], 0.0);
            }
        }
        assert!(cracked.stiffness.structural_nonzeros() < m.stiffness.structural_nonzeros());
        assert!(!cracked.free_dofs().iter().any(|d| removed.contains(&(d / 2))));
    }

    #[test]
    fn cut_off_corner_is_floating() {
        let m = small_model();
        let seg = CrackSegment {
            a: [0.0, 0.007],
            b: [0.003, 0.01],
        };
        assert!(matches!(apply_crack(&m, &seg), Err(Error::FloatingComponent { .. })));
    }
}
