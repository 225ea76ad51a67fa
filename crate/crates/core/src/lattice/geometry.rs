//! Planar geometry helpers: clipped Voronoi cells and segment tests.

pub type Point = [f64; 2];

/// Edge tag of a clipped cell: either a plate side or the bisector with a neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Boundary,
    Neighbor(usize),
}

/// Convex polygon, counterclockwise; `tags[k]` labels the edge `v[k] -> v[k+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: Vec<Point>,
    pub tags: Vec<EdgeTag>,
}

impl Cell {
    pub fn rectangle(width: f64, height: f64) -> Self {
        Cell {
            vertices: vec![[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]],
            tags: vec![EdgeTag::Boundary; 4],
        }
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let twice: f64 = (0..n)
            .map(|k| {
                let a = self.vertices[k];
                let b = self.vertices[(k + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        0.5 * twice.abs()
    }

    /// Keeps the part where `dot(normal, p) <= offset`; new edges carry `tag`.
    pub fn clip(&self, normal: Point, offset: f64, tag: EdgeTag) -> Cell {
        let n = self.vertices.len();
        let side = |p: &Point| normal[0] * p[0] + normal[1] * p[1] - offset;
        let scale = (normal[0].abs() + normal[1].abs()).max(f64::MIN_POSITIVE);
        let eps = 1e-14 * scale * (1.0 + offset.abs() / scale);
        let mut vertices = Vec::with_capacity(n + 1);
        let mut tags = Vec::with_capacity(n + 1);
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let (sa, sb) = (side(&a), side(&b));
            let a_in = sa <= eps;
            let b_in = sb <= eps;
            match (a_in, b_in) {
                (true, true) => {
                    vertices.push(a);
                    tags.push(self.tags[k]);
                }
                (true, false) => {
                    vertices.push(a);
                    tags.push(self.tags[k]);
                    let t = sa / (sa - sb);
                    vertices.push(lerp(a, b, t));
                    tags.push(tag);
                }
                (false, true) => {
                    let t = sa / (sa - sb);
                    vertices.push(lerp(a, b, t));
                    tags.push(self.tags[k]);
                }
                (false, false) => {}
            }
        }
        let mut cell = Cell { vertices, tags };
        cell.drop_tiny_edges(1e-15 * scale.max(1.0));
        cell
    }

    fn drop_tiny_edges(&mut self, tol: f64) {
        let mut k = 0;
        while self.vertices.len() > 1 && k < self.vertices.len() {
            let next = (k + 1) % self.vertices.len();
            if dist(self.vertices[k], self.vertices[next]) <= tol {
                // the edge k -> next vanishes; the surviving edge out of k is next's
                self.tags[k] = self.tags[next];
                self.vertices.remove(next);
                self.tags.remove(next);
                if next < k {
                    k -= 1;
                }
            } else {
                k += 1;
            }
        }
    }

    /// Total length of edges carrying `tag`.
    pub fn facet_length(&self, tag: EdgeTag) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .filter(|&k| self.tags[k] == tag)
            .map(|k| dist(self.vertices[k], self.vertices[(k + 1) % n]))
            .sum()
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let len = dist(a, b).max(f64::MIN_POSITIVE);
            cross(sub(b, a), sub(p, a)) / len >= -tol
        })
    }

    /// Cyrus-Beck test: does segment `p -> q` meet the (closed) cell?
    pub fn intersects_segment(&self, p: Point, q: Point, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let d = sub(q, p);
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let e = sub(b, a);
            let len = norm(e).max(f64::MIN_POSITIVE);
            // signed distance of p to the edge line, positive inside (ccw)
            let num = cross(e, sub(p, a)) / len + tol;
            let den = cross(e, d) / len;
            if den.abs() < 1e-300 {
                if num < 0.0 {
                    return false;
                }
                continue;
            }
            let t = -num / den;
            if den > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Voronoi cell of `site` restricted to `[0,width]x[0,height]`, built by
/// clipping the rectangle with the bisector of each neighbor.
pub fn voronoi_cell(
    site: Point,
    neighbors: impl IntoIterator<Item = (usize, Point)>,
    width: f64,
    height: f64,
) -> Cell {
    let mut cell = Cell::rectangle(width, height);
    for (id, other) in neighbors {
        let normal = sub(other, site);
        let mid = lerp(site, other, 0.5);
        let offset = normal[0] * mid[0] + normal[1] * mid[1];
        cell = cell.clip(normal, offset, EdgeTag::Neighbor(id));
        if cell.vertices.is_empty() {
            break;
        }
    }
    cell
}

/// Distance from `p` to segment `a -> b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = sub(b, a);
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2;
    dist(p, lerp(a, b, t.clamp(0.0, 1.0)))
}
