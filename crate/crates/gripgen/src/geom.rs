//! Planar polygon primitives used by palm construction and pad placement.
//!
//! Polygons are counter-clockwise, simple, in millimeters. Boolean union is
//! delegated to the `geo` crate; the predicates here (simplicity,
//! containment, area) are implemented directly and double as test oracles
//! for the union-based outline pipeline.

use nalgebra::{Point2, Vector2};

use crate::{Error, Result};

/// Simple CCW polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<Point2<f64>>,
}

impl Polygon2D {
    /// Builds a polygon, enforcing >= 3 vertices, simplicity, and CCW
    /// orientation (CW input is rejected, not silently reversed).
    pub fn new(vertices: Vec<Point2<f64>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
        }
        let poly = Polygon2D { vertices };
        if poly.signed_area() <= 0.0 {
            return Err(Error::Geometry("polygon must be counter-clockwise".into()));
        }
        if !poly.is_simple() {
            return Err(Error::Geometry("polygon is self-intersecting".into()));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle spanning `a`..`b` along the segment direction
    /// with the given total width.
    pub fn rectangle_between(a: Point2<f64>, b: Point2<f64>, width: f64) -> Result<Self> {
        let axis = b - a;
        let len = axis.norm();
        if len < 1e-9 || width <= 0.0 {
            return Err(Error::Geometry("degenerate rectangle".into()));
        }
        let u = axis / len;
        let n = Vector2::new(-u.y, u.x) * (width / 2.0);
        Polygon2D::new(vec![a - n, b - n, b + n, a + n])
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a.x * b.y - b.x * a.y;
        }
        s / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n).map(|i| (self.vertices[(i + 1) % n] - self.vertices[i]).norm()).sum()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2<f64> {
        let n = self.vertices.len();
        let a = self.signed_area();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// O(n^2) segment-pair check; adjacent edges may share endpoints only.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
            if (a2 - a1).norm() < 1e-12 {
                return false;
            }
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if adjacent {
                    continue;
                }
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    /// Point containment; points within `tol` of the boundary count as
    /// inside.
    pub fn contains(&self, p: Point2<f64>, tol: f64) -> bool {
        if self.distance_to_boundary(p) <= tol {
            return true;
        }
        // Crossing-number test.
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn distance_to_boundary(&self, p: Point2<f64>) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Point, unit tangent, and outward unit normal at normalized perimeter
    /// position `t` in [0, 1).
    pub fn point_at_arc(&self, t: f64) -> (Point2<f64>, Vector2<f64>, Vector2<f64>) {
        let t = t.rem_euclid(1.0);
        let total = self.perimeter();
        let mut remaining = t * total;
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let len = (b - a).norm();
            if remaining <= len || i == n - 1 {
                let u = (b - a) / len;
                let p = a + u * remaining.min(len);
                // CCW polygon: outward normal is the tangent rotated -90 deg.
                let normal = Vector2::new(u.y, -u.x);
                return (p, u, normal);
            }
            remaining -= len;
        }
        unreachable!()
    }

    /// Distance from `origin` to the boundary along unit direction `dir`
    /// (first positive ray hit). Returns 0 when the ray never hits, which
    /// cannot happen for interior origins.
    pub fn ray_distance(&self, origin: Point2<f64>, dir: Vector2<f64>) -> f64 {
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if let Some(t) = ray_segment_hit(origin, dir, a, b) {
                if t > 1e-12 {
                    best = best.min(t);
                }
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }

    /// Removes collinear vertices and collapses edges shorter than
    /// `min_edge`.
    pub fn pruned(&self, min_edge: f64) -> Result<Polygon2D> {
        let mut verts = self.vertices.clone();
        // Collapse short edges first, then drop collinear vertices.
        loop {
            let n = verts.len();
            if n <= 3 {
                break;
            }
            let mut idx = None;
            for i in 0..n {
                if (verts[(i + 1) % n] - verts[i]).norm() < min_edge {
                    idx = Some(i);
                    break;
                }
            }
            match idx {
                Some(i) => {
                    let j = (i + 1) % n;
                    let mid = Point2::from((verts[i].coords + verts[j].coords) / 2.0);
                    verts[i] = mid;
                    verts.remove(j);
                }
                None => break,
            }
        }
        loop {
            let n = verts.len();
            if n <= 3 {
                break;
            }
            let mut idx = None;
            for i in 0..n {
                let prev = verts[(i + n - 1) % n];
                let cur = verts[i];
                let next = verts[(i + 1) % n];
                let cross = (cur - prev).perp(&(next - cur));
                let scale = (cur - prev).norm() * (next - cur).norm();
                if cross.abs() <= 1e-9 * scale.max(1.0) {
                    idx = Some(i);
                    break;
                }
            }
            match idx {
                Some(i) => {
                    verts.remove(i);
                }
                None => break,
            }
        }
        Polygon2D::new(verts)
    }

    fn to_geo(&self) -> geo::Polygon<f64> {
        let coords: Vec<geo::Coord<f64>> =
            self.vertices.iter().map(|p| geo::Coord { x: p.x, y: p.y }).collect();
        geo::Polygon::new(geo::LineString::from(coords), vec![])
    }

    fn from_geo(poly: &geo::Polygon<f64>) -> Result<Polygon2D> {
        let mut verts: Vec<Point2<f64>> =
            poly.exterior().coords().map(|c| Point2::new(c.x, c.y)).collect();
        // geo closes rings: last == first. Union output can also repeat a
        // vertex mid-ring (e.g. -0.0 vs 0.0 coordinates), which would leave
        // a zero-length edge; collapse consecutive near-duplicates.
        if verts.len() > 1 {
            let first = verts[0];
            if (verts[verts.len() - 1] - first).norm() < 1e-12 {
                verts.pop();
            }
        }
        let mut dedup: Vec<Point2<f64>> = Vec::with_capacity(verts.len());
        for v in verts {
            if dedup.last().is_none_or(|p| (v - *p).norm() >= 1e-9) {
                dedup.push(v);
            }
        }
        while dedup.len() > 1 && (dedup[dedup.len() - 1] - dedup[0]).norm() < 1e-9 {
            dedup.pop();
        }
        let verts = dedup;
        let mut poly2 = Polygon2D { vertices: verts };
        if poly2.signed_area() < 0.0 {
            poly2.vertices.reverse();
        }
        Polygon2D::new(poly2.vertices)
    }

    /// Boolean union of `self` with each of `others`. Fails when the result
    /// is disconnected.
    pub fn union_all(&self, others: &[Polygon2D]) -> Result<Polygon2D> {
        use geo::BooleanOps;
        let mut acc = geo::MultiPolygon::new(vec![self.to_geo()]);
        for other in others {
            acc = acc.union(&geo::MultiPolygon::new(vec![other.to_geo()]));
        }
        if acc.0.len() != 1 {
            return Err(Error::Infeasible(format!(
                "outline union produced {} components",
                acc.0.len()
            )));
        }
        Polygon2D::from_geo(&acc.0[0])
    }
}

fn cross(o: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    (a - o).perp(&(b - o))
}

/// Proper or touching intersection of two closed segments.
fn segments_intersect(
    a1: Point2<f64>,
    a2: Point2<f64>,
    b1: Point2<f64>,
    b2: Point2<f64>,
) -> bool {
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |d: f64, p: Point2<f64>, s1: Point2<f64>, s2: Point2<f64>| {
        d == 0.0
            && p.x >= s1.x.min(s2.x)
            && p.x <= s1.x.max(s2.x)
            && p.y >= s1.y.min(s2.y)
            && p.y <= s1.y.max(s2.y)
    };
    on(d1, a1, b1, b2) || on(d2, a2, b1, b2) || on(d3, b1, a1, a2) || on(d4, b2, a1, a2)
}

fn point_segment_distance(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom < 1e-18 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / denom).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn ray_segment_hit(
    origin: Point2<f64>,
    dir: Vector2<f64>,
    a: Point2<f64>,
    b: Point2<f64>,
) -> Option<f64> {
    let seg = b - a;
    let denom = dir.perp(&seg);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = a - origin;
    let t = ao.perp(&seg) / denom;
    let u = ao.perp(&dir) / denom;
    if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
        Some(t)
    } else {
        None
    }
}
