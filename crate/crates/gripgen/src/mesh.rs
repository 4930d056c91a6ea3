//! Triangle-mesh primitives: ear-clip triangulation, prism extrusion,
//! watertightness and convexity checks, exact polyhedral mass properties,
//! and a small incremental 3-D convex hull.
//!
//! All meshes are in millimeters and f64 in-process; the STL layer narrows
//! to f32 at the format boundary.

use nalgebra::{Isometry3, Matrix3, Point2, Point3, Vector3};

use crate::geom::Polygon2D;
use crate::{Error, Result};

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

/// Mass, center of mass, and inertia tensor about the center of mass.
///
/// Units: kg, mm, kg*mm^2.
#[derive(Debug, Clone)]
pub struct MassProps {
    pub mass: f64,
    pub com: Point3<f64>,
    pub inertia: Matrix3<f64>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len() as u32;
        for t in &triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Mesh("triangle index out of range".into()));
            }
            let [a, b, c] = [vertices[t[0] as usize], vertices[t[1] as usize], vertices[t[2] as usize]];
            if (b - a).cross(&(c - a)).norm() < 1e-12 {
                return Err(Error::Mesh("degenerate triangle".into()));
            }
        }
        Ok(TriMesh { vertices, triangles })
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|p| iso * p).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Componentwise scaling about the origin. Mirrors (negative factors)
    /// are rejected since they would flip orientation.
    pub fn scaled(&self, sx: f64, sy: f64, sz: f64) -> Result<TriMesh> {
        if sx <= 0.0 || sy <= 0.0 || sz <= 0.0 {
            return Err(Error::Mesh("scale factors must be positive".into()));
        }
        Ok(TriMesh {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point3::new(p.x * sx, p.y * sy, p.z * sz))
                .collect(),
            triangles: self.triangles.clone(),
        })
    }

    pub fn tri_points(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Signed volume via the divergence theorem; positive for outward
    /// orientation.
    pub fn signed_volume(&self) -> f64 {
        let mut v = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.tri_points(t);
            v += a.coords.dot(&b.coords.cross(&c.coords)) / 6.0;
        }
        v
    }

    /// True iff every edge is shared by exactly two triangles with opposite
    /// winding and the mesh is edge-connected.
    pub fn watertight_check(&self) -> bool {
        use std::collections::HashMap;
        if self.triangles.is_empty() {
            return false;
        }
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 || directed.get(&(b, a)) != Some(&1) {
                return false;
            }
        }
        // Connectivity over shared edges.
        let mut edge_to_tris: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_to_tris.entry(key).or_default().push(i);
            }
        }
        let mut seen = vec![false; self.triangles.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut tri_edges: Vec<Vec<usize>> = vec![Vec::new(); self.triangles.len()];
        for tris in edge_to_tris.values() {
            for &i in tris {
                for &j in tris {
                    if i != j {
                        tri_edges[i].push(j);
                    }
                }
            }
        }
        while let Some(i) = stack.pop() {
            for &j in &tri_edges[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Exact polyhedral mass properties by signed-tetrahedron integration.
    pub fn mass_props(&self, density: f64) -> Result<MassProps> {
        if !self.watertight_check() {
            return Err(Error::Mesh("mass_props requires a watertight mesh".into()));
        }
        // Canonical tetrahedron second-moment matrix.
        let c_can = Matrix3::new(
            1.0 / 60.0, 1.0 / 120.0, 1.0 / 120.0,
            1.0 / 120.0, 1.0 / 60.0, 1.0 / 120.0,
            1.0 / 120.0, 1.0 / 120.0, 1.0 / 60.0,
        );
        let mut volume = 0.0;
        let mut first = Vector3::zeros();
        let mut cov = Matrix3::zeros();
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.tri_points(t);
            let m = Matrix3::from_columns(&[a.coords, b.coords, c.coords]);
            let det = m.determinant();
            volume += det / 6.0;
            first += det * (a.coords + b.coords + c.coords) / 24.0;
            cov += det * m * c_can * m.transpose();
        }
        let mass = density * volume;
        if mass <= 0.0 {
            return Err(Error::Mesh(format!("non-positive mass {mass} (inverted mesh?)")));
        }
        let com = Point3::from(first / volume);
        let cov = cov * density;
        let inertia_origin = Matrix3::identity() * cov.trace() - cov;
        let d = com.coords;
        let inertia =
            inertia_origin - mass * (Matrix3::identity() * d.norm_squared() - d * d.transpose());
        Ok(MassProps { mass, com, inertia })
    }

    pub fn aabb(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Maximum distance of any vertex outside any face plane; <= tol for a
    /// convex outward-oriented mesh.
    pub fn convexity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.tri_points(t);
            let n = (b - a).cross(&(c - a));
            let norm = n.norm();
            if norm < 1e-15 {
                continue;
            }
            let n = n / norm;
            for p in &self.vertices {
                worst = worst.max(n.dot(&(p - a)));
            }
        }
        worst
    }
}

/// Convex, watertight, outward-oriented mesh piece.
#[derive(Debug, Clone)]
pub struct ConvexPiece(TriMesh);

impl ConvexPiece {
    pub const HULL_TOLERANCE: f64 = 1e-6;

    pub fn new(mesh: TriMesh) -> Result<Self> {
        if !mesh.watertight_check() {
            return Err(Error::Mesh("convex piece must be watertight".into()));
        }
        if mesh.signed_volume() <= 0.0 {
            return Err(Error::Mesh("convex piece must be outward-oriented".into()));
        }
        let defect = mesh.convexity_defect();
        if defect > Self::HULL_TOLERANCE {
            return Err(Error::Mesh(format!("convexity defect {defect} exceeds tolerance")));
        }
        Ok(ConvexPiece(mesh))
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.0
    }

    pub fn into_mesh(self) -> TriMesh {
        self.0
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> ConvexPiece {
        ConvexPiece(self.0.transformed(iso))
    }
}

/// Ear-clip triangulation of an index loop over `points`. The loop may be
/// weakly simple (bridged holes repeat vertices). Returns index triples
/// into `points`.
pub fn ear_clip_indexed(points: &[Point2<f64>], mut ring: Vec<usize>) -> Result<Vec<[usize; 3]>> {
    let signed_area = |ring: &[usize]| -> f64 {
        let n = ring.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = points[ring[i]];
            let b = points[ring[(i + 1) % n]];
            s += a.x * b.y - b.x * a.y;
        }
        s / 2.0
    };
    if signed_area(&ring) <= 0.0 {
        return Err(Error::Mesh("ear clipping requires a CCW loop".into()));
    }
    let cross =
        |o: Point2<f64>, a: Point2<f64>, b: Point2<f64>| (a - o).perp(&(b - o));
    let point_in_tri = |p: Point2<f64>, a: Point2<f64>, b: Point2<f64>, c: Point2<f64>| -> bool {
        let d1 = cross(a, b, p);
        let d2 = cross(b, c, p);
        let d3 = cross(c, a, p);
        d1 > 0.0 && d2 > 0.0 && d3 > 0.0
    };
    let mut tris = Vec::with_capacity(ring.len().saturating_sub(2));
    let mut guard = 0usize;
    while ring.len() > 3 {
        let n = ring.len();
        let mut clipped = false;
        for i in 0..n {
            let ia = ring[(i + n - 1) % n];
            let ib = ring[i];
            let ic = ring[(i + 1) % n];
            let (a, b, c) = (points[ia], points[ib], points[ic]);
            let conv = cross(a, b, c);
            if conv <= 1e-12 {
                continue;
            }
            // No other loop vertex strictly inside the candidate ear.
            let mut blocked = false;
            for (j, &iv) in ring.iter().enumerate() {
                if j == (i + n - 1) % n || j == i || j == (i + 1) % n {
                    continue;
                }
                if iv == ia || iv == ib || iv == ic {
                    continue;
                }
                if point_in_tri(points[iv], a, b, c) {
                    blocked = true;
                    break;
                }
            }
            if blocked {
                continue;
            }
            tris.push([ia, ib, ic]);
            ring.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            // Fall back: clip the most convex vertex even if imperfect.
            let n = ring.len();
            let mut best = (f64::NEG_INFINITY, 0usize);
            for i in 0..n {
                let a = points[ring[(i + n - 1) % n]];
                let b = points[ring[i]];
                let c = points[ring[(i + 1) % n]];
                let conv = cross(a, b, c);
                if conv > best.0 {
                    best = (conv, i);
                }
            }
            if best.0 <= 0.0 {
                return Err(Error::Mesh("ear clipping failed on degenerate loop".into()));
            }
            let i = best.1;
            tris.push([ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]]);
            ring.remove(i);
        }
        guard += 1;
        if guard > 100_000 {
            return Err(Error::Mesh("ear clipping did not terminate".into()));
        }
    }
    tris.push([ring[0], ring[1], ring[2]]);
    Ok(tris)
}

/// Triangulates a simple CCW polygon; returns n-2 triangles.
pub fn ear_clip(poly: &Polygon2D) -> Result<Vec<[usize; 3]>> {
    let ring: Vec<usize> = (0..poly.len()).collect();
    ear_clip_indexed(poly.vertices(), ring)
}

/// Triangulates the annulus between an outer CCW ring and an inner CCW
/// ring (the hole) with a constrained Delaunay triangulation, so every
/// input vertex (including collinear ones) appears in the output and both
/// rings are preserved edge-for-edge. Point list is `outer ++ hole`;
/// triangle indices refer to it and wind CCW.
pub fn ear_clip_with_hole(
    outer: &[Point2<f64>],
    hole: &[Point2<f64>],
) -> Result<Vec<[usize; 3]>> {
    use spade::{ConstrainedDelaunayTriangulation, Point2 as SpadePoint, Triangulation};
    if outer.len() < 3 || hole.len() < 3 {
        return Err(Error::Mesh("annulus rings need at least 3 vertices".into()));
    }
    let mut cdt = ConstrainedDelaunayTriangulation::<SpadePoint<f64>>::new();
    let mut handles = Vec::with_capacity(outer.len() + hole.len());
    for p in outer.iter().chain(hole) {
        let h = cdt
            .insert(SpadePoint::new(p.x, p.y))
            .map_err(|e| Error::Mesh(format!("annulus vertex rejected: {e}")))?;
        handles.push(h);
    }
    if cdt.num_vertices() != handles.len() {
        return Err(Error::Mesh("annulus rings contain duplicate vertices".into()));
    }
    let n_out = outer.len();
    for i in 0..n_out {
        cdt.add_constraint(handles[i], handles[(i + 1) % n_out]);
    }
    for i in 0..hole.len() {
        cdt.add_constraint(handles[n_out + i], handles[n_out + (i + 1) % hole.len()]);
    }
    let index_of: std::collections::HashMap<_, usize> =
        handles.iter().enumerate().map(|(i, h)| (*h, i)).collect();
    // Even-odd containment for triangle centroids; constraint edges
    // guarantee no face straddles a ring, so centroids classify faces.
    let in_ring = |ring: &[Point2<f64>], p: Point2<f64>| -> bool {
        let mut inside = false;
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            if (a.y > p.y) != (b.y > p.y) {
                let t = (p.y - a.y) / (b.y - a.y);
                if p.x < a.x + t * (b.x - a.x) {
                    inside = !inside;
                }
            }
        }
        inside
    };
    let mut tris = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let ps: Vec<SpadePoint<f64>> = vs.iter().map(|v| v.position()).collect();
        let centroid = Point2::new(
            (ps[0].x + ps[1].x + ps[2].x) / 3.0,
            (ps[0].y + ps[1].y + ps[2].y) / 3.0,
        );
        if in_ring(outer, centroid) && !in_ring(hole, centroid) {
            tris.push([
                index_of[&vs[0].fix()],
                index_of[&vs[1].fix()],
                index_of[&vs[2].fix()],
            ]);
        }
    }
    if tris.is_empty() {
        return Err(Error::Mesh("annulus triangulation is empty".into()));
    }
    Ok(tris)
}

/// Closed prism over a simple CCW polygon, z in [0, height]. Triangle
/// count is 2(n-2) caps plus 2n walls.
pub fn extrude_polygon(poly: &Polygon2D, height: f64) -> Result<TriMesh> {
    if height <= 0.0 {
        return Err(Error::Mesh("extrusion height must be positive".into()));
    }
    let n = poly.len();
    let tris2d = ear_clip(poly)?;
    let mut vertices = Vec::with_capacity(2 * n);
    for p in poly.vertices() {
        vertices.push(Point3::new(p.x, p.y, 0.0));
    }
    for p in poly.vertices() {
        vertices.push(Point3::new(p.x, p.y, height));
    }
    let mut triangles = Vec::with_capacity(2 * tris2d.len() + 2 * n);
    for t in &tris2d {
        // Bottom cap faces -z: reverse winding.
        triangles.push([t[0] as u32, t[2] as u32, t[1] as u32]);
        // Top cap faces +z.
        triangles.push([(t[0] + n) as u32, (t[1] + n) as u32, (t[2] + n) as u32]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        let (b0, b1) = (i as u32, j as u32);
        let (t0, t1) = ((i + n) as u32, (j + n) as u32);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
    }
    TriMesh::new(vertices, triangles)
}

/// Incremental convex hull of a 3-D point set. Fails on degenerate
/// (coplanar) input.
pub fn convex_hull(points: &[Point3<f64>]) -> Result<TriMesh> {
    if points.len() < 4 {
        return Err(Error::Mesh("convex hull needs at least 4 points".into()));
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let diag = (hi - lo).norm().max(1e-9);
    let eps = 1e-9 * diag;

    // Initial tetrahedron from extreme points.
    let (mut i0, mut i1) = (0, 1);
    let mut best = 0.0;
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            let d = (points[b] - points[a]).norm();
            if d > best {
                best = d;
                i0 = a;
                i1 = b;
            }
        }
    }
    if best < eps {
        return Err(Error::Mesh("degenerate point set".into()));
    }
    let dir = (points[i1] - points[i0]).normalize();
    let mut i2 = usize::MAX;
    best = eps;
    for (i, p) in points.iter().enumerate() {
        let v = p - points[i0];
        let d = (v - dir * v.dot(&dir)).norm();
        if d > best {
            best = d;
            i2 = i;
        }
    }
    if i2 == usize::MAX {
        return Err(Error::Mesh("collinear point set".into()));
    }
    let n0 = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let mut i3 = usize::MAX;
    best = eps;
    for (i, p) in points.iter().enumerate() {
        let d = n0.dot(&(p - points[i0])).abs();
        if d > best {
            best = d;
            i3 = i;
        }
    }
    if i3 == usize::MAX {
        return Err(Error::Mesh("coplanar point set".into()));
    }

    // Faces oriented outward from the tetra centroid.
    let centroid = Point3::from(
        (points[i0].coords + points[i1].coords + points[i2].coords + points[i3].coords) / 4.0,
    );
    let orient = |a: usize, b: usize, c: usize| -> [usize; 3] {
        let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
        if n.dot(&(points[a] - centroid)) >= 0.0 {
            [a, b, c]
        } else {
            [a, c, b]
        }
    };
    let mut faces: Vec<[usize; 3]> = vec![
        orient(i0, i1, i2),
        orient(i0, i1, i3),
        orient(i0, i2, i3),
        orient(i1, i2, i3),
    ];

    for (pi, p) in points.iter().enumerate() {
        if pi == i0 || pi == i1 || pi == i2 || pi == i3 {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| {
                let [a, b, c] = faces[f];
                let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
                n.dot(&(p - points[a])) > eps * n.norm().max(1e-30)
            })
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Horizon: edges of visible faces not shared with another visible face.
        use std::collections::HashMap;
        let mut edge_count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for &f in &visible {
            let t = faces[f];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edge_count.entry(key).or_insert((0, 0));
                entry.0 += 1;
                // Remember orientation as seen from the visible side.
                entry.1 = if a < b { 0 } else { 1 };
            }
        }
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for &f in &visible {
            let t = faces[f];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if edge_count[&key].0 == 1 {
                    horizon.push((a, b));
                }
            }
        }
        let mut keep: Vec<[usize; 3]> = Vec::with_capacity(faces.len());
        for (f, face) in faces.iter().enumerate() {
            if !visible.contains(&f) {
                keep.push(*face);
            }
        }
        for (a, b) in horizon {
            keep.push([a, b, pi]);
        }
        faces = keep;
    }

    // Remap used vertices and drop the rest.
    let mut remap = vec![u32::MAX; points.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(faces.len());
    for f in &faces {
        let mut tri = [0u32; 3];
        for (k, &i) in f.iter().enumerate() {
            if remap[i] == u32::MAX {
                remap[i] = vertices.len() as u32;
                vertices.push(points[i]);
            }
            tri[k] = remap[i];
        }
        triangles.push(tri);
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    if mesh.signed_volume() <= 0.0 {
        return Err(Error::Mesh("hull construction produced inverted mesh".into()));
    }
    Ok(mesh)
}
