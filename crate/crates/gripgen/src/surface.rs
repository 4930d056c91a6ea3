//! Palm pad surface: Gaussian-kernel height field over the palm top face,
//! sampled on a regular grid and decomposed into convex collider prisms.

use nalgebra::{Point2, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::Polygon2D;
use crate::mesh::{convex_hull, ConvexPiece};
use crate::{Error, Result};

/// One radial Gaussian bump on the pad.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SurfaceKernel {
    /// Direction from the region centroid to the kernel center, degrees.
    pub center_angle: f64,
    /// Fraction of the centroid-to-boundary distance along that direction.
    pub center_offset: f64,
    /// Width σ as a fraction of the region's characteristic length.
    pub spread: f64,
    /// Height fraction r of the pad's max height.
    pub intensity: f64,
}

/// Pad parameters: shared max height, kernel list, grid resolution
/// (cells across the region's width).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PadSpec {
    pub max_height: f64,
    pub kernels: Vec<SurfaceKernel>,
    pub resolution: usize,
}

impl PadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_height < 0.0 {
            return Err(Error::Geometry("pad max height must be non-negative".into()));
        }
        if self.resolution < 4 {
            return Err(Error::Geometry("pad resolution must be at least 4".into()));
        }
        Ok(())
    }
}

/// Regular grid over the palm top face. Vertices carry outward normals;
/// `cells` lists CCW quad corners used for collider decomposition and
/// `boundary` marks the pinned rim ring.
#[derive(Debug, Clone)]
pub struct PadMesh {
    /// Height of the palm top plane the grid sits on.
    pub z0: f64,
    pub vertices: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub cells: Vec<[u32; 4]>,
    pub boundary: Vec<bool>,
    /// Grid cell edge length, mm.
    pub cell_size: f64,
}

/// Kernel support is cut off at this many σ·L; the truncated tail is
/// below 4e-4 of the peak.
const SUPPORT_SIGMAS: f64 = 4.0;

/// Kernel center: centroid + offset · d(θ) · û(θ), where d(θ) is the
/// centroid-to-boundary distance along û(θ).
pub fn kernel_center(region: &Polygon2D, k: &SurfaceKernel) -> Point2<f64> {
    let c = region.centroid();
    let th = k.center_angle.to_radians();
    let u = Vector2::new(th.cos(), th.sin());
    let d = region.ray_distance(c, u).max(0.0);
    c + u * (k.center_offset * d)
}

/// Characteristic length L: the largest centroid-to-boundary distance
/// (attained at a vertex since the boundary is piecewise linear).
pub fn characteristic_length(region: &Polygon2D) -> f64 {
    let c = region.centroid();
    region.vertices().iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
}

/// Height field h(p) = min(H · Σ_k r_k exp(−‖p−c_k‖²/(2(σ_k L)²)), H).
pub fn displacement(pad: &PadSpec, region: &Polygon2D, p: Point2<f64>) -> f64 {
    let l = characteristic_length(region);
    let mut sum = 0.0;
    for k in &pad.kernels {
        let sl = k.spread * l;
        if sl <= 0.0 {
            continue;
        }
        let d = (p - kernel_center(region, k)).norm();
        if d > SUPPORT_SIGMAS * sl {
            continue;
        }
        sum += k.intensity * (-d * d / (2.0 * sl * sl)).exp();
    }
    (pad.max_height * sum).min(pad.max_height)
}

/// Flat grid over the region: square cells whose four corners all lie
/// inside the top face; rim vertices (touching fewer than four kept
/// cells) are flagged as the pinned boundary ring.
pub fn build_pad_grid(region: &Polygon2D, z0: f64, resolution: usize) -> Result<PadMesh> {
    if resolution < 4 {
        return Err(Error::Geometry("pad resolution must be at least 4".into()));
    }
    let verts = region.vertices();
    let (mut lo, mut hi) = (verts[0], verts[0]);
    for v in verts {
        lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    let cell = (hi.x - lo.x) / resolution as f64;
    if cell <= 0.0 {
        return Err(Error::Geometry("degenerate region for pad grid".into()));
    }
    let nx = resolution;
    let ny = ((hi.y - lo.y) / cell).ceil() as usize;
    let grid_pt = |i: usize, j: usize| Point2::new(lo.x + cell * i as f64, lo.y + cell * j as f64);
    // Liang-Barsky style overlap test: does the segment pass through the
    // axis-aligned box (touching counts)? Used to reject cells a narrow
    // notch of the region boundary dips into even though all four cell
    // corners remain inside.
    let segment_hits_box = |a: Point2<f64>, b: Point2<f64>, lo: Point2<f64>, hi: Point2<f64>| {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in [
            (-d.x, a.x - lo.x),
            (d.x, hi.x - a.x),
            (-d.y, a.y - lo.y),
            (d.y, hi.y - a.y),
        ] {
            if p.abs() < 1e-12 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        t0 <= t1
    };
    // Keep cells fully inside the region: all four corners inside and no
    // boundary edge passing through the cell.
    let mut keep = vec![vec![false; ny]; nx];
    for (i, col) in keep.iter_mut().enumerate() {
        for (j, k) in col.iter_mut().enumerate() {
            let corners_in = [(0, 0), (1, 0), (1, 1), (0, 1)]
                .iter()
                .all(|&(di, dj)| region.contains(grid_pt(i + di, j + dj), 0.0));
            *k = corners_in && {
                let (clo, chi) = (grid_pt(i, j), grid_pt(i + 1, j + 1));
                (0..verts.len()).all(|e| {
                    !segment_hits_box(verts[e], verts[(e + 1) % verts.len()], clo, chi)
                })
            };
        }
    }
    // Break corner-pinches (two kept cells meeting only diagonally) so the
    // footprint boundary is a simple loop, then keep only the largest
    // 4-connected component so there is exactly one footprint.
    loop {
        let mut changed = false;
        for i in 0..nx.saturating_sub(1) {
            for j in 0..ny.saturating_sub(1) {
                let (a, b, c, d) = (keep[i][j], keep[i + 1][j], keep[i][j + 1], keep[i + 1][j + 1]);
                if a && d && !b && !c {
                    keep[i + 1][j + 1] = false;
                    changed = true;
                }
                if b && c && !a && !d {
                    keep[i + 1][j] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    {
        let mut label = vec![vec![usize::MAX; ny]; nx];
        let mut sizes = Vec::new();
        for si in 0..nx {
            for sj in 0..ny {
                if !keep[si][sj] || label[si][sj] != usize::MAX {
                    continue;
                }
                let id = sizes.len();
                let mut stack = vec![(si, sj)];
                let mut size = 0usize;
                while let Some((i, j)) = stack.pop() {
                    if i >= nx || j >= ny || !keep[i][j] || label[i][j] != usize::MAX {
                        continue;
                    }
                    label[i][j] = id;
                    size += 1;
                    stack.push((i + 1, j));
                    stack.push((i, j + 1));
                    if i > 0 {
                        stack.push((i - 1, j));
                    }
                    if j > 0 {
                        stack.push((i, j - 1));
                    }
                }
                sizes.push(size);
            }
        }
        if let Some((best, _)) = sizes.iter().enumerate().max_by_key(|&(i, &s)| (s, usize::MAX - i))
        {
            for i in 0..nx {
                for j in 0..ny {
                    keep[i][j] = label[i][j] == best;
                }
            }
        }
    }
    let mut index: std::collections::HashMap<(usize, usize), u32> = std::collections::HashMap::new();
    let mut vertices = Vec::new();
    let mut cell_count = vec![0u8; 0];
    let mut cells = Vec::new();
    let mut triangles = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            if !keep[i][j] {
                continue;
            }
            let mut quad = [0u32; 4];
            for (k, &(di, dj)) in [(0, 0), (1, 0), (1, 1), (0, 1)].iter().enumerate() {
                let key = (i + di, j + dj);
                let idx = *index.entry(key).or_insert_with(|| {
                    let p = grid_pt(key.0, key.1);
                    vertices.push(Point3::new(p.x, p.y, z0));
                    cell_count.push(0);
                    (vertices.len() - 1) as u32
                });
                cell_count[idx as usize] += 1;
                quad[k] = idx;
            }
            cells.push(quad);
            triangles.push([quad[0], quad[1], quad[2]]);
            triangles.push([quad[0], quad[2], quad[3]]);
        }
    }
    if cells.is_empty() {
        return Err(Error::Infeasible("pad grid has no interior cells".into()));
    }
    let boundary = cell_count.iter().map(|&c| c < 4).collect();
    let normals = vec![Vector3::z(); vertices.len()];
    Ok(PadMesh { z0, vertices, normals, triangles, cells, boundary, cell_size: cell })
}

/// Displaces every non-boundary vertex along its normal by the kernel
/// height field; boundary ring vertices stay pinned to the palm plane.
/// Topology and vertex count are preserved; normals are recomputed.
pub fn deform_pad(base: &PadMesh, pad: &PadSpec, region: &Polygon2D) -> Result<PadMesh> {
    pad.validate()?;
    let mut out = base.clone();
    for (i, v) in out.vertices.iter_mut().enumerate() {
        if base.boundary[i] {
            continue;
        }
        let h = displacement(pad, region, Point2::new(v.x, v.y));
        *v += base.normals[i] * h;
    }
    // Area-weighted vertex normals of the deformed sheet.
    let mut normals = vec![Vector3::zeros(); out.vertices.len()];
    for t in &out.triangles {
        let [a, b, c] =
            [out.vertices[t[0] as usize], out.vertices[t[1] as usize], out.vertices[t[2] as usize]];
        let n = (b - a).cross(&(c - a));
        for &k in t {
            normals[k as usize] += n;
        }
    }
    for n in &mut normals {
        let len = n.norm();
        *n = if len > 0.0 { *n / len } else { Vector3::z() };
    }
    out.normals = normals;
    Ok(out)
}

/// One convex prism per grid cell: the four lifted corners hulled with
/// their projections onto the palm plane. Cells with (near) zero lift
/// are dropped.
pub fn decompose_pad(deformed: &PadMesh) -> Result<Vec<ConvexPiece>> {
    let mut pieces = Vec::new();
    for cell in &deformed.cells {
        let tops: Vec<Point3<f64>> =
            cell.iter().map(|&i| deformed.vertices[i as usize]).collect();
        if tops.iter().all(|p| p.z - deformed.z0 < 1e-6) {
            continue;
        }
        let mut pts = tops.clone();
        pts.extend(tops.iter().map(|p| Point3::new(p.x, p.y, deformed.z0)));
        pieces.push(ConvexPiece::new(convex_hull(&pts)?)?);
    }
    Ok(pieces)
}
