//! Palm construction: planar outline from size/sides/aspect, digit base
//! placement with angle/normal/side offsets, outline finalization by
//! boolean union with base tabs, and prism extrusion.

use nalgebra::{Matrix3, Point2, Point3, Rotation2, UnitQuaternion, Vector3};

use crate::geom::Polygon2D;
use crate::mesh::{extrude_polygon, TriMesh};
use crate::{Error, Result};

/// Digit identifier. Fingers are numbered 0 (index), 1 (middle), 2 (pinky).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Digit {
    Finger(usize),
    Thumb,
}

impl std::fmt::Display for Digit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Digit::Finger(i) => write!(f, "f{i}"),
            Digit::Thumb => write!(f, "thumb"),
        }
    }
}

/// Pose of one digit base relative to its nominal outline position.
#[derive(Debug, Clone, Copy)]
pub struct BasePoseParams {
    /// Heading rotation about the palm normal, degrees.
    pub angle_deg: f64,
    /// Displacement along the outward outline normal, mm.
    pub normal_offset: f64,
    /// Displacement along the outline tangent, mm.
    pub side_offset: f64,
    /// Width of the base tab merged into the outline, mm.
    pub width: f64,
}

impl BasePoseParams {
    pub fn zero(width: f64) -> Self {
        BasePoseParams { angle_deg: 0.0, normal_offset: 0.0, side_offset: 0.0, width }
    }
}

/// Fixed (non-optimized) palm configuration.
#[derive(Debug, Clone)]
pub struct PalmConfig {
    pub size: f64,
    pub sides: usize,
    pub aspect: f64,
    pub thickness: f64,
    pub base_width: f64,
}

impl Default for PalmConfig {
    fn default() -> Self {
        PalmConfig { size: 110.0, sides: 8, aspect: 1.2, thickness: 18.0, base_width: 22.0 }
    }
}

impl PalmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size <= 0.0 || self.aspect <= 0.0 || self.thickness <= 0.0 {
            return Err(Error::Geometry("palm size/aspect/thickness must be positive".into()));
        }
        if !(3..=12).contains(&self.sides) {
            return Err(Error::Geometry(format!("palm sides {} outside [3, 12]", self.sides)));
        }
        if self.base_width <= 0.0 {
            return Err(Error::Geometry("base width must be positive".into()));
        }
        Ok(())
    }
}

/// Attachment frame for a digit: origin on the palm top surface, local +x
/// along the digit heading, +z along the palm normal.
#[derive(Debug, Clone)]
pub struct BaseFrame {
    pub digit: Digit,
    pub origin: Point3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

/// A base frame together with its undisplaced outline anchor, used by
/// outline finalization.
#[derive(Debug, Clone)]
pub struct PlacedBase {
    pub frame: BaseFrame,
    pub anchor: Point2<f64>,
    pub width: f64,
}

impl PlacedBase {
    pub fn origin_2d(&self) -> Point2<f64> {
        Point2::new(self.frame.origin.x, self.frame.origin.y)
    }
}

/// Regular `sides`-gon inscribed in the axis-aligned ellipse with semi-axes
/// (size/2, size/(2*aspect)), first vertex on the +x axis, CCW.
pub fn build_outline(size: f64, sides: usize, aspect: f64) -> Result<Polygon2D> {
    if size <= 0.0 || aspect <= 0.0 {
        return Err(Error::Geometry("size and aspect must be positive".into()));
    }
    if sides < 3 {
        return Err(Error::Geometry("outline needs at least 3 sides".into()));
    }
    let rx = size / 2.0;
    let ry = size / (2.0 * aspect);
    let verts = (0..sides)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
            Point2::new(rx * a.cos(), ry * a.sin())
        })
        .collect();
    Polygon2D::new(verts)
}

/// Nominal arc positions: fingers at the centers of an even partition of
/// the outline's top quarter, thumb at the middle of the right quarter.
pub fn default_arc_positions(finger_count: usize) -> Vec<(Digit, f64)> {
    let mut out = Vec::new();
    // Three nominal slots across the top quarter [0.125, 0.375]; two-finger
    // hands keep the outer slots (index and pinky).
    let slot = |k: usize| 0.125 + (k as f64 + 0.5) / 3.0 * 0.25;
    match finger_count {
        2 => {
            out.push((Digit::Finger(0), slot(0)));
            out.push((Digit::Finger(2), slot(2)));
        }
        _ => {
            out.push((Digit::Finger(0), slot(0)));
            out.push((Digit::Finger(1), slot(1)));
            out.push((Digit::Finger(2), slot(2)));
        }
    }
    out.push((Digit::Thumb, 0.0));
    out
}

/// Places digit base frames on the outline and applies per-digit offsets.
///
/// `z_top` is the palm top surface height the frames are lifted to.
pub fn place_bases(
    outline: &Polygon2D,
    assignments: &[(Digit, f64)],
    params: &dyn Fn(Digit) -> BasePoseParams,
    z_top: f64,
) -> Vec<PlacedBase> {
    assignments
        .iter()
        .map(|&(digit, arc)| {
            let p = params(digit);
            let (anchor, tangent, normal) = outline.point_at_arc(arc);
            let origin2d = anchor + normal * p.normal_offset + tangent * p.side_offset;
            let heading = Rotation2::new(p.angle_deg.to_radians()) * normal;
            let x = Vector3::new(heading.x, heading.y, 0.0);
            let z = Vector3::z();
            let y = z.cross(&x);
            let rot = UnitQuaternion::from_matrix(&Matrix3::from_columns(&[x, y, z]));
            PlacedBase {
                frame: BaseFrame {
                    digit,
                    origin: Point3::new(origin2d.x, origin2d.y, z_top),
                    rotation: rot,
                },
                anchor,
                width: p.width,
            }
        })
        .collect()
}

/// Merges one rectangular tab per displaced base into the outline, prunes
/// sub-millimeter features, and verifies every base origin is contained.
/// A disconnected union signals an infeasible design.
pub fn finalize_outline(outline: &Polygon2D, bases: &[PlacedBase]) -> Result<Polygon2D> {
    let mut tabs = Vec::new();
    for base in bases {
        let origin = base.origin_2d();
        let axis = origin - base.anchor;
        let len = axis.norm();
        if len < 0.5 {
            // Base is effectively on the outline; nothing to bridge. A tab
            // this short degenerates under the union, so the containment
            // check below tolerates the skipped displacement instead.
            continue;
        }
        let dir = axis / len;
        // Start the tab slightly inside the outline so the union overlaps.
        let inset = 8.0_f64.min(outline.ray_distance(base.anchor, -dir).max(0.0) * 0.5);
        let start = base.anchor - dir * inset;
        let end = origin + dir * (base.width / 4.0);
        tabs.push(Polygon2D::rectangle_between(start, end, base.width)?);
    }
    let merged = outline.union_all(&tabs)?;
    let pruned = merged.pruned(1.0)?;
    for base in bases {
        let len = (base.origin_2d() - base.anchor).norm();
        // A skipped tab leaves the origin up to 0.5 mm off the outline and
        // pruning may move the boundary another 0.5 mm; together ≤ 1 mm.
        let tol = if len < 0.5 { 1.0 } else { 1e-6 };
        if !pruned.contains(base.origin_2d(), tol) {
            return Err(Error::Infeasible(format!(
                "base {} origin escaped the finalized outline",
                base.frame.digit
            )));
        }
    }
    Ok(pruned)
}

/// Extruded palm body: prism mesh plus the retained top-face polygon used
/// as the pad region.
#[derive(Debug, Clone)]
pub struct PalmBody {
    pub mesh: TriMesh,
    pub top_face: Polygon2D,
    pub thickness: f64,
}

pub fn extrude_palm(outline: &Polygon2D, thickness: f64) -> Result<PalmBody> {
    let mesh = extrude_polygon(outline, thickness)?;
    Ok(PalmBody { mesh, top_face: outline.clone(), thickness })
}
