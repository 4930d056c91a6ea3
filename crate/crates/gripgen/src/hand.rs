//! Hand assembly: turns a design point into a complete articulated model
//! (palm body with deformed pad, digit chains, convex colliders).

use nalgebra::{Point2, Point3};

use crate::finger::{build_chain, expand_structure, parse_finger_code, FingerChain};
use crate::geom::Polygon2D;
use crate::mesh::{convex_hull, ear_clip, ear_clip_with_hole, ConvexPiece, MassProps, TriMesh};
use crate::palm::{
    build_outline, default_arc_positions, finalize_outline, place_bases, BasePoseParams, Digit,
    PalmConfig,
};
use crate::space::DesignPoint;
use crate::surface::{build_pad_grid, decompose_pad, deform_pad, PadMesh, PadSpec, SurfaceKernel};
use crate::{Error, Result};

/// Fixed (non-optimized) assembly configuration.
#[derive(Debug, Clone)]
pub struct HandConfig {
    pub palm: PalmConfig,
    /// Pad grid cells across the palm width.
    pub pad_resolution: usize,
}

impl Default for HandConfig {
    fn default() -> Self {
        HandConfig { palm: PalmConfig::default(), pad_resolution: 16 }
    }
}

/// Placement offsets of one digit base.
#[derive(Debug, Clone, Copy, Default)]
pub struct DigitPose {
    pub angle_deg: f64,
    pub normal_offset: f64,
    pub side_offset: f64,
}

/// Everything a hand build needs, decoupled from the design space so
/// arbitrary structures can be assembled directly.
#[derive(Debug, Clone)]
pub struct HandParams {
    pub finger_code: String,
    pub thumb_code: String,
    pub finger_number: usize,
    pub finger0: DigitPose,
    pub finger1: DigitPose,
    pub finger2: DigitPose,
    pub thumb: DigitPose,
    pub pad_max_height: f64,
    pub kernels: Vec<SurfaceKernel>,
    pub tip_scale: (f64, f64, f64),
    pub added_lengths: [f64; 4],
}

/// Extracts [`HandParams`] from a power-grasp design point.
pub fn hand_params_from_point(point: &DesignPoint) -> Result<HandParams> {
    let f = |name: &str| {
        point.f64(name).ok_or_else(|| Error::InvalidPoint(format!("missing parameter {name}")))
    };
    let cat = |name: &str| {
        point
            .cat(name)
            .map(str::to_string)
            .ok_or_else(|| Error::InvalidPoint(format!("missing parameter {name}")))
    };
    let finger_number: usize = cat("finger_number")?
        .parse()
        .map_err(|_| Error::InvalidPoint("finger_number must be numeric".into()))?;
    let kernels = (0..2)
        .map(|k| {
            Ok(SurfaceKernel {
                center_angle: f(&format!("kernel{k}_center_angle"))?,
                center_offset: f(&format!("kernel{k}_center_offset"))?,
                spread: f(&format!("kernel{k}_spread"))?,
                intensity: f(&format!("kernel{k}_intensity"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HandParams {
        finger_code: cat("finger_code")?,
        thumb_code: cat("thumb_code")?,
        finger_number,
        finger0: DigitPose {
            angle_deg: f("finger0_angle")?,
            normal_offset: f("finger0_normal_offset")?,
            side_offset: f("finger0_side_offset")?,
        },
        finger1: DigitPose {
            angle_deg: 0.0,
            normal_offset: if finger_number == 3 { f("finger1_normal_offset")? } else { 0.0 },
            side_offset: 0.0,
        },
        finger2: DigitPose {
            angle_deg: f("finger2_angle")?,
            normal_offset: f("finger2_normal_offset")?,
            side_offset: f("finger2_side_offset")?,
        },
        thumb: DigitPose {
            angle_deg: f("thumb_angle")?,
            normal_offset: f("thumb_normal_offset")?,
            side_offset: f("thumb_side_offset")?,
        },
        pad_max_height: f("pad_max_height")?,
        kernels,
        tip_scale: (1.0, f("tip_scale_y")?, f("tip_scale_z")?),
        added_lengths: [
            f("link_added_length_0")?,
            f("link_added_length_1")?,
            f("link_added_length_2")?,
            f("link_added_length_3")?,
        ],
    })
}

/// A complete articulated hand. Chains are ordered f0, (f1,) f2, thumb.
#[derive(Debug, Clone)]
pub struct HandModel {
    pub name: String,
    /// Finalized palm outline (top-face polygon).
    pub outline: Polygon2D,
    pub palm_thickness: f64,
    /// Watertight palm body including the deformed pad top.
    pub palm_visual: TriMesh,
    /// Convex palm colliders: outline prisms plus pad cell pieces.
    pub palm_collision: Vec<ConvexPiece>,
    pub palm_mass: MassProps,
    pub chains: Vec<(String, FingerChain)>,
    pub point: Option<DesignPoint>,
}

impl HandModel {
    pub fn joint_count(&self) -> usize {
        self.chains.iter().map(|(_, c)| c.joints.len()).sum()
    }
}

/// Ordered CCW boundary loop of the kept-cell union, as grid vertex
/// indices. Directed cell edges appearing without their reverse are
/// boundary edges; chaining them must yield one loop.
fn grid_rim(pad: &PadMesh) -> Result<Vec<u32>> {
    use std::collections::HashMap;
    let mut directed: HashMap<(u32, u32), ()> = HashMap::new();
    for cell in &pad.cells {
        for k in 0..4 {
            directed.insert((cell[k], cell[(k + 1) % 4]), ());
        }
    }
    let mut next: HashMap<u32, u32> = HashMap::new();
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) {
            if next.insert(a, b).is_some() {
                return Err(Error::Infeasible("pad footprint rim is not a simple loop".into()));
            }
        }
    }
    let &start = next.keys().min().ok_or_else(|| Error::Infeasible("pad rim empty".into()))?;
    let mut loop_ = vec![start];
    let mut cur = start;
    loop {
        let nxt = *next
            .get(&cur)
            .ok_or_else(|| Error::Infeasible("pad footprint rim is broken".into()))?;
        if nxt == start {
            break;
        }
        loop_.push(nxt);
        cur = nxt;
        if loop_.len() > next.len() {
            return Err(Error::Infeasible("pad footprint rim does not close".into()));
        }
    }
    if loop_.len() != next.len() {
        return Err(Error::Infeasible("pad footprint has multiple rims".into()));
    }
    Ok(loop_)
}

/// Watertight palm body: prism walls and bottom, flat annulus between the
/// outline and the pad rim, and the deformed pad sheet as the inner top.
fn palm_visual_mesh(outline: &Polygon2D, thickness: f64, pad: &PadMesh) -> Result<TriMesh> {
    let n = outline.len();
    let rim = grid_rim(pad)?;
    let mut vertices: Vec<Point3<f64>> = Vec::with_capacity(2 * n + pad.vertices.len());
    for p in outline.vertices() {
        vertices.push(Point3::new(p.x, p.y, 0.0));
    }
    for p in outline.vertices() {
        vertices.push(Point3::new(p.x, p.y, thickness));
    }
    let grid_base = vertices.len() as u32;
    vertices.extend(pad.vertices.iter().copied());
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // Bottom cap (faces -z) and side walls.
    for t in ear_clip(outline)? {
        triangles.push([t[0] as u32, t[2] as u32, t[1] as u32]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        let (b0, b1) = (i as u32, j as u32);
        let (t0, t1) = ((i + n) as u32, (j + n) as u32);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
    }
    // Flat annulus between the outline top ring and the pad rim.
    let rim_pts: Vec<Point2<f64>> = rim
        .iter()
        .map(|&i| {
            let v = pad.vertices[i as usize];
            Point2::new(v.x, v.y)
        })
        .collect();
    for t in ear_clip_with_hole(outline.vertices(), &rim_pts)? {
        let map = |idx: usize| -> u32 {
            if idx < n {
                (idx + n) as u32
            } else {
                grid_base + rim[idx - n]
            }
        };
        triangles.push([map(t[0]), map(t[1]), map(t[2])]);
    }
    // Deformed pad sheet (already CCW from above).
    for t in &pad.triangles {
        triangles.push([grid_base + t[0], grid_base + t[1], grid_base + t[2]]);
    }
    let mesh = TriMesh::new(vertices, triangles)?;
    if !mesh.watertight_check() {
        return Err(Error::Mesh("assembled palm body is not watertight".into()));
    }
    Ok(mesh)
}

/// Convex palm colliders: one triangular prism per outline ear plus the
/// pad cell pieces.
fn palm_collision_pieces(
    outline: &Polygon2D,
    thickness: f64,
    pad: &PadMesh,
) -> Result<Vec<ConvexPiece>> {
    let mut pieces = Vec::new();
    for t in ear_clip(outline)? {
        let mut pts = Vec::with_capacity(6);
        for &i in &t {
            let p = outline.vertices()[i];
            pts.push(Point3::new(p.x, p.y, 0.0));
            pts.push(Point3::new(p.x, p.y, thickness));
        }
        pieces.push(ConvexPiece::new(convex_hull(&pts)?)?);
    }
    pieces.extend(decompose_pad(pad)?);
    Ok(pieces)
}

/// Deterministic assembly pipeline:
/// outline → bases → finalized outline → palm body → pad → digit chains.
pub fn build_hand(params: &HandParams, config: &HandConfig) -> Result<HandModel> {
    config.palm.validate()?;
    if !(params.finger_number == 2 || params.finger_number == 3) {
        return Err(Error::InvalidPoint(format!(
            "finger_number {} not in {{2, 3}}",
            params.finger_number
        )));
    }
    let palm = &config.palm;
    let outline = build_outline(palm.size, palm.sides, palm.aspect)?;
    let pose = |d: Digit| -> BasePoseParams {
        let p = match d {
            Digit::Finger(0) => params.finger0,
            Digit::Finger(1) => params.finger1,
            Digit::Finger(_) => params.finger2,
            Digit::Thumb => params.thumb,
        };
        BasePoseParams {
            angle_deg: p.angle_deg,
            normal_offset: p.normal_offset,
            side_offset: p.side_offset,
            width: palm.base_width,
        }
    };
    let assignments = default_arc_positions(params.finger_number);
    let bases = place_bases(&outline, &assignments, &pose, palm.thickness);
    let final_outline = finalize_outline(&outline, &bases)?;
    let pad_spec = PadSpec {
        max_height: params.pad_max_height,
        kernels: params.kernels.clone(),
        resolution: config.pad_resolution,
    };
    let grid = build_pad_grid(&final_outline, palm.thickness, config.pad_resolution)?;
    let pad = deform_pad(&grid, &pad_spec, &final_outline)?;
    let palm_visual = palm_visual_mesh(&final_outline, palm.thickness, &pad)?;
    let palm_collision = palm_collision_pieces(&final_outline, palm.thickness, &pad)?;
    let palm_mass = palm_visual.mass_props(crate::DENSITY)?;
    let mut chains = Vec::new();
    for base in &bases {
        let (code, is_thumb, name) = match base.frame.digit {
            Digit::Thumb => (params.thumb_code.as_str(), true, "thumb".to_string()),
            Digit::Finger(i) => (params.finger_code.as_str(), false, format!("f{i}")),
        };
        let parsed = parse_finger_code(code, is_thumb)?;
        let structure = expand_structure(&parsed, &params.added_lengths, params.tip_scale)?;
        chains.push((name, build_chain(&structure, &base.frame)?));
    }
    Ok(HandModel {
        name: "hand".into(),
        outline: final_outline,
        palm_thickness: palm.thickness,
        palm_visual,
        palm_collision,
        palm_mass,
        chains,
        point: None,
    })
}

/// Assembles a hand from a validated power-grasp design point.
pub fn assemble_hand(point: &DesignPoint, config: &HandConfig) -> Result<HandModel> {
    let params = hand_params_from_point(point)?;
    let mut model = build_hand(&params, config)?;
    model.point = Some(point.clone());
    Ok(model)
}
