//! Finger and thumb kinematic chains.
//!
//! A digit is described by a structure code `MODE ("-" GROUP)*` where MODE
//! selects the base rotation mode and each GROUP is a string of joint-type
//! digits (1 = Grasp, 2 = Side, 3 = Axial) appended after the mode joints.
//! The expanded joint list is turned into a serial chain of rounded-box
//! links capped by a scalable hemispherical fingertip.

use nalgebra::{Isometry3, Point2, Point3, Translation3, UnitQuaternion, Vector3};

use crate::mesh::{convex_hull, ConvexPiece, MassProps, TriMesh};
use crate::palm::BaseFrame;
use crate::{Error, Result};

/// Joint types available to a digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    /// Flexion about the lateral (pitch) axis; curls toward the palm pad.
    Grasp,
    /// Yaw about the palm normal.
    Side,
    /// Roll about the link axis.
    Axial,
}

impl JointType {
    pub fn from_digit(d: char) -> Result<JointType> {
        match d {
            '1' => Ok(JointType::Grasp),
            '2' => Ok(JointType::Side),
            '3' => Ok(JointType::Axial),
            _ => Err(Error::BadFingerCode {
                code: d.to_string(),
                reason: "group digits must be 1 (Grasp), 2 (Side) or 3 (Axial)".into(),
            }),
        }
    }

    /// Rotation axis in the parent link frame (+x along the link, +z palm
    /// normal). Grasp uses -y so positive angles curl toward the pad (+z).
    pub fn axis(self) -> Vector3<f64> {
        match self {
            JointType::Grasp => Vector3::new(0.0, -1.0, 0.0),
            JointType::Side => Vector3::new(0.0, 0.0, 1.0),
            JointType::Axial => Vector3::new(1.0, 0.0, 0.0),
        }
    }

    /// Angle limits in degrees.
    pub fn limits_deg(self) -> (f64, f64) {
        match self {
            JointType::Grasp => (0.0, 110.0),
            JointType::Side => (-30.0, 30.0),
            JointType::Axial => (-90.0, 90.0),
        }
    }
}

/// Parsed structure code: base rotation mode plus appended joint groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerCode {
    pub mode: u8,
    pub groups: Vec<Vec<JointType>>,
    pub is_thumb: bool,
}

pub fn parse_finger_code(code: &str, is_thumb: bool) -> Result<FingerCode> {
    let bad = |reason: &str| Error::BadFingerCode { code: code.to_string(), reason: reason.into() };
    let mut parts = code.split('-');
    let mode_str = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| bad("empty code"))?;
    if mode_str.len() != 1 || !mode_str.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad("mode must be a single digit"));
    }
    let mode = mode_str.parse::<u8>().unwrap();
    let max_mode = if is_thumb { 1 } else { 4 };
    if mode > max_mode {
        return Err(bad("mode out of range"));
    }
    let mut groups = Vec::new();
    for part in parts {
        if part.is_empty() {
            return Err(bad("empty joint group"));
        }
        groups.push(part.chars().map(JointType::from_digit).collect::<Result<Vec<_>>>()?);
    }
    Ok(FingerCode { mode, groups, is_thumb })
}

/// One joint of a chain: type, rotation axis in the parent frame, and
/// limits in degrees.
#[derive(Debug, Clone)]
pub struct JointSpec {
    pub jtype: JointType,
    pub axis: Vector3<f64>,
    pub limits_deg: (f64, f64),
    pub id: String,
}

/// Expanded digit structure: ordered joints plus the link lengths that
/// follow each joint; the final link is the fingertip.
#[derive(Debug, Clone)]
pub struct FingerStructure {
    pub joints: Vec<JointSpec>,
    pub link_lengths: Vec<f64>,
    pub is_thumb: bool,
    pub tip_scale: (f64, f64, f64),
}

/// Base link-length profile proximal to distal, mm; joints beyond the
/// fourth reuse the distal slot.
pub const BASE_LINK_PROFILE: [f64; 4] = [45.0, 32.0, 26.0, 22.0];

/// Hard cap on joints per digit.
pub const MAX_JOINTS: usize = 6;

/// Rounded-box link cross-section, mm.
pub const LINK_WIDTH: f64 = 20.0;
pub const LINK_HEIGHT: f64 = 14.0;

fn mode_joints(code: &FingerCode) -> Result<Vec<JointType>> {
    use JointType::*;
    if code.is_thumb {
        // Thumbs always lead with a lateral base joint; mode 1 adds an
        // axial joint right after it.
        Ok(match code.mode {
            0 => vec![Side],
            1 => vec![Side, Axial],
            _ => unreachable!("mode validated at parse"),
        })
    } else {
        Ok(match code.mode {
            0 => vec![Grasp],
            1 => vec![Side, Grasp],
            2 => vec![Axial, Grasp],
            3 => vec![Side, Axial],
            4 => vec![Side, Axial, Grasp],
            _ => unreachable!("mode validated at parse"),
        })
    }
}

pub fn expand_structure(
    code: &FingerCode,
    added_lengths: &[f64; 4],
    tip_scale: (f64, f64, f64),
) -> Result<FingerStructure> {
    if tip_scale.0 <= 0.0 || tip_scale.1 <= 0.0 || tip_scale.2 <= 0.0 {
        return Err(Error::BadFingerCode {
            code: format!("{code:?}"),
            reason: "tip scale components must be positive".into(),
        });
    }
    let mut jtypes = mode_joints(code)?;
    for group in &code.groups {
        jtypes.extend(group.iter().copied());
    }
    if jtypes.len() > MAX_JOINTS {
        return Err(Error::BadFingerCode {
            code: format!("{code:?}"),
            reason: format!("{} joints exceeds the cap of {MAX_JOINTS}", jtypes.len()),
        });
    }
    let joints = jtypes
        .iter()
        .enumerate()
        .map(|(i, &jt)| JointSpec {
            jtype: jt,
            axis: jt.axis(),
            limits_deg: jt.limits_deg(),
            id: format!("j{i}"),
        })
        .collect::<Vec<_>>();
    let link_lengths = (0..jtypes.len())
        .map(|i| {
            let slot = i.min(3);
            let len = BASE_LINK_PROFILE[slot] + added_lengths[slot];
            if len <= 0.0 {
                Err(Error::BadFingerCode {
                    code: format!("{code:?}"),
                    reason: format!("link {i} length {len} must be positive"),
                })
            } else {
                Ok(len)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FingerStructure { joints, link_lengths, is_thumb: code.is_thumb, tip_scale })
}

/// One link of an assembled chain. The mesh and collider live in the link
/// frame (origin at the link's joint, +x along the link).
#[derive(Debug, Clone)]
pub struct ChainLink {
    pub name: String,
    /// World frame at the zero configuration.
    pub frame: Isometry3<f64>,
    pub mesh: TriMesh,
    pub collider: ConvexPiece,
    pub mass: MassProps,
    pub length: f64,
}

/// A joint connecting `parent` (None = the palm) to `child`.
#[derive(Debug, Clone)]
pub struct ChainJoint {
    pub spec: JointSpec,
    pub parent: Option<usize>,
    pub child: usize,
    /// Transform from the parent frame to the joint frame at zero angle.
    pub origin: Isometry3<f64>,
}

/// Serial chain for one digit.
#[derive(Debug, Clone)]
pub struct FingerChain {
    pub base: BaseFrame,
    pub links: Vec<ChainLink>,
    pub joints: Vec<ChainJoint>,
}

impl FingerChain {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// World link frames for the given joint angles (radians).
    pub fn fk(&self, angles: &[f64]) -> Result<Vec<Isometry3<f64>>> {
        if angles.len() != self.joints.len() {
            return Err(Error::Geometry(format!(
                "{} angles for a {}-joint chain",
                angles.len(),
                self.joints.len()
            )));
        }
        let base = Isometry3::from_parts(self.base.origin.coords.into(), self.base.rotation);
        let mut frames = Vec::with_capacity(self.links.len());
        let mut current = base;
        for (i, joint) in self.joints.iter().enumerate() {
            let rot = UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(joint.spec.axis),
                angles[i],
            );
            current = current * joint.origin * Isometry3::from_parts(Translation3::identity(), rot);
            frames.push(current);
        }
        Ok(frames)
    }
}

/// CCW rounded-rectangle ring in the (y, z) plane.
fn rounded_rect_ring(width: f64, height: f64, radius: f64, segments: usize) -> Vec<Point2<f64>> {
    let r = radius.min(width / 2.0).min(height / 2.0);
    let cy = width / 2.0 - r;
    let cz = height / 2.0 - r;
    let corners = [(cy, cz, 0.0), (-cy, cz, 90.0), (-cy, -cz, 180.0), (cy, -cz, 270.0)];
    let mut ring = Vec::with_capacity(4 * (segments + 1));
    for &(ky, kz, start) in &corners {
        for s in 0..=segments {
            let a = (start + 90.0 * s as f64 / segments as f64).to_radians();
            ring.push(Point2::new(ky + r * a.cos(), kz + r * a.sin()));
        }
    }
    ring
}

fn link_mesh(length: f64) -> Result<TriMesh> {
    let ring = rounded_rect_ring(LINK_WIDTH, LINK_HEIGHT, 4.0, 4);
    let mut pts = Vec::with_capacity(ring.len() * 2);
    for p in &ring {
        pts.push(Point3::new(0.0, p.x, p.y));
        pts.push(Point3::new(length, p.x, p.y));
    }
    convex_hull(&pts)
}

fn tip_mesh(length: f64, scale: (f64, f64, f64)) -> Result<TriMesh> {
    let ring = rounded_rect_ring(LINK_WIDTH, LINK_HEIGHT, 4.0, 4);
    let mut pts: Vec<Point3<f64>> = ring.iter().map(|p| Point3::new(0.0, p.x, p.y)).collect();
    // Hemispherical cap: half-ellipsoid with semi-axes (cap, w/2, h/2)
    // centered `cap` short of the tip so the x-extent stays `length`.
    let cap = (LINK_HEIGHT / 2.0).min(length / 2.0);
    let (ry, rz) = (LINK_WIDTH / 2.0, LINK_HEIGHT / 2.0);
    let rings = 4;
    let around = 16;
    for i in 0..=rings {
        let phi = std::f64::consts::FRAC_PI_2 * i as f64 / rings as f64;
        if i == rings {
            pts.push(Point3::new(length, 0.0, 0.0));
            continue;
        }
        for k in 0..around {
            let th = 2.0 * std::f64::consts::PI * k as f64 / around as f64;
            pts.push(Point3::new(
                length - cap + cap * phi.sin(),
                ry * phi.cos() * th.cos(),
                rz * phi.cos() * th.sin(),
            ));
        }
    }
    convex_hull(&pts)?.scaled(scale.0, scale.1, scale.2)
}

pub fn build_chain(structure: &FingerStructure, base: &BaseFrame) -> Result<FingerChain> {
    let n = structure.joints.len();
    if n == 0 || structure.link_lengths.len() != n {
        return Err(Error::Geometry("structure must pair every joint with a link".into()));
    }
    let base_iso = Isometry3::from_parts(base.origin.coords.into(), base.rotation);
    let mut links = Vec::with_capacity(n);
    let mut joints = Vec::with_capacity(n);
    let mut offset = 0.0;
    for (i, spec) in structure.joints.iter().enumerate() {
        let length = structure.link_lengths[i];
        let is_tip = i == n - 1;
        let mesh = if is_tip { tip_mesh(length, structure.tip_scale)? } else { link_mesh(length)? };
        let mass = mesh.mass_props(crate::DENSITY)?;
        let collider = ConvexPiece::new(mesh.clone())?;
        let origin = Isometry3::translation(if i == 0 { 0.0 } else { structure.link_lengths[i - 1] }, 0.0, 0.0);
        // Zero-pose world frame: all joints at zero leave the chain
        // straight along the base heading.
        let frame = base_iso * Isometry3::translation(offset, 0.0, 0.0);
        offset += length;
        links.push(ChainLink {
            name: format!("link{i}"),
            frame,
            mesh,
            collider,
            mass,
            length,
        });
        joints.push(ChainJoint {
            spec: spec.clone(),
            parent: if i == 0 { None } else { Some(i - 1) },
            child: i,
            origin,
        });
    }
    Ok(FingerChain { base: base.clone(), links, joints })
}
