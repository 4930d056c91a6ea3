//! Tool models: primitive unions (box / cylinder / capsule) with a signed
//! distance field, mass, and a canonical wrist reference pose on the
//! handle mid-line. Ships a builtin hammer / spoon / knife set and a JSON
//! library format.

use nalgebra::{Isometry3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One solid primitive in the tool frame. Dimensions in mm; cylinders and
/// capsules are aligned with their local z axis and centered at the local
/// origin (`half_len` is the half-length of the axis segment).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Primitive {
    Box { half_extents: [f64; 3] },
    Cylinder { radius: f64, half_len: f64 },
    Capsule { radius: f64, half_len: f64 },
}

impl Primitive {
    /// Exact signed distance in the primitive's local frame.
    fn sdf_local(&self, p: Vector3<f64>) -> f64 {
        match *self {
            Primitive::Box { half_extents: h } => {
                let q = Vector3::new(p.x.abs() - h[0], p.y.abs() - h[1], p.z.abs() - h[2]);
                let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
                outside.norm() + q.x.max(q.y).max(q.z).min(0.0)
            }
            Primitive::Cylinder { radius, half_len } => {
                let dr = (p.x * p.x + p.y * p.y).sqrt() - radius;
                let dz = p.z.abs() - half_len;
                let (or_, oz) = (dr.max(0.0), dz.max(0.0));
                (or_ * or_ + oz * oz).sqrt() + dr.max(dz).min(0.0)
            }
            Primitive::Capsule { radius, half_len } => {
                let z = p.z.clamp(-half_len, half_len);
                (p - Vector3::new(0.0, 0.0, z)).norm() - radius
            }
        }
    }

    fn volume(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Primitive::Box { half_extents: h } => 8.0 * h[0] * h[1] * h[2],
            Primitive::Cylinder { radius, half_len } => PI * radius * radius * 2.0 * half_len,
            Primitive::Capsule { radius, half_len } => {
                PI * radius * radius * 2.0 * half_len + 4.0 / 3.0 * PI * radius.powi(3)
            }
        }
    }
}

/// A primitive with its rigid pose in the tool frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosedPrimitive {
    pub primitive: Primitive,
    pub pose: Isometry3<f64>,
}

/// A tool as a union of posed primitives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolModel {
    pub name: String,
    pub primitives: Vec<PosedPrimitive>,
    /// Mass in kg.
    pub mass: f64,
    /// Reference wrist pose in the tool frame (hand +z faces the tool).
    pub wrist_pose: Isometry3<f64>,
}

impl ToolModel {
    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::Eval(format!("tool {} has no primitives", self.name)));
        }
        if self.mass <= 0.0 {
            return Err(Error::Eval(format!("tool {} mass must be positive", self.name)));
        }
        for p in &self.primitives {
            let ok = match p.primitive {
                Primitive::Box { half_extents: h } => h.iter().all(|&v| v > 0.0),
                Primitive::Cylinder { radius, half_len }
                | Primitive::Capsule { radius, half_len } => radius > 0.0 && half_len > 0.0,
            };
            if !ok {
                return Err(Error::Eval(format!("tool {} has a degenerate primitive", self.name)));
            }
        }
        Ok(())
    }

    /// Signed distance from `p` (tool frame, mm) to the union surface.
    pub fn sdf(&self, p: Point3<f64>) -> f64 {
        self.primitives
            .iter()
            .map(|pp| pp.primitive.sdf_local((pp.pose.inverse() * p).coords))
            .fold(f64::INFINITY, f64::min)
    }

    /// Outward surface normal at/near `p` via central differences.
    pub fn normal(&self, p: Point3<f64>) -> Vector3<f64> {
        let h = 1e-4;
        let g = Vector3::new(
            self.sdf(p + Vector3::new(h, 0.0, 0.0)) - self.sdf(p - Vector3::new(h, 0.0, 0.0)),
            self.sdf(p + Vector3::new(0.0, h, 0.0)) - self.sdf(p - Vector3::new(0.0, h, 0.0)),
            self.sdf(p + Vector3::new(0.0, 0.0, h)) - self.sdf(p - Vector3::new(0.0, 0.0, h)),
        );
        let n = g.norm();
        if n > 0.0 {
            g / n
        } else {
            Vector3::z()
        }
    }

    /// Closest surface point to `p` (first-order projection along the
    /// gradient; exact for points near the surface).
    pub fn project(&self, p: Point3<f64>) -> Point3<f64> {
        let mut q = p;
        for _ in 0..4 {
            let d = self.sdf(q);
            if d.abs() < 1e-9 {
                break;
            }
            q -= self.normal(q) * d;
        }
        q
    }

    /// Volume-weighted centroid of the primitives (uniform density),
    /// ignoring overlaps; used for the optional gravity wrench.
    pub fn com(&self) -> Point3<f64> {
        let mut num = Vector3::zeros();
        let mut den = 0.0;
        for pp in &self.primitives {
            let v = pp.primitive.volume();
            num += (pp.pose * Point3::origin()).coords * v;
            den += v;
        }
        Point3::from(num / den)
    }
}

fn along_x(x: f64, z: f64) -> Isometry3<f64> {
    // Primitive axes are local z; rotate z onto x and translate.
    Isometry3::from_parts(
        Vector3::new(x, 0.0, z).into(),
        UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2),
    )
}

/// The builtin hammer / spoon / knife set. Handles run along +x with the
/// tool frame origin on the handle axis. Each wrist pose places the hand
/// so the handle crosses the finger workspace (hand frame: palm top at
/// z = 0..25 mm, fingers closing through y ≈ 60..170, z ≈ 25..85) — the
/// inverse of the tool-in-hand placement used during grasp synthesis.
pub fn builtin_tools() -> Vec<ToolModel> {
    let hammer = ToolModel {
        name: "hammer".into(),
        primitives: vec![
            PosedPrimitive {
                primitive: Primitive::Cylinder { radius: 12.5, half_len: 125.0 },
                pose: along_x(0.0, 0.0),
            },
            PosedPrimitive {
                // 90 x 30 x 30 head across the handle tip.
                primitive: Primitive::Box { half_extents: [15.0, 15.0, 45.0] },
                pose: Isometry3::translation(125.0, 0.0, 0.0),
            },
        ],
        mass: 0.55,
        wrist_pose: Isometry3::translation(-30.0, -95.0, -50.0),
    };
    let spoon = ToolModel {
        name: "spoon".into(),
        primitives: vec![
            PosedPrimitive {
                primitive: Primitive::Capsule { radius: 7.0, half_len: 70.0 },
                pose: along_x(0.0, 0.0),
            },
            PosedPrimitive {
                // Wide shallow capsule standing in for the bowl ellipsoid.
                primitive: Primitive::Capsule { radius: 16.0, half_len: 12.0 },
                pose: Isometry3::from_parts(
                    Vector3::new(92.0, 0.0, 0.0).into(),
                    UnitQuaternion::from_axis_angle(
                        &Vector3::x_axis(),
                        std::f64::consts::FRAC_PI_2,
                    ),
                ),
            },
        ],
        mass: 0.05,
        wrist_pose: Isometry3::translation(20.0, -85.0, -45.0),
    };
    let knife = ToolModel {
        name: "knife".into(),
        primitives: vec![
            PosedPrimitive {
                primitive: Primitive::Box { half_extents: [55.0, 11.0, 15.0] },
                pose: Isometry3::translation(-55.0, 0.0, 0.0),
            },
            PosedPrimitive {
                primitive: Primitive::Box { half_extents: [100.0, 1.5, 22.5] },
                pose: Isometry3::translation(100.0, 0.0, 0.0),
            },
        ],
        mass: 0.09,
        // Blade laid flat (rolled 90° about the handle axis) so fingers
        // wrap the handle instead of pinching the blade edge.
        wrist_pose: Isometry3::from_parts(
            Vector3::new(55.0, 105.0, 50.0).into(),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), -std::f64::consts::FRAC_PI_2),
        )
        .inverse(),
    };
    vec![hammer, spoon, knife]
}

/// JSON tool-library round trip.
pub fn tools_to_json(tools: &[ToolModel]) -> Result<String> {
    Ok(serde_json::to_string_pretty(tools)?)
}

pub fn tools_from_json(json: &str) -> Result<Vec<ToolModel>> {
    let tools: Vec<ToolModel> = serde_json::from_str(json)?;
    for t in &tools {
        t.validate()?;
    }
    Ok(tools)
}
