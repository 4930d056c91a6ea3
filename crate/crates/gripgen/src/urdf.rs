//! URDF export: writes `hand.urdf` plus visual/collision STL meshes for a
//! [`HandModel`]. Lengths inside the URDF are meters and angles radians;
//! STL files keep the model's millimeter coordinates and are referenced
//! with a 0.001 scale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Isometry3;

use crate::finger::JointType;
use crate::hand::HandModel;
use crate::mesh::{MassProps, TriMesh};
use crate::stl::write_stl;
use crate::{Error, Result};

/// Format-mandated actuation placeholders (not modeled otherwise).
pub const JOINT_EFFORT: f64 = 2.0; // N·m
pub const JOINT_VELOCITY: f64 = 5.0; // rad/s

const MM: f64 = 1e-3;
const MESH_SCALE: &str = "0.001 0.001 0.001";

/// Rendered export: the URDF text plus the mesh files it references
/// (paths relative to the export directory).
#[derive(Debug, Clone)]
pub struct UrdfDocument {
    pub xml: String,
    pub mesh_files: Vec<String>,
}

/// Shortest round-trip float formatting; deterministic, so repeated
/// exports are byte-identical.
fn num(v: f64) -> String {
    // Avoid "-0" artifacts that depend on upstream sign noise.
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v}")
}

fn origin_tag(iso: &Isometry3<f64>) -> String {
    let t = iso.translation.vector * MM;
    let (r, p, y) = iso.rotation.euler_angles();
    format!(
        r#"<origin xyz="{} {} {}" rpy="{} {} {}"/>"#,
        num(t.x),
        num(t.y),
        num(t.z),
        num(r),
        num(p),
        num(y)
    )
}

fn inertial_block(out: &mut String, mass: &MassProps) {
    let com = mass.com.coords * MM;
    let i = mass.inertia * MM * MM; // kg·mm² → kg·m²
    let _ = write!(
        out,
        "    <inertial>\n      <origin xyz=\"{} {} {}\" rpy=\"0 0 0\"/>\n      \
         <mass value=\"{}\"/>\n      <inertia ixx=\"{}\" ixy=\"{}\" ixz=\"{}\" \
         iyy=\"{}\" iyz=\"{}\" izz=\"{}\"/>\n    </inertial>\n",
        num(com.x),
        num(com.y),
        num(com.z),
        num(mass.mass),
        num(i[(0, 0)]),
        num(i[(0, 1)]),
        num(i[(0, 2)]),
        num(i[(1, 1)]),
        num(i[(1, 2)]),
        num(i[(2, 2)]),
    );
}

fn geometry_block(out: &mut String, kind: &str, path: &str) {
    let _ = write!(
        out,
        "    <{kind}>\n      <origin xyz=\"0 0 0\" rpy=\"0 0 0\"/>\n      <geometry>\n        \
         <mesh filename=\"{path}\" scale=\"{MESH_SCALE}\"/>\n      </geometry>\n    </{kind}>\n",
    );
}

/// One link's meshes, already named and gathered for writing.
struct LinkEntry<'a> {
    name: String,
    visual: &'a TriMesh,
    collisions: Vec<&'a TriMesh>,
    mass: &'a MassProps,
}

struct JointEntry {
    name: String,
    parent: String,
    child: String,
    origin: Isometry3<f64>,
    axis: nalgebra::Vector3<f64>,
    limits_deg: (f64, f64),
}

fn gather(model: &HandModel) -> (Vec<LinkEntry<'_>>, Vec<JointEntry>) {
    let mut links = vec![LinkEntry {
        name: "palm".into(),
        visual: &model.palm_visual,
        collisions: model.palm_collision.iter().map(|p| p.mesh()).collect(),
        mass: &model.palm_mass,
    }];
    let mut joints = Vec::new();
    for (digit, chain) in &model.chains {
        let base_iso =
            Isometry3::from_parts(chain.base.origin.coords.into(), chain.base.rotation);
        for (i, link) in chain.links.iter().enumerate() {
            links.push(LinkEntry {
                name: format!("{digit}_link{i}"),
                visual: &link.mesh,
                collisions: vec![link.collider.mesh()],
                mass: &link.mass,
            });
        }
        for (i, joint) in chain.joints.iter().enumerate() {
            let (parent, origin) = match joint.parent {
                None => ("palm".to_string(), base_iso * joint.origin),
                Some(p) => (format!("{digit}_link{p}"), joint.origin),
            };
            joints.push(JointEntry {
                name: format!("{digit}_j{i}"),
                parent,
                child: format!("{digit}_link{}", joint.child),
                origin,
                axis: joint.spec.axis,
                limits_deg: joint.spec.limits_deg,
            });
        }
    }
    (links, joints)
}

fn validate(model: &HandModel, links: &[LinkEntry<'_>], joints: &[JointEntry]) -> Result<()> {
    if !model.palm_visual.watertight_check() {
        return Err(Error::Mesh("palm visual is not watertight".into()));
    }
    for link in links {
        for (k, mesh) in link.collisions.iter().enumerate() {
            if mesh.convexity_defect() > 1e-6 {
                return Err(Error::Mesh(format!(
                    "collision mesh {k} of link {} is not convex",
                    link.name
                )));
            }
        }
    }
    let mut names: Vec<&str> = links.iter().map(|l| l.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Mesh("duplicate link names".into()));
    }
    for j in joints {
        for end in [&j.parent, &j.child] {
            if !links.iter().any(|l| &l.name == end) {
                return Err(Error::Mesh(format!("joint {} references missing link {end}", j.name)));
            }
        }
    }
    Ok(())
}

/// Renders the URDF and writes it with all referenced meshes under `dir`
/// (`hand.urdf`, `meshes/visual/*.stl`, `meshes/collision/*.stl`).
/// Invariant violations abort before any file is written.
pub fn export(model: &HandModel, dir: &Path) -> Result<UrdfDocument> {
    let (links, joints) = gather(model);
    validate(model, &links, &joints)?;

    let mut xml = String::new();
    let mut mesh_files: Vec<String> = Vec::new();
    let mut writes: Vec<(String, &TriMesh)> = Vec::new();
    xml.push_str("<?xml version=\"1.0\"?>\n");
    let _ = writeln!(xml, "<robot name=\"{}\">", model.name);
    for link in &links {
        let _ = writeln!(xml, "  <link name=\"{}\">", link.name);
        let vis = format!("meshes/visual/{}.stl", link.name);
        geometry_block(&mut xml, "visual", &vis);
        writes.push((vis, link.visual));
        for (k, mesh) in link.collisions.iter().enumerate() {
            let col = format!("meshes/collision/{}_{k}.stl", link.name);
            geometry_block(&mut xml, "collision", &col);
            writes.push((col, mesh));
        }
        inertial_block(&mut xml, link.mass);
        xml.push_str("  </link>\n");
    }
    for j in &joints {
        let (lo, hi) = j.limits_deg;
        let _ = writeln!(
            xml,
            "  <joint name=\"{}\" type=\"revolute\">\n    {}\n    <parent link=\"{}\"/>\n    \
             <child link=\"{}\"/>\n    <axis xyz=\"{} {} {}\"/>\n    <limit lower=\"{}\" \
             upper=\"{}\" effort=\"{}\" velocity=\"{}\"/>\n  </joint>",
            j.name,
            origin_tag(&j.origin),
            j.parent,
            j.child,
            num(j.axis.x),
            num(j.axis.y),
            num(j.axis.z),
            num(lo.to_radians()),
            num(hi.to_radians()),
            num(JOINT_EFFORT),
            num(JOINT_VELOCITY),
        );
    }
    xml.push_str("</robot>\n");

    fs::create_dir_all(dir.join("meshes/visual"))?;
    fs::create_dir_all(dir.join("meshes/collision"))?;
    for (rel, mesh) in &writes {
        write_stl(mesh, &dir.join(rel))?;
        mesh_files.push(rel.clone());
    }
    fs::write(dir.join("hand.urdf"), &xml)?;
    Ok(UrdfDocument { xml, mesh_files })
}

/// Map from joint type to its limit range in degrees, for tests and
/// downstream consumers.
pub fn limits_for(jtype: JointType) -> (f64, f64) {
    jtype.limits_deg()
}
