//! Bit-exact binary STL I/O.
//!
//! Layout: 80-byte header, little-endian u32 triangle count, then 50 bytes
//! per facet (f32 normal, three f32 vertices, u16 attribute = 0). Facet
//! normals are computed from the f32-narrowed vertices so that
//! write -> read -> write reproduces files byte-identically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::mesh::TriMesh;
use crate::{Error, Result};

const HEADER: &[u8; 80] = &{
    let mut h = [0u8; 80];
    let tag = b"binary stl";
    let mut i = 0;
    while i < tag.len() {
        h[i] = tag[i];
        i += 1;
    }
    h
};

pub fn write_stl(mesh: &TriMesh, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_stl_to(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_stl_to<W: Write>(mesh: &TriMesh, w: &mut W) -> Result<()> {
    w.write_all(HEADER)?;
    let count = u32::try_from(mesh.triangles.len())
        .map_err(|_| Error::Mesh("too many triangles for STL".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for t in 0..mesh.triangles.len() {
        let pts = mesh.tri_points(t);
        // Narrow first; the normal must be a pure function of the stored
        // f32 coordinates for byte-exact round trips.
        let narrowed: Vec<Point3<f64>> = pts
            .iter()
            .map(|p| Point3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64))
            .collect();
        let n = (narrowed[1] - narrowed[0]).cross(&(narrowed[2] - narrowed[0]));
        let n = if n.norm() > 0.0 { n.normalize() } else { Vector3::zeros() };
        for v in [n.x, n.y, n.z] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        for p in &narrowed {
            for v in [p.x, p.y, p.z] {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        w.write_all(&0u16.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_stl(path: &Path) -> Result<TriMesh> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    read_stl_from(&mut r)
}

pub fn read_stl_from<R: Read>(r: &mut R) -> Result<TriMesh> {
    let mut header = [0u8; 80];
    r.read_exact(&mut header).map_err(|_| Error::Mesh("truncated STL header".into()))?;
    let mut count_buf = [0u8; 4];
    r.read_exact(&mut count_buf).map_err(|_| Error::Mesh("truncated STL count".into()))?;
    let count = u32::from_le_bytes(count_buf) as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * 50 {
        return Err(Error::Mesh(format!(
            "STL size mismatch: {} facets declared, {} payload bytes",
            count,
            payload.len()
        )));
    }
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles = Vec::with_capacity(count);
    // Dedupe bit-identical vertices so connectivity checks work on read
    // meshes.
    let mut seen: std::collections::HashMap<[u32; 3], u32> = std::collections::HashMap::new();
    for f in 0..count {
        let base = f * 50 + 12; // skip the stored normal
        let mut tri = [0u32; 3];
        for k in 0..3 {
            let off = base + k * 12;
            let bits = [
                u32::from_le_bytes(payload[off..off + 4].try_into().unwrap()),
                u32::from_le_bytes(payload[off + 4..off + 8].try_into().unwrap()),
                u32::from_le_bytes(payload[off + 8..off + 12].try_into().unwrap()),
            ];
            let idx = *seen.entry(bits).or_insert_with(|| {
                let p = Point3::new(
                    f32::from_bits(bits[0]) as f64,
                    f32::from_bits(bits[1]) as f64,
                    f32::from_bits(bits[2]) as f64,
                );
                vertices.push(p);
                (vertices.len() - 1) as u32
            });
            tri[k] = idx;
        }
        triangles.push(tri);
    }
    TriMesh::new(vertices, triangles)
}
