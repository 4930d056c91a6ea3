//! `generate`: assemble one design and export URDF + meshes.

use std::path::{Path, PathBuf};

use gripgen::space::{build_power_grasp_space, DesignPoint};
use gripgen::urdf;

use crate::design::DesignFile;
use crate::error::{config_err, CliError, CliResult};

pub fn cmd_generate(
    seed: Option<u64>,
    design: Option<&Path>,
    out: Option<&Path>,
    resolution: usize,
) -> CliResult<()> {
    let space = build_power_grasp_space();
    let (point, default_out) = match (design, seed) {
        (Some(_), Some(_)) => {
            return config_err("pass either --design or --seed, not both");
        }
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let point: DesignPoint = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("malformed design file: {e}")))?;
            space.validate(&point).map_err(|e| CliError::Config(e.to_string()))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            (point, PathBuf::from(format!("hand_{}", stem.unwrap_or_else(|| "design".into()))))
        }
        (None, seed) => {
            let s = seed.unwrap_or(0);
            (space.sample_uniform(s), PathBuf::from(format!("hand_seed{s}")))
        }
    };

    // Assemble fully before touching the filesystem so a bad design
    // leaves no partial output.
    let design_file = DesignFile { point, resolution, score: None, trial: None };
    let hand = design_file.assemble()?;
    let out_dir = out.map(Path::to_path_buf).unwrap_or(default_out);
    let doc = urdf::export(&hand, &out_dir).map_err(|e| CliError::Internal(e.to_string()))?;
    design_file.write(&out_dir)?;

    println!("exported {}", out_dir.display());
    println!("parameters ({}):", design_file.point.values.len());
    for (name, value) in &design_file.point.values {
        println!("  {name} = {value}");
    }
    let triangles: usize = hand.palm_visual.triangles.len()
        + hand
            .chains
            .iter()
            .flat_map(|(_, c)| c.links.iter())
            .map(|l| l.mesh.triangles.len())
            .sum::<usize>();
    println!(
        "links: {}, joints: {}, meshes: {}, visual triangles: {}",
        hand.chains.iter().map(|(_, c)| c.links.len()).sum::<usize>() + 1,
        hand.joint_count(),
        doc.mesh_files.len(),
        triangles,
    );
    Ok(())
}
