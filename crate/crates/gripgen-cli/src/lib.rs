//! Command-line pipeline tying hand generation, grasp evaluation, design
//! optimization, and surrogate analysis into persistent, resumable run
//! directories.
//!
//! Run layout: `runs/<name>/{config.json, trials.jsonl, curve.csv,
//! designs/<id>/{design.json, hand.urdf, meshes/**},
//! report/{shap.csv, importance.csv, shap_long.csv}}`.

pub mod analyze;
pub mod config;
pub mod design;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod journal;
pub mod run;
