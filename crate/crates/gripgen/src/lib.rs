//! Procedural robotic hand co-design toolkit.
//!
//! The crate covers the full loop: a mixed continuous/categorical design
//! space ([`space`]), parametric palm/finger/surface generation into
//! triangle meshes ([`palm`], [`finger`], [`surface`], [`mesh`]), URDF/STL
//! export ([`hand`], [`urdf`], [`stl`]), quasi-static grasp stability
//! scoring via friction-cone linear programs ([`tools`], [`grasp`],
//! [`lp`]), a Tree-structured Parzen Estimator for black-box search
//! ([`tpe`]), and a Random-Forest + Shapley-value surrogate analysis of
//! the optimization history ([`forest`], [`shap`]).

pub mod error;
pub mod finger;
pub mod forest;
pub mod geom;
pub mod grasp;
pub mod hand;
pub mod lp;
pub mod mesh;
pub mod oracles;
pub mod palm;
pub mod shap;
pub mod space;
pub mod stl;
pub mod surface;
pub mod tools;
pub mod tpe;
pub mod urdf;

pub use error::Error;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Print-material density used for all mass properties, kg/mm^3
/// (1.15 g/cm^3, typical printed nylon).
pub const DENSITY: f64 = 1.15e-6;
