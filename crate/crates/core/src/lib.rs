//! Nonconforming virtual element method for the 2D Poisson problem on
//! polygonal meshes, with a family of interchangeable stabilization
//! bilinear forms built in the dual of the local space.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! mesh  ->  poly  ->  vem (projectors, assembly, solve, errors)
//!                 ->  stab (dual-space stabilizations S1..S5)
//!                 ->  wavelet (periodic FWT backing S5)
//! oracle      independent brute-force references used by the tests
//! experiment  mesh-family sweeps, error tables, CSV/JSON reports
//! ```
//!
//! See the `book/` guide at the repository root for worked examples; its
//! code snippets are compiled as doctests through [`guide`].

pub mod experiment;
pub mod guide;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod poly;
pub mod stab;
pub mod vem;
pub mod wavelet;

pub use mesh::{ElementGeometry, MeshStats, PolygonalMesh};
pub use stab::StabKind;
