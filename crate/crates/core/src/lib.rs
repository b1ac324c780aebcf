//! Chemical species tomography with hybrid-size meshing.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds parallel-beam layouts and computes exact chord lengths
//!   of finite beam segments through rectangles and convex polygons.
//! * [`meshing`] pixelates the region of sensing either uniformly or with a
//!   two-level hybrid scheme (fine pixels in the region of interest, coarse
//!   pixels outside), and derives pixel adjacency.
//! * [`sensing`] assembles the dense chord-length sensing matrix and analyses
//!   its singular value spectrum.
//! * [`phantom`] generates high-resolution concentration fields, projects them
//!   to integrated absorbances and injects measurement noise.
//! * [`solvers`] reconstructs per-pixel absorption densities with Tikhonov,
//!   ART and total-variation solvers.
//! * [`experiment`] scores reconstructions, runs regularization sweeps and
//!   compares meshing schemes.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel` feature
//! (default) they run on rayon, otherwise sequentially.

pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod export;
pub mod geometry;
pub mod meshing;
pub mod phantom;
pub mod sensing;
pub mod solvers;

pub use error::{CstError, Result};
pub use exec::Exec;
pub use geometry::{Beam, BeamLayout, ConvexPolygon, Point};
pub use meshing::{AdjacencyGraph, Mesh, Pixel, Rect, Region};
pub use sensing::{DenseMatrix, SensingMatrix, SvdSpectrum};
