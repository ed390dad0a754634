//! Equivariant maximal surfaces in anti-de Sitter 3-space built from regular
//! meromorphic quadratic differentials, studied one puncture end at a time.
//!
//! The crate is organised along the pipeline:
//!
//! * [`adscore`]: the (2,2) forms, the boundary torus and the achronality test.
//! * [`qdiff`]: the end chart, the pulled-back differential and the background metric.
//! * [`vortex`]: the Gauss/vortex equation on a periodic cylinder grid.
//! * [`frame`]: frame-field integration, embedding and holonomy.
//! * [`horo`]: the closed-form horospherical surface.
//! * [`classify`]: residue-driven predictions (eigenvalues, lengths, saw-teeth, decorations).
//! * [`gauss`]: shape operator, induced metrics and curvature checks.
//!
//! [`config`], [`pipeline`], [`export`] and [`verify`] support the command-line driver.

pub mod adscore;
mod banded;
pub mod classify;
pub mod config;
pub mod export;
pub mod frame;
pub mod gauss;
pub mod horo;
pub mod pipeline;
pub mod qdiff;
pub mod verify;
pub mod vortex;
