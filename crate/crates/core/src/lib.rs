//! Design and verification toolkit for periodic domains whose Neumann-Laplacian
//! spectrum has prescribed gaps.
//!
//! The domain family is built by removing periodically repeated "trap" screens
//! (box boundaries with a small hole) from the plane. Two complementary halves:
//!
//! - **Closed-form design** ([`limits`], [`geometry`]): given target gap
//!   intervals, compute hole constants and trap volumes whose limit spectrum
//!   realizes exactly those gaps, and lay out the traps inside the unit cell.
//! - **Numerical verification** ([`mesh`], [`fem`], [`bands`]): triangulate the
//!   slit cell, solve the Neumann / Dirichlet / periodic / antiperiodic
//!   eigenproblems, and certify the gaps of the physical spectrum together
//!   with their convergence toward the designed endpoints.
//!
//! File formats (JSON documents, the mesh text format, CSV tables) live in
//! [`formats`].

// Validation code spells guards as `!(x > 0.0)` so that NaN inputs are
// rejected along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Frozen oracle constants are written with all 17 digits on purpose.
#![allow(clippy::excessive_precision)]

pub mod bands;
pub mod fem;
pub mod formats;
pub mod geometry;
pub mod limits;
pub mod mesh;

pub use bands::{band_enclosures, convergence_study, gap_report, physical_spectrum, BandStructure};
pub use geometry::{boxes_from_volumes, build_cell, validate_conditions, BoxFamily, CellGeometry};
pub use limits::{
    inverse_design, sigma_from_design, solve_mu, DesignParams, GapTargets, LimitSpectrum,
};
pub use mesh::{triangulate, Mesh};
