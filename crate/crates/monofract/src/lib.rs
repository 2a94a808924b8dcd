//! Numerical toolkit for boundary-value analysis on rough, box-built surfaces.
//!
//! The crate bundles five cooperating pieces:
//!
//! * [`clifford`] — dense multivectors for Cl(n), paravectors, the
//!   Cauchy-Riemann operator and its fundamental solution;
//! * [`surface`] — a family of fractal surfaces assembled from dyadic slabs
//!   glued onto a cube, plus a generic box-union surface for calibration,
//!   with exact point/box distance queries;
//! * [`grid`] — dyadic-grid box counting, Minkowski-dimension regression and
//!   Whitney decompositions of the surface complement;
//! * [`marcinkiewicz`] — distance-integral convergence verdicts and
//!   divergence-exponent estimation by bisection;
//! * [`analysis`] — Whitney extension of boundary data, the Teodorescu
//!   transform over a decomposed domain, and the jump-problem solver built
//!   from the two.
//!
//! Everything is deterministic given explicit seeds; the heavy loops
//! (counting, decomposition, quadrature) parallelise with rayon and respect
//! `RAYON_NUM_THREADS`.

// House style: `j` ranges over coordinate axes and usually indexes several
// parallel per-axis structures at once, where zipped iterators obscure the
// geometry.
#![allow(clippy::needless_range_loop)]
// Validation guards are written `!(x > 0.0)` deliberately: the negation
// rejects NaN along with the out-of-range values, which `x <= 0.0` would
// silently admit.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod clifford;
pub mod error;
pub mod geom;
pub mod grid;
pub mod marcinkiewicz;
pub mod surface;

pub use error::{Error, Result};
