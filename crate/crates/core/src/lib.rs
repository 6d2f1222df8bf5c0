//! Quasi-spherical zero-scalar-curvature extensions of convex Bartnik data.
//!
//! Given a strictly convex surface of revolution and a positive function `u0`
//! on it, [`evolution`] marches the quasi-spherical parabolic equation
//! outward along the parallel-surface foliation, [`mass`] tracks the two
//! monotone mass functionals that bracket the total mass, and [`bartnik`]
//! finds the critical scaling `mu0` at which the extension of `(surface, mu H)`
//! has zero total mass.

pub mod bartnik;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod geometry;
pub mod mass;
pub mod oracle;

pub use error::{Error, Result};
