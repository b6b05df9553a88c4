//! Periodic solutions of the planar relativistic Kepler problem
//!
//! ```text
//! d/dt (m ẋ / √(1 − |ẋ|²/c²)) = −α x/|x|³ + ∇U(t, x)
//! ```
//!
//! in closed form (circular and rosette orbits), by numerical integration,
//! and by direct minimization of the discrete action over loops of fixed
//! winding number.

pub mod circular;
pub mod dynamics;
pub mod error;
pub mod forcing;
pub mod linalg;
pub mod loops;
pub mod morse;
pub mod physics;
pub mod quad;
pub mod rosette;
pub mod spectral;
pub mod varsolver;
pub mod vec2;

pub use error::{Error, Result};
pub use forcing::{FnPotential, ForcedPotential, HarmonicForcing};
pub use loops::{ActionBreakdown, Loop};
pub use physics::{EnergyMomentum, Orientation, PhysicalParams, ProblemSpec};
pub use vec2::{Mat2, Vec2};
