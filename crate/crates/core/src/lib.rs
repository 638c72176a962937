//! Lipschitz calibrated subactions for hyperbolic maps, computed with a
//! discrete Lax-Oleinik operator, together with the quantitative shadowing
//! machinery (adapted charts, graph transforms, periodic shadowing) needed to
//! bound the distortion constant.

pub mod charts;
pub mod error;
pub mod laxoleinik;
pub mod linalg;
pub mod orbits;
pub mod roots;
pub mod scalar;
pub mod shadowing;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;
