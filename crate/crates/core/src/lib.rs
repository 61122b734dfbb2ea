//! Heat flow on networks of rods by the unified transform method.

pub mod error;
pub mod expr;
pub mod quadrature;
pub mod special;
pub mod transforms;
pub mod network;
pub mod dtn;
pub mod zeros;
pub mod field;
pub mod contour;
pub mod catalog;
pub mod fdm;
