//! Radial bodies in the model spaceforms, their curvature, normal
//! variations of area and volume, and lens enclosure.

pub mod body;
pub mod curvature;
pub mod enclosure;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod scalar;
pub mod spaceform;
pub mod variation;

pub use error::{GeomError, Result};
pub use scalar::Real;
pub use spaceform::SpaceformKind;

pub type Point64 = spaceform::Point<f64>;
pub type TangentVector64 = spaceform::TangentVector<f64>;
pub type SphereGrid64 = grid::SphereGrid<f64>;
pub type RadialBody64 = body::RadialBody<f64>;
pub type CurvatureReport64 = curvature::CurvatureReport<f64>;
pub type VariationField64 = variation::VariationField<f64>;
pub type LensSpec64 = enclosure::LensSpec<f64>;

pub type Point32 = spaceform::Point<f32>;
pub type SphereGrid32 = grid::SphereGrid<f32>;
pub type RadialBody32 = body::RadialBody<f32>;
