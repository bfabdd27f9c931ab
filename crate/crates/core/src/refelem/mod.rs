//! Reference simplex: polynomial forms, quadrature, elements, pullbacks.

pub mod element;
pub mod form;
pub mod poly;
pub mod pullback;
pub mod quadrature;

pub use element::{reference_element, space_dimension, Family, ReferenceElement, Tabulation};
pub use form::{FormField, FormValue};
pub use poly::{Poly, PolyForm};
pub use pullback::{compound, pullback, pullback_coeffs, pushforward_coeffs};
pub use quadrature::{quadrature, QuadratureRule, MAX_QUADRATURE_DEGREE};
