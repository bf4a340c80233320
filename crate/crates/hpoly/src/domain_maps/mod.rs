//! Strongly pseudoconvex domains in ℂ²: defining functions, the Levi
//! polynomial, Fefferman's measure and the local maps onto `S_λ`.

mod darboux;
mod fefferman;
mod levi;
mod rho;

pub use darboux::{
    contact_check, convexify, straighten_flow, theta_composite, ContactCheck, ConvexifiedRho, Convexification,
    NormalizedRho, OdeSpec, PiEval, CONTACT_FD_STEP,
    StraightenFlow, ThetaMap, ThetaProbe, ThetaSpec, NORMALIZATION_TOL,
};
pub use fefferman::{
    fefferman_density, fefferman_integral, lambda_q, star_boundary_point, FeffermanQuadrature, FeffermanResult,
    Parametrization,
};
pub use levi::{
    cauchy_leray, cauchy_leray_model, levi_lower_bound_probe, levi_polynomial, m_determinant, BoundaryFrame,
    LeviProbe, BOUNDARY_TOL,
};
pub use rho::{
    complex_parts, from_r4, to_r4, DefiningFunction, FiniteDifference, Monomial, PolynomialRho, QuadraticRho,
    Scaled, C2, DEFAULT_FD_STEP, R4,
};
