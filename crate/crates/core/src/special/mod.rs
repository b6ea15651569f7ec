//! Special functions used by the angular expansions: Legendre and
//! Gegenbauer polynomials, spherical harmonics and Wigner 3j symbols.

mod gegenbauer;
mod harmonics;
mod legendre;
mod wigner;

pub use gegenbauer::{gegenbauer, gegenbauer_at_one, GegenbauerTable, COEFF_LIMIT};
pub use harmonics::{
    direction_angles, normalized_associated_legendre, spherical_harmonic, spherical_harmonic_standard, yn0_limit,
    yn0_weighted_integral, SphereRule, SQRT_4PI,
};
pub use legendre::{legendre, legendre_all, legendre_monomial_coefficients, legendre_real};
pub use wigner::{ln_factorial, mu_constant, wigner3j, Wigner3j};
