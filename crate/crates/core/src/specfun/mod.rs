//! Standard-normal special functions and Gaussian quadrature.
//!
//! All functions are pure and thread-safe.

mod normal;
mod quadrature;

pub use normal::{
    inverse_mills, pdf as std_normal_pdf, std_normal_cdf, std_normal_quantile, std_normal_sf,
    FRAC_1_SQRT_2PI, LN_SQRT_2PI,
};
pub use quadrature::{gauss_integral, QuadratureRule, DEFAULT_HERMITE_ORDER, PANEL_ORDER};

pub(crate) use normal::{cdf, inv_mills, inv_mills_excess, log_sf, quantile, sf};
