//! Tracy–Widom GOE and Airy₁ numerics: Airy function, Gauss–Legendre
//! rules and Nyström-discretised Fredholm determinants.

pub mod airy;
pub mod airy1;
pub mod fredholm;
pub mod quadrature;

pub use airy::airy_ai;
pub use airy1::{airy1_joint_cdf, g1, g1_curve, Airy1Joint, CovarianceGrid, TheoryCurve};
pub use fredholm::{
    tw_goe_cdf, tw_goe_density, tw_goe_moments, tw_goe_moments_with, tw_goe_table, FourMoments,
    GoeFredholm, KernelMatrix,
};
pub use quadrature::{gauss_legendre, Quadrature};
