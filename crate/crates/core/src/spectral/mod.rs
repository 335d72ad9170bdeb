//! Periodic grids, spectral transforms and Fourier-multiplier operators.

mod field;
mod grid;
mod montecarlo;
mod multiplier;
mod semigroup;

pub(crate) use field::truncate_to_band;
pub use field::{dealiased_product, ScalarField, TrigMode, TrigSeries, VectorField};
pub use grid::{Grid, MAX_DIM};
pub use montecarlo::{
    mc_expectation, mc_semigroup, CauchySampler, Interpolant, McEstimate, OffGrid, MIN_SAMPLES,
};
pub(crate) use multiplier::derivative_symbol;
pub use multiplier::{
    apply_multiplier, box_op, curl_sup, divergence, gradient, half_laplacian, MultiplierOp,
};
pub use semigroup::{
    carre_du_champ, cauchy_semigroup, shifted_propagator, shifted_propagator_piecewise,
    PropagatorSegment,
};

/// `transform_forward`: unnormalized spectral coefficients of a field.
pub fn transform_forward(f: &ScalarField) -> Vec<num_complex::Complex64> {
    f.spectral().to_vec()
}

/// `transform_inverse`: field whose coefficients are `c` (real part kept).
pub fn transform_inverse(
    c: &[num_complex::Complex64],
    grid: &Grid,
) -> crate::error::Result<ScalarField> {
    ScalarField::from_spectral(grid, c)
}
