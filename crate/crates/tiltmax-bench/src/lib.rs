//! Shared fixtures for the criterion benches.

use tiltmax_core::spectral::{CovKernel, GaussianSpectral, SpectralModel};
use tiltmax_core::Grid;

pub fn fbm_model() -> SpectralModel {
    SpectralModel::fbm(1.0).expect("valid index")
}

/// Rank-one model `Z(t) = sqrt(2) t xi - t^2`.
pub fn parabola_model() -> SpectralModel {
    SpectralModel::Gaussian(GaussianSpectral::new(CovKernel::Monomial {
        power: 1.0,
        scale: 2.0,
    }))
}

pub fn grid_1d(n: usize) -> Grid {
    let coords: Vec<f64> = (0..n).map(|i| i as f64 * 0.25).collect();
    Grid::from_coords_1d(&coords).expect("valid grid")
}
