//! Observables built from magnetization samples: cumulants with batch
//! errors, densities, structure functions and covariance curves.

mod density;
mod drift;
mod moments;
mod rescale;
mod structure;

pub use density::{binned_density, DensityRow, RawHistogram, RESCALED_BIN_WIDTH};
pub use drift::{finite_size_drift, DriftFit};
pub use moments::{
    CumulantErrors, CumulantSet, Cumulants, MomentAccumulator, MomentSample, PowerSums, MIN_BATCHES,
};
pub use rescale::{rescale, Rescaling};
pub use structure::{
    default_max_lag, plateau_window, CovarianceCurve, CovarianceRow, PlateauEstimate,
    StructureFunctionAccumulator, StructureRow,
};
