//! Smoothed and reassigned Wigner-Ville distributions of sampled signals and
//! their comparison with predicted level curves and amplitudes.

mod compare;
mod distribution;

pub use compare::{
    compare_amplitude, compare_ridge_to_bubble, compare_ridge_to_bubbles, dominant_bubble, hull_area, pearson, ridge_extract,
    AmplitudeMetrics, AmplitudeMode, AmplitudeOptions, Ridge, RidgeMetrics, WeightedPoint,
};
pub use distribution::{
    analytic_signal, gaussian_window, Boundary, reassign, rspwvd, spwvd, spwvd_with, wvd, SpwvdOptions, TFDistribution,
    TfdKind, Windows, WINDOW_EDGE,
};

use crate::error::Result;
use std::io::{Read, Write};

/// Binary grid container; the kind travels in the container's tag. Window
/// metadata is not stored.
pub fn write_distribution(w: &mut impl Write, d: &TFDistribution) -> Result<()> {
    crate::io::write_tf_grid(w, &d.grid, d.kind.tag())
}

pub fn read_distribution(r: &mut impl Read) -> Result<TFDistribution> {
    let (grid, tag) = crate::io::read_tf_grid(r)?;
    Ok(TFDistribution {
        grid,
        kind: TfdKind::from_tag(tag)?,
        windows: None,
        analytic: false,
        boundary: Boundary::Periodic,
    })
}

/// `t,f,value` rows.
pub fn distribution_csv(d: &TFDistribution) -> String {
    crate::io::tf_grid_csv(&d.grid)
}
