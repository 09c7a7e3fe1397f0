//! Level sets of `|H(t, f)|`, the area rule and WKB singular functions.

mod contour;
mod grid;
mod quantize;
mod synth;
mod theorem1;
mod turning;
mod wigner;

pub use contour::{
    extract_level_set, point_in_polygon, signed_polygon_area, total_area, Bubble, TurningKind, TurningPoint,
};
pub use grid::{freq_axis, magnitude_grid, magnitude_grid_with, time_axis, Axis, TFGrid, DEFAULT_OVERSAMPLE};
pub use quantize::{
    per_bubble_count, quantized_levels, quantized_levels_per_bubble, quantized_levels_with, AreaFunction, AreaMode,
    QuantizedLevel,
};
pub use synth::{
    right_from_left, synthesize_eigenfunction, synthesize_with, Component, EigenfunctionModel, SynthesisOptions,
};
pub use theorem1::{theorem1_sigmas, theorem1_solution, ClosedFormTriple};
pub use turning::{turning_points, turning_points_with, PowerGradient};
pub use wigner::{energetic_deviation, wigner_symbol, IMAG_TOLERANCE};
