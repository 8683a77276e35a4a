//! Discrete path space: time grids, piecewise-linear paths, the `d_∞`
//! pseudo-metric, stopping, controls, concatenation and rescaling on `[0, 1]`,
//! and action quadrature.

mod grid;
mod io;
mod ops;
mod path;

pub use grid::{GridSpec, TimeGrid};
pub use io::{format_f64, load_path, read_path_csv, save_path, write_path_csv};
pub use ops::{action, apply_control, concat_scaled, dinf_distance, rescale_lagrangian, rescale_path, stop_path, Control};
pub use path::DiscretePath;


pub(crate) use grid::is_close;
