//! Two-class kernel SVM trained by SMO, Platt calibration and grid-searched model selection.

mod grid;
mod kernel;
mod model;
mod platt;
mod smo;

pub use grid::{grid_search_cv, train_calibrated, CvCell, GridResult, GridSpec};
pub use kernel::{kernel_eval, KernelSpec};
pub use model::{Standardizer, SvmModel};
pub use platt::{platt_fit, PlattScaler};
pub use smo::{smo_train, smo_train_with_info, solve_dual, SmoParams, SolveInfo};
