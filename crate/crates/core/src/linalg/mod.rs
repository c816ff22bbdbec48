//! Complex dense linear algebra and the special functions used by the
//! capacity solvers.

mod decomp;
mod matrix;
pub mod quad;
mod special;

pub use decomp::{chol_upper, herm_eig, log_det_plus, psd_sqrt, svd, ut_gram, Eigen, Svd};
pub(crate) use decomp::{ln_det_pd, log_det_plus_factored};
pub use matrix::{ComplexMatrix, HermitianMatrix, UpperTriangular};
pub(crate) use special::ln_factorial;
pub use special::{exp_expint, expint_gamma0, upper_gamma_int};

pub use num_complex::Complex64;
