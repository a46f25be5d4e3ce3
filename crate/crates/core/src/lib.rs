//! Bayesian parameter estimation for grey-box RC building thermal models.

pub mod advi;
pub mod autodiff;
pub mod density;
pub mod diagnostics;
pub mod filtering;
pub mod forecast;
pub mod io;
pub mod linalg;
pub mod nuts;
pub mod samples;
pub mod synthetic;
pub mod thermal;
