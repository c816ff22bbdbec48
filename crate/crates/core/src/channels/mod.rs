//! Channel laws, samplers and eigenvalue densities of `H H†`.

mod density;
mod descriptor;
mod law;

pub use density::{
    empirical_density, onoff_density, wishart_density, EigDensity, EmpiricalDensity, PointMasses,
    WishartDensity,
};
pub use descriptor::{matrix_from_json, matrix_to_json, Entry, LawDescriptor, MatrixJson};
pub(crate) use law::cgauss;
pub use law::{
    haar_unitary, ChannelLaw, Interpolated, Kronecker, MatrixGaussian, Mixture, OnOff, PointMass,
};
