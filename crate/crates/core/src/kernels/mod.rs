//! Special functions and the Sobolev (Matérn) kernel.

mod bessel;
mod sobolev;

pub use bessel::{bessel_k, BesselK};
pub use sobolev::{matern_phi, KernelEval, SobolevKernel, MIN_SMOOTHNESS};
