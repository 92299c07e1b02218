//! Base kernels, Fourier constants and synthesis of the deconvolution kernel.

mod constants;
mod fft;
mod kernel;
mod table;

pub use constants::{kernel_constants, KernelConstants};
pub use kernel::{BaseKernel, KernelSpec};
pub use table::{
    build_deconv_kernel, build_deconv_kernel_auto, default_resolution, DeconvKernelTable, SynthesisPlan, Synthesis,
    TableDump, TableWindow, BAND_EDGE_TOL, BOUNDARY_TOL, INTERP_TOL, MAX_DIM, RESIDUAL_TOL,
};
