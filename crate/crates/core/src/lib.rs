//! Bandwidth-dependent kernels for bias reduction in kernel density estimation.
//!
//! A kernel of order `s` applied at bandwidth `h` leaves an L1 bias of order `hˢ`.
//! Letting the kernel itself depend on `h` as `K_h = K₍₀₎ + hᵃ K₍ₛ₎`, where
//! `K₍₀₎` has vanishing moments `1..=s` and `K₍ₛ₎` carries a unit `s`-th moment,
//! keeps the kernel of order `s` but drives its `s`-th moment to zero with `h`,
//! which lowers the bias to `o(hˢ)` in general and `O(h^{s+a})` for densities whose
//! `s`-th derivative has an `a`-Hölder L1 modulus.
//!
//! The crate builds those kernels ([`construct`]), evaluates estimators with them
//! ([`estimator`]), and measures bias and variation rates numerically
//! ([`quadrature`], [`experiments`]).
//!
//! ```
//! use bwkde::{Kernel, KernelPair};
//!
//! let pair = KernelPair::construct(&Kernel::gaussian(), 2).unwrap();
//! let family = pair.family(1.0).unwrap();
//! let k = family.at(0.25).unwrap();
//! assert!((k.moment(0).unwrap() - 1.0).abs() < 1e-12);
//! assert!((k.moment(2).unwrap() - 0.25).abs() < 1e-12);
//! ```

pub mod construct;
pub mod densities;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod kernel;
mod linalg;
mod poly;
pub mod quadrature;
pub mod rate;

pub use construct::{BandwidthKernelFamily, KernelPair, MomentMatrix, PairDocument};
pub use densities::{catalog, density_by_name, DensityModel, LipschitzWitness};
pub use error::{Error, Result};
pub use estimator::{FittedEstimator, GridSpec};
pub use experiments::{ExperimentConfig, RunSummary};
pub use kernel::{Kernel, MomentProfile, OrderStatus, Profile};
pub use quadrature::{QuadratureSpec, Truncation};
pub use rate::{fit_rate, RateReport};
