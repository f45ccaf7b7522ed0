//! Causal discovery for multivariate stochastic processes.
//!
//! The crate is organised bottom-up:
//!
//! * [`paths`]: sampled continuous paths, interval restriction with rebasing,
//!   time augmentation and missingness;
//! * [`graph`]: dependence graphs with loops, the lifted past/future graph,
//!   d-separation, Meek rules, DAG to MAG projection and SHD;
//! * [`sde`]: seeded Euler–Maruyama simulation of the benchmark families;
//! * [`kernel`]: signature kernels via the Goursat PDE and a truncated
//!   signature oracle;
//! * [`ci`]: HSIC, SDCIT and KCIPT permutation tests on Gram matrices;
//! * [`discovery`]: the CI relations on path segments and the discovery
//!   algorithms, run against data or a d-separation oracle;
//! * [`bench`]: experiment configuration, benchmark sweeps and reports.

pub mod bench;
pub mod ci;
pub mod discovery;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod paths;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
