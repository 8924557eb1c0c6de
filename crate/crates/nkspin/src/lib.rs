//! Spin and optical manipulation of non-Kramers rare-earth ions.
//!
//! The crate models a half-integer nuclear spin subject to a quadrupole
//! interaction and a weak Zeeman field. Each electronic level splits into
//! doublets; two doublets coupled by an RF or optical field form the
//! four-level problem that the dynamics modules build on.
//!
//! Units: MHz for quadrupole energies, kHz for splittings and Rabi
//! frequencies, mT for fields and μs for time. Angular frequencies only
//! appear inside exponents, see [`linalg::ang`].

pub mod afc;
pub mod drive;
pub mod echo;
pub mod fixture;
pub mod levels;
pub mod linalg;
pub mod odnmr;
pub mod pulse;
pub mod spectrum;
pub mod spin;

pub use linalg::C64;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
