//! Certified bounds on the relative entropy of quantum channels.
//!
//! For completely positive maps `N`, `M` with Choi matrices `Γ^N`, `Γ^M`,
//! [`bounds::sandwich`] returns a lower and an upper bound on
//! `D(N‖M) = sup_ρ D((id⊗N)(ρ) ‖ (id⊗M)(ρ))` whose gap is driven below a
//! requested tolerance. Both bounds come from semidefinite programs built on
//! a piecewise discretization of the integral representation
//!
//! `D(ρ‖σ) = tr[ρ−σ] + ∫_μ^λ ds/s · tr[(sσ − ρ)₊] + const`,
//!
//! and are solved by the dense interior-point method in [`sdp`].
//! [`resource`] minimizes the divergence over SDP-representable sets of free
//! channels and [`oracle`] holds independent reference computations.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod oracle;
pub mod resource;
pub mod sdp;
pub mod spectral;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
