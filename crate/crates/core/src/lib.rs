//! Few-photon Fock-space simulation of linear-optical hyperentanglement
//! concentration and purification over polarization and spatial modes.

pub mod analysis;
pub mod circuits;
pub mod elements;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod measurement;
pub mod montecarlo;
pub mod protocols;
pub mod verify;

pub use error::{Error, Result};
