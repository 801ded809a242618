pub mod chrono;
pub mod cli;
pub mod error;
pub mod perturb;
pub mod polyalg;
pub mod reach;
pub mod seeding;
pub mod stats;
pub mod sysparse;
pub mod system;

pub use error::{Error, Result};
