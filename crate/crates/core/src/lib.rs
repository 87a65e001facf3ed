//! Simulator for a three-party quantum key agreement ring built on Bell
//! states, with an adversary framework for external eavesdroppers and for two
//! insiders colluding against the third.
//!
//! ```
//! use qka_core::protocol::{run_session, SessionConfig};
//!
//! let result = run_session(&SessionConfig::new(8, 42)).unwrap();
//! assert!(result.agreed());
//! assert_eq!(result.keys().unwrap().a, result.honest_key());
//! ```

pub mod adversary;
pub mod bits;
pub mod experiment;
pub mod protocol;
pub mod quantum;

pub use bits::BitString;
