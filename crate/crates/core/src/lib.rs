//! Private information retrieval from `N` replicated databases when the user
//! already holds `M` messages it prefetched from those same databases, each
//! database knowing only the messages it supplied.
//!
//! The crate builds the capacity-achieving retrieval scheme for uniform
//! prefetching (`M / N` messages from every database), runs it end to end
//! over GF(2^w) with a systematic MDS layer, and audits privacy, reliability
//! and download cost.
//!
//! ```
//! use pir_prefetch::{combinatorics, engine, scheme};
//!
//! let cost = combinatorics::optimal_cost(2, 4, 2).unwrap();
//! assert_eq!(cost.to_string(), "3/2");
//!
//! let plan = scheme::uniform_prefetch(2, 4, 2, 7).unwrap();
//! let desired = (0..4).find(|&k| !plan.is_cached(k)).unwrap();
//! let config = engine::SystemConfig::new(2, 4, 2, 7).unwrap();
//! let store = engine::MessageStore::random(&config, 11);
//! let transcript = engine::run_retrieval(&config, &plan, desired, &store, 7).unwrap();
//! assert_eq!(transcript.decoded, store.message(desired));
//! assert_eq!(transcript.normalized_cost(), cost);
//! ```

pub mod audit;
pub mod combinatorics;
pub mod engine;
pub mod error;
pub mod exec;
pub mod gf;
pub mod scheme;

pub use combinatorics::{Rational, SchemeCounts};
pub use error::{Error, Result};
pub use exec::Execution;
