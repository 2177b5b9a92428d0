//! Growable approximate membership filters.
//!
//! * [`tbf::Tbf`]: a stack of split block Bloom filters that grows by
//!   appending levels of doubling capacity and shrinking error targets.
//! * [`tcf::Tcf`]: a cuckoo filter that doubles in place. Each slot keeps a
//!   few unpermuted hash bits (the tail) that are spent as the table grows,
//!   so growth does not raise the false positive rate for a while.
//! * [`mtcf::Mtcf`]: the same idea split into 32 levels that double one at a
//!   time, so allocation grows in roughly 3% steps instead of by 2x.
//!
//! Both cuckoo variants can be frozen into a smaller read-only form and
//! thawed back. [`persistence`] saves and loads every form, and the
//! [`oracle`] module checks filters against an exact set.
//!
//! ```
//! use taffy_filters::filter::{GrowableFilter, Membership};
//! use taffy_filters::tcf::Tcf;
//!
//! let mut f = Tcf::new(42);
//! for key in 0..10_000u64 {
//!     f.insert_u64(key).unwrap();
//! }
//! assert!((0..10_000u64).all(|k| f.contains_u64(k)));
//! ```

pub mod cli;
pub mod error;
pub mod filter;
pub mod hash;
pub mod mtcf;
pub mod oracle;
pub mod packed;
pub mod persistence;
pub mod sbbf;
pub mod slot;
pub mod tbf;
pub mod tcf;

pub use error::{Error, Result};
pub use filter::{GrowableFilter, Membership};
pub use persistence::AnyFilter;
