//! Hash-based protocols: the name alone decides where data lives.

mod chord;
pub(crate) mod keyspace;
mod ring;

pub use chord::Chord;
pub use keyspace::{Key, Keyspace, Ring, DEFAULT_KEY_BITS};
pub use ring::{ConsistentHashing, Pattern, PlacementRule};
