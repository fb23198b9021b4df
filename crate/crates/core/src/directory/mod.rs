//! Directory-based protocols: an explicit table maps names to locations.

mod central;
mod dns;
mod embedded;
mod gossip;
pub mod routes;

pub use central::CentralDirectory;
pub use dns::{Dns, DnsLayout, Zone};
pub use embedded::{embed, parse_embedded, shortest_path_tables, EmbeddedRouting};
pub use gossip::{Entry, GossipDirectory};
pub use routes::{Prefix, RouteTable};
