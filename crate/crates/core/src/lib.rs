//! Core of the medical resource-sharing gateway.
//!
//! External parties never see clinical rows. They run pre-registered
//! aggregate queries ([`query`]) over an immutable dataset ([`store`],
//! generated by [`synth`]), after role checks ([`rbac`]) and input screening
//! ([`guard`]). Access is carried by signed expiring tokens ([`token`]) and
//! every request leaves a hash-chained trace ([`audit`]).

pub mod audit;
pub mod gateway;
pub mod guard;
pub mod query;
pub mod rbac;
pub mod resultfmt;
pub mod store;
pub mod synth;
pub mod token;

pub use gateway::{Gateway, GatewayError, QueryResponse};
pub use guard::GuardConfig;
pub use query::{EngineConfig, QueryRegistry, ResultSet, Value};
pub use rbac::RbacStore;
pub use resultfmt::WireFormat;
pub use store::{load_tables, save_tables, ClinicalTables};
pub use synth::{generate_dataset, GenSpec};
