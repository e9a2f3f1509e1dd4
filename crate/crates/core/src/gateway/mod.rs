//! Off-chain side: document storage, binding resolution, transaction
//! submission and the REST API.

pub mod api;
pub mod cas;
pub mod http;
pub mod resolve;
pub mod service;

pub use api::{router, serve, ServiceHandle};
pub use cas::{parse_cid, CasError, ContentStore, DirCas, MemoryCas};
pub use http::{HttpClient, HttpError, UreqClient};
pub use resolve::{load_document, lookup, resolve_task, ResolveError};
pub use service::{dev_genesis, ChainFiles, DocAudit, DocStatus, Gateway, GatewayError};
