//! Domain types for the gallery: model histories, their XML documents,
//! schemas, permissions and the review workflow. No I/O happens here.

pub mod access;
pub mod document;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod reference;
pub mod richtext;
pub mod schema;
pub mod time;
pub mod workflow;
pub mod xml;

pub use error::{Error, Result};
pub use model::{BlobId, ModelHistory, ModelKey, ModelVersion, Status};
