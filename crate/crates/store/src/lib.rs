//! Persistence for the gallery and the service layer on top of it.

pub mod blobs;
pub mod error;
pub mod fsutil;
pub mod gallery;
pub mod migrate;
pub mod records;
pub mod store;

pub use error::{Result, StoreError};
pub use gallery::{Gallery, GalleryOptions};
pub use store::Store;
