use std::io;
use std::path::PathBuf;

use gallery_core::schema::ValidationReport;
use gallery_core::BlobId;

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Domain(#[from] gallery_core::Error),
    #[error("{0} not found")]
    NotFound(String),
    #[error("i/o failure at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("blob {0} does not match its digest")]
    CorruptBlob(BlobId),
    #[error("document has schema {found}, store is at schema {expected}")]
    SchemaMismatch { expected: u32, found: u32 },
    #[error("stored data is inconsistent: {0}")]
    Corrupt(String),
    #[error("no migration registered from schema {0}")]
    ChainGap(u32),
    #[error("a migration from schema {0} is already registered")]
    DuplicateStep(u32),
    #[error("migration {from} -> {to} does not advance by one")]
    NonadjacentStep { from: u32, to: u32 },
    #[error("cannot migrate down from schema {current} to {target}")]
    Downgrade { current: u32, target: u32 },
    #[error("migration failed for {} document(s)", .0.len())]
    MigrationFailed(Vec<ValidationReport>),
    #[error("the store is being migrated")]
    ServiceMigrating,
    #[error("latest version is {found}, edit was based on {expected}")]
    VersionConflict { expected: u32, found: u32 },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Domain(e) => e.code(),
            StoreError::NotFound(_) => "NOT_FOUND",
            StoreError::Io { .. } => "IO_FAILURE",
            StoreError::CorruptBlob(_) => "CORRUPT_BLOB",
            StoreError::SchemaMismatch { .. } => "SCHEMA_MISMATCH",
            StoreError::Corrupt(_) => "CORRUPT_STORE",
            StoreError::ChainGap(_) => "CHAIN_GAP",
            StoreError::DuplicateStep(_) => "DUPLICATE_STEP",
            StoreError::NonadjacentStep { .. } => "NONADJACENT_STEP",
            StoreError::Downgrade { .. } => "DOWNGRADE",
            StoreError::MigrationFailed(_) => "MIGRATION_FAILED",
            StoreError::ServiceMigrating => "SERVICE_MIGRATING",
            StoreError::VersionConflict { .. } => "VERSION_CONFLICT",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> StoreError {
        let path = path.into();
        move |source| StoreError::Io { path, source }
    }
}
