//! Error type shared across the simulator.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("out of memory: no free block for {requested} bytes (rounded to {rounded})")]
    OutOfMemory { requested: u64, rounded: u64 },

    #[error("invalid free at offset {offset:#x}: {reason}")]
    InvalidFree { offset: u64, reason: String },

    #[error("allocation size must be non-zero")]
    ZeroSizeAlloc,

    #[error("allocator already initialized on this core")]
    AlreadyInitialized,

    #[error("allocator not initialized")]
    NotInitialized,

    #[error("{what} must be a power of two (got {value})")]
    NotPowerOfTwo { what: &'static str, value: u64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("heap access out of range: offset {offset:#x} len {len} (heap is {heap_size} bytes)")]
    HeapOutOfRange { offset: u64, len: u64, heap_size: u64 },

    #[error("zero-byte memory transfer")]
    ZeroByteTransfer,

    #[error("mutex protocol violation: {0}")]
    MutexProtocol(String),

    #[error("tasklet script error: {0}")]
    Script(String),

    #[error("tasklet {tasklet} does not own sub-block at {offset:#x} (owner is tasklet {owner})")]
    RemoteFree { tasklet: u32, offset: u64, owner: u32 },

    #[error("buddy cache protocol violation: {0}")]
    CacheProtocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("verification failed: {0}")]
    VerifyFailed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}
