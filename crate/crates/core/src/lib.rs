pub mod cli;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod markov;
pub mod metrics;
pub mod model;
pub mod networks;
pub mod report;
pub mod spectral;
pub mod verify;
