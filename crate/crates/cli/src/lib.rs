//! Library surface of the `aks` runner: configuration, report and
//! serialization types plus the verb implementations, shared between the
//! binary and the integration tests.

pub mod config;
pub mod output;
pub mod report;
pub mod runner;
