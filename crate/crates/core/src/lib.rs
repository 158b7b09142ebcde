pub mod commits;
pub mod date;
pub mod engine;
pub mod fix;
pub mod error;
pub mod extmap;
pub mod history;
pub mod license;
pub mod mapping;
pub mod metrics;
pub mod model;
pub mod notice;
pub mod pipeline;
pub mod report;
pub mod tfidf;

pub use error::{Error, Result};
