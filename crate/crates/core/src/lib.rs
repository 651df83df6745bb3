pub mod error;
pub mod flow;
pub mod pipeline;
pub mod pseudo;
pub mod reparam;
pub mod report;
pub mod scenario;
pub mod search;
pub mod space;
pub mod stability;
pub mod straighten;

pub use error::{Error, Result};
