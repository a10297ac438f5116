pub mod error;
pub mod experiment;
pub mod jacobian;
pub mod model;
pub mod sampling;
pub mod scenery;
pub mod shift;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use model::{MeasureModel, ModelSpec};
pub use shift::{Alphabet, PastWord, Word};
