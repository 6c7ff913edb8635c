pub mod cli;
pub mod config;
pub mod environment;
pub mod error;
pub mod evaluation;
pub mod gridmap;
pub mod planners;
pub mod policy;
pub mod raster;
pub mod seeding;
pub mod textgrid;
pub mod training;

pub use error::{Error, Result};
