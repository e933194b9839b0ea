pub mod carleman_checks;
pub mod coefficient;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod mesh;
pub mod metric;
pub mod objective;
pub mod optimizer;
pub mod preprocess;
pub mod series;
pub mod transform;
