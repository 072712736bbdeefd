pub mod analyze;
pub mod graph;
pub mod identify;
pub mod prune;
pub mod savings;
pub mod train;
