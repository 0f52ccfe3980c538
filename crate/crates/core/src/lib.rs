pub mod cli;
pub mod evaluation;
pub mod inference;
pub mod likelihood;
pub mod preprocess;
pub mod signal_io;
