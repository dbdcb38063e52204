pub mod compare;
pub mod parse_region;
pub mod score;
pub mod train_sim;
