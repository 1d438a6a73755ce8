pub mod evaluate;
pub mod generate;
pub mod inspect_mask;
pub mod preprocess;
pub mod render;
pub mod train;
