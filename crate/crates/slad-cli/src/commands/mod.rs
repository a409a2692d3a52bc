pub mod ablate;
pub mod distill;
pub mod eval;
pub mod sample;
pub mod train_teacher;
