pub mod qbf;
pub mod gridflow;
pub mod reduce_discrete;
pub mod field;
pub mod epscycle;
pub mod reduce_continuous;
pub mod systems;
