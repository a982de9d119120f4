pub mod autodiff;
pub mod cli;
pub mod gwl;
pub mod hypergraph;
pub mod layers;
pub mod train;
