pub mod graph;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod similarity;
pub mod lipschitz;
pub mod train;
