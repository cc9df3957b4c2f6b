pub mod fit;
pub mod generate;
pub mod gradcheck;
pub mod montecarlo;
