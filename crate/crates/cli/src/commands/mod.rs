pub mod approximate;
pub mod contraction;
pub mod grid;
pub mod odometer;
pub mod tower;
