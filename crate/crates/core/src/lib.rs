#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod camera;
pub mod cone;
pub mod error;
pub mod linalg;
pub mod math;
pub mod nlp;
pub mod params;
pub mod planner;
pub mod socp;
pub mod trajectory;
pub mod baseline;
pub mod oracle;
