mod bound;
mod probes;

pub use bound::*;
pub use probes::*;
