#![allow(clippy::needless_range_loop)]

pub mod cuts;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod sddp;
pub mod stage;
