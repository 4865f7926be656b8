pub mod cgf;
pub mod cgf2;
pub mod cli;
pub mod check;
pub mod error;
pub mod figure;
pub mod joint;
pub mod lattice;
pub mod local_limit;
pub mod oracle;
pub mod policy;
pub mod presets;
pub mod rates;
pub mod report;
pub mod schema;
pub mod special;
pub mod tilting;

pub use error::{Error, Result};
