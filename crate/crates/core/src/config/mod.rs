mod presets;
mod run;

pub use presets::*;
pub use run::*;
