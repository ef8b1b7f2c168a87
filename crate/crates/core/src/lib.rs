pub mod cli;
pub mod closure;
pub mod contrasts;
pub mod design;
pub mod error;
pub mod io;
pub mod marginal;
pub mod mvt;
pub mod simulation;
pub mod special;
