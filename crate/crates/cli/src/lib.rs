//! Library side of the `pi-bounds` command: generation, solving, verification
//! and reproducible sweeps over seeded MDP families.

pub mod commands;
pub mod exit;
pub mod report;
pub mod sweep;
