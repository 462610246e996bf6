//! Continuous and impulsive deflection of Earth-crossing objects with a
//! laser-ablation thrust model, patched-conic terminal targeting and a
//! lunar third-body sensitivity study.

pub mod dynamics;
pub mod elements;
pub mod flyby;
pub mod impulsive;
pub mod ephemeris;
pub mod laser;
pub mod lunar;
pub mod ode;
pub mod report;
pub mod roots;
pub mod scenario;
pub mod transcription;
pub mod units;
