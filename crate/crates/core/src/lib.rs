//! Underground ambient-backscatter links: soil channel, link budget, device
//! presets, anti-collision inventory, and a field-trial simulator.

pub mod cli;
pub mod config;
pub mod devices;
pub mod field_sim;
pub mod link_budget;
pub mod mac;
pub mod report;
pub mod soil;
