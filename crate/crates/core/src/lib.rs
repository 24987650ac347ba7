//! Bistatic FMCW localization on a location lattice: synthetic frames,
//! indirect (FFT + multilateration) and direct (maximum-likelihood scan)
//! estimators, and grid hopping, which approximates the direct scan from
//! fast-time FFT outputs through a precomputed interpolation table.

pub mod bench;
pub mod direct;
pub mod error;
pub mod estimate;
pub mod frame_io;
pub mod hopping;
pub mod indirect;
pub mod interp;
pub mod model;
pub mod rng;
mod spectral;
pub mod synth;

pub use direct::{direct_estimate, direct_locate, direct_velocity, location_decision, LocationScan};
pub use error::{Error, Result};
pub use estimate::{Estimate, GridFix, Timings};
pub use hopping::{fast_time_spectra, hop_estimate, hop_locate, hop_location_decision, hop_velocity, HopScan};
pub use indirect::{
    extract_peak, indirect_estimate, multilaterate_location, multilaterate_velocity, range_doppler_map, RangeDopplerMap,
};
pub use interp::{precompute_hop_table, HopTable, InterpScheme, Interpolator};
pub use model::{
    binding_hash, build_location_grid, build_velocity_grid, range_sensing, sense, speed_sensing, Extents, Grids,
    LocationGrid, SceneGeometry, SensedParams, Target, Vec2, VelocityGrid, WaveformConfig, SPEED_OF_LIGHT,
};
pub use synth::{add_noise, synthesize_frame, Frame, NoiseSpec};
