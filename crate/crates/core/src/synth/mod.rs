// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic plant data with known ground truth.
//!
//! Every generator is a pure function of its parameters and seed. Generators
//! draw from their own ChaCha stream so that reusing a seed across them does
//! not correlate their noise.

mod defects;
mod lab;
mod plant;
mod scenario;
mod signals;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use defects::{
    inject_defects, swinging_door, DefectKind, DefectSpec, DelayTruth, InjectedDefect,
    TruthManifest,
};
pub use lab::{gen_lab_channel, regular_schedule, LabChannel, LabChannelParams};
pub use plant::{
    gen_closed_loop, gen_foptd, gen_open_loop, gen_prbs, Disturbance, FoptdParams, LoopData,
    PiParams, PlantOutput, PrbsParams, MODE_AUTO, MODE_MAN,
};
pub use scenario::{
    generate_scenario, write_scenario, FeedSection, FieldSection, LoopSection, OutflowSection,
    QualitySection, Scenario, ScenarioConfig, TemperatureSection, SCENARIO_VERSION,
};
pub use signals::{
    add_spikes, gen_mode_signal, gen_smooth_noise, gen_two_mode, step_input, ModeSignal,
    ModeSignalParams, TwoMode, TwoModeParams,
};

/// Child seed for sub-generator `stream` (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
