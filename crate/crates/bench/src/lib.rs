//! Fixtures shared by the benchmarks.

use qlink_core::{simulate_run, LinkConfig, StreamHeader, TimeTag};

/// A default-configuration acquisition of `seconds` (about 2400 tags/s).
pub fn simulated_stream(seconds: f64, seed: u64) -> (StreamHeader, Vec<TimeTag>) {
    let mut config = LinkConfig::default();
    config.run.duration_s = seconds;
    let out = simulate_run(&config, seed).expect("default configuration simulates");
    (out.header, out.tags)
}
