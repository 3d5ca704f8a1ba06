//! Shared inputs for the benchmarks.

use rssm::rng::seeded;
use rssm::simulation::{generate_lai, SimSpec};
use rssm::ProbeSeries;

/// One width-40, SNR-1 chromosome of `length` probes.
pub fn chromosome(length: usize) -> ProbeSeries {
    let spec = SimSpec {
        count: 1,
        length,
        width: 40.min(length / 2),
        seed: 1,
        ..SimSpec::default()
    };
    generate_lai(&spec).expect("valid spec").remove(0).series
}

pub fn rng() -> rssm::rng::ModelRng {
    seeded(99)
}
