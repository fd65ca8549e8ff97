//! Shared fixtures for the benchmarks.

use hubbard_poisson::{FockConfiguration, LatticeModel, LinkTable};

/// Half-filled open chain with one particle of each spin per two sites,
/// alternating so that every bond starts out active.
pub struct ChainFixture {
    pub model: LatticeModel,
    pub table: LinkTable,
    pub start: FockConfiguration,
}

impl ChainFixture {
    pub fn new(num_sites: usize, gamma: f64) -> Self {
        let model = LatticeModel::chain(num_sites, 1.0, gamma).expect("valid chain");
        let table = LinkTable::new(&model, &model.default_rates()).expect("matching rates");
        let up: Vec<u8> = (0..num_sites).map(|k| u8::from(k % 2 == 0)).collect();
        let down: Vec<u8> = up.iter().map(|b| 1 - b).collect();
        let start = FockConfiguration::from_occupations(&up, &down).expect("valid occupations");
        ChainFixture { model, table, start }
    }
}

/// A configuration with every even site filled in both channels.
pub fn dense_configuration(num_sites: usize) -> FockConfiguration {
    let mut bits = 0u64;
    for k in (0..num_sites).step_by(2) {
        bits |= 1 << k;
    }
    FockConfiguration::from_bits(num_sites, bits, bits).expect("fits in a word")
}
