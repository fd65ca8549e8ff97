//! Poisson jump-process trajectories restricted to active links.
//!
//! A link `(i, j, sigma)` is active when exactly one of its two orbitals is
//! occupied. Only active links can produce a nonzero hopping amplitude, so the
//! sampler superposes their clocks: the next jump comes after an exponential
//! waiting time with the total active rate, and the jumping link is picked in
//! proportion to its own rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fock::FockConfiguration;
use crate::model::{LatticeModel, Link, RateTable, Spin};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("no active links: total active rate is zero")]
    NoActiveLinks,
    #[error("link {0} is not active in the current configuration")]
    InactiveJump(Link),
    #[error("rate table does not match the model's links")]
    RateMismatch,
    #[error("configuration has {found} sites, model has {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Per-trajectory random stream: ChaCha8 keyed by the master seed, with the
/// trajectory index selecting the stream. Results never depend on which
/// worker ran the trajectory.
pub fn stream_rng(master_seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory);
    rng
}

/// Uniform draw on (0, 1].
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEntry {
    pub link: Link,
    pub eta: f64,
    pub rate: f64,
}

/// Index into a [`LinkTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub usize);

/// Model and rates compiled for the sampler: flat link list, per-site
/// incidence lists, and dense on-site coefficients.
#[derive(Debug, Clone)]
pub struct LinkTable {
    num_sites: usize,
    links: Vec<LinkEntry>,
    // index: spin * num_sites + (site - 1)
    incidence: Vec<Vec<LinkId>>,
    gamma: Vec<f64>,
    site_energy: [Vec<f64>; 2],
    total_rate: f64,
}

impl LinkTable {
    pub fn new(model: &LatticeModel, rates: &RateTable) -> Result<Self, TrajectoryError> {
        if !rates.matches(model) {
            return Err(TrajectoryError::RateMismatch);
        }
        let l = model.num_sites();
        let mut links = Vec::new();
        let mut incidence = vec![Vec::new(); 2 * l];
        for link in model.link_sets().iter() {
            let rate = rates.get(link).ok_or(TrajectoryError::RateMismatch)?;
            let id = LinkId(links.len());
            links.push(LinkEntry { link, eta: model.eta(link.i, link.j, link.spin), rate });
            let base = link.spin.index() * l;
            incidence[base + link.i - 1].push(id);
            incidence[base + link.j - 1].push(id);
        }
        let gamma = (1..=l).map(|i| model.gamma(i)).collect();
        let site_energy = Spin::BOTH.map(|s| (1..=l).map(|i| model.site_energy(i, s)).collect());
        let total_rate = links.iter().map(|e| e.rate).sum();
        Ok(LinkTable { num_sites: l, links, incidence, gamma, site_energy, total_rate })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn entry(&self, id: LinkId) -> &LinkEntry {
        &self.links[id.0]
    }

    pub fn entries(&self) -> &[LinkEntry] {
        &self.links
    }

    /// Sum of all rates, active or not.
    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    fn incident(&self, site: usize, spin: Spin) -> &[LinkId] {
        &self.incidence[spin.index() * self.num_sites + site - 1]
    }

    #[inline]
    fn is_active(&self, id: LinkId, n: &FockConfiguration) -> bool {
        let link = self.links[id.0].link;
        n.occupied(link.i, link.spin) != n.occupied(link.j, link.spin)
    }

    /// Diagonal potential of `n`, evaluated from the dense coefficient arrays.
    pub fn potential(&self, n: &FockConfiguration) -> f64 {
        let mut v = 0.0;
        let mut doubly = n.channel(Spin::Up) & n.channel(Spin::Down);
        while doubly != 0 {
            v += self.gamma[doubly.trailing_zeros() as usize];
            doubly &= doubly - 1;
        }
        for spin in Spin::BOTH {
            let energies = &self.site_energy[spin.index()];
            let mut bits = n.channel(spin);
            while bits != 0 {
                v -= 2.0 * energies[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
        }
        v
    }

    pub fn check_configuration(&self, n: &FockConfiguration) -> Result<(), TrajectoryError> {
        if n.num_sites() != self.num_sites {
            Err(TrajectoryError::LengthMismatch { expected: self.num_sites, found: n.num_sites() })
        } else {
            Ok(())
        }
    }
}

/// The active-link set of the current configuration with its total rate.
#[derive(Debug, Clone)]
pub struct ActiveLinkState {
    active: Vec<LinkId>,
    // position of each link in `active`, usize::MAX when inactive
    position: Vec<usize>,
    total_active_rate: f64,
    total_inactive_rate: f64,
}

const INACTIVE: usize = usize::MAX;

impl ActiveLinkState {
    /// Active set computed from scratch.
    pub fn init(table: &LinkTable, n: &FockConfiguration) -> Self {
        let mut state = ActiveLinkState {
            active: Vec::new(),
            position: vec![INACTIVE; table.len()],
            total_active_rate: 0.0,
            total_inactive_rate: 0.0,
        };
        for id in (0..table.len()).map(LinkId) {
            if table.is_active(id, n) {
                state.insert(id);
            }
        }
        state.refresh_rates(table);
        state
    }

    pub fn total_active_rate(&self) -> f64 {
        self.total_active_rate
    }

    pub fn total_inactive_rate(&self) -> f64 {
        self.total_inactive_rate
    }

    pub fn is_active(&self, id: LinkId) -> bool {
        self.position[id.0] != INACTIVE
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }

    /// Active link ids in table order.
    pub fn active_links(&self) -> Vec<LinkId> {
        let mut ids = self.active.clone();
        ids.sort_unstable();
        ids
    }

    /// Exponential waiting time with the total active rate.
    pub fn sample_waiting_time<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, TrajectoryError> {
        if self.total_active_rate > 0.0 {
            Ok(-open_unit(rng).ln() / self.total_active_rate)
        } else {
            Err(TrajectoryError::NoActiveLinks)
        }
    }

    /// Active link chosen with probability `rate / total_active_rate`.
    pub fn select_link<R: Rng + ?Sized>(
        &self,
        table: &LinkTable,
        rng: &mut R,
    ) -> Result<LinkId, TrajectoryError> {
        let last = *self.active.last().ok_or(TrajectoryError::NoActiveLinks)?;
        let mut target = rng.random::<f64>() * self.total_active_rate;
        for &id in &self.active {
            target -= table.links[id.0].rate;
            if target < 0.0 {
                return Ok(id);
            }
        }
        // rounding left a sliver past the end
        Ok(last)
    }

    /// Flips the link's orbitals and updates only the links incident on its
    /// two endpoints in the same spin channel.
    pub fn apply_jump(
        &mut self,
        table: &LinkTable,
        n: &FockConfiguration,
        id: LinkId,
    ) -> Result<FockConfiguration, TrajectoryError> {
        let link = table.links[id.0].link;
        if !self.is_active(id) {
            return Err(TrajectoryError::InactiveJump(link));
        }
        let next = n.flip_link(link);
        for &site in &[link.i, link.j] {
            for &other in table.incident(site, link.spin) {
                match (table.is_active(other, &next), self.is_active(other)) {
                    (true, false) => self.insert(other),
                    (false, true) => self.remove(other),
                    _ => {}
                }
            }
        }
        self.refresh_rates(table);
        Ok(next)
    }

    /// Same active set, and total rates within `rel_tol`.
    pub fn agrees_with(&self, other: &ActiveLinkState, rel_tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs());
        self.active_links() == other.active_links()
            && close(self.total_active_rate, other.total_active_rate)
            && close(self.total_inactive_rate, other.total_inactive_rate)
    }

    fn insert(&mut self, id: LinkId) {
        self.position[id.0] = self.active.len();
        self.active.push(id);
    }

    fn remove(&mut self, id: LinkId) {
        let pos = self.position[id.0];
        self.active.swap_remove(pos);
        if let Some(&moved) = self.active.get(pos) {
            self.position[moved.0] = pos;
        }
        self.position[id.0] = INACTIVE;
    }

    fn refresh_rates(&mut self, table: &LinkTable) {
        self.total_active_rate = self.active.iter().map(|id| table.links[id.0].rate).sum();
        self.total_inactive_rate = if self.active.len() == table.len() {
            0.0
        } else {
            (table.total_rate - self.total_active_rate).max(0.0)
        };
    }
}

/// One completed jump of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    /// Absolute jump time.
    pub time: f64,
    pub link: Link,
    /// Sign coefficient at the pre-jump configuration.
    pub lambda: i8,
}
