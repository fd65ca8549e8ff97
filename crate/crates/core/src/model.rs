//! Hamiltonian parameters of a generalized Hubbard model on an arbitrary
//! weighted graph.
//!
//! Sites carry 1-based indices in the public API. Hopping coefficients are
//! stored upper-triangular (`i <= j`); diagonal entries are spin-dependent
//! site energies that enter the diagonal potential with a factor `-2`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest lattice representable by the bit-packed configurations.
pub const MAX_SITES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Up => "up",
            Spin::Down => "down",
        })
    }
}

/// A hopping link `(i, j, spin)` with `i < j`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub i: usize,
    pub j: usize,
    pub spin: Spin,
}

impl Link {
    pub fn new(i: usize, j: usize, spin: Spin) -> Self {
        Link { i, j, spin }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.i, self.j, self.spin)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("number of sites must be between 1 and {MAX_SITES}, got {0}")]
    InvalidSiteCount(usize),
    #[error("site index {index} out of range 1..={num_sites}")]
    IndexOutOfRange { index: usize, num_sites: usize },
    #[error("duplicate entry {0}")]
    DuplicateEntry(String),
    #[error("non-finite coefficient for {0}")]
    NonFiniteCoefficient(String),
    #[error("rate for {0} must be strictly positive and finite")]
    NonPositiveRate(Link),
    #[error("rate given for {0}, which is not a hopping link")]
    UnknownLink(Link),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoppingEntry {
    pub i: usize,
    pub j: usize,
    pub spin: Spin,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionEntry {
    pub i: usize,
    pub gamma: f64,
}

/// Validated, immutable model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    num_sites: usize,
    hopping: BTreeMap<(usize, usize, Spin), f64>,
    interaction: BTreeMap<usize, f64>,
}

impl LatticeModel {
    /// Validates and normalizes the entries; `(j, i)` with `j > i` is stored
    /// as `(i, j)`.
    pub fn build(
        num_sites: usize,
        hoppings: &[HoppingEntry],
        interactions: &[InteractionEntry],
    ) -> Result<Self, ModelError> {
        if num_sites == 0 || num_sites > MAX_SITES {
            return Err(ModelError::InvalidSiteCount(num_sites));
        }
        let check = |index: usize| {
            if index == 0 || index > num_sites {
                Err(ModelError::IndexOutOfRange { index, num_sites })
            } else {
                Ok(())
            }
        };

        let mut hopping = BTreeMap::new();
        for h in hoppings {
            check(h.i)?;
            check(h.j)?;
            let (i, j) = if h.i <= h.j { (h.i, h.j) } else { (h.j, h.i) };
            let label = format!("hopping ({i},{j},{})", h.spin);
            if !h.eta.is_finite() {
                return Err(ModelError::NonFiniteCoefficient(label));
            }
            if hopping.insert((i, j, h.spin), h.eta).is_some() {
                return Err(ModelError::DuplicateEntry(label));
            }
        }

        let mut interaction = BTreeMap::new();
        for u in interactions {
            check(u.i)?;
            let label = format!("interaction {}", u.i);
            if !u.gamma.is_finite() {
                return Err(ModelError::NonFiniteCoefficient(label));
            }
            if interaction.insert(u.i, u.gamma).is_some() {
                return Err(ModelError::DuplicateEntry(label));
            }
        }

        Ok(LatticeModel { num_sites, hopping, interaction })
    }

    /// Uniform nearest-neighbour open chain, same hopping for both spins.
    pub fn chain(num_sites: usize, eta: f64, gamma: f64) -> Result<Self, ModelError> {
        let hoppings: Vec<_> = (1..num_sites)
            .flat_map(|i| Spin::BOTH.map(|spin| HoppingEntry { i, j: i + 1, spin, eta }))
            .collect();
        let interactions: Vec<_> =
            (1..=num_sites).map(|i| InteractionEntry { i, gamma }).collect();
        Self::build(num_sites, &hoppings, &interactions)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Hopping coefficient, 0 when absent. Argument order does not matter.
    pub fn eta(&self, i: usize, j: usize, spin: Spin) -> f64 {
        let key = if i <= j { (i, j, spin) } else { (j, i, spin) };
        self.hopping.get(&key).copied().unwrap_or(0.0)
    }

    pub fn site_energy(&self, i: usize, spin: Spin) -> f64 {
        self.eta(i, i, spin)
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.interaction.get(&i).copied().unwrap_or(0.0)
    }

    pub fn hoppings(&self) -> impl Iterator<Item = HoppingEntry> + '_ {
        self.hopping
            .iter()
            .map(|(&(i, j, spin), &eta)| HoppingEntry { i, j, spin, eta })
    }

    pub fn interactions(&self) -> impl Iterator<Item = InteractionEntry> + '_ {
        self.interaction.iter().map(|(&i, &gamma)| InteractionEntry { i, gamma })
    }

    /// Off-diagonal links with nonzero hopping, per spin, sorted by `(i, j)`.
    pub fn link_sets(&self) -> LinkSet {
        let mut set = LinkSet::default();
        for (&(i, j, spin), &eta) in &self.hopping {
            if i == j || eta == 0.0 {
                continue;
            }
            match spin {
                Spin::Up => set.links_up.push((i, j)),
                Spin::Down => set.links_down.push((i, j)),
            }
        }
        set
    }

    /// Rates equal to `|eta|` on every link.
    pub fn default_rates(&self) -> RateTable {
        let rate = self
            .link_sets()
            .iter()
            .map(|link| (link, self.eta(link.i, link.j, link.spin).abs()))
            .collect();
        RateTable { rate }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkSet {
    pub links_up: Vec<(usize, usize)>,
    pub links_down: Vec<(usize, usize)>,
}

impl LinkSet {
    pub fn links(&self, spin: Spin) -> &[(usize, usize)] {
        match spin {
            Spin::Up => &self.links_up,
            Spin::Down => &self.links_down,
        }
    }

    pub fn len(&self) -> usize {
        self.links_up.len() + self.links_down.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All links, up channel first.
    pub fn iter(&self) -> impl Iterator<Item = Link> + '_ {
        Spin::BOTH.into_iter().flat_map(move |spin| {
            self.links(spin).iter().map(move |&(i, j)| Link::new(i, j, spin))
        })
    }
}

/// Poisson rates, one strictly positive entry per link of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    rate: BTreeMap<Link, f64>,
}

impl RateTable {
    /// Default rates with per-link overrides applied.
    pub fn with_overrides(
        model: &LatticeModel,
        overrides: &[(Link, f64)],
    ) -> Result<Self, ModelError> {
        let mut table = model.default_rates();
        for &(link, rho) in overrides {
            let link = if link.i <= link.j {
                link
            } else {
                Link::new(link.j, link.i, link.spin)
            };
            match table.rate.get_mut(&link) {
                Some(slot) => *slot = rho,
                None => return Err(ModelError::UnknownLink(link)),
            }
        }
        table.validate()?;
        Ok(table)
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        let table = RateTable {
            rate: self.rate.iter().map(|(&l, &r)| (l, r * factor)).collect(),
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (&link, &rho) in &self.rate {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(ModelError::NonPositiveRate(link));
            }
        }
        Ok(())
    }

    pub fn get(&self, link: Link) -> Option<f64> {
        self.rate.get(&link).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Link, f64)> + '_ {
        self.rate.iter().map(|(&l, &r)| (l, r))
    }

    pub fn len(&self) -> usize {
        self.rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    /// True when the keys are exactly the links of `model`.
    pub fn matches(&self, model: &LatticeModel) -> bool {
        let links = model.link_sets();
        links.len() == self.rate.len() && links.iter().all(|l| self.rate.contains_key(&l))
    }
}
