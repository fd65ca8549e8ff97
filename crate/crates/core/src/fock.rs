//! Occupation-number configurations and the fermionic sign algebra.
//!
//! Site `i` (1-based) lives at bit `i - 1` of its spin channel. The
//! Jordan-Wigner string of a hop between `i < j` runs over sites `i..j-1` of
//! the same spin channel only.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LatticeModel, Link, Spin, MAX_SITES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FockError {
    #[error("invalid link ({i},{j}) on {num_sites} sites: need 1 <= i < j <= {num_sites}")]
    InvalidLink { i: usize, j: usize, num_sites: usize },
    #[error("configuration has {found} sites, model has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid bit string {0:?}: expected BITS/BITS with one 0/1 per site")]
    InvalidBitString(String),
    #[error("bit strings have different lengths: up {up}, down {down}")]
    ChannelLengthMismatch { up: usize, down: usize },
    #[error("number of sites must be between 1 and {MAX_SITES}, got {0}")]
    InvalidSiteCount(usize),
}

/// Particle numbers per spin channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub n_up: usize,
    pub n_down: usize,
}

impl Sector {
    pub fn new(n_up: usize, n_down: usize) -> Self {
        Sector { n_up, n_down }
    }
}

#[inline]
pub(crate) fn low_mask(k: usize) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// Occupations `n_{i sigma}` packed as two bit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockConfiguration {
    num_sites: usize,
    up: u64,
    down: u64,
}

impl FockConfiguration {
    pub fn vacuum(num_sites: usize) -> Result<Self, FockError> {
        Self::from_bits(num_sites, 0, 0)
    }

    /// Raw constructor; bit `i - 1` is site `i`. Bits beyond `num_sites`
    /// are rejected.
    pub fn from_bits(num_sites: usize, up: u64, down: u64) -> Result<Self, FockError> {
        if num_sites == 0 || num_sites > MAX_SITES {
            return Err(FockError::InvalidSiteCount(num_sites));
        }
        let mask = low_mask(num_sites);
        if up & !mask != 0 || down & !mask != 0 {
            return Err(FockError::InvalidBitString(format!("{up:#b}/{down:#b}")));
        }
        Ok(FockConfiguration { num_sites, up, down })
    }

    /// From per-site occupation slices, site 1 first.
    pub fn from_occupations(up: &[u8], down: &[u8]) -> Result<Self, FockError> {
        if up.len() != down.len() {
            return Err(FockError::ChannelLengthMismatch { up: up.len(), down: down.len() });
        }
        let pack = |bits: &[u8]| -> Result<u64, FockError> {
            bits.iter().enumerate().try_fold(0u64, |acc, (k, &b)| match b {
                0 => Ok(acc),
                1 => Ok(acc | 1 << k),
                _ => Err(FockError::InvalidBitString(format!("{bits:?}"))),
            })
        };
        if up.len() > MAX_SITES {
            return Err(FockError::InvalidSiteCount(up.len()));
        }
        Self::from_bits(up.len(), pack(up)?, pack(down)?)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn channel(&self, spin: Spin) -> u64 {
        match spin {
            Spin::Up => self.up,
            Spin::Down => self.down,
        }
    }

    /// `n_{site, spin}` for a 1-based site.
    pub fn occupied(&self, site: usize, spin: Spin) -> bool {
        debug_assert!(site >= 1 && site <= self.num_sites);
        self.channel(spin) >> (site - 1) & 1 == 1
    }

    /// Sort key: down channel in the high word, up channel in the low word.
    pub fn packed(&self) -> u128 {
        (self.down as u128) << 64 | self.up as u128
    }

    pub fn sector(&self) -> Sector {
        Sector::new(self.up.count_ones() as usize, self.down.count_ones() as usize)
    }

    fn check_link(&self, i: usize, j: usize) -> Result<(), FockError> {
        if i == 0 || i >= j || j > self.num_sites {
            Err(FockError::InvalidLink { i, j, num_sites: self.num_sites })
        } else {
            Ok(())
        }
    }

    /// Signed matrix element of `c+_i c_j + c+_j c_i` between `self` and its
    /// flipped partner; one of -1, 0, +1.
    pub fn lambda(&self, i: usize, j: usize, spin: Spin) -> Result<i8, FockError> {
        self.check_link(i, j)?;
        Ok(self.lambda_unchecked(i, j, spin))
    }

    #[inline]
    pub(crate) fn lambda_unchecked(&self, i: usize, j: usize, spin: Spin) -> i8 {
        let bits = self.channel(spin);
        let ni = bits >> (i - 1) & 1;
        let nj = bits >> (j - 1) & 1;
        let bracket: i8 = match (ni, nj) {
            (0, 1) => 1,
            (1, 0) => -1,
            _ => return 0,
        };
        // sites i..=j-1
        let string = bits & low_mask(j - 1) & !low_mask(i - 1);
        if string.count_ones().is_multiple_of(2) {
            bracket
        } else {
            -bracket
        }
    }

    /// `n + 1_{i sigma} + 1_{j sigma}` modulo 2.
    pub fn flip(&self, i: usize, j: usize, spin: Spin) -> Result<Self, FockError> {
        self.check_link(i, j)?;
        Ok(self.flip_unchecked(i, j, spin))
    }

    #[inline]
    pub(crate) fn flip_unchecked(&self, i: usize, j: usize, spin: Spin) -> Self {
        let toggle = 1u64 << (i - 1) | 1u64 << (j - 1);
        let mut out = *self;
        match spin {
            Spin::Up => out.up ^= toggle,
            Spin::Down => out.down ^= toggle,
        }
        out
    }

    #[inline]
    pub(crate) fn flip_link(&self, link: Link) -> Self {
        self.flip_unchecked(link.i, link.j, link.spin)
    }

    /// Diagonal element `<n|H|n>`: interaction on doubly occupied sites minus
    /// twice the site energies of occupied orbitals.
    pub fn potential(&self, model: &LatticeModel) -> Result<f64, FockError> {
        if model.num_sites() != self.num_sites {
            return Err(FockError::LengthMismatch {
                expected: model.num_sites(),
                found: self.num_sites,
            });
        }
        Ok(self.potential_unchecked(model))
    }

    pub(crate) fn potential_unchecked(&self, model: &LatticeModel) -> f64 {
        let mut v = 0.0;
        for u in model.interactions() {
            if self.occupied(u.i, Spin::Up) && self.occupied(u.i, Spin::Down) {
                v += u.gamma;
            }
        }
        for h in model.hoppings().filter(|h| h.i == h.j) {
            if self.occupied(h.i, h.spin) {
                v -= 2.0 * h.eta;
            }
        }
        v
    }

    /// Compact `UP/DOWN` rendering, site 1 leftmost.
    pub fn to_bit_string(&self) -> String {
        format!("{}/{}", self.channel_string(Spin::Up), self.channel_string(Spin::Down))
    }

    fn channel_string(&self, spin: Spin) -> String {
        (1..=self.num_sites)
            .map(|s| if self.occupied(s, spin) { '1' } else { '0' })
            .collect()
    }
}

impl Ord for FockConfiguration {
    fn cmp(&self, other: &Self) -> Ordering {
        self.num_sites
            .cmp(&other.num_sites)
            .then_with(|| self.packed().cmp(&other.packed()))
    }
}

impl PartialOrd for FockConfiguration {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FockConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "up={} down={}",
            self.channel_string(Spin::Up),
            self.channel_string(Spin::Down)
        )
    }
}

/// Parses `UP/DOWN` (e.g. `101/010`) or `up=101 down=010`.
impl FromStr for FockConfiguration {
    type Err = FockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FockError::InvalidBitString(s.to_string());
        let s = s.trim();
        let (up, down) = if let Some((u, d)) = s.split_once('/') {
            (u.trim(), d.trim())
        } else {
            let mut parts = s.split_whitespace();
            let u = parts.next().and_then(|p| p.strip_prefix("up=")).ok_or_else(bad)?;
            let d = parts.next().and_then(|p| p.strip_prefix("down=")).ok_or_else(bad)?;
            if parts.next().is_some() {
                return Err(bad());
            }
            (u, d)
        };
        let digits = |text: &str| -> Result<Vec<u8>, FockError> {
            text.chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(bad()),
                })
                .collect()
        };
        let (up, down) = (digits(up)?, digits(down)?);
        if up.is_empty() {
            return Err(bad());
        }
        Self::from_occupations(&up, &down)
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn config_and_link() -> impl Strategy<Value = (FockConfiguration, usize, usize, Spin)> {
        (2usize..=12).prop_flat_map(|l| {
            let mask = low_mask(l);
            (
                any::<u64>(),
                any::<u64>(),
                1..l,
                prop_oneof![Just(Spin::Up), Just(Spin::Down)],
            )
                .prop_flat_map(move |(u, d, i, s)| {
                    (Just(FockConfiguration::from_bits(l, u & mask, d & mask).unwrap()), Just(i), (i + 1)..=l, Just(s))
                })
        })
    }

    proptest! {
        #[test]
        fn lambda_active_rule((n, i, j, s) in config_and_link()) {
            let lam = n.lambda(i, j, s).unwrap();
            prop_assert!((-1..=1).contains(&lam));
            let active = n.occupied(i, s) != n.occupied(j, s);
            prop_assert_eq!(lam != 0, active);
        }

        #[test]
        fn flip_preserves_sector_and_involutes((n, i, j, s) in config_and_link()) {
            let f = n.flip(i, j, s).unwrap();
            let lam = n.lambda(i, j, s).unwrap();
            if lam != 0 {
                prop_assert_eq!(f.sector(), n.sector());
                prop_assert_eq!(f.lambda(i, j, s).unwrap(), lam);
            }
            prop_assert_eq!(f.flip(i, j, s).unwrap(), n);
        }

        #[test]
        fn bit_string_round_trip((n, _i, _j, _s) in config_and_link()) {
            prop_assert_eq!(n.to_bit_string().parse::<FockConfiguration>().unwrap(), n);
            prop_assert_eq!(n.to_string().parse::<FockConfiguration>().unwrap(), n);
        }
    }

    /// Hermiticity, exhaustive for up to four sites.
    #[test]
    fn lambda_symmetric_under_flip_exhaustive() {
        for l in 2..=4 {
            for up in 0..1u64 << l {
                for down in 0..1u64 << l {
                    let n = FockConfiguration::from_bits(l, up, down).unwrap();
                    for spin in Spin::BOTH {
                        for i in 1..l {
                            for j in i + 1..=l {
                                let lam = n.lambda(i, j, spin).unwrap();
                                if lam != 0 {
                                    let f = n.flip(i, j, spin).unwrap();
                                    assert_eq!(f.lambda(i, j, spin).unwrap(), lam);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
