//! Exact diagonalization reference for small systems.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::estimator::TimeMode;
use crate::fock::{low_mask, FockConfiguration, Sector};
use crate::model::{LatticeModel, Spin, MAX_SITES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid sector ({n_up},{n_down}) on {num_sites} sites")]
    InvalidSector { num_sites: usize, n_up: usize, n_down: usize },
    #[error("basis has {basis} sites, model has {model}")]
    BasisMismatch { basis: usize, model: usize },
    #[error("symmetric eigendecomposition did not converge")]
    EigendecompositionFailure,
    #[error("brute-force operator check supports at most 4 sites, got {0}")]
    TooManySites(usize),
    #[error("mismatch at n={config} link ({i},{j},{spin}): expected {expected}, got {found}")]
    MismatchFound {
        config: String,
        i: usize,
        j: usize,
        spin: Spin,
        expected: f64,
        found: f64,
    },
    #[error("hamiltonian mismatch in sector ({n_up},{n_down}) at ({row},{col}): {expected} vs {found}")]
    HamiltonianMismatch {
        n_up: usize,
        n_down: usize,
        row: usize,
        col: usize,
        expected: f64,
        found: f64,
    },
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, r| acc * (n - r) as u128 / (r + 1) as u128)
}

/// Dimension of a sector, `C(L, n_up) * C(L, n_down)`.
pub fn sector_dimension(num_sites: usize, sector: Sector) -> u128 {
    binomial(num_sites, sector.n_up) * binomial(num_sites, sector.n_down)
}

/// All `num_sites`-bit words with `k` set bits, ascending (Gosper's hack).
fn combinations(num_sites: usize, k: usize) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    let limit = 1u128 << num_sites;
    let mut out = Vec::new();
    let mut x: u128 = (1u128 << k) - 1;
    while x < limit {
        out.push(x as u64);
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
    out
}

/// Configurations of one sector, sorted by packed bit value.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    num_sites: usize,
    sector: Sector,
    states: Vec<FockConfiguration>,
    index: HashMap<FockConfiguration, usize>,
}

impl SectorBasis {
    pub fn enumerate(num_sites: usize, sector: Sector) -> Result<Self, OracleError> {
        if num_sites == 0
            || num_sites > MAX_SITES
            || sector.n_up > num_sites
            || sector.n_down > num_sites
        {
            return Err(OracleError::InvalidSector {
                num_sites,
                n_up: sector.n_up,
                n_down: sector.n_down,
            });
        }
        let ups = combinations(num_sites, sector.n_up);
        let downs = combinations(num_sites, sector.n_down);
        let states: Vec<_> = downs
            .iter()
            .flat_map(|&d| {
                ups.iter()
                    .map(move |&u| FockConfiguration::from_bits(num_sites, u, d).expect("in range"))
            })
            .collect();
        let index = states.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        Ok(SectorBasis { num_sites, sector, states, index })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockConfiguration] {
        &self.states
    }

    pub fn index_of(&self, n: &FockConfiguration) -> Option<usize> {
        self.index.get(n).copied()
    }
}

/// Real symmetric Hamiltonian block in a sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHermitian {
    pub entries: DMatrix<f64>,
}

impl DenseHermitian {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries == self.entries.transpose()
    }
}

/// `H[a][a] = V(n_a)` and `H[b][a] = -eta * lambda(n_a)` for each link
/// connecting `n_a` to `n_b`.
pub fn build_hamiltonian(
    model: &LatticeModel,
    basis: &SectorBasis,
) -> Result<DenseHermitian, OracleError> {
    if basis.num_sites != model.num_sites() {
        return Err(OracleError::BasisMismatch { basis: basis.num_sites, model: model.num_sites() });
    }
    let dim = basis.len();
    let links: Vec<_> = model
        .link_sets()
        .iter()
        .map(|l| (l, model.eta(l.i, l.j, l.spin)))
        .collect();
    let mut h = DMatrix::zeros(dim, dim);
    for (a, n) in basis.states.iter().enumerate() {
        h[(a, a)] = n.potential_unchecked(model);
        for &(link, eta) in &links {
            let lambda = n.lambda_unchecked(link.i, link.j, link.spin);
            if lambda == 0 {
                continue;
            }
            let b = basis.index[&n.flip_link(link)];
            h[(b, a)] = -eta * lambda as f64;
        }
    }
    Ok(DenseHermitian { entries: h })
}

/// Cached eigendecomposition `H = Q D Q^T`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn new(h: &DenseHermitian) -> Result<Self, OracleError> {
        let eig = SymmetricEigen::try_new(h.entries.clone(), f64::EPSILON, 0)
            .ok_or(OracleError::EigendecompositionFailure)?;
        if eig.eigenvalues.iter().any(|d| !d.is_finite()) {
            return Err(OracleError::EigendecompositionFailure);
        }
        Ok(Spectrum {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// `Q f(D) Q^T` with `f(d) = exp(-i d t)` or `exp(-d t)`.
    pub fn propagator(&self, t: f64, mode: TimeMode) -> DMatrix<Complex64> {
        let q = &self.eigenvectors;
        let qt = q.transpose();
        let weighted = |g: &dyn Fn(f64) -> f64| {
            let mut scaled = q.clone();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col *= g(self.eigenvalues[k]);
            }
            scaled * &qt
        };
        match mode {
            TimeMode::RealTime => {
                let re = weighted(&|d| (d * t).cos());
                let im = weighted(&|d| -(d * t).sin());
                re.zip_map(&im, Complex64::new)
            }
            TimeMode::ImaginaryTime => weighted(&|d| (-d * t).exp()).map(|x| Complex64::new(x, 0.0)),
        }
    }
}

/// Exact propagator block; rows are final configurations, columns initial.
pub fn exact_propagator(
    h: &DenseHermitian,
    t: f64,
    mode: TimeMode,
) -> Result<DMatrix<Complex64>, OracleError> {
    Ok(Spectrum::new(h)?.propagator(t, mode))
}

/// Max-norm of `[U(t+dt) - U(t)]/dt + i H U(t)` for the real-time propagator.
pub fn ode_residual(h: &DenseHermitian, t: f64, dt: f64) -> Result<f64, OracleError> {
    let spectrum = Spectrum::new(h)?;
    let u0 = spectrum.propagator(t, TimeMode::RealTime);
    let u1 = spectrum.propagator(t + dt, TimeMode::RealTime);
    let hc = h.entries.map(|x| Complex64::new(x, 0.0));
    let drift = (u1 - &u0) / Complex64::new(dt, 0.0) + hc * u0 * Complex64::i();
    Ok(drift.iter().fold(0.0, |m, z| m.max(z.norm())))
}

/// Creation/annihilation matrices on the full `2^(2L)` Fock space with all
/// up modes ordered before all down modes. Independent of the bit-string
/// sign rule in [`FockConfiguration::lambda`].
pub struct FermionOperators {
    num_sites: usize,
    annihilators: Vec<DMatrix<f64>>,
}

impl FermionOperators {
    pub fn new(num_sites: usize) -> Result<Self, OracleError> {
        if num_sites == 0 || num_sites > 4 {
            return Err(OracleError::TooManySites(num_sites));
        }
        let modes = 2 * num_sites;
        let dim = 1usize << modes;
        let annihilators = (0..modes)
            .map(|m| {
                let mut c = DMatrix::zeros(dim, dim);
                for s in 0..dim {
                    if s >> m & 1 == 1 {
                        let before = (s & ((1 << m) - 1)).count_ones();
                        c[(s ^ 1 << m, s)] = if before % 2 == 0 { 1.0 } else { -1.0 };
                    }
                }
                c
            })
            .collect();
        Ok(FermionOperators { num_sites, annihilators })
    }

    fn mode(&self, site: usize, spin: Spin) -> usize {
        spin.index() * self.num_sites + site - 1
    }

    pub fn annihilate(&self, site: usize, spin: Spin) -> &DMatrix<f64> {
        &self.annihilators[self.mode(site, spin)]
    }

    /// `c+_i c_j + c+_j c_i`
    pub fn hop(&self, i: usize, j: usize, spin: Spin) -> DMatrix<f64> {
        let ci = self.annihilate(i, spin);
        let cj = self.annihilate(j, spin);
        ci.transpose() * cj + cj.transpose() * ci
    }

    pub fn number(&self, site: usize, spin: Spin) -> DMatrix<f64> {
        let c = self.annihilate(site, spin);
        c.transpose() * c
    }

    /// Full-space index of a configuration.
    pub fn state_index(&self, n: &FockConfiguration) -> usize {
        (n.channel(Spin::Up) | n.channel(Spin::Down) << self.num_sites) as usize
    }

    /// Hamiltonian assembled from operator products over the whole space.
    pub fn hamiltonian(&self, model: &LatticeModel) -> DMatrix<f64> {
        let dim = 1usize << (2 * self.num_sites);
        let mut h = DMatrix::zeros(dim, dim);
        for e in model.hoppings() {
            if e.i == e.j {
                h -= self.number(e.i, e.spin) * (2.0 * e.eta);
            } else {
                h -= self.hop(e.i, e.j, e.spin) * e.eta;
            }
        }
        for u in model.interactions() {
            h += self.number(u.i, Spin::Up) * self.number(u.i, Spin::Down) * u.gamma;
        }
        h
    }
}

/// Counts of what [`brute_force_operator_check`] verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorCheckReport {
    pub num_sites: usize,
    pub cases: usize,
}

/// Compares the sign coefficient with explicit operator matrix elements for
/// every configuration, link and spin.
pub fn brute_force_operator_check(num_sites: usize) -> Result<OperatorCheckReport, OracleError> {
    let ops = FermionOperators::new(num_sites)?;
    let mut cases = 0;
    for spin in Spin::BOTH {
        for i in 1..num_sites {
            for j in i + 1..=num_sites {
                let hop = ops.hop(i, j, spin);
                for up in 0..=low_mask(num_sites) {
                    for down in 0..=low_mask(num_sites) {
                        let n = FockConfiguration::from_bits(num_sites, up, down).expect("in range");
                        let partner = n.flip(i, j, spin).expect("valid link");
                        let (a, b) = (ops.state_index(&n), ops.state_index(&partner));
                        let expected = hop[(b, a)];
                        let found = n.lambda(i, j, spin).expect("valid link") as f64;
                        // the column must have no other nonzero entry
                        let stray = (0..hop.nrows()).any(|r| r != b && hop[(r, a)] != 0.0);
                        if expected != found || stray {
                            return Err(OracleError::MismatchFound {
                                config: n.to_string(),
                                i,
                                j,
                                spin,
                                expected,
                                found,
                            });
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(OperatorCheckReport { num_sites, cases })
}

/// Compares [`build_hamiltonian`] with the operator-built Hamiltonian
/// restricted to every sector, entrywise within `tol`. Returns the number of
/// sectors checked.
pub fn brute_force_hamiltonian_check(model: &LatticeModel, tol: f64) -> Result<usize, OracleError> {
    let l = model.num_sites();
    let ops = FermionOperators::new(l)?;
    let full = ops.hamiltonian(model);
    let mut sectors = 0;
    for n_up in 0..=l {
        for n_down in 0..=l {
            let basis = SectorBasis::enumerate(l, Sector::new(n_up, n_down))?;
            let h = build_hamiltonian(model, &basis)?;
            let idx: Vec<usize> = basis.states.iter().map(|s| ops.state_index(s)).collect();
            for (r, &fr) in idx.iter().enumerate() {
                for (c, &fc) in idx.iter().enumerate() {
                    let (expected, found) = (full[(fr, fc)], h.entries[(r, c)]);
                    if (expected - found).abs() > tol {
                        return Err(OracleError::HamiltonianMismatch {
                            n_up,
                            n_down,
                            row: r,
                            col: c,
                            expected,
                            found,
                        });
                    }
                }
            }
            sectors += 1;
        }
    }
    // nothing leaks between sectors
    let sector_of = |s: usize| {
        let n = FockConfiguration::from_bits(l, s as u64 & low_mask(l), (s >> l) as u64).expect("in range");
        n.sector()
    };
    for c in 0..full.ncols() {
        for r in 0..full.nrows() {
            if full[(r, c)] != 0.0 && sector_of(r) != sector_of(c) {
                return Err(OracleError::HamiltonianMismatch {
                    n_up: sector_of(c).n_up,
                    n_down: sector_of(c).n_down,
                    row: r,
                    col: c,
                    expected: 0.0,
                    found: full[(r, c)],
                });
            }
        }
    }
    Ok(sectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HoppingEntry, InteractionEntry};
    use approx::assert_relative_eq;

    fn two_site(eta: f64) -> LatticeModel {
        LatticeModel::build(2, &[HoppingEntry { i: 1, j: 2, spin: Spin::Up, eta }], &[]).unwrap()
    }

    #[test]
    fn sector_sizes() {
        assert_eq!(SectorBasis::enumerate(2, Sector::new(1, 0)).unwrap().len(), 2);
        assert_eq!(SectorBasis::enumerate(2, Sector::new(1, 1)).unwrap().len(), 4);
        assert_eq!(SectorBasis::enumerate(4, Sector::new(2, 2)).unwrap().len(), 36);
        assert_eq!(sector_dimension(4, Sector::new(2, 2)), 36);
        assert_eq!(SectorBasis::enumerate(3, Sector::new(0, 0)).unwrap().len(), 1);
        assert_eq!(SectorBasis::enumerate(64, Sector::new(1, 0)).unwrap().len(), 64);
        assert!(matches!(
            SectorBasis::enumerate(2, Sector::new(3, 0)),
            Err(OracleError::InvalidSector { .. })
        ));
    }

    #[test]
    fn basis_is_sorted_and_indexed() {
        let b = SectorBasis::enumerate(4, Sector::new(2, 1)).unwrap();
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        for (k, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(k));
            assert_eq!(s.sector(), Sector::new(2, 1));
        }
    }

    #[test]
    fn two_site_hamiltonian() {
        let m = two_site(0.8);
        let b = SectorBasis::enumerate(2, Sector::new(1, 0)).unwrap();
        let h = build_hamiltonian(&m, &b).unwrap();
        assert_eq!(h.entries, DMatrix::from_row_slice(2, 2, &[0.0, -0.8, -0.8, 0.0]));
        assert!(h.is_symmetric());
    }

    #[test]
    fn vacuum_hamiltonian() {
        let m = LatticeModel::chain(3, 1.0, 2.0).unwrap();
        let b = SectorBasis::enumerate(3, Sector::new(0, 0)).unwrap();
        assert_eq!(build_hamiltonian(&m, &b).unwrap().entries, DMatrix::from_element(1, 1, 0.0));
    }

    #[test]
    fn single_site_doubly_occupied() {
        let m = LatticeModel::build(
            1,
            &[
                HoppingEntry { i: 1, j: 1, spin: Spin::Up, eta: 0.3 },
                HoppingEntry { i: 1, j: 1, spin: Spin::Down, eta: -0.2 },
            ],
            &[InteractionEntry { i: 1, gamma: 5.0 }],
        )
        .unwrap();
        let b = SectorBasis::enumerate(1, Sector::new(1, 1)).unwrap();
        let h = build_hamiltonian(&m, &b).unwrap();
        assert_relative_eq!(h.entries[(0, 0)], 5.0 - 0.6 + 0.4, epsilon = 1e-15);
    }

    #[test]
    fn basis_mismatch() {
        let b = SectorBasis::enumerate(3, Sector::new(1, 0)).unwrap();
        assert_eq!(
            build_hamiltonian(&two_site(1.0), &b),
            Err(OracleError::BasisMismatch { basis: 3, model: 2 })
        );
    }

    #[test]
    fn propagator_closed_form() {
        let eta = 0.9;
        let b = SectorBasis::enumerate(2, Sector::new(1, 0)).unwrap();
        let h = build_hamiltonian(&two_site(eta), &b).unwrap();
        let t = 1.3;
        let u = exact_propagator(&h, t, TimeMode::RealTime).unwrap();
        let (c, s) = ((eta * t).cos(), (eta * t).sin());
        for (r, col, re, im) in [(0, 0, c, 0.0), (0, 1, 0.0, s), (1, 0, 0.0, s), (1, 1, c, 0.0)] {
            assert_relative_eq!(u[(r, col)].re, re, epsilon = 1e-13);
            assert_relative_eq!(u[(r, col)].im, im, epsilon = 1e-13);
        }
        let v = exact_propagator(&h, t, TimeMode::ImaginaryTime).unwrap();
        assert_relative_eq!(v[(0, 0)].re, (eta * t).cosh(), max_relative = 1e-13);
        assert_relative_eq!(v[(1, 0)].re, (eta * t).sinh(), max_relative = 1e-13);

        let id = exact_propagator(&h, 0.0, TimeMode::RealTime).unwrap();
        assert_relative_eq!((id - DMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn propagator_unitary() {
        let m = LatticeModel::chain(4, 1.0, 4.0).unwrap();
        let b = SectorBasis::enumerate(4, Sector::new(2, 1)).unwrap();
        let h = build_hamiltonian(&m, &b).unwrap();
        let u = exact_propagator(&h, 0.9, TimeMode::RealTime).unwrap();
        let err = (&u * u.adjoint() - DMatrix::identity(b.len(), b.len())).norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn ode_residual_zero_hamiltonian() {
        let h = DenseHermitian { entries: DMatrix::zeros(3, 3) };
        assert_eq!(ode_residual(&h, 0.7, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn ode_residual_first_order() {
        let b = SectorBasis::enumerate(2, Sector::new(1, 0)).unwrap();
        let h = build_hamiltonian(&two_site(1.0), &b).unwrap();
        let norm = Spectrum::new(&h).unwrap().spectral_norm();
        let r1 = ode_residual(&h, 1.0, 1e-5).unwrap();
        let r2 = ode_residual(&h, 1.0, 5e-6).unwrap();
        assert!(r1 <= 10.0 * norm * norm * 1e-5);
        assert!(r2 < r1);
    }

    #[test]
    fn operator_check_small() {
        assert_eq!(brute_force_operator_check(2).unwrap().cases, 2 * 16);
        assert_eq!(brute_force_operator_check(3).unwrap().cases, 2 * 3 * 64);
        assert!(matches!(brute_force_operator_check(5), Err(OracleError::TooManySites(5))));
    }

    #[test]
    fn vacuum_operator_element() {
        let ops = FermionOperators::new(2).unwrap();
        let hop = ops.hop(1, 2, Spin::Up);
        let vac = FockConfiguration::vacuum(2).unwrap();
        let a = ops.state_index(&vac);
        assert!((0..hop.nrows()).all(|r| hop[(r, a)] == 0.0));
        assert_eq!(vac.lambda(1, 2, Spin::Up), Ok(0));
    }

    #[test]
    fn hamiltonian_check_chain() {
        let m = LatticeModel::chain(3, 0.7, 2.0).unwrap();
        assert_eq!(brute_force_hamiltonian_check(&m, 1e-12).unwrap(), 16);
    }
}
