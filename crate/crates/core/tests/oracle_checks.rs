use hubbard_poisson::oracle::FermionOperators;
use hubbard_poisson::{
    brute_force_hamiltonian_check, brute_force_operator_check, build_hamiltonian, exact_propagator,
    ode_residual, stream_rng, FockConfiguration, HoppingEntry, InteractionEntry, LatticeModel,
    Sector, SectorBasis, Spectrum, Spin, TimeMode,
};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn lambda_matches_operators_up_to_four_sites() {
    for l in 2..=4 {
        let report = brute_force_operator_check(l).unwrap();
        assert_eq!(report.cases, 2 * l * (l - 1) / 2 * (1 << (2 * l)));
    }
}

#[test]
fn hamiltonian_matches_operators_random_models() {
    let mut rng = stream_rng(1234, 0);
    for _ in 0..10 {
        for l in 1..=3 {
            let mut hops = Vec::new();
            for spin in Spin::BOTH {
                for i in 1..=l {
                    for j in i..=l {
                        hops.push(HoppingEntry { i, j, spin, eta: rng.random_range(-1.5..1.5) });
                    }
                }
            }
            let ints: Vec<_> =
                (1..=l).map(|i| InteractionEntry { i, gamma: rng.random_range(0.0..4.0) }).collect();
            let m = LatticeModel::build(l, &hops, &ints).unwrap();
            assert_eq!(brute_force_hamiltonian_check(&m, 1e-12).unwrap(), (l + 1) * (l + 1));
        }
    }
}

#[test]
fn operators_anticommute() {
    let ops = FermionOperators::new(2).unwrap();
    let modes: Vec<_> = (1..=2).flat_map(|s| Spin::BOTH.map(|sp| (s, sp))).collect();
    for &(a, sa) in &modes {
        for &(b, sb) in &modes {
            let ca = ops.annihilate(a, sa);
            let cb = ops.annihilate(b, sb);
            let anti = ca * cb.transpose() + cb.transpose() * ca;
            let expected = if (a, sa) == (b, sb) { DMatrix::identity(16, 16) } else { DMatrix::zeros(16, 16) };
            assert_eq!(anti, expected);
        }
    }
}

#[test]
fn imaginary_time_propagator_is_positive_definite() {
    let m = LatticeModel::chain(4, 1.0, 4.0).unwrap();
    let b = SectorBasis::enumerate(4, Sector::new(1, 1)).unwrap();
    let h = build_hamiltonian(&m, &b).unwrap();
    let u = exact_propagator(&h, 0.5, TimeMode::ImaginaryTime).unwrap();
    let re = u.map(|z| z.re);
    assert!((&re - re.transpose()).amax() < 1e-10);
    assert!(u.iter().all(|z| z.im == 0.0));
    let eig = nalgebra::SymmetricEigen::new(re);
    assert!(eig.eigenvalues.iter().all(|&e| e > 0.0));
}

#[test]
fn ode_residual_converges_first_order() {
    let m = LatticeModel::chain(4, 1.0, 4.0).unwrap();
    let b = SectorBasis::enumerate(4, Sector::new(1, 1)).unwrap();
    let h = build_hamiltonian(&m, &b).unwrap();
    let norm = Spectrum::new(&h).unwrap().spectral_norm();
    let r1 = ode_residual(&h, 0.5, 1e-5).unwrap();
    let r2 = ode_residual(&h, 0.5, 5e-6).unwrap();
    assert!(r1 <= 10.0 * norm * norm * 1e-5);
    let ratio = r2 / r1;
    assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn block_diagonal_over_sectors() {
    // operator-built H never couples different particle numbers
    let m = LatticeModel::chain(2, 0.8, 1.0).unwrap();
    let ops = FermionOperators::new(2).unwrap();
    let h = ops.hamiltonian(&m);
    for a in 0..16u64 {
        for b in 0..16u64 {
            let na = FockConfiguration::from_bits(2, a & 3, a >> 2).unwrap();
            let nb = FockConfiguration::from_bits(2, b & 3, b >> 2).unwrap();
            if na.sector() != nb.sector() {
                assert_eq!(h[(ops.state_index(&nb), ops.state_index(&na))], 0.0);
            }
        }
    }
}
