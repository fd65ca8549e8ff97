//! Turns parsed flags into validated library inputs.

use std::fs;
use std::path::Path;

use hubbard_poisson::{
    FockConfiguration, HoppingEntry, InteractionEntry, LatticeModel, LinkTable, ModelConfig,
    RateTable, Sampling, Spin,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{ModelArgs, SamplingArgs};
use crate::error::CliError;

fn parse_range(field: &str, text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::config(field, format!("expected LO,HI with LO <= HI, got {text:?}"));
    let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Chain with seeded random hoppings per link and spin, interactions per
/// site, and optionally site energies per site and spin.
pub fn disordered_chain(
    num_sites: usize,
    seed: u64,
    eta_range: (f64, f64),
    gamma_range: (f64, f64),
    site_energy_range: Option<(f64, f64)>,
) -> Result<LatticeModel, hubbard_poisson::ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hops = Vec::new();
    for i in 1..num_sites {
        for spin in Spin::BOTH {
            hops.push(HoppingEntry { i, j: i + 1, spin, eta: uniform(&mut rng, eta_range) });
        }
    }
    let interactions: Vec<_> = (1..=num_sites)
        .map(|i| InteractionEntry { i, gamma: uniform(&mut rng, gamma_range) })
        .collect();
    if let Some(range) = site_energy_range {
        for i in 1..=num_sites {
            for spin in Spin::BOTH {
                hops.push(HoppingEntry { i, j: i, spin, eta: uniform(&mut rng, range) });
            }
        }
    }
    LatticeModel::build(num_sites, &hops, &interactions)
}

pub fn load_config(path: &Path) -> Result<(LatticeModel, RateTable), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
    let config = ModelConfig::from_json(&text)
        .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
    config
        .build()
        .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))
}

/// Model and its rates (defaults, or the config file's overrides).
pub fn model(args: &ModelArgs) -> Result<(LatticeModel, RateTable), CliError> {
    if let Some(path) = &args.config {
        return load_config(path);
    }
    let l = args.chain.ok_or_else(|| CliError::config("--config", "either --config or --chain is required"))?;
    let model = match args.disorder_seed {
        Some(seed) => {
            let eta = parse_range("--eta-range", &args.eta_range)?;
            let gamma = parse_range("--gamma-range", &args.gamma_range)?;
            let site = args
                .site_energy_range
                .as_deref()
                .map(|r| parse_range("--site-energy-range", r))
                .transpose()?;
            disordered_chain(l, seed, eta, gamma, site)
        }
        None => LatticeModel::chain(l, args.eta, args.gamma),
    }
    .map_err(|e| CliError::config("--chain", e))?;
    let rates = model.default_rates();
    Ok((model, rates))
}

pub fn configuration(field: &str, text: &str, model: &LatticeModel) -> Result<FockConfiguration, CliError> {
    let n: FockConfiguration = text.parse().map_err(|e| CliError::config(field, e))?;
    if n.num_sites() != model.num_sites() {
        return Err(CliError::config(
            field,
            format!("bit strings have length {}, model has {} sites", n.num_sites(), model.num_sites()),
        ));
    }
    Ok(n)
}

pub fn time(t: f64) -> Result<f64, CliError> {
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(CliError::config("--t", format!("must be finite and non-negative, got {t}")))
    }
}

pub fn scaled_rates(rates: &RateTable, mult: Option<f64>) -> Result<RateTable, CliError> {
    match mult {
        None => Ok(rates.clone()),
        Some(k) if k > 0.0 && k.is_finite() => {
            rates.scaled(k).map_err(|e| CliError::config("--rate-mult", e))
        }
        Some(k) => Err(CliError::config("--rate-mult", format!("must be positive, got {k}"))),
    }
}

pub fn link_table(model: &LatticeModel, rates: &RateTable) -> Result<LinkTable, CliError> {
    LinkTable::new(model, rates).map_err(|e| CliError::config("--config", e))
}

pub fn sampling(args: &SamplingArgs) -> Result<Sampling, CliError> {
    if args.ntraj == 0 {
        return Err(CliError::config("--ntraj", "must be at least 1"));
    }
    Ok(Sampling::new(args.ntraj, args.seed).with_workers(args.workers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("x", "0.5,1.5").unwrap(), (0.5, 1.5));
        assert_eq!(parse_range("x", "-1, 2").unwrap(), (-1.0, 2.0));
        assert!(parse_range("x", "2,1").is_err());
        assert!(parse_range("x", "abc").is_err());
    }

    #[test]
    fn disorder_is_seeded_and_in_range() {
        let a = disordered_chain(4, 7, (0.5, 1.5), (0.0, 4.0), None).unwrap();
        let b = disordered_chain(4, 7, (0.5, 1.5), (0.0, 4.0), None).unwrap();
        let c = disordered_chain(4, 8, (0.5, 1.5), (0.0, 4.0), None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.link_sets().len(), 6);
        assert!(a.hoppings().all(|h| (0.5..=1.5).contains(&h.eta)));
        assert!(a.interactions().all(|u| (0.0..=4.0).contains(&u.gamma)));
        let d = disordered_chain(3, 1, (0.5, 1.5), (0.0, 4.0), Some((-1.0, 1.0))).unwrap();
        assert!(d.site_energy(2, Spin::Down) != 0.0);
    }

    #[test]
    fn configuration_length_is_checked() {
        let m = LatticeModel::chain(3, 1.0, 0.0).unwrap();
        let err = configuration("--from", "10/01", &m).unwrap_err();
        assert!(err.to_string().contains("--from"));
        assert!(configuration("--from", "100/001", &m).is_ok());
    }
}
