use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use hubbard_poisson::oracle::sector_dimension;
use hubbard_poisson::{
    build_hamiltonian, estimate_element, estimate_row, exact_propagator, run_trajectory_traced,
    stream_rng, Complex64, ComplexValue, ElementRecord, EstimatorResult, FockConfiguration,
    LatticeModel, LinkTable, Notice, SectorBasis, TimeMode,
};
use serde::Serialize;

use crate::args::{CompareArgs, ExactArgs, Format, PropagateArgs, ScanArgs};
use crate::error::CliError;
use crate::setup;

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    s.push('\n');
    Ok(s)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(CliError::runtime)?;
    }
    let bytes = w.into_inner().map_err(CliError::runtime)?;
    String::from_utf8(bytes).map_err(CliError::runtime)
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::runtime(e)
}

fn write_trace(
    path: &Path,
    table: &LinkTable,
    n: &FockConfiguration,
    t: f64,
    mode: TimeMode,
    seed: u64,
    count: u64,
) -> Result<(), CliError> {
    let mut text = String::from("# trajectory time i j spin lambda log_weight phase\n");
    for k in 0..count {
        let mut rng = stream_rng(seed, k);
        let (last, weight) = run_trajectory_traced(table, n, t, mode, &mut rng, |rec| {
            let e = rec.event;
            let _ = writeln!(
                text,
                "{k} {:.12} {} {} {} {} {:.12} {:.12}",
                e.time, e.link.i, e.link.j, e.link.spin, e.lambda, rec.log_magnitude, rec.phase
            );
        })
        .map_err(runtime)?;
        let _ = writeln!(
            text,
            "# trajectory {k} ends in {} with log_weight {:.12} phase {:.12}",
            last.to_bit_string(),
            weight.log_magnitude(),
            weight.phase()
        );
    }
    fs::write(path, text).map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
}

pub fn propagate(args: &PropagateArgs) -> Result<ExitCode, CliError> {
    let (model, rates) = setup::model(&args.model)?;
    let rates = setup::scaled_rates(&rates, args.sampling.rate_mult)?;
    let table = setup::link_table(&model, &rates)?;
    let n = setup::configuration("--from", &args.state.from, &model)?;
    let t = setup::time(args.state.t)?;
    let mode: TimeMode = args.state.mode.into();
    let sampling = setup::sampling(&args.sampling)?;
    let seed = args.sampling.seed;

    if let Some(path) = &args.trace {
        write_trace(path, &table, &n, t, mode, seed, args.trace_count)?;
    }

    let records: Vec<ElementRecord> = match &args.state.to {
        Some(to) => {
            let n_prime = setup::configuration("--to", to, &model)?;
            let r = estimate_element(&table, &n, &n_prime, t, mode, &sampling).map_err(runtime)?;
            if r.notice == Some(Notice::SectorMismatch) {
                eprintln!("note: --from and --to lie in different sectors; the element is exactly 0");
            }
            vec![ElementRecord::new(&n, &n_prime, t, mode, seed, &r)]
        }
        None => estimate_row(&table, &n, t, mode, &sampling)
            .map_err(runtime)?
            .iter()
            .map(|(n_prime, r)| ElementRecord::new(&n, n_prime, t, mode, seed, r))
            .collect(),
    };
    let total_hits: u64 = records.iter().map(|r| r.n_hits).sum();
    eprintln!(
        "{} trajectories, hit rate {:.4}",
        sampling.n_trajectories,
        total_hits as f64 / sampling.n_trajectories as f64
    );

    let text = match (args.output.format.unwrap_or(Format::Json), args.state.to.is_some()) {
        (Format::Json, true) => to_json(&records[0])?,
        (Format::Json, false) => to_json(&records)?,
        (Format::Csv, _) => to_csv(&records.iter().map(ElementRecord::to_row).collect::<Vec<_>>())?,
    };
    emit(args.output.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn sector_basis(model: &LatticeModel, n: &FockConfiguration, max_dim: usize) -> Result<SectorBasis, CliError> {
    let sector = n.sector();
    let dim = sector_dimension(model.num_sites(), sector);
    if dim > max_dim as u128 {
        return Err(CliError::runtime(format!(
            "sector ({},{}) has dimension {dim}, above --max-dim {max_dim}",
            sector.n_up, sector.n_down
        )));
    }
    SectorBasis::enumerate(model.num_sites(), sector).map_err(runtime)
}

#[derive(Debug, Serialize)]
struct SectorLabel {
    n_up: usize,
    n_down: usize,
}

#[derive(Debug, Serialize)]
struct ExactBlock {
    sector: SectorLabel,
    t: f64,
    mode: TimeMode,
    /// Row and column labels; rows are final configurations.
    labels: Vec<String>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct ExactRow {
    n_prime: String,
    n: String,
    re: f64,
    im: f64,
}

pub fn exact(args: &ExactArgs) -> Result<ExitCode, CliError> {
    let (model, _) = setup::model(&args.model)?;
    let n = setup::configuration("--from", &args.from, &model)?;
    let t = setup::time(args.t)?;
    let mode: TimeMode = args.mode.into();
    let basis = sector_basis(&model, &n, args.max_dim)?;
    let h = build_hamiltonian(&model, &basis).map_err(runtime)?;
    let u = exact_propagator(&h, t, mode).map_err(runtime)?;
    let labels: Vec<String> = basis.states().iter().map(|s| s.to_bit_string()).collect();

    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let rows = |f: fn(&Complex64) -> f64| {
                (0..u.nrows()).map(|r| (0..u.ncols()).map(|c| f(&u[(r, c)])).collect()).collect()
            };
            to_json(&ExactBlock {
                sector: SectorLabel { n_up: basis.sector().n_up, n_down: basis.sector().n_down },
                t,
                mode,
                labels,
                re: rows(|z| z.re),
                im: rows(|z| z.im),
            })?
        }
        Format::Csv => {
            let mut rows = Vec::new();
            for (c, col) in labels.iter().enumerate() {
                for (r, row) in labels.iter().enumerate() {
                    let z = u[(r, c)];
                    rows.push(ExactRow { n_prime: row.clone(), n: col.clone(), re: z.re, im: z.im });
                }
            }
            to_csv(&rows)?
        }
    };
    emit(args.output.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

/// Largest componentwise |z|. A zero standard error counts as agreement
/// only when the difference is at rounding level.
pub fn z_score(mc: &EstimatorResult, exact: Complex64) -> f64 {
    let component = |diff: f64, se: f64| {
        if se > 0.0 {
            (diff / se).abs()
        } else if diff.abs() <= 1e-9 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let d = mc.mean - exact;
    component(d.re, mc.stderr_real).max(component(d.im, mc.stderr_imag))
}

#[derive(Debug, Serialize)]
struct CompareRow {
    n_prime: String,
    mc: ComplexValue,
    exact: ComplexValue,
    stderr: ComplexValue,
    n_hits: u64,
    /// null when infinite
    z: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CompareFlatRow {
    n_prime: String,
    mc_re: f64,
    mc_im: f64,
    exact_re: f64,
    exact_im: f64,
    stderr_re: f64,
    stderr_im: f64,
    n_hits: u64,
    z: f64,
}

#[derive(Debug, Serialize)]
struct CompareReport {
    n: String,
    t: f64,
    mode: TimeMode,
    n_trajectories: u64,
    seed: u64,
    threshold: f64,
    max_abs_z: Option<f64>,
    pass: bool,
    rows: Vec<CompareRow>,
}

fn zero_result(n_trajectories: u64) -> EstimatorResult {
    EstimatorResult {
        mean: Complex64::new(0.0, 0.0),
        stderr_real: 0.0,
        stderr_imag: 0.0,
        n_trajectories,
        n_hits: 0,
        notice: None,
    }
}

pub fn compare(args: &CompareArgs) -> Result<ExitCode, CliError> {
    let (model, rates) = setup::model(&args.model)?;
    let rates = setup::scaled_rates(&rates, args.sampling.rate_mult)?;
    let table = setup::link_table(&model, &rates)?;
    let n = setup::configuration("--from", &args.state.from, &model)?;
    let t = setup::time(args.state.t)?;
    let mode: TimeMode = args.state.mode.into();
    let sampling = setup::sampling(&args.sampling)?;
    if args.z_threshold.is_nan() || args.z_threshold <= 0.0 {
        return Err(CliError::config("--z-threshold", "must be positive"));
    }

    let oracle_model = match &args.oracle_config {
        Some(path) => {
            let (m, _) = setup::load_config(path)?;
            if m.num_sites() != model.num_sites() {
                return Err(CliError::config("--oracle-config", "site count differs from the sampled model"));
            }
            m
        }
        None => model.clone(),
    };
    let basis = sector_basis(&oracle_model, &n, args.max_dim)?;
    let h = build_hamiltonian(&oracle_model, &basis).map_err(runtime)?;
    let u = exact_propagator(&h, t, mode).map_err(runtime)?;
    let col = basis.index_of(&n).expect("basis built from n's sector");

    let mc: BTreeMap<FockConfiguration, EstimatorResult> = match &args.state.to {
        Some(to) => {
            let n_prime = setup::configuration("--to", to, &model)?;
            let r = estimate_element(&table, &n, &n_prime, t, mode, &sampling).map_err(runtime)?;
            BTreeMap::from([(n_prime, r)])
        }
        None => {
            let row = estimate_row(&table, &n, t, mode, &sampling).map_err(runtime)?;
            basis
                .states()
                .iter()
                .map(|s| (*s, row.get(s).copied().unwrap_or_else(|| zero_result(sampling.n_trajectories))))
                .collect()
        }
    };

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (n_prime, r) in &mc {
        let exact = match basis.index_of(n_prime) {
            Some(row) => u[(row, col)],
            None => Complex64::new(0.0, 0.0),
        };
        let z = z_score(r, exact);
        worst = worst.max(z);
        rows.push(CompareRow {
            n_prime: n_prime.to_bit_string(),
            mc: ComplexValue { re: r.mean.re, im: r.mean.im },
            exact: ComplexValue { re: exact.re, im: exact.im },
            stderr: ComplexValue { re: r.stderr_real, im: r.stderr_imag },
            n_hits: r.n_hits,
            z: z.is_finite().then_some(z),
        });
    }
    let pass = worst <= args.z_threshold;

    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&CompareReport {
            n: n.to_bit_string(),
            t,
            mode,
            n_trajectories: sampling.n_trajectories,
            seed: args.sampling.seed,
            threshold: args.z_threshold,
            max_abs_z: worst.is_finite().then_some(worst),
            pass,
            rows,
        })?,
        Format::Csv => to_csv(
            &rows
                .into_iter()
                .map(|r| CompareFlatRow {
                    n_prime: r.n_prime,
                    mc_re: r.mc.re,
                    mc_im: r.mc.im,
                    exact_re: r.exact.re,
                    exact_im: r.exact.im,
                    stderr_re: r.stderr.re,
                    stderr_im: r.stderr.im,
                    n_hits: r.n_hits,
                    z: r.z.unwrap_or(f64::INFINITY),
                })
                .collect::<Vec<_>>(),
        )?,
    };
    emit(args.output.out.as_deref(), &text)?;
    eprintln!(
        "max |z| = {worst:.3} over {} elements (threshold {}): {}",
        mc.len(),
        args.z_threshold,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Debug, Clone, Serialize)]
struct ScanRow {
    multiplier: f64,
    mean_re: f64,
    mean_im: f64,
    stderr_re: f64,
    stderr_im: f64,
    n_hits: u64,
    n_trajectories: u64,
}

/// Pairwise `|a - b| <= k * sqrt(se_a^2 + se_b^2)` on both components.
fn consistent(a: &ScanRow, b: &ScanRow, k: f64) -> bool {
    let ok = |da: f64, db: f64, sa: f64, sb: f64| (da - db).abs() <= k * sa.hypot(sb) + 1e-12;
    ok(a.mean_re, b.mean_re, a.stderr_re, b.stderr_re) && ok(a.mean_im, b.mean_im, a.stderr_im, b.stderr_im)
}

pub fn scan_rates(args: &ScanArgs) -> Result<ExitCode, CliError> {
    let (model, _) = setup::model(&args.model)?;
    let n = setup::configuration("--from", &args.state.from, &model)?;
    let to = args.state.to.as_deref().ok_or_else(|| CliError::config("--to", "required for scan-rates"))?;
    let n_prime = setup::configuration("--to", to, &model)?;
    let t = setup::time(args.state.t)?;
    let mode: TimeMode = args.state.mode.into();
    let sampling = setup::sampling(&args.sampling)?;
    if args.multipliers.is_empty() {
        return Err(CliError::config("--multipliers", "need at least one value"));
    }
    if let Some(&bad) = args.multipliers.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
        return Err(CliError::config("--multipliers", format!("rates must be positive, got multiplier {bad}")));
    }

    let mut rows = Vec::new();
    for &k in &args.multipliers {
        let rates = model.default_rates().scaled(k).map_err(|e| CliError::config("--multipliers", e))?;
        let table = setup::link_table(&model, &rates)?;
        let r = estimate_element(&table, &n, &n_prime, t, mode, &sampling).map_err(runtime)?;
        rows.push(ScanRow {
            multiplier: k,
            mean_re: r.mean.re,
            mean_im: r.mean.im,
            stderr_re: r.stderr_real,
            stderr_im: r.stderr_imag,
            n_hits: r.n_hits,
            n_trajectories: r.n_trajectories,
        });
    }
    let pass = rows.iter().all(|a| rows.iter().all(|b| consistent(a, b, 4.0)));

    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&rows)?,
    };
    emit(args.output.out.as_deref(), &text)?;
    if let Some(best) = rows.iter().min_by(|a, b| {
        a.stderr_re.hypot(a.stderr_im).total_cmp(&b.stderr_re.hypot(b.stderr_im))
    }) {
        eprintln!("smallest standard error at multiplier {}", best.multiplier);
    }
    if !pass {
        eprintln!("estimates differ by more than 4 combined standard errors");
    }
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
