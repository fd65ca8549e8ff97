//! Monte Carlo estimation of propagator matrix elements.
//!
//! Each trajectory starts from `n`, jumps only along active links, and
//! carries a complex weight accumulated in log-polar form. The element
//! `<n'| exp(-iHt) |n>` is the mean over trajectories of the weight times the
//! indicator that the trajectory ends in `n'`.
//!
//! Per completed jump the weight picks up `i eta / rho * lambda` (imaginary
//! time: `eta / rho * lambda`); every inter-jump segment of length `ds` picks
//! up `exp[(zeta - iV) ds]` (imaginary time: `exp[(zeta - V) ds]`), where
//! `zeta` is the total active rate and `V` the diagonal potential of the
//! configuration holding during the segment.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::FockConfiguration;
use crate::trajectory::{stream_rng, ActiveLinkState, JumpEvent, LinkTable, TrajectoryError};

/// Trajectories per batch. Fixed so that the reduction tree, and therefore
/// the bits of the result, do not depend on the worker count.
pub const BATCH_SIZE: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("time must be finite and non-negative, got {0}")]
    NegativeTime(f64),
    #[error("number of trajectories must be at least 1")]
    ZeroTrajectories,
    #[error("no batches to combine")]
    EmptyBatchList,
    #[error("failed to build worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum TimeMode {
    /// `exp(-iHt)`
    #[default]
    #[serde(rename = "real")]
    RealTime,
    /// `exp(-Ht)`
    #[serde(rename = "imag")]
    ImaginaryTime,
}

impl TimeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeMode::RealTime => "real",
            TimeMode::ImaginaryTime => "imag",
        }
    }
}

impl fmt::Display for TimeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TimeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(TimeMode::RealTime),
            "imag" => Ok(TimeMode::ImaginaryTime),
            other => Err(format!("unknown mode {other:?}, expected real or imag")),
        }
    }
}

/// Wraps an angle into (-pi, pi].
fn wrap_angle(x: f64) -> f64 {
    let a = x.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Complex trajectory weight in log-polar form.
///
/// The phase is split into a whole number of quarter turns (from the `i` and
/// sign factors of jumps, kept exact) and a continuous angle (from the
/// potential, real time only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryWeight {
    Zero,
    Polar {
        log_magnitude: f64,
        quarter_turns: u8,
        angle: f64,
    },
}

impl TrajectoryWeight {
    pub const ONE: TrajectoryWeight =
        TrajectoryWeight::Polar { log_magnitude: 0.0, quarter_turns: 0, angle: 0.0 };

    pub fn log_magnitude(&self) -> f64 {
        match *self {
            TrajectoryWeight::Zero => f64::NEG_INFINITY,
            TrajectoryWeight::Polar { log_magnitude, .. } => log_magnitude,
        }
    }

    /// Total phase in (-pi, pi]; 0 for the zero weight.
    pub fn phase(&self) -> f64 {
        match *self {
            TrajectoryWeight::Zero => 0.0,
            TrajectoryWeight::Polar { quarter_turns: q, angle, .. } => {
                if angle == 0.0 {
                    // exact for the imaginary-time case
                    [0.0, PI / 2.0, PI, -PI / 2.0][q as usize]
                } else {
                    wrap_angle(q as f64 * PI / 2.0 + angle)
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TrajectoryWeight::Zero)
    }

    pub fn to_complex(&self) -> Complex64 {
        match *self {
            TrajectoryWeight::Zero => Complex64::new(0.0, 0.0),
            TrajectoryWeight::Polar { log_magnitude, quarter_turns, angle } => {
                let r = log_magnitude.exp();
                let (re, im) = if angle == 0.0 { (r, 0.0) } else { (r * angle.cos(), r * angle.sin()) };
                match quarter_turns {
                    0 => Complex64::new(re, im),
                    1 => Complex64::new(-im, re),
                    2 => Complex64::new(-re, -im),
                    _ => Complex64::new(im, -re),
                }
            }
        }
    }

    fn scale_log(&mut self, delta: f64) {
        if let TrajectoryWeight::Polar { log_magnitude, .. } = self {
            *log_magnitude += delta;
        }
    }

    fn rotate_quarters(&mut self, turns: u8) {
        if let TrajectoryWeight::Polar { quarter_turns, .. } = self {
            *quarter_turns = (*quarter_turns + turns) % 4;
        }
    }

    fn rotate(&mut self, delta: f64) {
        if let TrajectoryWeight::Polar { angle, .. } = self {
            *angle = wrap_angle(*angle + delta);
        }
    }
}

/// A completed jump together with the running weight after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub event: JumpEvent,
    pub log_magnitude: f64,
    pub phase: f64,
}

/// Runs one trajectory from `n` up to time `t` and returns the final
/// configuration and its weight.
pub fn run_trajectory<R: Rng + ?Sized>(
    table: &LinkTable,
    n: &FockConfiguration,
    t: f64,
    mode: TimeMode,
    rng: &mut R,
) -> Result<(FockConfiguration, TrajectoryWeight), EstimatorError> {
    run_trajectory_traced(table, n, t, mode, rng, |_| {})
}

/// [`run_trajectory`] with a callback invoked after every completed jump.
pub fn run_trajectory_traced<R, F>(
    table: &LinkTable,
    n: &FockConfiguration,
    t: f64,
    mode: TimeMode,
    rng: &mut R,
    mut trace: F,
) -> Result<(FockConfiguration, TrajectoryWeight), EstimatorError>
where
    R: Rng + ?Sized,
    F: FnMut(&TraceRecord),
{
    check_time(t)?;
    table.check_configuration(n)?;

    let mut config = *n;
    let mut state = ActiveLinkState::init(table, &config);
    let mut weight = TrajectoryWeight::ONE;
    let mut now = 0.0;

    loop {
        let zeta = state.total_active_rate();
        let v = table.potential(&config);
        let next = match state.sample_waiting_time(rng) {
            Ok(dt) => now + dt,
            Err(TrajectoryError::NoActiveLinks) => f64::INFINITY,
            Err(e) => return Err(e.into()),
        };
        let end = if next > t { t } else { next };

        let ds = end - now;
        match mode {
            TimeMode::RealTime => {
                weight.scale_log(zeta * ds);
                if v != 0.0 {
                    weight.rotate(-v * ds);
                }
            }
            TimeMode::ImaginaryTime => weight.scale_log((zeta - v) * ds),
        }
        if next > t {
            break;
        }

        let id = state.select_link(table, rng)?;
        let entry = table.entry(id);
        let link = entry.link;
        let lambda = config.lambda_unchecked(link.i, link.j, link.spin);
        debug_assert_ne!(lambda, 0, "sampled an inactive link");
        if lambda == 0 {
            weight = TrajectoryWeight::Zero;
        }
        weight.scale_log((entry.eta.abs() / entry.rate).ln());
        let negative = (entry.eta < 0.0) != (lambda < 0);
        let turns = match mode {
            TimeMode::RealTime => 1,
            TimeMode::ImaginaryTime => 0,
        } + if negative { 2 } else { 0 };
        weight.rotate_quarters(turns);

        config = state.apply_jump(table, &config, id)?;
        now = next;
        trace(&TraceRecord {
            event: JumpEvent { time: now, link, lambda },
            log_magnitude: weight.log_magnitude(),
            phase: weight.phase(),
        });
    }
    Ok((config, weight))
}

fn check_time(t: f64) -> Result<(), EstimatorError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(EstimatorError::NegativeTime(t))
    }
}

/// Running moments of complex samples (Welford), mergeable exactly.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: Complex64,
    pub m2_re: f64,
    pub m2_im: f64,
}

impl Moments {
    pub fn push(&mut self, x: Complex64) {
        self.count += 1;
        let k = self.count as f64;
        let d = x - self.mean;
        self.mean += d / k;
        let d2 = x - self.mean;
        self.m2_re += d.re * d2.re;
        self.m2_im += d.im * d2.im;
    }

    /// Pooled moments of the union of both sample sets.
    pub fn merge(&self, other: &Moments) -> Moments {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        Moments {
            count: self.count + other.count,
            mean: self.mean + d * (nb / n),
            m2_re: self.m2_re + other.m2_re + d.re * d.re * na * nb / n,
            m2_im: self.m2_im + other.m2_im + d.im * d.im * na * nb / n,
        }
    }

    /// Adds `count` exact zeros.
    pub fn pad_zeros(&self, count: u64) -> Moments {
        self.merge(&Moments { count, ..Moments::default() })
    }

    fn standard_errors(&self) -> (f64, f64) {
        if self.count < 2 {
            return (0.0, 0.0);
        }
        let n = self.count as f64;
        let se = |m2: f64| (m2.max(0.0) / (n - 1.0) / n).sqrt();
        (se(self.m2_re), se(self.m2_im))
    }
}

/// Sums for one batch of trajectories estimating a single element: moments
/// over the hits only; misses contribute exact zeros at finalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchAccumulator {
    pub n_trajectories: u64,
    pub hits: Moments,
}

impl BatchAccumulator {
    pub fn record(&mut self, value: Option<Complex64>) {
        self.n_trajectories += 1;
        if let Some(x) = value {
            self.hits.push(x);
        }
    }

    pub fn merge(&self, other: &BatchAccumulator) -> BatchAccumulator {
        BatchAccumulator {
            n_trajectories: self.n_trajectories + other.n_trajectories,
            hits: self.hits.merge(&other.hits),
        }
    }

    pub fn finish(&self) -> EstimatorResult {
        let all = self.hits.pad_zeros(self.n_trajectories - self.hits.count);
        let (stderr_real, stderr_imag) = all.standard_errors();
        EstimatorResult {
            mean: all.mean,
            stderr_real,
            stderr_imag,
            n_trajectories: self.n_trajectories,
            n_hits: self.hits.count,
            notice: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Notice {
    /// Initial and final configurations lie in different particle-number
    /// sectors; the element is exactly zero and nothing was sampled.
    SectorMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub mean: Complex64,
    pub stderr_real: f64,
    pub stderr_imag: f64,
    pub n_trajectories: u64,
    pub n_hits: u64,
    pub notice: Option<Notice>,
}

impl EstimatorResult {
    pub fn hit_rate(&self) -> f64 {
        self.n_hits as f64 / self.n_trajectories as f64
    }
}

/// Pools batch sums in list order.
pub fn combine_batches(batches: &[BatchAccumulator]) -> Result<EstimatorResult, EstimatorError> {
    let (first, rest) = batches.split_first().ok_or(EstimatorError::EmptyBatchList)?;
    Ok(rest.iter().fold(*first, |acc, b| acc.merge(b)).finish())
}

/// Sampling budget and reproducibility controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub n_trajectories: u64,
    pub master_seed: u64,
    /// Worker threads; 0 means available parallelism. Never affects results.
    pub workers: usize,
}

impl Sampling {
    pub fn new(n_trajectories: u64, master_seed: u64) -> Self {
        Sampling { n_trajectories, master_seed, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn batches(&self) -> Vec<Range<u64>> {
        (0..self.n_trajectories.div_ceil(BATCH_SIZE))
            .map(|b| b * BATCH_SIZE..((b + 1) * BATCH_SIZE).min(self.n_trajectories))
            .collect()
    }
}

/// Runs `work` on every batch, in parallel, returning results in batch order.
fn run_batches<A, F>(sampling: &Sampling, work: F) -> Result<Vec<A>, EstimatorError>
where
    A: Send,
    F: Fn(Range<u64>) -> A + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sampling.workers)
        .build()
        .map_err(|e| EstimatorError::WorkerPool(e.to_string()))?;
    let batches = sampling.batches();
    Ok(pool.install(|| batches.into_par_iter().map(&work).collect()))
}

fn check_inputs(
    table: &LinkTable,
    n: &FockConfiguration,
    t: f64,
    sampling: &Sampling,
) -> Result<(), EstimatorError> {
    check_time(t)?;
    if sampling.n_trajectories == 0 {
        return Err(EstimatorError::ZeroTrajectories);
    }
    table.check_configuration(n)?;
    Ok(())
}

/// Batch sums for `<n'| U(t) |n>`, one entry per batch in index order.
pub fn element_batches(
    table: &LinkTable,
    n: &FockConfiguration,
    n_prime: &FockConfiguration,
    t: f64,
    mode: TimeMode,
    sampling: &Sampling,
) -> Result<Vec<BatchAccumulator>, EstimatorError> {
    check_inputs(table, n, t, sampling)?;
    table.check_configuration(n_prime)?;
    let batches = run_batches(sampling, |range| {
        let mut acc = BatchAccumulator::default();
        for k in range {
            let mut rng = stream_rng(sampling.master_seed, k);
            let (last, weight) =
                run_trajectory(table, n, t, mode, &mut rng).expect("inputs validated");
            acc.record((last == *n_prime).then(|| weight.to_complex()));
        }
        acc
    })?;
    Ok(batches)
}

/// Monte Carlo estimate of one propagator element.
pub fn estimate_element(
    table: &LinkTable,
    n: &FockConfiguration,
    n_prime: &FockConfiguration,
    t: f64,
    mode: TimeMode,
    sampling: &Sampling,
) -> Result<EstimatorResult, EstimatorError> {
    check_inputs(table, n, t, sampling)?;
    table.check_configuration(n_prime)?;
    if n.sector() != n_prime.sector() {
        return Ok(EstimatorResult {
            mean: Complex64::new(0.0, 0.0),
            stderr_real: 0.0,
            stderr_imag: 0.0,
            n_trajectories: sampling.n_trajectories,
            n_hits: 0,
            notice: Some(Notice::SectorMismatch),
        });
    }
    combine_batches(&element_batches(table, n, n_prime, t, mode, sampling)?)
}

/// Per-final-configuration sums for one batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowAccumulator {
    pub n_trajectories: u64,
    pub bins: BTreeMap<FockConfiguration, Moments>,
}

impl RowAccumulator {
    pub fn record(&mut self, last: FockConfiguration, value: Complex64) {
        self.n_trajectories += 1;
        self.bins.entry(last).or_default().push(value);
    }

    pub fn merge(&mut self, other: &RowAccumulator) {
        self.n_trajectories += other.n_trajectories;
        for (cfg, m) in &other.bins {
            let slot = self.bins.entry(*cfg).or_default();
            *slot = slot.merge(m);
        }
    }

    pub fn finish(&self) -> BTreeMap<FockConfiguration, EstimatorResult> {
        self.bins
            .iter()
            .map(|(cfg, hits)| {
                let acc = BatchAccumulator { n_trajectories: self.n_trajectories, hits: *hits };
                (*cfg, acc.finish())
            })
            .collect()
    }
}

/// Estimates every element `<n'| U(t) |n>` reached by at least one
/// trajectory, from a single trajectory set.
pub fn estimate_row(
    table: &LinkTable,
    n: &FockConfiguration,
    t: f64,
    mode: TimeMode,
    sampling: &Sampling,
) -> Result<BTreeMap<FockConfiguration, EstimatorResult>, EstimatorError> {
    check_inputs(table, n, t, sampling)?;
    let batches = run_batches(sampling, |range| {
        let mut acc = RowAccumulator::default();
        for k in range {
            let mut rng = stream_rng(sampling.master_seed, k);
            let (last, weight) =
                run_trajectory(table, n, t, mode, &mut rng).expect("inputs validated");
            acc.record(last, weight.to_complex());
        }
        acc
    })?;
    let mut total = RowAccumulator::default();
    for b in &batches {
        total.merge(b);
    }
    Ok(total.finish())
}
