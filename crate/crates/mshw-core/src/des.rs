//! Discrete-event simulation of the `n`-server queue with phase-type service
//! and impatient customers.
//!
//! Two service disciplines are implemented:
//!
//! * `Original`: every queued customer carries an independent patience
//!   deadline drawn at arrival; a server finishing service takes the FIFO
//!   head of the queue.
//! * `Perturbed`: phase-`k` service is a pooled exponential clock at rate
//!   `Z_k(t)·ν_k` with routing by the rows of `P`, and only the leading
//!   queued customer runs a patience clock, at rate `(queue length)·α`.
//!   Requires exponential patience; the two disciplines then generate the
//!   same Markov process law.
//!
//! A run records every process the limit theory refers to on a uniform grid
//! (counts exactly, busy-time and queue integrals to quadrature-free
//! precision) and, optionally, the full event log from which virtual waiting
//! times and the driver processes `(Uⁿ, Vⁿ)` are reconstructed pathwise.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::grid::{points_for, GridPath};
use crate::phase_type::PhaseType;
use crate::random::{self, Stream};

// ---------------------------------------------------------------------------
// Model description
// ---------------------------------------------------------------------------

/// Interarrival law, normalized to mean one; the spread is summarized by the
/// squared coefficient of variation `c_a²`.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalLaw {
    Exponential,
    Deterministic,
    Erlang { k: u32 },
    /// Mixture of two exponentials, rescaled to mean one.
    Hyperexp2 { q: f64, r1: f64, r2: f64 },
    /// Lognormal with mean one; `sigma2` is the log-scale variance.
    Lognormal { sigma2: f64 },
}

impl ArrivalLaw {
    pub fn erlang(k: u32) -> Result<Self, ScenarioError> {
        if k == 0 {
            return Err(ScenarioError::BadLawParameter);
        }
        Ok(ArrivalLaw::Erlang { k })
    }

    /// Two-branch hyperexponential; the rates are rescaled so the mean is one.
    pub fn hyperexp2(q: f64, r1: f64, r2: f64) -> Result<Self, ScenarioError> {
        if !(0.0..=1.0).contains(&q) || r1 <= 0.0 || r2 <= 0.0 {
            return Err(ScenarioError::BadLawParameter);
        }
        let mean = q / r1 + (1.0 - q) / r2;
        Ok(ArrivalLaw::Hyperexp2 { q, r1: r1 * mean, r2: r2 * mean })
    }

    /// Lognormal interarrivals with the given squared coefficient of
    /// variation.
    pub fn lognormal_from_scv(scv: f64) -> Result<Self, ScenarioError> {
        if !(scv > 0.0) || !scv.is_finite() {
            return Err(ScenarioError::BadLawParameter);
        }
        Ok(ArrivalLaw::Lognormal { sigma2: libm::log(1.0 + scv) })
    }

    /// Squared coefficient of variation `c_a²` of the mean-one law.
    pub fn scv(&self) -> f64 {
        match self {
            ArrivalLaw::Exponential => 1.0,
            ArrivalLaw::Deterministic => 0.0,
            ArrivalLaw::Erlang { k } => 1.0 / *k as f64,
            ArrivalLaw::Hyperexp2 { q, r1, r2 } => {
                2.0 * (q / (r1 * r1) + (1.0 - q) / (r2 * r2)) - 1.0
            }
            ArrivalLaw::Lognormal { sigma2 } => libm::exp(*sigma2) - 1.0,
        }
    }

    /// One mean-one interarrival draw.
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match self {
            ArrivalLaw::Exponential => random::exponential(rng, 1.0),
            ArrivalLaw::Deterministic => 1.0,
            ArrivalLaw::Erlang { k } => {
                let rate = *k as f64;
                (0..*k).map(|_| random::exponential(rng, rate)).sum()
            }
            ArrivalLaw::Hyperexp2 { q, r1, r2 } => {
                let rate = if random::uniform(rng) < *q { *r1 } else { *r2 };
                random::exponential(rng, rate)
            }
            ArrivalLaw::Lognormal { sigma2 } => {
                let z = random::standard_normal(rng);
                libm::exp(-0.5 * sigma2 + libm::sqrt(*sigma2) * z)
            }
        }
    }
}

/// Patience law with finite hazard at zero, `α = lim_{x↓0} F(x)/x`.
#[derive(Debug, Clone, PartialEq)]
pub enum PatienceLaw {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { upper: f64 },
    /// Weibull with shape ≥ 1 (shape < 1 has infinite hazard at zero).
    Weibull { shape: f64, scale: f64 },
    Hyperexp2 { q: f64, r1: f64, r2: f64 },
}

impl PatienceLaw {
    pub fn exponential(rate: f64) -> Result<Self, ScenarioError> {
        if !(rate > 0.0) {
            return Err(ScenarioError::BadLawParameter);
        }
        Ok(PatienceLaw::Exponential { rate })
    }

    pub fn deterministic(value: f64) -> Result<Self, ScenarioError> {
        if !(value > 0.0) {
            return Err(ScenarioError::BadLawParameter);
        }
        Ok(PatienceLaw::Deterministic { value })
    }

    pub fn uniform(upper: f64) -> Result<Self, ScenarioError> {
        if !(upper > 0.0) {
            return Err(ScenarioError::BadLawParameter);
        }
        Ok(PatienceLaw::Uniform { upper })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self, ScenarioError> {
        if !(shape >= 1.0) || !(scale > 0.0) {
            return Err(ScenarioError::BadLawParameter);
        }
        Ok(PatienceLaw::Weibull { shape, scale })
    }

    pub fn hyperexp2(q: f64, r1: f64, r2: f64) -> Result<Self, ScenarioError> {
        if !(0.0..=1.0).contains(&q) || r1 <= 0.0 || r2 <= 0.0 {
            return Err(ScenarioError::BadLawParameter);
        }
        Ok(PatienceLaw::Hyperexp2 { q, r1, r2 })
    }

    /// Patience hazard at zero.
    pub fn hazard_at_zero(&self) -> f64 {
        match self {
            PatienceLaw::Exponential { rate } => *rate,
            PatienceLaw::Deterministic { .. } => 0.0,
            PatienceLaw::Uniform { upper } => 1.0 / upper,
            PatienceLaw::Weibull { shape, scale } => {
                if *shape == 1.0 {
                    1.0 / scale
                } else {
                    0.0
                }
            }
            PatienceLaw::Hyperexp2 { q, r1, r2 } => q * r1 + (1.0 - q) * r2,
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, PatienceLaw::Exponential { .. })
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match self {
            PatienceLaw::Exponential { rate } => random::exponential(rng, *rate),
            PatienceLaw::Deterministic { value } => *value,
            PatienceLaw::Uniform { upper } => upper * random::uniform(rng),
            PatienceLaw::Weibull { shape, scale } => {
                let u = random::uniform(rng);
                scale * libm::pow(-libm::log(1.0 - u), 1.0 / shape)
            }
            PatienceLaw::Hyperexp2 { q, r1, r2 } => {
                let rate = if random::uniform(rng) < *q { *r1 } else { *r2 };
                random::exponential(rng, rate)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `ρ = 1` (`λ = μ`).
    Critical,
    /// `ρ > 1`; requires exponential patience.
    Overloaded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    BadLawParameter,
    /// Critical regime requires `λ = μ`.
    NotCritical,
    /// Overloaded regime requires `λ > μ`.
    NotOverloaded,
    /// Overloaded regime requires exponential patience.
    OverloadedNeedsExpPatience,
    NonpositiveArrivalRate,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::BadLawParameter => write!(f, "invalid distribution parameter"),
            ScenarioError::NotCritical => write!(f, "critical regime requires lambda = mu"),
            ScenarioError::NotOverloaded => write!(f, "overloaded regime requires lambda > mu"),
            ScenarioError::OverloadedNeedsExpPatience => {
                write!(f, "overloaded regime requires exponential patience")
            }
            ScenarioError::NonpositiveArrivalRate => write!(f, "arrival rate must be positive"),
        }
    }
}

impl core::error::Error for ScenarioError {}

/// Full model description: service law, arrival and patience laws, and the
/// asymptotic parameters `(λ, β, regime)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ph: PhaseType,
    pub arrival: ArrivalLaw,
    pub patience: PatienceLaw,
    /// Limiting arrival rate per server.
    pub lambda: f64,
    /// Second-order capacity parameter: `λⁿ = λn − βμ√n`.
    pub beta: f64,
    pub regime: Regime,
}

impl Scenario {
    pub fn new(
        ph: PhaseType,
        arrival: ArrivalLaw,
        patience: PatienceLaw,
        lambda: f64,
        beta: f64,
        regime: Regime,
    ) -> Result<Self, ScenarioError> {
        if !(lambda > 0.0) || !lambda.is_finite() || !beta.is_finite() {
            return Err(ScenarioError::NonpositiveArrivalRate);
        }
        let mu = ph.rate();
        match regime {
            Regime::Critical => {
                if (lambda - mu).abs() > 1e-9 * mu.max(1.0) {
                    return Err(ScenarioError::NotCritical);
                }
            }
            Regime::Overloaded => {
                if lambda <= mu {
                    return Err(ScenarioError::NotOverloaded);
                }
                if !patience.is_exponential() {
                    return Err(ScenarioError::OverloadedNeedsExpPatience);
                }
            }
        }
        Ok(Scenario { ph, arrival, patience, lambda, beta, regime })
    }

    /// Mean service rate `μ`.
    pub fn mu(&self) -> f64 {
        self.ph.rate()
    }

    /// Patience hazard at zero.
    pub fn alpha(&self) -> f64 {
        self.patience.hazard_at_zero()
    }

    /// Overload fluid queue level `q = (λ−μ)/α`, zero in the critical regime.
    pub fn q(&self) -> f64 {
        match self.regime {
            Regime::Critical => 0.0,
            Regime::Overloaded => (self.lambda - self.mu()) / self.alpha(),
        }
    }

    /// Arrival rate of the `n`-server system, `λⁿ = λn − βμ√n`.
    pub fn lambda_n(&self, n: usize) -> f64 {
        self.lambda * n as f64 - self.beta * self.mu() * libm::sqrt(n as f64)
    }

    pub fn arrival_scv(&self) -> f64 {
        self.arrival.scv()
    }
}

// ---------------------------------------------------------------------------
// Run configuration and outputs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discipline {
    Original,
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    /// All servers idle, empty queue.
    Empty,
    /// All `n` servers busy with phases i.i.d. `γ` and fresh exponential
    /// remaining work; the queue is seeded at the fluid level `round(nq)`
    /// (empty in the critical regime).
    StationaryPhaseMix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub horizon: f64,
    pub grid_dt: f64,
    pub seed: u64,
    /// Replication stream index; `(seed, stream)` fully determine the run.
    pub stream: u64,
    pub discipline: Discipline,
    pub initial: InitialCondition,
    /// Keep the event log and compute virtual waiting times.
    pub record_events: bool,
}

impl RunConfig {
    pub fn new(n: usize, horizon: f64, grid_dt: f64, seed: u64) -> Self {
        RunConfig {
            n,
            horizon,
            grid_dt,
            seed,
            stream: 0,
            discipline: Discipline::Original,
            initial: InitialCondition::Empty,
            record_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    InvalidHorizon,
    InvalidGrid,
    PerturbedNeedsExpPatience,
    /// `λⁿ ≤ 0` for the requested system size.
    ArrivalRateNonpositive,
    /// The requested computation needs the event log.
    MissingEventLog,
    /// The requested computation needs virtual waiting times.
    MissingVirtualWait,
    Scenario(ScenarioError),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::InvalidHorizon => write!(f, "horizon must be positive"),
            RunError::InvalidGrid => write!(f, "grid step must be positive"),
            RunError::PerturbedNeedsExpPatience => {
                write!(f, "perturbed discipline requires exponential patience")
            }
            RunError::ArrivalRateNonpositive => {
                write!(f, "lambda_n is nonpositive for this system size")
            }
            RunError::MissingEventLog => write!(f, "run was made without record_events"),
            RunError::MissingVirtualWait => write!(f, "virtual waits not recorded"),
            RunError::Scenario(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for RunError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival { first_phase: u8 },
    EnterService { phase: u8 },
    PhaseTransfer { from: u8, to: u8 },
    Departure { phase: u8 },
    Abandonment { first_phase: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub customer: u32,
    pub kind: EventKind,
}

/// One replication's recorded processes on the grid.
///
/// Count processes are exact integers; `busy_time` (`∫Z_k`), `int_queue`
/// (`∫X⁺`) and `int_idle` (`∫X⁻`) are exact piecewise-constant integrals.
#[derive(Debug, Clone)]
pub struct SimPath {
    pub n: usize,
    pub phases: usize,
    pub grid_dt: f64,
    /// Total customer count minus `n`.
    pub x: Vec<i64>,
    /// In-service counts per phase, row-major `npts × K`.
    pub z: Vec<i64>,
    /// Queued counts by first service phase, row-major `npts × K`.
    pub q: Vec<i64>,
    pub arrivals: Vec<u64>,
    pub entries: Vec<u64>,
    pub completions: Vec<u64>,
    pub abandonments: Vec<u64>,
    pub busy_time: Vec<f64>,
    pub int_queue: Vec<f64>,
    pub int_idle: Vec<f64>,
    /// Queued customers that will eventually abandon.
    pub queued_abandoners: Vec<u64>,
    pub virtual_wait: Option<Vec<f64>>,
    pub events: Option<Vec<EventRecord>>,
    /// Server allocation at time zero.
    pub initial_allocation: Vec<u32>,
    /// Customer arrival times indexed by customer id (seeded customers at 0).
    pub arrival_times: Option<Vec<f64>>,
}

impl SimPath {
    pub fn num_points(&self) -> usize {
        self.x.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.grid_dt
    }

    pub fn index_at(&self, t: f64) -> usize {
        (((t / self.grid_dt) * (1.0 + 1e-12)) as usize).min(self.num_points() - 1)
    }

    pub fn z_at(&self, i: usize, k: usize) -> i64 {
        self.z[i * self.phases + k]
    }

    pub fn q_at(&self, i: usize, k: usize) -> i64 {
        self.q[i * self.phases + k]
    }

    pub fn busy_at(&self, i: usize, k: usize) -> f64 {
        self.busy_time[i * self.phases + k]
    }
}

// ---------------------------------------------------------------------------
// Engine internals
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CustState {
    Queued,
    InService,
    Departed,
    Abandoned,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Arrival,
    PhaseDone { customer: u32, phase: u8 },
    Deadline { customer: u32 },
}

struct HeapEvent {
    time: f64,
    class: u8,
    seq: u64,
    action: Action,
}

impl PartialEq for HeapEvent {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.class == other.class && self.seq == other.seq
    }
}
impl Eq for HeapEvent {}

impl Ord for HeapEvent {
    // Reversed: BinaryHeap is a max-heap, we pop the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.class.cmp(&self.class))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for HeapEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Grid recorder with exact piecewise-constant integral accumulators.
struct Recorder {
    grid_dt: f64,
    npts: usize,
    filled: usize,
    k: usize,
    x: Vec<i64>,
    z: Vec<i64>,
    q: Vec<i64>,
    arrivals: Vec<u64>,
    entries: Vec<u64>,
    completions: Vec<u64>,
    abandonments: Vec<u64>,
    busy_time: Vec<f64>,
    int_queue: Vec<f64>,
    int_idle: Vec<f64>,
    last_t: f64,
    acc_busy: Vec<f64>,
    acc_queue: f64,
    acc_idle: f64,
}

impl Recorder {
    fn new(k: usize, grid_dt: f64, horizon: f64) -> Self {
        let npts = points_for(grid_dt, horizon);
        Recorder {
            grid_dt,
            npts,
            filled: 0,
            k,
            x: vec![0; npts],
            z: vec![0; npts * k],
            q: vec![0; npts * k],
            arrivals: vec![0; npts],
            entries: vec![0; npts],
            completions: vec![0; npts],
            abandonments: vec![0; npts],
            busy_time: vec![0.0; npts * k],
            int_queue: vec![0.0; npts],
            int_idle: vec![0.0; npts],
            last_t: 0.0,
            acc_busy: vec![0.0; k],
            acc_queue: 0.0,
            acc_idle: 0.0,
        }
    }

    /// Accumulates the exact integrals of the piecewise-constant state from
    /// the last update time to `t`.
    fn integrate_to(&mut self, t: f64, state: &EngineState) {
        let dt = t - self.last_t;
        if dt <= 0.0 {
            return;
        }
        for (acc, &zk) in self.acc_busy.iter_mut().zip(&state.z) {
            *acc += zk as f64 * dt;
        }
        self.acc_queue += state.x.max(0) as f64 * dt;
        self.acc_idle += (-state.x).max(0) as f64 * dt;
        self.last_t = t;
    }

    /// Emits every grid point strictly before `upto`, using the current state
    /// (the state is the càdlàg value there: all events at earlier times have
    /// been applied).
    fn snapshot_until(&mut self, upto: f64, state: &EngineState) {
        while self.filled < self.npts {
            let gt = self.filled as f64 * self.grid_dt;
            if gt >= upto {
                break;
            }
            self.integrate_to(gt, state);
            let i = self.filled;
            self.x[i] = state.x;
            for k in 0..self.k {
                self.z[i * self.k + k] = state.z[k] as i64;
                self.q[i * self.k + k] = state.q[k] as i64;
                self.busy_time[i * self.k + k] = self.acc_busy[k];
            }
            self.arrivals[i] = state.arrivals;
            self.entries[i] = state.entries;
            self.completions[i] = state.completions;
            self.abandonments[i] = state.abandonments;
            self.int_queue[i] = self.acc_queue;
            self.int_idle[i] = self.acc_idle;
            self.filled += 1;
        }
    }

    fn done(&self) -> bool {
        self.filled >= self.npts
    }
}

struct EngineState {
    x: i64,
    z: Vec<u32>,
    q: Vec<u32>,
    arrivals: u64,
    entries: u64,
    completions: u64,
    abandonments: u64,
}

impl EngineState {
    fn live_queue(&self) -> u64 {
        self.x.max(0) as u64
    }
}

struct Customers {
    arrival: Vec<f64>,
    first_phase: Vec<u8>,
    state: Vec<CustState>,
}

impl Customers {
    fn new() -> Self {
        Customers { arrival: Vec::new(), first_phase: Vec::new(), state: Vec::new() }
    }

    fn push(&mut self, arrival: f64, first_phase: u8, state: CustState) -> u32 {
        let id = self.arrival.len() as u32;
        self.arrival.push(arrival);
        self.first_phase.push(first_phase);
        self.state.push(state);
        id
    }
}

/// Difference-array accumulator for the queued-eventual-abandoner count.
struct AbandonerTally {
    diff: Vec<i64>,
    grid_dt: f64,
    npts: usize,
}

impl AbandonerTally {
    fn new(grid_dt: f64, npts: usize) -> Self {
        AbandonerTally { diff: vec![0; npts + 1], grid_dt, npts }
    }

    /// First grid index with grid time ≥ `t`.
    fn idx_ceil(&self, t: f64) -> usize {
        let raw = libm::ceil((t / self.grid_dt) * (1.0 - 1e-12)) as usize;
        raw.min(self.npts)
    }

    /// The customer was queued on `[arrival, abandon)` and abandons.
    fn record(&mut self, arrival: f64, abandon: f64) {
        let lo = self.idx_ceil(arrival);
        let hi = self.idx_ceil(abandon);
        if lo < hi {
            self.diff[lo] += 1;
            self.diff[hi] -= 1;
        }
    }

    fn prefix_sums(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.npts);
        let mut acc = 0i64;
        for i in 0..self.npts {
            acc += self.diff[i];
            out.push(acc.max(0) as u64);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// run()
// ---------------------------------------------------------------------------

/// Simulates one replication. Identical `(scenario, n, seed, stream,
/// discipline)` inputs produce bit-identical output.
pub fn run(sc: &Scenario, cfg: &RunConfig) -> Result<SimPath, RunError> {
    if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
        return Err(RunError::InvalidHorizon);
    }
    if !(cfg.grid_dt > 0.0) || !cfg.grid_dt.is_finite() {
        return Err(RunError::InvalidGrid);
    }
    if cfg.n == 0 {
        return Err(RunError::ArrivalRateNonpositive);
    }
    if cfg.discipline == Discipline::Perturbed && !sc.patience.is_exponential() {
        return Err(RunError::PerturbedNeedsExpPatience);
    }
    let lambda_n = sc.lambda_n(cfg.n);
    if !(lambda_n > 0.0) {
        return Err(RunError::ArrivalRateNonpositive);
    }

    match cfg.discipline {
        Discipline::Original => Engine::<OriginalRules>::simulate(sc, cfg, lambda_n),
        Discipline::Perturbed => Engine::<PerturbedRules>::simulate(sc, cfg, lambda_n),
    }
}

/// Shared driver for both disciplines; `R` provides the discipline-specific
/// event mechanics.
struct Engine<R> {
    _rules: core::marker::PhantomData<R>,
}

trait DisciplineRules {
    fn run_events(ctx: &mut Ctx<'_>) -> Result<(), RunError>;
}

struct Ctx<'a> {
    sc: &'a Scenario,
    cfg: &'a RunConfig,
    lambda_n: f64,
    rng: Stream,
    state: EngineState,
    customers: Customers,
    recorder: Recorder,
    tally: AbandonerTally,
    log: Vec<EventRecord>,
    keep_log: bool,
    /// Queued customers with arrival ≤ horizon still unresolved (for fate
    /// accounting past the horizon).
    unresolved_after_horizon: usize,
    in_extension: bool,
    departures_in_extension_after_drain: u64,
    extension_cap: f64,
    now: f64,
}

impl<'a> Ctx<'a> {
    fn log_event(&mut self, time: f64, customer: u32, kind: EventKind) {
        if self.keep_log {
            self.log.push(EventRecord { time, customer, kind });
        }
    }

    /// True once the post-horizon bookkeeping can stop: every customer queued
    /// at the horizon has left the queue and (when the log is kept for
    /// virtual waits) one further departure has been seen.
    fn extension_complete(&self) -> bool {
        if !self.in_extension {
            return false;
        }
        if self.unresolved_after_horizon > 0 {
            return false;
        }
        if self.keep_log && self.state.x >= 0 {
            return self.departures_in_extension_after_drain > 0;
        }
        true
    }

    fn note_queued_resolution(&mut self, customer: u32) {
        if self.in_extension
            && self.unresolved_after_horizon > 0
            && self.customers.arrival[customer as usize] <= self.cfg.horizon
        {
            self.unresolved_after_horizon -= 1;
        }
    }

    fn enter_extension(&mut self) {
        self.in_extension = true;
        self.unresolved_after_horizon = self.state.live_queue() as usize;
        self.departures_in_extension_after_drain = 0;
    }

    fn note_departure(&mut self) {
        if self.in_extension && self.unresolved_after_horizon == 0 {
            self.departures_in_extension_after_drain += 1;
        }
    }
}

impl<R: DisciplineRules> Engine<R> {
    fn simulate(sc: &Scenario, cfg: &RunConfig, lambda_n: f64) -> Result<SimPath, RunError> {
        let k = sc.ph.phases();
        let mut rng = random::stream(cfg.seed, cfg.stream);
        let mut state = EngineState {
            x: 0,
            z: vec![0; k],
            q: vec![0; k],
            arrivals: 0,
            entries: 0,
            completions: 0,
            abandonments: 0,
        };
        let mut customers = Customers::new();
        let recorder = Recorder::new(k, cfg.grid_dt, cfg.horizon);
        let tally = AbandonerTally::new(cfg.grid_dt, recorder.npts);

        let mut initial_allocation = vec![0u32; k];
        match cfg.initial {
            InitialCondition::Empty => {
                state.x = -(cfg.n as i64);
            }
            InitialCondition::StationaryPhaseMix => {
                // All n servers busy; draw order: service phases first, then
                // queue seeds. The discipline-specific setup rebuilds its
                // queue structures from the customer states.
                for _ in 0..cfg.n {
                    let phase = random::categorical(&mut rng, sc.ph.load_vector());
                    customers.push(0.0, phase as u8, CustState::InService);
                    initial_allocation[phase] += 1;
                    state.z[phase] += 1;
                }
                let q0 = libm::round(cfg.n as f64 * sc.q()) as i64;
                for _ in 0..q0 {
                    let phase = random::categorical(&mut rng, sc.ph.initial_law());
                    customers.push(0.0, phase as u8, CustState::Queued);
                    state.q[phase] += 1;
                }
                state.x = q0;
            }
        }

        let extension_cap = cfg.horizon
            + 2.0
            + 50.0 * sc.ph.mean()
            + 3.0 * (state.x.max(0) as f64 + cfg.horizon * lambda_n * 0.05)
                / (cfg.n as f64 * sc.mu());

        let mut ctx = Ctx {
            sc,
            cfg,
            lambda_n,
            rng,
            state,
            customers,
            recorder,
            tally,
            log: Vec::new(),
            keep_log: cfg.record_events,
            unresolved_after_horizon: 0,
            in_extension: false,
            departures_in_extension_after_drain: 0,
            extension_cap,
            now: 0.0,
        };

        R::run_events(&mut ctx)?;

        // Fill any grid points past the last event.
        let state_ref = &ctx.state;
        ctx.recorder.snapshot_until(f64::INFINITY, state_ref);
        debug_assert!(ctx.recorder.done());

        let virtual_wait = if cfg.record_events {
            Some(virtual_waits_from_log(
                &ctx.log,
                &ctx.customers.arrival,
                &ctx.recorder.x,
                cfg.grid_dt,
                ctx.now,
            ))
        } else {
            None
        };

        Ok(SimPath {
            n: cfg.n,
            phases: k,
            grid_dt: cfg.grid_dt,
            x: ctx.recorder.x,
            z: ctx.recorder.z,
            q: ctx.recorder.q,
            arrivals: ctx.recorder.arrivals,
            entries: ctx.recorder.entries,
            completions: ctx.recorder.completions,
            abandonments: ctx.recorder.abandonments,
            busy_time: ctx.recorder.busy_time,
            int_queue: ctx.recorder.int_queue,
            int_idle: ctx.recorder.int_idle,
            queued_abandoners: ctx.tally.prefix_sums(),
            virtual_wait,
            events: if cfg.record_events { Some(ctx.log) } else { None },
            initial_allocation,
            arrival_times: if cfg.record_events { Some(ctx.customers.arrival) } else { None },
        })
    }
}

// --- original discipline ---------------------------------------------------

struct OriginalRules;

impl DisciplineRules for OriginalRules {
    fn run_events(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
        let mut heap: BinaryHeap<HeapEvent> = BinaryHeap::new();
        let mut seq = 0u64;
        let mut queue: VecDeque<u32> = VecDeque::new();

        // Seeded in-service customers get fresh phase clocks; seeded queued
        // customers get fresh patience deadlines. Ids were assigned in order.
        for id in 0..ctx.customers.arrival.len() as u32 {
            match ctx.customers.state[id as usize] {
                CustState::InService => {
                    let phase = ctx.customers.first_phase[id as usize];
                    let t = random::exponential(&mut ctx.rng, ctx.sc.ph.rates()[phase as usize]);
                    heap.push(HeapEvent {
                        time: t,
                        class: 0,
                        seq: { seq += 1; seq },
                        action: Action::PhaseDone { customer: id, phase },
                    });
                }
                CustState::Queued => {
                    queue.push_back(id);
                    let pat = ctx.sc.patience.sample(&mut ctx.rng);
                    heap.push(HeapEvent {
                        time: pat,
                        class: 2,
                        seq: { seq += 1; seq },
                        action: Action::Deadline { customer: id },
                    });
                }
                _ => {}
            }
        }

        // First arrival of the renewal stream.
        let first = ctx.sc.arrival.sample(&mut ctx.rng) / ctx.lambda_n;
        heap.push(HeapEvent { time: first, class: 1, seq: { seq += 1; seq }, action: Action::Arrival });

        while let Some(ev) = heap.pop() {
            let t = ev.time;
            if !ctx.in_extension && t > ctx.cfg.horizon {
                ctx.recorder.snapshot_until(f64::INFINITY, &ctx.state);
                ctx.recorder.integrate_to(ctx.cfg.horizon, &ctx.state);
                ctx.enter_extension();
            }
            if ctx.in_extension && (ctx.extension_complete() || t > ctx.extension_cap) {
                ctx.now = ctx.now.max(ctx.cfg.horizon);
                return Ok(());
            }
            ctx.recorder.snapshot_until(t, &ctx.state);
            ctx.recorder.integrate_to(t.min(ctx.cfg.horizon), &ctx.state);
            ctx.now = t;

            match ev.action {
                Action::Arrival => {
                    let next = t + ctx.sc.arrival.sample(&mut ctx.rng) / ctx.lambda_n;
                    heap.push(HeapEvent {
                        time: next,
                        class: 1,
                        seq: { seq += 1; seq },
                        action: Action::Arrival,
                    });
                    let phase = random::categorical(&mut ctx.rng, ctx.sc.ph.initial_law()) as u8;
                    let patience = ctx.sc.patience.sample(&mut ctx.rng);
                    let idle = ctx.state.x < 0;
                    let id = ctx.customers.push(
                        t,
                        phase,
                        if idle { CustState::InService } else { CustState::Queued },
                    );
                    ctx.state.arrivals += 1;
                    ctx.state.x += 1;
                    ctx.log_event(t, id, EventKind::Arrival { first_phase: phase });
                    if idle {
                        enter_service(ctx, &mut heap, &mut seq, id, phase, t);
                    } else {
                        queue.push_back(id);
                        ctx.state.q[phase as usize] += 1;
                        heap.push(HeapEvent {
                            time: t + patience,
                            class: 2,
                            seq: { seq += 1; seq },
                            action: Action::Deadline { customer: id },
                        });
                    }
                }
                Action::PhaseDone { customer, phase } => {
                    match ctx.sc.ph.route_from(&mut ctx.rng, phase as usize) {
                        Some(next_phase) => {
                            ctx.state.z[phase as usize] -= 1;
                            ctx.state.z[next_phase] += 1;
                            ctx.log_event(
                                t,
                                customer,
                                EventKind::PhaseTransfer { from: phase, to: next_phase as u8 },
                            );
                            let dur = random::exponential(
                                &mut ctx.rng,
                                ctx.sc.ph.rates()[next_phase],
                            );
                            heap.push(HeapEvent {
                                time: t + dur,
                                class: 0,
                                seq: { seq += 1; seq },
                                action: Action::PhaseDone {
                                    customer,
                                    phase: next_phase as u8,
                                },
                            });
                        }
                        None => {
                            ctx.state.z[phase as usize] -= 1;
                            ctx.state.completions += 1;
                            ctx.state.x -= 1;
                            ctx.customers.state[customer as usize] = CustState::Departed;
                            ctx.log_event(t, customer, EventKind::Departure { phase });
                            ctx.note_departure();
                            // Released server takes the FIFO head, skipping
                            // lazily cancelled (abandoned) entries.
                            while let Some(&head) = queue.front() {
                                if ctx.customers.state[head as usize] == CustState::Queued {
                                    break;
                                }
                                queue.pop_front();
                            }
                            if let Some(head) = queue.pop_front() {
                                let hp = ctx.customers.first_phase[head as usize];
                                ctx.state.q[hp as usize] -= 1;
                                ctx.customers.state[head as usize] = CustState::InService;
                                ctx.note_queued_resolution(head);
                                enter_service(ctx, &mut heap, &mut seq, head, hp, t);
                            }
                        }
                    }
                }
                Action::Deadline { customer } => {
                    if ctx.customers.state[customer as usize] != CustState::Queued {
                        continue; // stale deadline of a served customer
                    }
                    let fp = ctx.customers.first_phase[customer as usize];
                    ctx.customers.state[customer as usize] = CustState::Abandoned;
                    ctx.state.abandonments += 1;
                    ctx.state.x -= 1;
                    ctx.state.q[fp as usize] -= 1;
                    ctx.log_event(t, customer, EventKind::Abandonment { first_phase: fp });
                    ctx.tally.record(ctx.customers.arrival[customer as usize], t);
                    ctx.note_queued_resolution(customer);
                }
            }
        }
        ctx.now = ctx.now.max(ctx.cfg.horizon);
        Ok(())
    }
}

fn enter_service(
    ctx: &mut Ctx<'_>,
    heap: &mut BinaryHeap<HeapEvent>,
    seq: &mut u64,
    customer: u32,
    phase: u8,
    t: f64,
) {
    ctx.state.entries += 1;
    ctx.state.z[phase as usize] += 1;
    ctx.log_event(t, customer, EventKind::EnterService { phase });
    let dur = random::exponential(&mut ctx.rng, ctx.sc.ph.rates()[phase as usize]);
    heap.push(HeapEvent {
        time: t + dur,
        class: 0,
        seq: { *seq += 1; *seq },
        action: Action::PhaseDone { customer, phase },
    });
}

// --- perturbed discipline ---------------------------------------------------

struct PerturbedRules;

impl DisciplineRules for PerturbedRules {
    fn run_events(ctx: &mut Ctx<'_>) -> Result<(), RunError> {
        let k = ctx.sc.ph.phases();
        let alpha = ctx.sc.alpha();
        let nu: Vec<f64> = ctx.sc.ph.rates().to_vec();

        // Per-phase FIFO service queues; the leader of each is in service.
        let mut service: Vec<VecDeque<u32>> = vec![VecDeque::new(); k];
        let mut queue: VecDeque<u32> = VecDeque::new();
        for id in 0..ctx.customers.arrival.len() as u32 {
            match ctx.customers.state[id as usize] {
                CustState::InService => {
                    service[ctx.customers.first_phase[id as usize] as usize].push_back(id)
                }
                CustState::Queued => queue.push_back(id),
                _ => {}
            }
        }

        let mut t = 0.0f64;
        let mut next_arrival = ctx.sc.arrival.sample(&mut ctx.rng) / ctx.lambda_n;

        loop {
            let total_rate: f64 = ctx
                .state
                .z
                .iter()
                .zip(&nu)
                .map(|(&z, &r)| z as f64 * r)
                .sum::<f64>()
                + queue.len() as f64 * alpha;

            let (event_time, is_arrival) = if total_rate > 0.0 {
                let cand = t + random::exponential(&mut ctx.rng, total_rate);
                if cand >= next_arrival {
                    (next_arrival, true)
                } else {
                    (cand, false)
                }
            } else {
                (next_arrival, true)
            };

            if !ctx.in_extension && event_time > ctx.cfg.horizon {
                ctx.recorder.snapshot_until(f64::INFINITY, &ctx.state);
                ctx.recorder.integrate_to(ctx.cfg.horizon, &ctx.state);
                ctx.enter_extension();
            }
            if ctx.in_extension && (ctx.extension_complete() || event_time > ctx.extension_cap) {
                ctx.now = ctx.now.max(ctx.cfg.horizon);
                return Ok(());
            }
            ctx.recorder.snapshot_until(event_time, &ctx.state);
            ctx.recorder.integrate_to(event_time.min(ctx.cfg.horizon), &ctx.state);
            t = event_time;
            ctx.now = t;

            if is_arrival {
                next_arrival = t + ctx.sc.arrival.sample(&mut ctx.rng) / ctx.lambda_n;
                let phase = random::categorical(&mut ctx.rng, ctx.sc.ph.initial_law()) as u8;
                let idle = ctx.state.x < 0;
                let id = ctx.customers.push(
                    t,
                    phase,
                    if idle { CustState::InService } else { CustState::Queued },
                );
                ctx.state.arrivals += 1;
                ctx.state.x += 1;
                ctx.log_event(t, id, EventKind::Arrival { first_phase: phase });
                if idle {
                    ctx.state.entries += 1;
                    ctx.state.z[phase as usize] += 1;
                    service[phase as usize].push_back(id);
                    ctx.log_event(t, id, EventKind::EnterService { phase });
                } else {
                    queue.push_back(id);
                    ctx.state.q[phase as usize] += 1;
                }
                continue;
            }

            // Race among pooled phase clocks and the queue's patience clock.
            let mut pick = random::uniform(&mut ctx.rng) * total_rate;
            let mut chosen_phase: Option<usize> = None;
            for kk in 0..k {
                let r = ctx.state.z[kk] as f64 * nu[kk];
                if pick < r {
                    chosen_phase = Some(kk);
                    break;
                }
                pick -= r;
            }

            match chosen_phase {
                Some(kk) => {
                    let customer = service[kk].pop_front().expect("busy phase has a leader");
                    match ctx.sc.ph.route_from(&mut ctx.rng, kk) {
                        Some(next_phase) => {
                            ctx.state.z[kk] -= 1;
                            ctx.state.z[next_phase] += 1;
                            service[next_phase].push_back(customer);
                            ctx.log_event(
                                t,
                                customer,
                                EventKind::PhaseTransfer { from: kk as u8, to: next_phase as u8 },
                            );
                        }
                        None => {
                            ctx.state.z[kk] -= 1;
                            ctx.state.completions += 1;
                            ctx.state.x -= 1;
                            ctx.customers.state[customer as usize] = CustState::Departed;
                            ctx.log_event(t, customer, EventKind::Departure { phase: kk as u8 });
                            ctx.note_departure();
                            if let Some(head) = queue.pop_front() {
                                let hp = ctx.customers.first_phase[head as usize];
                                ctx.state.q[hp as usize] -= 1;
                                ctx.state.entries += 1;
                                ctx.state.z[hp as usize] += 1;
                                ctx.customers.state[head as usize] = CustState::InService;
                                service[hp as usize].push_back(head);
                                ctx.log_event(t, head, EventKind::EnterService { phase: hp });
                                ctx.note_queued_resolution(head);
                            }
                        }
                    }
                }
                None => {
                    // Patience clock fired: the leading customer abandons.
                    if let Some(leader) = queue.pop_front() {
                        let fp = ctx.customers.first_phase[leader as usize];
                        ctx.customers.state[leader as usize] = CustState::Abandoned;
                        ctx.state.abandonments += 1;
                        ctx.state.x -= 1;
                        ctx.state.q[fp as usize] -= 1;
                        ctx.log_event(t, leader, EventKind::Abandonment { first_phase: fp });
                        ctx.tally.record(ctx.customers.arrival[leader as usize], t);
                        ctx.note_queued_resolution(leader);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Virtual waits, zeta, and driver reconstruction
// ---------------------------------------------------------------------------

/// Virtual waiting time at each grid point: the delay a hypothetical,
/// infinitely patient customer arriving there would see, replayed from the
/// event log.
fn virtual_waits_from_log(
    events: &[EventRecord],
    arrival_times: &[f64],
    xgrid: &[i64],
    grid_dt: f64,
    log_end: f64,
) -> Vec<f64> {
    let npts = xgrid.len();
    let mut w = vec![0.0f64; npts];
    for gi in 0..npts {
        let t = gi as f64 * grid_dt;
        if xgrid[gi] < 0 {
            continue; // idle server available
        }
        let mut ahead = xgrid[gi].max(0);
        // First event strictly after t.
        let start = events.partition_point(|e| e.time <= t);
        let mut resolved = false;
        for ev in &events[start..] {
            match ev.kind {
                EventKind::Departure { .. } => {
                    if ahead == 0 {
                        w[gi] = ev.time - t;
                        resolved = true;
                        break;
                    }
                }
                EventKind::EnterService { .. } => {
                    if arrival_times[ev.customer as usize] <= t {
                        ahead -= 1;
                    }
                }
                EventKind::Abandonment { .. } => {
                    if arrival_times[ev.customer as usize] <= t {
                        ahead -= 1;
                    }
                }
                _ => {}
            }
        }
        if !resolved {
            // Truncated by the extension cap; report the elapsed lower bound.
            w[gi] = (log_end - t).max(0.0);
        }
    }
    w
}

/// Returns the virtual waiting time path (requires `record_events`).
pub fn virtual_wait_path(path: &SimPath) -> Result<&[f64], RunError> {
    path.virtual_wait.as_deref().ok_or(RunError::MissingEventLog)
}

/// First-entry inverse of `t ↦ t + W(t)` on the grid: `ζ(t) = inf{s ≥ 0 :
/// s + W(s) > t}`, nondecreasing with `ζ(t) ≤ t`.
pub fn zeta_path(path: &SimPath) -> Result<Vec<f64>, RunError> {
    let w = path.virtual_wait.as_ref().ok_or(RunError::MissingEventLog)?;
    let dt = path.grid_dt;
    let npts = w.len();
    let mut zeta = vec![0.0f64; npts];
    let mut j = 0usize;
    for i in 0..npts {
        let t = i as f64 * dt;
        while j < npts {
            let s = j as f64 * dt;
            if s + w[j] > t || s > t {
                break;
            }
            j += 1;
        }
        zeta[i] = (j as f64 * dt).min(t);
    }
    Ok(zeta)
}

/// Pathwise reconstruction of the driver pair `(Uⁿ, Vⁿ)` from the event log,
/// packed as a grid path with the scalar `U` first.
///
/// Feeding the result to the critically loaded map reproduces
/// `(Xⁿ, Zⁿ − nγ)` up to grid quadrature error; this is the representation
/// identity the simulator is audited against.
pub fn reconstruct_uv(path: &SimPath, sc: &Scenario) -> Result<GridPath, RunError> {
    let events = path.events.as_ref().ok_or(RunError::MissingEventLog)?;
    let k = path.phases;
    let n = path.n;
    let npts = path.num_points();
    let dt = path.grid_dt;
    let lambda_n = sc.lambda_n(n);
    let mu = sc.mu();
    let alpha = sc.alpha();
    let p = sc.ph.initial_law();
    let nu = sc.ph.rates();
    let routing = sc.ph.routing();
    let gamma = sc.ph.load_vector();

    // Running state for the replay.
    let mut z: Vec<f64> = path.initial_allocation.iter().map(|&v| v as f64).collect();
    let mut x = path.x[0];
    let mut e_count = 0u64;
    let mut b_count = 0u64;
    let mut a_count = 0u64;
    let mut dk = vec![0u64; k]; // phase-k service completions
    let mut routed = vec![0u64; k * k]; // k -> l transfer counts
    let mut entries_by_phase = vec![0u64; k];
    let mut busy = vec![0.0f64; k]; // ∫ Z_k
    let mut qint = 0.0f64; // ∫ X⁺
    let mut last_t = 0.0f64;

    let zhat0: Vec<f64> = (0..k)
        .map(|kk| path.initial_allocation[kk] as f64 - n as f64 * gamma[kk])
        .collect();
    let e_zhat0: f64 = zhat0.iter().sum();

    let mut out = GridPath::zeros(k, dt, (npts - 1) as f64 * dt).map_err(|_| RunError::InvalidGrid)?;
    let mut mvec = vec![0.0f64; k];
    let mut vvec = vec![0.0f64; k];

    let mut ev_idx = 0usize;
    for gi in 0..npts {
        let t = gi as f64 * dt;
        // Apply all events with time ≤ t (càdlàg convention, matching the
        // recorder).
        while ev_idx < events.len() && events[ev_idx].time <= t {
            let ev = &events[ev_idx];
            ev_idx += 1;
            // Advance exact integrals to the event time.
            let step = ev.time - last_t;
            if step > 0.0 {
                for (b, &zk) in busy.iter_mut().zip(&z) {
                    *b += zk * step;
                }
                qint += x.max(0) as f64 * step;
                last_t = ev.time;
            }
            match ev.kind {
                EventKind::Arrival { .. } => {
                    e_count += 1;
                    x += 1;
                }
                EventKind::EnterService { phase } => {
                    b_count += 1;
                    entries_by_phase[phase as usize] += 1;
                    z[phase as usize] += 1.0;
                }
                EventKind::PhaseTransfer { from, to } => {
                    dk[from as usize] += 1;
                    routed[from as usize * k + to as usize] += 1;
                    z[from as usize] -= 1.0;
                    z[to as usize] += 1.0;
                }
                EventKind::Departure { phase } => {
                    dk[phase as usize] += 1;
                    z[phase as usize] -= 1.0;
                    x -= 1;
                }
                EventKind::Abandonment { .. } => {
                    a_count += 1;
                    x -= 1;
                }
            }
        }
        let step = t - last_t;
        if step > 0.0 {
            for (b, &zk) in busy.iter_mut().zip(&z) {
                *b += zk * step;
            }
            qint += x.max(0) as f64 * step;
            last_t = t;
        }

        // M(t) = Σ_k Φ̂ᵏ(D_k) − (I − P′) Ŝ(T): the centered routing counts
        // minus the centered phase-completion counts.
        let mut shat = vec![0.0f64; k];
        for kk in 0..k {
            shat[kk] = dk[kk] as f64 - nu[kk] * busy[kk];
        }
        for l in 0..k {
            let mut m = 0.0;
            for kk in 0..k {
                m += routed[kk * k + l] as f64 - routing.get(kk, l) * dk[kk] as f64;
            }
            // ((I − P′) ŝ)_l = ŝ_l − Σ_k P_{kl} ŝ_k
            let mut ps = 0.0;
            for kk in 0..k {
                ps += routing.get(kk, l) * shat[kk];
            }
            mvec[l] = m - (shat[l] - ps);
        }
        let e_m: f64 = mvec.iter().sum();

        let u = path.x[0] as f64
            + (e_count as f64 - lambda_n * t)
            + (lambda_n - n as f64 * mu) * t
            + e_m
            - a_count as f64
            + alpha * qint;

        // V(t) = (I−pe′)Ẑ(0) + Φ̂⁰(B) + (I−pe′)M.
        for l in 0..k {
            let phi0 = entries_by_phase[l] as f64 - p[l] * b_count as f64;
            vvec[l] = (zhat0[l] - p[l] * e_zhat0) + phi0 + (mvec[l] - p[l] * e_m);
        }

        let row = out.point_mut(gi);
        row[0] = u;
        row[1..].copy_from_slice(&vvec);
    }
    Ok(out)
}

/// Converts the reconstructed `(Uⁿ, Vⁿ)` into inputs for the overloaded map:
/// subtracts the fluid drift `nq(1 + αt)`, the idle-time term `α∫(Xⁿ)⁻`
/// from `U` and the idle-server term `p(Xⁿ)⁻` from `V`.
pub fn overloaded_map_input(path: &SimPath, sc: &Scenario, uv: &GridPath) -> GridPath {
    let k = path.phases;
    let n = path.n as f64;
    let alpha = sc.alpha();
    let q = sc.q();
    let p = sc.ph.initial_law();
    let mut out = uv.clone();
    for gi in 0..path.num_points() {
        let t = gi as f64 * path.grid_dt;
        let idle_now = (-path.x[gi]).max(0) as f64;
        let row = out.point_mut(gi);
        row[0] -= n * q * (1.0 + alpha * t) + alpha * path.int_idle[gi];
        for l in 0..k {
            row[l + 1] -= p[l] * idle_now;
        }
    }
    out
}
