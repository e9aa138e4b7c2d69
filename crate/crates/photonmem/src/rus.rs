//! Repeat-until-success cluster building over cavity sources and EIT
//! memories: two-qubit entanglement bookkeeping and a discrete-event Monte
//! Carlo of the six-step scheme, with a closed-form oracle for validation.
//!
//! Network timescales are in ms; photon slots and memory resets in us;
//! spin-wave decay in rad/us.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RusError {
    #[error("state is not normalized: squared norm {0}")]
    Unnormalized(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-terminating configuration: no success after {0} attempts")]
    NonTerminating(u64),
    #[error("zero per-attempt success probability")]
    ZeroSuccessProbability,
}

/// Relative sign in the entangled-state superpositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Physical meaning of the computational basis of one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitLabels {
    pub zero: &'static str,
    pub one: &'static str,
}

pub const ATOM_LABELS: QubitLabels = QubitLabels { zero: "m_F=-1", one: "m_F=+1" };
pub const PHOTON_LABELS: QubitLabels = QubitLabels { zero: "sigma+", one: "sigma-" };

/// Pure two-qubit state over {|00>, |01>, |10>, |11>} with a declared
/// label mapping for each qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    pub amps: [Complex64; 4],
    pub labels: [QubitLabels; 2],
}

impl TwoQubitState {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(amps: [Complex64; 4], labels: [QubitLabels; 2]) -> Result<Self, RusError> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > 1e-9 {
            return Err(RusError::Unnormalized(n));
        }
        Ok(Self { amps, labels })
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability of measuring the computational basis state `k` (0..4).
    pub fn probability(&self, k: usize) -> f64 {
        self.amps[k].norm_sqr()
    }
}

/// The atom-photon and photon-photon entangled states produced by two
/// consecutive polarized emissions:
/// psi_A = (|-1, sigma+> +/- |+1, sigma->) / sqrt(2),
/// psi_B = (|sigma-, sigma+> +/- |sigma+, sigma->) / sqrt(2).
pub fn wilk_states(sign: Sign) -> (TwoQubitState, TwoQubitState) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let s = sign.factor() * h;
    let psi_a = TwoQubitState {
        // atom m_F = -1 <-> 0, photon sigma+ <-> 0
        amps: [Complex64::new(h, 0.0), Complex64::ZERO, Complex64::ZERO, Complex64::new(s, 0.0)],
        labels: [ATOM_LABELS, PHOTON_LABELS],
    };
    let psi_b = TwoQubitState {
        // |sigma-, sigma+> = |10>, |sigma+, sigma-> = |01>
        amps: [Complex64::ZERO, Complex64::new(s, 0.0), Complex64::new(h, 0.0), Complex64::ZERO],
        labels: [PHOTON_LABELS, PHOTON_LABELS],
    };
    (psi_a, psi_b)
}

/// Pure-state concurrence 2 |a00 a11 - a01 a10|.
pub fn concurrence(s: &TwoQubitState) -> Result<f64, RusError> {
    let n = s.norm_sq();
    if (n - 1.0).abs() > 1e-9 {
        return Err(RusError::Unnormalized(n));
    }
    Ok(2.0 * (s.amps[0] * s.amps[3] - s.amps[1] * s.amps[2]).norm())
}

// -------------------------------------------------------------------------
// Monte Carlo of the six-step scheme

/// Stochastic network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RusConfig {
    /// Cavity sources running in parallel.
    pub n_cavities: usize,
    /// Poisson atom arrival rate per empty cavity (1/ms).
    pub atom_arrival_rate: f64,
    /// Deterministic dwell of a loaded atom (ms, fountain transit).
    pub interaction_time: f64,
    /// Duration of one entanglement attempt (us).
    pub photon_slot: f64,
    /// Probability that a first photon is stored in its memory.
    pub eta_store: f64,
    /// Probability that a second photon reaches the Bell measurement.
    pub eta_detect: f64,
    /// Probability of an unambiguous two-photon measurement given both arrive.
    pub p_bsm: f64,
    /// Spin-wave decay of the memories (rad/us).
    pub gamma_s_memory: f64,
    /// Time to re-prepare memories after a photon-loss failure (us).
    pub reset_time: f64,
    /// Memories in the chain; the run completes at `target - 1` edges.
    pub target_chain_length: usize,
    pub rng_seed: u64,
    /// Abort threshold on the total number of attempts.
    pub attempt_cap: u64,
}

impl Default for RusConfig {
    fn default() -> Self {
        Self {
            n_cavities: 2,
            atom_arrival_rate: 10.0,
            interaction_time: 1.0,
            photon_slot: 10.0,
            eta_store: 0.8,
            eta_detect: 0.5,
            p_bsm: 0.5,
            gamma_s_memory: 0.0,
            reset_time: 20.0,
            target_chain_length: 4,
            rng_seed: 0,
            attempt_cap: 10_000_000,
        }
    }
}

impl RusConfig {
    pub fn validate(&self) -> Result<(), RusError> {
        for (name, p) in
            [("eta_store", self.eta_store), ("eta_detect", self.eta_detect), ("p_bsm", self.p_bsm)]
        {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(RusError::InvalidConfig(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.n_cavities < 2 {
            return Err(RusError::InvalidConfig("need at least 2 cavities".into()));
        }
        if !(self.atom_arrival_rate > 0.0) || !(self.interaction_time > 0.0) {
            return Err(RusError::InvalidConfig(
                "atom arrival rate and interaction time must be positive".into(),
            ));
        }
        if !(self.photon_slot > 0.0) || self.reset_time < 0.0 || self.gamma_s_memory < 0.0 {
            return Err(RusError::InvalidConfig(
                "photon_slot must be positive, reset_time and gamma_s_memory non-negative".into(),
            ));
        }
        if self.target_chain_length < 2 {
            return Err(RusError::InvalidConfig("target chain length must be at least 2".into()));
        }
        if self.attempt_cap == 0 {
            return Err(RusError::InvalidConfig("attempt cap must be positive".into()));
        }
        Ok(())
    }

    /// Per-attempt success probability when storage runs every attempt.
    pub fn per_attempt_success(&self) -> f64 {
        self.eta_store.powi(2) * self.eta_detect.powi(2) * self.p_bsm
    }
}

/// Outcome statistics of one cluster-building run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RusRunStats {
    pub seed: u64,
    /// Wall-clock time until the chain completed (ms).
    pub total_time_ms: f64,
    pub attempts_per_edge: Vec<u64>,
    /// exp(-2 gamma_S age) averaged over the memories at completion.
    pub mean_coherence_weight: f64,
    pub edges_completed: usize,
}

/// What a single photon slot produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AttemptOutcome {
    /// Both second photons measured, unambiguous result: edge complete.
    Success,
    /// Both second photons measured, ambiguous result: memories retained.
    FailureWithInsurance,
    /// A first photon was not stored.
    LossAtStorage,
    /// A second photon did not reach the measurement.
    LossAtDetection,
}

/// Event-log row used to audit the failure-with-insurance semantics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttemptEvent {
    pub edge: usize,
    /// Attempt start time (ms).
    pub t_start: f64,
    pub outcome: AttemptOutcome,
    /// Store time of the lower/upper chain memory after the attempt (ms).
    pub mem_lo_store: Option<f64>,
    pub mem_hi_store: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Cavity {
    /// Departure time of the current atom, if loaded (ms).
    departure: Option<f64>,
    /// Next arrival time once empty (ms).
    next_arrival: f64,
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Run the cluster-building Monte Carlo, returning per-run statistics.
pub fn simulate_rus(cfg: &RusConfig) -> Result<RusRunStats, RusError> {
    simulate_rus_logged(cfg).map(|(stats, _)| stats)
}

/// Same as [`simulate_rus`] but also returns the per-attempt event log.
pub fn simulate_rus_logged(cfg: &RusConfig) -> Result<(RusRunStats, Vec<AttemptEvent>), RusError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let slot_ms = cfg.photon_slot / 1e3;
    let reset_ms = cfg.reset_time / 1e3;
    let n_edges = cfg.target_chain_length - 1;

    let mut cavities: Vec<Cavity> = (0..cfg.n_cavities)
        .map(|_| Cavity { departure: None, next_arrival: exp_sample(&mut rng, cfg.atom_arrival_rate) })
        .collect();
    let mut now = 0.0_f64;
    let mut final_store = vec![0.0_f64; cfg.target_chain_length];
    let mut attempts_per_edge = vec![0_u64; n_edges];
    let mut total_attempts = 0_u64;
    let mut events = Vec::new();

    for edge in 0..n_edges {
        // the edge joins chain memories `edge` and `edge + 1`
        let mut store_lo: Option<f64> = None;
        let mut store_hi: Option<f64> = None;
        loop {
            // wait until two cavities hold atoms for a whole slot
            loop {
                let ready = cavities
                    .iter()
                    .filter(|c| c.departure.is_some_and(|d| d >= now + slot_ms))
                    .count();
                if ready >= 2 {
                    break;
                }
                let next_event = cavities
                    .iter()
                    .map(|c| c.departure.unwrap_or(c.next_arrival))
                    .fold(f64::INFINITY, f64::min)
                    .max(now);
                now = next_event;
                for c in cavities.iter_mut() {
                    match c.departure {
                        Some(d) if d <= now => {
                            c.departure = None;
                            c.next_arrival = now + exp_sample(&mut rng, cfg.atom_arrival_rate);
                        }
                        None if c.next_arrival <= now => {
                            c.departure = Some(c.next_arrival + cfg.interaction_time);
                            // re-arm after this atom leaves
                        }
                        _ => {}
                    }
                }
            }

            total_attempts += 1;
            if total_attempts > cfg.attempt_cap {
                return Err(RusError::NonTerminating(cfg.attempt_cap));
            }
            attempts_per_edge[edge] += 1;
            let t_start = now;

            // steps 2-3: store first photons in any memory not already holding one
            if store_lo.is_none() {
                if rng.random::<f64>() < cfg.eta_store {
                    store_lo = Some(t_start);
                }
            }
            if store_hi.is_none() {
                if rng.random::<f64>() < cfg.eta_store {
                    store_hi = Some(t_start);
                }
            }
            now += slot_ms;

            let outcome = if store_lo.is_none() || store_hi.is_none() {
                AttemptOutcome::LossAtStorage
            } else {
                // steps 4-5: second photons race to the Bell measurement
                let arrive_lo = rng.random::<f64>() < cfg.eta_detect;
                let arrive_hi = rng.random::<f64>() < cfg.eta_detect;
                if !(arrive_lo && arrive_hi) {
                    AttemptOutcome::LossAtDetection
                } else if rng.random::<f64>() < cfg.p_bsm {
                    AttemptOutcome::Success
                } else {
                    AttemptOutcome::FailureWithInsurance
                }
            };

            match outcome {
                AttemptOutcome::LossAtStorage | AttemptOutcome::LossAtDetection => {
                    // photon loss: the memories must be re-prepared
                    store_lo = None;
                    store_hi = None;
                    now += reset_ms;
                }
                AttemptOutcome::FailureWithInsurance => {
                    // unbiased-basis failure: stored qubits survive for retry
                }
                AttemptOutcome::Success => {}
            }
            events.push(AttemptEvent {
                edge,
                t_start,
                outcome,
                mem_lo_store: store_lo,
                mem_hi_store: store_hi,
            });
            if outcome == AttemptOutcome::Success {
                final_store[edge] = store_lo.expect("stored on success");
                final_store[edge + 1] = store_hi.expect("stored on success");
                break;
            }
        }
    }

    let mean_coherence_weight = final_store
        .iter()
        .map(|&t| (-2.0 * cfg.gamma_s_memory * (now - t) * 1e3).exp())
        .sum::<f64>()
        / cfg.target_chain_length as f64;

    Ok((
        RusRunStats {
            seed: cfg.rng_seed,
            total_time_ms: now,
            attempts_per_edge,
            mean_coherence_weight,
            edges_completed: n_edges,
        },
        events,
    ))
}

/// Closed-form estimate under always-loaded cavities and i.i.d. attempts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BuildTimeEstimate {
    pub per_attempt_success: f64,
    /// Expected total attempts over all edges.
    pub mean_attempts: f64,
    /// Expected completion time (ms).
    pub mean_time_ms: f64,
}

/// Expected build time per the geometric model: per-edge success probability
/// p = eta_store^2 eta_detect^2 p_bsm, 1/p attempts per edge, and an expected
/// reset cost of (1 - eta_store^2 eta_detect^2) reset_time per attempt.
pub fn expected_build_time(cfg: &RusConfig) -> Result<BuildTimeEstimate, RusError> {
    cfg.validate()?;
    let p = cfg.per_attempt_success();
    if p == 0.0 {
        return Err(RusError::ZeroSuccessProbability);
    }
    let edges = (cfg.target_chain_length - 1) as f64;
    let p_loss = 1.0 - cfg.eta_store.powi(2) * cfg.eta_detect.powi(2);
    let slot_cost_ms = (cfg.photon_slot + p_loss * cfg.reset_time) / 1e3;
    Ok(BuildTimeEstimate {
        per_attempt_success: p,
        mean_attempts: edges / p,
        mean_time_ms: edges * slot_cost_ms / p,
    })
}

/// Independent runs over consecutive seeds starting at `cfg.rng_seed`.
pub fn run_batch(cfg: &RusConfig, n_runs: usize) -> Result<Vec<RusRunStats>, RusError> {
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut c = cfg.clone();
            c.rng_seed = cfg.rng_seed.wrapping_add(i as u64);
            simulate_rus(&c)
        })
        .collect()
}
