//! Simulated annealing kernel.
//!
//! The same state type drives both the colony-level annealer (active
//! solution selection, calibrated up front from random routes) and the
//! local-search annealer (move acceptance, calibrated lazily from the move
//! deltas it sees). Cooling is exponential: `T <- lambda * T`.

use rand::Rng;
use thiserror::Error;

use crate::instance::Instance;
use crate::scalar::Scalar;
use crate::solution::{random_feasible, Route};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnealingError {
    #[error("temperature calibration needs at least one sample")]
    EmptySample,
    #[error("gamma = {0} must lie in (0, 1)")]
    InvalidGamma(f64),
    #[error("lambda = {0} must lie in (0, 1)")]
    InvalidLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureEstimate<F> {
    pub t0: F,
    /// Mean and spread of the sample were both zero; `t0` is then the
    /// smallest positive value of `F`.
    pub degenerate: bool,
}

/// `T0 = (mean + 3 * sd) / ln(1 / gamma)`, with `sd` the sample standard
/// deviation (n - 1 denominator; 0 for a single sample).
pub fn initial_temperature<F: Scalar>(deltas: &[F], gamma: F) -> Result<TemperatureEstimate<F>, AnnealingError> {
    if !(gamma > F::zero() && gamma < F::one()) {
        return Err(AnnealingError::InvalidGamma(gamma.to_f64_lossy()));
    }
    if deltas.is_empty() {
        return Err(AnnealingError::EmptySample);
    }
    let count = F::of(deltas.len() as f64);
    let mean = deltas.iter().fold(F::zero(), |acc, &d| acc + d) / count;
    let sd = if deltas.len() > 1 {
        let ss = deltas.iter().fold(F::zero(), |acc, &d| acc + (d - mean) * (d - mean));
        (ss / (count - F::one())).sqrt()
    } else {
        F::zero()
    };
    let spread = mean + F::of(3.0) * sd;
    if spread > F::zero() {
        Ok(TemperatureEstimate {
            t0: spread / (F::one() / gamma).ln(),
            degenerate: false,
        })
    } else {
        Ok(TemperatureEstimate {
            t0: F::min_positive_value(),
            degenerate: true,
        })
    }
}

/// Metropolis criterion for a worsening of magnitude `delta`: accept with
/// probability `exp(-delta / T)`. No random number is drawn when the
/// outcome is certain (`delta <= 0`, or the probability underflows to 0).
pub fn metropolis_accept<F: Scalar, R: Rng + ?Sized>(delta: F, temperature: F, rng: &mut R) -> bool {
    if delta <= F::zero() {
        return true;
    }
    let p = (-delta / temperature).exp();
    if p.is_nan() || p <= F::zero() {
        return false;
    }
    F::sample_unit(rng) < p
}

#[derive(Debug, Clone)]
pub struct AnnealerState<F> {
    temperature: F,
    t0: F,
    lambda: F,
    gamma: F,
    calibrated: bool,
    degenerate: bool,
    sample: Vec<F>,
    sample_target: usize,
}

impl<F: Scalar> AnnealerState<F> {
    /// Uncalibrated annealer that calibrates itself once `sample_target`
    /// deltas have been pushed.
    pub fn new(lambda: F, gamma: F, sample_target: usize) -> Result<Self, AnnealingError> {
        if !(lambda > F::zero() && lambda < F::one()) {
            return Err(AnnealingError::InvalidLambda(lambda.to_f64_lossy()));
        }
        if !(gamma > F::zero() && gamma < F::one()) {
            return Err(AnnealingError::InvalidGamma(gamma.to_f64_lossy()));
        }
        Ok(AnnealerState {
            temperature: F::zero(),
            t0: F::zero(),
            lambda,
            gamma,
            calibrated: false,
            degenerate: false,
            sample: Vec::new(),
            sample_target: sample_target.max(1),
        })
    }

    /// Calibrates immediately from `deltas`.
    pub fn calibrate(&mut self, deltas: &[F]) -> Result<(), AnnealingError> {
        let estimate = initial_temperature(deltas, self.gamma)?;
        self.t0 = estimate.t0;
        self.temperature = estimate.t0;
        self.degenerate = estimate.degenerate;
        self.calibrated = true;
        self.sample = Vec::new();
        Ok(())
    }

    /// Skips calibration and pins `T0` (which may be 0) directly.
    pub fn force_temperature(&mut self, t0: F) {
        self.t0 = t0;
        self.temperature = t0;
        self.calibrated = true;
        self.degenerate = false;
        self.sample = Vec::new();
    }

    /// Adds `|delta|` to the calibration sample; returns whether the state
    /// is calibrated afterwards.
    pub fn calibration_push(&mut self, delta: F) -> bool {
        if self.calibrated {
            return true;
        }
        self.sample.push(delta.abs());
        if self.sample.len() >= self.sample_target {
            let sample = std::mem::take(&mut self.sample);
            // gamma was validated and the sample is non-empty
            let _ = self.calibrate(&sample);
        }
        self.calibrated
    }

    /// `T <- lambda * T`. No-op before calibration.
    #[inline]
    pub fn cool(&mut self) {
        if self.calibrated {
            self.temperature = self.temperature * self.lambda;
        }
    }

    /// Restores `T0` without recomputing it.
    pub fn reset(&mut self) {
        self.temperature = self.t0;
    }

    /// Metropolis decision at the current temperature.
    pub fn accept<R: Rng + ?Sized>(&self, delta: F, rng: &mut R) -> bool {
        metropolis_accept(delta, self.temperature, rng)
    }

    #[inline]
    pub fn temperature(&self) -> F {
        self.temperature
    }

    #[inline]
    pub fn initial_temperature(&self) -> F {
        self.t0
    }

    #[inline]
    pub fn lambda(&self) -> F {
        self.lambda
    }

    #[inline]
    pub fn gamma(&self) -> F {
        self.gamma
    }

    #[inline]
    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn sample_len(&self) -> usize {
        self.sample.len()
    }

    pub fn sample_target(&self) -> usize {
        self.sample_target
    }
}

/// Absolute cost differences between consecutive routes of a random
/// sample of `count` feasible routes (`count - 1` values).
pub fn random_route_deltas<F: Scalar, R: Rng + ?Sized>(instance: &Instance, count: usize, rng: &mut R) -> Vec<F> {
    let mut deltas = Vec::with_capacity(count.saturating_sub(1));
    let mut previous: Option<i64> = None;
    for _ in 0..count {
        let cost = random_feasible(instance, rng).cost();
        if let Some(p) = previous {
            deltas.push(F::of((cost - p).abs() as f64));
        }
        previous = Some(cost);
    }
    deltas
}

#[derive(Debug, Clone)]
pub struct ActiveSelection {
    pub active: Route,
    /// Candidates that replaced the active route despite costing more.
    pub worse_accepted: usize,
}

/// Scans `candidates` in order: a cheaper candidate always replaces the
/// active route, any other replaces it with probability
/// `exp(-(C(candidate) - C(active)) / T)`. With no active route yet the
/// first candidate is taken as is.
///
/// # Panics
///
/// If `active` is `None` and `candidates` is empty.
pub fn select_active_solution<F: Scalar, R: Rng + ?Sized>(
    active: Option<Route>,
    candidates: &[Route],
    state: &AnnealerState<F>,
    rng: &mut R,
) -> ActiveSelection {
    let mut rest = candidates;
    let mut active = match active {
        Some(route) => route,
        None => {
            let (first, tail) = candidates.split_first().expect("no active route and no candidates");
            rest = tail;
            first.clone()
        }
    };
    let mut worse_accepted = 0;
    for candidate in rest {
        if candidate.cost() < active.cost() {
            active = candidate.clone();
        } else {
            let delta = candidate.cost() - active.cost();
            if state.accept(F::of(delta as f64), rng) {
                if delta > 0 {
                    worse_accepted += 1;
                }
                active = candidate.clone();
            }
        }
    }
    ActiveSelection { active, worse_accepted }
}
