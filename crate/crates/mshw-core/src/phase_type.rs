//! Phase-type service-time distributions.
//!
//! A phase-type law is the absorption time of a continuous-time Markov chain
//! on phases `1..=K` plus an absorbing state. It is parametrized by the
//! initial-phase distribution `p`, the per-phase exponential rates `ν` and the
//! sub-stochastic routing matrix `P` (zero diagonal, `I − P` invertible).
//!
//! [`PhaseType::new`] validates the parameters and precomputes the derived
//! algebra used everywhere else:
//!
//! * sub-generator `F = diag(ν)(P − I)` and `R = (I − P′)diag(ν)`,
//! * mean `m = p′(diag(ν)(I − P))⁻¹e`, mean rate `μ = 1/m`,
//! * phase-load vector `γ` solving `Rγ = μp` (so `e′γ = 1`, `γ > 0`),
//! * routing covariance matrices `Hᵏ` for the multinomial selector vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{dot, SquareMat};
use crate::random::{self, Stream};

/// Hard cap on the number of phases; dense O(K³) algebra is used throughout.
pub const MAX_PHASES: usize = 32;

/// Residual tolerance for the load-vector equation `Rγ = μp`.
pub const GAMMA_RESIDUAL_TOL: f64 = 1e-10;

/// Condition-number threshold above which `I − P` is treated as singular.
pub const TRANSIENCE_CONDITION_LIMIT: f64 = 1e12;

const SAMPLER_PHASE_CAP: usize = 1_000_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseTypeError {
    /// `p` is not a probability vector.
    NonStochasticInit,
    /// Some diagonal entry of `P` is nonzero.
    NonzeroDiagonal,
    /// `I − P` is singular (or numerically indistinguishable from singular).
    NotTransient,
    /// Some rate `ν_k` is not strictly positive.
    NonpositiveRate,
    /// `P` has a negative entry or a row summing to more than one.
    NonSubstochasticRouting,
    /// A phase carries zero long-run load; drop it from the model.
    UnreachablePhase(usize),
    /// Parameter arrays disagree in size.
    DimensionMismatch,
    /// More than [`MAX_PHASES`] phases.
    TooManyPhases,
    /// A parameter entry is NaN or infinite.
    NonFinite,
    /// `cdf` was called with a negative argument.
    NegativeArgument,
    /// Phase index outside `0..=K`.
    IndexOutOfRange,
}

impl fmt::Display for PhaseTypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseTypeError::NonStochasticInit => {
                write!(f, "initial-phase vector is not a probability distribution")
            }
            PhaseTypeError::NonzeroDiagonal => write!(f, "routing matrix has a nonzero diagonal"),
            PhaseTypeError::NotTransient => {
                write!(f, "I - P is singular to working precision; routing is not transient")
            }
            PhaseTypeError::NonpositiveRate => write!(f, "phase rates must be positive"),
            PhaseTypeError::NonSubstochasticRouting => {
                write!(f, "routing matrix must be entrywise nonnegative with row sums <= 1")
            }
            PhaseTypeError::UnreachablePhase(k) => {
                write!(f, "phase {k} carries no load; remove it from the model")
            }
            PhaseTypeError::DimensionMismatch => write!(f, "parameter dimensions disagree"),
            PhaseTypeError::TooManyPhases => write!(f, "at most {MAX_PHASES} phases supported"),
            PhaseTypeError::NonFinite => write!(f, "parameters must be finite"),
            PhaseTypeError::NegativeArgument => write!(f, "argument must be nonnegative"),
            PhaseTypeError::IndexOutOfRange => write!(f, "phase index out of range"),
        }
    }
}

impl core::error::Error for PhaseTypeError {}

/// One service draw: the total duration and the visited phase sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceDraw {
    pub duration: f64,
    pub phases: Vec<usize>,
}

/// A validated phase-type distribution with its derived algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    p: Vec<f64>,
    nu: Vec<f64>,
    routing: SquareMat,
    sub_generator: SquareMat,
    rate_matrix: SquareMat,
    mean: f64,
    second_moment: f64,
    mu: f64,
    gamma: Vec<f64>,
}

impl PhaseType {
    /// Validates `(p, ν, P)` and computes the derived quantities.
    pub fn new(p: Vec<f64>, nu: Vec<f64>, routing: SquareMat) -> Result<Self, PhaseTypeError> {
        let k = p.len();
        if k == 0 || nu.len() != k || routing.n() != k {
            return Err(PhaseTypeError::DimensionMismatch);
        }
        if k > MAX_PHASES {
            return Err(PhaseTypeError::TooManyPhases);
        }
        if p.iter().any(|v| !v.is_finite())
            || nu.iter().any(|v| !v.is_finite())
            || !routing.is_finite()
        {
            return Err(PhaseTypeError::NonFinite);
        }
        if p.iter().any(|&v| v < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(PhaseTypeError::NonStochasticInit);
        }
        if nu.iter().any(|&v| v <= 0.0) {
            return Err(PhaseTypeError::NonpositiveRate);
        }
        for i in 0..k {
            if routing.get(i, i) != 0.0 {
                return Err(PhaseTypeError::NonzeroDiagonal);
            }
            let row = routing.row(i);
            if row.iter().any(|&v| v < 0.0) || row.iter().sum::<f64>() > 1.0 + 1e-12 {
                return Err(PhaseTypeError::NonSubstochasticRouting);
            }
        }

        let identity = SquareMat::identity(k);
        let i_minus_p = identity.sub(&routing);
        match i_minus_p.condition_one() {
            Ok(cond) if cond <= TRANSIENCE_CONDITION_LIMIT => {}
            _ => return Err(PhaseTypeError::NotTransient),
        }

        // F = diag(nu)(P - I); the absorption-time algebra runs through
        // A = -F = diag(nu)(I - P).
        let diag_nu = SquareMat::diag(&nu);
        let a = diag_nu.matmul(&i_minus_p);
        let sub_generator = a.scale(-1.0);
        let rate_matrix = i_minus_p.transpose().matmul(&diag_nu);

        let ones = vec![1.0; k];
        let a_inv_e = a.solve(&ones).map_err(|_| PhaseTypeError::NotTransient)?;
        let mean = dot(&p, &a_inv_e);
        let a_inv2_e = a.solve(&a_inv_e).map_err(|_| PhaseTypeError::NotTransient)?;
        let second_moment = 2.0 * dot(&p, &a_inv2_e);
        let mu = 1.0 / mean;

        let mu_p: Vec<f64> = p.iter().map(|v| mu * v).collect();
        let gamma = rate_matrix.solve(&mu_p).map_err(|_| PhaseTypeError::NotTransient)?;
        let residual: Vec<f64> = rate_matrix
            .matvec(&gamma)
            .iter()
            .zip(&mu_p)
            .map(|(a, b)| a - b)
            .collect();
        if residual.iter().any(|r| r.abs() > GAMMA_RESIDUAL_TOL) {
            return Err(PhaseTypeError::NotTransient);
        }
        if let Some(kk) = gamma.iter().position(|&g| g <= 0.0) {
            return Err(PhaseTypeError::UnreachablePhase(kk));
        }
        debug_assert!((gamma.iter().sum::<f64>() - 1.0).abs() < 1e-8);

        Ok(PhaseType {
            p,
            nu,
            routing,
            sub_generator,
            rate_matrix,
            mean,
            second_moment,
            mu,
            gamma,
        })
    }

    /// Number of phases `K`.
    pub fn phases(&self) -> usize {
        self.p.len()
    }

    /// Initial-phase distribution `p`.
    pub fn initial_law(&self) -> &[f64] {
        &self.p
    }

    /// Per-phase rates `ν`.
    pub fn rates(&self) -> &[f64] {
        &self.nu
    }

    /// Routing matrix `P`.
    pub fn routing(&self) -> &SquareMat {
        &self.routing
    }

    /// Sub-generator `F = diag(ν)(P − I)`.
    pub fn sub_generator(&self) -> &SquareMat {
        &self.sub_generator
    }

    /// `R = (I − P′)diag(ν)`.
    pub fn rate_matrix(&self) -> &SquareMat {
        &self.rate_matrix
    }

    /// Mean service time `m`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Second moment `E[v²] = 2p′(diag(ν)(I−P))⁻²e`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }

    /// Mean service rate `μ = 1/m`.
    pub fn rate(&self) -> f64 {
        self.mu
    }

    /// Phase-load vector `γ` (fraction of busy servers per phase).
    pub fn load_vector(&self) -> &[f64] {
        &self.gamma
    }

    /// Draws one service time and its visited phase sequence.
    ///
    /// The first phase follows `p`, transitions follow the rows of `P` with
    /// exit probability `1 − Σ_ℓ P_{kℓ}`, and each visit adds an independent
    /// `Exp(ν_k)` duration. Transience makes the visit count finite almost
    /// surely; a defect-detecting cap panics after 10⁹ visits.
    pub fn sample(&self, rng: &mut Stream) -> ServiceDraw {
        let mut phases = Vec::with_capacity(2);
        let mut duration = 0.0;
        let mut phase = random::categorical(rng, &self.p);
        loop {
            phases.push(phase);
            duration += random::exponential(rng, self.nu[phase]);
            match self.route_from(rng, phase) {
                Some(next) => phase = next,
                None => break,
            }
            assert!(
                phases.len() < SAMPLER_PHASE_CAP,
                "phase-type sampler exceeded {SAMPLER_PHASE_CAP} transitions; \
                 routing matrix is defective"
            );
        }
        ServiceDraw { duration, phases }
    }

    /// One routing step out of `phase`: `Some(next)` or `None` for exit.
    #[inline]
    pub(crate) fn route_from(&self, rng: &mut Stream, phase: usize) -> Option<usize> {
        let row = self.routing.row(phase);
        let u = random::uniform(rng);
        let mut acc = 0.0;
        for (next, &pr) in row.iter().enumerate() {
            acc += pr;
            if u < acc {
                return Some(next);
            }
        }
        None
    }

    /// `P[v ≤ x] = 1 − p′ exp(Fx) e`, evaluated by uniformization.
    ///
    /// `F` is written as `Λ(Q − I)` with `Λ = max ν`, so `Q` is entrywise
    /// nonnegative and the Poisson-weighted series has no cancellation. Large
    /// `Λx` is split by repeated squaring of the segment matrix.
    pub fn cdf(&self, x: f64) -> Result<f64, PhaseTypeError> {
        if !(x >= 0.0) {
            return Err(PhaseTypeError::NegativeArgument);
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let k = self.phases();
        let lam = self.nu.iter().fold(0.0f64, |m, &v| m.max(v));
        let mut squarings = 0u32;
        let mut tau = x;
        while lam * tau > 32.0 && squarings < 40 {
            tau *= 0.5;
            squarings += 1;
        }
        // Q = I + F/lam is entrywise nonnegative and substochastic, so the
        // Poisson-weighted series for exp(F tau) has no cancellation.
        let q = SquareMat::identity(k).add(&self.sub_generator.scale(1.0 / lam));
        let rho = lam * tau;
        let mut weight = libm::exp(-rho);
        let mut cumulative = weight;
        let mut power = SquareMat::identity(k); // Q^j
        let mut segment = power.scale(weight);
        let mut j = 1u64;
        while 1.0 - cumulative > 1e-15 && j < 100_000 {
            power = power.matmul(&q);
            weight *= rho / j as f64;
            cumulative += weight;
            segment = segment.add(&power.scale(weight));
            j += 1;
        }
        for _ in 0..squarings {
            segment = segment.matmul(&segment);
        }
        let survival: f64 = self
            .p
            .iter()
            .enumerate()
            .map(|(i, &pi)| pi * segment.row(i).iter().sum::<f64>())
            .sum();
        Ok((1.0 - survival).clamp(0.0, 1.0))
    }

    /// Covariance matrix `Hᵏ` of the phase-selection indicator vectors.
    ///
    /// `k = 0` refers to the initial-phase selector (law `p`); `k = 1..=K`
    /// refers to the routing selector out of phase `k` (law `pᵏ`, the `k`-th
    /// column of `P′`). `Hᵏ_{ii} = pᵏ_i(1 − pᵏ_i)` and `Hᵏ_{ij} = −pᵏ_i pᵏ_j`.
    pub fn routing_cov(&self, k: usize) -> Result<SquareMat, PhaseTypeError> {
        let kk = self.phases();
        if k > kk {
            return Err(PhaseTypeError::IndexOutOfRange);
        }
        let pvec: Vec<f64> = if k == 0 {
            self.p.clone()
        } else {
            self.routing.row(k - 1).to_vec()
        };
        let mut h = SquareMat::zeros(kk);
        for i in 0..kk {
            for j in 0..kk {
                if i == j {
                    h.set(i, j, pvec[i] * (1.0 - pvec[i]));
                } else {
                    h.set(i, j, -pvec[i] * pvec[j]);
                }
            }
        }
        Ok(h)
    }

    /// Single exponential phase with the given rate.
    pub fn exponential(rate: f64) -> Result<Self, PhaseTypeError> {
        Self::new(vec![1.0], vec![rate], SquareMat::zeros(1))
    }
}

/// The two-phase Coxian example used throughout the test suite:
/// `p = (1,0)`, `ν = (1,2)`, `P₁₂ = 1/2`, giving `m = 1.25`, `γ = (0.8, 0.2)`.
#[cfg(any(test, feature = "std"))]
pub fn coxian_example() -> PhaseType {
    let mut routing = SquareMat::zeros(2);
    routing.set(0, 1, 0.5);
    PhaseType::new(vec![1.0, 0.0], vec![1.0, 2.0], routing).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::stream;

    #[test]
    fn single_exponential_phase() {
        let ph = PhaseType::exponential(2.0).unwrap();
        assert!((ph.mean() - 0.5).abs() < 1e-15);
        assert!((ph.rate() - 2.0).abs() < 1e-15);
        assert!((ph.rate_matrix().get(0, 0) - 2.0).abs() < 1e-15);
        assert!((ph.load_vector()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coxian_against_hand_solved_oracle() {
        // Independent oracle: solve diag(nu)(I-P) x = e and R gamma = mu p by
        // hand for this 2x2 system.
        //   A = [[1, -0.5], [0, 2]]  =>  x2 = 1/2, x1 = 1 + 0.5*x2 = 1.25
        //   m = p'x = 1.25, mu = 0.8
        //   R = [[1, 0], [-0.5, 2]]  =>  g1 = 0.8, g2 = (0 + 0.5*g1)/2 = 0.2
        let ph = coxian_example();
        assert!((ph.mean() - 1.25).abs() < 1e-10);
        assert!((ph.rate() - 0.8).abs() < 1e-10);
        assert!((ph.load_vector()[0] - 0.8).abs() < 1e-10);
        assert!((ph.load_vector()[1] - 0.2).abs() < 1e-10);
        assert!((ph.load_vector().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn load_vector_residual_within_tolerance() {
        let ph = coxian_example();
        let mu_p: Vec<f64> = ph.initial_law().iter().map(|v| ph.rate() * v).collect();
        let res = ph.rate_matrix().matvec(ph.load_vector());
        for (a, b) in res.iter().zip(&mu_p) {
            assert!((a - b).abs() <= GAMMA_RESIDUAL_TOL);
        }
    }

    #[test]
    fn nonzero_diagonal_rejected() {
        let mut routing = SquareMat::zeros(2);
        routing.set(0, 0, 0.1);
        routing.set(0, 1, 0.5);
        let err = PhaseType::new(vec![1.0, 0.0], vec![1.0, 2.0], routing).unwrap_err();
        assert_eq!(err, PhaseTypeError::NonzeroDiagonal);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert_eq!(
            PhaseType::new(vec![0.5, 0.4], vec![1.0, 1.0], SquareMat::zeros(2)).unwrap_err(),
            PhaseTypeError::NonStochasticInit
        );
        assert_eq!(
            PhaseType::new(vec![1.0], vec![0.0], SquareMat::zeros(1)).unwrap_err(),
            PhaseTypeError::NonpositiveRate
        );
        assert_eq!(
            PhaseType::new(vec![1.0], vec![1.0], SquareMat::zeros(2)).unwrap_err(),
            PhaseTypeError::DimensionMismatch
        );
        let mut row_heavy = SquareMat::zeros(2);
        row_heavy.set(0, 1, 1.5);
        assert_eq!(
            PhaseType::new(vec![1.0, 0.0], vec![1.0, 1.0], row_heavy).unwrap_err(),
            PhaseTypeError::NonSubstochasticRouting
        );
        // Absorbing 2-cycle: I - P singular.
        let mut cycle = SquareMat::zeros(2);
        cycle.set(0, 1, 1.0);
        cycle.set(1, 0, 1.0);
        assert_eq!(
            PhaseType::new(vec![1.0, 0.0], vec![1.0, 1.0], cycle).unwrap_err(),
            PhaseTypeError::NotTransient
        );
        // Second phase unreachable.
        assert_eq!(
            PhaseType::new(vec![1.0, 0.0], vec![1.0, 1.0], SquareMat::zeros(2)).unwrap_err(),
            PhaseTypeError::UnreachablePhase(1)
        );
    }

    #[test]
    fn sampler_matches_exponential_mean() {
        let ph = PhaseType::exponential(2.0).unwrap();
        let mut rng = stream(11, 0);
        let n = 1_000_000;
        let total: f64 = (0..n).map(|_| ph.sample(&mut rng).duration).sum();
        let mean = total / n as f64;
        assert!((mean - 0.5).abs() / 0.5 < 0.01, "mean {mean}");
    }

    #[test]
    fn sampler_matches_coxian_moments_and_length_law() {
        let ph = coxian_example();
        let mut rng = stream(12, 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut two_phase = 0usize;
        for _ in 0..n {
            let d = ph.sample(&mut rng);
            sum += d.duration;
            sumsq += d.duration * d.duration;
            if d.phases.len() == 2 {
                two_phase += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // 3 Monte Carlo standard errors for the mean; 1% for the visit law.
        let se_mean = libm::sqrt(ph.variance() / n as f64);
        assert!((mean - ph.mean()).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((mean - 1.25).abs() / 1.25 < 0.01);
        let frac2 = two_phase as f64 / n as f64;
        assert!((frac2 - 0.5).abs() < 0.01, "two-phase fraction {frac2}");
        // Variance against 2p'A^{-2}e - m^2 within a generous MC band.
        assert!((var - ph.variance()).abs() / ph.variance() < 0.02, "var {var}");
    }

    #[test]
    fn cdf_trivial_points() {
        let ph = PhaseType::exponential(2.0).unwrap();
        assert_eq!(ph.cdf(0.0).unwrap(), 0.0);
        let v = ph.cdf(1.0).unwrap();
        assert!((v - (1.0 - libm::exp(-2.0))).abs() < 1e-12, "cdf {v}");
        assert_eq!(ph.cdf(-0.5).unwrap_err(), PhaseTypeError::NegativeArgument);
    }

    #[test]
    fn cdf_matches_monte_carlo_at_unity() {
        let ph = coxian_example();
        let x = 1.0;
        let analytic = ph.cdf(x).unwrap();
        let mut rng = stream(13, 0);
        let n = 10_000_000usize;
        let mut below = 0usize;
        for _ in 0..n {
            if ph.sample(&mut rng).duration <= x {
                below += 1;
            }
        }
        let emp = below as f64 / n as f64;
        let se = libm::sqrt(analytic * (1.0 - analytic) / n as f64);
        assert!((emp - analytic).abs() < 3.0 * se, "emp {emp} analytic {analytic}");
    }

    #[test]
    fn cdf_monotone_and_saturates() {
        let ph = coxian_example();
        let hi = 40.0 * ph.mean();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let x = hi * i as f64 / 1000.0;
            let v = ph.cdf(x).unwrap();
            assert!(v + 1e-12 >= prev, "not monotone at {x}");
            prev = v;
        }
        assert!(1.0 - prev < 1e-6, "tail {}", 1.0 - prev);
    }

    #[test]
    fn cdf_handles_large_uniformization_mass() {
        // Rates spread far apart force the squaring path. The law is
        // v = xi_1 + B xi_2 with xi_1 ~ Exp(1), xi_2 ~ Exp(500), B ~ Bern(1/2),
        // so the CDF has the closed form
        //   0.5 (1 - e^{-x}) + 0.5 (1 - (500 e^{-x} - e^{-500x}) / 499).
        let mut routing = SquareMat::zeros(2);
        routing.set(0, 1, 0.5);
        let ph = PhaseType::new(vec![1.0, 0.0], vec![1.0, 500.0], routing).unwrap();
        for x in [0.05, 0.3, 1.0, 4.0] {
            let exact = 0.5 * (1.0 - libm::exp(-x))
                + 0.5 * (1.0 - (500.0 * libm::exp(-x) - libm::exp(-500.0 * x)) / 499.0);
            let got = ph.cdf(x).unwrap();
            assert!((got - exact).abs() < 1e-10, "x={x}: {got} vs {exact}");
        }
        let v = ph.cdf(20.0).unwrap();
        assert!(v > 1.0 - 1e-6 && v <= 1.0);
    }

    #[test]
    fn routing_cov_examples() {
        let ph = coxian_example();
        // Degenerate initial selector: H^0 = 0.
        let h0 = ph.routing_cov(0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(h0.get(i, j), 0.0);
            }
        }
        // Out of phase 1 the selector law is (0, 0.5).
        let h1 = ph.routing_cov(1).unwrap();
        assert_eq!(h1.get(0, 0), 0.0);
        assert_eq!(h1.get(0, 1), 0.0);
        assert_eq!(h1.get(1, 0), 0.0);
        assert!((h1.get(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(ph.routing_cov(3).unwrap_err(), PhaseTypeError::IndexOutOfRange);
    }

    #[test]
    fn balanced_initial_selector_cov() {
        let ph = PhaseType::new(
            vec![0.5, 0.5],
            vec![1.0, 2.0],
            SquareMat::zeros(2),
        );
        let ph = ph.unwrap();
        let h0 = ph.routing_cov(0).unwrap();
        assert!((h0.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((h0.get(0, 1) + 0.25).abs() < 1e-15);
        assert!((h0.get(1, 0) + 0.25).abs() < 1e-15);
        assert!((h0.get(1, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn routing_cov_matches_empirical_covariance() {
        // Oracle: empirical covariance of 10^6 draws of the routing selector
        // out of phase 1 of the Coxian (e2 w.p. 1/2, zero vector otherwise).
        let ph = coxian_example();
        let h1 = ph.routing_cov(1).unwrap();
        let mut rng = stream(14, 0);
        let n = 1_000_000usize;
        let mut mean = [0.0f64; 2];
        let mut second = [[0.0f64; 2]; 2];
        for _ in 0..n {
            let mut v = [0.0f64; 2];
            if let Some(next) = ph.route_from(&mut rng, 0) {
                v[next] = 1.0;
            }
            for i in 0..2 {
                mean[i] += v[i];
                for j in 0..2 {
                    second[i][j] += v[i] * v[j];
                }
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        for i in 0..2 {
            for j in 0..2 {
                let cov = second[i][j] / n as f64 - mean[i] * mean[j];
                assert!((cov - h1.get(i, j)).abs() < 3.0 / libm::sqrt(n as f64));
            }
        }
    }

    #[test]
    fn selector_covariances_are_psd_with_zero_row_sums_scaled() {
        let ph = coxian_example();
        for k in 0..=2 {
            let h = ph.routing_cov(k).unwrap();
            // Symmetry.
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(h.get(i, j), h.get(j, i));
                }
            }
            let (vals, _) = h.eigen_sym();
            assert!(vals.iter().all(|&v| v >= -1e-12));
            // Row sums equal p^k_i (1 - e'p^k).
            let pvec: Vec<f64> = if k == 0 {
                ph.initial_law().to_vec()
            } else {
                ph.routing().row(k - 1).to_vec()
            };
            let total: f64 = pvec.iter().sum();
            for i in 0..2 {
                let rs: f64 = (0..2).map(|j| h.get(i, j)).sum();
                assert!((rs - pvec[i] * (1.0 - total)).abs() < 1e-14);
            }
        }
    }
}
