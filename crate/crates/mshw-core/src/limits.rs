//! Limit objects: fluid constants, Brownian driver sets, diffusion paths
//! obtained through the integral maps, and the customer-count SDE.
//!
//! Driver sampling follows the covariance structure of the queueing
//! primitives: the arrival noise has variance `λc_a²` per unit time, the
//! phase-selection noises have covariances `H⁰..Hᴷ`, the service-completion
//! noise has covariance `diag(ν)`, and (overloaded only) the abandonment
//! noise has variance `α`. Deterministic time changes are folded into the
//! per-step variances, which is exact in law for Brownian motion. The
//! assembled pair `(Ũ, Ṽ)` drives the critically loaded map `Φ` or the
//! overloaded map `Ψ`; `e′Ṽ ≡ 0` is enforced exactly by projecting each
//! vector increment onto the zero-sum hyperplane (the covariances are
//! singular in that direction by construction).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::des::{Regime, Scenario};
use crate::grid::{points_for, GridError, GridPath};
use crate::linalg::SquareMat;
use crate::maps::{self, MapCoefficients, MapError, SolveOptions};
use crate::random;

#[derive(Debug, Clone, PartialEq)]
pub enum LimitError {
    /// The operation applies to the other regime.
    WrongRegime,
    /// A covariance matrix has an eigenvalue below `−1e−10`; the phase-type
    /// algebra upstream is defective.
    NonPsdCovariance,
    Map(MapError),
    Grid(GridError),
}

impl fmt::Display for LimitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitError::WrongRegime => write!(f, "operation not defined in this regime"),
            LimitError::NonPsdCovariance => write!(f, "covariance matrix is not PSD"),
            LimitError::Map(e) => write!(f, "{e}"),
            LimitError::Grid(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for LimitError {}

impl From<MapError> for LimitError {
    fn from(e: MapError) -> Self {
        LimitError::Map(e)
    }
}

impl From<GridError> for LimitError {
    fn from(e: GridError) -> Self {
        LimitError::Grid(e)
    }
}

/// First-order (law of large numbers) limits of the scaled processes.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidLimit {
    /// Arrival rate `λ` per server.
    pub arrival_rate: f64,
    /// Service-entry rate `μ`.
    pub entry_rate: f64,
    /// Service-completion rate `μ`.
    pub completion_rate: f64,
    /// Busy-time accumulation rates, `γ` per phase.
    pub busy_rate: Vec<f64>,
    /// Scaled total-count level: `q` when overloaded, `0` when critical.
    pub count_level: f64,
    /// Scaled server-allocation level, `γ`.
    pub allocation_level: Vec<f64>,
}

pub fn fluid(sc: &Scenario) -> FluidLimit {
    FluidLimit {
        arrival_rate: sc.lambda,
        entry_rate: sc.mu(),
        completion_rate: sc.mu(),
        busy_rate: sc.ph.load_vector().to_vec(),
        count_level: sc.q(),
        allocation_level: sc.ph.load_vector().to_vec(),
    }
}

/// One realization of the Brownian drivers on a grid, plus the assembled
/// composite processes and the initial pair.
///
/// Stored driver paths carry their deterministic time changes already: the
/// selector noises run at rates `μ` (initial selector) and `ν_k γ_k`
/// (routing selectors), the completion noise at rates `ν_k γ_k`, and the
/// abandonment noise at rate `αq`.
#[derive(Debug, Clone)]
pub struct DriverSet {
    pub dt: f64,
    pub phases: usize,
    /// Arrival noise `Ẽ`.
    pub e: Vec<f64>,
    /// Selector noises `Φ̃⁰(μ·), Φ̃ᵏ(ν_kγ_k·)`; `K+1` paths, each `npts × K`.
    pub phi: Vec<Vec<f64>>,
    /// Completion noise `S̃(γ·)`, `npts × K`.
    pub s: Vec<f64>,
    /// Abandonment noise `G̃(q·)` (overloaded only).
    pub g: Option<Vec<f64>>,
    /// Composite routing noise `M̃`, `npts × K`.
    pub m: Vec<f64>,
    /// Scalar driver `Ũ`.
    pub u: Vec<f64>,
    /// Vector driver `Ṽ`, `npts × K`; `e′Ṽ ≡ 0`.
    pub v: Vec<f64>,
    pub x0: f64,
    pub z0: Vec<f64>,
}

impl DriverSet {
    pub fn num_points(&self) -> usize {
        self.e.len()
    }

    pub fn horizon(&self) -> f64 {
        (self.num_points() - 1) as f64 * self.dt
    }

    /// All-zero drivers (useful for deterministic-skeleton studies).
    pub fn zeros(phases: usize, dt: f64, horizon: f64) -> Self {
        let npts = points_for(dt, horizon);
        DriverSet {
            dt,
            phases,
            e: vec![0.0; npts],
            phi: vec![vec![0.0; npts * phases]; phases + 1],
            s: vec![0.0; npts * phases],
            g: None,
            m: vec![0.0; npts * phases],
            u: vec![0.0; npts],
            v: vec![0.0; npts * phases],
            x0: 0.0,
            z0: vec![0.0; phases],
        }
    }

    /// Packs `(Ũ, Ṽ)` as a grid path for the map solver.
    pub fn uv_path(&self) -> Result<GridPath, GridError> {
        let k = self.phases;
        let npts = self.num_points();
        let mut vals = Vec::with_capacity(npts * (k + 1));
        for i in 0..npts {
            vals.push(self.u[i]);
            vals.extend_from_slice(&self.v[i * k..(i + 1) * k]);
        }
        GridPath::from_values(k, self.dt, vals)
    }
}

/// Columns of a factor `L` with `LL′ = H`, restricted to the numerically
/// positive eigenspace (eigenvalues clamped at zero).
fn spectral_factor(h: &SquareMat) -> Result<Vec<Vec<f64>>, LimitError> {
    let k = h.n();
    let (vals, vecs) = h.eigen_sym();
    let top = vals.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut cols = Vec::new();
    for (j, &v) in vals.iter().enumerate() {
        if v < -1e-10 {
            return Err(LimitError::NonPsdCovariance);
        }
        if v > 1e-13 * top.max(1e-30) {
            let s = libm::sqrt(v);
            cols.push((0..k).map(|r| vecs.get(r, j) * s).collect());
        }
    }
    Ok(cols)
}

/// Removes the component along the all-ones direction.
#[inline]
fn project_zero_sum(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Samples one driver realization; deterministic in `(seed, stream)`.
///
/// The initial pair is the fluid start: `X̃(0) = 0` and `Z̃(0)` Gaussian with
/// the multinomial covariance `diag(γ) − γγ′`, matching the simulator's
/// stationary-phase-mix initialization.
pub fn sample_drivers(
    sc: &Scenario,
    dt: f64,
    horizon: f64,
    seed: u64,
    stream_index: u64,
) -> Result<DriverSet, LimitError> {
    let k = sc.ph.phases();
    let npts = points_for(dt, horizon);
    let mu = sc.mu();
    let gamma = sc.ph.load_vector();
    let nu = sc.ph.rates();
    let p = sc.ph.initial_law();
    let routing = sc.ph.routing();
    let alpha = sc.alpha();
    let q = sc.q();
    let overloaded = sc.regime == Regime::Overloaded;

    // Per-unit-time variance rates after the time changes.
    let e_rate = sc.lambda * sc.arrival_scv();
    let phi_rate: Vec<f64> = core::iter::once(mu)
        .chain((0..k).map(|j| nu[j] * gamma[j]))
        .collect();
    let s_rate: Vec<f64> = (0..k).map(|j| nu[j] * gamma[j]).collect();
    let g_rate = alpha * q;

    let mut phi_factors = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let h = sc.ph.routing_cov(j).expect("index in range");
        phi_factors.push(spectral_factor(&h)?);
    }
    // Multinomial covariance of the initial allocation fluctuation.
    let mut z0_cov = SquareMat::zeros(k);
    for i in 0..k {
        for j in 0..k {
            let v = if i == j { gamma[i] * (1.0 - gamma[i]) } else { -gamma[i] * gamma[j] };
            z0_cov.set(i, j, v);
        }
    }
    let z0_factor = spectral_factor(&z0_cov)?;

    let mut rng = random::stream(seed, stream_index);

    let mut z0 = vec![0.0; k];
    for col in &z0_factor {
        let n = random::standard_normal(&mut rng);
        for (z, c) in z0.iter_mut().zip(col) {
            *z += c * n;
        }
    }
    project_zero_sum(&mut z0);
    let x0 = 0.0;

    let mut set = DriverSet {
        dt,
        phases: k,
        e: vec![0.0; npts],
        phi: vec![vec![0.0; npts * k]; k + 1],
        s: vec![0.0; npts * k],
        g: if overloaded { Some(vec![0.0; npts]) } else { None },
        m: vec![0.0; npts * k],
        u: vec![0.0; npts],
        v: vec![0.0; npts * k],
        x0,
        z0: z0.clone(),
    };

    // v(0) = (I − pe′) Z̃(0); u(0) = X̃(0).
    let e_z0: f64 = z0.iter().sum();
    for l in 0..k {
        set.v[l] = z0[l] - p[l] * e_z0;
    }
    set.u[0] = x0;

    let sqdt = libm::sqrt(dt);
    let mut dphi = vec![vec![0.0f64; k]; k + 1];
    let mut ds = vec![0.0f64; k];
    let mut dm = vec![0.0f64; k];
    let mut dv = vec![0.0f64; k];

    for i in 1..npts {
        // Fixed draw order: arrival, selectors 0..=K, completions, overload.
        let de = if e_rate > 0.0 {
            libm::sqrt(e_rate) * sqdt * random::standard_normal(&mut rng)
        } else {
            0.0
        };
        for (j, factor) in phi_factors.iter().enumerate() {
            let scale = libm::sqrt(phi_rate[j]) * sqdt;
            let out = &mut dphi[j];
            out.fill(0.0);
            for col in factor {
                let n = random::standard_normal(&mut rng);
                for (o, c) in out.iter_mut().zip(col) {
                    *o += scale * c * n;
                }
            }
            if j == 0 && !factor.is_empty() {
                project_zero_sum(out);
            }
        }
        for (j, d) in ds.iter_mut().enumerate() {
            *d = libm::sqrt(s_rate[j]) * sqdt * random::standard_normal(&mut rng);
        }
        let dg = if overloaded && g_rate > 0.0 {
            libm::sqrt(g_rate) * sqdt * random::standard_normal(&mut rng)
        } else {
            0.0
        };

        // dM = Σ_k dΦᵏ − (I − P′) dS.
        for l in 0..k {
            let mut acc = 0.0;
            for dp in dphi.iter().skip(1) {
                acc += dp[l];
            }
            let mut ps = 0.0;
            for j in 0..k {
                ps += routing.get(j, l) * ds[j];
            }
            dm[l] = acc - (ds[l] - ps);
        }
        let e_dm: f64 = dm.iter().sum();
        let du = de - mu * sc.beta * dt + e_dm - dg;
        for l in 0..k {
            dv[l] = dphi[0][l] + dm[l] - p[l] * e_dm;
        }
        project_zero_sum(&mut dv);

        set.e[i] = set.e[i - 1] + de;
        for j in 0..=k {
            for l in 0..k {
                set.phi[j][i * k + l] = set.phi[j][(i - 1) * k + l] + dphi[j][l];
            }
        }
        for l in 0..k {
            set.s[i * k + l] = set.s[(i - 1) * k + l] + ds[l];
            set.m[i * k + l] = set.m[(i - 1) * k + l] + dm[l];
            set.v[i * k + l] = set.v[(i - 1) * k + l] + dv[l];
        }
        if let Some(gpath) = set.g.as_mut() {
            gpath[i] = gpath[i - 1] + dg;
        }
        set.u[i] = set.u[i - 1] + du;
    }
    Ok(set)
}

/// A limit path: the scaled count `X̃`, allocation `Z̃`, customer-count
/// vector `Ỹ`, abandonment compensator `Ã`, and virtual-wait limit
/// `(X̃)⁺/μ`.
#[derive(Debug, Clone)]
pub struct LimitPath {
    pub dt: f64,
    pub phases: usize,
    pub x: Vec<f64>,
    /// Row-major `npts × K`.
    pub z: Vec<f64>,
    /// `Ỹ = p(X̃)⁺ + Z̃`, row-major `npts × K`.
    pub y: Vec<f64>,
    /// `Ã(t) = α ∫ (X̃)⁺`.
    pub abandon: Vec<f64>,
    /// `(X̃)⁺ / μ`.
    pub w: Vec<f64>,
}

impl LimitPath {
    pub fn num_points(&self) -> usize {
        self.x.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn index_at(&self, t: f64) -> usize {
        (((t / self.dt) * (1.0 + 1e-12)) as usize).min(self.num_points() - 1)
    }

    pub fn z_at(&self, i: usize, k: usize) -> f64 {
        self.z[i * self.phases + k]
    }

    pub fn y_at(&self, i: usize, k: usize) -> f64 {
        self.y[i * self.phases + k]
    }
}

fn finish_limit_path(sc: &Scenario, dt: f64, k: usize, x: Vec<f64>, z: Vec<f64>) -> LimitPath {
    let npts = x.len();
    let p = sc.ph.initial_law();
    let alpha = sc.alpha();
    let mu = sc.mu();
    let mut y = vec![0.0; npts * k];
    let mut abandon = vec![0.0; npts];
    let mut w = vec![0.0; npts];
    for i in 0..npts {
        let xp = x[i].max(0.0);
        for l in 0..k {
            y[i * k + l] = p[l] * xp + z[i * k + l];
        }
        w[i] = xp / mu;
        if i > 0 {
            let prev = x[i - 1].max(0.0);
            abandon[i] = abandon[i - 1] + alpha * 0.5 * dt * (prev + xp);
        }
    }
    LimitPath { dt, phases: k, x, z, y, abandon, w }
}

/// Applies the regime's map to an existing driver realization.
pub fn diffusion_path_from_drivers(
    sc: &Scenario,
    drivers: &DriverSet,
) -> Result<LimitPath, LimitError> {
    let k = sc.ph.phases();
    let coeff = match sc.regime {
        Regime::Critical => MapCoefficients::phi(sc.alpha(), &sc.ph),
        Regime::Overloaded => MapCoefficients::psi(sc.alpha(), &sc.ph),
    };
    let uv = drivers.uv_path()?;
    let xz = maps::picard_solve(&coeff, &uv, &SolveOptions::default())?;
    let npts = xz.num_points();
    let mut x = Vec::with_capacity(npts);
    let mut z = Vec::with_capacity(npts * k);
    for i in 0..npts {
        x.push(xz.x(i));
        z.extend_from_slice(xz.z(i));
    }
    Ok(finish_limit_path(sc, drivers.dt, k, x, z))
}

/// Samples drivers and applies the regime's map.
pub fn diffusion_path(
    sc: &Scenario,
    dt: f64,
    horizon: f64,
    seed: u64,
    stream_index: u64,
) -> Result<LimitPath, LimitError> {
    let drivers = sample_drivers(sc, dt, horizon, seed, stream_index)?;
    diffusion_path_from_drivers(sc, &drivers)
}

/// Euler scheme for the customer-count SDE (critical regime only):
///
/// ```text
/// Ỹ(t) = Ỹ(0) − βμp t + Φ̃⁰(μt) + pẼ(t) + M̃(t)
///        − R∫Ỹ + (R − αI)p∫(e′Ỹ)⁺
/// ```
///
/// driven by the same realization as the map route; `(X̃, Z̃)` are recovered
/// through `X̃ = e′Ỹ`, `Z̃ = Ỹ − p(X̃)⁺`.
pub fn y_sde_path(sc: &Scenario, drivers: &DriverSet) -> Result<LimitPath, LimitError> {
    if sc.regime != Regime::Critical {
        return Err(LimitError::WrongRegime);
    }
    let k = sc.ph.phases();
    let p = sc.ph.initial_law();
    let r = sc.ph.rate_matrix();
    let mu = sc.mu();
    let alpha = sc.alpha();
    let beta = sc.beta;
    let dt = drivers.dt;
    let npts = drivers.num_points();

    let rp: Vec<f64> = r.matvec(p);
    let mut y = vec![0.0; npts * k];
    for l in 0..k {
        y[l] = p[l] * drivers.x0.max(0.0) + drivers.z0[l];
    }
    let mut drift = vec![0.0; k];
    let mut prev = vec![0.0; k];
    for i in 1..npts {
        prev.copy_from_slice(&y[(i - 1) * k..i * k]);
        let ey: f64 = prev.iter().sum();
        let eyp = ey.max(0.0);
        for l in 0..k {
            let mut ry = 0.0;
            for j in 0..k {
                ry += r.get(l, j) * prev[j];
            }
            drift[l] = -beta * mu * p[l] - ry + (rp[l] - alpha * p[l]) * eyp;
        }
        let de = drivers.e[i] - drivers.e[i - 1];
        for l in 0..k {
            let dphi0 = drivers.phi[0][i * k + l] - drivers.phi[0][(i - 1) * k + l];
            let dm = drivers.m[i * k + l] - drivers.m[(i - 1) * k + l];
            y[i * k + l] = prev[l] + drift[l] * dt + dphi0 + p[l] * de + dm;
        }
    }

    let mut x = Vec::with_capacity(npts);
    let mut z = vec![0.0; npts * k];
    for i in 0..npts {
        let ey: f64 = y[i * k..(i + 1) * k].iter().sum();
        x.push(ey);
        let eyp = ey.max(0.0);
        for l in 0..k {
            z[i * k + l] = y[i * k + l] - p[l] * eyp;
        }
    }
    let mut path = finish_limit_path(sc, dt, k, x, z);
    path.y = y;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::des::{ArrivalLaw, PatienceLaw};
    use crate::phase_type::{coxian_example, PhaseType};
    use crate::stats;

    fn coxian_critical(alpha: f64, beta: f64) -> Scenario {
        let ph = coxian_example();
        let mu = ph.rate();
        Scenario::new(
            ph,
            ArrivalLaw::Exponential,
            PatienceLaw::exponential(alpha).unwrap(),
            mu,
            beta,
            Regime::Critical,
        )
        .unwrap()
    }

    fn mm_critical(alpha: f64, beta: f64) -> Scenario {
        Scenario::new(
            PhaseType::exponential(1.0).unwrap(),
            ArrivalLaw::Exponential,
            PatienceLaw::exponential(alpha).unwrap(),
            1.0,
            beta,
            Regime::Critical,
        )
        .unwrap()
    }

    #[test]
    fn fluid_constants() {
        let sc = coxian_critical(1.0, 0.5);
        let f = fluid(&sc);
        assert_eq!(f.count_level, 0.0);
        assert_eq!(f.allocation_level, sc.ph.load_vector());
        assert_eq!(f.entry_rate, sc.mu());

        let over = Scenario::new(
            PhaseType::exponential(1.0).unwrap(),
            ArrivalLaw::Exponential,
            PatienceLaw::exponential(1.0).unwrap(),
            1.5,
            0.0,
            Regime::Overloaded,
        )
        .unwrap();
        assert!((fluid(&over).count_level - 0.5).abs() < 1e-15);

        let over2 = Scenario::new(
            PhaseType::exponential(1.0).unwrap(),
            ArrivalLaw::Exponential,
            PatienceLaw::exponential(0.5).unwrap(),
            2.0,
            0.0,
            Regime::Overloaded,
        )
        .unwrap();
        assert!((fluid(&over2).count_level - 2.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_arrivals_have_zero_arrival_noise() {
        let ph = coxian_example();
        let mu = ph.rate();
        let sc = Scenario::new(
            ph,
            ArrivalLaw::Deterministic,
            PatienceLaw::exponential(1.0).unwrap(),
            mu,
            0.0,
            Regime::Critical,
        )
        .unwrap();
        let d = sample_drivers(&sc, 0.01, 1.0, 5, 0).unwrap();
        assert!(d.e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_sum_constraint_on_v_holds_pathwise() {
        let sc = coxian_critical(1.0, 1.0);
        for seed in 0..5 {
            let d = sample_drivers(&sc, 0.01, 2.0, seed, 3).unwrap();
            let k = d.phases;
            for i in 0..d.num_points() {
                let s: f64 = d.v[i * k..(i + 1) * k].iter().sum();
                assert!(s.abs() < 1e-12, "e'V = {s} at point {i}");
            }
        }
    }

    #[test]
    fn single_phase_driver_variance_matches_halfin_whitt() {
        // K = 1: both selector covariances vanish, M̃ = −S̃(γ·), so Ũ(1) has
        // variance λ c_a² + μ.
        let sc = mm_critical(1.0, 0.0);
        let reps = 100_000u64;
        let mut us = Vec::with_capacity(reps as usize);
        for r in 0..reps {
            let d = sample_drivers(&sc, 0.25, 1.0, 42, r).unwrap();
            us.push(*d.u.last().unwrap());
        }
        let (mean, var) = stats::mean_var(&us);
        let expect = sc.lambda * sc.arrival_scv() + sc.mu();
        let se_var = expect * libm::sqrt(2.0 / reps as f64);
        assert!(mean.abs() < 3.0 * libm::sqrt(expect / reps as f64), "mean {mean}");
        assert!((var - expect).abs() < 3.0 * se_var, "var {var} vs {expect}");
    }

    #[test]
    fn composite_noise_covariance_matches_formula() {
        // Cov M̃(1) = Σ_k ν_k γ_k Hᵏ + (I−P′) diag(νγ) (I−P).
        let sc = coxian_critical(1.0, 0.0);
        let k = 2usize;
        let nu = sc.ph.rates();
        let gamma = sc.ph.load_vector();
        let routing = sc.ph.routing();
        let identity = SquareMat::identity(k);
        let ipt = identity.sub(&routing.transpose());
        let nug: Vec<f64> = (0..k).map(|j| nu[j] * gamma[j]).collect();
        let mut expect = ipt.matmul(&SquareMat::diag(&nug)).matmul(&identity.sub(routing));
        for j in 1..=k {
            let h = sc.ph.routing_cov(j).unwrap();
            expect = expect.add(&h.scale(nu[j - 1] * gamma[j - 1]));
        }

        let reps = 20_000usize;
        let mut samples: Vec<[f64; 2]> = Vec::with_capacity(reps);
        for r in 0..reps {
            let d = sample_drivers(&sc, 0.25, 1.0, 7, r as u64).unwrap();
            let last = d.num_points() - 1;
            samples.push([d.m[last * k], d.m[last * k + 1]]);
        }
        for i in 0..k {
            for j in 0..k {
                let prods: Vec<f64> = samples.iter().map(|s| s[i] * s[j]).collect();
                let (mean, var) = stats::mean_var(&prods);
                let se = libm::sqrt(var / reps as f64);
                assert!(
                    (mean - expect.get(i, j)).abs() < 3.0 * se,
                    "cov[{i}{j}] = {mean} vs {}",
                    expect.get(i, j)
                );
            }
        }
    }

    #[test]
    fn zero_drivers_stay_at_zero() {
        let sc = coxian_critical(1.0, 0.0);
        let d = DriverSet::zeros(2, 0.01, 2.0);
        let path = diffusion_path_from_drivers(&sc, &d).unwrap();
        assert_eq!(path.x.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(path.z.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
    }

    #[test]
    fn deterministic_drift_skeleton_matches_fine_grid() {
        // beta > 0 with all noise off: the limit follows the kinked ODE
        // x' = -mu beta - alpha x^+ - e'R z. Compare against a 10x finer grid.
        let sc = coxian_critical(0.7, 1.3);
        let mu = sc.mu();
        let dt = 1e-3;
        let horizon = 2.0;
        let make = |step: f64| {
            let mut d = DriverSet::zeros(2, step, horizon);
            for i in 0..d.num_points() {
                d.u[i] = -mu * sc.beta * (i as f64 * step);
            }
            diffusion_path_from_drivers(&sc, &d).unwrap()
        };
        let coarse = make(dt);
        let fine = make(dt / 10.0);
        let mut worst = 0.0f64;
        for i in 0..coarse.num_points() {
            worst = worst.max((coarse.x[i] - fine.x[i * 10]).abs());
        }
        assert!(worst <= 5.0 * dt, "coarse/fine gap {worst}");
        // The skeleton must be strictly dragged below zero by the drift.
        assert!(*coarse.x.last().unwrap() < 0.0);
    }

    #[test]
    fn matched_hazard_collapses_to_ornstein_uhlenbeck() {
        // K = 1 and alpha = mu: the two linear pieces of the drift coincide,
        // so X̃ is an exact OU process with relaxation mu and noise variance
        // lambda c_a^2 + mu; the t = 1 marginal is Gaussian with known
        // moments.
        let sc = mm_critical(1.0, 0.0);
        let mu = sc.mu();
        let sigma2 = sc.lambda * sc.arrival_scv() + mu;
        let reps = 10_000usize;
        let dt = 1e-3;
        let mut xs = Vec::with_capacity(reps);
        for r in 0..reps {
            let path = diffusion_path(&sc, dt, 1.0, 99, r as u64).unwrap();
            xs.push(*path.x.last().unwrap());
        }
        let (mean, var) = stats::mean_var(&xs);
        let expect_var = sigma2 * (1.0 - libm::exp(-2.0 * mu)) / (2.0 * mu);
        let se_mean = libm::sqrt(expect_var / reps as f64);
        let se_var = expect_var * libm::sqrt(2.0 / reps as f64);
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - expect_var).abs() < 3.0 * se_var, "var {var} vs {expect_var}");
    }

    #[test]
    fn sde_and_map_routes_agree_on_shared_drivers() {
        let sc = coxian_critical(1.0, 1.0);
        let dt = 1e-3;
        for seed in 0..5u64 {
            let d = sample_drivers(&sc, dt, 2.0, 1234, seed).unwrap();
            let via_map = diffusion_path_from_drivers(&sc, &d).unwrap();
            let via_sde = y_sde_path(&sc, &d).unwrap();
            let mut worst = 0.0f64;
            for i in 0..via_map.num_points() {
                worst = worst.max((via_map.x[i] - via_sde.x[i]).abs());
                for l in 0..2 {
                    worst = worst.max((via_map.z_at(i, l) - via_sde.z_at(i, l)).abs());
                }
            }
            assert!(worst <= 10.0 * dt, "routes differ by {worst}");
        }
    }

    #[test]
    fn sde_route_rejects_overloaded() {
        let sc = Scenario::new(
            PhaseType::exponential(1.0).unwrap(),
            ArrivalLaw::Exponential,
            PatienceLaw::exponential(1.0).unwrap(),
            1.5,
            0.0,
            Regime::Overloaded,
        )
        .unwrap();
        let d = DriverSet::zeros(1, 0.01, 1.0);
        assert!(matches!(y_sde_path(&sc, &d), Err(LimitError::WrongRegime)));
    }

    #[test]
    fn initial_customer_count_identity() {
        let sc = coxian_critical(1.0, 0.0);
        let d = sample_drivers(&sc, 0.01, 1.0, 5, 9).unwrap();
        let path = y_sde_path(&sc, &d).unwrap();
        let p = sc.ph.initial_law();
        for l in 0..2 {
            let expect = p[l] * d.x0.max(0.0) + d.z0[l];
            assert!((path.y_at(0, l) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn wait_limit_is_positive_part_scaled() {
        let sc = coxian_critical(1.0, 0.5);
        let path = diffusion_path(&sc, 0.005, 2.0, 3, 3).unwrap();
        let mu = sc.mu();
        for i in 0..path.num_points() {
            assert!(path.w[i] >= 0.0);
            if path.x[i] <= 0.0 {
                assert_eq!(path.w[i], 0.0);
            } else {
                assert!((path.w[i] - path.x[i] / mu).abs() < 1e-14);
            }
        }
        // Abandonment compensator is nondecreasing.
        for i in 1..path.num_points() {
            assert!(path.abandon[i] >= path.abandon[i - 1]);
        }
    }
}
