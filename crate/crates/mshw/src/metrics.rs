//! Per-replication convergence metrics extracted from simulated paths.
//!
//! Each metric is the pathwise quantity whose median over replications the
//! experiment checks track across system sizes.

use mshw_core::des::SimPath;

/// State-space-collapse gap: `sup_t max_k |Q_k(t) − p_k (X(t))⁺| / √n`.
///
/// Identically zero when the first-phase law is degenerate (in particular
/// for single-phase service).
pub fn collapse(path: &SimPath, initial_law: &[f64]) -> f64 {
    let k = path.phases;
    let mut worst = 0.0f64;
    for i in 0..path.num_points() {
        let xp = path.x[i].max(0) as f64;
        for kk in 0..k {
            worst = worst.max((path.q_at(i, kk) as f64 - initial_law[kk] * xp).abs());
        }
    }
    worst / (path.n as f64).sqrt()
}

/// Abandonment-integral residual: `sup_t |A(t) − α ∫ (X(s))⁺ ds| / √n`.
pub fn abandonment_residual(path: &SimPath, alpha: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..path.num_points() {
        worst = worst.max((path.abandonments[i] as f64 - alpha * path.int_queue[i]).abs());
    }
    worst / (path.n as f64).sqrt()
}

/// Queued-eventual-abandoner peak: `sup_t AQ(t) / √n`.
pub fn queued_abandoners(path: &SimPath) -> f64 {
    let peak = path.queued_abandoners.iter().copied().max().unwrap_or(0);
    peak as f64 / (path.n as f64).sqrt()
}

/// Scaled idle-server peak on `[window_start, horizon]`:
/// `sup_t (X(t))⁻ / √n`.
pub fn idle(path: &SimPath, window_start: f64) -> f64 {
    let start = path.index_at(window_start);
    let mut worst = 0i64;
    for i in start..path.num_points() {
        worst = worst.max((-path.x[i]).max(0));
    }
    worst as f64 / (path.n as f64).sqrt()
}

/// Largest fluid-scale deviation `sup_t |X(t)/n − q|` on
/// `[window_start, horizon]`.
pub fn fluid_deviation(path: &SimPath, q: f64, window_start: f64) -> f64 {
    let start = path.index_at(window_start);
    let mut worst = 0.0f64;
    for i in start..path.num_points() {
        worst = worst.max((path.x[i] as f64 / path.n as f64 - q).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use mshw_core::des::{
        self, ArrivalLaw, InitialCondition, PatienceLaw, Regime, RunConfig, Scenario,
    };
    use mshw_core::phase_type::PhaseType;

    fn path(regime: Regime, lambda: f64) -> (Scenario, SimPath) {
        let sc = Scenario::new(
            PhaseType::exponential(1.0).unwrap(),
            ArrivalLaw::Exponential,
            PatienceLaw::exponential(1.0).unwrap(),
            lambda,
            0.5,
            regime,
        )
        .unwrap();
        let mut cfg = RunConfig::new(16, 4.0, 0.1, 5);
        cfg.initial = InitialCondition::StationaryPhaseMix;
        let p = des::run(&sc, &cfg).unwrap();
        (sc, p)
    }

    #[test]
    fn single_phase_collapse_is_exactly_zero() {
        let (sc, p) = path(Regime::Critical, 1.0);
        assert_eq!(collapse(&p, sc.ph.initial_law()), 0.0);
    }

    #[test]
    fn metrics_are_finite_and_window_monotone() {
        let (sc, p) = path(Regime::Overloaded, 1.3);
        assert!(abandonment_residual(&p, sc.alpha()).is_finite());
        assert!(queued_abandoners(&p).is_finite());
        let idle_full = idle(&p, 0.0);
        let idle_tail = idle(&p, 2.0);
        assert!(idle_tail <= idle_full, "window restriction can only shrink the sup");
        // Fluid deviation of the all-time window dominates the tail window.
        assert!(fluid_deviation(&p, sc.q(), 2.0) <= fluid_deviation(&p, sc.q(), 0.0));
    }
}
