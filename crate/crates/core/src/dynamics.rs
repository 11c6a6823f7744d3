//! Stochastic realisation hopping and the kinematics read off from it.
//!
//! Each cycle of period `τ` draws one realisation with probability
//! `α_r = N_r / N_ℜ`. Draws are exact integer draws in `[0, N_ℜ)`, so the
//! sampled law is the rational `α` with no floating-point rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::PhysicalConstants;
use crate::realisation::RealisationEnsemble;
use crate::registry::Registry;

/// Deterministic generator for trajectory `stream` of master `seed`.
///
/// ChaCha is counter based, so streams are independent and can be generated
/// in any order or in parallel with identical results.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a realisation index with probability `α_r`.
pub fn hop_step<R: Rng + ?Sized>(ensemble: &RealisationEnsemble, rng: &mut R) -> usize {
    let mut x = rng.random_range(0..ensemble.total());
    for (r, real) in ensemble.realisations().iter().enumerate() {
        if x < real.n_r() {
            return r;
        }
        x -= real.n_r();
    }
    unreachable!("draw below N_total always lands in a realisation")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopConfig {
    /// Registered regime name, `chaos` or `measurement` by default.
    pub regime: String,
    pub steps: u64,
    pub seed: u64,
    /// Cycle period τ.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// RMS spread below which a realisation counts as localized.
    #[serde(default)]
    pub localization_threshold: Option<f64>,
    /// Stream id within the master seed.
    #[serde(default)]
    pub trajectory_id: u64,
}

fn default_tau() -> f64 {
    1.0
}

impl HopConfig {
    pub fn chaos(steps: u64, seed: u64) -> Self {
        Self { regime: "chaos".into(), steps, seed, tau: 1.0, localization_threshold: None, trajectory_id: 0 }
    }

    pub fn measurement(steps: u64, seed: u64, threshold: f64) -> Self {
        Self { regime: "measurement".into(), localization_threshold: Some(threshold), ..Self::chaos(steps, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Config("hop steps must be ≥ 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("cycle period must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// How a hopping process treats the drawn realisation.
pub trait HopRegime: Send + Sync {
    fn name(&self) -> &'static str;

    fn validate(&self, config: &HopConfig) -> Result<()>;

    /// Whether drawing `r` irreversibly captures the system.
    fn absorbs(&self, ensemble: &RealisationEnsemble, r: usize, config: &HopConfig) -> bool;

    /// Whether any realisation could ever absorb.
    fn can_absorb(&self, ensemble: &RealisationEnsemble, config: &HopConfig) -> bool {
        (0..ensemble.len()).any(|r| self.absorbs(ensemble, r, config))
    }

    /// Whether visit frequencies estimate `α` in this regime.
    fn samples_alpha(&self) -> bool;
}

/// Perpetual memoryless hopping among all realisations.
#[derive(Debug, Default, Clone, Copy)]
pub struct ChaosRegime;

impl HopRegime for ChaosRegime {
    fn name(&self) -> &'static str {
        "chaos"
    }

    fn validate(&self, _config: &HopConfig) -> Result<()> {
        Ok(())
    }

    fn absorbs(&self, _: &RealisationEnsemble, _: usize, _: &HopConfig) -> bool {
        false
    }

    fn samples_alpha(&self) -> bool {
        true
    }
}

/// Hopping that freezes on the first localized realisation drawn.
#[derive(Debug, Default, Clone, Copy)]
pub struct MeasurementRegime;

impl HopRegime for MeasurementRegime {
    fn name(&self) -> &'static str {
        "measurement"
    }

    fn validate(&self, config: &HopConfig) -> Result<()> {
        match config.localization_threshold {
            Some(t) if t > 0.0 => Ok(()),
            other => Err(Error::Config(format!("measurement regime needs a positive localization threshold, got {other:?}"))),
        }
    }

    fn absorbs(&self, ensemble: &RealisationEnsemble, r: usize, config: &HopConfig) -> bool {
        config.localization_threshold.is_some_and(|t| ensemble.realisations()[r].spread < t)
    }

    fn samples_alpha(&self) -> bool {
        false
    }
}

pub fn regimes() -> Registry<dyn HopRegime> {
    let mut reg: Registry<dyn HopRegime> = Registry::new("hop regime");
    reg.register(ChaosRegime.name(), Arc::new(ChaosRegime));
    reg.register(MeasurementRegime.name(), Arc::new(MeasurementRegime));
    reg
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopEntry {
    /// 1-based cycle number.
    pub step: u64,
    pub realisation: usize,
    pub centroid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopTrajectory {
    pub entries: Vec<HopEntry>,
    /// Cycle on which the system was captured (measurement regime).
    pub frozen_at: Option<u64>,
    pub regime: String,
    pub samples_alpha: bool,
    /// Set when the regime could capture but no realisation is localized.
    pub unlocalizable: bool,
    pub seed: u64,
    pub trajectory_id: u64,
    pub tau: f64,
}

pub fn simulate_hops(ensemble: &RealisationEnsemble, config: &HopConfig) -> Result<HopTrajectory> {
    let regime = regimes().get(&config.regime)?;
    simulate_with(regime.as_ref(), ensemble, config)
}

pub fn simulate_with(regime: &dyn HopRegime, ensemble: &RealisationEnsemble, config: &HopConfig) -> Result<HopTrajectory> {
    config.validate()?;
    regime.validate(config)?;
    let mut rng = stream_rng(config.seed, config.trajectory_id);
    let centroids: Vec<f64> = ensemble.realisations().iter().map(|r| r.centroid).collect();
    let mut entries = Vec::with_capacity(config.steps as usize);
    let mut frozen: Option<usize> = None;
    let mut frozen_at = None;
    for step in 1..=config.steps {
        let r = match frozen {
            Some(r) => r,
            None => {
                let r = hop_step(ensemble, &mut rng);
                if regime.absorbs(ensemble, r, config) {
                    frozen = Some(r);
                    frozen_at = Some(step);
                }
                r
            }
        };
        entries.push(HopEntry { step, realisation: r, centroid: centroids[r] });
    }
    let unlocalizable = !regime.samples_alpha() && !regime.can_absorb(ensemble, config);
    Ok(HopTrajectory {
        entries,
        frozen_at,
        regime: regime.name().to_string(),
        samples_alpha: regime.samples_alpha(),
        unlocalizable,
        seed: config.seed,
        trajectory_id: config.trajectory_id,
        tau: config.tau,
    })
}

/// Runs `count` trajectories on streams `0..count`, in parallel, returned in
/// stream order.
pub fn simulate_batch(ensemble: &RealisationEnsemble, config: &HopConfig, count: u64) -> Result<Vec<HopTrajectory>> {
    let regime = regimes().get(&config.regime)?;
    (0..count)
        .into_par_iter()
        .map(|id| {
            let cfg = HopConfig { trajectory_id: id, ..config.clone() };
            simulate_with(regime.as_ref(), ensemble, &cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStats {
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    /// `⟨Δcentroid⟩ / τ` over consecutive cycles.
    pub drift_velocity: f64,
    /// Standard error of the per-cycle displacement mean, over τ.
    pub drift_sigma: f64,
    /// Mean `|Δcentroid|` over cycles that changed realisation (0 if none).
    pub mean_jump: f64,
    pub jumps: u64,
    pub steps: u64,
    /// Frequencies of a non-α-sampling (e.g. frozen) trajectory were requested.
    pub regime_mismatch: bool,
}

pub fn empirical_frequencies(trajectory: &HopTrajectory, ensemble: &RealisationEnsemble) -> EmpiricalStats {
    let mut counts = vec![0u64; ensemble.len()];
    for e in &trajectory.entries {
        counts[e.realisation] += 1;
    }
    let steps = trajectory.entries.len() as u64;
    let frequencies = counts.iter().map(|&c| c as f64 / steps as f64).collect();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut jump_sum = 0.0;
    let mut jumps = 0u64;
    for w in trajectory.entries.windows(2) {
        let d = w[1].centroid - w[0].centroid;
        sum += d;
        sum_sq += d * d;
        if w[1].realisation != w[0].realisation {
            jump_sum += d.abs();
            jumps += 1;
        }
    }
    let n = steps.saturating_sub(1) as f64;
    let (drift_velocity, drift_sigma) = if n > 0.0 {
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        (mean / trajectory.tau, (var / n).sqrt() / trajectory.tau)
    } else {
        (0.0, 0.0)
    };
    EmpiricalStats {
        counts,
        frequencies,
        drift_velocity,
        drift_sigma,
        mean_jump: if jumps > 0 { jump_sum / jumps as f64 } else { 0.0 },
        jumps,
        steps,
        regime_mismatch: !trajectory.samples_alpha,
    }
}

/// Density averaged over the visited realisations of a trajectory.
pub fn time_averaged_density(trajectory: &HopTrajectory, ensemble: &RealisationEnsemble) -> Vec<f64> {
    let stats = empirical_frequencies(trajectory, ensemble);
    let mut out = vec![0.0; ensemble.grid().len()];
    for (r, f) in stats.frequencies.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(ensemble.normalized_density(r)) {
            *o += f * d;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kinematics {
    /// `h / τ`.
    pub energy: f64,
    /// `h / λ`; `None` when no jump occurred.
    pub momentum: Option<f64>,
    pub velocity: f64,
    /// Jump length λ.
    pub lambda: f64,
    /// `h / (m v)`; `None` for zero drift.
    pub de_broglie: Option<f64>,
    /// `p·λ_B / (h·λ_B/λ)`, identically 1 when both are defined.
    pub consistency: Option<f64>,
}

pub fn kinematic_observables(stats: &EmpiricalStats, constants: &PhysicalConstants, tau: f64) -> Kinematics {
    let h = constants.h();
    let lambda = stats.mean_jump;
    let velocity = stats.drift_velocity;
    let momentum = (lambda > 0.0).then(|| h / lambda);
    let de_broglie = (velocity != 0.0).then(|| h / (constants.mass() * velocity));
    let consistency = match (momentum, de_broglie) {
        (Some(p), Some(lb)) => Some(p * lb / (h * (lb / lambda))),
        _ => None,
    };
    Kinematics { energy: h / tau, momentum, velocity, lambda, de_broglie, consistency }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyPartition {
    /// `m₀c²√(1−v²/c²)`
    pub rest_term: f64,
    /// `m₀v²/√(1−v²/c²)`
    pub motion_term: f64,
    pub lhs: f64,
    /// `m₀c²/√(1−v²/c²)`
    pub rhs: f64,
    pub residual: f64,
    /// Rest-state beat frequency `m₀c²/h`.
    pub rest_frequency: f64,
}

/// Splits the total energy of a moving field-particle into its irregular
/// rest part and its regular motion part and checks they sum to `γ m₀c²`.
pub fn energy_partition_check(m0: f64, v: f64, c: f64, h: f64) -> Result<EnergyPartition> {
    if !(c > 0.0 && m0 > 0.0 && h > 0.0) {
        return Err(Error::Domain("m0, c and h must be positive".into()));
    }
    if !(0.0..c).contains(&v) {
        return Err(Error::Domain(format!("velocity must satisfy 0 ≤ v < c, got v = {v}, c = {c}")));
    }
    let root = (1.0 - (v / c).powi(2)).sqrt();
    let rest_term = m0 * c * c * root;
    let motion_term = m0 * v * v / root;
    let lhs = rest_term + motion_term;
    let rhs = m0 * c * c / root;
    Ok(EnergyPartition { rest_term, motion_term, lhs, rhs, residual: (lhs - rhs).abs(), rest_frequency: m0 * c * c / h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        Grid::new(201, -5.0, 5.0).unwrap()
    }

    fn ensemble(specs: &[(u64, f64, f64)]) -> RealisationEnsemble {
        RealisationEnsemble::synthetic(grid(), specs).unwrap()
    }

    #[test]
    fn degenerate_distribution() {
        let ens = ensemble(&[(1, 0.0, 0.5)]);
        let mut rng = stream_rng(1, 0);
        assert!((0..1000).all(|_| hop_step(&ens, &mut rng) == 0));
        let t = simulate_hops(&ens, &HopConfig::chaos(50, 3)).unwrap();
        assert!(t.entries.iter().all(|e| e.realisation == 0));
    }

    #[test]
    fn half_half_frequency() {
        let ens = ensemble(&[(1, -1.0, 0.5), (1, 1.0, 0.5)]);
        let mut rng = stream_rng(2024, 0);
        let n = 100_000;
        let zeros = (0..n).filter(|_| hop_step(&ens, &mut rng) == 0).count();
        let bound = 3.0 * (0.25f64 / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - 0.5).abs() <= bound);
    }

    #[test]
    fn three_to_one_ratio() {
        let ens = ensemble(&[(3, -1.0, 0.5), (1, 1.0, 0.5)]);
        let t = simulate_hops(&ens, &HopConfig::chaos(100_000, 9)).unwrap();
        let s = empirical_frequencies(&t, &ens);
        let sigma = (0.75f64 * 0.25 / 1e5).sqrt();
        assert!((s.frequencies[0] - 0.75).abs() <= 3.0 * sigma);
        assert_eq!(s.counts.iter().sum::<u64>(), 100_000);
        // Ratio f0/f1 = 3 to first order, with matching propagated bound.
        let ratio = s.frequencies[0] / s.frequencies[1];
        assert!((ratio - 3.0).abs() <= 3.0 * sigma * (1.0 / 0.25 + 0.75 / 0.0625));
    }

    #[test]
    fn single_step_is_unit_vector() {
        let ens = ensemble(&[(1, -1.0, 0.5), (2, 1.0, 0.5)]);
        let t = simulate_hops(&ens, &HopConfig::chaos(1, 5)).unwrap();
        let s = empirical_frequencies(&t, &ens);
        assert_eq!(s.frequencies.iter().filter(|&&f| f == 1.0).count(), 1);
        assert_eq!(s.frequencies.iter().filter(|&&f| f == 0.0).count(), 1);
    }

    #[test]
    fn determinism() {
        let ens = ensemble(&[(1, -1.0, 0.5), (2, 1.0, 0.5), (1, 3.0, 0.2)]);
        let cfg = HopConfig::chaos(10_000, 77);
        assert_eq!(simulate_hops(&ens, &cfg).unwrap(), simulate_hops(&ens, &cfg).unwrap());
        let batch_a = simulate_batch(&ens, &cfg, 8).unwrap();
        let batch_b = simulate_batch(&ens, &cfg, 8).unwrap();
        assert_eq!(batch_a, batch_b);
        assert_ne!(batch_a[0].entries, batch_a[1].entries);
    }

    #[test]
    fn measurement_freezes_on_localized() {
        // Only realisation 1 (spread 0.1) is below the 0.3 threshold.
        let ens = ensemble(&[(1, -1.0, 1.0), (1, 1.0, 0.1)]);
        let t = simulate_hops(&ens, &HopConfig::measurement(200, 4, 0.3)).unwrap();
        let f = t.frozen_at.expect("freezes with overwhelming probability") as usize;
        assert!(t.entries[f - 1..].iter().all(|e| e.realisation == 1));
        assert!(t.entries[..f - 1].iter().all(|e| e.realisation == 0));
        assert!(empirical_frequencies(&t, &ens).regime_mismatch);
    }

    #[test]
    fn measurement_without_localized_realisation() {
        let ens = ensemble(&[(1, -1.0, 1.0), (1, 1.0, 1.0)]);
        let t = simulate_hops(&ens, &HopConfig::measurement(100, 4, 0.3)).unwrap();
        assert!(t.frozen_at.is_none());
        assert!(t.unlocalizable);
        let bad = HopConfig { localization_threshold: None, ..HopConfig::measurement(10, 1, 1.0) };
        assert!(simulate_hops(&ens, &bad).is_err());
    }

    #[test]
    fn geometric_freeze_step() {
        let ens = ensemble(&[(1, -1.0, 1.0), (1, 1.0, 0.1)]);
        let trajs = simulate_batch(&ens, &HopConfig::measurement(200, 12, 0.3), 10_000).unwrap();
        let n = trajs.len() as f64;
        let mean = trajs.iter().map(|t| t.frozen_at.unwrap() as f64).sum::<f64>() / n;
        // Geometric law with α = ½: mean 2, variance (1−α)/α² = 2.
        let sigma = (2.0f64 / n).sqrt();
        assert!((mean - 2.0).abs() <= 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn unknown_regime_rejected() {
        let ens = ensemble(&[(1, 0.0, 1.0)]);
        let cfg = HopConfig { regime: "levy".into(), ..HopConfig::chaos(10, 1) };
        assert!(matches!(simulate_hops(&ens, &cfg), Err(Error::Config(_))));
        assert!(simulate_hops(&ens, &HopConfig::chaos(0, 1)).is_err());
    }

    #[test]
    fn kinematics_arithmetic() {
        let stats = EmpiricalStats {
            counts: vec![1],
            frequencies: vec![1.0],
            drift_velocity: 0.5,
            drift_sigma: 0.0,
            mean_jump: 0.25,
            jumps: 1,
            steps: 2,
            regime_mismatch: false,
        };
        let k = kinematic_observables(&stats, &PhysicalConstants::default(), 1.0);
        assert_abs_diff_eq!(k.energy, 2.0 * std::f64::consts::PI, epsilon = 1e-15);
        let unit_h = PhysicalConstants::from_h(1.0, 1.0, 1.0).unwrap();
        let k = kinematic_observables(&stats, &unit_h, 1.0);
        assert_abs_diff_eq!(k.de_broglie.unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k.momentum.unwrap(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k.consistency.unwrap(), 1.0, epsilon = 1e-14);
        let still = EmpiricalStats { drift_velocity: 0.0, ..stats };
        assert!(kinematic_observables(&still, &unit_h, 1.0).de_broglie.is_none());
    }

    #[test]
    fn symmetric_ensemble_has_no_drift() {
        let ens = ensemble(&[(1, -2.0, 0.5), (1, 2.0, 0.5)]);
        let t = simulate_hops(&ens, &HopConfig::chaos(100_000, 31)).unwrap();
        let s = empirical_frequencies(&t, &ens);
        assert!(s.drift_velocity.abs() <= 3.0 * s.drift_sigma);
        // Tails cut at the grid edge pull each centroid in by ~1e-9.
        assert_abs_diff_eq!(s.mean_jump, 4.0, epsilon = 1e-7);
    }

    #[test]
    fn energy_partition_values() {
        let p = energy_partition_check(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!((p.rest_term, p.motion_term, p.lhs, p.rhs, p.residual), (1.0, 0.0, 1.0, 1.0, 0.0));
        let p = energy_partition_check(1.0, 0.6, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.rest_term, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(p.motion_term, 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(p.lhs, 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.rhs, 1.25, epsilon = 1e-15);
        assert!(p.residual < 1e-12);
        let p = energy_partition_check(1.0, 0.999, 1.0, 1.0).unwrap();
        assert!(p.residual / p.rhs < 1e-9);
        assert!(matches!(energy_partition_check(1.0, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(energy_partition_check(1.0, -0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn time_average_tracks_expectation() {
        let ens = ensemble(&[(3, -2.0, 0.5), (1, 2.0, 0.5)]);
        let t = simulate_hops(&ens, &HopConfig::chaos(100_000, 8)).unwrap();
        let avg = time_averaged_density(&t, &ens);
        let expect = crate::realisation::assemble_density(&ens);
        let l1: f64 = avg.iter().zip(&expect).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid().spacing();
        // Each realisation contributes |f_r − α_r| (unit mass) to the L1 gap.
        let bound: f64 = ens.alphas().iter().map(|a| 3.0 * (a * (1.0 - a) / 1e5).sqrt()).sum();
        assert!(l1 <= bound, "{l1} > {bound}");
    }
}
