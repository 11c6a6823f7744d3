//! Subcommand bodies. Each returns its files in memory so callers decide
//! where (and whether) to write them.

use std::collections::BTreeMap;
use std::sync::Arc;

use epdyn_core::action::{assemble_schrodinger, conservation_report, gaussian_packet, ConservationReport, DEFAULT_ACCURACY_BUDGET};
use epdyn_core::dynamics::{empirical_frequencies, kinematic_observables, simulate_hops, HopConfig};
use epdyn_core::effective::{enumerate_roots, make_partition, EpOperator, RootScan, ScanConfig, DEFAULT_POLE_GUARD};
use epdyn_core::existence::{full_spectrum, full_spectrum_with_cap, oracle_cap, ExistenceProblem, Hamiltonian1D, WaveField};
use epdyn_core::grid::{Boundary, Grid, PhysicalConstants};
use epdyn_core::realisation::{cluster_realisations, RealisationEnsemble};
use epdyn_core::registry::Registry;
use epdyn_core::universal::{build_universal_pde, step_pde, CoefficientSpec, HamiltonianSpec, PdeState, StepDiagnostics, RK4_STABILITY_RADIUS};
use epdyn_core::Error;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{EvolveConfig, InitialConfig, LoadedConfig};
use crate::output::{json_string, num, Csv};
use crate::{exit, CliError};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the hop seed.
    pub seed: Option<u64>,
}

/// Files to write (name, contents), console summary and exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
    pub code: i32,
}

impl CommandOutput {
    fn ok(files: Vec<(String, String)>, summary: Vec<String>) -> Self {
        Self { files, summary, code: exit::OK }
    }
}

type CmdResult = Result<CommandOutput, CliError>;

pub fn spectrum(cfg: &LoadedConfig, _opts: &RunOptions) -> CmdResult {
    let problem = cfg.problem()?;
    let spec = full_spectrum(&problem)?;
    let mut csv = Csv::new("index,eigenvalue");
    for (i, e) in spec.eigenvalues().iter().enumerate() {
        csv.row(&[i.to_string(), num(*e)]);
    }
    let summary = vec![format!("{} eigenvalues of a dimension-{} operator", spec.len(), problem.dimension())];
    Ok(CommandOutput::ok(vec![(cfg.config.outputs.spectrum.clone(), csv.as_str().to_string())], summary))
}

struct SolvedRoots {
    scan: RootScan,
    ensemble: Option<RealisationEnsemble>,
    norm: f64,
    scan_config: ScanConfig,
}

fn solve_roots(cfg: &LoadedConfig, problem: &ExistenceProblem) -> Result<SolvedRoots, CliError> {
    let ep_cfg = &cfg.config.ep;
    let partition = make_partition(problem, &ep_cfg.partition.selector())?;
    let ep = EpOperator::with_pole_guard(partition, ep_cfg.pole_guard.unwrap_or(DEFAULT_POLE_GUARD));
    let scan_config = ep_cfg.scan.apply(ScanConfig::covering(problem));
    let scan = enumerate_roots(&ep, &scan_config)?;
    let ensemble = if scan.roots.is_empty() {
        None
    } else {
        Some(cluster_realisations(&scan.roots, problem.grid_q(), ep_cfg.cluster_width)?)
    };
    Ok(SolvedRoots { scan, ensemble, norm: ep.norm(), scan_config })
}

pub fn ep_roots(cfg: &LoadedConfig, _opts: &RunOptions) -> CmdResult {
    let problem = cfg.problem()?;
    let solved = solve_roots(cfg, &problem)?;
    let scan = &solved.scan;

    let mut cluster_of = BTreeMap::new();
    if let Some(ens) = &solved.ensemble {
        for (r, real) in ens.realisations().iter().enumerate() {
            for &b in &real.members {
                cluster_of.insert(b, r);
            }
        }
    }
    let mut csv = Csv::new("branch_id,E,residual,centroid,cluster_id,N_r,alpha_num,alpha_den");
    for root in &scan.roots {
        let r = cluster_of[&root.branch_id];
        let ens = solved.ensemble.as_ref().expect("roots imply an ensemble");
        let (num_r, den) = ens.alpha(r);
        csv.row(&[
            root.branch_id.to_string(),
            num(root.energy),
            num(root.residual),
            num(root.centroid),
            r.to_string(),
            ens.realisations()[r].n_r().to_string(),
            num_r.to_string(),
            den.to_string(),
        ]);
    }
    if !scan.decoupled.is_empty() {
        csv.line("");
        csv.line("# decoupled poles");
        csv.line("pole_id,E,residual");
        let full = problem.full_operator();
        for (k, pole) in scan.decoupled.iter().enumerate() {
            let amps = pole.state.amplitudes();
            let r: Vec<Complex64> = full.apply(amps).iter().zip(amps).map(|(a, b)| a - b * pole.energy).collect();
            let res = epdyn_core::operator::norm2(&r) / epdyn_core::operator::norm2(amps);
            csv.row(&[k.to_string(), num(pole.energy), num(res)]);
        }
    }

    let c = scan.completeness;
    let mut summary = vec![format!(
        "{} roots + {} decoupled poles in [{}, {}]; inertia count expects {} roots, found {}",
        scan.roots.len(),
        scan.decoupled.len(),
        solved.scan_config.e_min,
        solved.scan_config.e_max,
        c.expected,
        c.found
    )];
    let mut complete = c.is_complete();
    let cap = oracle_cap();
    if problem.dimension() <= cap {
        let oracle = full_spectrum_with_cap(&problem, cap)?;
        let (lo, hi) = (solved.scan_config.e_min, solved.scan_config.e_max);
        let in_range = oracle.eigenvalues().iter().filter(|&&e| e >= lo && e <= hi).count();
        let accounted = scan.roots.len() + scan.decoupled.len();
        let mut deviation = 0.0f64;
        if accounted == in_range {
            let mut mine: Vec<f64> = scan.roots.iter().map(|r| r.energy).chain(scan.decoupled.iter().map(|d| d.energy)).collect();
            mine.sort_by(f64::total_cmp);
            let theirs: Vec<f64> = oracle.eigenvalues().into_iter().filter(|&e| e >= lo && e <= hi).collect();
            deviation = mine.iter().zip(&theirs).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        }
        summary.push(format!(
            "oracle: {in_range} eigenvalues in range, {accounted} accounted for, max |ΔE|/‖H‖ = {:.3e}",
            deviation / solved.norm
        ));
        complete &= accounted == in_range;
    } else {
        summary.push(format!("oracle skipped: dimension {} exceeds cap {cap}", problem.dimension()));
    }
    if let Some(ens) = &solved.ensemble {
        let parts: Vec<String> = (0..ens.len()).map(|r| format!("{}/{}", ens.alpha(r).0, ens.alpha(r).1)).collect();
        summary.push(format!("{} realisations, alpha = [{}]", ens.len(), parts.join(", ")));
    }
    let code = if complete {
        exit::OK
    } else {
        summary.push("WARNING: root enumeration incomplete".into());
        exit::INCOMPLETE
    };
    Ok(CommandOutput { files: vec![(cfg.config.outputs.roots.clone(), csv.as_str().to_string())], summary, code })
}

/// The hop section's realisations, synthetic or solved from the system.
pub fn hop_ensemble(cfg: &LoadedConfig) -> Result<RealisationEnsemble, CliError> {
    let hop = cfg.config.hop.as_ref().ok_or_else(|| Error::Config("config has no `hop` section".into()))?;
    match &hop.realisations {
        Some(list) => {
            let grid = hop.grid.ok_or_else(|| Error::Config("hop.realisations needs hop.grid".into()))?.build()?;
            let specs: Vec<(u64, f64, f64)> = list.iter().map(|r| (r.n_r, r.centroid, r.spread)).collect();
            Ok(RealisationEnsemble::synthetic(grid, &specs)?)
        }
        None => {
            let problem = cfg.problem()?;
            let solved = solve_roots(cfg, &problem)?;
            solved.ensemble.ok_or_else(|| Error::Config("the system has no roots to hop between".into()).into())
        }
    }
}

#[derive(Serialize)]
struct HopStats {
    regime: String,
    seed: u64,
    trajectory_id: u64,
    steps: u64,
    alpha: Vec<f64>,
    alpha_num: Vec<u64>,
    alpha_den: u64,
    counts: Vec<u64>,
    frequencies: Vec<f64>,
    /// Three-sigma binomial half-widths.
    bound_3sigma: Vec<f64>,
    within_3sigma: Vec<bool>,
    v: f64,
    v_sigma: f64,
    lambda: f64,
    #[serde(rename = "E")]
    energy: f64,
    p: Option<f64>,
    #[serde(rename = "lambda_B")]
    lambda_b: Option<f64>,
    frozen_at: Option<u64>,
    unlocalizable: bool,
}

pub fn hop(cfg: &LoadedConfig, opts: &RunOptions) -> CmdResult {
    let section = cfg.config.hop.as_ref().ok_or_else(|| Error::Config("config has no `hop` section".into()))?;
    let constants = cfg.constants()?;
    let ensemble = hop_ensemble(cfg)?;
    let config = HopConfig {
        regime: section.regime.clone(),
        steps: section.steps,
        seed: opts.seed.unwrap_or(section.seed),
        tau: section.tau,
        localization_threshold: section.localization_threshold,
        trajectory_id: section.trajectory_id,
    };
    let traj = simulate_hops(&ensemble, &config)?;

    let mut csv = Csv::new("step,realisation,centroid");
    for e in &traj.entries {
        csv.row(&[e.step.to_string(), e.realisation.to_string(), num(e.centroid)]);
    }
    let stats = empirical_frequencies(&traj, &ensemble);
    let kin = kinematic_observables(&stats, &constants, traj.tau);
    let n = stats.steps as f64;
    let alpha = ensemble.alphas();
    let bound: Vec<f64> = alpha.iter().map(|a| 3.0 * (a * (1.0 - a) / n).sqrt()).collect();
    let within: Vec<bool> = (0..alpha.len()).map(|r| (stats.frequencies[r] - alpha[r]).abs() <= bound[r]).collect();
    let out = HopStats {
        regime: traj.regime.clone(),
        seed: traj.seed,
        trajectory_id: traj.trajectory_id,
        steps: stats.steps,
        alpha_num: (0..ensemble.len()).map(|r| ensemble.alpha(r).0).collect(),
        alpha_den: ensemble.total(),
        alpha: alpha.clone(),
        counts: stats.counts.clone(),
        frequencies: stats.frequencies.clone(),
        bound_3sigma: bound.clone(),
        within_3sigma: within.clone(),
        v: kin.velocity,
        v_sigma: stats.drift_sigma,
        lambda: kin.lambda,
        energy: kin.energy,
        p: kin.momentum,
        lambda_b: kin.de_broglie,
        frozen_at: traj.frozen_at,
        unlocalizable: traj.unlocalizable,
    };

    let mut summary = vec![format!("{} regime, {} steps, seed {}, stream {}", traj.regime, stats.steps, traj.seed, traj.trajectory_id)];
    for r in 0..alpha.len() {
        summary.push(format!(
            "  realisation {r}: alpha = {:.6}, frequency = {:.6}, 3σ bound = {:.6} ({})",
            alpha[r],
            stats.frequencies[r],
            bound[r],
            if within[r] { "within" } else { "outside" }
        ));
    }
    if let Some(k) = traj.frozen_at {
        summary.push(format!("frozen at step {k} in realisation {}", traj.entries[k as usize - 1].realisation));
    } else if traj.unlocalizable {
        summary.push("no realisation is localized below the threshold; the trajectory keeps hopping".into());
    }
    let files = vec![(cfg.config.outputs.trajectory.clone(), csv.as_str().to_string()), (cfg.config.outputs.stats.clone(), json_string(&out))];
    Ok(CommandOutput::ok(files, summary))
}

/// Everything a scheme needs to propagate a field.
#[derive(Debug, Clone)]
pub struct EvolveSetup {
    pub grid: Grid,
    pub boundary: Boundary,
    pub potential: Vec<f64>,
    pub constants: PhysicalConstants,
    pub spec: Option<HamiltonianSpec>,
    pub initial: Vec<Complex64>,
    pub dt: f64,
    pub steps: usize,
    pub frame_every: usize,
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveRun {
    /// `(t, Ψ)` at step 0, every `frame_every` steps and the final step.
    pub frames: Vec<(f64, Vec<Complex64>)>,
    pub conservation: Option<[ConservationReport; 2]>,
    pub diagnostics: Option<StepDiagnostics>,
}

impl EvolveRun {
    pub fn last(&self) -> &[Complex64] {
        &self.frames.last().expect("step 0 is always recorded").1
    }
}

/// A time integrator selectable by name.
pub trait EvolutionScheme: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, setup: &EvolveSetup) -> Result<EvolveRun, Error>;
}

fn frame_steps(setup: &EvolveSetup) -> Vec<usize> {
    let every = setup.frame_every.max(1);
    let mut out: Vec<usize> = (0..=setup.steps).step_by(every).collect();
    if *out.last().expect("0 is present") != setup.steps {
        out.push(setup.steps);
    }
    out
}

/// Implicit-midpoint propagator of the linear wave equation.
pub struct LinearScheme;

impl LinearScheme {
    fn conservation(psi: &[Complex64], h: &Hamiltonian1D) -> Option<ConservationReport> {
        let field = WaveField::new(psi.to_vec(), h.grid().spacing()).normalized().ok()?;
        conservation_report(&field, h).ok()
    }
}

impl EvolutionScheme for LinearScheme {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn run(&self, setup: &EvolveSetup) -> Result<EvolveRun, Error> {
        let system = assemble_schrodinger(setup.grid.clone(), setup.potential.clone(), setup.constants, setup.boundary)?;
        let prop = system.propagator_with_budget(setup.dt, setup.budget.unwrap_or(DEFAULT_ACCURACY_BUDGET))?;
        let marks = frame_steps(setup);
        let mut frames = vec![(0.0, setup.initial.clone())];
        let mut psi = setup.initial.clone();
        let mut done = 0;
        for &m in &marks[1..] {
            psi = prop.evolve(&psi, m - done);
            done = m;
            frames.push((m as f64 * setup.dt, psi.clone()));
        }
        let h = system.hamiltonian();
        let conservation = match (Self::conservation(&setup.initial, h), Self::conservation(&psi, h)) {
            (Some(a), Some(b)) => Some([a, b]),
            _ => None,
        };
        Ok(EvolveRun { frames, conservation, diagnostics: None })
    }
}

/// Explicit RK4 integration of a universal-family member.
pub struct UniversalScheme;

impl EvolutionScheme for UniversalScheme {
    fn name(&self) -> &'static str {
        "universal"
    }

    fn run(&self, setup: &EvolveSetup) -> Result<EvolveRun, Error> {
        let spec = setup.spec.as_ref().ok_or_else(|| Error::Config("the universal scheme needs evolve.spec".into()))?;
        let pde = build_universal_pde(spec, &setup.grid)?;
        let mut state = PdeState::new(setup.initial.clone(), setup.dt)?.with_budget(setup.budget.unwrap_or(RK4_STABILITY_RADIUS))?;
        let marks = frame_steps(setup);
        let mut frames = vec![(0.0, setup.initial.clone())];
        let mut last = None;
        let mut done = 0;
        for &m in &marks[1..] {
            let run = step_pde(&state, &pde, m - done).map_err(|e| match e {
                Error::BlowUp { step } => Error::BlowUp { step: step + done },
                other => other,
            })?;
            done = m;
            last = run.diagnostics.last().copied().map(|d| StepDiagnostics { step: done, ..d });
            state = run.state;
            frames.push((state.t, state.psi.clone()));
        }
        Ok(EvolveRun { frames, conservation: None, diagnostics: last })
    }
}

pub fn schemes() -> Registry<dyn EvolutionScheme> {
    let mut reg: Registry<dyn EvolutionScheme> = Registry::new("evolution scheme");
    reg.register("linear", Arc::new(LinearScheme));
    reg.register("universal", Arc::new(UniversalScheme));
    reg
}

fn initial_state(init: &InitialConfig, grid: &Grid, potential: &[f64], constants: &PhysicalConstants, boundary: Boundary) -> Result<Vec<Complex64>, Error> {
    let n = grid.len();
    let real = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    Ok(match init {
        InitialConfig::Gaussian { x0, sigma, k0 } => {
            if sigma.is_nan() || *sigma <= 0.0 {
                return Err(Error::Config(format!("gaussian sigma must be positive, got {sigma}")));
            }
            gaussian_packet(grid, *x0, *sigma, *k0)?.into_amplitudes()
        }
        InitialConfig::Eigenstate { index } => {
            let h = Hamiltonian1D::new(grid.clone(), potential.to_vec(), *constants, boundary)?;
            let spec = h.spectrum()?;
            let pair = spec
                .pairs()
                .get(*index)
                .ok_or_else(|| Error::Config(format!("eigenstate index {index} out of range ({} states)", spec.len())))?;
            pair.state.amplitudes().to_vec()
        }
        InitialConfig::Values { re, im } => {
            if re.len() != n {
                return Err(Error::Dimension { context: "initial re", expected: n, found: re.len() });
            }
            let im = match im {
                Some(v) if v.len() != n => return Err(Error::Dimension { context: "initial im", expected: n, found: v.len() }),
                Some(v) => v.clone(),
                None => vec![0.0; n],
            };
            re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect()
        }
        InitialConfig::Profile(p) => real(p.sample(grid)?),
        InitialConfig::Uniform { value } => real(vec![*value; n]),
        InitialConfig::Zero => vec![Complex64::new(0.0, 0.0); n],
    })
}

pub fn evolve_setup(cfg: &LoadedConfig, ev: &EvolveConfig) -> Result<EvolveSetup, CliError> {
    let constants = cfg.constants()?;
    let from_system = match &cfg.config.system {
        Some(s) => s.single_particle(&cfg.base_dir)?,
        None => None,
    };
    let grid = match (&ev.grid, &from_system) {
        (Some(g), _) => g.build()?,
        (None, Some((g, _, _))) => g.clone(),
        (None, None) => return Err(Error::Config("evolve needs evolve.grid or a schrodinger system".into()).into()),
    };
    let boundary = ev.boundary.or(from_system.as_ref().map(|s| s.2)).or(ev.spec.as_ref().map(|s| s.boundary)).unwrap_or_default();
    let potential = match (&ev.potential, &from_system) {
        (Some(p), _) => p.sample(&grid, &cfg.base_dir)?,
        (None, Some((g, v, _))) if g == &grid => v.clone(),
        _ => vec![0.0; grid.len()],
    };
    if !(ev.dt > 0.0 && ev.dt.is_finite()) {
        return Err(Error::Config(format!("evolve.dt must be positive, got {}", ev.dt)).into());
    }
    let initial = initial_state(&ev.initial, &grid, &potential, &constants, boundary)?;
    Ok(EvolveSetup {
        grid,
        boundary,
        potential,
        constants,
        spec: ev.spec.clone(),
        initial,
        dt: ev.dt,
        steps: ev.steps,
        frame_every: ev.frame_every.unwrap_or(ev.steps.max(1)),
        budget: ev.budget,
    })
}

#[derive(Serialize)]
struct Moments {
    mass: f64,
    mean: f64,
    variance: f64,
}

/// Moments of `Ψ` itself for real fields, of `|Ψ|²` otherwise.
fn moments(grid: &Grid, psi: &[Complex64], real: bool) -> Moments {
    let s = grid.spacing();
    let w: Vec<f64> = psi.iter().map(|z| if real { z.re } else { z.norm_sqr() }).collect();
    let mass: f64 = w.iter().sum::<f64>() * s;
    if mass == 0.0 {
        return Moments { mass, mean: 0.0, variance: 0.0 };
    }
    let mean = grid.points().zip(&w).map(|(x, v)| x * v).sum::<f64>() * s / mass;
    let variance = grid.points().zip(&w).map(|(x, v)| (x - mean).powi(2) * v).sum::<f64>() * s / mass;
    Moments { mass, mean, variance }
}

#[derive(Serialize)]
struct CrossCheck {
    against: &'static str,
    max_deviation: f64,
}

#[derive(Serialize)]
struct EvolveReport {
    scheme: String,
    dt: f64,
    steps: usize,
    t_final: f64,
    norm_initial: f64,
    norm_final: f64,
    moments_initial: Moments,
    moments_final: Moments,
    conservation_initial: Option<ConservationReport>,
    conservation_final: Option<ConservationReport>,
    diagnostics: Option<StepDiagnostics>,
    cross_check: Option<CrossCheck>,
}

pub fn evolve(cfg: &LoadedConfig, _opts: &RunOptions) -> CmdResult {
    let ev = cfg.config.evolve.as_ref().ok_or_else(|| Error::Config("config has no `evolve` section".into()))?;
    let setup = evolve_setup(cfg, ev)?;
    let scheme = schemes().get(&ev.scheme)?;
    let run = scheme.run(&setup)?;

    let mut csv = Csv::new("t,x,re,im,abs2");
    for (t, psi) in &run.frames {
        for (x, z) in setup.grid.points().zip(psi) {
            csv.row(&[num(*t), num(x), num(z.re), num(z.im), num(z.norm_sqr())]);
        }
    }

    let cross_check = if ev.cross_check {
        let linear_member = HamiltonianSpec::schrodinger(&setup.constants, CoefficientSpec::table(&setup.potential), setup.boundary);
        let (other, against) = if scheme.name() == "linear" {
            (UniversalScheme.run(&EvolveSetup { spec: Some(linear_member), budget: None, ..setup.clone() })?, "universal")
        } else {
            (LinearScheme.run(&EvolveSetup { budget: None, ..setup.clone() })?, "linear")
        };
        let dev = run.last().iter().zip(other.last()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        Some(CrossCheck { against, max_deviation: dev })
    } else {
        None
    };

    let real = scheme.name() == "universal" && setup.spec.as_ref().is_some_and(|s| !s.wave_like);
    let norm = |psi: &[Complex64]| (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * setup.grid.spacing()).sqrt();
    let report = EvolveReport {
        scheme: scheme.name().to_string(),
        dt: setup.dt,
        steps: setup.steps,
        t_final: run.frames.last().map(|f| f.0).unwrap_or(0.0),
        norm_initial: norm(&setup.initial),
        norm_final: norm(run.last()),
        moments_initial: moments(&setup.grid, &setup.initial, real),
        moments_final: moments(&setup.grid, run.last(), real),
        conservation_initial: run.conservation.map(|c| c[0]),
        conservation_final: run.conservation.map(|c| c[1]),
        diagnostics: run.diagnostics,
        cross_check,
    };
    let mut summary = vec![format!(
        "{} scheme: {} steps of {} to t = {}, {} frames",
        report.scheme,
        report.steps,
        report.dt,
        report.t_final,
        run.frames.len()
    )];
    summary.push(format!("norm {:.12} → {:.12}", report.norm_initial, report.norm_final));
    summary.push(format!("variance {:.9} → {:.9}", report.moments_initial.variance, report.moments_final.variance));
    if let Some(c) = &report.conservation_final {
        summary.push(format!("energy K + V = {:.12} (K = {:.12}, V = {:.12})", c.total, c.kinetic, c.potential));
    }
    if let Some(c) = &report.cross_check {
        summary.push(format!("max deviation from the {} integrator: {:.3e}", c.against, c.max_deviation));
    }
    let files = vec![(cfg.config.outputs.frames.clone(), csv.as_str().to_string()), (cfg.config.outputs.report.clone(), json_string(&report))];
    Ok(CommandOutput::ok(files, summary))
}
