//! Generalized Hamilton–Jacobi residuals, the generalized quantization rule
//! and an explicit integrator for the universal wave-equation family
//! `A·∂Ψ/∂t + Σ h_mn·Ψ^m·∂ⁿΨ/∂xⁿ = 0`, where `A = −i·A₀` for wave-like
//! members and `A = A₀` otherwise.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::{QuantizationRule, SpaceTimeField};
use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, PhysicalConstants};
use crate::profiles::{Params, ProfileSpec};

/// Highest derivative order with an implemented stencil.
pub const MAX_STENCIL_ORDER: u32 = 4;

/// RK4 stability radius along the negative real axis (the imaginary-axis
/// radius `2√2` is larger).
pub const RK4_STABILITY_RADIUS: f64 = 2.78;

const NODE_TOL: f64 = 1e-12;

/// Real action `A(x_i, t_k)` on a space grid at equally spaced times.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionField {
    grid: Grid,
    t0: f64,
    dt: f64,
    frames: Vec<Vec<f64>>,
}

impl ActionField {
    pub fn new(grid: Grid, t0: f64, dt: f64, frames: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if frames.is_empty() {
            return Err(Error::Config("action field needs at least one time slice".into()));
        }
        for f in &frames {
            if f.len() != grid.len() {
                return Err(Error::Dimension { context: "action slice", expected: grid.len(), found: f.len() });
            }
            if f.iter().any(|a| !a.is_finite()) {
                return Err(Error::Config("action values must be finite".into()));
            }
        }
        Ok(Self { grid, t0, dt, frames })
    }

    pub fn from_fn(grid: Grid, t0: f64, dt: f64, slices: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let frames = (0..slices)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                grid.points().map(|x| f(x, t)).collect()
            })
            .collect();
        Self::new(grid, t0, dt, frames)
    }

    /// `A = ħ·arg Ψ`, unwrapped along x on the first slice and along t at
    /// every point thereafter.
    pub fn from_phase(field: &SpaceTimeField, hbar: f64) -> Result<Self> {
        let n = field.grid().len();
        let mut frames: Vec<Vec<f64>> = Vec::with_capacity(field.slices());
        for k in 0..field.slices() {
            let frame = field.frame(k);
            if let Some((index, z)) = frame.iter().enumerate().find(|(_, z)| !(z.norm() >= NODE_TOL)) {
                return Err(Error::NodeSingularity { index, magnitude: z.norm() });
            }
            let phases: Vec<f64> = frame.iter().map(|z| z.arg()).collect();
            let unwrapped = match frames.last() {
                None => {
                    let mut out = Vec::with_capacity(n);
                    out.push(phases[0]);
                    for i in 1..n {
                        out.push(out[i - 1] + wrap(phases[i] - phases[i - 1]));
                    }
                    out
                }
                Some(prev) => {
                    let prev_phase: Vec<f64> = prev.iter().map(|a| a / hbar).collect();
                    (0..n).map(|i| prev_phase[i] + wrap(phases[i] - prev_phase[i])).collect()
                }
            };
            frames.push(unwrapped.into_iter().map(|p| p * hbar).collect());
        }
        Self::new(field.grid().clone(), field.time(0), field.dt(), frames)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn slices(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.frames[k]
    }

    /// Central `ΔA/Δx` at interior point `i` of slice `k`.
    pub fn momentum(&self, i: usize, k: usize) -> f64 {
        (self.frames[k][i + 1] - self.frames[k][i - 1]) / (2.0 * self.grid.spacing())
    }

    /// Central `ΔA/Δt` at interior slice `k`.
    pub fn rate(&self, i: usize, k: usize) -> f64 {
        (self.frames[k + 1][i] - self.frames[k - 1][i]) / (2.0 * self.dt)
    }
}

/// Maps a phase difference into `(−π, π]`.
fn wrap(d: f64) -> f64 {
    use std::f64::consts::PI;
    let r = (d + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Residual values on a block of grid points starting at `(x_start, t_start)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub x_start: usize,
    pub t_start: usize,
    /// Indexed `[k − t_start][i − x_start]`.
    pub values: Vec<Vec<f64>>,
}

impl ResidualField {
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[k - self.t_start][i - self.x_start]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// `ΔA/Δt + H(x, ΔA/Δx, t)` at interior points with central differences.
pub fn hj_residual(h: impl Fn(f64, f64, f64) -> f64, action: &ActionField) -> Result<ResidualField> {
    let n = action.grid.len();
    let nt = action.slices();
    if n < 3 || nt < 3 {
        return Err(Error::Domain(format!("time-dependent residual needs ≥ 3 points and ≥ 3 slices, got {n}×{nt}")));
    }
    let values = (1..nt - 1)
        .map(|k| {
            let t = action.time(k);
            (1..n - 1).map(|i| action.rate(i, k) + h(action.grid.point(i), action.momentum(i, k), t)).collect()
        })
        .collect();
    Ok(ResidualField { x_start: 1, t_start: 1, values })
}

/// `H(x, ΔA/Δx) − E` at interior points of every slice.
pub fn hj_stationary_residual(h: impl Fn(f64, f64) -> f64, action: &ActionField, energy: f64) -> Result<ResidualField> {
    let n = action.grid.len();
    if n < 3 {
        return Err(Error::Domain(format!("stationary residual needs ≥ 3 points, got {n}")));
    }
    let values = (0..action.slices())
        .map(|k| (1..n - 1).map(|i| h(action.grid.point(i), action.momentum(i, k)) - energy).collect())
        .collect();
    Ok(ResidualField { x_start: 1, t_start: 0, values })
}

/// `ΔA + c·ΔΨ/Ψ` with `c = A₀` or `i·A₀`; zero when the increments obey
/// the quantization rule.
pub fn causal_quantize(delta_a: Complex64, psi: Complex64, delta_psi: Complex64, rule: &QuantizationRule) -> Result<Complex64> {
    let magnitude = psi.norm();
    if !(magnitude >= NODE_TOL) {
        return Err(Error::NodeSingularity { index: 0, magnitude });
    }
    Ok(delta_a + rule.coefficient() * delta_psi / psi)
}

/// A coefficient `h_mn(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Real(f64),
    /// `[re, im]`.
    Complex([f64; 2]),
    /// A named profile times a complex scale.
    Profile {
        profile: String,
        #[serde(default)]
        params: Params,
        #[serde(default = "unit_scale")]
        scale: [f64; 2],
    },
    /// One `[re, im]` value per grid point.
    Table { table: Vec<[f64; 2]> },
    /// Slices at `t = k·table_dt`, linear in t, held past the last slice.
    TableXt { table_xt: Vec<Vec<[f64; 2]>>, table_dt: f64 },
}

fn unit_scale() -> [f64; 2] {
    [1.0, 0.0]
}

impl CoefficientSpec {
    pub fn table(values: &[f64]) -> Self {
        CoefficientSpec::Table { table: values.iter().map(|&v| [v, 0.0]).collect() }
    }

    pub fn profile(spec: ProfileSpec) -> Self {
        CoefficientSpec::Profile { profile: spec.profile, params: spec.params, scale: unit_scale() }
    }

    fn resolve(&self, grid: &Grid) -> Result<Coefficient> {
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        let resolved = match self {
            CoefficientSpec::Real(v) => Coefficient::Uniform(Complex64::new(*v, 0.0)),
            CoefficientSpec::Complex(v) => Coefficient::Uniform(c(*v)),
            CoefficientSpec::Profile { profile, params, scale } => {
                let spec = ProfileSpec { profile: profile.clone(), params: params.clone() };
                let s = c(*scale);
                Coefficient::Field(spec.sample(grid)?.into_iter().map(|v| s * v).collect())
            }
            CoefficientSpec::Table { table } => {
                if table.len() != grid.len() {
                    return Err(Error::Dimension { context: "coefficient table", expected: grid.len(), found: table.len() });
                }
                Coefficient::Field(table.iter().map(|&v| c(v)).collect())
            }
            CoefficientSpec::TableXt { table_xt, table_dt } => {
                if table_xt.is_empty() || !(*table_dt > 0.0 && table_dt.is_finite()) {
                    return Err(Error::Config("tabulated coefficient needs ≥ 1 slice and table_dt > 0".into()));
                }
                let mut frames = Vec::with_capacity(table_xt.len());
                for f in table_xt {
                    if f.len() != grid.len() {
                        return Err(Error::Dimension { context: "coefficient slice", expected: grid.len(), found: f.len() });
                    }
                    frames.push(f.iter().map(|&v| c(v)).collect());
                }
                Coefficient::Frames { frames, dt: *table_dt }
            }
        };
        let ok = match &resolved {
            Coefficient::Uniform(z) => finite(z),
            Coefficient::Field(v) => v.iter().all(finite),
            Coefficient::Frames { frames, .. } => frames.iter().flatten().all(finite),
        };
        if !ok {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(resolved)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Coefficient {
    Uniform(Complex64),
    Field(Vec<Complex64>),
    Frames { frames: Vec<Vec<Complex64>>, dt: f64 },
}

impl Coefficient {
    fn at(&self, i: usize, t: f64) -> Complex64 {
        match self {
            Coefficient::Uniform(z) => *z,
            Coefficient::Field(v) => v[i],
            Coefficient::Frames { frames, dt } => {
                let pos = (t / dt).max(0.0);
                let k = pos.floor() as usize;
                if k + 1 >= frames.len() {
                    return frames[frames.len() - 1][i];
                }
                let w = pos - k as f64;
                frames[k][i] * (1.0 - w) + frames[k + 1][i] * w
            }
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            Coefficient::Uniform(z) => z.norm(),
            Coefficient::Field(v) => v.iter().fold(0.0, |m, z| m.max(z.norm())),
            Coefficient::Frames { frames, .. } => frames.iter().flatten().fold(0.0, |m, z| m.max(z.norm())),
        }
    }

    fn is_real(&self) -> bool {
        match self {
            Coefficient::Uniform(z) => z.im == 0.0,
            Coefficient::Field(v) => v.iter().all(|z| z.im == 0.0),
            Coefficient::Frames { frames, .. } => frames.iter().flatten().all(|z| z.im == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Power of Ψ.
    pub m: u32,
    /// Derivative order.
    pub n: u32,
    pub coeff: CoefficientSpec,
}

/// One member of the universal family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub terms: Vec<TermSpec>,
    pub a0: f64,
    #[serde(default)]
    pub wave_like: bool,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "default_max_order")]
    pub max_order: u32,
}

fn default_max_order() -> u32 {
    MAX_STENCIL_ORDER
}

impl HamiltonianSpec {
    pub fn new(terms: Vec<TermSpec>, a0: f64, wave_like: bool, boundary: Boundary) -> Self {
        Self { terms, a0, wave_like, boundary, max_order: MAX_STENCIL_ORDER }
    }

    /// `iħ·∂Ψ/∂t = −(ħ²/2m)·∂²Ψ/∂x² + V·Ψ`.
    pub fn schrodinger(constants: &PhysicalConstants, potential: CoefficientSpec, boundary: Boundary) -> Self {
        let hbar = constants.hbar();
        let kinetic = -hbar * hbar / (2.0 * constants.mass());
        Self::new(
            vec![
                TermSpec { m: 0, n: 2, coeff: CoefficientSpec::Real(kinetic) },
                TermSpec { m: 0, n: 0, coeff: potential },
            ],
            hbar,
            true,
            boundary,
        )
    }

    /// `∂u/∂t = D·∂²u/∂x²`.
    pub fn heat(diffusivity: f64, boundary: Boundary) -> Self {
        Self::new(vec![TermSpec { m: 0, n: 2, coeff: CoefficientSpec::Real(-diffusivity) }], 1.0, false, boundary)
    }

    /// `∂u/∂t = r·u·(1 − u/K)`.
    pub fn logistic(rate: f64, capacity: f64, boundary: Boundary) -> Self {
        Self::new(
            vec![
                TermSpec { m: 0, n: 0, coeff: CoefficientSpec::Real(-rate) },
                TermSpec { m: 1, n: 0, coeff: CoefficientSpec::Real(rate / capacity) },
            ],
            1.0,
            false,
            boundary,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Config("Hamiltonian expansion needs at least one term".into()));
        }
        if self.max_order > MAX_STENCIL_ORDER {
            return Err(Error::Config(format!("max_order {} exceeds the implemented stencils (≤ {MAX_STENCIL_ORDER})", self.max_order)));
        }
        if let Some(t) = self.terms.iter().find(|t| t.n > self.max_order) {
            return Err(Error::Config(format!("term derivative order {} exceeds max_order {}", t.n, self.max_order)));
        }
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(Error::Config(format!("quantum a0 must be positive, got {}", self.a0)));
        }
        Ok(())
    }

    /// Coefficient of `∂Ψ/∂t`.
    pub fn time_coefficient(&self) -> Complex64 {
        if self.wave_like {
            Complex64::new(0.0, -self.a0)
        } else {
            Complex64::new(self.a0, 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    m: u32,
    n: u32,
    coeff: Coefficient,
    max_coeff: f64,
}

/// Method-of-lines RK4 stepper for one family member.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalPde {
    grid: Grid,
    boundary: Boundary,
    terms: Vec<Term>,
    /// `−1/A`.
    inv_time: Complex64,
    real_coefficients: bool,
}

pub fn build_universal_pde(spec: &HamiltonianSpec, grid: &Grid) -> Result<UniversalPde> {
    spec.validate()?;
    if grid.len() < 3 {
        return Err(Error::Config(format!("universal stepper needs ≥ 3 grid points, got {}", grid.len())));
    }
    let mut terms = Vec::with_capacity(spec.terms.len());
    for t in &spec.terms {
        let coeff = t.coeff.resolve(grid)?;
        let max_coeff = coeff.max_abs();
        terms.push(Term { m: t.m, n: t.n, coeff, max_coeff });
    }
    let real_coefficients = !spec.wave_like && terms.iter().all(|t| t.coeff.is_real());
    Ok(UniversalPde { grid: grid.clone(), boundary: spec.boundary, terms, inv_time: -spec.time_coefficient().inv(), real_coefficients })
}

/// Largest modulus of the central-difference symbol of order `n`, times `sⁿ`.
fn symbol_bound(n: u32) -> f64 {
    match n {
        0 | 1 => 1.0,
        2 => 4.0,
        3 => 1.5 * 3f64.sqrt(),
        4 => 16.0,
        _ => unreachable!("orders above {MAX_STENCIL_ORDER} are rejected at build time"),
    }
}

impl UniversalPde {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Whether real initial data stays real.
    pub fn preserves_real(&self) -> bool {
        self.real_coefficients
    }

    fn sample(&self, psi: &[Complex64], i: isize) -> Complex64 {
        let n = psi.len() as isize;
        if (0..n).contains(&i) {
            psi[i as usize]
        } else {
            match self.boundary {
                Boundary::Periodic => psi[i.rem_euclid(n) as usize],
                Boundary::Dirichlet => Complex64::new(0.0, 0.0),
            }
        }
    }

    /// Central difference of order `order` at point `i`.
    pub fn derivative(&self, psi: &[Complex64], order: u32, i: usize) -> Complex64 {
        let f = |o: isize| self.sample(psi, i as isize + o);
        let s = self.grid.spacing();
        match order {
            0 => psi[i],
            1 => (f(1) - f(-1)) / (2.0 * s),
            2 => (f(1) - psi[i] * 2.0 + f(-1)) / (s * s),
            3 => (f(2) - f(1) * 2.0 + f(-1) * 2.0 - f(-2)) / (2.0 * s.powi(3)),
            4 => (f(2) - f(1) * 4.0 + psi[i] * 6.0 - f(-1) * 4.0 + f(-2)) / s.powi(4),
            _ => unreachable!("orders above {MAX_STENCIL_ORDER} are rejected at build time"),
        }
    }

    /// `∂Ψ/∂t = −(1/A)·Σ h_mn·Ψ^m·∂ⁿΨ`.
    pub fn rhs(&self, t: f64, psi: &[Complex64]) -> Vec<Complex64> {
        (0..psi.len())
            .map(|i| {
                let sum: Complex64 = self
                    .terms
                    .iter()
                    .map(|term| term.coeff.at(i, t) * psi[i].powu(term.m) * self.derivative(psi, term.n, i))
                    .sum();
                self.inv_time * sum
            })
            .collect()
    }

    /// Spectral-radius estimate of the linearized right-hand side at `psi`.
    pub fn stiffness(&self, psi: &[Complex64]) -> f64 {
        let amp = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let s = self.grid.spacing();
        let total: f64 = self
            .terms
            .iter()
            .map(|t| {
                let growth = if t.n == 0 { (t.m + 1) as f64 } else { 1.0 };
                t.max_coeff * amp.powi(t.m as i32) * growth * symbol_bound(t.n) / s.powi(t.n as i32)
            })
            .sum();
        total * self.inv_time.norm()
    }

    /// Largest `dt` within `budget` for the state `psi`.
    pub fn max_dt(&self, psi: &[Complex64], budget: f64) -> f64 {
        let lambda = self.stiffness(psi);
        if lambda > 0.0 {
            budget / lambda
        } else {
            f64::INFINITY
        }
    }

    pub fn check_step(&self, psi: &[Complex64], dt: f64, budget: f64) -> Result<()> {
        let max_dt = self.max_dt(psi, budget);
        if dt > max_dt {
            return Err(Error::Stability { dt, suggested: 0.9 * max_dt });
        }
        Ok(())
    }

    /// One classical RK4 step.
    pub fn step(&self, t: f64, dt: f64, psi: &[Complex64]) -> Vec<Complex64> {
        let axpy = |a: &[Complex64], b: &[Complex64], h: f64| -> Vec<Complex64> { a.iter().zip(b).map(|(x, y)| x + y * h).collect() };
        let k1 = self.rhs(t, psi);
        let k2 = self.rhs(t + 0.5 * dt, &axpy(psi, &k1, 0.5 * dt));
        let k3 = self.rhs(t + 0.5 * dt, &axpy(psi, &k2, 0.5 * dt));
        let k4 = self.rhs(t + dt, &axpy(psi, &k3, dt));
        (0..psi.len()).map(|i| psi[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0)).collect()
    }
}

/// Field, clock and step controls.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub psi: Vec<Complex64>,
    pub t: f64,
    pub dt: f64,
    /// Allowed `dt·λ_max`.
    pub budget: f64,
}

impl PdeState {
    pub fn new(psi: Vec<Complex64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Config("initial field must be finite".into()));
        }
        Ok(Self { psi, t: 0.0, dt, budget: RK4_STABILITY_RADIUS })
    }

    pub fn real(values: &[f64], dt: f64) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), dt)
    }

    pub fn with_budget(mut self, budget: f64) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::Config(format!("stability budget must be positive, got {budget}")));
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.re).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// `(Σ|Ψ|²·s)^½`.
    pub norm: f64,
    pub max_amplitude: f64,
}

fn diagnostics(step: usize, t: f64, psi: &[Complex64], spacing: f64) -> StepDiagnostics {
    StepDiagnostics {
        step,
        t,
        norm: (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * spacing).sqrt(),
        max_amplitude: psi.iter().fold(0.0, |m, z| m.max(z.norm())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeRun {
    pub state: PdeState,
    /// Entry 0 describes the initial state.
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Advances `n_steps`, checking the stability budget before each step.
pub fn step_pde(state: &PdeState, stepper: &UniversalPde, n_steps: usize) -> Result<PdeRun> {
    if state.psi.len() != stepper.grid.len() {
        return Err(Error::Dimension { context: "PDE state", expected: stepper.grid.len(), found: state.psi.len() });
    }
    let s = stepper.grid.spacing();
    let mut cur = state.clone();
    let mut diags = Vec::with_capacity(n_steps + 1);
    diags.push(diagnostics(0, cur.t, &cur.psi, s));
    for step in 1..=n_steps {
        stepper.check_step(&cur.psi, cur.dt, cur.budget)?;
        let next = stepper.step(cur.t, cur.dt, &cur.psi);
        if next.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::BlowUp { step });
        }
        cur.psi = next;
        cur.t = state.t + step as f64 * cur.dt;
        diags.push(diagnostics(step, cur.t, &cur.psi, s));
    }
    Ok(PdeRun { state: cur, diagnostics: diags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::assemble_schrodinger;
    use crate::action::gaussian_packet;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_particle_action_is_exact() {
        let (p0, m) = (1.3, 2.0);
        let grid = Grid::new(21, -1.0, 1.0).unwrap();
        let a = ActionField::from_fn(grid, 0.0, 0.01, 7, |x, t| p0 * x - p0 * p0 / (2.0 * m) * t).unwrap();
        let r = hj_residual(|_, p, _| p * p / (2.0 * m), &a).unwrap();
        assert!(r.max_abs() < 1e-12, "{}", r.max_abs());
        let stationary = ActionField::from_fn(a.grid().clone(), 0.0, 1.0, 1, |x, _| p0 * x).unwrap();
        let e = p0 * p0 / (2.0 * m);
        assert!(hj_stationary_residual(|_, p| p * p / (2.0 * m), &stationary, e).unwrap().max_abs() < 1e-12);
        let delta = 0.25;
        let shifted = hj_stationary_residual(|_, p| p * p / (2.0 * m), &stationary, e + delta).unwrap();
        for v in shifted.values.iter().flatten() {
            assert_abs_diff_eq!(*v, -delta, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_action_gives_hamiltonian() {
        let grid = Grid::new(11, 0.0, 1.0).unwrap();
        let a = ActionField::from_fn(grid, 0.0, 0.1, 5, |_, _| 3.0).unwrap();
        let h = |x: f64, p: f64, t: f64| p * p + x * x + t;
        let r = hj_residual(h, &a).unwrap();
        for k in 1..4 {
            for i in 1..10 {
                assert_abs_diff_eq!(r.at(i, k), h(a.grid().point(i), 0.0, a.time(k)), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn linear_potential_residual_is_second_order() {
        let (g, m) = (0.7, 1.5);
        let h = |x: f64, p: f64, _t: f64| p * p / (2.0 * m) + g * x;
        let err = |dt: f64| {
            let grid = Grid::new(41, -1.0, 1.0).unwrap();
            let a = ActionField::from_fn(grid, 0.5, dt, 5, |x, t| -g * x * t - g * g * t.powi(3) / (6.0 * m)).unwrap();
            let r = hj_residual(h, &a).unwrap();
            // The central t-difference of t³ overshoots by dt².
            for v in r.values.iter().flatten() {
                assert_abs_diff_eq!(*v, -g * g * dt * dt / (6.0 * m), epsilon = 1e-12);
            }
            r.max_abs()
        };
        let fine = err(1e-3);
        assert!(fine < 1e-6);
        let order = (err(2e-3) / fine).log2();
        assert!((order - 2.0).abs() < 0.01, "order {order}");
    }

    #[test]
    fn harmonic_turning_points() {
        let (m, k, e) = (1.0f64, 1.0f64, 0.5f64);
        let turning = (2.0 * e / k).sqrt();
        let grid = Grid::new(401, -2.0, 2.0).unwrap();
        let s = grid.spacing();
        let p = |x: f64| (2.0 * m * (e - 0.5 * k * x * x)).max(0.0).sqrt();
        let mut acc = vec![0.0];
        for i in 1..grid.len() {
            let xm = 0.5 * (grid.point(i - 1) + grid.point(i));
            acc.push(acc[i - 1] + p(xm) * s);
        }
        let a = ActionField::new(grid.clone(), 0.0, 1.0, vec![acc]).unwrap();
        let r = hj_stationary_residual(|x, p| p * p / (2.0 * m) + 0.5 * k * x * x, &a, e).unwrap();
        for i in 1..grid.len() - 1 {
            let x = grid.point(i);
            let v = r.at(i, 0);
            if x.abs() < 0.8 * turning {
                assert!(v.abs() < 1e-3, "x = {x}: {v}");
            } else if x.abs() > turning + 2.0 * s {
                assert!(v > 0.0 && (v - (0.5 * k * x * x - e)).abs() < 1e-12, "x = {x}: {v}");
            }
        }
    }

    #[test]
    fn causal_quantize_identities() {
        let rule = QuantizationRule::new(2.0, false).unwrap();
        let psi = c(0.3, -0.4);
        let dpsi = c(0.05, 0.02);
        let da = -rule.coefficient() * dpsi / psi;
        assert_abs_diff_eq!(causal_quantize(da, psi, dpsi, &rule).unwrap().norm(), 0.0, epsilon = 1e-15);
        assert_eq!(causal_quantize(c(-2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), &rule).unwrap(), c(0.0, 0.0));

        let dirac = QuantizationRule::dirac(&PhysicalConstants::new(1.1, 1.0, 1.0).unwrap());
        let da = dirac.action_increment(psi, dpsi).unwrap();
        assert_eq!(causal_quantize(da, psi, dpsi, &dirac).unwrap(), c(0.0, 0.0));
        assert!(matches!(causal_quantize(c(1.0, 0.0), c(1e-13, 0.0), c(1.0, 0.0), &rule), Err(Error::NodeSingularity { .. })));
    }

    #[test]
    fn spec_validation() {
        let grid = Grid::new(10, 0.0, 1.0).unwrap();
        let empty = HamiltonianSpec::new(vec![], 1.0, false, Boundary::Dirichlet);
        assert!(matches!(build_universal_pde(&empty, &grid), Err(Error::Config(_))));
        let deep = HamiltonianSpec::new(vec![TermSpec { m: 0, n: 5, coeff: CoefficientSpec::Real(1.0) }], 1.0, false, Boundary::Dirichlet);
        assert!(build_universal_pde(&deep, &grid).is_err());
        let nan = HamiltonianSpec::new(vec![TermSpec { m: 0, n: 1, coeff: CoefficientSpec::Real(f64::NAN) }], 1.0, false, Boundary::Dirichlet);
        assert!(build_universal_pde(&nan, &grid).is_err());
        let short = HamiltonianSpec::new(vec![TermSpec { m: 0, n: 1, coeff: CoefficientSpec::table(&[1.0; 3]) }], 1.0, false, Boundary::Dirichlet);
        assert!(matches!(build_universal_pde(&short, &grid), Err(Error::Dimension { .. })));
    }

    #[test]
    fn spec_json_forms() {
        let json = r#"{"terms": [
            {"m": 0, "n": 2, "coeff": -0.5},
            {"m": 0, "n": 0, "coeff": {"profile": "harmonic", "params": {"k": 2.0}}},
            {"m": 1, "n": 1, "coeff": [0.0, 1.0]},
            {"m": 0, "n": 0, "coeff": {"table_xt": [[[1,0],[1,0],[1,0]],[[3,0],[3,0],[3,0]]], "table_dt": 1.0}}
        ], "a0": 1.0, "wave_like": true, "boundary": "periodic"}"#;
        let spec: HamiltonianSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.max_order, 4);
        assert_eq!(spec.boundary, Boundary::Periodic);
        assert!(matches!(spec.terms[1].coeff, CoefficientSpec::Profile { .. }));
        let pde = build_universal_pde(&spec, &Grid::new(3, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(pde.terms[1].coeff.at(0, 0.0), c(1.0, 0.0));
        assert_eq!(pde.terms[3].coeff.at(1, 0.5), c(2.0, 0.0));
        assert_eq!(pde.terms[3].coeff.at(1, 7.0), c(3.0, 0.0));
    }

    #[test]
    fn stencils_are_exact_on_polynomials() {
        let grid = Grid::new(9, 0.0, 0.8).unwrap();
        let spec = HamiltonianSpec::heat(1.0, Boundary::Dirichlet);
        let pde = build_universal_pde(&spec, &grid).unwrap();
        let psi: Vec<Complex64> = grid.points().map(|x| c(x.powi(4), 0.0)).collect();
        let x = grid.point(4);
        assert_abs_diff_eq!(pde.derivative(&psi, 1, 4).re, 4.0 * x.powi(3), epsilon = 1e-10 + 4.0 * x * 0.01);
        assert_abs_diff_eq!(pde.derivative(&psi, 4, 4).re, 24.0, epsilon = 1e-6);
        assert_abs_diff_eq!(pde.derivative(&psi, 3, 4).re, 24.0 * x, epsilon = 1e-6 + 24.0 * x * 0.01);
    }

    #[test]
    fn heat_variance_grows_linearly() {
        let d = 0.8;
        let grid = Grid::new(201, -10.0, 10.0).unwrap();
        let pde = build_universal_pde(&HamiltonianSpec::heat(d, Boundary::Dirichlet), &grid).unwrap();
        let u0: Vec<f64> = grid.points().map(|x| (-x * x / 2.0).exp()).collect();
        let variance = |u: &[f64]| {
            let mass: f64 = u.iter().sum();
            grid.points().zip(u).map(|(x, v)| x * x * v).sum::<f64>() / mass
        };
        let dt = 0.005;
        let run = step_pde(&PdeState::real(&u0, dt).unwrap(), &pde, 200).unwrap();
        let growth = variance(&run.state.real_part()) - variance(&u0);
        let expected = 2.0 * d * run.state.t;
        assert!((growth / expected - 1.0).abs() < 0.01, "{growth} vs {expected}");
        assert!(run.state.psi.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn logistic_matches_closed_form() {
        let (r, k, u0) = (1.5, 2.0, 0.1);
        let grid = Grid::new(5, 0.0, 1.0).unwrap();
        let pde = build_universal_pde(&HamiltonianSpec::logistic(r, k, Boundary::Dirichlet), &grid).unwrap();
        let run = step_pde(&PdeState::real(&[u0; 5], 0.01).unwrap(), &pde, 300).unwrap();
        let t = run.state.t;
        let exact = k / (1.0 + (k / u0 - 1.0) * (-r * t).exp());
        for z in &run.state.psi {
            assert_abs_diff_eq!(z.re, exact, epsilon = 1e-6);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let n = 64;
        let grid = Grid::new(n, 0.0, 2.0 * PI * (1.0 - 1.0 / n as f64)).unwrap();
        let s = grid.spacing();
        let (d, k) = (1.0, 16.0);
        let pde = build_universal_pde(&HamiltonianSpec::heat(d, Boundary::Periodic), &grid).unwrap();
        let u0: Vec<f64> = grid.points().map(|x| (k * x).sin()).collect();
        // Exact decay rate of the semi-discrete mode.
        let rate = d * (2.0 - 2.0 * (k * s).cos()) / (s * s);
        let err = |dt: f64, steps: usize| {
            let run = step_pde(&PdeState::real(&u0, dt).unwrap(), &pde, steps).unwrap();
            let decay = (-rate * run.state.t).exp();
            run.state.psi.iter().zip(&u0).fold(0.0f64, |m, (z, u)| m.max((z.re - decay * u).abs()))
        };
        let order = (err(0.1 * s * s, 12) / err(0.05 * s * s, 24)).log2();
        assert!((order - 4.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn stability_budget_is_enforced() {
        let grid = Grid::new(101, 0.0, 1.0).unwrap();
        let pde = build_universal_pde(&HamiltonianSpec::heat(1.0, Boundary::Dirichlet), &grid).unwrap();
        let u0 = vec![1.0; 101];
        let s2 = grid.spacing().powi(2);
        let Err(Error::Stability { suggested, .. }) = step_pde(&PdeState::real(&u0, s2).unwrap(), &pde, 1) else {
            panic!("expected a stability error");
        };
        assert!(step_pde(&PdeState::real(&u0, suggested).unwrap(), &pde, 1).is_ok());
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = Grid::new(3, 0.0, 1.0).unwrap();
        // Ψ' = Ψ³ reaches infinity at t = 1/2 for Ψ(0) = 1.
        let spec = HamiltonianSpec::new(vec![TermSpec { m: 2, n: 0, coeff: CoefficientSpec::Real(-1.0) }], 1.0, false, Boundary::Dirichlet);
        let pde = build_universal_pde(&spec, &grid).unwrap();
        let state = PdeState::real(&[1.0; 3], 0.01).unwrap().with_budget(1e300).unwrap();
        assert!(matches!(step_pde(&state, &pde, 1000), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn zero_is_a_fixed_point_and_runs_are_deterministic() {
        let grid = Grid::new(50, -1.0, 1.0).unwrap();
        let spec = HamiltonianSpec::new(
            vec![
                TermSpec { m: 0, n: 4, coeff: CoefficientSpec::Real(1e-6) },
                TermSpec { m: 1, n: 1, coeff: CoefficientSpec::Complex([0.1, 0.2]) },
                TermSpec { m: 0, n: 0, coeff: CoefficientSpec::profile(ProfileSpec::new("gaussian", &[])) },
            ],
            1.0,
            true,
            Boundary::Periodic,
        );
        let pde = build_universal_pde(&spec, &grid).unwrap();
        let zero = step_pde(&PdeState::new(vec![c(0.0, 0.0); 50], 1e-3).unwrap(), &pde, 20).unwrap();
        assert!(zero.state.psi.iter().all(|z| *z == c(0.0, 0.0)));
        let init: Vec<Complex64> = grid.points().map(|x| c((-x * x * 4.0).exp(), 0.1 * x)).collect();
        let a = step_pde(&PdeState::new(init.clone(), 1e-3).unwrap(), &pde, 20).unwrap();
        let b = step_pde(&PdeState::new(init, 1e-3).unwrap(), &pde, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_member_matches_implicit_propagator() {
        let constants = PhysicalConstants::default();
        let grid = Grid::new(200, -10.0, 10.0).unwrap();
        let potential = ProfileSpec::new("harmonic", &[("k", 0.5)]);
        let system = assemble_schrodinger(grid.clone(), potential.sample(&grid).unwrap(), constants, Boundary::Dirichlet).unwrap();
        let spec = HamiltonianSpec::schrodinger(&constants, CoefficientSpec::profile(potential), Boundary::Dirichlet);
        let pde = build_universal_pde(&spec, &grid).unwrap();
        let psi0 = gaussian_packet(&grid, -1.0, 1.0, 1.0).unwrap().into_amplitudes();
        let dt = 1e-3;
        let implicit = system.propagator(dt).unwrap().evolve(&psi0, 100);
        let run = step_pde(&PdeState::new(psi0, dt).unwrap(), &pde, 100).unwrap();
        let dev = implicit.iter().zip(&run.state.psi).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(dev < 1e-6, "max deviation {dev}");
        let norms: Vec<f64> = run.diagnostics.iter().map(|d| d.norm).collect();
        assert!((norms[100] - norms[0]).abs() < 1e-6);
    }

    #[test]
    fn wkb_phase_satisfies_hamilton_jacobi() {
        let constants = PhysicalConstants::default();
        let k = 2.0;
        let residual = |n: usize| {
            let grid = Grid::new(n, 0.0, 2.0 * PI * (1.0 - 1.0 / n as f64)).unwrap();
            let s = grid.spacing();
            let spec = HamiltonianSpec::schrodinger(&constants, CoefficientSpec::Real(0.0), Boundary::Periodic);
            let pde = build_universal_pde(&spec, &grid).unwrap();
            let dt = 0.25 * s * s;
            let mut state = PdeState::new(grid.points().map(|x| Complex64::from_polar(1.0, k * x)).collect(), dt).unwrap();
            let mut frames = vec![state.psi.clone()];
            for _ in 0..4 {
                state = step_pde(&state, &pde, 1).unwrap().state;
                frames.push(state.psi.clone());
            }
            let field = SpaceTimeField::new(grid, 0.0, dt, frames).unwrap();
            let action = ActionField::from_phase(&field, constants.hbar()).unwrap();
            hj_residual(|_, p, _| p * p / 2.0, &action).unwrap().max_abs()
        };
        let coarse = residual(32);
        let fine = residual(64);
        let order = (coarse / fine).log2();
        assert!(order >= 1.0, "order {order} ({coarse} → {fine})");
    }

    #[test]
    fn phase_unwrapping_tracks_large_phases() {
        let grid = Grid::new(50, 0.0, 10.0).unwrap();
        let field = SpaceTimeField::from_fn(grid, 0.0, 0.1, 30, |x, t| Complex64::from_polar(1.0, 2.0 * x - 3.0 * t)).unwrap();
        let a = ActionField::from_phase(&field, 1.0).unwrap();
        for k in 0..30 {
            for (i, x) in a.grid().points().enumerate() {
                assert_abs_diff_eq!(a.frame(k)[i], 2.0 * x - 3.0 * a.time(k), epsilon = 1e-9);
            }
        }
    }
}
