//! Discrete-action calculus and the linear wave equation assembled from it.
//!
//! One quantum-beat cycle lowers the action by one quantum while the wave
//! action `A·Ψ` is unchanged, giving `ΔA = −c·ΔΨ/Ψ` with `c = A₀` (or `i·A₀`
//! for wave-like levels). Dividing by `Δx` and `Δt` gives the momentum and
//! energy rules used here with discrete stencils.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::existence::{expectation_energy, spectrum_of, oracle_cap, Hamiltonian1D, Spectrum, WaveField};
use crate::grid::{Boundary, Grid, PhysicalConstants};

/// Magnitude below which a field value counts as a node.
pub const NODE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ActionLedger {
    initial: f64,
    quantum: f64,
    cycles: u64,
    history: Vec<f64>,
}

impl ActionLedger {
    pub fn new(initial: f64, quantum: f64) -> Result<Self> {
        if !(quantum > 0.0 && quantum.is_finite()) || !initial.is_finite() {
            return Err(Error::Config(format!("ledger needs finite A and quantum > 0, got ({initial}, {quantum})")));
        }
        Ok(Self { initial, quantum, cycles: 0, history: Vec::new() })
    }

    /// `A = A_initial − cycles·quantum`.
    pub fn value(&self) -> f64 {
        self.initial - self.cycles as f64 * self.quantum
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn advance(&self, cycles: u64) -> Result<Self> {
        if cycles < 1 {
            return Err(Error::Config("ledger must advance by at least one cycle".into()));
        }
        let mut next = self.clone();
        next.cycles += cycles;
        next.history.extend(std::iter::repeat_n(-self.quantum, cycles as usize));
        Ok(next)
    }
}

pub fn ledger_advance(ledger: &ActionLedger, cycles: u64) -> Result<ActionLedger> {
    ledger.advance(cycles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizationRule {
    pub quantum: f64,
    /// Multiply the quantum by the imaginary unit.
    pub wave_like: bool,
}

impl QuantizationRule {
    pub fn new(quantum: f64, wave_like: bool) -> Result<Self> {
        if !(quantum > 0.0 && quantum.is_finite()) {
            return Err(Error::Config(format!("action quantum must be positive, got {quantum}")));
        }
        Ok(Self { quantum, wave_like })
    }

    /// `ΔA = −iħ·ΔΨ/Ψ`.
    pub fn dirac(constants: &PhysicalConstants) -> Self {
        Self { quantum: constants.hbar(), wave_like: true }
    }

    /// `A₀` or `i·A₀`.
    pub fn coefficient(&self) -> Complex64 {
        if self.wave_like {
            Complex64::new(0.0, self.quantum)
        } else {
            Complex64::new(self.quantum, 0.0)
        }
    }

    /// Action change `−c·ΔΨ/Ψ` implied by a field change.
    pub fn action_increment(&self, psi: Complex64, delta_psi: Complex64) -> Result<Complex64> {
        check_node(psi, 0)?;
        Ok(-self.coefficient() * delta_psi / psi)
    }
}

fn check_node(psi: Complex64, index: usize) -> Result<()> {
    let magnitude = psi.norm();
    if !(magnitude >= NODE_TOL) {
        return Err(Error::NodeSingularity { index, magnitude });
    }
    Ok(())
}

/// `A_Ψ = A·Ψ` pointwise.
pub fn wave_action(a: f64, psi: &[Complex64]) -> Vec<Complex64> {
    psi.iter().map(|z| z * a).collect()
}

/// Change of the wave action over one cycle, `A·ΔΨ + Ψ·ΔA`.
pub fn cycle_balance(a: Complex64, delta_a: Complex64, psi: Complex64, delta_psi: Complex64) -> Complex64 {
    a * delta_psi + psi * delta_a
}

/// Complex field sampled on a space grid at equally spaced times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid,
    t0: f64,
    dt: f64,
    frames: Vec<Vec<Complex64>>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid, t0: f64, dt: f64, frames: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if frames.is_empty() {
            return Err(Error::Config("field needs at least one time slice".into()));
        }
        for f in &frames {
            if f.len() != grid.len() {
                return Err(Error::Dimension { context: "time slice", expected: grid.len(), found: f.len() });
            }
            if f.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::Config("field values must be finite".into()));
            }
        }
        Ok(Self { grid, t0, dt, frames })
    }

    pub fn from_fn(grid: Grid, t0: f64, dt: f64, slices: usize, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let frames = (0..slices)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                grid.points().map(|x| f(x, t)).collect()
            })
            .collect();
        Self::new(grid, t0, dt, frames)
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

    pub fn frame(&self, k: usize) -> &[Complex64] {
        &self.frames[k]
    }

    pub fn value(&self, x_index: usize, t_index: usize) -> Complex64 {
        self.frames[t_index][x_index]
    }
}

/// First and second discrete derivative at one sample.
fn derivatives(values: &[Complex64], i: usize, step: f64, one_sided: bool, axis: &str) -> Result<(Complex64, Complex64)> {
    let n = values.len();
    let f = |k: usize| values[k];
    if i > 0 && i + 1 < n {
        let d1 = (f(i + 1) - f(i - 1)) / (2.0 * step);
        let d2 = (f(i + 1) - f(i) * 2.0 + f(i - 1)) / (step * step);
        return Ok((d1, d2));
    }
    if !one_sided {
        return Err(Error::Domain(format!("{axis} index {i} is on the boundary; enable one-sided stencils")));
    }
    if n < 4 {
        return Err(Error::Domain(format!("one-sided stencils need 4 samples along {axis}, got {n}")));
    }
    // Second-order one-sided stencils; the backward form mirrors the forward one.
    let (a, b, c, d, sign) = if i == 0 { (f(0), f(1), f(2), f(3), 1.0) } else { (f(n - 1), f(n - 2), f(n - 3), f(n - 4), -1.0) };
    let d1 = (a * -3.0 + b * 4.0 - c) / (2.0 * step) * sign;
    let d2 = (a * 2.0 - b * 5.0 + c * 4.0 - d) / (step * step);
    Ok((d1, d2))
}

/// A quantized observable and its squared (second-derivative) form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedPair {
    pub value: Complex64,
    pub squared: Complex64,
}

/// `p = −c·(∂Ψ/∂x)/Ψ` and `p² = c²·(∂²Ψ/∂x²)/Ψ` with `c` from `rule`.
pub fn discrete_momentum(
    field: &SpaceTimeField,
    rule: &QuantizationRule,
    x_index: usize,
    t_index: usize,
    one_sided: bool,
) -> Result<QuantizedPair> {
    let psi = field.value(x_index, t_index);
    check_node(psi, x_index)?;
    let (d1, d2) = derivatives(field.frame(t_index), x_index, field.grid.spacing(), one_sided, "x")?;
    let c = rule.coefficient();
    Ok(QuantizedPair { value: -c * d1 / psi, squared: c * c * d2 / psi })
}

/// `E = c·(∂Ψ/∂t)/Ψ` and `E² = c²·(∂²Ψ/∂t²)/Ψ` with `c` from `rule`.
pub fn discrete_energy(
    field: &SpaceTimeField,
    rule: &QuantizationRule,
    x_index: usize,
    t_index: usize,
    one_sided: bool,
) -> Result<QuantizedPair> {
    let psi = field.value(x_index, t_index);
    check_node(psi, x_index)?;
    let column: Vec<Complex64> = field.frames.iter().map(|f| f[x_index]).collect();
    let (d1, d2) = derivatives(&column, t_index, field.dt, one_sided, "t")?;
    let c = rule.coefficient();
    Ok(QuantizedPair { value: c * d1 / psi, squared: c * c * d2 / psi })
}

/// Default bound on `dt·‖H‖/ħ` for the implicit-midpoint propagator.
pub const DEFAULT_ACCURACY_BUDGET: f64 = std::f64::consts::PI;

/// The linear wave equation on a grid: stationary spectrum and propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerSystem {
    hamiltonian: Hamiltonian1D,
}

pub fn assemble_schrodinger(
    grid: Grid,
    potential: Vec<f64>,
    constants: PhysicalConstants,
    boundary: Boundary,
) -> Result<SchrodingerSystem> {
    Ok(SchrodingerSystem { hamiltonian: Hamiltonian1D::new(grid, potential, constants, boundary)? })
}

impl SchrodingerSystem {
    pub fn hamiltonian(&self) -> &Hamiltonian1D {
        &self.hamiltonian
    }

    /// Eigenpairs of the stationary equation via the dense oracle.
    pub fn stationary(&self) -> Result<Spectrum> {
        spectrum_of(&self.hamiltonian.operator(), self.hamiltonian.grid().spacing(), oracle_cap())
    }

    pub fn propagator(&self, dt: f64) -> Result<Propagator> {
        self.propagator_with_budget(dt, DEFAULT_ACCURACY_BUDGET)
    }

    pub fn propagator_with_budget(&self, dt: f64, budget: f64) -> Result<Propagator> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let h = &self.hamiltonian;
        let hbar = h.constants().hbar();
        let max_dt = budget * hbar / h.norm_bound();
        if dt > max_dt {
            return Err(Error::StepSize { dt, max_dt });
        }
        let s = h.grid().spacing();
        let t = hbar * hbar / (2.0 * h.constants().mass() * s * s);
        let alpha = Complex64::new(0.0, dt / (2.0 * hbar));
        let diag: Vec<Complex64> = crate::existence::EnergySplit::potential(h).iter().map(|v| alpha * (2.0 * t + v)).collect();
        let off = alpha * (-t);
        Ok(Propagator { dt, diag, off, boundary: h.boundary() })
    }
}

/// Implicit-midpoint (Crank–Nicolson) step
/// `(1 + i·dt·H/2ħ) ψ' = (1 − i·dt·H/2ħ) ψ`, exactly unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    dt: f64,
    /// Diagonal of `i·dt·H/2ħ`.
    diag: Vec<Complex64>,
    /// Off-diagonal of `i·dt·H/2ħ`.
    off: Complex64,
    boundary: Boundary,
}

impl Propagator {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = psi.len();
        let one = Complex64::new(1.0, 0.0);
        let periodic = self.boundary == Boundary::Periodic;
        let rhs: Vec<Complex64> = (0..n)
            .map(|i| {
                let left = if i > 0 { psi[i - 1] } else if periodic { psi[n - 1] } else { Complex64::new(0.0, 0.0) };
                let right = if i + 1 < n { psi[i + 1] } else if periodic { psi[0] } else { Complex64::new(0.0, 0.0) };
                (one - self.diag[i]) * psi[i] - self.off * (left + right)
            })
            .collect();
        let diag: Vec<Complex64> = self.diag.iter().map(|d| one + d).collect();
        if periodic {
            solve_cyclic(&diag, self.off, &rhs)
        } else {
            solve_tridiagonal(&diag, self.off, &rhs)
        }
    }

    pub fn evolve(&self, psi: &[Complex64], steps: usize) -> Vec<Complex64> {
        let mut cur = psi.to_vec();
        for _ in 0..steps {
            cur = self.step(&cur);
        }
        cur
    }
}

/// Thomas algorithm for a tridiagonal system with constant off-diagonals.
fn solve_tridiagonal(diag: &[Complex64], off: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * c[i - 1];
        c[i] = off / m;
        d[i] = (rhs[i] - off * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Cyclic tridiagonal solve via the Sherman–Morrison correction.
fn solve_cyclic(diag: &[Complex64], off: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut modified = diag.to_vec();
    modified[0] -= gamma;
    modified[n - 1] -= off * off / gamma;
    let y = solve_tridiagonal(&modified, off, rhs);
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = solve_tridiagonal(&modified, off, &u);
    let factor = (y[0] + off / gamma * y[n - 1]) / (Complex64::new(1.0, 0.0) + z[0] + off / gamma * z[n - 1]);
    y.iter().zip(&z).map(|(a, b)| a - b * factor).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    /// `q² = (m₀/ħ²)·K`.
    pub q_squared: f64,
    /// `(m₀/ħ)(V_Ψ/ħ)`.
    pub potential_quanta: f64,
    /// `(m₀/ħ)(E/ħ)` with `E = K + V_Ψ`.
    pub energy_quanta: f64,
}

/// Energy expectation split plus its reading in units of `ħ²/m₀`.
pub fn conservation_report(psi: &WaveField, hamiltonian: &Hamiltonian1D) -> Result<ConservationReport> {
    let e = expectation_energy(psi, hamiltonian)?;
    let k = hamiltonian.constants();
    let scale = k.mass() / (k.hbar() * k.hbar());
    Ok(ConservationReport {
        kinetic: e.kinetic,
        potential: e.potential,
        total: e.total,
        q_squared: scale * e.kinetic,
        potential_quanta: scale * e.potential,
        energy_quanta: scale * e.total,
    })
}

/// Normalized Gaussian packet `exp(−(x−x₀)²/4σ²)·exp(ik₀x)`.
pub fn gaussian_packet(grid: &Grid, x0: f64, sigma: f64, k0: f64) -> Result<WaveField> {
    let amps = grid
        .points()
        .map(|x| Complex64::from_polar((-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp(), k0 * x))
        .collect();
    WaveField::new(amps, grid.spacing()).normalized()
}
