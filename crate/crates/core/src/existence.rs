//! The discretized two-component existence problem and its dense oracle.
//!
//! Full-space indices follow `index = i_q * n_xi + j_xi`, so the assembled
//! operator is `h_e ⊗ I + I ⊗ h_g + diag(V)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, PhysicalConstants};
use crate::operator::{CMatrix, HermitianOperator};

/// Default dimension cap for dense diagonalization.
pub const DEFAULT_ORACLE_CAP: usize = 4096;
/// Environment variable overriding [`DEFAULT_ORACLE_CAP`].
pub const ORACLE_CAP_ENV: &str = "EPDYN_ORACLE_CAP";
/// Tolerance of the normalization precondition.
pub const NORM_TOL: f64 = 1e-10;

pub fn oracle_cap() -> usize {
    std::env::var(ORACLE_CAP_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_ORACLE_CAP)
}

/// Complex amplitudes on a grid together with the quadrature weight
/// (grid spacing, or the product of spacings on a product grid).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    amplitudes: Vec<Complex64>,
    weight: f64,
    normalized: bool,
}

impl WaveField {
    pub fn new(amplitudes: Vec<Complex64>, weight: f64) -> Self {
        Self { amplitudes, weight, normalized: false }
    }

    pub fn from_real(values: &[f64], weight: f64) -> Self {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect(), weight)
    }

    /// Rescales so that `Σ|ψ|²·weight = 1`.
    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm_sq();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::Normalization { norm_sq: n2 });
        }
        let s = 1.0 / n2.sqrt();
        for z in &mut self.amplitudes {
            *z *= s;
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn is_flagged_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.weight
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n2 = self.norm_sq();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization { norm_sq: n2 });
        }
        Ok(())
    }

    /// Weighted inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &WaveField) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.weight
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub state: WaveField,
}

/// Eigenpairs in ascending order of eigenvalue.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectrum {
    pairs: Vec<Eigenpair>,
}

impl Spectrum {
    pub fn pairs(&self) -> &[Eigenpair] {
        &self.pairs
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Dense diagonalization of `op`; states normalized with quadrature `weight`.
pub fn spectrum_of(op: &HermitianOperator, weight: f64, cap: usize) -> Result<Spectrum> {
    let dimension = op.dimension();
    if dimension > cap {
        return Err(Error::OracleScale { dimension, cap });
    }
    let (values, vectors) = op.eigh();
    let scale = 1.0 / weight.sqrt();
    let pairs = values
        .into_iter()
        .enumerate()
        .map(|(k, value)| {
            let amps = vectors.column(k).iter().map(|z| z * scale).collect();
            let mut state = WaveField::new(amps, weight);
            state.normalized = true;
            Eigenpair { value, state }
        })
        .collect();
    Ok(Spectrum { pairs })
}

/// Three-point kinetic operator `-(ħ²/2m) ∂²` on `grid`.
pub fn build_kinetic(grid: &Grid, constants: &PhysicalConstants, boundary: Boundary) -> HermitianOperator {
    let n = grid.len();
    let s = grid.spacing();
    let t = constants.hbar().powi(2) / (2.0 * constants.mass() * s * s);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] += 2.0 * t;
        if i + 1 < n {
            m[(i, i + 1)] -= t;
            m[(i + 1, i)] -= t;
        }
    }
    if boundary == Boundary::Periodic {
        m[(0, n - 1)] -= t;
        m[(n - 1, 0)] -= t;
    }
    HermitianOperator::from_real(m).expect("kinetic stencil is symmetric")
}

/// Three-point second difference of `psi` with the given boundary closure.
pub fn second_difference(psi: &[Complex64], spacing: f64, boundary: Boundary) -> Vec<Complex64> {
    let n = psi.len();
    let zero = Complex64::new(0.0, 0.0);
    let inv = 1.0 / (spacing * spacing);
    (0..n)
        .map(|i| {
            let (left, right) = match boundary {
                Boundary::Dirichlet => (
                    if i == 0 { zero } else { psi[i - 1] },
                    if i + 1 == n { zero } else { psi[i + 1] },
                ),
                Boundary::Periodic => (psi[(i + n - 1) % n], psi[(i + 1) % n]),
            };
            (left - psi[i] * 2.0 + right) * inv
        })
        .collect()
}

/// Kinetic/potential split of an operator, used for energy expectations.
pub trait EnergySplit {
    fn dimension(&self) -> usize;
    fn weight(&self) -> f64;
    fn apply_kinetic(&self, psi: &[Complex64]) -> Vec<Complex64>;
    /// Diagonal (multiplicative) potential.
    fn potential(&self) -> &[f64];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyExpectation {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// `K = Σ ψ*·(T ψ)·w`, `V_ψ = Σ ψ*·V·ψ·w`, total `K + V_ψ`.
pub fn expectation_energy<S: EnergySplit + ?Sized>(psi: &WaveField, op: &S) -> Result<EnergyExpectation> {
    if psi.len() != op.dimension() {
        return Err(Error::Dimension { context: "expectation_energy", expected: op.dimension(), found: psi.len() });
    }
    psi.check_normalized()?;
    let w = op.weight();
    let amps = psi.amplitudes();
    let t_psi = op.apply_kinetic(amps);
    let kinetic = amps.iter().zip(&t_psi).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * w;
    let potential = amps.iter().zip(op.potential()).map(|(a, v)| a.norm_sqr() * v).sum::<f64>() * w;
    Ok(EnergyExpectation { kinetic, potential, total: kinetic + potential })
}

/// One-dimensional Hamiltonian `-(ħ²/2m)∂² + V(x)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian1D {
    grid: Grid,
    potential: Vec<f64>,
    constants: PhysicalConstants,
    boundary: Boundary,
}

impl Hamiltonian1D {
    pub fn new(grid: Grid, potential: Vec<f64>, constants: PhysicalConstants, boundary: Boundary) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::Dimension { context: "potential", expected: grid.len(), found: potential.len() });
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("potential must be finite".into()));
        }
        Ok(Self { grid, potential, constants, boundary })
    }

    pub fn free(grid: Grid, constants: PhysicalConstants, boundary: Boundary) -> Self {
        let n = grid.len();
        Self { grid, potential: vec![0.0; n], constants, boundary }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn operator(&self) -> HermitianOperator {
        let k = build_kinetic(&self.grid, &self.constants, self.boundary);
        let mut m = k.matrix().clone();
        for (i, v) in self.potential.iter().enumerate() {
            m[(i, i)] += v;
        }
        HermitianOperator::new(m).expect("kinetic plus real diagonal is Hermitian")
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.apply_kinetic(psi);
        for ((o, p), v) in out.iter_mut().zip(psi).zip(&self.potential) {
            *o += p * v;
        }
        out
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        spectrum_of(&self.operator(), self.grid.spacing(), oracle_cap())
    }

    /// Upper bound on the spectral radius (Gershgorin).
    pub fn norm_bound(&self) -> f64 {
        let s = self.grid.spacing();
        let t = self.constants.hbar().powi(2) / (2.0 * self.constants.mass() * s * s);
        4.0 * t + self.potential.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

impl EnergySplit for Hamiltonian1D {
    fn dimension(&self) -> usize {
        self.grid.len()
    }

    fn weight(&self) -> f64 {
        self.grid.spacing()
    }

    fn apply_kinetic(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let c = -self.constants.hbar().powi(2) / (2.0 * self.constants.mass());
        second_difference(psi, self.grid.spacing(), self.boundary).into_iter().map(|z| z * c).collect()
    }

    fn potential(&self) -> &[f64] {
        &self.potential
    }
}

/// Coupled two-block Hermitian problem on the product space `q × ξ`.
#[derive(Debug, Clone)]
pub struct ExistenceProblem {
    grid_q: Grid,
    grid_xi: Option<Grid>,
    h_e: HermitianOperator,
    h_g: HermitianOperator,
    coupling: Vec<f64>,
    constants: PhysicalConstants,
    full: OnceLock<HermitianOperator>,
}

impl PartialEq for ExistenceProblem {
    fn eq(&self, other: &Self) -> bool {
        self.grid_q == other.grid_q
            && self.grid_xi == other.grid_xi
            && self.h_e == other.h_e
            && self.h_g == other.h_g
            && self.coupling == other.coupling
            && self.constants == other.constants
    }
}

/// Assembles a problem from its blocks. `coupling[i][j] = V(q_i, ξ_j)`.
///
/// `grid_xi = None` describes a single ξ channel (`h_g` must then be 1×1).
pub fn assemble_existence(
    grid_q: Grid,
    grid_xi: Option<Grid>,
    h_e: HermitianOperator,
    h_g: HermitianOperator,
    coupling: &[Vec<f64>],
    constants: PhysicalConstants,
) -> Result<ExistenceProblem> {
    let n_q = h_e.dimension();
    let n_xi = h_g.dimension();
    if grid_q.len() != n_q {
        return Err(Error::Dimension { context: "h_e vs q grid", expected: grid_q.len(), found: n_q });
    }
    match &grid_xi {
        Some(g) if g.len() != n_xi => {
            return Err(Error::Dimension { context: "h_g vs xi grid", expected: g.len(), found: n_xi })
        }
        None if n_xi != 1 => {
            return Err(Error::Dimension { context: "h_g without xi grid", expected: 1, found: n_xi })
        }
        _ => {}
    }
    if coupling.len() != n_q {
        return Err(Error::Dimension { context: "coupling rows", expected: n_q, found: coupling.len() });
    }
    let mut flat = Vec::with_capacity(n_q * n_xi);
    for row in coupling {
        if row.len() != n_xi {
            return Err(Error::Dimension { context: "coupling columns", expected: n_xi, found: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("coupling must be finite".into()));
        }
        flat.extend_from_slice(row);
    }
    Ok(ExistenceProblem { grid_q, grid_xi, h_e, h_g, coupling: flat, constants, full: OnceLock::new() })
}

impl ExistenceProblem {
    /// A bare Hermitian matrix viewed as a single-channel problem with unit spacing.
    pub fn from_matrix(h: HermitianOperator) -> Result<Self> {
        let n = h.dimension();
        let grid = Grid::new(n, 0.0, (n.max(2) - 1) as f64)?;
        let coupling = vec![vec![0.0]; n];
        assemble_existence(grid, None, h, HermitianOperator::zeros(1), &coupling, PhysicalConstants::default())
    }

    /// Random Hermitian blocks with dense random coupling, unit spacings.
    pub fn random(n_q: usize, n_xi: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut herm = |n: usize| {
            let mut m = CMatrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
                for j in 0..i {
                    let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
            HermitianOperator::new(m).expect("constructed Hermitian")
        };
        let h_e = herm(n_q);
        let h_g = herm(n_xi);
        let coupling: Vec<Vec<f64>> =
            (0..n_q).map(|_| (0..n_xi).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let grid_q = Grid::new(n_q, 0.0, (n_q - 1) as f64)?;
        let grid_xi = if n_xi >= 2 { Some(Grid::new(n_xi, 0.0, (n_xi - 1) as f64)?) } else { None };
        assemble_existence(grid_q, grid_xi, h_e, h_g, &coupling, PhysicalConstants::default())
    }

    pub fn n_q(&self) -> usize {
        self.h_e.dimension()
    }

    pub fn n_xi(&self) -> usize {
        self.h_g.dimension()
    }

    pub fn dimension(&self) -> usize {
        self.n_q() * self.n_xi()
    }

    pub fn index(&self, i_q: usize, j_xi: usize) -> usize {
        i_q * self.n_xi() + j_xi
    }

    pub fn grid_q(&self) -> &Grid {
        &self.grid_q
    }

    pub fn grid_xi(&self) -> Option<&Grid> {
        self.grid_xi.as_ref()
    }

    pub fn h_e(&self) -> &HermitianOperator {
        &self.h_e
    }

    pub fn h_g(&self) -> &HermitianOperator {
        &self.h_g
    }

    pub fn coupling(&self, i_q: usize, j_xi: usize) -> f64 {
        self.coupling[self.index(i_q, j_xi)]
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn xi_weight(&self) -> f64 {
        self.grid_xi.as_ref().map_or(1.0, Grid::spacing)
    }

    /// Quadrature weight of the product grid.
    pub fn weight(&self) -> f64 {
        self.grid_q.spacing() * self.xi_weight()
    }

    /// `h_e ⊗ I + I ⊗ h_g + diag(V)`, built once and cached.
    pub fn full_operator(&self) -> &HermitianOperator {
        self.full.get_or_init(|| {
            let mut m = self.h_e.kron_identity_right(self.n_xi()) + self.h_g.kron_identity_left(self.n_q());
            for (k, v) in self.coupling.iter().enumerate() {
                m[(k, k)] += v;
            }
            HermitianOperator::new(m).expect("sum of Hermitian terms")
        })
    }

    /// Marginal density on the q grid: `ρ(q_i) = Σ_j |ψ(i,j)|²·dξ`.
    pub fn q_marginal(&self, psi: &WaveField) -> Vec<f64> {
        let n_xi = self.n_xi();
        let dxi = self.xi_weight();
        psi.amplitudes().chunks(n_xi).map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>() * dxi).collect()
    }
}

impl EnergySplit for ExistenceProblem {
    fn dimension(&self) -> usize {
        ExistenceProblem::dimension(self)
    }

    fn weight(&self) -> f64 {
        ExistenceProblem::weight(self)
    }

    fn apply_kinetic(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let full = self.full_operator().apply(psi);
        full.into_iter().zip(psi).zip(&self.coupling).map(|((f, p), v)| f - p * v).collect()
    }

    fn potential(&self) -> &[f64] {
        &self.coupling
    }
}

/// All eigenpairs of the assembled operator, subject to [`oracle_cap`].
pub fn full_spectrum(problem: &ExistenceProblem) -> Result<Spectrum> {
    full_spectrum_with_cap(problem, oracle_cap())
}

pub fn full_spectrum_with_cap(problem: &ExistenceProblem, cap: usize) -> Result<Spectrum> {
    let dimension = problem.dimension();
    if dimension > cap {
        return Err(Error::OracleScale { dimension, cap });
    }
    spectrum_of(problem.full_operator(), problem.weight(), cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn box_hamiltonian(n: usize) -> Hamiltonian1D {
        // Interior points of [0, 1]; walls sit one spacing beyond each end.
        let s = 1.0 / (n + 1) as f64;
        let grid = Grid::new(n, s, 1.0 - s).unwrap();
        Hamiltonian1D::free(grid, PhysicalConstants::default(), Boundary::Dirichlet)
    }

    #[test]
    fn kinetic_diagonal_entry() {
        let grid = Grid::new(11, 0.0, 2.0).unwrap();
        let k = PhysicalConstants::new(0.5, 1.0, 3.0).unwrap();
        let op = build_kinetic(&grid, &k, Boundary::Dirichlet);
        let s = grid.spacing();
        assert_abs_diff_eq!(op.entry(4, 4).re, 0.25 / (3.0 * s * s), epsilon = 1e-12);
        assert_abs_diff_eq!(op.entry(4, 5).re, -0.25 / (6.0 * s * s), epsilon = 1e-12);
    }

    #[test]
    fn kinetic_commutes_with_parity() {
        let grid = Grid::new(9, -1.0, 1.0).unwrap();
        for boundary in [Boundary::Dirichlet, Boundary::Periodic] {
            let op = build_kinetic(&grid, &PhysicalConstants::default(), boundary);
            let n = op.dimension();
            for i in 0..n {
                for j in 0..n {
                    let d = op.entry(i, j) - op.entry(n - 1 - i, n - 1 - j);
                    assert!(d.norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn box_ground_state_matches_analytic() {
        let h = box_hamiltonian(200);
        let e0 = h.spectrum().unwrap().pairs()[0].value;
        let exact = PI * PI / 2.0;
        assert!((e0 - exact).abs() / exact < 1e-3, "e0 = {e0}");
    }

    #[test]
    fn box_error_is_second_order() {
        // Halving the spacing: n+1 = 50 → 100 → 200.
        let exact = PI * PI / 2.0;
        let errs: Vec<f64> = [49, 99, 199]
            .iter()
            .map(|&n| (box_hamiltonian(n).spectrum().unwrap().pairs()[0].value - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() <= 0.4, "ratio {ratio}");
        }
    }

    #[test]
    fn pauli_x_and_two_by_two() {
        let p = ExistenceProblem::from_matrix(HermitianOperator::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap())
            .unwrap();
        let ev = full_spectrum(&p).unwrap().eigenvalues();
        assert_abs_diff_eq!(ev[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 1.0, epsilon = 1e-14);

        let p = ExistenceProblem::from_matrix(HermitianOperator::from_rows(&[vec![0.0, 1.0], vec![1.0, 2.0]]).unwrap())
            .unwrap();
        let ev = full_spectrum(&p).unwrap().eigenvalues();
        // Roots of λ² − 2λ − 1.
        assert_abs_diff_eq!(ev[0], 1.0 - 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 1.0 + 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn oracle_cap_enforced() {
        let p = ExistenceProblem::random(3, 3, 1).unwrap();
        assert!(matches!(full_spectrum_with_cap(&p, 8), Err(Error::OracleScale { dimension: 9, cap: 8 })));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = Grid::new(2, 0.0, 1.0).unwrap();
        let h = HermitianOperator::zeros(2);
        let bad = vec![vec![0.0; 3]; 2];
        assert!(assemble_existence(g.clone(), Some(g.clone()), h.clone(), h.clone(), &bad, Default::default()).is_err());
        let g3 = Grid::new(3, 0.0, 1.0).unwrap();
        assert!(assemble_existence(g3, Some(g), h.clone(), h, &vec![vec![0.0; 2]; 3], Default::default()).is_err());
    }

    #[test]
    fn constant_coupling_shifts_spectrum() {
        let base = ExistenceProblem::random(3, 2, 5).unwrap();
        let zero = vec![vec![0.0; 2]; 3];
        let shifted = vec![vec![0.7; 2]; 3];
        let mk = |cpl: &[Vec<f64>]| {
            assemble_existence(
                base.grid_q().clone(),
                base.grid_xi().cloned(),
                base.h_e().clone(),
                base.h_g().clone(),
                cpl,
                Default::default(),
            )
            .unwrap()
        };
        let a = full_spectrum(&mk(&zero)).unwrap().eigenvalues();
        let b = full_spectrum(&mk(&shifted)).unwrap().eigenvalues();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(y - x, 0.7, epsilon = 1e-12);
        }
        assert_eq!(mk(&zero).full_operator().dimension(), 6);
    }

    #[test]
    fn constant_potential_expectation() {
        let grid = Grid::new(50, -2.0, 2.0).unwrap();
        let h = Hamiltonian1D::new(grid.clone(), vec![3.25; 50], Default::default(), Boundary::Dirichlet).unwrap();
        let raw: Vec<f64> = grid.points().map(|x| (-(x * x)).exp() * (1.0 + x)).collect();
        let psi = WaveField::from_real(&raw, grid.spacing()).normalized().unwrap();
        let e = expectation_energy(&psi, &h).unwrap();
        assert_abs_diff_eq!(e.potential, 3.25, epsilon = 1e-12);
        let unnormalized = WaveField::from_real(&raw, grid.spacing());
        assert!(matches!(expectation_energy(&unnormalized, &h), Err(Error::Normalization { .. })));
    }

    #[test]
    fn plane_wave_kinetic_on_periodic_grid() {
        let n = 64;
        let grid = Grid::new(n, 0.0, 2.0 * PI * (n - 1) as f64 / n as f64).unwrap();
        let s = grid.spacing();
        let k = 3.0;
        let h = Hamiltonian1D::free(grid.clone(), Default::default(), Boundary::Periodic);
        let amps: Vec<Complex64> = grid.points().map(|x| Complex64::from_polar(1.0, k * x)).collect();
        let psi = WaveField::new(amps, s).normalized().unwrap();
        let e = expectation_energy(&psi, &h).unwrap();
        let discrete = (1.0 - (k * s).cos()) / (s * s);
        assert_abs_diff_eq!(e.kinetic, discrete, epsilon = 1e-12);
        assert!((e.kinetic - k * k / 2.0).abs() <= k.powi(4) * s * s / 24.0 * 1.01);
        let _ = c(0.0);
    }
}
