//! Energy-dependent effective-potential reduction and exhaustive root search.
//!
//! Eliminating the Q block of `H` gives the Schur-complement operator
//!
//! ```text
//! H_eff(E) = H_PP + H_PQ (E − H_QQ)⁻¹ H_QP
//! ```
//!
//! whose self-consistent roots `det(H_eff(E) − E) = 0` are the eigenvalues of
//! `H` with nonzero P-projection. With `H_QQ = U diag(μ) U†` and
//! `W = H_PQ U` the reduction is evaluated as `H_PP + Σ_k w_k w_k† / (E − μ_k)`.
//!
//! The scan counts the negative eigenvalues `ν(E)` of `H_eff(E) − E`. The sign of
//! the characteristic determinant is `(−1)^ν`, and since `d/dE (H_eff − E)` is
//! negative definite `ν` only ever steps up, once per root (with multiplicity),
//! inside each pole-free interval.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::existence::{ExistenceProblem, WaveField};
use crate::operator::{norm2, CMatrix, CVector, HermitianOperator};

/// Relative pole guard, in units of the operator norm bound.
pub const DEFAULT_POLE_GUARD: f64 = 1e-9;
/// Scan points per unit of mean level spacing.
pub const SCAN_POINTS_PER_LEVEL: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionSelector {
    /// All full-space indices whose ξ index equals the channel.
    XiChannel(usize),
    /// Explicit full-space indices.
    Indices(Vec<usize>),
}

impl Default for PartitionSelector {
    fn default() -> Self {
        PartitionSelector::XiChannel(0)
    }
}

/// Split of the full index set into retained (P) and eliminated (Q) parts.
#[derive(Debug, Clone)]
pub struct Partition<'a> {
    problem: &'a ExistenceProblem,
    p: Vec<usize>,
    q: Vec<usize>,
}

pub fn make_partition<'a>(problem: &'a ExistenceProblem, selector: &PartitionSelector) -> Result<Partition<'a>> {
    let dim = problem.dimension();
    let mut in_p = vec![false; dim];
    match selector {
        PartitionSelector::XiChannel(ch) => {
            if *ch >= problem.n_xi() {
                return Err(Error::Partition(format!("xi channel {ch} out of range (n_xi = {})", problem.n_xi())));
            }
            for i in 0..problem.n_q() {
                in_p[problem.index(i, *ch)] = true;
            }
        }
        PartitionSelector::Indices(idx) => {
            for &k in idx {
                if k >= dim {
                    return Err(Error::Partition(format!("index {k} out of range (dimension {dim})")));
                }
                in_p[k] = true;
            }
        }
    }
    let p: Vec<usize> = (0..dim).filter(|&k| in_p[k]).collect();
    let q: Vec<usize> = (0..dim).filter(|&k| !in_p[k]).collect();
    if p.is_empty() {
        return Err(Error::Partition("P is empty".into()));
    }
    if q.is_empty() {
        return Err(Error::Partition("P covers the full space; Q is empty".into()));
    }
    Ok(Partition { problem, p, q })
}

impl<'a> Partition<'a> {
    pub fn problem(&self) -> &'a ExistenceProblem {
        self.problem
    }

    pub fn p(&self) -> &[usize] {
        &self.p
    }

    pub fn q(&self) -> &[usize] {
        &self.q
    }
}

/// A Q-space eigenvalue whose eigenvector does not couple to P. It is an exact
/// eigenvalue of the full operator, invisible to the reduced equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledPole {
    pub energy: f64,
    pub state: WaveField,
}

/// `sign · exp(log_abs)`, kept apart so large or tiny determinants stay finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogDet {
    pub sign: f64,
    pub log_abs: f64,
    /// Number of negative eigenvalues of `H_eff(E) − E`.
    pub negative_count: usize,
}

impl SignedLogDet {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

/// The reduced operator of a partition, ready for evaluation at any energy.
#[derive(Debug, Clone)]
pub struct EpOperator<'a> {
    partition: Partition<'a>,
    h_pp: CMatrix,
    /// Coupled Q-eigenvalues (poles of the reduction), ascending.
    poles: Vec<f64>,
    /// Q-eigenvectors of the coupled poles, as columns (|Q| × k).
    u: CMatrix,
    /// `H_PQ · u` (|P| × k).
    w: CMatrix,
    w_re: DMatrix<f64>,
    /// `None` when `w` is real.
    w_im: Option<DMatrix<f64>>,
    /// All Q-eigenvalues, coupled or not.
    all_q_eigenvalues: Vec<f64>,
    decoupled: Vec<DecoupledPole>,
    norm: f64,
    pole_guard: f64,
}

impl<'a> EpOperator<'a> {
    pub fn new(partition: Partition<'a>) -> Self {
        Self::with_pole_guard(partition, DEFAULT_POLE_GUARD)
    }

    /// `relative_guard` is measured in units of the operator norm bound.
    pub fn with_pole_guard(partition: Partition<'a>, relative_guard: f64) -> Self {
        let problem = partition.problem;
        let full = problem.full_operator();
        let norm = full.norm_bound().max(f64::MIN_POSITIVE);
        let h_pp = full.block(&partition.p, &partition.p);
        let h_pq = full.block(&partition.p, &partition.q);
        let (mu, u_all) = full.principal(&partition.q).eigh();
        let w_all = &h_pq * &u_all;

        let tol = 1e-10 * norm;
        let mut poles = Vec::new();
        let mut u_cols: Vec<CVector> = Vec::new();
        let mut w_cols: Vec<CVector> = Vec::new();
        let mut decoupled = Vec::new();

        // Within a (near-)degenerate group of Q-eigenvalues only the range of
        // W couples; the Gram eigenbasis separates coupled from null directions.
        let mut start = 0;
        while start < mu.len() {
            let mut end = start + 1;
            while end < mu.len() && mu[end] - mu[end - 1] <= tol {
                end += 1;
            }
            let d = end - start;
            let ug = u_all.columns(start, d).clone_owned();
            let wg = w_all.columns(start, d).clone_owned();
            let energy = mu[start..end].iter().sum::<f64>() / d as f64;
            let gram = HermitianOperator::from_hermitian_part(&(wg.adjoint() * &wg));
            let (sigma2, rot) = gram.eigh();
            let ur = &ug * &rot;
            let wr = &wg * &rot;
            for (k, s2) in sigma2.iter().enumerate() {
                if s2.max(0.0).sqrt() <= tol {
                    let mut amps = vec![Complex64::new(0.0, 0.0); problem.dimension()];
                    for (a, &qi) in partition.q.iter().enumerate() {
                        amps[qi] = ur[(a, k)];
                    }
                    let state = WaveField::new(amps, problem.weight()).normalized().expect("unit Q eigenvector");
                    decoupled.push(DecoupledPole { energy, state });
                } else {
                    poles.push(if d == 1 { mu[start] } else { energy });
                    u_cols.push(ur.column(k).clone_owned());
                    w_cols.push(wr.column(k).clone_owned());
                }
            }
            start = end;
        }
        let np = partition.p.len();
        let nq = partition.q.len();
        let u = if u_cols.is_empty() { CMatrix::zeros(nq, 0) } else { CMatrix::from_columns(&u_cols) };
        let w = if w_cols.is_empty() { CMatrix::zeros(np, 0) } else { CMatrix::from_columns(&w_cols) };
        let w_re = w.map(|z| z.re);
        let w_im = w.iter().any(|z| z.im != 0.0).then(|| w.map(|z| z.im));
        Self { partition, h_pp, poles, u, w, w_re, w_im, all_q_eigenvalues: mu, decoupled, norm, pole_guard: relative_guard * norm }
    }

    pub fn partition(&self) -> &Partition<'a> {
        &self.partition
    }

    /// Poles of the reduction (coupled eigenvalues of `H_QQ`), ascending.
    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn decoupled_poles(&self) -> &[DecoupledPole] {
        &self.decoupled
    }

    pub fn h_pp(&self) -> HermitianOperator {
        HermitianOperator::from_hermitian_part(&self.h_pp)
    }

    /// Upper bound on `‖H‖` used to scale guards and tolerances.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn pole_guard(&self) -> f64 {
        self.pole_guard
    }

    fn check_pole(&self, energy: f64) -> Result<()> {
        if let Some(&pole) = self.poles.iter().min_by(|a, b| (*a - energy).abs().total_cmp(&(*b - energy).abs())) {
            if (pole - energy).abs() <= self.pole_guard || !energy.is_finite() {
                return Err(Error::PoleProximity { energy, pole });
            }
        }
        Ok(())
    }

    /// `H_eff(E)`; errors within the pole guard of a coupled Q-eigenvalue.
    pub fn effective_hamiltonian(&self, energy: f64) -> Result<HermitianOperator> {
        self.check_pole(energy)?;
        // W·diag(1/(E−μ))·W† from real products.
        let d: Vec<f64> = self.poles.iter().map(|&pole| 1.0 / (energy - pole)).collect();
        let scale = |m: &DMatrix<f64>| {
            let mut out = m.clone();
            for (k, dk) in d.iter().enumerate() {
                out.column_mut(k).scale_mut(*dk);
            }
            out
        };
        let re_d = scale(&self.w_re);
        let mut sym = &re_d * self.w_re.transpose();
        let mut anti = None;
        if let Some(w_im) = &self.w_im {
            let im_d = scale(w_im);
            sym += &im_d * w_im.transpose();
            anti = Some(&im_d * self.w_re.transpose() - &re_d * w_im.transpose());
        }
        let mut m = self.h_pp.clone();
        for (z, a) in m.iter_mut().zip(sym.iter()) {
            z.re += a;
        }
        if let Some(anti) = anti {
            for (z, b) in m.iter_mut().zip(anti.iter()) {
                z.im += b;
            }
        }
        Ok(HermitianOperator::from_hermitian_part(&m))
    }

    /// `det(H_eff(E) − E)` as sign, log-magnitude and inertia.
    pub fn signed_log_det(&self, energy: f64) -> Result<SignedLogDet> {
        let eigs = self.effective_hamiltonian(energy)?.shifted(-energy).eigenvalues();
        let mut sign = 1.0;
        let mut log_abs = 0.0;
        let mut negative_count = 0;
        for l in eigs {
            if l < 0.0 {
                sign = -sign;
                negative_count += 1;
            }
            if l == 0.0 {
                sign = 0.0;
            }
            log_abs += l.abs().ln();
        }
        Ok(SignedLogDet { sign, log_abs, negative_count })
    }

    /// The characteristic value `det(H_eff(E) − E)`.
    pub fn ep_characteristic(&self, energy: f64) -> Result<f64> {
        Ok(self.signed_log_det(energy)?.value())
    }

    /// Number of full-operator eigenvalues strictly below `energy`, from the
    /// inertia of `H_QQ − E` and of the Schur complement.
    pub fn count_below(&self, energy: f64) -> Result<usize> {
        let nu = self.signed_log_det(energy)?.negative_count;
        Ok(nu + self.all_q_eigenvalues.iter().filter(|&&m| m < energy).count())
    }

    /// `ψ_Q = (E − H_QQ)⁻¹ H_QP ψ_P`, concatenated and normalized.
    pub fn reconstruct_full_state(&self, energy: f64, psi_p: &[Complex64]) -> Result<WaveField> {
        self.check_pole(energy)?;
        let np = self.partition.p.len();
        if psi_p.len() != np {
            return Err(Error::Dimension { context: "psi_P", expected: np, found: psi_p.len() });
        }
        let x = CVector::from_column_slice(psi_p);
        // u · diag(1/(E−μ)) · w† · ψ_P
        let mut coeff = self.w.adjoint() * x;
        for (k, &pole) in self.poles.iter().enumerate() {
            coeff[k] /= energy - pole;
        }
        let psi_q = &self.u * coeff;
        let problem = self.partition.problem;
        let mut amps = vec![Complex64::new(0.0, 0.0); problem.dimension()];
        for (a, &k) in self.partition.p.iter().enumerate() {
            amps[k] = psi_p[a];
        }
        for (a, &k) in self.partition.q.iter().enumerate() {
            amps[k] = psi_q[a];
        }
        WaveField::new(amps, problem.weight()).normalized()
    }

    /// `‖Hψ − Eψ‖₂ / ‖ψ‖₂`.
    pub fn residual(&self, energy: f64, psi: &WaveField) -> f64 {
        let amps = psi.amplitudes();
        let h_psi = self.partition.problem.full_operator().apply(amps);
        let r: Vec<Complex64> = h_psi.iter().zip(amps).map(|(a, b)| a - b * energy).collect();
        norm2(&r) / norm2(amps)
    }
}

/// Scan range and resolution for [`enumerate_roots`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub e_min: f64,
    pub e_max: f64,
    pub scan_points: usize,
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
}

impl ScanConfig {
    /// Gershgorin interval of the full operator widened by 1% of its norm,
    /// with `SCAN_POINTS_PER_LEVEL` points per mean level spacing.
    pub fn covering(problem: &ExistenceProblem) -> Self {
        let full = problem.full_operator();
        let m = full.matrix();
        let n = full.dimension();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].norm()).sum();
            lo = lo.min(m[(i, i)].re - radius);
            hi = hi.max(m[(i, i)].re + radius);
        }
        let norm = full.norm_bound().max(1e-300);
        let margin = 0.01 * norm;
        Self { e_min: lo - margin, e_max: hi + margin, scan_points: SCAN_POINTS_PER_LEVEL * n.max(1), tol: 1e-13 * norm }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRoot {
    pub branch_id: usize,
    pub energy: f64,
    pub psi_p: Vec<Complex64>,
    pub psi_full: WaveField,
    pub residual: f64,
    /// Marginal density on the q grid, integrating to 1.
    pub density_q: Vec<f64>,
    pub centroid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completeness {
    /// Roots the inertia count places inside the scan range.
    pub expected: usize,
    pub found: usize,
    /// Roots dropped as duplicates of a neighbouring bracket.
    pub duplicates_dropped: usize,
}

impl Completeness {
    pub fn is_complete(&self) -> bool {
        self.expected == self.found
    }
}

#[derive(Debug, Clone)]
pub struct RootScan {
    pub roots: Vec<BranchRoot>,
    /// Decoupled Q-eigenvalues inside the scan range.
    pub decoupled: Vec<DecoupledPole>,
    pub completeness: Completeness,
}

/// Locates every root of the reduced equation in `[e_min, e_max]`.
pub fn enumerate_roots(ep: &EpOperator<'_>, scan: &ScanConfig) -> Result<RootScan> {
    if !(scan.e_min.is_finite() && scan.e_max.is_finite() && scan.e_max > scan.e_min) {
        return Err(Error::Config(format!("invalid scan range [{}, {}]", scan.e_min, scan.e_max)));
    }
    if !(scan.tol > 0.0) || scan.scan_points < 2 {
        return Err(Error::Config("scan needs tol > 0 and at least 2 points".into()));
    }
    let guard = ep.pole_guard;
    let span = scan.e_max - scan.e_min;

    // Pole-free segments of the scan range.
    let mut segments = Vec::new();
    let mut lo = scan.e_min;
    for &pole in ep.poles.iter().filter(|&&p| p > scan.e_min && p < scan.e_max) {
        segments.push((lo, pole - 2.0 * guard));
        lo = pole + 2.0 * guard;
    }
    segments.push((lo, scan.e_max));

    let nu = |e: f64| ep.signed_log_det(e).map(|d| d.negative_count);
    let mut brackets: Vec<Vec<f64>> = Vec::new();
    for (a, b) in segments {
        if b <= a {
            continue;
        }
        let count = ((scan.scan_points as f64 * (b - a) / span).ceil() as usize).max(2);
        let pts: Vec<f64> = (0..=count).map(|k| if k == count { b } else { a + (b - a) * k as f64 / count as f64 }).collect();
        let counts = pts.iter().map(|&e| nu(e)).collect::<Result<Vec<_>>>()?;
        for k in 0..count {
            let (c0, c1) = (counts[k], counts[k + 1]);
            if c1 <= c0 {
                continue;
            }
            let mut found = Vec::with_capacity(c1 - c0);
            let mut left = pts[k];
            for target in c0 + 1..=c1 {
                let (lo, e) = refine_root(ep, target - 1, left, pts[k + 1], scan.tol)?;
                found.push(e);
                left = lo;
            }
            brackets.push(found);
        }
    }

    let problem = ep.partition.problem;
    let grid = problem.grid_q();
    let mut roots: Vec<BranchRoot> = Vec::new();
    let mut duplicates_dropped = 0;
    for found in brackets {
        let mut cluster: Vec<f64> = Vec::new();
        let mut bracket_roots: Vec<f64> = Vec::new();
        for e in found {
            if let Some(last) = roots.last() {
                if bracket_roots.is_empty() && (e - last.energy).abs() < 10.0 * scan.tol {
                    duplicates_dropped += 1;
                    continue;
                }
            }
            bracket_roots.push(e);
        }
        // Roots sharing a bracket within 10·tol form one degenerate level.
        for e in bracket_roots {
            if cluster.last().is_some_and(|&c| (e - c).abs() >= 10.0 * scan.tol) {
                push_level(ep, &cluster, grid, &mut roots)?;
                cluster.clear();
            }
            cluster.push(e);
        }
        if !cluster.is_empty() {
            push_level(ep, &cluster, grid, &mut roots)?;
        }
    }

    let decoupled: Vec<DecoupledPole> =
        ep.decoupled.iter().filter(|d| d.energy >= scan.e_min && d.energy <= scan.e_max).cloned().collect();
    let expected = ep.count_below(scan.e_max)? - ep.count_below(scan.e_min)? - decoupled.len();
    let completeness = Completeness { expected, found: roots.len(), duplicates_dropped };
    Ok(RootScan { roots, decoupled, completeness })
}

/// Zero of the `index`-th eigenvalue of `H_eff(E) − E` in `[lo, hi]`, which
/// decreases strictly in E. Illinois steps, bisection when they stall.
/// Returns the final left bracket end and the root.
fn refine_root(ep: &EpOperator<'_>, index: usize, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let f = |e: f64| -> Result<f64> { Ok(ep.effective_hamiltonian(e)?.shifted(-e).eigenvalues()[index]) };
    let (mut f_lo, mut f_hi) = (f(lo)?, f(hi)?);
    let mut side = 0i8;
    while hi - lo > tol {
        let width = hi - lo;
        let mut e = if f_lo > 0.0 && f_hi < 0.0 { (lo * f_hi - hi * f_lo) / (f_hi - f_lo) } else { 0.5 * (lo + hi) };
        if !(e > lo && e < hi) {
            e = 0.5 * (lo + hi);
        }
        let fe = f(e)?;
        if fe == 0.0 {
            return Ok((lo, e));
        }
        if fe < 0.0 {
            hi = e;
            f_hi = fe;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        } else {
            lo = e;
            f_lo = fe;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        }
        if hi - lo > 0.5 * width {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = f(mid)?;
            if fm < 0.0 {
                hi = mid;
                f_hi = fm;
            } else {
                lo = mid;
                f_lo = fm;
            }
        }
    }
    Ok((lo, 0.5 * (lo + hi)))
}

/// Builds the branch roots of one (possibly degenerate) level.
fn push_level(ep: &EpOperator<'_>, level: &[f64], grid: &crate::grid::Grid, roots: &mut Vec<BranchRoot>) -> Result<()> {
    let energy = level.iter().sum::<f64>() / level.len() as f64;
    let (vals, vecs) = ep.effective_hamiltonian(energy)?.eigh();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| (vals[a] - energy).abs().total_cmp(&(vals[b] - energy).abs()).then(a.cmp(&b)));
    let mut states: Vec<WaveField> = Vec::new();
    for &k in order.iter().take(level.len()) {
        let psi_p: Vec<Complex64> = vecs.column(k).iter().copied().collect();
        let mut full = ep.reconstruct_full_state(energy, &psi_p)?;
        // Orthogonalize against earlier members of a degenerate level.
        for prev in &states {
            let ov = prev.inner(&full);
            let amps: Vec<Complex64> =
                full.amplitudes().iter().zip(prev.amplitudes()).map(|(a, b)| a - b * ov).collect();
            full = WaveField::new(amps, full.weight()).normalized()?;
        }
        states.push(full.clone());
        let density_q = ep.partition.problem.q_marginal(&full);
        let centroid = grid.points().zip(&density_q).map(|(x, r)| x * r).sum::<f64>() * grid.spacing();
        let residual = ep.residual(energy, &full);
        roots.push(BranchRoot { branch_id: roots.len(), energy, psi_p, psi_full: full, residual, density_q, centroid });
    }
    Ok(())
}
