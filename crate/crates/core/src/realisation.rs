//! Grouping of branch roots into realisations with exact probabilities.

use crate::effective::BranchRoot;
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct Realisation {
    /// Branch ids of the member roots.
    pub members: Vec<usize>,
    /// Expected position of the normalized summed density.
    pub centroid: f64,
    /// Summed member densities on the q grid; integrates to `N_r`.
    pub density: Vec<f64>,
    /// Root-mean-square spread of the normalized density about `centroid`.
    pub spread: f64,
}

impl Realisation {
    pub fn n_r(&self) -> u64 {
        self.members.len() as u64
    }

    fn from_density(members: Vec<usize>, density: Vec<f64>, grid: &Grid) -> Self {
        let n_r = members.len() as f64;
        let s = grid.spacing();
        let centroid = grid.points().zip(&density).map(|(x, r)| x * r).sum::<f64>() * s / n_r;
        let var = grid.points().zip(&density).map(|(x, r)| (x - centroid).powi(2) * r).sum::<f64>() * s / n_r;
        Self { members, centroid, density, spread: var.max(0.0).sqrt() }
    }
}

/// Realisations with their elementary counts; `α_r = N_r / N_total` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RealisationEnsemble {
    grid: Grid,
    realisations: Vec<Realisation>,
    total: u64,
    /// Single-linkage width used to build the ensemble.
    width: f64,
}

impl RealisationEnsemble {
    pub fn new(grid: Grid, realisations: Vec<Realisation>, width: f64) -> Result<Self> {
        if realisations.is_empty() {
            return Err(Error::Config("ensemble needs at least one realisation".into()));
        }
        for r in &realisations {
            if r.members.is_empty() {
                return Err(Error::Config("realisation without members".into()));
            }
            if r.density.len() != grid.len() {
                return Err(Error::Dimension { context: "realisation density", expected: grid.len(), found: r.density.len() });
            }
            if r.density.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::Config("realisation density must be finite and nonnegative".into()));
            }
        }
        let total = realisations.iter().map(Realisation::n_r).sum();
        Ok(Self { grid, realisations, total, width })
    }

    /// Gaussian realisation densities `(N_r, centroid, spread)` on `grid`,
    /// for driving the hopping process without a solved problem.
    pub fn synthetic(grid: Grid, specs: &[(u64, f64, f64)]) -> Result<Self> {
        let s = grid.spacing();
        let mut next_id = 0;
        let mut realisations = Vec::with_capacity(specs.len());
        for &(n_r, centre, spread) in specs {
            if n_r == 0 || !(spread > 0.0) {
                return Err(Error::Config(format!("synthetic realisation needs N_r ≥ 1 and spread > 0, got ({n_r}, {spread})")));
            }
            let raw: Vec<f64> = grid.points().map(|x| (-(x - centre).powi(2) / (2.0 * spread * spread)).exp()).collect();
            let mass = raw.iter().sum::<f64>() * s;
            if !(mass > 0.0) {
                return Err(Error::Config(format!("synthetic realisation at {centre} has no support on the grid")));
            }
            let density = raw.iter().map(|r| r * n_r as f64 / mass).collect();
            let members = (next_id..next_id + n_r as usize).collect();
            next_id += n_r as usize;
            realisations.push(Realisation::from_density(members, density, &grid));
        }
        Self::new(grid, realisations, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn realisations(&self) -> &[Realisation] {
        &self.realisations
    }

    pub fn len(&self) -> usize {
        self.realisations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realisations.is_empty()
    }

    /// `N_ℜ`, the total number of elementary realisations.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// `α_r` as the exact ratio `(N_r, N_ℜ)`.
    pub fn alpha(&self, r: usize) -> (u64, u64) {
        (self.realisations[r].n_r(), self.total)
    }

    pub fn alpha_f64(&self, r: usize) -> f64 {
        self.realisations[r].n_r() as f64 / self.total as f64
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.len()).map(|r| self.alpha_f64(r)).collect()
    }

    /// Realisation density divided by `N_r`, integrating to one.
    pub fn normalized_density(&self, r: usize) -> Vec<f64> {
        let n = self.realisations[r].n_r() as f64;
        self.realisations[r].density.iter().map(|x| x / n).collect()
    }
}

/// Single-linkage clustering of root centroids: neighbours closer than
/// `width` join a realisation, so `width = 0` leaves every root on its own.
pub fn cluster_realisations(roots: &[BranchRoot], grid: &Grid, width: f64) -> Result<RealisationEnsemble> {
    if roots.is_empty() {
        return Err(Error::Config("cannot cluster an empty root list".into()));
    }
    if !(width >= 0.0) {
        return Err(Error::Config(format!("cluster width must be ≥ 0, got {width}")));
    }
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&a, &b| roots[a].centroid.total_cmp(&roots[b].centroid).then(roots[a].branch_id.cmp(&roots[b].branch_id)));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<f64> = None;
    for &k in &order {
        let c = roots[k].centroid;
        match (prev, groups.last_mut()) {
            (Some(p), Some(g)) if c - p < width => g.push(k),
            _ => groups.push(vec![k]),
        }
        prev = Some(c);
    }
    let mut realisations: Vec<Realisation> = groups
        .into_iter()
        .map(|g| {
            let mut density = vec![0.0; grid.len()];
            for &k in &g {
                for (d, r) in density.iter_mut().zip(&roots[k].density_q) {
                    *d += r;
                }
            }
            let mut members: Vec<usize> = g.iter().map(|&k| roots[k].branch_id).collect();
            members.sort_unstable();
            Realisation::from_density(members, density, grid)
        })
        .collect();
    realisations.sort_by_key(|r| r.members[0]);
    RealisationEnsemble::new(grid.clone(), realisations, width)
}

/// Expectation reading of the probabilistic sum: `Σ_r α_r ρ_r / N_r`.
pub fn assemble_density(ensemble: &RealisationEnsemble) -> Vec<f64> {
    let mut out = vec![0.0; ensemble.grid.len()];
    for (r, real) in ensemble.realisations.iter().enumerate() {
        let (num, den) = ensemble.alpha(r);
        let scale = num as f64 / (den as f64 * real.n_r() as f64);
        for (o, d) in out.iter_mut().zip(&real.density) {
            *o += scale * d;
        }
    }
    out
}
