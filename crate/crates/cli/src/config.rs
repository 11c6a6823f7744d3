//! Problem configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use epdyn_core::effective::{PartitionSelector, ScanConfig};
use epdyn_core::existence::{assemble_existence, build_kinetic, ExistenceProblem};
use epdyn_core::grid::{Boundary, Grid, PhysicalConstants};
use epdyn_core::operator::{CMatrix, HermitianOperator};
use epdyn_core::profiles::ProfileSpec;
use epdyn_core::universal::HamiltonianSpec;
use epdyn_core::{Error, Result};
use num_complex::Complex64;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub ep: EpConfig,
    #[serde(default)]
    pub hop: Option<HopSection>,
    #[serde(default)]
    pub evolve: Option<EvolveConfig>,
    #[serde(default)]
    pub outputs: OutputNames,
}

/// `hbar` or `h` (not both), plus `c` and `mass`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub hbar: Option<f64>,
    pub h: Option<f64>,
    pub c: Option<f64>,
    pub mass: Option<f64>,
}

impl ConstantsConfig {
    pub fn resolve(&self) -> Result<PhysicalConstants> {
        let c = self.c.unwrap_or(1.0);
        let mass = self.mass.unwrap_or(1.0);
        match (self.hbar, self.h) {
            (Some(_), Some(_)) => Err(Error::Config("constants: give either hbar or h, not both".into())),
            (None, Some(h)) => PhysicalConstants::from_h(h, c, mass),
            (hbar, None) => PhysicalConstants::new(hbar.unwrap_or(1.0), c, mass),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.n, self.min, self.max)
    }
}

/// A real function on a grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PotentialConfig {
    Profile(ProfileSpec),
    Values {
        values: Vec<f64>,
    },
    /// JSON array of numbers, relative to the config file.
    File {
        file: PathBuf,
    },
}

impl PotentialConfig {
    pub fn sample(&self, grid: &Grid, base: &Path) -> Result<Vec<f64>> {
        let values = match self {
            PotentialConfig::Profile(p) => p.sample(grid)?,
            PotentialConfig::Values { values } => values.clone(),
            PotentialConfig::File { file } => {
                let path = base.join(file);
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read potential file {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("potential file {}: {e}", path.display())))?
            }
        };
        if values.len() != grid.len() {
            return Err(Error::Dimension { context: "potential values", expected: grid.len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("potential values must be finite".into()));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub real: Vec<Vec<f64>>,
    #[serde(default)]
    pub imag: Option<Vec<Vec<f64>>>,
}

impl MatrixConfig {
    pub fn build(&self) -> Result<HermitianOperator> {
        let n = self.real.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in self.real.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension { context: "matrix row", expected: n, found: row.len() });
            }
            for (j, v) in row.iter().enumerate() {
                m[(i, j)].re = *v;
            }
        }
        if let Some(imag) = &self.imag {
            if imag.len() != n {
                return Err(Error::Dimension { context: "imaginary part rows", expected: n, found: imag.len() });
            }
            for (i, row) in imag.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Dimension { context: "imaginary part row", expected: n, found: row.len() });
                }
                for (j, v) in row.iter().enumerate() {
                    m[(i, j)].im = *v;
                }
            }
        }
        if m.iter().any(|z: &Complex64| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        HermitianOperator::new(m)
    }
}

/// One block of a coupled problem.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockConfig {
    /// Finite-difference kinetic operator plus an optional diagonal potential.
    Kinetic {
        #[serde(default)]
        potential: Option<PotentialConfig>,
        /// Overrides the global mass for this degree of freedom.
        #[serde(default)]
        mass: Option<f64>,
    },
    Matrix(MatrixConfig),
}

impl BlockConfig {
    fn build(&self, grid: &Grid, constants: &PhysicalConstants, boundary: Boundary, base: &Path) -> Result<HermitianOperator> {
        match self {
            BlockConfig::Kinetic { potential, mass } => {
                let k = match mass {
                    Some(m) => PhysicalConstants::new(constants.hbar(), constants.c(), *m)?,
                    None => *constants,
                };
                let mut m = build_kinetic(grid, &k, boundary).matrix().clone();
                if let Some(p) = potential {
                    for (i, v) in p.sample(grid, base)?.into_iter().enumerate() {
                        m[(i, i)].re += v;
                    }
                }
                HermitianOperator::new(m)
            }
            BlockConfig::Matrix(mc) => mc.build(),
        }
    }
}

/// `V(q_i, ξ_j)` as a table or as a product `f(q)·g(ξ)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CouplingConfig {
    Values { values: Vec<Vec<f64>> },
    Product { q: PotentialConfig, xi: PotentialConfig },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum SystemConfig {
    /// A bare Hermitian matrix, one ξ channel.
    Matrix(MatrixConfig),
    /// Random Hermitian blocks with dense coupling.
    Random { n_q: usize, n_xi: usize, seed: u64 },
    /// Single-particle operator on a grid.
    Schrodinger {
        grid: GridConfig,
        #[serde(default)]
        potential: Option<PotentialConfig>,
        #[serde(default)]
        boundary: Boundary,
    },
    Coupled {
        grid_q: GridConfig,
        #[serde(default)]
        grid_xi: Option<GridConfig>,
        #[serde(default)]
        boundary: Boundary,
        h_e: BlockConfig,
        h_g: BlockConfig,
        coupling: CouplingConfig,
    },
}

impl SystemConfig {
    pub fn build(&self, constants: &PhysicalConstants, base: &Path) -> Result<ExistenceProblem> {
        match self {
            SystemConfig::Matrix(m) => ExistenceProblem::from_matrix(m.build()?),
            SystemConfig::Random { n_q, n_xi, seed } => {
                if *n_q < 1 || *n_xi < 1 {
                    return Err(Error::Config("random system needs n_q, n_xi ≥ 1".into()));
                }
                ExistenceProblem::random(*n_q, *n_xi, *seed)
            }
            SystemConfig::Schrodinger { grid, potential, boundary } => {
                let grid = grid.build()?;
                let block = BlockConfig::Kinetic { potential: potential.clone(), mass: None };
                let h = block.build(&grid, constants, *boundary, base)?;
                let coupling = vec![vec![0.0]; grid.len()];
                assemble_existence(grid, None, h, HermitianOperator::zeros(1), &coupling, *constants)
            }
            SystemConfig::Coupled { grid_q, grid_xi, boundary, h_e, h_g, coupling } => {
                let gq = grid_q.build()?;
                let gx = grid_xi.map(|g| g.build()).transpose()?;
                let he = h_e.build(&gq, constants, *boundary, base)?;
                let hg = match &gx {
                    Some(g) => h_g.build(g, constants, *boundary, base)?,
                    None => match h_g {
                        BlockConfig::Matrix(m) => m.build()?,
                        BlockConfig::Kinetic { .. } => {
                            return Err(Error::Config("a kinetic h_g needs grid_xi".into()));
                        }
                    },
                };
                let table = match coupling {
                    CouplingConfig::Values { values } => values.clone(),
                    CouplingConfig::Product { q, xi } => {
                        let Some(g) = &gx else {
                            return Err(Error::Config("a product coupling needs grid_xi".into()));
                        };
                        let fq = q.sample(&gq, base)?;
                        let fx = xi.sample(g, base)?;
                        fq.iter().map(|a| fx.iter().map(|b| a * b).collect()).collect()
                    }
                };
                assemble_existence(gq, gx, he, hg, &table, *constants)
            }
        }
    }

    /// The single-particle grid, potential and boundary, when the system has them.
    pub fn single_particle(&self, base: &Path) -> Result<Option<(Grid, Vec<f64>, Boundary)>> {
        match self {
            SystemConfig::Schrodinger { grid, potential, boundary } => {
                let grid = grid.build()?;
                let v = match potential {
                    Some(p) => p.sample(&grid, base)?,
                    None => vec![0.0; grid.len()],
                };
                Ok(Some((grid, v, *boundary)))
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PartitionConfig {
    XiChannel { xi_channel: usize },
    Indices { indices: Vec<usize> },
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig::XiChannel { xi_channel: 0 }
    }
}

impl PartitionConfig {
    pub fn selector(&self) -> PartitionSelector {
        match self {
            PartitionConfig::XiChannel { xi_channel } => PartitionSelector::XiChannel(*xi_channel),
            PartitionConfig::Indices { indices } => PartitionSelector::Indices(indices.clone()),
        }
    }
}

/// Fields left out fall back to the covering scan of the full operator.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanOverrides {
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub scan_points: Option<usize>,
    pub tol: Option<f64>,
}

impl ScanOverrides {
    pub fn apply(&self, base: ScanConfig) -> ScanConfig {
        ScanConfig {
            e_min: self.e_min.unwrap_or(base.e_min),
            e_max: self.e_max.unwrap_or(base.e_max),
            scan_points: self.scan_points.unwrap_or(base.scan_points),
            tol: self.tol.unwrap_or(base.tol),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpConfig {
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub scan: ScanOverrides,
    #[serde(default)]
    pub cluster_width: f64,
    /// Relative to the operator norm.
    #[serde(default)]
    pub pole_guard: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticRealisation {
    pub n_r: u64,
    pub centroid: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopSection {
    #[serde(default = "default_regime")]
    pub regime: String,
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default)]
    pub localization_threshold: Option<f64>,
    #[serde(default)]
    pub trajectory_id: u64,
    /// Gaussian realisations on `grid`; without them the realisations come
    /// from the system's roots.
    #[serde(default)]
    pub realisations: Option<Vec<SyntheticRealisation>>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
}

fn default_regime() -> String {
    "chaos".into()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Normalized `exp(−(x−x0)²/4σ²)·exp(i·k0·x)`.
    Gaussian {
        x0: f64,
        sigma: f64,
        #[serde(default)]
        k0: f64,
    },
    /// Stationary state of the linear operator, counted from the ground state.
    Eigenstate { index: usize },
    Values {
        re: Vec<f64>,
        #[serde(default)]
        im: Option<Vec<f64>>,
    },
    Profile(ProfileSpec),
    Uniform { value: f64 },
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    /// Registered evolution scheme, `linear` or `universal` by default.
    #[serde(default = "default_scheme")]
    pub scheme: String,
    /// Falls back to the grid of a `schrodinger` system.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub boundary: Option<Boundary>,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    /// Family member for the universal scheme.
    #[serde(default)]
    pub spec: Option<HamiltonianSpec>,
    pub initial: InitialConfig,
    pub dt: f64,
    pub steps: usize,
    /// Write a frame every this many steps; the final step is always written.
    #[serde(default)]
    pub frame_every: Option<usize>,
    /// Accuracy budget (linear) or stability budget (universal).
    #[serde(default)]
    pub budget: Option<f64>,
    /// Also run the other linear integrator and report the deviation.
    #[serde(default)]
    pub cross_check: bool,
}

fn default_scheme() -> String {
    "linear".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputNames {
    #[serde(default = "names::spectrum")]
    pub spectrum: String,
    #[serde(default = "names::roots")]
    pub roots: String,
    #[serde(default = "names::trajectory")]
    pub trajectory: String,
    #[serde(default = "names::stats")]
    pub stats: String,
    #[serde(default = "names::frames")]
    pub frames: String,
    #[serde(default = "names::report")]
    pub report: String,
}

mod names {
    pub fn spectrum() -> String {
        "spectrum.csv".into()
    }
    pub fn roots() -> String {
        "roots.csv".into()
    }
    pub fn trajectory() -> String {
        "trajectory.csv".into()
    }
    pub fn stats() -> String {
        "stats.json".into()
    }
    pub fn frames() -> String {
        "frames.csv".into()
    }
    pub fn report() -> String {
        "evolve.json".into()
    }
}

impl Default for OutputNames {
    fn default() -> Self {
        Self {
            spectrum: names::spectrum(),
            roots: names::roots(),
            trajectory: names::trajectory(),
            stats: names::stats(),
            frames: names::frames(),
            report: names::report(),
        }
    }
}

/// A parsed config with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ProblemConfig,
    pub base_dir: PathBuf,
}

/// Parse failure carrying the JSON path of the offending value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "at `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for ParseError {}

pub fn parse_config(text: &str) -> std::result::Result<ProblemConfig, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ParseError { path: e.path().to_string(), message: e.inner().to_string() })
}

impl LoadedConfig {
    pub fn from_str(text: &str, base_dir: PathBuf) -> std::result::Result<Self, ParseError> {
        Ok(Self { config: parse_config(text)?, base_dir })
    }

    pub fn constants(&self) -> Result<PhysicalConstants> {
        self.config.constants.resolve()
    }

    pub fn problem(&self) -> Result<ExistenceProblem> {
        let Some(system) = &self.config.system else {
            return Err(Error::Config("config has no `system` section".into()));
        };
        system.build(&self.constants()?, &self.base_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_name_the_path() {
        let err = parse_config(r#"{"system": {"kind": "random", "n_q": "three", "n_xi": 2, "seed": 1}}"#).unwrap_err();
        // Tagged variants buffer their content, so the path stops at the enum.
        assert_eq!(err.path, "system");
        assert!(err.message.contains("expected usize"), "{err}");
        let err = parse_config(r#"{"ep": {"scan": {"e_min": "low"}}}"#).unwrap_err();
        assert_eq!(err.path, "ep.scan.e_min");
        let err = parse_config(r#"{"ep": {"cluster_width": 0.1, "widht": 2}}"#).unwrap_err();
        assert!(err.message.contains("widht"), "{err}");
        let err = parse_config(r#"{"system": {"kind": "matrix", "real": [[1, 0], [0, 1]], "extra": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn coupled_product_system() {
        let cfg = parse_config(
            r#"{"system": {"kind": "coupled",
                "grid_q": {"n": 5, "min": -1, "max": 1},
                "grid_xi": {"n": 3, "min": -1, "max": 1},
                "h_e": {"kind": "kinetic", "potential": {"profile": "harmonic"}},
                "h_g": {"kind": "kinetic", "mass": 2.0},
                "coupling": {"q": {"profile": "linear"}, "xi": {"values": [1, 0, -1]}}}}"#,
        )
        .unwrap();
        let loaded = LoadedConfig { config: cfg, base_dir: PathBuf::from(".") };
        let p = loaded.problem().unwrap();
        assert_eq!((p.n_q(), p.n_xi()), (5, 3));
        assert_eq!(p.coupling(0, 0), -1.0);
        assert_eq!(p.coupling(4, 2), -1.0);
    }

    #[test]
    fn constants_accept_h_or_hbar() {
        let c = ConstantsConfig { h: Some(2.0 * std::f64::consts::PI), ..Default::default() }.resolve().unwrap();
        assert!((c.hbar() - 1.0).abs() < 1e-15);
        assert!(ConstantsConfig { h: Some(1.0), hbar: Some(1.0), ..Default::default() }.resolve().is_err());
    }
}
