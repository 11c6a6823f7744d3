//! Named built-in coefficient profiles (potentials and PDE coefficients).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::registry::Registry;

pub type Params = BTreeMap<String, f64>;

/// A real static profile `f(x)` with named parameters.
pub trait Profile: Send + Sync {
    fn name(&self) -> &'static str;

    /// Parameter names with their defaults.
    fn defaults(&self) -> &'static [(&'static str, f64)];

    fn eval(&self, x: f64, p: &ResolvedParams) -> f64;
}

/// Parameters merged over a profile's defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedParams(BTreeMap<&'static str, f64>);

impl ResolvedParams {
    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }
}

fn resolve(profile: &dyn Profile, params: &Params) -> Result<ResolvedParams> {
    let mut out: BTreeMap<&'static str, f64> = profile.defaults().iter().copied().collect();
    for (k, v) in params {
        let Some(slot) = profile.defaults().iter().find(|(name, _)| name == k).map(|(name, _)| *name) else {
            let known: Vec<&str> = profile.defaults().iter().map(|(n, _)| *n).collect();
            return Err(Error::Config(format!(
                "profile '{}' has no parameter '{k}' (known: {})",
                profile.name(),
                known.join(", ")
            )));
        };
        if !v.is_finite() {
            return Err(Error::Config(format!("profile parameter '{k}' must be finite")));
        }
        out.insert(slot, *v);
    }
    Ok(ResolvedParams(out))
}

struct Constant;
impl Profile for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }
    fn defaults(&self) -> &'static [(&'static str, f64)] {
        &[("value", 0.0)]
    }
    fn eval(&self, _x: f64, p: &ResolvedParams) -> f64 {
        p.get("value")
    }
}

/// `½·k·(x − x0)²`
struct Harmonic;
impl Profile for Harmonic {
    fn name(&self) -> &'static str {
        "harmonic"
    }
    fn defaults(&self) -> &'static [(&'static str, f64)] {
        &[("k", 1.0), ("x0", 0.0)]
    }
    fn eval(&self, x: f64, p: &ResolvedParams) -> f64 {
        0.5 * p.get("k") * (x - p.get("x0")).powi(2)
    }
}

/// `amplitude·exp(−(x − x0)²/(2·width²))`
struct Gaussian;
impl Profile for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn defaults(&self) -> &'static [(&'static str, f64)] {
        &[("amplitude", -1.0), ("x0", 0.0), ("width", 1.0)]
    }
    fn eval(&self, x: f64, p: &ResolvedParams) -> f64 {
        let w = p.get("width");
        p.get("amplitude") * (-(x - p.get("x0")).powi(2) / (2.0 * w * w)).exp()
    }
}

/// Zero on `[left, right]`, `height` outside.
struct BoxWell;
impl Profile for BoxWell {
    fn name(&self) -> &'static str {
        "box"
    }
    fn defaults(&self) -> &'static [(&'static str, f64)] {
        &[("height", 0.0), ("left", f64::NEG_INFINITY), ("right", f64::INFINITY)]
    }
    fn eval(&self, x: f64, p: &ResolvedParams) -> f64 {
        if x >= p.get("left") && x <= p.get("right") {
            0.0
        } else {
            p.get("height")
        }
    }
}

/// `g·x`
struct Linear;
impl Profile for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn defaults(&self) -> &'static [(&'static str, f64)] {
        &[("g", 1.0)]
    }
    fn eval(&self, x: f64, p: &ResolvedParams) -> f64 {
        p.get("g") * x
    }
}

pub fn profiles() -> Registry<dyn Profile> {
    let mut reg: Registry<dyn Profile> = Registry::new("profile");
    let all: [Arc<dyn Profile>; 5] = [Arc::new(Constant), Arc::new(Harmonic), Arc::new(Gaussian), Arc::new(BoxWell), Arc::new(Linear)];
    for p in all {
        reg.register(p.name(), p);
    }
    reg
}

/// A named profile with parameter overrides, as written in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub profile: String,
    #[serde(default)]
    pub params: Params,
}

impl ProfileSpec {
    pub fn new(profile: &str, params: &[(&str, f64)]) -> Self {
        Self { profile: profile.to_string(), params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }

    /// Evaluates the profile at every grid point.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let profile = profiles().get(&self.profile)?;
        let params = resolve(profile.as_ref(), &self.params)?;
        Ok(grid.points().map(|x| profile.eval(x, &params)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_evaluate() {
        let g = Grid::new(5, -2.0, 2.0).unwrap();
        assert_eq!(ProfileSpec::new("harmonic", &[("k", 2.0)]).sample(&g).unwrap(), vec![4.0, 1.0, 0.0, 1.0, 4.0]);
        assert_eq!(
            ProfileSpec::new("box", &[("height", 9.0), ("left", -1.0), ("right", 1.0)]).sample(&g).unwrap(),
            vec![9.0, 0.0, 0.0, 0.0, 9.0]
        );
        assert_eq!(ProfileSpec::new("linear", &[("g", 0.5)]).sample(&g).unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let gauss = ProfileSpec::new("gaussian", &[]).sample(&g).unwrap();
        assert_eq!(gauss[2], -1.0);
        assert_eq!(ProfileSpec::new("constant", &[("value", 3.0)]).sample(&g).unwrap(), vec![3.0; 5]);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let g = Grid::new(3, 0.0, 1.0).unwrap();
        assert!(matches!(ProfileSpec::new("morse", &[]).sample(&g), Err(Error::Config(_))));
        let err = ProfileSpec::new("harmonic", &[("omega", 1.0)]).sample(&g).unwrap_err().to_string();
        assert!(err.contains("omega") && err.contains("k, x0"), "{err}");
    }
}
