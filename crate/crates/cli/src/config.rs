//! Run configuration, read from a TOML file.
//!
//! ```toml
//! [problem]
//! preset = "radial3d"     # radial3d | radial2d | zero_kernel | weighted
//! dimension = 3
//! r1 = 1.0
//! r2 = 2.0
//!
//! [coefficients]
//! family = "radial_abcd"  # radial_abcd | laplacian | polynomial_series
//! a = 1.0                 # a number, or samples on the n_r grid
//! b = 0.0
//! c = 0.0
//! d = 0.0
//! weights = []            # polynomial_series only
//! asymmetry = 0.0
//!
//! [measurement]
//! m = 0.5                 # lower bound for |D_r u(0, .)|
//!
//! [grids]
//! n_r = 32                # radial cells; also the time steps of the presets
//! n_phi = 16
//! n_theta = 8
//!
//! [solver]
//! method = "time_march"   # time_march | picard
//! tol = 1e-10
//! max_iter = 60
//! error_tolerance = 0.05  # identify: bound on the error against k_true.csv
//! seed = 7                # verify
//!
//! [io]
//! input = "data"          # identify: directory with u.csv, f_tilde.csv, g.csv, lambda.csv
//! out = "out"
//! ```
//!
//! Every key is optional. Relative paths resolve against the config file.

use std::path::{Path, PathBuf};

use radkernel::coefficients::{CoefficientSpec, Family, PolynomialSeries, Profile, Radial, RadialAbcd, Spatial};
use radkernel::grid::{Dimension, RadialGrid};
use radkernel::inverse_radial::Method;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub grids: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub io: IoSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub preset: String,
    pub dimension: u8,
    pub r1: f64,
    pub r2: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { preset: "radial3d".into(), dimension: 3, r1: 1.0, r2: 2.0 }
    }
}

/// A constant or samples on the radial grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProfileValue {
    Constant(f64),
    Samples(Vec<f64>),
}

impl ProfileValue {
    fn radial(&self, grid: &RadialGrid) -> Result<Radial, CliError> {
        Ok(match self {
            ProfileValue::Constant(c) => Radial::Constant(*c),
            ProfileValue::Samples(v) => Radial::Samples(Profile::new(grid.clone(), v.clone())?),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientSection {
    pub family: String,
    pub a: ProfileValue,
    pub b: ProfileValue,
    pub c: f64,
    pub d: ProfileValue,
    pub weights: Vec<f64>,
    pub asymmetry: f64,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        Self {
            family: "laplacian".into(),
            a: ProfileValue::Constant(1.0),
            b: ProfileValue::Constant(0.0),
            c: 0.0,
            d: ProfileValue::Constant(0.0),
            weights: Vec::new(),
            asymmetry: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementSection {
    pub m: f64,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self { m: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_r: usize,
    pub n_phi: usize,
    pub n_theta: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_r: 32, n_phi: 16, n_theta: 8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub method: String,
    pub tol: f64,
    pub max_iter: usize,
    pub error_tolerance: f64,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { method: "time_march".into(), tol: 1e-10, max_iter: 60, error_tolerance: 0.05, seed: 7 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub const MIN_CELLS: usize = 4;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.io.input, &mut cfg.io.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dimension()?;
        parse_method(&self.solver.method)?;
        if self.grids.n_r < MIN_CELLS {
            return Err(CliError::Config(format!("grids.n_r must be at least {MIN_CELLS}, got {}", self.grids.n_r)));
        }
        if !(self.problem.r1 > 0.0 && self.problem.r2 > self.problem.r1) {
            return Err(CliError::Config(format!(
                "need 0 < r1 < r2, got r1 = {}, r2 = {}",
                self.problem.r1, self.problem.r2
            )));
        }
        if let Some(dir) = &self.io.input {
            if !dir.is_dir() {
                return Err(CliError::Config(format!("input directory {} does not exist", dir.display())));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> Result<Dimension, CliError> {
        match self.problem.dimension {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            d => Err(CliError::Config(format!("problem.dimension must be 2 or 3, got {d}"))),
        }
    }

    pub fn method(&self) -> Result<Method, CliError> {
        parse_method(&self.solver.method)
    }

    pub fn radial_grid(&self) -> Result<RadialGrid, CliError> {
        Ok(RadialGrid::with_cells(self.problem.r1, self.problem.r2, self.grids.n_r)?)
    }

    pub fn coefficient_spec(&self) -> Result<CoefficientSpec, CliError> {
        let dim = self.dimension()?;
        let c = &self.coefficients;
        let grid = self.radial_grid()?;
        let family = match c.family.as_str() {
            "laplacian" => Family::RadialAbcd(RadialAbcd::isotropic(Radial::Constant(1.0))),
            "radial_abcd" => Family::RadialAbcd(RadialAbcd {
                a: c.a.radial(&grid)?,
                b: c.b.radial(&grid)?,
                c: Spatial::Constant(c.c),
                d: c.d.radial(&grid)?,
            }),
            "polynomial_series" => Family::PolynomialSeries(PolynomialSeries {
                weights: c.weights.iter().map(|&w| Spatial::Constant(w)).collect(),
            }),
            other => return Err(CliError::Config(format!("unknown coefficient family '{other}'"))),
        };
        let mut spec = CoefficientSpec::new(dim, family);
        spec.asymmetry = c.asymmetry;
        Ok(spec)
    }
}

pub fn parse_method(s: &str) -> Result<Method, CliError> {
    match s {
        "time_march" => Ok(Method::TimeMarch),
        "picard" => Ok(Method::Picard),
        other => Err(CliError::Config(format!("unknown method '{other}' (time_march | picard)"))),
    }
}

/// Parses `n_r=16,32,64`.
pub fn parse_sweep(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Config(format!("sweep must look like n_r=16,32,64, got '{s}'"));
    let list = s.strip_prefix("n_r=").ok_or_else(bad)?;
    let ns: Vec<usize> = list.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    if ns.is_empty() || ns.iter().any(|&n| n < MIN_CELLS) {
        return Err(CliError::Config(format!("sweep sizes must be at least {MIN_CELLS}")));
    }
    Ok(ns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grids.n_r, 32);
        assert_eq!(cfg.problem.preset, "radial3d");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[grids]\nnr = 3").is_err());
    }

    #[test]
    fn profiles_accept_numbers_and_lists() {
        let cfg: RunConfig = toml::from_str(
            "[coefficients]\nfamily = \"radial_abcd\"\na = [1.0, 1.1, 1.2, 1.3, 1.4]\nd = 0.5\n[grids]\nn_r = 4",
        )
        .unwrap();
        let spec = cfg.coefficient_spec().unwrap();
        let abcd = spec.family.abcd().unwrap();
        assert!((abcd.trace(1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("n_r=16,32,64").unwrap(), vec![16, 32, 64]);
        assert!(parse_sweep("16,32").is_err());
        assert!(parse_sweep("n_r=2").is_err());
    }

    #[test]
    fn bad_dimension() {
        let cfg: RunConfig = toml::from_str("[problem]\ndimension = 4").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
