use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::Site;
use crate::meanfield::{BlochPair, ClassifyOptions};
use crate::models::ModelParams;
use crate::ode::Tolerances;
use crate::spin_ops::SpinLength;
use crate::wigner::GridSpec;

/// One swept coordinate: a single value or `steps` evenly spaced points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Axis {
    Range { min: f64, max: f64, steps: usize },
    Value { value: f64 },
}

impl Axis {
    pub fn fixed(value: f64) -> Self {
        Axis::Value { value }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        match *self {
            Axis::Value { value } if !value.is_finite() => Err(Error::Config(format!("{name}: value must be finite"))),
            Axis::Range { min, max, .. } if !min.is_finite() || !max.is_finite() => {
                Err(Error::Config(format!("{name}: range must be finite")))
            }
            Axis::Range { steps: 0, .. } => Err(Error::Config(format!("{name}: steps must be at least 1"))),
            _ => Ok(()),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        match *self {
            Axis::Value { value } => vec![value],
            Axis::Range { min, steps: 1, .. } => vec![min],
            Axis::Range { min, max, steps } => (0..steps)
                .map(|k| {
                    // hit the end point exactly
                    if k + 1 == steps {
                        max
                    } else {
                        min + (max - min) * k as f64 / (steps - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default = "half")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub spin: f64,
    /// Used by point commands (`wigner`, `mf-trajectory`).
    #[serde(default)]
    pub j: f64,
    #[serde(default)]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { g: 1.0, gamma: 0.5, spin: 1.0, j: 0.0, lambda: 0.0 }
    }
}

impl ModelSection {
    pub fn spin_length(&self) -> Result<SpinLength> {
        SpinLength::new(self.spin).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params_at(&self, j: f64, lambda: f64) -> Result<ModelParams> {
        ModelParams::new(self.g, j, lambda, self.gamma, self.spin_length()?).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.params_at(self.j, self.lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub j: Axis,
    pub lambda: Axis,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { j: Axis::fixed(0.0), lambda: Axis::fixed(0.0) }
    }
}

impl GridSection {
    /// Grid points, outer loop over `lambda`, inner over `J`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let js = self.j.points();
        let mut out = Vec::new();
        for l in self.lambda.points() {
            for &j in &js {
                out.push((j, l));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldSection {
    pub seeds: usize,
    pub t_transient: f64,
    pub t_window: f64,
    pub t_lyapunov: f64,
    pub t_lyapunov_discard: f64,
    pub window_seeds: usize,
    pub lyapunov_seeds: usize,
    pub capture_radius: f64,
    pub lyapunov_tol: f64,
    pub recurrence_tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub step_budget: usize,
}

impl Default for MeanFieldSection {
    fn default() -> Self {
        let o = ClassifyOptions::default();
        MeanFieldSection {
            seeds: o.n_seeds,
            t_transient: o.t_transient,
            t_window: o.t_window,
            t_lyapunov: o.t_lyapunov,
            t_lyapunov_discard: o.t_lyapunov_discard,
            window_seeds: o.window_seeds,
            lyapunov_seeds: o.lyapunov_seeds,
            capture_radius: o.capture_radius,
            lyapunov_tol: o.lyapunov_tol,
            recurrence_tol: o.recurrence_tol,
            rtol: o.tol.rtol,
            atol: o.tol.atol,
            step_budget: o.step_budget,
        }
    }
}

impl MeanFieldSection {
    pub fn options(&self) -> Result<ClassifyOptions> {
        let times = [self.t_transient, self.t_window, self.t_lyapunov];
        if times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::Config("meanfield times must be positive and finite".into()));
        }
        if !(self.t_lyapunov_discard >= 0.0 && self.t_lyapunov_discard.is_finite()) {
            return Err(Error::Config("meanfield.t_lyapunov_discard must be non-negative".into()));
        }
        if self.seeds == 0 || self.window_seeds == 0 || self.lyapunov_seeds == 0 {
            return Err(Error::Config("meanfield seed counts must be at least 1".into()));
        }
        if !(self.capture_radius >= 0.0 && self.capture_radius.is_finite()) {
            return Err(Error::Config("meanfield.capture_radius must be non-negative".into()));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("meanfield tolerances must be positive".into()));
        }
        Ok(ClassifyOptions {
            n_seeds: self.seeds,
            t_transient: self.t_transient,
            t_window: self.t_window,
            t_lyapunov: self.t_lyapunov,
            t_lyapunov_discard: self.t_lyapunov_discard,
            window_seeds: self.window_seeds,
            lyapunov_seeds: self.lyapunov_seeds,
            capture_radius: self.capture_radius,
            lyapunov_tol: self.lyapunov_tol,
            recurrence_tol: self.recurrence_tol,
            tol: Tolerances { rtol: self.rtol, atol: self.atol },
            step_budget: self.step_budget,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactSection {
    /// Largest spin accepted by exact commands.
    pub max_spin: f64,
}

impl Default for ExactSection {
    fn default() -> Self {
        ExactSection { max_spin: 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSection {
    #[serde(default = "site_b")]
    pub site: Site,
    #[serde(default = "n_theta")]
    pub n_theta: usize,
    #[serde(default = "n_phi")]
    pub n_phi: usize,
}

fn site_b() -> Site {
    Site::B
}

fn n_theta() -> usize {
    GridSpec::default().n_theta
}

fn n_phi() -> usize {
    GridSpec::default().n_phi
}

impl Default for WignerSection {
    fn default() -> Self {
        WignerSection { site: Site::B, n_theta: n_theta(), n_phi: n_phi() }
    }
}

impl WignerSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec { n_theta: self.n_theta, n_phi: self.n_phi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Initial `[XA, YA, ZA, XB, YB, ZB]`.
    pub state0: [f64; 6],
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
}

fn default_tol() -> f64 {
    1e-9
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection { state0: BlochPair::NORMAL.to_array(), t_final: 100.0, dt: 0.1, rtol: 1e-9, atol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundariesSection {
    pub j: Axis,
    pub lambda: Axis,
}

impl Default for BoundariesSection {
    fn default() -> Self {
        BoundariesSection {
            j: Axis::Range { min: -2.0, max: 2.0, steps: 41 },
            lambda: Axis::Range { min: 0.0, max: 1.0, steps: 41 },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

/// A run configuration. Every section has defaults; each command reads the
/// sections it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub meanfield: MeanFieldSection,
    pub exact: ExactSection,
    pub wigner: WignerSection,
    pub trajectory: TrajectorySection,
    pub boundaries: BoundariesSection,
    /// Not recorded in output metadata.
    #[serde(skip_serializing)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks everything that does not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.model.params()?;
        self.grid.j.validate("grid.j")?;
        self.grid.lambda.validate("grid.lambda")?;
        self.boundaries.j.validate("boundaries.j")?;
        self.boundaries.lambda.validate("boundaries.lambda")?;
        Ok(())
    }

    /// Exact commands refuse spins above `exact.max_spin`.
    pub fn check_exact_spin(&self) -> Result<SpinLength> {
        let s = self.model.spin_length()?;
        if s.value() > self.exact.max_spin {
            return Err(Error::Config(format!(
                "spin {s} exceeds exact.max_spin = {}",
                self.exact.max_spin
            )));
        }
        Ok(s)
    }

    /// Single-line JSON record of the configuration for output metadata.
    pub fn metadata_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_points() {
        assert_eq!(Axis::fixed(0.3).points(), vec![0.3]);
        let a = Axis::Range { min: -2.0, max: 2.0, steps: 41 };
        let p = a.points();
        assert_eq!(p.len(), 41);
        assert_eq!(p[0], -2.0);
        assert_eq!(p[40], 2.0);
        assert!((p[20]).abs() < 1e-15);
        assert_eq!(Axis::Range { min: 1.0, max: 5.0, steps: 1 }.points(), vec![1.0]);
        assert!(Axis::Range { min: 0.0, max: 1.0, steps: 0 }.validate("x").is_err());
        assert!(Axis::Value { value: f64::NAN }.validate("x").is_err());
    }

    #[test]
    fn parses_minimal_and_full_configs() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());

        let cfg = RunConfig::from_toml_str(
            r#"
            [model]
            gamma = 0.5
            spin = 1.5

            [grid]
            j = { min = -2.0, max = 2.0, steps = 5 }
            lambda = { value = 0.1 }

            [meanfield]
            seeds = 16

            [output]
            path = "out.csv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.model.spin_length().unwrap().twice(), 3);
        assert_eq!(cfg.grid.points().len(), 5);
        assert_eq!(cfg.meanfield.seeds, 16);
        assert_eq!(cfg.meanfield.t_window, MeanFieldSection::default().t_window);
        assert!(!cfg.metadata_json().contains("out.csv"));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml_str("[model]\nspin = 0.7").unwrap().validate().is_err());
        assert!(RunConfig::from_toml_str("[model]\ngamma = -1.0").unwrap().validate().is_err());
        assert!(RunConfig::from_toml_str("[modle]\ngamma = 1.0").is_err());
        assert!(RunConfig::from_toml_str("[grid]\nj = { min = 0.0 }\nlambda = { value = 0.0 }").is_err());
        let cfg = RunConfig::from_toml_str("[model]\nspin = 5").unwrap();
        assert!(cfg.check_exact_spin().is_err());
    }

    #[test]
    fn grid_order_is_lambda_major() {
        let g = GridSection {
            j: Axis::Range { min: 0.0, max: 1.0, steps: 2 },
            lambda: Axis::Range { min: 0.0, max: 1.0, steps: 2 },
        };
        assert_eq!(g.points(), vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
    }
}
