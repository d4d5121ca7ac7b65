//! TOML experiment configuration. Unknown keys are rejected; everything that
//! has a default is filled in before the run so the report can echo it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nsa_core::discretize::Grid;
use nsa_core::linalg::{CMatrix, RMatrix, C64};
use nsa_core::model::QuadraticModel;
use nsa_core::potential::{PotentialSpec, PotentialTerm};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ModelSpectrum,
    CheckPotential,
    Eigs,
    ResolventMap,
    SemigroupDecay,
    VerifyAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "kebab-case")]
pub enum TermConfig {
    Monomial {
        coeff: [f64; 2],
        powers: Vec<u32>,
    },
    Damped {
        coeff: [f64; 2],
        powers: Vec<u32>,
        damping: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub dim: usize,
    #[serde(default)]
    pub a_offset: Option<Vec<f64>>,
    /// Rows of `B` in `A(x) = a + Bx`.
    #[serde(default)]
    pub a_jacobian: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    /// Candidate zeros of `V`.
    #[serde(default)]
    pub minima: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    /// Rows of `A`.
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    /// Rows of `V`, entries `[re, im]`.
    pub v: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: Option<f64>,
    #[serde(rename = "N")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub radius_factor: Option<f64>,
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ResolventConfig {
    /// Real-part range in units of `h`.
    pub re: Option<[f64; 2]>,
    /// Imaginary-part range in units of `h`.
    pub im: Option<[f64; 2]>,
    pub re_samples: Option<usize>,
    pub im_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorChoice {
    Krylov,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SemigroupConfig {
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub count: Option<usize>,
    pub propagator: Option<PropagatorChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub potential: Option<PotentialConfig>,
    pub model: Option<ModelConfig>,
    pub grid: Option<GridConfig>,
    pub h: Option<Vec<f64>>,
    pub window: Option<WindowConfig>,
    pub contour: Option<ContourConfig>,
    pub resolvent: Option<ResolventConfig>,
    pub semigroup: Option<SemigroupConfig>,
}

pub const DEFAULT_SEED: u64 = 0;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Checks the sections `kind` needs and fills in defaults.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        self.seed.get_or_insert(DEFAULT_SEED);
        let needs_potential = matches!(
            self.kind,
            Kind::CheckPotential | Kind::Eigs | Kind::ResolventMap | Kind::SemigroupDecay
        );
        let needs_grid = matches!(self.kind, Kind::Eigs | Kind::ResolventMap | Kind::SemigroupDecay);
        if self.kind == Kind::ModelSpectrum {
            let m = self
                .model
                .as_mut()
                .ok_or_else(|| ConfigError::Invalid("kind = model-spectrum needs [model]".into()))?;
            m.a.get_or_insert_with(|| vec![vec![0.0; m.n]; m.n]);
            m.count.get_or_insert(8);
        }
        if needs_potential {
            let p = self
                .potential
                .as_mut()
                .ok_or_else(|| ConfigError::Invalid(format!("kind = {:?} needs [potential]", self.kind)))?;
            p.a_offset.get_or_insert_with(|| vec![0.0; p.dim]);
            p.a_jacobian.get_or_insert_with(|| vec![vec![0.0; p.dim]; p.dim]);
            if p.minima.is_empty() {
                return invalid("[potential] needs at least one entry in minima");
            }
        }
        if needs_grid {
            let g = self
                .grid
                .ok_or_else(|| ConfigError::Invalid("missing [grid]".into()))?;
            if g.half_width.is_none() {
                return invalid("missing grid.L");
            }
            if g.points.is_none() {
                return invalid("missing grid.N");
            }
            match &self.h {
                Some(h) if !h.is_empty() => {}
                _ => return invalid("missing h list"),
            }
            let w = self.window.get_or_insert(WindowConfig {
                c: None,
                a: None,
                delta: None,
            });
            w.c.get_or_insert(8.0);
            w.a.get_or_insert(2.0);
            w.delta.get_or_insert(0.1);
            let c = self.contour.get_or_insert(ContourConfig {
                radius_factor: None,
                nodes: None,
            });
            c.radius_factor.get_or_insert(0.5);
            c.nodes.get_or_insert(32);
        }
        if self.kind == Kind::ResolventMap {
            let r = self.resolvent.get_or_insert(ResolventConfig {
                re: None,
                im: None,
                re_samples: None,
                im_samples: None,
            });
            r.re.get_or_insert([2.0, 2.0]);
            r.im.get_or_insert([-5.0, 5.0]);
            r.re_samples.get_or_insert(1);
            r.im_samples.get_or_insert(21);
        }
        if self.kind == Kind::SemigroupDecay {
            let s = self.semigroup.get_or_insert(SemigroupConfig {
                t_start: None,
                t_end: None,
                count: None,
                propagator: None,
            });
            s.t_start.get_or_insert(0.5);
            s.t_end.get_or_insert(10.0);
            s.count.get_or_insert(8);
            s.propagator.get_or_insert(PropagatorChoice::Dense);
        }
        // build once so every structural problem surfaces before any work
        if needs_potential {
            self.potential_spec()?;
        }
        if needs_grid {
            self.grid()?;
        }
        if self.kind == Kind::ModelSpectrum {
            self.quadratic_model()?;
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn h_list(&self) -> &[f64] {
        self.h.as_deref().unwrap_or(&[])
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec, ConfigError> {
        let p = self
            .potential
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("missing [potential]".into()))?;
        let terms = p
            .terms
            .iter()
            .map(|t| match t {
                TermConfig::Monomial { coeff, powers } => PotentialTerm::Monomial {
                    coeff: C64::new(coeff[0], coeff[1]),
                    powers: powers.clone(),
                },
                TermConfig::Damped {
                    coeff,
                    powers,
                    damping,
                } => PotentialTerm::Damped {
                    coeff: C64::new(coeff[0], coeff[1]),
                    powers: powers.clone(),
                    damping: *damping,
                },
            })
            .collect();
        let b = rows_to_matrix(p.a_jacobian.as_deref().unwrap_or(&[]), p.dim, "a_jacobian")?;
        let offset = p.a_offset.clone().unwrap_or_else(|| vec![0.0; p.dim]);
        PotentialSpec::new(offset, b, terms).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn minima(&self) -> &[Vec<f64>] {
        self.potential
            .as_ref()
            .map(|p| p.minima.as_slice())
            .unwrap_or(&[])
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = self
            .grid
            .ok_or_else(|| ConfigError::Invalid("missing [grid]".into()))?;
        let dim = self.potential.as_ref().map(|p| p.dim).unwrap_or(1);
        Grid::new(dim, g.half_width.unwrap_or(0.0), g.points.unwrap_or(0))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn quadratic_model(&self) -> Result<QuadraticModel, ConfigError> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("missing [model]".into()))?;
        let a = rows_to_matrix(m.a.as_deref().unwrap_or(&[]), m.n, "model.a")?;
        if m.v.len() != m.n || m.v.iter().any(|r| r.len() != m.n) {
            return invalid(format!("model.v must be {n}x{n}", n = m.n));
        }
        let v = CMatrix::from_fn(m.n, m.n, |i, j| C64::new(m.v[i][j][0], m.v[i][j][1]));
        QuadraticModel::new(a, v).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn window(&self) -> WindowConfig {
        self.window.unwrap_or(WindowConfig {
            c: Some(8.0),
            a: Some(2.0),
            delta: Some(0.1),
        })
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize, name: &str) -> Result<RMatrix, ConfigError> {
    if rows.is_empty() {
        return Ok(RMatrix::zeros(n, n));
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return invalid(format!("{name} must be {n}x{n}"));
    }
    Ok(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("kind = \"verify-all\"\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        let err = RunConfig::parse("kind = \"eigs\"\n[grid]\nL = 8.0\nN = 100\nM = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn eigs_requires_grid_points() {
        let text = r#"
kind = "eigs"
h = [0.1]
[potential]
dim = 1
minima = [[0.0]]
terms = [{ type = "monomial", coeff = [1.0, 0.0], powers = [2] }]
[grid]
L = 6.0
"#;
        let err = RunConfig::parse(text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("grid.N"), "{err}");
    }

    #[test]
    fn defaults_are_filled_in() {
        let text = r#"
kind = "model-spectrum"
[model]
n = 1
v = [[[0.0, 2.0]]]
"#;
        let cfg = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(cfg.seed, Some(DEFAULT_SEED));
        let m = cfg.model.as_ref().unwrap();
        assert_eq!(m.count, Some(8));
        assert_eq!(m.a, Some(vec![vec![0.0]]));
    }
}
