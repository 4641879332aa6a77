//! Experiment configuration files (TOML).

use serde::{Deserialize, Serialize};

use cavmix_core::dof::BoundaryCondition;
use cavmix_core::{DefectSpec, MaterialParams, MeshParams, Tensor2, Volumetric};

use crate::analysis::BifurcationCriteria;
use crate::continuation::{Branch, ContinuationConfig, SweepConfig};
use crate::error::{Error, Result};
use crate::newton::NewtonConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub material: MaterialConfig,
    pub defects: Vec<DefectConfig>,
    pub bc: BcConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// `W(F) = μ|F|^s + κ(det F − 1)² + 1/det F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub mu: f64,
    pub s: f64,
    pub kappa: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let m = MaterialParams::standard();
        MaterialConfig {
            mu: m.mu,
            s: m.s,
            kappa: m.volumetric.kappa(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectConfig {
    pub center: [f64; 2],
    pub rho: f64,
    pub delta: f64,
}

/// Outer boundary map: a general affine matrix or the uniform stretch `λ I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcConfig {
    Affine { matrix: [[f64; 2]; 2] },
    Stretch { lambda: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub h: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    pub alpha: f64,
    pub c_tau: f64,
    pub c_n: f64,
    pub max_aspect: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let m = MeshParams::default();
        MeshConfig {
            h: m.h,
            c: m.c,
            c1: m.c1,
            c2: m.c2,
            alpha: m.alpha,
            c_tau: m.c_tau,
            c_n: m.c_n,
            max_aspect: m.max_aspect,
        }
    }
}

/// Subcommand-specific parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Mesh sizes for `mesh`, `converge` and `infsup`; empty means `[mesh.h]`.
    pub h_list: Vec<f64>,
    /// Load grid of `sweep` (requires a stretch boundary condition).
    pub lambdas: Vec<f64>,
    /// Branches of `sweep`.
    pub branches: Vec<Branch>,
    /// Branch selected by `solve` under a stretch boundary condition.
    pub branch: Branch,
    pub dlambda_min: f64,
    pub bias_pressure: f64,
    pub bifurcation: BifurcationCriteria,
    /// `infsup` also evaluates β_h at the converged state.
    pub infsup_at_solution: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SweepConfig::default();
        RunConfig {
            h_list: Vec::new(),
            lambdas: Vec::new(),
            branches: vec![Branch::Symmetric],
            branch: Branch::Symmetric,
            dlambda_min: s.dlambda_min,
            bias_pressure: s.bias_pressure,
            bifurcation: BifurcationCriteria::default(),
            infsup_at_solution: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// Plain-text mesh files (reference and deformed).
    Mesh,
    Vtk,
    State,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Optional artifacts; CSV tables are always written.
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            formats: vec![Format::Mesh, Format::Vtk, Format::State],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.material()?;
        self.newton.validate()?;
        let c = &self.continuation;
        if !(c.dt_min > 0.0
            && c.dt_min <= c.dt_init
            && c.dt_init <= c.dt_max
            && c.dt_max <= 1.0
            && c.grow >= 1.0)
        {
            return Err(Error::Config(format!(
                "invalid continuation configuration {c:?}"
            )));
        }
        for h in self.h_list() {
            self.mesh_params(h).validate(&self.material()?)?;
        }
        cavmix_core::mesh::check_defects(&self.defects())?;
        if !self.run.lambdas.is_empty() && !matches!(self.bc, BcConfig::Stretch { .. }) {
            return Err(Error::Config(
                "a λ list requires a stretch boundary condition".into(),
            ));
        }
        if self
            .run
            .lambdas
            .iter()
            .any(|l| !(l.is_finite() && *l > 0.0))
        {
            return Err(Error::Config("λ values must be positive".into()));
        }
        if !(self.run.dlambda_min > 0.0) || !(self.run.bias_pressure >= 0.0) {
            return Err(Error::Config(
                "dlambda_min must be positive, bias_pressure non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn material(&self) -> Result<MaterialParams> {
        let m = &self.material;
        Ok(MaterialParams::new(
            m.mu,
            m.s,
            Volumetric::Reciprocal { kappa: m.kappa },
        )?)
    }

    pub fn defects(&self) -> Vec<DefectSpec> {
        self.defects
            .iter()
            .map(|d| DefectSpec {
                center: d.center,
                rho: d.rho,
                delta: d.delta,
            })
            .collect()
    }

    pub fn mesh_params(&self, h: f64) -> MeshParams {
        let m = &self.mesh;
        MeshParams {
            h,
            c: m.c,
            c1: m.c1,
            c2: m.c2,
            alpha: m.alpha,
            c_tau: m.c_tau,
            c_n: m.c_n,
            max_aspect: m.max_aspect,
        }
    }

    /// Mesh sizes of the run, coarsest first.
    pub fn h_list(&self) -> Vec<f64> {
        let mut h = if self.run.h_list.is_empty() {
            vec![self.mesh.h]
        } else {
            self.run.h_list.clone()
        };
        h.sort_by(|a, b| b.total_cmp(a));
        h
    }

    pub fn boundary(&self) -> BoundaryCondition {
        match self.bc {
            BcConfig::Affine { matrix: m } => {
                BoundaryCondition::affine(Tensor2::new(m[0][0], m[0][1], m[1][0], m[1][1]))
            }
            BcConfig::Stretch { lambda } => BoundaryCondition::stretch(lambda),
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            continuation: self.continuation.clone(),
            dlambda_min: self.run.dlambda_min,
            bias_pressure: self.run.bias_pressure,
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
