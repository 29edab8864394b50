//! TOML experiment configs. Unknown keys are rejected everywhere, so typos
//! fail loudly before any computation starts.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use rdmud_core::detect::{DetectorFamily, DetectorSpec, SymbolStage};
use rdmud_core::factory::MatrixRecipe;
use rdmud_core::mc::{AmplitudeRule, GramSpec, SweepPlan, SweepVariable, TuneDirective};
use rdmud_core::MatrixKind;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    #[serde(default)]
    pub amplitude: AmplitudeSection,
    pub matrix: MatrixSection,
    #[serde(default)]
    pub gram: GramSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(rename = "detector", default)]
    pub detectors: Vec<DetectorSection>,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub name: Option<String>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub k: usize,
    pub sigma2: f64,
    /// Correlator count when not swept.
    #[serde(default)]
    pub m: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplitudeSection {
    pub rule: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for AmplitudeSection {
    fn default() -> Self {
        Self {
            rule: "constant".into(),
            value: 1.0,
            lo: 1.0,
            hi: 1.5,
        }
    }
}

impl AmplitudeSection {
    pub fn resolve(&self) -> Result<AmplitudeRule> {
        let rule = match self.rule.as_str() {
            "constant" => AmplitudeRule::Constant(self.value),
            "uniform" => AmplitudeRule::Uniform {
                lo: self.lo,
                hi: self.hi,
            },
            other => bail!("unknown amplitude rule `{other}` (constant|uniform)"),
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSection {
    pub kind: String,
    #[serde(default = "one")]
    pub search: usize,
    #[serde(default)]
    pub seed: u64,
    /// Kerdock column subselection (defaults to the full M^2 set).
    #[serde(default)]
    pub columns: Option<usize>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub normalize: bool,
}

fn one() -> usize {
    1
}

impl MatrixSection {
    pub fn recipe(&self, m: usize, n: usize) -> Result<MatrixRecipe> {
        let kind: MatrixKind = self.kind.parse()?;
        let cols = match kind {
            MatrixKind::Kerdock => self.columns.unwrap_or(m * m),
            _ => n,
        };
        let mut recipe = MatrixRecipe::new(kind, m, cols, self.seed).with_search(self.search);
        recipe.path = self.path.clone();
        recipe.normalize = self.normalize;
        if kind == MatrixKind::File && recipe.path.is_none() {
            bail!("matrix kind `file` needs a `path`");
        }
        Ok(recipe)
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GramSection {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub eigenvalues: Option<Vec<f64>>,
    /// Shorthand for the linear spectrum i/scale, i = 1..count.
    #[serde(default)]
    pub linear_count: Option<usize>,
    #[serde(default)]
    pub linear_scale: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl GramSection {
    pub fn resolve(&self) -> Result<GramSpec> {
        match self.kind.as_deref().unwrap_or("identity") {
            "identity" => Ok(GramSpec::Identity),
            "gold" => Ok(GramSpec::Gold {
                l: self.l.context("gold gram needs `l`")?,
            }),
            "spectrum" => {
                let eigenvalues = if let Some(e) = &self.eigenvalues {
                    e.clone()
                } else {
                    let count = self.linear_count.context("spectrum needs eigenvalues")?;
                    let scale = self.linear_scale.context("spectrum needs linear_scale")?;
                    (1..=count).map(|i| i as f64 / scale).collect()
                };
                Ok(GramSpec::Spectrum {
                    eigenvalues,
                    seed: self.seed.unwrap_or(0),
                })
            }
            "file" => Ok(GramSpec::File(
                self.path.clone().context("gram kind `file` needs `path`")?,
            )),
            other => bail!("unknown gram kind `{other}` (identity|gold|spectrum|file)"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: String,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub family: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub whiten: bool,
    #[serde(default)]
    pub stage: Option<String>,
    #[serde(default)]
    pub tune: Option<TuneSection>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    pub trials: u64,
}

impl TuneSection {
    pub fn directive(&self) -> Result<TuneDirective> {
        if !(self.grid_step > 0.0 && self.grid_stop >= self.grid_start) {
            bail!("tune grid must satisfy start <= stop with positive step");
        }
        let mut grid = Vec::new();
        let mut t = self.grid_start;
        while t <= self.grid_stop + 1e-12 {
            grid.push(t);
            t += self.grid_step;
        }
        Ok(TuneDirective {
            grid,
            trials: self.trials,
        })
    }
}

impl DetectorSection {
    pub fn resolve(&self, default_k: usize) -> Result<DetectorSpec> {
        let family: DetectorFamily = self.family.parse()?;
        let stage = match self.stage.as_deref() {
            None | Some("sign") => SymbolStage::Sign,
            Some("ls") => SymbolStage::LeastSquares,
            Some("mmse") => SymbolStage::Mmse,
            Some(other) => bail!("unknown symbol stage `{other}` (sign|ls|mmse)"),
        };
        let needs_k = matches!(
            family,
            DetectorFamily::Rdd
                | DetectorFamily::Rddf
                | DetectorFamily::RdLs
                | DetectorFamily::RdMmse
        );
        let spec = DetectorSpec {
            family,
            k: self.k.or(needs_k.then_some(default_k)),
            xi: self.xi,
            eps: self.eps,
            whiten: self.whiten,
            symbol_stage: stage,
        };
        // detectors under tuning get their threshold filled per sweep point
        if self.tune.is_none() {
            spec.validate()?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub alpha: f64,
    #[serde(default)]
    pub k0: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("config schema violation")?;
        if cfg.model.k > cfg.model.n {
            bail!("model.k exceeds model.n");
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text)
    }

    /// Effective master seed: `RDMUD_SEED` overrides the config value.
    pub fn master_seed(&self) -> Result<u64> {
        match std::env::var("RDMUD_SEED") {
            Ok(v) => v
                .parse::<u64>()
                .with_context(|| format!("RDMUD_SEED `{v}` is not a u64")),
            Err(_) => Ok(self.experiment.master_seed),
        }
    }

    pub fn base_m(&self) -> usize {
        self.model.m.unwrap_or(self.model.n)
    }

    /// Build the fully-resolved sweep plan.
    pub fn sweep_plan(&self, trials_override: Option<u64>) -> Result<SweepPlan> {
        if self.detectors.is_empty() {
            bail!("config declares no [[detector]] entries");
        }
        let (variable, values) = match &self.sweep {
            Some(s) => {
                let v: SweepVariable = s.variable.parse()?;
                if s.values.is_empty() && v != SweepVariable::Detector {
                    bail!("sweep.values must be nonempty");
                }
                (v, s.values.clone())
            }
            None => (SweepVariable::Detector, Vec::new()),
        };
        let mut detectors = Vec::new();
        let mut tune = Vec::new();
        for d in &self.detectors {
            detectors.push(d.resolve(self.model.k)?);
            tune.push(match &d.tune {
                Some(t) => Some(t.directive()?),
                None => None,
            });
        }
        Ok(SweepPlan {
            n: self.model.n,
            m: self.base_m(),
            k: self.model.k,
            sigma2: self.model.sigma2,
            amplitude: self.amplitude.resolve()?,
            gram: self.gram.resolve()?,
            matrix: self.matrix.recipe(self.base_m(), self.model.n)?,
            detectors,
            tune,
            master_seed: self.master_seed()?,
            trials: trials_override.unwrap_or(self.experiment.trials),
            variable,
            values,
        })
    }
}
