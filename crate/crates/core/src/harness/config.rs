use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Nonlinearity;
use crate::norms::LogFlavor;
use crate::paraproducts::HolderExponents;
use crate::pde::EvolutionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Equivalence,
    Embed,
    LogEmbed,
    Leibniz,
    Characterize,
    Nonlin,
    Pde,
    Geom,
    Offdiag,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Self::Equivalence,
        Self::Embed,
        Self::LogEmbed,
        Self::Leibniz,
        Self::Characterize,
        Self::Nonlin,
        Self::Pde,
        Self::Geom,
        Self::Offdiag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Equivalence => "equivalence",
            Self::Embed => "embed",
            Self::LogEmbed => "log-embed",
            Self::Leibniz => "leibniz",
            Self::Characterize => "characterize",
            Self::Nonlin => "nonlin",
            Self::Pde => "pde",
            Self::Geom => "geom",
            Self::Offdiag => "offdiag",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|e| e.name() == key)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    #[default]
    Combinatorial,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderFamily {
    #[default]
    Cycle,
    Path,
    /// Square torus grids; each size must be a perfect square.
    Torus,
    RandomGeometric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub experiment: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub form: FormKind,
    /// Order `m` of the generator.
    #[serde(default = "default_order")]
    pub order: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    #[serde(default)]
    pub family: LadderFamily,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// Connection radius of random geometric graphs; defaults to
    /// `1.6 sqrt(ln n / (π n))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Seed of random geometric graphs; defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Manifold JSON files; when present they replace `family`/`sizes`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<PathBuf>,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            family: LadderFamily::default(),
            sizes: default_sizes(),
            radius: None,
            seed: None,
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceParams {
    pub alphas: Vec<f64>,
    pub ps: Vec<f64>,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        Self {
            alphas: vec![0.3, 0.5, 0.8],
            ps: vec![1.5, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub d: f64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            s: 0.5,
            p: 2.0,
            q: 4.0,
            d: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFlavorKind {
    #[default]
    Bmo,
    BmoL,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogEmbedParams {
    pub s: f64,
    pub p: f64,
    pub d: f64,
    pub flavor: LogFlavorKind,
    /// Exponent of the semigroup flavor.
    pub bmo_p: f64,
}

impl Default for LogEmbedParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            p: 2.0,
            d: 1.0,
            flavor: LogFlavorKind::Bmo,
            bmo_p: 2.0,
        }
    }
}

impl LogEmbedParams {
    pub fn flavor(&self) -> LogFlavor {
        match self.flavor {
            LogFlavorKind::Bmo => LogFlavor::Bmo,
            LogFlavorKind::BmoL => LogFlavor::BmoL { p: self.bmo_p },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeibnizParams {
    pub alpha: f64,
    /// Base exponent of the algebra form; the explicit exponents override it.
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q2: Option<f64>,
    /// Symbol order `N` of the paraproduct breakdown.
    pub symbol_order: u32,
    /// Attribute each ratio to its dominant paraproduct term.
    pub breakdown: bool,
    pub tmin: f64,
    pub tmax: f64,
    pub nodes: usize,
}

impl Default for LeibnizParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            p: 2.0,
            r: None,
            p1: None,
            q1: None,
            p2: None,
            q2: None,
            symbol_order: 5,
            breakdown: false,
            tmin: 1e-6,
            tmax: 1e6,
            nodes: 400,
        }
    }
}

impl LeibnizParams {
    pub fn exponents(&self) -> HolderExponents {
        let base = HolderExponents::algebra(self.p);
        HolderExponents {
            r: self.r.unwrap_or(base.r),
            p1: self.p1.unwrap_or(base.p1),
            q1: self.q1.unwrap_or(base.q1),
            p2: self.p2.unwrap_or(base.p2),
            q2: self.q2.unwrap_or(base.q2),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacterizeParams {
    pub alpha: f64,
    pub p: f64,
    pub rho: f64,
}

impl Default for CharacterizeParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            p: 2.0,
            rho: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinParams {
    pub nonlinearity: String,
    pub alpha: f64,
    pub p: f64,
    pub rho: f64,
}

impl Default for NonlinParams {
    fn default() -> Self {
        Self {
            nonlinearity: "tanh".into(),
            alpha: 0.5,
            p: 2.0,
            rho: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeParams {
    pub kind: EvolutionKind,
    pub nonlinearity: String,
    /// Sup norm of the initial data.
    pub amplitude: f64,
    pub alpha: f64,
    pub intervals: Vec<f64>,
    pub tau_nodes: usize,
    pub picard_max: usize,
    /// Times of the linear conservation check.
    pub conservation_times: Vec<f64>,
}

impl Default for PdeParams {
    fn default() -> Self {
        Self {
            kind: EvolutionKind::Heat,
            nonlinearity: "square".into(),
            amplitude: 0.1,
            alpha: 0.5,
            intervals: vec![0.025, 0.05, 0.1, 0.2],
            tau_nodes: 32,
            picard_max: 60,
            conservation_times: vec![0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeomParams {
    pub d: f64,
    pub q: f64,
    pub local: bool,
    pub random_fields: usize,
}

impl Default for GeomParams {
    fn default() -> Self {
        Self {
            d: 1.0,
            q: 2.0,
            local: false,
            random_fields: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffdiagParams {
    pub s_minus: f64,
    pub t_grid: Vec<f64>,
    pub constant_budget: f64,
}

impl Default for OffdiagParams {
    fn default() -> Self {
        Self {
            s_minus: 1.0,
            t_grid: vec![0.1, 1.0, 10.0],
            constant_budget: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    #[serde(default)]
    pub ladder: LadderSection,
    #[serde(default)]
    pub equivalence: EquivalenceParams,
    #[serde(default)]
    pub embed: EmbedParams,
    #[serde(default, alias = "log-embed")]
    pub log_embed: LogEmbedParams,
    #[serde(default)]
    pub leibniz: LeibnizParams,
    #[serde(default)]
    pub characterize: CharacterizeParams,
    #[serde(default)]
    pub nonlin: NonlinParams,
    #[serde(default)]
    pub pde: PdeParams,
    #[serde(default)]
    pub geom: GeomParams,
    #[serde(default)]
    pub offdiag: OffdiagParams,
}

fn default_trials() -> usize {
    20
}

fn default_order() -> f64 {
    2.0
}

fn default_sizes() -> Vec<usize> {
    vec![16, 32, 64, 128]
}

impl ExperimentConfig {
    /// Defaults for `experiment` with the given ladder.
    pub fn new(experiment: Experiment, sizes: Vec<usize>) -> Self {
        Self {
            run: RunSection {
                experiment: experiment.name().into(),
                trials: default_trials(),
                seed: 0,
                output: None,
                form: FormKind::default(),
                order: default_order(),
            },
            ladder: LadderSection {
                sizes,
                ..LadderSection::default()
            },
            equivalence: Default::default(),
            embed: Default::default(),
            log_embed: Default::default(),
            leibniz: Default::default(),
            characterize: Default::default(),
            nonlin: Default::default(),
            pde: Default::default(),
            geom: Default::default(),
            offdiag: Default::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config = Self::parse_toml(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Parses without validating, so callers can patch fields first.
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.run.experiment.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let experiment = self.experiment()?;
        if self.run.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if !(self.run.order > 0.0 && self.run.order.is_finite()) {
            return Err(Error::Parameter(format!("order m = {} must be positive", self.run.order)));
        }
        if self.ladder.files.is_empty() {
            if self.ladder.sizes.is_empty() {
                return Err(Error::Parameter("ladder is empty".into()));
            }
            for &n in &self.ladder.sizes {
                if n < 2 {
                    return Err(Error::Parameter(format!("ladder size {n} is below 2")));
                }
                if self.ladder.family == LadderFamily::Torus && square_side(n).is_none() {
                    return Err(Error::Parameter(format!(
                        "torus ladder size {n} is not a perfect square"
                    )));
                }
            }
        } else {
            for file in &self.ladder.files {
                if !file.is_file() {
                    return Err(Error::Parameter(format!(
                        "ladder file {} does not exist",
                        file.display()
                    )));
                }
            }
        }
        match experiment {
            Experiment::Equivalence => {
                if self.equivalence.alphas.is_empty() || self.equivalence.ps.is_empty() {
                    return Err(Error::Parameter("equivalence grid is empty".into()));
                }
            }
            Experiment::Leibniz => {
                let l = &self.leibniz;
                if l.breakdown {
                    crate::paraproducts::TQuadrature::<f64>::log_midpoint(l.tmin, l.tmax, l.nodes)?;
                }
            }
            Experiment::Nonlin => {
                self.nonlin.nonlinearity.parse::<Nonlinearity>()?;
            }
            Experiment::Pde => {
                self.pde.nonlinearity.parse::<Nonlinearity>()?;
                if self.pde.intervals.is_empty() {
                    return Err(Error::Parameter("pde interval ladder is empty".into()));
                }
            }
            Experiment::Offdiag if self.offdiag.t_grid.is_empty() => {
                return Err(Error::Parameter("offdiag time grid is empty".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

pub(crate) fn square_side(n: usize) -> Option<usize> {
    let k = (n as f64).sqrt().round() as usize;
    (k * k == n).then_some(k)
}
