use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tds_core::charfun::{CharFun, Descriptor};
use tds_core::distributed::DistributedModel;
use tds_core::line::LineConfig;
use tds_core::region::{BoundConfig, GrowConfig, HolderPair};

/// Errors that map to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

/// Where the characteristic function comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSource {
    Expr {
        text: String,
        #[serde(default)]
        params: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<Vec<f64>>,
    },
    Descriptor(Descriptor),
    /// Descriptor file, relative to the config file.
    File(PathBuf),
    Distributed(DistributedModel),
    /// Distributed model file, relative to the config file.
    DistributedFile(PathBuf),
}

/// A Hölder exponent: a number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Text(String),
}

impl Exponent {
    fn value(&self) -> Result<f64, ConfigError> {
        match self {
            Exponent::Number(v) => Ok(*v),
            Exponent::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => {
                Ok(f64::INFINITY)
            }
            Exponent::Text(t) => Err(ConfigError::new(format!("invalid exponent `{t}`, expected a number or \"inf\""))),
        }
    }

    pub fn of(v: f64) -> Exponent {
        if v.is_infinite() {
            Exponent::Text("inf".into())
        } else {
            Exponent::Number(v)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSettings {
    pub p: Option<Exponent>,
    pub q: Option<Exponent>,
    pub eta: Option<f64>,
    pub h: Option<f64>,
    pub extent: Option<Vec<[f64; 2]>>,
    pub max_generations: Option<usize>,
    pub max_balls: Option<usize>,
    pub max_cells: Option<usize>,
    pub max_radius_cells: Option<f64>,
    pub inflation: Option<f64>,
    pub bisect_tol: Option<f64>,
    pub fast_path: Option<bool>,
}

/// Region settings with every default filled in, as echoed into outputs.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRegion {
    pub p: Exponent,
    pub q: Exponent,
    pub eta: f64,
    /// `null` means an eighth of the start radius; see `h` in the result.
    pub h: Option<f64>,
    pub extent: Option<Vec<[f64; 2]>>,
    pub max_generations: usize,
    pub max_balls: usize,
    pub max_cells: usize,
    pub max_radius_cells: f64,
    pub inflation: f64,
    pub bisect_tol: f64,
    pub fast_path: bool,
}

impl RegionSettings {
    pub fn resolve(&self) -> Result<(GrowConfig, ResolvedRegion), ConfigError> {
        let hp = match (&self.p, &self.q) {
            (None, None) => Ok(HolderPair::euclidean()),
            (Some(p), None) => HolderPair::from_p(p.value()?),
            (None, Some(q)) => HolderPair::from_p(q.value()?).map(|h| HolderPair { p: h.q, q: h.p }),
            (Some(p), Some(q)) => HolderPair::new(p.value()?, q.value()?),
        }
        .map_err(|e| ConfigError::new(e.to_string()))?;
        let d = GrowConfig::default();
        let bound = BoundConfig {
            inflation: self.inflation.unwrap_or(d.bound.inflation),
            bisect_tol: self.bisect_tol.unwrap_or(d.bound.bisect_tol),
            ..d.bound.clone()
        };
        let cfg = GrowConfig {
            hp,
            eta: self.eta.unwrap_or(d.eta),
            h: self.h.or(d.h),
            extent: self
                .extent
                .as_ref()
                .map(|e| e.iter().map(|[a, b]| (*a, *b)).collect()),
            max_generations: self.max_generations.unwrap_or(d.max_generations),
            max_balls: self.max_balls.unwrap_or(d.max_balls),
            max_cells: self.max_cells.unwrap_or(d.max_cells),
            max_radius_cells: self.max_radius_cells.unwrap_or(d.max_radius_cells),
            bound,
            fast_path: self.fast_path.unwrap_or(d.fast_path),
        };
        let echo = ResolvedRegion {
            p: Exponent::of(cfg.hp.p),
            q: Exponent::of(cfg.hp.q),
            eta: cfg.eta,
            h: cfg.h,
            extent: self.extent.clone(),
            max_generations: cfg.max_generations,
            max_balls: cfg.max_balls,
            max_cells: cfg.max_cells,
            max_radius_cells: cfg.max_radius_cells,
            inflation: cfg.bound.inflation,
            bisect_tol: cfg.bound.bisect_tol,
            fast_path: cfg.fast_path,
        };
        Ok((cfg, echo))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSource,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub directions: Option<Vec<Vec<f64>>>,
    /// Rays in a two-parameter fan when `directions` is absent.
    #[serde(default)]
    pub fan_count: Option<usize>,
    #[serde(default)]
    pub line: LineConfig,
    #[serde(default)]
    pub region: RegionSettings,
}

pub const DEFAULT_FAN_COUNT: usize = 16;

/// Formats a JSON error with line, column and byte offset.
fn json_error(path: &Path, text: &str, e: &serde_json::Error) -> ConfigError {
    let (line, column) = (e.line(), e.column());
    let offset: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    ConfigError::new(format!(
        "{}:{line}:{column} (offset {offset}): {e}",
        path.display()
    ))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| json_error(path, &text, &e))
}

pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let config = read_json(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

pub enum System {
    CharFun(CharFun),
    Distributed(DistributedModel),
}

impl Loaded {
    pub fn system(&self) -> Result<System, ConfigError> {
        let bad = |e: &dyn fmt::Display| ConfigError::new(format!("system: {e}"));
        Ok(match &self.config.system {
            SystemSource::Expr { text, params, lower } => {
                let names: Vec<&str> = params.iter().map(String::as_str).collect();
                let cf = CharFun::parse(text, &names).map_err(|e| bad(&e))?;
                let cf = match lower {
                    Some(l) => cf.with_lower_bounds(l.clone()).map_err(|e| bad(&e))?,
                    None => cf,
                };
                System::CharFun(cf)
            }
            SystemSource::Descriptor(d) => System::CharFun(CharFun::from_descriptor(d).map_err(|e| bad(&e))?),
            SystemSource::File(p) => {
                let d: Descriptor = read_json(&self.base.join(p))?;
                System::CharFun(CharFun::from_descriptor(&d).map_err(|e| bad(&e))?)
            }
            SystemSource::Distributed(m) => System::Distributed(m.clone()),
            SystemSource::DistributedFile(p) => System::Distributed(read_json(&self.base.join(p))?),
        })
    }

    /// The system as a characteristic function, converting distributed models.
    pub fn charfun(&self) -> Result<CharFun, ConfigError> {
        match self.system()? {
            System::CharFun(cf) => Ok(cf),
            System::Distributed(m) => m
                .to_charfun()
                .map(|(cf, _)| cf)
                .map_err(|e| ConfigError::new(format!("system: {e}"))),
        }
    }

    pub fn start(&self, cf: &CharFun) -> Result<Vec<f64>, ConfigError> {
        let start = self
            .config
            .start
            .clone()
            .ok_or_else(|| ConfigError::new("`start` is required"))?;
        cf.check_point(&start)
            .map_err(|e| ConfigError::new(format!("start: {e}")))?;
        Ok(start)
    }
}
