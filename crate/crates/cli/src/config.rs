//! Experiment configuration (JSON, schema version 1) and the short map
//! syntax accepted by `--map`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use calabi_core::action::{ActionContext, MeasureSpec, NumericalSettings};
use calabi_core::maps::{MapExpr, RadialProfile, TwistProfile};
use calabi_core::orbits::{refine_orbit, solve_from, SearchConfig, CERTIFIED_RESIDUAL};
use calabi_core::phase_space::{AnnulusPoint, LiftedPoint};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    RigidRotation {
        a: f64,
    },
    Twist {
        profile: ProfileConfig,
    },
    LocalDiskTwist {
        center: [f64; 2],
        radius: f64,
        c: f64,
    },
    Compose {
        outer: Box<MapConfig>,
        inner: Box<MapConfig>,
    },
    Iterate {
        base: Box<MapConfig>,
        k: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Linear,
    Bump(f64),
    /// Equally spaced samples of `φ` on `[0, 1]`.
    Tabulated(Vec<f64>),
}

impl MapConfig {
    pub fn build(&self) -> Result<MapExpr, CliError> {
        Ok(match self {
            MapConfig::RigidRotation { a } => MapExpr::rotation(*a)?,
            MapConfig::Twist { profile } => MapExpr::twist(match profile {
                ProfileConfig::Linear => TwistProfile::Linear,
                ProfileConfig::Bump(a) => TwistProfile::bump(*a)?,
                ProfileConfig::Tabulated(v) => TwistProfile::tabulated(v.clone())?,
            }),
            MapConfig::LocalDiskTwist { center, radius, c } => MapExpr::local_disk_twist(
                AnnulusPoint::new(center[0], center[1])?,
                *radius,
                RadialProfile::poly_bump(*c)?,
            )?,
            MapConfig::Compose { outer, inner } => MapExpr::compose(outer.build()?, inner.build()?),
            MapConfig::Iterate { base, k } => MapExpr::iterate(base.build()?, *k)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    BoundaryLower,
    BoundaryUpper,
    Area,
    Empirical {
        seed: [f64; 2],
        n_iter: u64,
    },
    /// Uniform measure on the `(q, p)` orbit found by Newton from `seed`.
    Orbit {
        q: u32,
        p: i64,
        seed: [f64; 2],
    },
}

impl MeasureConfig {
    pub fn build(&self, m: &MapExpr, search: &SearchConfig) -> Result<MeasureSpec, CliError> {
        Ok(match self {
            MeasureConfig::BoundaryLower => MeasureSpec::BoundaryLower,
            MeasureConfig::BoundaryUpper => MeasureSpec::BoundaryUpper,
            MeasureConfig::Area => MeasureSpec::AreaMeasure,
            MeasureConfig::Empirical { seed, n_iter } => {
                MeasureSpec::empirical(AnnulusPoint::new(seed[0], seed[1])?, *n_iter)?
            }
            MeasureConfig::Orbit { q, p, seed } => {
                let start = LiftedPoint::new(seed[0], seed[1])?;
                let orbit = solve_from(m, *q, *p, start, search).ok_or_else(|| {
                    CliError::Config(format!("no ({q}, {p}) orbit found from seed ({}, {})", seed[0], seed[1]))
                })?;
                let orbit = refine_orbit(m, &orbit, CERTIFIED_RESIDUAL * 1e-3, search).unwrap_or(orbit);
                MeasureSpec::orbit(orbit)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub base_point: [f64; 2],
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            shift: 0.0,
            base_point: [0.0, 0.0],
        }
    }
}

impl ContextConfig {
    pub fn build(&self) -> Result<ActionContext, CliError> {
        let beta = if self.shift == 0.0 {
            calabi_core::OneForm::CanonicalBeta
        } else {
            calabi_core::OneForm::ShiftedBeta(self.shift)
        };
        Ok(ActionContext::new(
            beta,
            AnnulusPoint::new(self.base_point[0], self.base_point[1])?,
        )?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Names of the two measures compared by `verify`.
    pub pair: Option<[String; 2]>,
    pub q_max: Option<u32>,
    pub q: Option<u32>,
    pub p: Option<i64>,
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub plot_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub map: MapConfig,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureConfig>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub numerics: NumericalSettings,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{origin}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.search
            .validate()
            .map_err(|e| CliError::Config(format!("{origin}: search: {e}")))?;
        if let Some([a, b]) = &cfg.task.pair {
            for name in [a, b] {
                if !cfg.measures.contains_key(name) {
                    return Err(CliError::Config(format!("{origin}: task.pair names unknown measure `{name}`")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn measure(&self, name: &str, m: &MapExpr) -> Result<MeasureSpec, CliError> {
        self.measures
            .get(name)
            .ok_or_else(|| CliError::Config(format!("unknown measure `{name}`")))?
            .build(m, &self.search)
    }

    /// Minimal configuration around a map given on the command line.
    pub fn for_map(map: MapConfig) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            map,
            context: ContextConfig::default(),
            measures: BTreeMap::new(),
            search: SearchConfig::default(),
            numerics: NumericalSettings::default(),
            task: TaskConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Parses the short map syntax.
///
/// A map is a `*`-separated list of factors, outermost first; each factor
/// may carry a power `^k`. Factors:
///
/// ```text
/// rigid:a=0.618
/// twist:linear | twist:bump=0.5
/// disk:cx=0.5,cy=0.5,r=0.35,c=50
/// ```
pub fn parse_map(text: &str) -> Result<MapConfig, CliError> {
    let factors: Vec<&str> = text.split('*').map(str::trim).collect();
    if factors.iter().any(|f| f.is_empty()) {
        return Err(CliError::Config(format!("map `{text}`: empty factor")));
    }
    let mut built: Option<MapConfig> = None;
    for factor in factors.iter().rev() {
        let next = parse_factor(factor)?;
        built = Some(match built {
            None => next,
            Some(inner) => MapConfig::Compose {
                outer: Box::new(next),
                inner: Box::new(inner),
            },
        });
    }
    built.ok_or_else(|| CliError::Config("empty map".into()))
}

fn parse_factor(text: &str) -> Result<MapConfig, CliError> {
    let (body, power) = match text.rsplit_once('^') {
        Some((b, k)) => {
            let k: u32 = k
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("`{text}`: bad power `{k}`")))?;
            (b.trim(), Some(k))
        }
        None => (text, None),
    };
    let (kind, args) = body.split_once(':').unwrap_or((body, ""));
    let params = parse_params(args, text)?;
    let get = |key: &str| {
        params
            .get(key)
            .and_then(|v| *v)
            .ok_or_else(|| CliError::Config(format!("`{text}`: missing `{key}=`")))
    };
    let allow = |keys: &[&str]| -> Result<(), CliError> {
        match params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(CliError::Config(format!("`{text}`: unknown parameter `{k}`"))),
            None => Ok(()),
        }
    };
    let base = match kind.trim() {
        "rigid" => {
            allow(&["a"])?;
            MapConfig::RigidRotation { a: get("a")? }
        }
        "twist" => {
            allow(&["linear", "bump"])?;
            let profile = if params.contains_key("linear") {
                ProfileConfig::Linear
            } else if params.contains_key("bump") {
                ProfileConfig::Bump(get("bump")?)
            } else {
                return Err(CliError::Config(format!("`{text}`: expected twist:linear or twist:bump=A")));
            };
            MapConfig::Twist { profile }
        }
        "disk" => {
            allow(&["cx", "cy", "r", "c"])?;
            MapConfig::LocalDiskTwist {
                center: [get("cx")?, get("cy")?],
                radius: get("r")?,
                c: get("c")?,
            }
        }
        other => return Err(CliError::Config(format!("`{text}`: unknown map kind `{other}`"))),
    };
    Ok(match power {
        Some(k) => MapConfig::Iterate {
            base: Box::new(base),
            k,
        },
        None => base,
    })
}

fn parse_params(args: &str, whole: &str) -> Result<BTreeMap<String, Option<f64>>, CliError> {
    let mut out = BTreeMap::new();
    for item in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = match item.split_once('=') {
            Some((k, v)) => {
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("`{whole}`: `{v}` is not a number")))?;
                (k.trim().to_string(), Some(v))
            }
            None => (item.to_string(), None),
        };
        if out.insert(key.clone(), value).is_some() {
            return Err(CliError::Config(format!("`{whole}`: `{key}` given twice")));
        }
    }
    Ok(out)
}

/// `x,y` as a pair of floats.
pub fn parse_point(text: &str) -> Result<[f64; 2], String> {
    let (x, y) = text.split_once(',').ok_or_else(|| format!("expected x,y, got `{text}`"))?;
    let x = x.trim().parse().map_err(|_| format!("bad x in `{text}`"))?;
    let y = y.trim().parse().map_err(|_| format!("bad y in `{text}`"))?;
    Ok([x, y])
}
