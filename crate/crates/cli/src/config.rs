// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration: `key=value` files, flag overrides and defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anisoflow::{JacobianMode, Solver};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {key:?}{}", location(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("invalid value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("no scenario given (use --scenario or scenario=... in the config file)")]
    MissingScenario,
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn location(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioName {
    KfoldMikula,
    KfoldForced,
    GeodesicCentered,
    GeodesicOffset,
    IsotropicCircle,
    EllipticEoc,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 6] = [
        Self::KfoldMikula,
        Self::KfoldForced,
        Self::GeodesicCentered,
        Self::GeodesicOffset,
        Self::IsotropicCircle,
        Self::EllipticEoc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::KfoldMikula => "kfold-mikula",
            Self::KfoldForced => "kfold-forced",
            Self::GeodesicCentered => "geodesic-centered",
            Self::GeodesicOffset => "geodesic-offset",
            Self::IsotropicCircle => "isotropic-circle",
            Self::EllipticEoc => "elliptic-eoc",
        }
    }

    pub fn default_final_time(self) -> f64 {
        match self {
            Self::KfoldMikula => 0.35,
            Self::KfoldForced | Self::GeodesicCentered | Self::GeodesicOffset => 4.0,
            Self::IsotropicCircle => 0.1,
            Self::EllipticEoc => 0.0625,
        }
    }

    /// Spacing of the reference output times.
    pub fn frame_interval(self) -> f64 {
        match self {
            Self::KfoldMikula => 0.05,
            Self::KfoldForced => 0.5,
            Self::GeodesicCentered | Self::GeodesicOffset => 1.0,
            Self::IsotropicCircle => 0.01,
            Self::EllipticEoc => 0.015625,
        }
    }

    pub fn default_density(self) -> DensitySpec {
        match self {
            Self::KfoldMikula | Self::KfoldForced => DensitySpec::KFold { k: 6, delta: 0.028 },
            Self::GeodesicCentered | Self::GeodesicOffset => DensitySpec::Mountain,
            Self::IsotropicCircle => DensitySpec::Isotropic,
            Self::EllipticEoc => DensitySpec::Elliptic { delta: 0.5 },
        }
    }

    pub fn default_forcing(self) -> f64 {
        match self {
            Self::KfoldForced => 1.15,
            _ => 0.0,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|n| n.as_str()).collect();
                format!("expected one of {}", names.join(", "))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensitySpec {
    Isotropic,
    KFold { k: u32, delta: f64 },
    Elliptic { delta: f64 },
    /// Riemannian density of the three-mountain surface.
    Mountain,
}

impl DensitySpec {
    fn name(self) -> &'static str {
        match self {
            Self::Isotropic => "isotropic",
            Self::KFold { .. } => "kfold",
            Self::Elliptic { .. } => "elliptic",
            Self::Mountain => "mountain",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioName,
    pub density: DensitySpec,
    /// Constant forcing `f₀`; zero disables forcing.
    pub forcing: f64,
    /// Graph-shift constant of geodesic densities.
    pub c_phi: f64,
    pub elements: usize,
    pub dt: f64,
    pub final_time: f64,
    pub frames_every: usize,
    pub output_dir: PathBuf,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub damping: bool,
    pub solver: Solver,
    pub jacobian: JacobianMode,
}

pub const KEYS: [&str; 16] = [
    "scenario",
    "density",
    "k",
    "delta",
    "f0",
    "c_phi",
    "J",
    "dt",
    "T",
    "frames_every",
    "out",
    "newton_tol",
    "newton_max_iter",
    "damping",
    "solver",
    "jacobian",
];

/// Ordered `key=value` assignments with their source line (`None` for flags).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignments {
    entries: Vec<(String, String, Option<usize>)>,
}

impl Assignments {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            out.push_at(key.trim(), value.trim(), Some(i + 1))?;
        }
        Ok(out)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn push(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.push_at(key, value, None)
    }

    fn push_at(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        }
        self.entries.push((key.to_string(), value.to_string(), line));
        Ok(())
    }

    /// Later assignments (and then `overrides`) win.
    pub fn merged(mut self, overrides: Assignments) -> Self {
        self.entries.extend(overrides.entries);
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e: V::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn bad(key: &str, value: impl fmt::Display, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

impl ScenarioConfig {
    /// Resolves assignments against scenario defaults.
    pub fn resolve(a: &Assignments) -> Result<Self, ConfigError> {
        let get = |k: &str| a.get(k);
        let scenario: ScenarioName = match get("scenario") {
            Some(v) => parse_value("scenario", v)?,
            None => return Err(ConfigError::MissingScenario),
        };
        let mut density = scenario.default_density();
        if let Some(v) = get("density") {
            density = match v {
                "isotropic" => DensitySpec::Isotropic,
                "kfold" => DensitySpec::KFold { k: 6, delta: 0.028 },
                "elliptic" => DensitySpec::Elliptic { delta: 0.5 },
                "mountain" => DensitySpec::Mountain,
                _ => return Err(bad("density", v, "expected isotropic, kfold, elliptic or mountain")),
            };
        }
        match &mut density {
            DensitySpec::KFold { k, delta } => {
                if let Some(v) = get("k") {
                    *k = parse_value("k", v)?;
                }
                if let Some(v) = get("delta") {
                    *delta = parse_value("delta", v)?;
                }
            }
            DensitySpec::Elliptic { delta } => {
                if let Some(v) = get("delta") {
                    *delta = parse_value("delta", v)?;
                }
                if get("k").is_some() {
                    return Err(bad("k", get("k").unwrap_or(""), "only used by the kfold density"));
                }
            }
            DensitySpec::Isotropic | DensitySpec::Mountain => {
                for key in ["k", "delta"] {
                    if let Some(v) = get(key) {
                        return Err(bad(key, v, "not used by this density"));
                    }
                }
            }
        }

        let elements: usize = get("J").map(|v| parse_value("J", v)).transpose()?.unwrap_or(256);
        if elements < 3 {
            return Err(bad("J", elements, "need at least 3 elements"));
        }
        let dt: f64 = get("dt").map(|v| parse_value("dt", v)).transpose()?.unwrap_or(1e-4);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(bad("dt", dt, "must be positive"));
        }
        let final_time: f64 = get("T")
            .map(|v| parse_value("T", v))
            .transpose()?
            .unwrap_or(scenario.default_final_time());
        if !(final_time >= 0.0 && final_time.is_finite()) {
            return Err(bad("T", final_time, "must be nonnegative"));
        }
        let frames_every = match get("frames_every") {
            Some(v) => parse_value("frames_every", v)?,
            None => ((scenario.frame_interval() / dt).round() as usize).max(1),
        };
        if frames_every == 0 {
            return Err(bad("frames_every", 0, "must be at least 1"));
        }
        let solver = match get("solver").unwrap_or("newton") {
            "newton" => Solver::Newton,
            "picard" => Solver::Picard,
            v => return Err(bad("solver", v, "expected newton or picard")),
        };
        let jacobian = match get("jacobian").unwrap_or("analytic_if_available") {
            "analytic_if_available" => JacobianMode::AnalyticIfAvailable,
            "fd_colored" => JacobianMode::FdColored,
            v => return Err(bad("jacobian", v, "expected analytic_if_available or fd_colored")),
        };
        let newton_tol: f64 = get("newton_tol")
            .map(|v| parse_value("newton_tol", v))
            .transpose()?
            .unwrap_or(1e-10);
        if !(newton_tol > 0.0) {
            return Err(bad("newton_tol", newton_tol, "must be positive"));
        }
        let newton_max_iter: usize = get("newton_max_iter")
            .map(|v| parse_value("newton_max_iter", v))
            .transpose()?
            .unwrap_or(25);
        if newton_max_iter == 0 {
            return Err(bad("newton_max_iter", 0, "must be at least 1"));
        }
        let c_phi: f64 = get("c_phi").map(|v| parse_value("c_phi", v)).transpose()?.unwrap_or(0.0);
        if !(c_phi >= 0.0) {
            return Err(bad("c_phi", c_phi, "must be nonnegative"));
        }
        Ok(Self {
            scenario,
            density,
            forcing: get("f0")
                .map(|v| parse_value("f0", v))
                .transpose()?
                .unwrap_or(scenario.default_forcing()),
            c_phi,
            elements,
            dt,
            final_time,
            frames_every,
            output_dir: get("out")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(format!("out/{scenario}"))),
            newton_tol,
            newton_max_iter,
            damping: get("damping").map(|v| parse_value("damping", v)).transpose()?.unwrap_or(true),
            solver,
            jacobian,
        })
    }

    /// Canonical config text; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("scenario={}", self.scenario),
            format!("density={}", self.density.name()),
        ];
        match self.density {
            DensitySpec::KFold { k, delta } => {
                lines.push(format!("k={k}"));
                lines.push(format!("delta={delta:?}"));
            }
            DensitySpec::Elliptic { delta } => lines.push(format!("delta={delta:?}")),
            DensitySpec::Isotropic | DensitySpec::Mountain => {}
        }
        lines.extend([
            format!("f0={:?}", self.forcing),
            format!("c_phi={:?}", self.c_phi),
            format!("J={}", self.elements),
            format!("dt={:?}", self.dt),
            format!("T={:?}", self.final_time),
            format!("frames_every={}", self.frames_every),
            format!("out={}", self.output_dir.display()),
            format!("newton_tol={:?}", self.newton_tol),
            format!("newton_max_iter={}", self.newton_max_iter),
            format!("damping={}", self.damping),
            format!(
                "solver={}",
                match self.solver {
                    Solver::Newton => "newton",
                    Solver::Picard => "picard",
                }
            ),
            format!(
                "jacobian={}",
                match self.jacobian {
                    JacobianMode::AnalyticIfAvailable => "analytic_if_available",
                    JacobianMode::FdColored => "fd_colored",
                }
            ),
        ]);
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}
