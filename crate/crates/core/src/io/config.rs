use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{layout_from_design, phi0_from_fgh, DesignError, DesignParams};
use crate::geometry::{LayoutError, OpticalLayout};
use crate::montecarlo::{RunModes, SimulationConfig};

pub const PAPER_PRESET: &str = include_str!("../../presets/paper.json");
pub const THRESHOLD_PRESET: &str = include_str!("../../presets/threshold.json");

/// Explicit bench geometry. The plumbing fields fall back to the same
/// defaults the design solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub wavelength: f64,
    pub phi0: f64,
    pub source_width: f64,
    pub crystal_thickness: f64,
    pub slit_distance: f64,
    pub slit_separation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_angular_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_distance: Option<f64>,
}

impl LayoutSpec {
    pub fn resolve(&self) -> OpticalLayout {
        let mut l = OpticalLayout::with_defaults(
            self.wavelength,
            self.phi0,
            self.source_width,
            self.crystal_thickness,
            self.slit_distance,
            self.slit_separation,
        );
        if let Some(v) = self.slit_width {
            l.slit_width = v;
        }
        if let Some(v) = self.idler_distance {
            l.idler_distance = v;
        }
        if let Some(v) = self.detector_angular_radius {
            l.detector_angular_radius = v;
        }
        if let Some(v) = self.screen_distance {
            l.screen_distance = v;
        }
        l
    }
}

impl From<OpticalLayout> for LayoutSpec {
    fn from(l: OpticalLayout) -> Self {
        LayoutSpec {
            wavelength: l.wavelength,
            phi0: l.phi0,
            source_width: l.source_width,
            crystal_thickness: l.crystal_thickness,
            slit_distance: l.slit_distance,
            slit_separation: l.slit_separation,
            slit_width: Some(l.slit_width),
            idler_distance: Some(l.idler_distance),
            detector_angular_radius: Some(l.detector_angular_radius),
            screen_distance: Some(l.screen_distance),
        }
    }
}

/// Design-space inputs. Without `phi0` the spread follows from
/// `φ₀ = 1/(32π f g² h)`; with it, `f` is only echoed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignInputs {
    pub wavelength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub slit_distance: f64,
    /// Overrides the default `x = wd/(2s)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crystal_thickness: Option<f64>,
}

impl DesignInputs {
    pub fn params(&self) -> DesignParams {
        DesignParams::new(self.f, self.g, self.h)
    }

    pub fn phi0(&self) -> Result<f64, DesignError> {
        match self.phi0 {
            Some(p) => Ok(p),
            None => Ok(phi0_from_fgh(self.params())?),
        }
    }

    pub fn resolve(&self) -> Result<OpticalLayout, DesignError> {
        let mut l = layout_from_design(
            self.wavelength,
            self.phi0()?,
            self.params(),
            self.slit_distance,
        )?;
        if let Some(x) = self.crystal_thickness {
            l.crystal_thickness = x;
            l.validate()?;
        }
        Ok(l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignInputs>,
    pub n_pairs: u64,
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub modes: RunModes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted location of the problem, `.` for the document root.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn layout_error(prefix: &str, e: &LayoutError) -> ConfigError {
    let field = match e {
        LayoutError::SmallAngle { quantity, .. } if *quantity == "s/d" => "slit_separation",
        LayoutError::SmallAngle { .. } => "source_width",
        other => other.field(),
    };
    ConfigError::new(format!("{prefix}.{field}"), e.to_string())
}

fn design_error(e: &DesignError) -> ConfigError {
    match e {
        DesignError::Domain(d) => ConfigError::new(format!("design.{}", d.quantity), e.to_string()),
        DesignError::Layout(l) => layout_error("design", l),
        DesignError::OverDetermined => ConfigError::new("design", e.to_string()),
    }
}

impl RunConfig {
    /// Parses and fully validates a config document.
    pub fn parse(bytes: &[u8]) -> Result<Self, ConfigError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| ConfigError::new(".", format!("not UTF-8: {e}")))?;
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let bytes = std::fs::read(path)
            .map_err(|e| ConfigError::new(".", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&bytes).map_err(|e| ConfigError {
            path: format!("{}:{}", path.display(), e.path),
            message: e.message,
        })
    }

    pub fn paper() -> Self {
        Self::parse(PAPER_PRESET.as_bytes()).expect("shipped preset is valid")
    }

    pub fn threshold() -> Self {
        Self::parse(THRESHOLD_PRESET.as_bytes()).expect("shipped preset is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.layout().map(|_| ())
    }

    /// The resolved, validated layout.
    pub fn layout(&self) -> Result<OpticalLayout, ConfigError> {
        if self.n_pairs == 0 {
            return Err(ConfigError::new("n_pairs", "must be at least 1"));
        }
        match (&self.layout, &self.design) {
            (Some(_), Some(_)) => Err(ConfigError::new(
                ".",
                "both `layout` and `design` are given; specify exactly one",
            )),
            (None, None) => Err(ConfigError::new(
                ".",
                "neither `layout` nor `design` is given; specify exactly one",
            )),
            (Some(spec), None) => {
                let l = spec.resolve();
                let check = if self.modes.incoherent_source {
                    l.validate_allowing_thin_source()
                } else {
                    l.validate()
                };
                check.map_err(|e| layout_error("layout", &e))?;
                Ok(l)
            }
            (None, Some(design)) => design.resolve().map_err(|e| design_error(&e)),
        }
    }

    pub fn simulation(&self) -> Result<SimulationConfig, ConfigError> {
        Ok(SimulationConfig {
            layout: self.layout()?,
            n_pairs: self.n_pairs,
            seed: self.seed,
            workers: self.workers,
            modes: self.modes,
            keep_records: false,
        })
    }
}
