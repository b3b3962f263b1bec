//! Run configuration files (TOML).
//!
//! ```toml
//! kind = "coupler"        # coupler | cloak | mimic | target | custom
//! iterations = 400
//!
//! [coupler]               # section named after the kind; defaults if absent
//! wavelength_grid_points = 21.0
//! box_width = 18
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::DEFAULT_ITERATIONS;
use crate::devices::{CloakSpec, CouplerSpec, CustomSpec, Device, MimicSpec, TargetSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Coupler,
    Cloak,
    Mimic,
    Target,
    Custom,
}

impl DeviceKind {
    pub fn section(self) -> &'static str {
        match self {
            DeviceKind::Coupler => "coupler",
            DeviceKind::Cloak => "cloak",
            DeviceKind::Mimic => "mimic",
            DeviceKind::Target => "target",
            DeviceKind::Custom => "custom",
        }
    }
}

/// Transverse permittivity profile for the `modes` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum SliceSpec {
    /// Centred core of `core_width` cells in a slice of `height` cells.
    Slab {
        height: usize,
        core_width: usize,
        core_eps: f64,
        #[serde(default = "one")]
        clad_eps: f64,
    },
    Explicit { eps: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl SliceSpec {
    pub fn eps(&self) -> Result<Vec<f64>> {
        match self {
            SliceSpec::Slab {
                height,
                core_width,
                core_eps,
                clad_eps,
            } => {
                if core_width > height {
                    return Err(Error::Config(format!("modes.slice.core_width = {core_width} exceeds height = {height}")));
                }
                let lo = (height - core_width) / 2;
                Ok((0..*height)
                    .map(|j| if j >= lo && j < lo + core_width { *core_eps } else { *clad_eps })
                    .collect())
            }
            SliceSpec::Explicit { eps } => Ok(eps.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSpec {
    pub wavelength_grid_points: f64,
    pub slice: SliceSpec,
    #[serde(default)]
    pub periodic: bool,
    /// Report only this mode; fails if the slice has fewer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_index: Option<usize>,
}

fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Device family; required by `design` and `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DeviceKind>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Used when no `--out` is given; relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub heatmaps: bool,
    /// Runs never use random numbers; `false` is rejected.
    #[serde(default = "yes")]
    pub deterministic: bool,
    /// Permittivity grid file for `simulate`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupler: Option<CouplerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloak: Option<CloakSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mimic: Option<MimicSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModesSpec>,
}

impl RunConfig {
    pub fn for_kind(kind: DeviceKind) -> Self {
        Self {
            kind: Some(kind),
            iterations: DEFAULT_ITERATIONS,
            output_dir: None,
            heatmaps: true,
            deterministic: true,
            structure_file: None,
            coupler: None,
            cloak: None,
            mimic: None,
            target: None,
            custom: None,
            modes: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))?;
        cfg.check_sections()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn check_sections(&self) -> Result<()> {
        if !self.deterministic {
            return Err(Error::Config("deterministic = false is not supported; runs never use randomness".into()));
        }
        let present = [
            (DeviceKind::Coupler, self.coupler.is_some()),
            (DeviceKind::Cloak, self.cloak.is_some()),
            (DeviceKind::Mimic, self.mimic.is_some()),
            (DeviceKind::Target, self.target.is_some()),
            (DeviceKind::Custom, self.custom.is_some()),
        ];
        for (kind, there) in present {
            if there && self.kind != Some(kind) {
                return Err(Error::Config(format!(
                    "section [{}] given but kind is {}",
                    kind.section(),
                    self.kind.map_or("unset", |k| k.section())
                )));
            }
        }
        if self.kind == Some(DeviceKind::Custom) && self.custom.is_none() {
            return Err(Error::Config("kind = \"custom\" needs a [custom] section".into()));
        }
        Ok(())
    }

    /// Build the configured device.
    pub fn device(&self) -> Result<Device> {
        let kind = self
            .kind
            .ok_or_else(|| Error::Config("kind is required (coupler, cloak, mimic, target or custom)".into()))?;
        let named = |e: Error| match e {
            Error::Config(msg) => Error::Config(format!("[{}] {msg}", kind.section())),
            other => other,
        };
        match kind {
            DeviceKind::Coupler => self.coupler.clone().unwrap_or_default().build(),
            DeviceKind::Cloak => self.cloak.clone().unwrap_or_default().build(),
            DeviceKind::Mimic => self.mimic.clone().unwrap_or_default().build(),
            DeviceKind::Target => self.target.clone().unwrap_or_default().build(),
            DeviceKind::Custom => self.custom.as_ref().expect("checked on parse").build(),
        }
        .map_err(named)
    }

    /// Build the device and check that it forms a valid design problem.
    pub fn validate(&self) -> Result<Device> {
        let device = self.device()?;
        device.problem(self.iterations)?;
        Ok(device)
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::parse("kind = \"coupler\"\n[coupler]\nbox_wdth = 3\n").unwrap_err();
        assert!(err.to_string().contains("box_wdth"), "{err}");
        assert!(RunConfig::parse("kind = \"coupler\"\nspeed = 1\n").is_err());
    }

    #[test]
    fn section_must_match_kind() {
        assert!(RunConfig::parse("kind = \"cloak\"\n[coupler]\n").is_err());
        assert!(RunConfig::parse("kind = \"custom\"\n").is_err());
    }

    #[test]
    fn low_eps_names_the_key() {
        let cfg = RunConfig::parse("kind = \"coupler\"\n[coupler]\neps_lo = 0.5\n").unwrap();
        let err = cfg.device().unwrap_err();
        assert!(matches!(err, Error::Config(_)) && err.to_string().contains("eps_lo"), "{err}");
    }

    #[test]
    fn slab_slice() {
        let s = SliceSpec::Slab {
            height: 6,
            core_width: 2,
            core_eps: 4.0,
            clad_eps: 1.0,
        };
        assert_eq!(s.eps().unwrap(), vec![1.0, 1.0, 4.0, 4.0, 1.0, 1.0]);
    }

    #[test]
    fn round_trip_keeps_every_section() {
        let mut cfg = RunConfig::for_kind(DeviceKind::Cloak);
        cfg.cloak = Some(CloakSpec::anti_reflection());
        cfg.iterations = 12;
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }
}
