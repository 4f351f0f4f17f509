//! Project configuration: a TOML file with one table per pipeline area.
//! Every key can be overridden by the command-line flag of the same name.

use std::path::{Path, PathBuf};

use rigidflow::field::ExtendMode;
use rigidflow::prior::Alignment;
use rigidflow::refine::{StaticMode, DEFAULT_HOPS, DEFAULT_NEIGHBORS};
use rigidflow::render::{DEFAULT_HEIGHT, DEFAULT_WIDTH};
use rigidflow::trajectory::DEFAULT_MASK_WINDOW;
use rigidflow::RefinementConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    /// Seed for every randomized step.
    pub seed: u64,
    pub paths: Paths,
    pub extract: ExtractSection,
    pub refine: RefineSection,
    pub render: RenderSection,
    pub control: ControlSection,
}

/// File locations, relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Trajectory container (MMTJ).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<PathBuf>,
    /// 2D tracks CSV, lifted with `depth` and `cameras` when no trajectory file is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracks: Option<PathBuf>,
    /// Per-track component labels for lifted tracks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track_labels: Option<PathBuf>,
    /// Directory of 16-bit PGM depth maps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    /// Source camera file, one line per frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cameras: Option<PathBuf>,
    /// Directory of PBM foreground masks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masks: Option<PathBuf>,
    /// Prior container (MMSP); written by `extract`, read by `transfer`.
    pub prior: PathBuf,
    /// Target cloud (PLY).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    /// Per-point target labels, overriding the PLY labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// `point component` seeds for geodesic target labelling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_seeds: Option<PathBuf>,
    /// Flood-fill seeds for the motion boundary, one index per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_seeds: Option<PathBuf>,
    /// Velocity field container (MMVF) for `render`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    /// Render camera path, one line per output frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera_path: Option<PathBuf>,
    /// Frames to score with `metrics`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rendered: Option<PathBuf>,
    /// Reference frames for PSNR/SSIM.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            trajectories: None,
            tracks: None,
            track_labels: None,
            depth: None,
            cameras: None,
            masks: None,
            prior: PathBuf::from("prior.mmsp"),
            target: None,
            labels: None,
            label_seeds: None,
            boundary_seeds: None,
            field: None,
            camera_path: None,
            rendered: None,
            reference: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    /// Temporal mask window, odd.
    pub window: usize,
}

impl Default for ExtractSection {
    fn default() -> Self {
        Self {
            window: DEFAULT_MASK_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSection {
    /// Run the Jacobi relaxation.
    pub smoothing: bool,
    /// Diffuse velocities into static points.
    pub propagate: bool,
    pub k: usize,
    pub lambda_topo: f64,
    pub lambda_kin: f64,
    pub sweeps: usize,
    pub damping: f64,
    pub epsilon: f64,
    pub hops: usize,
    pub static_mode: String,
}

impl Default for RefineSection {
    fn default() -> Self {
        let r = RefinementConfig::default();
        Self {
            smoothing: true,
            propagate: true,
            k: DEFAULT_NEIGHBORS,
            lambda_topo: r.lambda_topo,
            lambda_kin: r.lambda_kin,
            sweeps: r.sweeps,
            damping: r.damping,
            epsilon: r.epsilon,
            hops: DEFAULT_HOPS,
            static_mode: StaticMode::default().to_string(),
        }
    }
}

impl RefineSection {
    pub fn refinement(&self) -> RefinementConfig {
        RefinementConfig {
            lambda_topo: self.lambda_topo,
            lambda_kin: self.lambda_kin,
            sweeps: self.sweeps,
            damping: self.damping,
            epsilon: self.epsilon,
        }
    }

    pub fn mode(&self) -> Result<StaticMode, CliError> {
        self.static_mode.parse().map_err(CliError::usage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    pub width: usize,
    pub height: usize,
    pub background: [u8; 3],
    /// Also write PNG frames (needs the `png` build feature).
    pub png: bool,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            background: rigidflow::render::WHITE,
            png: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    /// Velocity multiplier; negative plays the motion backwards.
    pub speed: f64,
    pub repeats: usize,
    /// `loop` or `pingpong`.
    pub mode: String,
    /// `anchored` or `raw`.
    pub alignment: String,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            speed: 1.0,
            repeats: 1,
            mode: ExtendMode::default().to_string(),
            alignment: "anchored".into(),
        }
    }
}

impl ControlSection {
    pub fn extend_mode(&self) -> Result<ExtendMode, CliError> {
        self.mode.parse().map_err(CliError::usage)
    }

    pub fn alignment(&self) -> Result<Alignment, CliError> {
        match self.alignment.as_str() {
            "anchored" => Ok(Alignment::Anchored),
            "raw" => Ok(Alignment::Raw),
            other => Err(CliError::usage(format!("unknown alignment '{other}' (anchored|raw)"))),
        }
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Numeric and enumerated settings; path checks are per command.
    pub fn validate(&self) -> Result<(), CliError> {
        let e = self.extract.window;
        if e == 0 || e.is_multiple_of(2) {
            return Err(CliError::usage(format!("window must be odd and >= 1, got {e}")));
        }
        if self.refine.k == 0 {
            return Err(CliError::usage("k must be >= 1"));
        }
        if self.refine.hops == 0 {
            return Err(CliError::usage("hops must be >= 1"));
        }
        self.refine.refinement().validate().map_err(CliError::usage)?;
        self.refine.mode()?;
        if self.render.width == 0 || self.render.height == 0 {
            return Err(CliError::usage("render size must be positive"));
        }
        if !self.control.speed.is_finite() {
            return Err(CliError::usage("speed must be finite"));
        }
        if self.control.repeats == 0 {
            return Err(CliError::usage("repeats must be >= 1"));
        }
        self.control.extend_mode()?;
        self.control.alignment()?;
        Ok(())
    }
}

/// Fails with a usage error when `path` is missing or does not exist.
pub fn existing<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    let p = path
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("missing required path '{key}'")))?;
    check_exists(p, key)?;
    Ok(p)
}

pub fn check_exists(path: &Path, key: &str) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!("{key}: {} does not exist", path.display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ProjectConfig::default();
        assert_eq!(ProjectConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn full_round_trips() {
        let mut c = ProjectConfig {
            seed: 42,
            ..Default::default()
        };
        c.paths.target = Some("a b/target.ply".into());
        c.paths.reference = Some("ref".into());
        c.refine.epsilon = 3.25e-7;
        c.refine.damping = 0.1;
        c.render.background = [1, 2, 3];
        c.control.speed = -0.3;
        c.control.mode = "pingpong".into();
        assert_eq!(ProjectConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ProjectConfig::parse("seed = 3\n[refine]\nsweeps = 2\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.refine.sweeps, 2);
        assert_eq!(c.refine.k, 2048);
        assert_eq!(c.render, RenderSection::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ProjectConfig::parse("[refine]\nsweep = 2\n").is_err());
        let mut c = ProjectConfig::default();
        c.extract.window = 2;
        assert!(c.validate().is_err());
        let mut c = ProjectConfig::default();
        c.control.mode = "bounce".into();
        assert!(c.validate().is_err());
        let mut c = ProjectConfig::default();
        c.refine.damping = 0.0;
        assert!(c.validate().is_err());
        assert!(ProjectConfig::default().validate().is_ok());
    }
}
