use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ProjectConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "rigidflow",
    version,
    about = "Transfer rigid motion from trajectories onto point clouds"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "MM_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene with known motion.
    Synth(SynthArgs),
    /// Fit the rigid motion prior from trajectories.
    Extract(ConfigArgs),
    /// Apply a prior to a target cloud, refine, render and score.
    Transfer(ConfigArgs),
    /// Render a velocity field or trajectory file over a cloud.
    Render(ConfigArgs),
    /// Score rendered frames against reference frames.
    Metrics(ConfigArgs),
    /// Write the k-NN graph of a cloud as text.
    GraphDump(ConfigArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MotionKind {
    Translation,
    Rotation,
    Oscillation,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub motion: MotionKind,
    /// Frame count T.
    #[arg(long)]
    pub frames: usize,
    /// Trajectory count K.
    #[arg(long, default_value_t = 300)]
    pub trajectories: usize,
    /// 1 moves everything; 2 adds a static half with label 0.
    #[arg(long, default_value_t = 1)]
    pub components: usize,
    /// Translation per frame, `x,y,z`.
    #[arg(long, value_parser = parse_vec3, default_value = "0.01,0,0")]
    pub velocity: [f64; 3],
    #[arg(long, default_value_t = 5.0)]
    pub deg_per_frame: f64,
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1")]
    pub axis: [f64; 3],
    /// Rotation pivot, `x,y,z`; defaults to the moving region's center.
    #[arg(long, value_parser = parse_vec3)]
    pub pivot: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_vec3, default_value = "0.1,0,0")]
    pub amplitude: [f64; 3],
    /// Oscillation cycles per frame.
    #[arg(long, default_value_t = 0.1)]
    pub frequency: f64,
    /// Standard deviation of Gaussian noise added to the trajectories.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for trajectories.mmtj, prior_gt.mmsp and source.ply.
    #[arg(long, default_value = "synth")]
    pub output: PathBuf,
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("bad number '{p}'"))?;
    }
    Ok(out)
}

fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected r,g,b, got '{s}'"));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("bad channel '{p}'"))?;
    }
    Ok(out)
}

/// The config file plus one optional override per config key.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// Project config file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    pub dump_config: bool,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, help_heading = "Paths")]
    pub trajectories: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub tracks: Option<PathBuf>,
    #[arg(long, alias = "track_labels", help_heading = "Paths")]
    pub track_labels: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub depth: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub cameras: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub masks: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub prior: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub target: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub labels: Option<PathBuf>,
    #[arg(long, alias = "label_seeds", help_heading = "Paths")]
    pub label_seeds: Option<PathBuf>,
    #[arg(long, alias = "boundary_seeds", help_heading = "Paths")]
    pub boundary_seeds: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub field: Option<PathBuf>,
    #[arg(long, alias = "camera_path", help_heading = "Paths")]
    pub camera_path: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub rendered: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub reference: Option<PathBuf>,
    #[arg(long, help_heading = "Paths")]
    pub output: Option<PathBuf>,

    #[arg(long, help_heading = "Extract")]
    pub window: Option<usize>,

    #[arg(long, help_heading = "Refine")]
    pub smoothing: Option<bool>,
    #[arg(long, help_heading = "Refine")]
    pub propagate: Option<bool>,
    #[arg(long, help_heading = "Refine")]
    pub k: Option<usize>,
    #[arg(long, alias = "lambda_topo", help_heading = "Refine")]
    pub lambda_topo: Option<f64>,
    #[arg(long, alias = "lambda_kin", help_heading = "Refine")]
    pub lambda_kin: Option<f64>,
    #[arg(long, help_heading = "Refine")]
    pub sweeps: Option<usize>,
    #[arg(long, help_heading = "Refine")]
    pub damping: Option<f64>,
    #[arg(long, help_heading = "Refine")]
    pub epsilon: Option<f64>,
    #[arg(long, help_heading = "Refine")]
    pub hops: Option<usize>,
    #[arg(long, alias = "static_mode", help_heading = "Refine")]
    pub static_mode: Option<String>,

    #[arg(long, help_heading = "Render")]
    pub width: Option<usize>,
    #[arg(long, help_heading = "Render")]
    pub height: Option<usize>,
    /// `r,g,b` in 0..=255.
    #[arg(long, value_parser = parse_rgb, help_heading = "Render")]
    pub background: Option<[u8; 3]>,
    #[arg(long, help_heading = "Render")]
    pub png: Option<bool>,

    #[arg(long, allow_hyphen_values = true, help_heading = "Control")]
    pub speed: Option<f64>,
    #[arg(long, help_heading = "Control")]
    pub repeats: Option<usize>,
    #[arg(long, help_heading = "Control")]
    pub mode: Option<String>,
    #[arg(long, help_heading = "Control")]
    pub alignment: Option<String>,
}

impl ConfigArgs {
    /// Loads the config file, if any, and applies the overrides.
    pub fn resolve(&self) -> Result<ProjectConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ProjectConfig::load(path)?,
            None => ProjectConfig::default(),
        };
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        fn set_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        set(&mut c.seed, &self.seed);
        let p = &mut c.paths;
        set_path(&mut p.trajectories, &self.trajectories);
        set_path(&mut p.tracks, &self.tracks);
        set_path(&mut p.track_labels, &self.track_labels);
        set_path(&mut p.depth, &self.depth);
        set_path(&mut p.cameras, &self.cameras);
        set_path(&mut p.masks, &self.masks);
        set(&mut p.prior, &self.prior);
        set_path(&mut p.target, &self.target);
        set_path(&mut p.labels, &self.labels);
        set_path(&mut p.label_seeds, &self.label_seeds);
        set_path(&mut p.boundary_seeds, &self.boundary_seeds);
        set_path(&mut p.field, &self.field);
        set_path(&mut p.camera_path, &self.camera_path);
        set_path(&mut p.rendered, &self.rendered);
        set_path(&mut p.reference, &self.reference);
        set(&mut p.output, &self.output);
        set(&mut c.extract.window, &self.window);
        let r = &mut c.refine;
        set(&mut r.smoothing, &self.smoothing);
        set(&mut r.propagate, &self.propagate);
        set(&mut r.k, &self.k);
        set(&mut r.lambda_topo, &self.lambda_topo);
        set(&mut r.lambda_kin, &self.lambda_kin);
        set(&mut r.sweeps, &self.sweeps);
        set(&mut r.damping, &self.damping);
        set(&mut r.epsilon, &self.epsilon);
        set(&mut r.hops, &self.hops);
        set(&mut r.static_mode, &self.static_mode);
        let v = &mut c.render;
        set(&mut v.width, &self.width);
        set(&mut v.height, &self.height);
        set(&mut v.background, &self.background);
        set(&mut v.png, &self.png);
        let k = &mut c.control;
        set(&mut k.speed, &self.speed);
        set(&mut k.repeats, &self.repeats);
        set(&mut k.mode, &self.mode);
        set(&mut k.alignment, &self.alignment);
        c.validate()?;
        Ok(c)
    }
}
