use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Serialize, Serializer};
use varimorph::KernelKind;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "varimorph", version, about = "Variational implicit functions and shape transformation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Basis function: r2logr, r or r3 (default depends on dimension).
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<KernelKind>,
    /// Dimension of the input shapes; a mismatch is a usage error.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=5))]
    dim_hint: Option<u64>,
    /// Keep input coordinates instead of mapping shapes into a unit box.
    #[arg(long)]
    no_normalize: bool,
    /// Seed recorded in the manifest (test fixtures only).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args)]
struct ImageArgs {
    /// Gray level of the shape boundary.
    #[arg(long, default_value_t = 127.5)]
    level: f64,
    /// Distance of normal constraints from the boundary (pixels for
    /// images, model units for meshes).
    #[arg(long)]
    normal_offset: Option<f64>,
    /// Keep every n-th boundary crossing.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Debug, Clone, Args)]
struct SequenceArgs {
    #[arg(long)]
    frames: usize,
    #[arg(long, default_value_t = 1.0)]
    tmax: f64,
    /// Lattice points along the longest axis of the extraction box.
    #[arg(long)]
    res: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one interpolant from an image, mesh or constraint file.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Transformation between two PGM shapes.
    Morph2d {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        seq: SequenceArgs,
        /// Also write a thresholded PGM per frame.
        #[arg(long)]
        raster: bool,
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Transformation between two OBJ shapes.
    Morph3d {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        seq: SequenceArgs,
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Surface from a manifest of planar contour slices.
    Reconstruct {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long, default_value_t = 48)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Transformation between A and B biased by an influence shape C.
    Influence {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        c: PathBuf,
        /// Waypoints `s,t:s,t:...` in the placement plane.
        #[arg(long, default_value = "0,0:1,0", value_parser = parse_path)]
        path: PathSpec,
        #[command(flatten)]
        seq: SequenceArgs,
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Transformation between two PGM shapes pre-aligned by landmarks.
    Warp {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        corr: PathBuf,
        #[command(flatten)]
        seq: SequenceArgs,
        #[command(flatten)]
        image: ImageArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Per-pixel blend of signed distance fields.
    BaselineSdf {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 127.5)]
        level: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    s.parse().map_err(|e: varimorph::Error| e.to_string())
}

/// Waypoints of an influence path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec(pub Vec<[f64; 2]>);

fn parse_path(s: &str) -> Result<PathSpec, String> {
    let points = s
        .split(':')
        .map(|pair| {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| format!("waypoint `{pair}` is not `s,t`"))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| format!("invalid coordinate `{v}`"))
            };
            Ok([parse(a)?, parse(b)?])
        })
        .collect::<Result<Vec<_>, String>>()?;
    if points.len() < 2 {
        return Err("a path needs at least two waypoints".into());
    }
    Ok(PathSpec(points))
}

/// Which pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Build,
    Morph2d,
    Morph3d,
    Reconstruct,
    Influence,
    Warp,
    BaselineSdf,
}

fn kernel_name<S: Serializer>(k: &Option<KernelKind>, s: S) -> Result<S::Ok, S::Error> {
    match k {
        Some(k) => s.serialize_some(k.name()),
        None => s.serialize_none(),
    }
}

/// Validated settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub task: Task,
    /// Input files by role (`a`, `b`, `c`, `corr`, `stack`, `input`).
    pub inputs: Vec<(String, PathBuf)>,
    /// Output file (`build`, `reconstruct`) or directory.
    pub out: PathBuf,
    #[serde(serialize_with = "kernel_name")]
    pub kernel: Option<KernelKind>,
    pub dim_hint: Option<usize>,
    pub t_max: f64,
    pub frames: usize,
    pub res: Option<usize>,
    pub normalize: bool,
    pub seed: u64,
    pub level: f64,
    pub normal_offset: Option<f64>,
    pub stride: usize,
    pub path: Option<Vec<[f64; 2]>>,
    pub raster: bool,
}

impl RunConfig {
    pub fn input(&self, role: &str) -> &Path {
        self.inputs
            .iter()
            .find(|(r, _)| r == role)
            .map(|(_, p)| p.as_path())
            .unwrap_or_else(|| panic!("no `{role}` input configured"))
    }

    fn base(task: Task, out: PathBuf, common: &Common) -> Self {
        RunConfig {
            task,
            inputs: Vec::new(),
            out,
            kernel: common.kernel,
            dim_hint: common.dim_hint.map(|d| d as usize),
            t_max: 1.0,
            frames: 0,
            res: None,
            normalize: !common.no_normalize,
            seed: common.seed,
            level: 127.5,
            normal_offset: None,
            stride: 1,
            path: None,
            raster: false,
        }
    }

    fn with_inputs(mut self, inputs: &[(&str, &PathBuf)]) -> Self {
        self.inputs = inputs
            .iter()
            .map(|(r, p)| (r.to_string(), (*p).clone()))
            .collect();
        self
    }

    fn with_image(mut self, image: &ImageArgs) -> Self {
        self.level = image.level;
        self.normal_offset = image.normal_offset;
        self.stride = image.stride;
        self
    }

    fn with_sequence(mut self, seq: &SequenceArgs) -> Self {
        self.frames = seq.frames;
        self.t_max = seq.tmax;
        self.res = seq.res;
        self
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        let sequence = !matches!(self.task, Task::Build | Task::Reconstruct);
        if sequence && self.frames < 2 {
            return usage(format!("--frames must be at least 2, got {}", self.frames));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return usage(format!("--tmax must be positive, got {}", self.t_max));
        }
        if let Some(r) = self.res {
            if r < 4 {
                return usage(format!("--res must be at least 4, got {r}"));
            }
        }
        if !(self.level.is_finite() && self.level > 0.0 && self.level < 255.0) {
            return usage(format!("--level must lie strictly between 0 and 255, got {}", self.level));
        }
        if let Some(k) = self.normal_offset {
            if !(k.is_finite() && k > 0.0) {
                return usage(format!("--normal-offset must be positive, got {k}"));
            }
        }
        if self.stride == 0 {
            return usage("--stride must be at least 1".into());
        }
        for (_, path) in &self.inputs {
            if let Err(e) = std::fs::metadata(path) {
                return Err(CliError::MissingInput {
                    path: path.clone(),
                    message: e.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Parses and validates `argv` (including the program name).
///
/// Help and version requests come back as `Err(Ok(text))` so the caller
/// can print them and exit successfully.
pub fn parse_cli<I, S>(argv: I) -> Result<RunConfig, Result<String, CliError>>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return Err(match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Ok(e.to_string()),
                _ => {
                    let text = e.to_string();
                    let head = text
                        .lines()
                        .take_while(|l| !l.trim().is_empty())
                        .map(str::trim)
                        .collect::<Vec<_>>()
                        .join(" ");
                    Err(CliError::Usage(head.trim_start_matches("error: ").to_string()))
                }
            });
        }
    };
    let config = match &cli.command {
        Command::Build {
            input,
            out,
            image,
            common,
        } => RunConfig::base(Task::Build, out.clone(), common)
            .with_inputs(&[("input", input)])
            .with_image(image),
        Command::Morph2d {
            a,
            b,
            seq,
            raster,
            image,
            common,
        } => {
            let mut c = RunConfig::base(Task::Morph2d, seq.out.clone(), common)
                .with_inputs(&[("a", a), ("b", b)])
                .with_sequence(seq)
                .with_image(image);
            c.raster = *raster;
            c
        }
        Command::Morph3d {
            a,
            b,
            seq,
            image,
            common,
        } => RunConfig::base(Task::Morph3d, seq.out.clone(), common)
            .with_inputs(&[("a", a), ("b", b)])
            .with_sequence(seq)
            .with_image(image),
        Command::Reconstruct {
            stack,
            res,
            out,
            common,
        } => {
            let mut c = RunConfig::base(Task::Reconstruct, out.clone(), common)
                .with_inputs(&[("stack", stack)]);
            c.res = Some(*res);
            c
        }
        Command::Influence {
            a,
            b,
            c,
            path,
            seq,
            image,
            common,
        } => {
            let mut cfg = RunConfig::base(Task::Influence, seq.out.clone(), common)
                .with_inputs(&[("a", a), ("b", b), ("c", c)])
                .with_sequence(seq)
                .with_image(image);
            cfg.path = Some(path.0.clone());
            cfg
        }
        Command::Warp {
            a,
            b,
            corr,
            seq,
            image,
            common,
        } => RunConfig::base(Task::Warp, seq.out.clone(), common)
            .with_inputs(&[("a", a), ("b", b), ("corr", corr)])
            .with_sequence(seq)
            .with_image(image),
        Command::BaselineSdf {
            a,
            b,
            frames,
            out,
            level,
            common,
        } => {
            let mut c = RunConfig::base(Task::BaselineSdf, out.clone(), common)
                .with_inputs(&[("a", a), ("b", b)]);
            c.frames = *frames;
            c.level = *level;
            c
        }
    };
    config.validate().map_err(Err)?;
    Ok(config)
}
