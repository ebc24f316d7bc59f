use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use relaxlab::linalg::Mat;
use relaxlab::nonlinear::max_time_step;
use relaxlab::solver::{check_wave_cone, required_half_length};
use relaxlab::{make_builtin, to_cd_form, CdSystem, RawSystem};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "relaxlab", version, about = "Spectral analysis and decay studies for partially dissipative balance laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Subcommand)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Analyze,
    Kernel,
    Simulate,
    Compare,
    Report,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural checks, C-D form, SK constant and spectral expansions.
    Analyze(Options),
    /// Diffusive kernel samples and remainder decay fits (one space dimension).
    Kernel(Options),
    /// Nonlinear or linearized evolution with decay fits.
    Simulate(Options),
    /// Linear or Chapman-Enskog comparison of a stored trajectory.
    Compare(Options),
    /// Pass/fail summary per acceptance criterion from prior outputs.
    Report(Options),
}

impl Command {
    pub fn split(self) -> (CommandKind, Options) {
        match self {
            Command::Analyze(o) => (CommandKind::Analyze, o),
            Command::Kernel(o) => (CommandKind::Kernel, o),
            Command::Simulate(o) => (CommandKind::Simulate, o),
            Command::Compare(o) => (CommandKind::Compare, o),
            Command::Report(o) => (CommandKind::Report, o),
        }
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct Options {
    /// Builtin system: p_system, euler_damping, euler_relaxation or jin_xin.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Comma-separated builtin parameters.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub params: Option<Vec<f64>>,
    /// System definition file (TOML).
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Run configuration file (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Points per axis.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Half-length L of the periodic box [-L, L)^m.
    #[arg(long)]
    pub domain_l: Option<f64>,
    #[arg(long, visible_alias = "T")]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Low/high frequency cutoff for the linear comparison.
    #[arg(long)]
    pub cutoff_a: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Amplitude of the initial bump.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Fit window as `start,end`.
    #[arg(long, value_delimiter = ',')]
    pub fit_window: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Compare against the Chapman-Enskog parabolic solution.
    #[arg(long)]
    pub chapman_enskog: bool,
    /// Evolve the linearized system.
    #[arg(long)]
    pub linear: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    time: TimeSection,
    #[serde(default)]
    analysis: AnalysisSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    builtin: Option<String>,
    params: Option<Vec<f64>>,
    file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n: Option<usize>,
    l: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    t_final: Option<f64>,
    dt: Option<f64>,
    samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    cutoff_a: Option<f64>,
    mu: Option<f64>,
    delta: Option<f64>,
    fit_window: Option<[f64; 2]>,
    seed: Option<u64>,
    beta_max: Option<usize>,
    rho_min: Option<f64>,
    rho_max: Option<f64>,
    rho_count: Option<usize>,
    chapman_enskog: Option<bool>,
    linear: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

/// Where the system comes from, as recorded in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    Builtin { name: String, params: Vec<f64> },
    File { path: PathBuf },
}

impl SystemSource {
    pub fn label(&self) -> String {
        match self {
            SystemSource::Builtin { name, params } => {
                let p: Vec<String> = params.iter().map(|x| x.to_string()).collect();
                format!("{name}({})", p.join(","))
            }
            SystemSource::File { path } => format!("file:{}", path.display()),
        }
    }

    pub fn load(&self) -> anyhow::Result<RawSystem> {
        match self {
            SystemSource::Builtin { name, params } => {
                make_builtin(name, params).map_err(|e| UsageError(e.to_string()).into())
            }
            SystemSource::File { path } => load_system_file(path),
        }
    }
}

/// Fully resolved and validated settings for one subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub system: Option<SystemSource>,
    pub grid_n: Option<usize>,
    pub domain_l: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub samples: usize,
    pub cutoff_a: Option<f64>,
    pub mu: f64,
    pub delta: f64,
    pub fit_window: Option<(f64, f64)>,
    pub seed: u64,
    pub beta_max: usize,
    pub rho: (f64, f64, usize),
    pub chapman_enskog: bool,
    pub linear: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read_text(path: &Path, what: &str) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = read_text(path, what)?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(command: CommandKind, opts: Options) -> anyhow::Result<Self> {
        let file: FileConfig = match &opts.config {
            Some(p) => parse_toml(p, "config file")?,
            None => FileConfig::default(),
        };
        // Relative paths inside a config file are taken from its directory.
        let base = opts.config.as_deref().and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
        let builtin = opts.builtin.or(file.system.builtin);
        let sys_file = opts.file.or_else(|| file.system.file.map(|p| base.join(p)));
        let system = match (builtin, sys_file) {
            (Some(_), Some(_)) => return Err(usage("give either a builtin system or a definition file, not both")),
            (Some(name), None) => {
                Some(SystemSource::Builtin { name, params: opts.params.or(file.system.params).unwrap_or_default() })
            }
            (None, Some(path)) => {
                if !path.is_file() {
                    return Err(usage(format!("system definition file {} does not exist", path.display())));
                }
                Some(SystemSource::File { path })
            }
            (None, None) => None,
        };
        let fit_window = match opts.fit_window {
            Some(w) if w.len() == 2 => Some((w[0], w[1])),
            Some(w) => return Err(usage(format!("--fit-window expects two values, got {}", w.len()))),
            None => file.analysis.fit_window.map(|[a, b]| (a, b)),
        };
        let cfg = RunConfig {
            command,
            system,
            grid_n: opts.grid_n.or(file.grid.n),
            domain_l: opts.domain_l.or(file.grid.l),
            t_final: opts.t_final.or(file.time.t_final),
            dt: opts.dt.or(file.time.dt),
            samples: file.time.samples.unwrap_or(64),
            cutoff_a: opts.cutoff_a.or(file.analysis.cutoff_a),
            mu: opts.mu.or(file.analysis.mu).unwrap_or(relaxlab::asymptotics::DEFAULT_MU),
            delta: opts.delta.or(file.analysis.delta).unwrap_or(0.05),
            fit_window,
            seed: opts.seed.or(file.analysis.seed).unwrap_or(0),
            beta_max: file.analysis.beta_max.unwrap_or(0),
            rho: (
                file.analysis.rho_min.unwrap_or(1e-3),
                file.analysis.rho_max.unwrap_or(100.0),
                file.analysis.rho_count.unwrap_or(256),
            ),
            chapman_enskog: opts.chapman_enskog || file.analysis.chapman_enskog.unwrap_or(false),
            linear: opts.linear || file.analysis.linear.unwrap_or(false),
            out: opts.out.or(file.output.dir.map(|d| base.join(d))).unwrap_or_else(|| PathBuf::from("relaxlab-out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let needs_system = matches!(self.command, CommandKind::Analyze | CommandKind::Kernel | CommandKind::Simulate);
        if needs_system && self.system.is_none() {
            return Err(usage("no system given: use --builtin NAME --params ... or --file PATH"));
        }
        let positive = [("t-final", self.t_final), ("dt", self.dt), ("domain-l", self.domain_l), ("cutoff-a", self.cutoff_a)];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(usage(format!("--{name} must be positive, got {v}")));
                }
            }
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(usage(format!("--delta must be positive, got {}", self.delta)));
        }
        if let Some(n) = self.grid_n {
            if n < 4 || !n.is_power_of_two() {
                return Err(usage(format!("--grid-n must be a power of two >= 4, got {n}")));
            }
        }
        if let Some((a, b)) = self.fit_window {
            if !(a > 0.0 && b > a) {
                return Err(usage(format!("--fit-window needs 0 < start < end, got {a},{b}")));
            }
        }
        let (lo, hi, count) = self.rho;
        if !(lo > 0.0 && hi > lo && count >= 2) {
            return Err(usage("rho grid needs 0 < rho_min < rho_max and rho_count >= 2"));
        }
        if self.samples < 6 {
            return Err(usage("time.samples must be at least 6"));
        }
        Ok(())
    }

    pub fn load_system(&self) -> anyhow::Result<(RawSystem, Mat, CdSystem)> {
        let source = self.system.as_ref().ok_or_else(|| usage("no system given"))?;
        let raw = source.load()?;
        let (m, cd) = to_cd_form(&raw).map_err(|e| usage(format!("{}: {e}", source.label())))?;
        Ok((raw, m, cd))
    }

    pub fn t_final_or(&self, m: usize) -> f64 {
        self.t_final.unwrap_or(if m == 1 { 50.0 } else { 40.0 })
    }

    /// Grid for an evolution up to `t`, checked against the wave cone.
    pub fn grid_for(&self, cd: &CdSystem, t: f64, default_n: usize) -> anyhow::Result<relaxlab::grid::Grid> {
        let l = match self.domain_l {
            Some(l) => l,
            None => (1.05 * required_half_length(cd, t).map_err(|e| usage(e.to_string()))?).ceil(),
        };
        let n = self.grid_n.unwrap_or(default_n);
        if cd.m == 3 && n > relaxlab::solver::MAX_N_3D {
            return Err(usage(format!("three-dimensional grids are limited to {} points per axis", relaxlab::solver::MAX_N_3D)));
        }
        let grid = relaxlab::grid::Grid::uniform(cd.m, n, l).map_err(|e| usage(e.to_string()))?;
        check_wave_cone(cd, &grid, t).map_err(|e| usage(e.to_string()))?;
        Ok(grid)
    }

    pub fn dt_for(&self, cd: &CdSystem, grid: &relaxlab::grid::Grid) -> anyhow::Result<f64> {
        let bound = max_time_step(cd, grid);
        match self.dt {
            Some(dt) if dt > bound => Err(usage(format!("--dt {dt} exceeds the stability bound {bound}"))),
            Some(dt) => Ok(dt),
            None => Ok(bound),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    name: Option<String>,
    n1: usize,
    n2: usize,
    a: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
    a0: Vec<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], key: &str, n: usize) -> anyhow::Result<Mat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(usage(format!("`{key}` must be a {n}x{n} matrix")));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

/// Reads a linear system definition: `n1`, `n2`, `a` (one matrix per space
/// direction), `b` and `a0`, all as row lists.
pub fn load_system_file(path: &Path) -> anyhow::Result<RawSystem> {
    let def: SystemFile = parse_toml(path, "system definition file")?;
    let n = def.n1 + def.n2;
    let a = def
        .a
        .iter()
        .enumerate()
        .map(|(k, rows)| matrix(rows, &format!("a[{k}]"), n))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let b = matrix(&def.b, "b", n)?;
    let a0 = matrix(&def.a0, "a0", n)?;
    let name = def.name.unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    RawSystem::new(name, def.n1, def.n2, a, b, a0).map_err(|e| usage(format!("{}: {e}", path.display())))
}
