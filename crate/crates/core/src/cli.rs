//! Command-line driver: config resolution, the five commands, output files and exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimates::{format_reports, run_all_checks, CheckConfig, Summary};
use crate::kernels::{admissibility_integral, RadialKernel};
use crate::minimizer::{minimize, sweep_epsilon, OptimizerConfig};
use crate::nonlocal_energy::gamow_energy;
use crate::quadrature::Refinement;
use crate::sphere_grid::SphereGrid;
use crate::star_shape::{write_shape, ShapeFile};

pub const FORMAT_VERSION: &str = "gamow-output 1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_CHECK_ERROR: i32 = 4;
pub const EXIT_NONCONVERGED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "gamow", about = "Perimeter plus nonlocal kernel energy on nearly spherical sets", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the batch of estimate checks and write a report.
    Verify(Common),
    /// Evaluate perimeter, kernel energy and F_ε for a shape file.
    Energy {
        shape: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Minimize F_ε at one ε.
    Minimize(Common),
    /// Minimize along a descending list of ε values with warm starts.
    Sweep(Common),
    /// List kernel families and their admissibility integrals.
    Kernels(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Key = value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernel spec, e.g. `riesz:alpha=2`, `exp:mu=1`, `const:c=1`, `truncpow:alpha=1,cutoff=0.5`.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Grid resolution m.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, conflicts_with = "eps_list")]
    pub eps: Option<f64>,
    /// Comma-separated, descending.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write (ε, deviation) pairs for plotting.
    #[arg(long)]
    pub plot_data: bool,
}

/// Fully resolved settings for every command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernels: Vec<RadialKernel>,
    pub dims: Vec<usize>,
    pub grid: Option<usize>,
    pub eps: f64,
    pub eps_list: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub plot_data: bool,
    pub optimizer: OptimizerConfig,
    pub checks: CheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernels: vec![RadialKernel::riesz(2.0)],
            dims: vec![3],
            grid: None,
            eps: 1e-3,
            eps_list: vec![1.0, 0.3, 0.1, 0.03, 0.01, 0.003],
            seed: 1,
            out: PathBuf::from("out"),
            threads: None,
            plot_data: false,
            optimizer: OptimizerConfig::default(),
            checks: CheckConfig::default(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, sep: char) -> Result<Vec<T>> {
    value
        .split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{}`", value.trim())))
}

fn parse_kernel(s: &str) -> Result<RadialKernel> {
    s.trim().parse::<RadialKernel>().map_err(|e| Error::Config(format!("kernel: {e}")))
}

impl RunConfig {
    /// Defaults for a command before any file or flag is applied.
    pub fn for_command(verify: bool) -> Self {
        let mut c = Self::default();
        if verify {
            c.kernels = CheckConfig::default().kernels;
            c.dims = vec![2, 3];
        }
        c
    }

    /// Apply one `key = value` setting; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let o = &mut self.optimizer;
        let ch = &mut self.checks;
        match key {
            "kernel" => self.kernels = vec![parse_kernel(value)?],
            "kernels" => {
                self.kernels = value
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(parse_kernel)
                    .collect::<Result<_>>()?
            }
            "dim" => self.dims = vec![parse_one(key, value)?],
            "dims" => self.dims = parse_list(key, value, ',')?,
            "grid" => self.grid = Some(parse_one(key, value)?),
            "eps" => self.eps = parse_one(key, value)?,
            "eps_list" => self.eps_list = parse_list(key, value, ',')?,
            "seed" => self.seed = parse_one(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "threads" => self.threads = Some(parse_one(key, value)?),
            "plot_data" => self.plot_data = parse_one(key, value)?,
            "degree" => o.degree = parse_one(key, value)?,
            "step0" => o.step0 = parse_one(key, value)?,
            "shrink" => o.shrink = parse_one(key, value)?,
            "max_iters" => o.max_iters = parse_one(key, value)?,
            "grad_tol" => o.grad_tol = parse_one(key, value)?,
            "deviation_tol" => o.deviation_tol = parse_one(key, value)?,
            "restarts" => o.restarts = parse_one(key, value)?,
            "fd_step" => o.fd_step = parse_one(key, value)?,
            "start_amplitude" => o.start_amplitude = parse_one(key, value)?,
            "shapes" => ch.shapes = parse_one(key, value)?,
            "amplitude" => ch.amplitude = parse_one(key, value)?,
            "check_degree" => ch.degree = parse_one(key, value)?,
            "grid2" => ch.grid2 = parse_one(key, value)?,
            "grid3" => ch.grid3 = parse_one(key, value)?,
            "rho_grid" => ch.rho_grid = parse_list(key, value, ',')?,
            "tau_grid" => ch.tau_grid = parse_list(key, value, ',')?,
            "ceiling.gradient_energy" => ch.gradient_energy_ceiling = Some(parse_one(key, value)?),
            "ceiling.cross_term" => ch.cross_term_ceiling = Some(parse_one(key, value)?),
            "ceiling.layer" => ch.layer_ceiling = Some(parse_one(key, value)?),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply a config file's `key = value` lines (`#` starts a comment).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)));
            };
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn resolve(common: &Common, verify: bool) -> Result<Self> {
        let mut c = Self::for_command(verify);
        if let Some(path) = &common.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            c.apply_text(&text)?;
        }
        if let Some(k) = &common.kernel {
            c.kernels = vec![parse_kernel(k)?];
        }
        if let Some(d) = common.dim {
            c.dims = vec![d];
        }
        if let Some(m) = common.grid {
            c.grid = Some(m);
        }
        if let Some(e) = common.eps {
            c.eps = e;
        }
        if let Some(l) = &common.eps_list {
            c.eps_list = l.clone();
        }
        if let Some(s) = common.seed {
            c.seed = s;
        }
        if let Some(o) = &common.out {
            c.out = o.clone();
        }
        if let Some(t) = common.threads {
            c.threads = Some(t);
        }
        c.plot_data |= common.plot_data;
        c.optimizer.seed = c.seed;
        c.checks.seed = c.seed;
        c.checks.kernels = c.kernels.clone();
        c.checks.dims = c.dims.clone();
        if let Some(m) = c.grid {
            c.checks.grid2 = m;
            c.checks.grid3 = m;
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if let Some(d) = self.dims.iter().find(|d| !(**d == 2 || **d == 3)) {
            return Err(Error::Config(format!("dim must be 2 or 3, got {d}")));
        }
        if self.dims.is_empty() {
            return Err(Error::Config("no dimension given".into()));
        }
        for k in &self.kernels {
            for &d in &self.dims {
                k.validate(d).map_err(|e| Error::Config(format!("kernel {k}: {e}")))?;
            }
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be ≥ 0, got {}", self.eps)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        self.optimizer.validate()
    }

    /// Default grid for the optimizer: coarse in space, fine on the circle.
    pub fn optimizer_grid(&self, dim: usize) -> usize {
        self.grid.unwrap_or(if dim == 2 { 64 } else { 12 })
    }

    /// Echoed header. Thread count and output directory are left out so that output
    /// files are comparable across machines and runs.
    pub fn header(&self, command: &str) -> Vec<String> {
        let o = &self.optimizer;
        let ch = &self.checks;
        let fmt_list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut h = vec![
            FORMAT_VERSION.to_string(),
            format!("command = {command}"),
            format!(
                "kernels = {}",
                self.kernels.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")
            ),
            format!(
                "dims = {}",
                self.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
            ),
            format!("grid = {}", self.grid.map_or("default".into(), |m| m.to_string())),
            format!("seed = {}", self.seed),
        ];
        match command {
            "verify" => {
                h.push(format!("shapes = {}", ch.shapes));
                h.push(format!("amplitude = {:e}", ch.amplitude));
                h.push(format!("check_degree = {}", ch.degree));
                h.push(format!("grid2 = {}", ch.grid2));
                h.push(format!("grid3 = {}", ch.grid3));
                h.push(format!("eps = {:e}", ch.epsilon));
                h.push(format!("rho_grid = {}", fmt_list(&ch.rho_grid)));
                h.push(format!("tau_grid = {}", fmt_list(&ch.tau_grid)));
                for (k, v) in [
                    ("ceiling.gradient_energy", ch.gradient_energy_ceiling),
                    ("ceiling.cross_term", ch.cross_term_ceiling),
                    ("ceiling.layer", ch.layer_ceiling),
                ] {
                    h.push(format!("{k} = {}", v.map_or("calibrated".into(), |x| format!("{x:e}"))));
                }
            }
            "energy" => h.push(format!("eps = {:e}", self.eps)),
            _ => {
                if command == "sweep" {
                    h.push(format!("eps_list = {}", fmt_list(&self.eps_list)));
                } else {
                    h.push(format!("eps = {:e}", self.eps));
                }
                h.push(format!("degree = {}", o.degree));
                h.push(format!("step0 = {:e}", o.step0));
                h.push(format!("shrink = {:e}", o.shrink));
                h.push(format!("max_iters = {}", o.max_iters));
                h.push(format!("grad_tol = {:e}", o.grad_tol));
                h.push(format!("deviation_tol = {:e}", o.deviation_tol));
                h.push(format!("restarts = {}", o.restarts));
                h.push(format!("fd_step = {:e}", o.fd_step));
                h.push(format!("start_amplitude = {:e}", o.start_amplitude));
            }
        }
        h
    }
}

fn header_block(lines: &[String]) -> String {
    let mut s = String::new();
    for l in lines {
        let _ = writeln!(s, "# {l}");
    }
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::ShapeParse(_)
        | Error::Io(_)
        | Error::InvalidKernel(_)
        | Error::InvalidGrid(_)
        | Error::UnsupportedDimension(_) => EXIT_INPUT,
        _ => EXIT_CHECK_ERROR,
    }
}

fn single<T: Copy + std::fmt::Display>(what: &str, v: &[T]) -> Result<T> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::Config(format!("{what} needs exactly one value, got {}", v.len()))),
    }
}

fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let reports = run_all_checks(&cfg.checks)?;
    let summary = Summary::of(&reports);
    let text = header_block(&cfg.header("verify")) + &format_reports(&reports);
    write_file(&cfg.out, "verify.txt", &text)?;
    println!(
        "{} checks: {} passed, {} failed, {} errors ({} degenerate)",
        summary.total, summary.passed, summary.failed, summary.errors, summary.degenerate
    );
    Ok(summary.exit_code())
}

fn cmd_energy(cfg: &RunConfig, shape: &Path, dim_flag: Option<usize>) -> Result<i32> {
    let text = std::fs::read_to_string(shape).map_err(|e| Error::ShapeParse(format!("{}: {e}", shape.display())))?;
    let file = ShapeFile::parse(&text)?;
    if let Some(d) = dim_flag {
        if d != file.dim {
            return Err(Error::Config(format!("--dim {d} disagrees with the shape file (N = {})", file.dim)));
        }
    }
    let k = single("kernel", &cfg.kernels)?;
    k.validate(file.dim).map_err(|e| Error::Config(format!("kernel {k}: {e}")))?;
    let u = file.into_graph()?;
    let report = gamow_energy(&k, cfg.eps, &u)?;
    let mut header = cfg.header("energy");
    header[3] = format!("dims = {}", u.dim());
    header.push(format!("shape_grid = {}", u.grid().resolution()));
    print!("{}{}", header_block(&header), report.to_text());
    Ok(EXIT_OK)
}

fn cmd_minimize(cfg: &RunConfig) -> Result<i32> {
    let k = single("kernel", &cfg.kernels)?;
    let dim = single("dim", &cfg.dims)?;
    let grid = Arc::new(SphereGrid::build(dim, cfg.optimizer_grid(dim))?);
    let m = minimize(&k, cfg.eps, &cfg.optimizer, grid)?;
    let header = cfg.header("minimize");
    let hb = header_block(&header);
    write_file(&cfg.out, "shape.txt", &write_shape(&m.shape, &header))?;
    write_file(&cfg.out, "trace.csv", &(hb.clone() + &m.trace_csv()))?;
    let mut report = hb + &m.report.to_text();
    let _ = writeln!(report, "deviation = {:.6e}\nconverged = {}", m.deviation, m.converged);
    write_file(&cfg.out, "report.txt", &report)?;
    println!(
        "deviation {:.3e}, F_eps {:.12e}, converged {}",
        m.deviation, m.report.f_eps, m.converged
    );
    Ok(if m.converged { EXIT_OK } else { EXIT_NONCONVERGED })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let k = single("kernel", &cfg.kernels)?;
    let dim = single("dim", &cfg.dims)?;
    let grid = Arc::new(SphereGrid::build(dim, cfg.optimizer_grid(dim))?);
    let s = sweep_epsilon(&k, &cfg.optimizer, grid, &cfg.eps_list)?;
    let mut header = cfg.header("sweep");
    header.push(format!(
        "empirical ball-regime onset (heuristic, not a rigorous threshold) = {}",
        s.ball_onset.map_or("none".into(), |e| format!("{e:e}"))
    ));
    let hb = header_block(&header);
    write_file(&cfg.out, "sweep.csv", &(hb.clone() + &s.table_csv()))?;
    write_file(&cfg.out, "shape.txt", &write_shape(&s.last.shape, &header))?;
    write_file(&cfg.out, "trace.csv", &(hb.clone() + &s.last.trace_csv()))?;
    if cfg.plot_data {
        write_file(&cfg.out, "sweep_plot.dat", &(hb + &s.plot_data()))?;
    }
    print!("{}", s.table_csv());
    Ok(if s.any_nonconvergence() { EXIT_NONCONVERGED } else { EXIT_OK })
}

fn cmd_kernels(cfg: &RunConfig) -> Result<i32> {
    println!("families: riesz:alpha=A (t^(A-N), 0 < A <= N), exp:mu=M (e^(-M t)), const:c=C, truncpow:alpha=A,cutoff=T");
    println!("any spec accepts an optional ,dilation=D (g(t/D))");
    for k in &cfg.kernels {
        for &d in &cfg.dims {
            match admissibility_integral(k, d, Refinement::default()) {
                Ok(v) => println!("{k} N={d}: admissibility integral {v:.10e}"),
                Err(e) => println!("{k} N={d}: not admissible ({e})"),
            }
        }
    }
    Ok(EXIT_OK)
}

fn install_threads(n: Option<usize>) {
    if let Some(n) = n {
        // A global pool can be installed only once per process; later calls keep the first.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Run a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (common, verify) = match &cli.command {
        Command::Verify(c) => (c, true),
        Command::Energy { common, .. } => (common, false),
        Command::Minimize(c) | Command::Sweep(c) | Command::Kernels(c) => (c, false),
    };
    let cfg = match RunConfig::resolve(common, verify) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    install_threads(cfg.threads);
    let result = match &cli.command {
        Command::Verify(_) => cmd_verify(&cfg),
        Command::Energy { shape, common } => cmd_energy(&cfg, shape, common.dim),
        Command::Minimize(_) => cmd_minimize(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
        Command::Kernels(_) => cmd_kernels(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
