//! Empirical measurements of the constants in the stability estimates: each check
//! reports `lhs`, the quantity `rhs_scale` the unknown constant multiplies, and their
//! ratio, judged against a per-kernel-family bound.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{BoundKernel, RadialKernel};
use crate::nonlocal_energy::{
    energy_decomposition_with, jfun_bound, psi_bound, riesz_ball_bound, riesz_cross_bound, riesz_energy_with,
    EnergyQuadrature, Shell,
};
use crate::quadrature::{graded_left, pairwise_sum, Refinement};
use crate::sphere_grid::{norm_sq, sphere_area, unit_ball_volume, SphereGrid};
use crate::star_shape::{
    barycenter, fuglede_deficit, gradient_norm_sq, perimeter, random_shape, recenter, split_layers, volume,
    w12_norm_sq, RadialGraph,
};

/// Below this `rhs_scale` the ratio is undefined and the check is flagged degenerate.
pub const DEGENERATE_SCALE: f64 = 1e-14;
/// A degenerate check passes when its `lhs` is below this.
pub const DEGENERATE_LHS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// `ratio ≤ c`.
    AtMost(f64),
    /// `ratio > c`.
    Above(f64),
}

impl Bound {
    fn admits(&self, ratio: f64) -> bool {
        match *self {
            Bound::AtMost(c) => ratio <= c,
            Bound::Above(c) => ratio > c,
        }
    }

    fn describe(&self) -> String {
        match self {
            Bound::AtMost(c) => format!("<= {c:e}"),
            Bound::Above(c) => format!("> {c:e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail,
    /// `rhs_scale` vanished; `bool` is whether `lhs` vanished with it.
    Degenerate(bool),
    Error(String),
}

impl Outcome {
    pub fn passed(&self) -> bool {
        matches!(self, Outcome::Pass | Outcome::Degenerate(true))
    }

    fn label(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Degenerate(true) => "degenerate-pass",
            Outcome::Degenerate(false) => "degenerate-fail",
            Outcome::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check_name: String,
    pub kernel: String,
    pub dim: usize,
    pub resolution: usize,
    pub seed: Option<u64>,
    pub lhs: f64,
    pub rhs_scale: f64,
    /// `lhs / rhs_scale`, absent when degenerate.
    pub empirical_constant: Option<f64>,
    pub bound: Bound,
    pub outcome: Outcome,
    /// Check-specific parameters and side quantities, in a fixed order.
    pub extra: Vec<(String, f64)>,
}

impl CheckReport {
    fn judge(name: &str, lhs: f64, rhs_scale: f64, bound: Bound) -> Self {
        let (empirical_constant, outcome) = if rhs_scale > DEGENERATE_SCALE {
            let r = lhs / rhs_scale;
            let outcome = if !r.is_finite() {
                Outcome::Error(format!("non-finite ratio {r}"))
            } else if bound.admits(r) {
                Outcome::Pass
            } else {
                Outcome::Fail
            };
            (Some(r), outcome)
        } else {
            (None, Outcome::Degenerate(lhs.abs() <= DEGENERATE_LHS_TOL))
        };
        Self {
            check_name: name.to_string(),
            kernel: String::new(),
            dim: 0,
            resolution: 0,
            seed: None,
            lhs,
            rhs_scale,
            empirical_constant,
            bound,
            outcome,
            extra: Vec::new(),
        }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Self {
            check_name: name.to_string(),
            kernel: String::new(),
            dim: 0,
            resolution: 0,
            seed: None,
            lhs: f64::NAN,
            rhs_scale: f64::NAN,
            empirical_constant: None,
            bound: Bound::AtMost(f64::INFINITY),
            outcome: Outcome::Error(err.to_string()),
            extra: Vec::new(),
        }
    }

    fn on(mut self, kernel: &RadialKernel, dim: usize, resolution: usize) -> Self {
        self.kernel = kernel.to_string();
        self.dim = dim;
        self.resolution = resolution;
        self
    }

    fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.push((key.to_string(), value));
        self
    }

    /// One `key = value` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "check = {}", self.check_name);
        let _ = writeln!(s, "kernel = {}", self.kernel);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "resolution = {}", self.resolution);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k} = {v:.12e}");
        }
        let _ = writeln!(s, "lhs = {:.12e}", self.lhs);
        let _ = writeln!(s, "rhs_scale = {:.12e}", self.rhs_scale);
        match self.empirical_constant {
            Some(c) => {
                let _ = writeln!(s, "empirical_constant = {c:.12e}");
            }
            None => {
                let _ = writeln!(s, "empirical_constant = none");
            }
        }
        let _ = writeln!(s, "bound = {}", self.bound.describe());
        let _ = writeln!(s, "result = {}", self.outcome.label());
        if let Outcome::Error(msg) = &self.outcome {
            let _ = writeln!(s, "error = {msg}");
        }
        s
    }
}

/// Per-family bounds on the empirical constants (upper bounds unless noted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ceilings {
    pub gradient_energy: f64,
    pub cross_term: f64,
    /// One bound per layer-potential claim.
    pub layer: [f64; 3],
    /// `𝔯(E)/𝔯(B)` upper bound.
    pub ball_maximality: f64,
    /// Decomposition residual relative to `𝔯(B)`.
    pub decomposition: f64,
}

impl Ceilings {
    /// Calibrated defaults: about twice the largest constant measured on random shapes
    /// of amplitude 0.1–0.2 and degree ≤ 4 over resolutions 32–128 (planar) and 12–48.
    pub fn for_kernel(k: &RadialKernel) -> Self {
        let (gradient_energy, cross_term, layer) = match k.family_name() {
            "exp" => (2.0, 0.15, [2.0, 8.0, 3.0]),
            _ => (8.0, 0.5, [12.0, 30.0, 12.0]),
        };
        Self {
            gradient_energy,
            cross_term,
            layer,
            ball_maximality: 1.0 + 1e-3,
            decomposition: 1e-3,
        }
    }
}

/// Self-cell share of the gradient energy at a node: `(u(y) − u(x))² ≈ (∇u·e)² θ²`
/// averaged over directions, integrated against `g(2 sin(θ/2))` over a geodesic cap of
/// the node's weight.
fn self_cell_factor(g: &BoundKernel, weight: f64) -> Result<f64> {
    let dim = g.dim();
    let (cap, ring) = match dim {
        2 => (0.5 * weight, 2.0),
        _ => ((1.0 - weight / (2.0 * std::f64::consts::PI)).clamp(-1.0, 1.0).acos(), 2.0 * std::f64::consts::PI),
    };
    let p = dim as i32 - 2;
    let v = graded_left(
        |t| g.value(2.0 * (0.5 * t).sin()) * t * t * t.sin().powi(p),
        0.0,
        cap,
        Refinement::default(),
    )?;
    Ok(ring * v / (dim as f64 - 1.0))
}

/// `∬_{S×S} g(|x − y|) (u(y) − u(x))² dx dy`.
pub fn gradient_energy(g: &BoundKernel, u: &RadialGraph) -> Result<f64> {
    let grid = u.grid();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let values = u.values();
    let grads = u.gradient();
    let singular = !g.is_bounded();
    let rows: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let xi = &nodes[i];
            let terms: Vec<f64> = (0..grid.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let xj = &nodes[j];
                    let d = norm_sq(&[xi[0] - xj[0], xi[1] - xj[1], xi[2] - xj[2]]).sqrt();
                    let du = values[j] - values[i];
                    weights[j] * g.value(d) * du * du
                })
                .collect();
            let mut row = pairwise_sum(&terms);
            if singular {
                row += norm_sq(&grads[i]) * self_cell_factor(g, weights[i])?;
            }
            Ok(weights[i] * row)
        })
        .collect();
    let rows: Vec<f64> = rows.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&rows))
}

pub fn check_gradient_energy(k: &RadialKernel, u: &RadialGraph, ceiling: f64) -> Result<CheckReport> {
    let g = k.bind(u.dim())?;
    let lhs = gradient_energy(&g, u)?;
    let rhs = gradient_norm_sq(u);
    Ok(CheckReport::judge("gradient_energy", lhs, rhs, Bound::AtMost(ceiling)).on(k, u.dim(), u.grid().resolution()))
}

/// `𝔯(E⁺, E⁻)` against `‖u‖²_{W^{1,2}}`.
pub fn check_cross_term(k: &RadialKernel, u: &RadialGraph, ceiling: f64) -> Result<CheckReport> {
    let g = k.bind(u.dim())?;
    let layers = split_layers(u);
    let grid = u.grid();
    let lhs = riesz_cross_bound(
        &g,
        grid,
        &Shell::outer(&layers),
        &Shell::inner(&layers),
        EnergyQuadrature::for_grid(grid),
    )?;
    Ok(CheckReport::judge("cross_term", lhs, w12_norm_sq(u), Bound::AtMost(ceiling)).on(k, u.dim(), grid.resolution()))
}

/// The three layer-potential comparisons at `(ρ, τ)`:
/// `|ψ(ρ+τ, ρ) − ψ(ρ, ρ) − J(τ)|` against `|ρ − 1|`,
/// `|ψ(1, 1+τ) − ψ(1, 1) + J(τ)|` against `|τ|`, and
/// `|J(τ) + J(−τ)|` against `|τ|`.
pub fn check_layer_potentials(k: &RadialKernel, dim: usize, rho: f64, tau: f64, ceilings: [f64; 3]) -> Result<[CheckReport; 3]> {
    if !(0.75..=1.25).contains(&rho) || !(-0.25..=0.25).contains(&tau) {
        return Err(Error::PreconditionViolation(format!(
            "layer checks need ρ in [3/4, 5/4] and τ in [-1/4, 1/4], got ρ={rho}, τ={tau}"
        )));
    }
    let g = k.bind(dim)?;
    let j_plus = jfun_bound(&g, tau)?;
    let j_minus = jfun_bound(&g, -tau)?;
    let shift = if rho == 1.0 {
        // ψ(1+τ, 1) − ψ(1, 1) is J(τ) by definition.
        0.0
    } else {
        (psi_bound(&g, rho + tau, rho)? - psi_bound(&g, rho, rho)? - j_plus).abs()
    };
    let inversion = (psi_bound(&g, 1.0, 1.0 + tau)? - psi_bound(&g, 1.0, 1.0)? + j_plus).abs();
    let symmetry = (j_plus + j_minus).abs();
    let tag = |r: CheckReport| r.on(k, dim, 0).with("rho", rho).with("tau", tau);
    Ok([
        tag(CheckReport::judge("layer_shift", shift, (rho - 1.0).abs(), Bound::AtMost(ceilings[0]))),
        tag(CheckReport::judge("layer_inversion", inversion, tau.abs(), Bound::AtMost(ceilings[1]))),
        tag(CheckReport::judge("layer_symmetry", symmetry, tau.abs(), Bound::AtMost(ceilings[2]))),
    ])
}

fn require_normalized(u: &RadialGraph, max_amplitude: f64) -> Result<()> {
    let omega = unit_ball_volume(u.dim());
    let vol = volume(u);
    if ((vol - omega) / omega).abs() > 1e-8 {
        return Err(Error::PreconditionViolation(format!("volume {vol} differs from {omega}")));
    }
    let b = barycenter(u);
    if norm_sq(&b).sqrt() > 1e-3 {
        return Err(Error::PreconditionViolation(format!("barycenter {b:?} is not at the origin")));
    }
    if u.max_abs() > max_amplitude {
        return Err(Error::PreconditionViolation(format!(
            "amplitude {} exceeds {max_amplitude}",
            u.max_abs()
        )));
    }
    Ok(())
}

/// `F_ε(E) − F_ε(B)` against `‖u‖²_{W^{1,2}}`; passes when positive.
pub fn check_final_inequality(k: &RadialKernel, epsilon: f64, u: &RadialGraph) -> Result<CheckReport> {
    require_normalized(u, 0.1)?;
    let dim = u.dim();
    let g = k.bind(dim)?;
    let grid = u.grid();
    let perimeter_part = perimeter(u) - sphere_area(dim);
    let nonlocal_part = if epsilon == 0.0 {
        0.0
    } else {
        let e = riesz_energy_with(&g, u, EnergyQuadrature::for_grid(grid))?;
        epsilon * (e - riesz_ball_bound(&g)?)
    };
    let lhs = perimeter_part + nonlocal_part;
    Ok(CheckReport::judge("final_inequality", lhs, w12_norm_sq(u), Bound::Above(0.0))
        .on(k, dim, grid.resolution())
        .with("epsilon", epsilon)
        .with("perimeter_part", perimeter_part)
        .with("nonlocal_part", nonlocal_part))
}

/// `𝔯(E)/𝔯(B)` for a volume-normalized shape.
pub fn check_ball_maximality(k: &RadialKernel, u: &RadialGraph, ceiling: f64) -> Result<CheckReport> {
    let omega = unit_ball_volume(u.dim());
    if ((volume(u) - omega) / omega).abs() > 1e-8 {
        return Err(Error::PreconditionViolation("shape is not volume-normalized".into()));
    }
    let g = k.bind(u.dim())?;
    let e = riesz_energy_with(&g, u, EnergyQuadrature::for_grid(u.grid()))?;
    let b = riesz_ball_bound(&g)?;
    Ok(CheckReport::judge("ball_maximality", e, b, Bound::AtMost(ceiling)).on(k, u.dim(), u.grid().resolution()))
}

/// Isoperimetric deficit against `‖u‖²_{W^{1,2}}`; passes when positive.
pub fn check_fuglede(u: &RadialGraph) -> Result<CheckReport> {
    let f = fuglede_deficit(u)?;
    let mut r = CheckReport::judge("fuglede", f.deficit, f.norm_sq, Bound::Above(0.0));
    r.dim = u.dim();
    r.kernel = "none".into();
    r.resolution = u.grid().resolution();
    Ok(r)
}

/// Residual of the layer decomposition of `𝔯(E) − 𝔯(B)`, relative to `𝔯(B)`.
pub fn check_decomposition(k: &RadialKernel, u: &RadialGraph, ceiling: f64) -> Result<CheckReport> {
    let g = k.bind(u.dim())?;
    let d = energy_decomposition_with(&g, u, EnergyQuadrature::for_grid(u.grid()))?;
    Ok(CheckReport::judge("decomposition", d.residual, d.ball.abs(), Bound::AtMost(ceiling))
        .on(k, u.dim(), u.grid().resolution())
        .with("lhs_side", d.lhs)
        .with("rhs_side", d.rhs))
}

/// A random shape of ball volume with its barycenter at the origin.
pub fn centered_shape(seed: u64, amplitude: f64, degree: usize, grid: Arc<SphereGrid>) -> Result<RadialGraph> {
    recenter(&random_shape(seed, amplitude, degree, grid)?, 3)
}

/// Batch configuration for [`run_all_checks`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub kernels: Vec<RadialKernel>,
    pub dims: Vec<usize>,
    /// Grid resolution for planar runs.
    pub grid2: usize,
    /// Grid resolution for spatial runs.
    pub grid3: usize,
    pub shapes: usize,
    pub seed: u64,
    pub amplitude: f64,
    pub degree: usize,
    pub epsilon: f64,
    pub rho_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    /// Overrides applied to every kernel family's calibrated ceilings.
    pub gradient_energy_ceiling: Option<f64>,
    pub cross_term_ceiling: Option<f64>,
    pub layer_ceiling: Option<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            kernels: vec![
                RadialKernel::constant(1.0),
                RadialKernel::riesz(2.0),
                RadialKernel::exponential(1.0),
            ],
            dims: vec![2, 3],
            grid2: 64,
            grid3: 16,
            shapes: 3,
            seed: 1,
            amplitude: 0.08,
            degree: 4,
            epsilon: 1e-3,
            rho_grid: vec![0.75, 0.875, 1.0, 1.125, 1.25],
            tau_grid: vec![0.2, -0.2, 0.1, -0.1, 0.05, -0.05, 0.025, -0.025, 0.0],
            gradient_energy_ceiling: None,
            cross_term_ceiling: None,
            layer_ceiling: None,
        }
    }
}

impl CheckConfig {
    fn ceilings(&self, k: &RadialKernel) -> Ceilings {
        let mut c = Ceilings::for_kernel(k);
        if let Some(v) = self.gradient_energy_ceiling {
            c.gradient_energy = v;
        }
        if let Some(v) = self.cross_term_ceiling {
            c.cross_term = v;
        }
        if let Some(v) = self.layer_ceiling {
            c.layer = [v; 3];
        }
        c
    }

    pub fn resolution(&self, dim: usize) -> usize {
        if dim == 2 {
            self.grid2
        } else {
            self.grid3
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Shape { kernel: usize, dim: usize, index: usize },
    Layer { kernel: usize, dim: usize, rho: f64, tau: f64 },
    Fuglede { dim: usize, index: usize },
}

/// Every check over the configured kernels, dimensions and shapes. Errors of single
/// checks are recorded in the report list rather than aborting the batch.
pub fn run_all_checks(cfg: &CheckConfig) -> Result<Vec<CheckReport>> {
    let mut grids = Vec::new();
    for &dim in &cfg.dims {
        grids.push((dim, Arc::new(SphereGrid::build(dim, cfg.resolution(dim))?)));
    }
    if cfg.kernels.is_empty() {
        return Ok(Vec::new());
    }
    let mut tasks = Vec::new();
    for &dim in &cfg.dims {
        for index in 0..cfg.shapes {
            tasks.push(Task::Fuglede { dim, index });
        }
        for kernel in 0..cfg.kernels.len() {
            for index in 0..cfg.shapes {
                tasks.push(Task::Shape { kernel, dim, index });
            }
            for &rho in &cfg.rho_grid {
                for &tau in &cfg.tau_grid {
                    tasks.push(Task::Layer { kernel, dim, rho, tau });
                }
            }
        }
    }
    let grid_for = |dim: usize| grids.iter().find(|(d, _)| *d == dim).map(|(_, g)| g.clone()).unwrap();
    let batches: Vec<Vec<CheckReport>> = tasks
        .par_iter()
        .map(|task| match *task {
            Task::Fuglede { dim, index } => {
                let seed = cfg.seed + index as u64;
                let r = centered_shape(seed, cfg.amplitude, cfg.degree, grid_for(dim)).and_then(|u| check_fuglede(&u));
                vec![r
                    .unwrap_or_else(|e| {
                        let mut r = CheckReport::failed("fuglede", &e);
                        r.kernel = "none".into();
                        r.dim = dim;
                        r
                    })
                    .with_seed(seed)]
            }
            Task::Shape { kernel, dim, index } => {
                let k = &cfg.kernels[kernel];
                let c = cfg.ceilings(k);
                let seed = cfg.seed + index as u64;
                let grid = grid_for(dim);
                let m = grid.resolution();
                let tag = |name: &str, r: Result<CheckReport>| {
                    r.unwrap_or_else(|e| CheckReport::failed(name, &e).on(k, dim, m)).with_seed(seed)
                };
                match centered_shape(seed, cfg.amplitude, cfg.degree, grid) {
                    Err(e) => vec![tag("shape", Err(e))],
                    Ok(u) => vec![
                        tag("gradient_energy", check_gradient_energy(k, &u, c.gradient_energy)),
                        tag("cross_term", check_cross_term(k, &u, c.cross_term)),
                        tag("final_inequality", check_final_inequality(k, cfg.epsilon, &u)),
                        tag("ball_maximality", check_ball_maximality(k, &u, c.ball_maximality)),
                        tag("decomposition", check_decomposition(k, &u, c.decomposition)),
                    ],
                }
            }
            Task::Layer { kernel, dim, rho, tau } => {
                let k = &cfg.kernels[kernel];
                match check_layer_potentials(k, dim, rho, tau, cfg.ceilings(k).layer) {
                    Ok(rs) => rs.to_vec(),
                    Err(e) => vec![CheckReport::failed("layer", &e).on(k, dim, 0).with("rho", rho).with("tau", tau)],
                }
            }
        })
        .collect();
    let mut reports: Vec<CheckReport> = batches.into_iter().flatten().collect();
    reports.sort_by(|a, b| a.check_name.cmp(&b.check_name));
    Ok(reports)
}

/// Counts by outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub degenerate: usize,
}

impl Summary {
    pub fn of(reports: &[CheckReport]) -> Self {
        let mut s = Summary {
            total: reports.len(),
            ..Default::default()
        };
        for r in reports {
            match r.outcome {
                Outcome::Pass => s.passed += 1,
                Outcome::Fail => s.failed += 1,
                Outcome::Degenerate(ok) => {
                    s.degenerate += 1;
                    if ok {
                        s.passed += 1;
                    } else {
                        s.failed += 1;
                    }
                }
                Outcome::Error(_) => s.errors += 1,
            }
        }
        s
    }

    /// 0 all pass, 3 any failure, 4 any error (errors take precedence).
    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 {
            4
        } else if self.failed > 0 {
            3
        } else {
            0
        }
    }
}

/// Blank-line separated report blocks followed by a summary block.
pub fn format_reports(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.to_text());
        out.push('\n');
    }
    let s = Summary::of(reports);
    let _ = writeln!(
        out,
        "summary.total = {}\nsummary.passed = {}\nsummary.failed = {}\nsummary.errors = {}\nsummary.degenerate = {}",
        s.total, s.passed, s.failed, s.errors, s.degenerate
    );
    out
}
