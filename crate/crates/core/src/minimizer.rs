//! Volume-constrained descent on `F_ε` over harmonic coefficients, and the ε-sweep.
//!
//! The objective rescales every candidate radially to ball volume before evaluating,
//! so the constraint never leaves the feasible set. Degree-0 is left to that rescaling
//! and degree-1 (translations) is projected out; only degrees `2..=L` move.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{BoundKernel, RadialKernel};
use crate::nonlocal_energy::{f_eps_value, gamow_energy, riesz_energy_with, EnergyQuadrature, EnergyReport};
use crate::sphere_grid::{degree_of, sphere_area, SphereGrid};
use crate::star_shape::{normalize_volume, random_shape, RadialGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Largest harmonic degree `L`.
    pub degree: usize,
    pub step0: f64,
    pub shrink: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// `‖u‖_∞` below which a result counts as the ball.
    pub deviation_tol: f64,
    pub restarts: usize,
    pub fd_step: f64,
    pub seed: u64,
    pub start_amplitude: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            degree: 5,
            step0: 0.05,
            shrink: 0.5,
            max_iters: 200,
            grad_tol: 1e-5,
            deviation_tol: 1e-2,
            restarts: 4,
            fd_step: 1e-4,
            seed: 1,
            start_amplitude: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.degree < 1 {
            return bad("degree must be at least 1".into());
        }
        if !(self.step0 > 0.0) {
            return bad(format!("step0 must be positive, got {}", self.step0));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink must lie in (0, 1), got {}", self.shrink));
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("deviation_tol", self.deviation_tol),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.start_amplitude > 0.0 && self.start_amplitude <= 0.4) {
            return bad(format!("start amplitude must lie in (0, 0.4], got {}", self.start_amplitude));
        }
        Ok(())
    }
}

/// `c ↦ F_ε(normalize(E(c)))` on a fixed grid.
struct Objective {
    g: BoundKernel,
    epsilon: f64,
    grid: Arc<SphereGrid>,
    degree: usize,
    quad: EnergyQuadrature,
    free: Vec<usize>,
}

impl Objective {
    fn new(k: &RadialKernel, epsilon: f64, grid: Arc<SphereGrid>, degree: usize) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::PreconditionViolation(format!("ε must be ≥ 0, got {epsilon}")));
        }
        if degree > grid.max_degree() {
            return Err(Error::Config(format!(
                "degree {degree} exceeds what the grid resolves ({})",
                grid.max_degree()
            )));
        }
        let dim = grid.dim();
        let free = (0..grid.coeff_count(degree)).filter(|&i| degree_of(dim, i) >= 2).collect();
        Ok(Self {
            g: k.bind(dim)?,
            epsilon,
            quad: EnergyQuadrature::for_grid(&grid),
            grid,
            degree,
            free,
        })
    }

    fn project(&self, coeffs: &mut [f64]) {
        let dim = self.grid.dim();
        for (i, c) in coeffs.iter_mut().enumerate() {
            if degree_of(dim, i) < 2 {
                *c = 0.0;
            }
        }
    }

    fn shape(&self, coeffs: &[f64]) -> Result<RadialGraph> {
        normalize_volume(&RadialGraph::from_coefficients(self.grid.clone(), self.degree, coeffs.to_vec())?)
    }

    /// Infinite outside the admissible amplitude range.
    fn value(&self, coeffs: &[f64]) -> Result<f64> {
        match self.shape(coeffs) {
            Ok(u) => f_eps_value(&self.g, self.epsilon, &u, self.quad),
            Err(Error::AmplitudeOverflow { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    fn gradient(&self, coeffs: &[f64], h: f64) -> Result<Vec<f64>> {
        let parts: Vec<Result<(usize, f64)>> = self
            .free
            .par_iter()
            .map(|&i| {
                let mut c = coeffs.to_vec();
                c[i] = coeffs[i] + h;
                let up = self.shape(&c).and_then(|u| f_eps_value(&self.g, self.epsilon, &u, self.quad))?;
                c[i] = coeffs[i] - h;
                let down = self.shape(&c).and_then(|u| f_eps_value(&self.g, self.epsilon, &u, self.quad))?;
                Ok((i, (up - down) / (2.0 * h)))
            })
            .collect();
        let mut grad = vec![0.0; coeffs.len()];
        for p in parts {
            let (i, d) = p?;
            grad[i] = d;
        }
        Ok(grad)
    }
}

/// Central-difference gradient of `c ↦ F_ε(normalize(E(c)))` in the coefficients of
/// degree ≥ 2 (other entries are zero).
pub fn energy_gradient(
    k: &RadialKernel,
    epsilon: f64,
    coeffs: &[f64],
    degree: usize,
    grid: Arc<SphereGrid>,
    fd_step: f64,
) -> Result<Vec<f64>> {
    let obj = Objective::new(k, epsilon, grid, degree)?;
    if coeffs.len() != obj.grid.coeff_count(degree) {
        return Err(Error::PreconditionViolation(format!(
            "expected {} coefficients, got {}",
            obj.grid.coeff_count(degree),
            coeffs.len()
        )));
    }
    obj.gradient(coeffs, fd_step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub start: usize,
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub deviation: f64,
}

/// Where one start ended up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartOutcome {
    pub start: usize,
    pub energy: f64,
    pub deviation: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    /// Volume-normalized best shape.
    pub shape: RadialGraph,
    pub report: EnergyReport,
    /// `‖u*‖_∞`.
    pub deviation: f64,
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
    pub starts: Vec<StartOutcome>,
}

impl Minimum {
    /// The unnormalized coefficients that produced the best shape (for warm starts).
    fn coefficients(&self) -> Vec<f64> {
        self.shape.coefficients().to_vec()
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("start,iter,energy,grad_norm,step,deviation\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{},{:.15e},{:.6e},{:.6e},{:.6e}",
                r.start, r.iter, r.energy, r.grad_norm, r.step, r.deviation
            );
        }
        s
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Armijo-backtracked descent from one start; Barzilai–Borwein trial steps.
fn descend(
    obj: &Objective,
    cfg: &OptimizerConfig,
    start: usize,
    mut c: Vec<f64>,
    trace: &mut Vec<TraceRow>,
) -> Result<(StartOutcome, Vec<f64>)> {
    obj.project(&mut c);
    let mut f = obj.value(&c)?;
    if !f.is_finite() {
        return Err(Error::AmplitudeOverflow {
            node: 0,
            value: f64::NAN,
        });
    }
    let mut grad = obj.gradient(&c, cfg.fd_step)?;
    let mut step = cfg.step0;
    let mut iters = 0;
    let deviation = |c: &[f64]| obj.shape(c).map(|u| u.max_abs()).unwrap_or(f64::INFINITY);
    trace.push(TraceRow {
        start,
        iter: 0,
        energy: f,
        grad_norm: norm(&grad),
        step: 0.0,
        deviation: deviation(&c),
    });
    let mut converged = norm(&grad) < cfg.grad_tol;
    while !converged && iters < cfg.max_iters {
        iters += 1;
        let gn2: f64 = grad.iter().map(|x| x * x).sum();
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = c.iter().zip(&grad).map(|(ci, gi)| ci - t * gi).collect();
            let ft = obj.value(&trial)?;
            if ft <= f - 1e-4 * t * gn2 {
                accepted = Some((trial, ft));
                break;
            }
            t *= cfg.shrink;
        }
        let Some((next, fnext)) = accepted else {
            // No decrease is measurable any more: the iterate is stationary to working precision.
            converged = norm(&grad) < 1e2 * cfg.grad_tol;
            break;
        };
        let gnext = obj.gradient(&next, cfg.fd_step)?;
        let s: Vec<f64> = next.iter().zip(&c).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnext.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-6, 1e3) } else { t / cfg.shrink };
        c = next;
        f = fnext;
        grad = gnext;
        converged = norm(&grad) < cfg.grad_tol;
        trace.push(TraceRow {
            start,
            iter: iters,
            energy: f,
            grad_norm: norm(&grad),
            step: t,
            deviation: deviation(&c),
        });
    }
    let outcome = StartOutcome {
        start,
        energy: f,
        deviation: deviation(&c),
        iters,
        converged,
    };
    Ok((outcome, c))
}

fn start_coefficients(obj: &Objective, cfg: &OptimizerConfig, index: usize) -> Result<Vec<f64>> {
    let u = random_shape(cfg.seed.wrapping_add(index as u64), cfg.start_amplitude, cfg.degree, obj.grid.clone())?;
    Ok(u.coefficients().to_vec())
}

fn run(
    k: &RadialKernel,
    epsilon: f64,
    cfg: &OptimizerConfig,
    grid: Arc<SphereGrid>,
    warm: Option<Vec<f64>>,
) -> Result<Minimum> {
    cfg.validate()?;
    let obj = Objective::new(k, epsilon, grid.clone(), cfg.degree)?;
    let n = grid.coeff_count(cfg.degree);
    let first = match warm {
        Some(c) if c.len() == n => c,
        Some(c) => {
            return Err(Error::PreconditionViolation(format!(
                "warm start has {} coefficients, expected {n}",
                c.len()
            )))
        }
        None => vec![0.0; n],
    };
    let mut starts = vec![first];
    for s in 1..=cfg.restarts {
        starts.push(start_coefficients(&obj, cfg, s)?);
    }
    let mut trace = Vec::new();
    let mut results = Vec::new();
    for (idx, c0) in starts.into_iter().enumerate() {
        results.push(descend(&obj, cfg, idx, c0, &mut trace)?);
    }
    // Energies equal to rounding are ties; prefer the shape closer to the ball.
    let best = (1..results.len()).fold(0, |b, i| {
        let (x, y) = (&results[i].0, &results[b].0);
        let tol = 1e-12 * x.energy.abs().max(y.energy.abs());
        let better = if (x.energy - y.energy).abs() <= tol {
            x.deviation < y.deviation
        } else {
            x.energy < y.energy
        };
        if better {
            i
        } else {
            b
        }
    });
    let starts: Vec<StartOutcome> = results.iter().map(|r| r.0).collect();
    let (outcome, coeffs) = results.swap_remove(best);
    let shape = obj.shape(&coeffs)?;
    let report = gamow_energy(k, epsilon, &shape)?;
    Ok(Minimum {
        deviation: shape.max_abs(),
        shape,
        report,
        iters: outcome.iters,
        converged: starts.iter().all(|s| s.converged),
        trace,
        starts,
    })
}

/// Descent from the zero start and `restarts` random starts; the lowest final energy wins.
pub fn minimize(k: &RadialKernel, epsilon: f64, cfg: &OptimizerConfig, grid: Arc<SphereGrid>) -> Result<Minimum> {
    run(k, epsilon, cfg, grid, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub deviation: f64,
    /// `F_ε(E*) − F_ε(B)`.
    pub energy_gap: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Largest listed ε from which every later minimizer stays within the deviation
    /// tolerance of the ball. A heuristic marker only.
    pub ball_onset: Option<f64>,
    pub last: Minimum,
}

impl Sweep {
    pub fn any_nonconvergence(&self) -> bool {
        self.rows.iter().any(|r| !r.converged)
    }

    pub fn table_csv(&self) -> String {
        let mut s = String::from("epsilon,deviation,energy_gap,iters,converged\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.6e},{:.6e},{:.6e},{},{}",
                r.epsilon, r.deviation, r.energy_gap, r.iters, r.converged
            );
        }
        s
    }

    /// `(ε, deviation)` pairs, one per line.
    pub fn plot_data(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(s, "{:.6e} {:.6e}", r.epsilon, r.deviation);
        }
        s
    }
}

/// Minimize at each ε of a descending list, warm-starting every run from the
/// previous minimizer.
pub fn sweep_epsilon(k: &RadialKernel, cfg: &OptimizerConfig, grid: Arc<SphereGrid>, eps_list: &[f64]) -> Result<Sweep> {
    if eps_list.is_empty() {
        return Err(Error::Config("ε list is empty".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Config("ε values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("ε list must be strictly descending".into()));
    }
    // The ball baseline goes through the same quadrature as the minimizers, so the
    // zero start reproduces it exactly.
    let g = k.bind(grid.dim())?;
    let quad = EnergyQuadrature::for_grid(&grid);
    let ball_riesz = riesz_energy_with(&g, &RadialGraph::zero(grid.clone()), quad)?;
    let ball_perimeter = sphere_area(grid.dim());
    let mut rows = Vec::new();
    let mut warm = None;
    let mut last = None;
    for &eps in eps_list {
        let m = run(k, eps, cfg, grid.clone(), warm.take())?;
        rows.push(SweepRow {
            epsilon: eps,
            deviation: m.deviation,
            energy_gap: m.report.f_eps - (ball_perimeter + eps * ball_riesz),
            iters: m.iters,
            converged: m.converged,
        });
        warm = Some(m.coefficients());
        last = Some(m);
    }
    let near_ball = rows.iter().rev().take_while(|r| r.deviation < cfg.deviation_tol).count();
    let ball_onset = (near_ball > 0).then(|| rows[rows.len() - near_ball].epsilon);
    Ok(Sweep {
        rows,
        ball_onset,
        last: last.expect("list is non-empty"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::star_shape::volume;
    use crate::sphere_grid::unit_ball_volume;

    fn grid(dim: usize, m: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::build(dim, m).unwrap())
    }

    #[test]
    fn ball_is_critical() {
        let g = grid(3, 12);
        let k = RadialKernel::riesz(2.0);
        let h = 1e-4;
        let zero = vec![0.0; g.coeff_count(4)];
        for eps in [0.0, 1e-3] {
            let grad = energy_gradient(&k, eps, &zero, 4, g.clone(), h).unwrap();
            assert!(norm(&grad) < 10.0 * h, "{}", norm(&grad));
        }
    }

    #[test]
    fn gradient_error_is_second_order() {
        let g = grid(2, 32);
        let k = RadialKernel::riesz(1.0);
        let c = random_shape(7, 0.2, 4, g.clone()).unwrap().coefficients().to_vec();
        let exact = energy_gradient(&k, 0.5, &c, 4, g.clone(), 1e-5).unwrap();
        let coarse = energy_gradient(&k, 0.5, &c, 4, g.clone(), 2e-2).unwrap();
        let fine = energy_gradient(&k, 0.5, &c, 4, g, 1e-2).unwrap();
        let ec: f64 = norm(&coarse.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>());
        let ef: f64 = norm(&fine.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>());
        let ratio = ec / ef;
        assert!((2.5..=5.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn perimeter_only_descends_to_the_ball() {
        let g = grid(2, 32);
        let k = RadialKernel::riesz(1.0);
        let cfg = OptimizerConfig {
            degree: 4,
            restarts: 2,
            ..OptimizerConfig::default()
        };
        let m = minimize(&k, 0.0, &cfg, g).unwrap();
        assert!(m.deviation < 1e-2);
        for s in &m.starts {
            assert!((s.energy / (2.0 * std::f64::consts::PI) - 1.0).abs() < 1e-4, "{s:?}");
        }
        for w in m.trace.windows(2) {
            if w[0].start == w[1].start {
                assert!(w[1].energy <= w[0].energy);
            }
        }
        assert!((volume(&m.shape) / unit_ball_volume(2) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn max_iters_flags_nonconvergence() {
        let g = grid(2, 32);
        let cfg = OptimizerConfig {
            degree: 4,
            restarts: 1,
            max_iters: 1,
            ..OptimizerConfig::default()
        };
        let m = minimize(&RadialKernel::riesz(1.0), 0.1, &cfg, g).unwrap();
        assert!(!m.converged);
        assert!(m.starts[1].iters == 1);
    }

    #[test]
    fn sweep_is_deterministic_and_warm_started() {
        let g = grid(2, 32);
        let cfg = OptimizerConfig {
            degree: 4,
            restarts: 1,
            ..OptimizerConfig::default()
        };
        let k = RadialKernel::riesz(1.0);
        let a = sweep_epsilon(&k, &cfg, g.clone(), &[0.1, 0.01]).unwrap();
        let b = sweep_epsilon(&k, &cfg, g.clone(), &[0.1, 0.01]).unwrap();
        assert_eq!(a.table_csv(), b.table_csv());
        for r in &a.rows {
            assert!(r.deviation >= 0.0 && r.energy_gap <= 1e-6);
        }
        assert!(a.ball_onset.is_some());
        assert!(sweep_epsilon(&k, &cfg, g.clone(), &[0.01, 0.1]).is_err());
        assert!(sweep_epsilon(&k, &cfg, g, &[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            shrink: 1.0,
            ..OptimizerConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
