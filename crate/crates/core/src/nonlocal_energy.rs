//! The kernel energy `𝔯(F, G) = ∬_{F×G} g(|z − w|) dz dw` on radial shells, the ball
//! potential `ψ(a, b)`, its layer increment `J(σ)`, and `F_ε = P + ε 𝔯`.
//!
//! # Pairwise quadrature
//!
//! A shell assigns each node `xᵢ` a radial interval. For row `i` the inner sphere
//! integral is split as
//!
//! ```text
//! ∫_S r(xᵢ, y) dy = ∫_S r_ref,i(y) dy + ∫_S [r(xᵢ, y) − r_ref,i(y)] dy
//! ```
//!
//! where `r_ref,i` freezes the second shell's interval at its value over `xᵢ`. The
//! reference term is a concentric-shell integral and reduces exactly to `ψ`:
//! `∫_{aᵢ}^{bᵢ} ρ^{N-1} [ψ(dᵢ, ρ) − ψ(cᵢ, ρ)] dρ`. The remainder vanishes on the
//! diagonal, so the point rule over `j ≠ i` never meets the kernel singularity.
//! Pairs closer than `δ` get their radial double integral in rotated coordinates
//! `s = ρ − σ`, graded toward the near-singular ridge. `𝔯(F, G)` is reported as the
//! mean of both row orders, which makes it exactly symmetric.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{BoundKernel, RadialKernel};
use crate::quadrature::{adaptive, graded_left, pairwise_sum, AdaptiveTol, GaussRule, Refinement};
use crate::sphere_grid::{norm_sq, sphere_area, unit_ball_volume, SphereGrid};
use crate::star_shape::{perimeter, split_layers, RadialGraph, SignedLayers};

/// `ℋ^{N-1}(∂B(x, t) ∩ B(0, a))` for `|x| = b`.
pub fn cap_area(dim: usize, t: f64, a: f64, b: f64) -> Result<f64> {
    if !(dim == 2 || dim == 3) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if !(t > 0.0 && a >= 0.0 && b >= 0.0) {
        return Err(Error::PreconditionViolation(format!("cap_area needs t > 0, a, b ≥ 0 (t={t}, a={a}, b={b})")));
    }
    Ok(cap_area_unchecked(dim, t, a, b))
}

#[inline]
fn cap_area_unchecked(dim: usize, t: f64, a: f64, b: f64) -> f64 {
    if t >= a + b {
        return 0.0;
    }
    if t <= a - b {
        return dim as f64 * unit_ball_volume(dim) * t.powi(dim as i32 - 1);
    }
    let cos_cap = ((b * b + t * t - a * a) / (2.0 * b * t)).clamp(-1.0, 1.0);
    if dim == 2 {
        2.0 * t * cos_cap.acos()
    } else {
        2.0 * std::f64::consts::PI * t * t * (1.0 - cos_cap)
    }
}

fn psi_refinement() -> Refinement {
    Refinement {
        cauchy_tol: 1e-12,
        ..Refinement::default()
    }
}

/// `ψ(a, b) = ∫_{B(a)} g(|y − x|) dy` with `|x| = b`, through the cap-area reduction
/// `∫₀^{a+b} g(t) cap_area(t) dt`.
pub fn psi_bound(g: &BoundKernel, a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::PreconditionViolation(format!("ψ needs a, b ≥ 0 (a={a}, b={b})")));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let dim = g.dim();
    let p = dim as i32 - 1;
    let full = dim as f64 * unit_ball_volume(dim);
    let inner_end = (a - b).max(0.0);
    let cfg = psi_refinement();
    let inner = if inner_end > 0.0 {
        full * graded_left(|t| g.value(t) * t.powi(p), 0.0, inner_end, cfg)?
    } else {
        0.0
    };
    if b == 0.0 {
        return Ok(inner);
    }
    let lo = (a - b).abs();
    let cap = |t: f64| g.value(t) * cap_area_unchecked(dim, t, a, b);
    let outer = if lo > 0.0 {
        let tol = AdaptiveTol {
            abs: 0.0,
            rel: 1e-13,
            max_panels: 400,
        };
        adaptive(cap, lo, a + b, tol)
    } else {
        graded_left(cap, lo, a + b, cfg)?
    };
    if !outer.is_finite() {
        return Err(Error::NonFiniteSample(0));
    }
    Ok(inner + outer)
}

pub fn psi(k: &RadialKernel, dim: usize, a: f64, b: f64) -> Result<f64> {
    psi_bound(&k.bind(dim)?, a, b)
}

/// `J(σ) = ψ(1 + σ, 1) − ψ(1, 1)`.
pub fn jfun_bound(g: &BoundKernel, sigma: f64) -> Result<f64> {
    if !(sigma > -0.5 && sigma < 0.5) {
        return Err(Error::PreconditionViolation(format!("J needs σ in (-1/2, 1/2), got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(psi_bound(g, 1.0 + sigma, 1.0)? - psi_bound(g, 1.0, 1.0)?)
}

pub fn jfun(k: &RadialKernel, dim: usize, sigma: f64) -> Result<f64> {
    jfun_bound(&k.bind(dim)?, sigma)
}

/// Integrate a fallible integrand adaptively, surfacing the first error.
fn adaptive_fallible<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: AdaptiveTol) -> Result<f64> {
    let mut first_err = None;
    let v = adaptive(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                first_err.get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        tol,
    );
    match first_err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `𝔯(B) = Nω_N ∫₀¹ ψ(1, b) b^{N-1} db`.
pub fn riesz_ball_bound(g: &BoundKernel) -> Result<f64> {
    let dim = g.dim();
    let p = dim as i32 - 1;
    let tol = AdaptiveTol {
        abs: 0.0,
        rel: 1e-11,
        max_panels: 200,
    };
    let inner = adaptive_fallible(|b| Ok(psi_bound(g, 1.0, b)? * b.powi(p)), 0.0, 1.0, tol)?;
    Ok(dim as f64 * unit_ball_volume(dim) * inner)
}

pub fn riesz_ball(k: &RadialKernel, dim: usize) -> Result<f64> {
    riesz_ball_bound(&k.bind(dim)?)
}

/// Per-node radial intervals `[lo(xᵢ), hi(xᵢ)]` describing a set in polar form.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Shell {
    /// The unit ball `[0, 1]`.
    pub fn ball(grid: &SphereGrid) -> Self {
        Self {
            lo: vec![0.0; grid.len()],
            hi: vec![1.0; grid.len()],
        }
    }

    /// `E(u)`: `[0, 1 + u]`.
    pub fn body(u: &RadialGraph) -> Self {
        Self {
            lo: vec![0.0; u.values().len()],
            hi: u.radii(),
        }
    }

    /// `E⁺`: `[1, 1 + u⁺]`.
    pub fn outer(layers: &SignedLayers) -> Self {
        Self {
            lo: vec![1.0; layers.plus.len()],
            hi: layers.plus.iter().map(|p| 1.0 + p).collect(),
        }
    }

    /// `E⁻`: `[1 − u⁻, 1]`.
    pub fn inner(layers: &SignedLayers) -> Self {
        Self {
            lo: layers.minus.iter().map(|m| 1.0 - m).collect(),
            hi: vec![1.0; layers.minus.len()],
        }
    }

    pub fn is_empty_at(&self, i: usize) -> bool {
        self.hi[i] <= self.lo[i]
    }

    /// `Σ wᵢ (hiᵢ^N − loᵢ^N) / N`.
    pub fn volume(&self, grid: &SphereGrid) -> f64 {
        let n = grid.dim() as i32;
        let f: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h.powi(n) - l.powi(n)) / n as f64)
            .collect();
        grid.weighted_sum(&f)
    }
}

/// Rule orders and thresholds for the pairwise energy quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyQuadrature {
    /// Gauss points for a unit-length radial interval in far pairs.
    pub radial_order: usize,
    /// Minimum Gauss points for any radial interval.
    pub layer_order: usize,
    /// Pairs with geodesic distance below `near_factor · spacing` use the graded rule.
    pub near_factor: f64,
    /// Gauss points per graded branch in the rotated `s` variable.
    pub near_order: usize,
    /// Grading exponent `q` of the map `t ↦ t^q`.
    pub grading: f64,
    /// Gauss points per smooth piece of the ψ-reference integral.
    pub reference_order: usize,
}

impl EnergyQuadrature {
    /// Defaults scaled with the grid resolution, so refining the grid refines the radial rules too.
    pub fn for_grid(grid: &SphereGrid) -> Self {
        let m = grid.resolution();
        let per = match grid.dim() {
            2 => m / 8,
            _ => m / 4,
        };
        let radial_order = per.clamp(6, 16);
        Self {
            radial_order,
            layer_order: (radial_order / 2).max(3),
            near_factor: 4.0,
            near_order: radial_order,
            grading: 2.0,
            reference_order: (radial_order / 2 + 2).max(5),
        }
    }
}

struct Rules {
    by_order: Vec<GaussRule>,
    graded: Vec<(f64, f64)>,
}

impl Rules {
    fn new(q: &EnergyQuadrature) -> Self {
        let max = q.radial_order.max(q.reference_order).max(q.near_order).max(q.layer_order);
        Self {
            by_order: (0..=max).map(|n| GaussRule::new(n.max(1))).collect(),
            graded: GaussRule::new(q.near_order).graded_unit(q.grading),
        }
    }

    fn rule(&self, n: usize) -> &GaussRule {
        &self.by_order[n]
    }
}

struct PairIntegrator<'a> {
    g: &'a BoundKernel,
    q: EnergyQuadrature,
    rules: Rules,
    power: i32,
}

impl<'a> PairIntegrator<'a> {
    fn new(g: &'a BoundKernel, q: EnergyQuadrature) -> Self {
        Self {
            g,
            q,
            rules: Rules::new(&q),
            power: g.dim() as i32 - 1,
        }
    }

    fn order_for(&self, len: f64) -> usize {
        ((self.q.radial_order as f64 * len).ceil() as usize).clamp(self.q.layer_order, self.q.radial_order)
    }

    #[inline]
    fn integrand(&self, rho: f64, sigma: f64, chord_sq: f64) -> f64 {
        let s = rho - sigma;
        let d2 = s * s + rho * sigma * chord_sq;
        if d2 <= 0.0 {
            return 0.0;
        }
        self.g.value(d2.sqrt()) * (rho * sigma).powi(self.power)
    }

    /// `∫_a^b ∫_p^q g ρ^{N-1} σ^{N-1} dσ dρ` (oriented in `σ`), `a < b`.
    fn block(&self, a: f64, b: f64, p: f64, q: f64, chord_sq: f64, near: bool) -> f64 {
        if p == q {
            return 0.0;
        }
        let (sign, p, q) = if q < p { (-1.0, q, p) } else { (1.0, p, q) };
        let v = if near {
            self.block_near(a, b, p, q, chord_sq)
        } else {
            self.block_far(a, b, p, q, chord_sq)
        };
        sign * v
    }

    fn block_far(&self, a: f64, b: f64, p: f64, q: f64, chord_sq: f64) -> f64 {
        let rr = self.rules.rule(self.order_for(b - a));
        let rs = self.rules.rule(self.order_for(q - p));
        let mut total = 0.0;
        for (rho, wr) in rr.mapped(a, b) {
            let mut inner = 0.0;
            for (sigma, ws) in rs.mapped(p, q) {
                inner += ws * self.integrand(rho, sigma, chord_sq);
            }
            total += wr * inner;
        }
        total
    }

    /// Rotated coordinates `s = ρ − σ`, graded toward the ridge where `|ρx − σy|` is smallest.
    /// The `s` range is also cut where the `σ` limits switch, so each piece is smooth.
    fn block_near(&self, a: f64, b: f64, p: f64, q: f64, chord_sq: f64) -> f64 {
        let s_lo = a - q;
        let s_hi = b - p;
        let mid_sigma = 0.5 * (p + q);
        let ridge = (-0.5 * mid_sigma * chord_sq).clamp(s_lo, s_hi);
        let mut cuts = vec![s_lo, s_hi, ridge];
        for k in [a - p, b - q] {
            if k > s_lo && k < s_hi {
                cuts.push(k);
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let inner_rule = self.rules.rule(self.q.layer_order.max(3));
        let plain = self.rules.rule(self.q.near_order);
        let mut total = 0.0;
        let piece = |lo: f64, hi: f64, nodes: &mut dyn Iterator<Item = (f64, f64)>| {
            let span = hi - lo;
            let mut acc = 0.0;
            for (t, wt) in nodes {
                let s = lo + span * t;
                let sig_lo = p.max(a - s);
                let sig_hi = q.min(b - s);
                if sig_hi <= sig_lo {
                    continue;
                }
                let mut inner = 0.0;
                for (sigma, ws) in inner_rule.mapped(sig_lo, sig_hi) {
                    inner += ws * self.integrand(sigma + s, sigma, chord_sq);
                }
                acc += wt * inner;
            }
            acc * span.abs()
        };
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            total += if lo == ridge {
                piece(lo, hi, &mut self.rules.graded.iter().copied())
            } else if hi == ridge {
                piece(hi, lo, &mut self.rules.graded.iter().copied())
            } else {
                piece(lo, hi, &mut plain.mapped(0.0, 1.0))
            };
        }
        total
    }
}

/// `∫_a^b ρ^{N-1} [ψ(d, ρ) − ψ(c, ρ)] dρ`: the concentric-shell energy per unit solid angle.
fn shell_reference(g: &BoundKernel, rules: &Rules, order: usize, a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if b <= a || d <= c {
        return Ok(0.0);
    }
    let p = g.dim() as i32 - 1;
    let mut cuts = vec![a];
    for k in [c, d] {
        if k > a && k < b {
            cuts.push(k);
        }
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let rule = rules.rule(order);
    let graded = rule.graded_unit(2.0);
    let eval = |rho: f64| -> Result<f64> {
        let outer = psi_bound(g, d, rho)?;
        let inner = if c > 0.0 { psi_bound(g, c, rho)? } else { 0.0 };
        Ok(rho.powi(p) * (outer - inner))
    };
    // ψ(r, ρ) is only Hölder at ρ = r for weakly singular kernels; the half of a piece
    // touching such a cut gets a rule graded toward it.
    let is_kink = |x: f64| (x == c && c > 0.0) || x == d;
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        for (from, to) in [(lo, mid), (hi, mid)] {
            if is_kink(from) {
                let span = to - from;
                for &(t, wt) in &graded {
                    total += wt * span.abs() * eval(from + span * t)?;
                }
            } else {
                let (x0, x1) = if from < to { (from, to) } else { (to, from) };
                for (rho, wr) in rule.mapped(x0, x1) {
                    total += wr * eval(rho)?;
                }
            }
        }
    }
    Ok(total)
}

/// One row order of the subtracted pairwise sum.
fn oriented_energy(g: &BoundKernel, grid: &SphereGrid, f: &Shell, h: &Shell, q: EnergyQuadrature) -> Result<f64> {
    let n = grid.len();
    assert!(f.lo.len() == n && h.lo.len() == n, "shell size must match the grid");
    let integ = PairIntegrator::new(g, q);
    let cos_near = (q.near_factor * grid.spacing()).min(std::f64::consts::PI).cos();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let rows: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if f.is_empty_at(i) {
                return Ok(0.0);
            }
            let (a, b) = (f.lo[i], f.hi[i]);
            let (ci, di) = (h.lo[i], h.hi[i]);
            let reference = shell_reference(g, &integ.rules, q.reference_order, a, b, ci, di)?;
            let xi = &nodes[i];
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (cj, dj) = (h.lo[j], h.hi[j]);
                if cj == ci && dj == di {
                    continue;
                }
                let xj = &nodes[j];
                let diff = [xi[0] - xj[0], xi[1] - xj[1], xi[2] - xj[2]];
                let chord_sq = norm_sq(&diff);
                let near = 1.0 - 0.5 * chord_sq > cos_near;
                let v = integ.block(a, b, di, dj, chord_sq, near) - integ.block(a, b, ci, cj, chord_sq, near);
                terms.push(weights[j] * v);
            }
            Ok(weights[i] * (reference + pairwise_sum(&terms)))
        })
        .collect();
    let rows: Vec<f64> = rows.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&rows))
}

/// `𝔯(F, G)` on a common grid; exactly symmetric in its arguments.
pub fn riesz_cross_bound(g: &BoundKernel, grid: &SphereGrid, f: &Shell, h: &Shell, q: EnergyQuadrature) -> Result<f64> {
    if f == h {
        return oriented_energy(g, grid, f, h, q);
    }
    let ab = oriented_energy(g, grid, f, h, q)?;
    let ba = oriented_energy(g, grid, h, f, q)?;
    Ok(0.5 * (ab + ba))
}

pub fn riesz_cross(k: &RadialKernel, grid: &SphereGrid, f: &Shell, h: &Shell) -> Result<f64> {
    let g = k.bind(grid.dim())?;
    riesz_cross_bound(&g, grid, f, h, EnergyQuadrature::for_grid(grid))
}

/// `𝔯(E(u))`.
pub fn riesz_energy_with(g: &BoundKernel, u: &RadialGraph, q: EnergyQuadrature) -> Result<f64> {
    let body = Shell::body(u);
    oriented_energy(g, u.grid(), &body, &body, q)
}

pub fn riesz_energy(k: &RadialKernel, u: &RadialGraph) -> Result<f64> {
    let g = k.bind(u.dim())?;
    riesz_energy_with(&g, u, EnergyQuadrature::for_grid(u.grid()))
}

/// Both sides of `𝔯(E) − 𝔯(B) = 2𝔯(B,E⁺) − 2𝔯(B,E⁻) + 𝔯(E⁺) + 𝔯(E⁻) − 2𝔯(E⁺,E⁻)`,
/// every term on the same nodes and radial rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub energy: f64,
    pub ball: f64,
    pub ball_outer: f64,
    pub ball_inner: f64,
    pub outer: f64,
    pub inner: f64,
    pub outer_inner: f64,
}

pub fn energy_decomposition_with(g: &BoundKernel, u: &RadialGraph, q: EnergyQuadrature) -> Result<Decomposition> {
    let grid = u.grid();
    let layers = split_layers(u);
    let body = Shell::body(u);
    let ball = Shell::ball(grid);
    let plus = Shell::outer(&layers);
    let minus = Shell::inner(&layers);
    let energy = oriented_energy(g, grid, &body, &body, q)?;
    let ball_e = oriented_energy(g, grid, &ball, &ball, q)?;
    let ball_outer = riesz_cross_bound(g, grid, &ball, &plus, q)?;
    let ball_inner = riesz_cross_bound(g, grid, &ball, &minus, q)?;
    let outer = oriented_energy(g, grid, &plus, &plus, q)?;
    let inner = oriented_energy(g, grid, &minus, &minus, q)?;
    let outer_inner = riesz_cross_bound(g, grid, &plus, &minus, q)?;
    let lhs = energy - ball_e;
    let rhs = 2.0 * ball_outer - 2.0 * ball_inner + outer + inner - 2.0 * outer_inner;
    Ok(Decomposition {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        energy,
        ball: ball_e,
        ball_outer,
        ball_inner,
        outer,
        inner,
        outer_inner,
    })
}

pub fn energy_decomposition(k: &RadialKernel, u: &RadialGraph) -> Result<Decomposition> {
    let g = k.bind(u.dim())?;
    energy_decomposition_with(&g, u, EnergyQuadrature::for_grid(u.grid()))
}

/// `F_ε(E) = P(E) + ε 𝔯(E)` with its ball baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub perimeter: f64,
    pub riesz: f64,
    pub f_eps: f64,
    pub epsilon: f64,
    pub ball_perimeter: f64,
    pub ball_riesz: f64,
    /// `|F_ε(m) − F_ε(m/2)|` from a coarse pass; 0 when the grid is already the coarsest allowed.
    pub quadrature_error_estimate: f64,
}

impl EnergyReport {
    pub fn ball_f_eps(&self) -> f64 {
        self.ball_perimeter + self.epsilon * self.ball_riesz
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "perimeter = {:.15e}\nriesz = {:.15e}\nf_eps = {:.15e}\nepsilon = {:.15e}\nball_perimeter = {:.15e}\nball_riesz = {:.15e}\nball_f_eps = {:.15e}\nquadrature_error_estimate = {:.6e}\n",
            self.perimeter,
            self.riesz,
            self.f_eps,
            self.epsilon,
            self.ball_perimeter,
            self.ball_riesz,
            self.ball_f_eps(),
            self.quadrature_error_estimate
        )
    }
}

/// `P(E(u)) + ε 𝔯(E(u))` without baselines or error estimate.
pub fn f_eps_value(g: &BoundKernel, epsilon: f64, u: &RadialGraph, q: EnergyQuadrature) -> Result<f64> {
    let p = perimeter(u);
    if epsilon == 0.0 {
        return Ok(p);
    }
    Ok(p + epsilon * riesz_energy_with(g, u, q)?)
}

pub fn gamow_energy(k: &RadialKernel, epsilon: f64, u: &RadialGraph) -> Result<EnergyReport> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::PreconditionViolation(format!("ε must be ≥ 0, got {epsilon}")));
    }
    let dim = u.dim();
    let g = k.bind(dim)?;
    let grid = u.grid();
    let perimeter = perimeter(u);
    let riesz = riesz_energy_with(&g, u, EnergyQuadrature::for_grid(grid))?;
    let f_eps = perimeter + epsilon * riesz;
    let coarse_m = (grid.resolution() / 2).max(8);
    let quadrature_error_estimate = if coarse_m < grid.resolution() {
        let coarse = std::sync::Arc::new(SphereGrid::build(dim, coarse_m)?);
        let uc = u.resample(coarse.clone())?;
        let fc = f_eps_value(&g, epsilon, &uc, EnergyQuadrature::for_grid(&coarse))?;
        (f_eps - fc).abs()
    } else {
        0.0
    };
    Ok(EnergyReport {
        perimeter,
        riesz,
        f_eps,
        epsilon,
        ball_perimeter: sphere_area(dim),
        ball_riesz: riesz_ball_bound(&g)?,
        quadrature_error_estimate,
    })
}
