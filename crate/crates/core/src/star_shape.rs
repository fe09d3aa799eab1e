//! Star-shaped sets `E(u) = {ρx : x ∈ S^{N-1}, 0 ≤ ρ < 1 + u(x)}` over a sphere grid.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sphere_grid::{dot, norm_sq, sphere_area, unit_ball_volume, SphereGrid, Vec3};

/// Largest admissible `|u|` (exclusive).
pub const AMPLITUDE_LIMIT: f64 = 0.5;

/// A band-limited radial offset `u`, kept both as nodal values and harmonic coefficients.
#[derive(Debug, Clone)]
pub struct RadialGraph {
    grid: Arc<SphereGrid>,
    degree: usize,
    coeffs: Vec<f64>,
    values: Vec<f64>,
    gradient: Vec<Vec3>,
}

impl RadialGraph {
    pub fn from_coefficients(grid: Arc<SphereGrid>, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if degree > grid.max_degree() {
            return Err(Error::PreconditionViolation(format!(
                "degree {degree} exceeds the grid limit {}",
                grid.max_degree()
            )));
        }
        if coeffs.len() != grid.coeff_count(degree) {
            return Err(Error::PreconditionViolation(format!(
                "expected {} coefficients for degree {degree}, got {}",
                grid.coeff_count(degree),
                coeffs.len()
            )));
        }
        let values = grid.synthesize(&coeffs, degree);
        Self::assemble(grid, degree, coeffs, values)
    }

    /// Project nodal values onto the grid's full harmonic range.
    pub fn from_values(grid: Arc<SphereGrid>, values: &[f64]) -> Result<Self> {
        let degree = grid.max_degree();
        let coeffs = grid.analyze(values, degree);
        Self::from_coefficients(grid, degree, coeffs)
    }

    pub fn zero(grid: Arc<SphereGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            degree: 0,
            coeffs: vec![0.0],
            values: vec![0.0; n],
            gradient: vec![[0.0; 3]; n],
        }
    }

    pub fn constant(grid: Arc<SphereGrid>, c: f64) -> Result<Self> {
        let c0 = c * sphere_area(grid.dim()).sqrt();
        let n = grid.len();
        Self::assemble(grid, 0, vec![c0], vec![c; n])
    }

    fn assemble(grid: Arc<SphereGrid>, degree: usize, coeffs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if let Some((node, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() < AMPLITUDE_LIMIT))
        {
            return Err(Error::AmplitudeOverflow { node, value });
        }
        let gradient = grid.gradient(&coeffs, degree);
        Ok(Self {
            grid,
            degree,
            coeffs,
            values,
            gradient,
        })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradient(&self) -> &[Vec3] {
        &self.gradient
    }

    /// `1 + u(xᵢ)` per node.
    pub fn radii(&self) -> Vec<f64> {
        self.values.iter().map(|u| 1.0 + u).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `u` at an arbitrary direction.
    pub fn value_at(&self, dir: &Vec3) -> f64 {
        self.grid.eval_at(&self.coeffs, self.degree, dir)
    }

    /// The same expansion on another grid; degrees the target cannot resolve are dropped.
    pub fn resample(&self, grid: Arc<SphereGrid>) -> Result<Self> {
        if grid.dim() != self.dim() {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        let degree = self.degree.min(grid.max_degree());
        let coeffs = self.coeffs[..grid.coeff_count(degree)].to_vec();
        Self::from_coefficients(grid, degree, coeffs)
    }

    /// `t · u`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let coeffs = self.coeffs.iter().map(|c| c * t).collect();
        let values = self.values.iter().map(|v| v * t).collect();
        Self::assemble(self.grid.clone(), self.degree, coeffs, values)
    }

    /// `u + v` where `v` is band-limited to `degree` with the given coefficients.
    fn plus_expansion(&self, degree: usize, extra: &[f64]) -> Result<Self> {
        let d = self.degree.max(degree);
        let mut coeffs = vec![0.0; self.grid.coeff_count(d)];
        for (c, a) in coeffs.iter_mut().zip(&self.coeffs) {
            *c += a;
        }
        for (c, a) in coeffs.iter_mut().zip(extra) {
            *c += a;
        }
        Self::from_coefficients(self.grid.clone(), d, coeffs)
    }
}

/// `∫ (1+u)^N / N`.
pub fn volume(u: &RadialGraph) -> f64 {
    let n = u.dim() as i32;
    let f: Vec<f64> = u.values.iter().map(|v| (1.0 + v).powi(n) / n as f64).collect();
    u.grid.weighted_sum(&f)
}

/// `∫ (1+u)^{N-2} √((1+u)² + |∇_τ u|²)`.
pub fn perimeter(u: &RadialGraph) -> f64 {
    let n = u.dim() as i32;
    let f: Vec<f64> = u
        .values
        .iter()
        .zip(&u.gradient)
        .map(|(v, g)| {
            let r = 1.0 + v;
            r.powi(n - 2) * (r * r + norm_sq(g)).sqrt()
        })
        .collect();
    u.grid.weighted_sum(&f)
}

/// `‖u‖²_{L²} + ‖∇_τ u‖²_{L²}`.
pub fn w12_norm_sq(u: &RadialGraph) -> f64 {
    let f: Vec<f64> = u
        .values
        .iter()
        .zip(&u.gradient)
        .map(|(v, g)| v * v + norm_sq(g))
        .collect();
    u.grid.weighted_sum(&f)
}

/// `‖∇_τ u‖²_{L²}`.
pub fn gradient_norm_sq(u: &RadialGraph) -> f64 {
    let f: Vec<f64> = u.gradient.iter().map(norm_sq).collect();
    u.grid.weighted_sum(&f)
}

/// Barycenter of `E(u)`.
pub fn barycenter(u: &RadialGraph) -> Vec3 {
    let n = u.dim() as i32;
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let f: Vec<f64> = u
            .values
            .iter()
            .zip(u.grid.nodes())
            .map(|(v, x)| (1.0 + v).powi(n + 1) / (n + 1) as f64 * x[c])
            .collect();
        *slot = u.grid.weighted_sum(&f);
    }
    let vol = volume(u);
    out.map(|v| v / vol)
}

/// Outer and inner layers `u⁺ = u ∨ 0`, `u⁻ = (−u) ∨ 0` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedLayers {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl SignedLayers {
    /// `u = u⁺ − u⁻`.
    pub fn merge(&self) -> Vec<f64> {
        self.plus.iter().zip(&self.minus).map(|(p, m)| p - m).collect()
    }
}

pub fn split_layers(u: &RadialGraph) -> SignedLayers {
    SignedLayers {
        plus: u.values.iter().map(|v| v.max(0.0)).collect(),
        minus: u.values.iter().map(|v| (-v).max(0.0)).collect(),
    }
}

/// `|E⁺| = ∫ ((1+u⁺)^N − 1)/N` and `|E⁻| = ∫ (1 − (1−u⁻)^N)/N`.
pub fn layer_volumes(grid: &SphereGrid, layers: &SignedLayers) -> (f64, f64) {
    let n = grid.dim() as i32;
    let nf = n as f64;
    let plus: Vec<f64> = layers.plus.iter().map(|p| ((1.0 + p).powi(n) - 1.0) / nf).collect();
    let minus: Vec<f64> = layers.minus.iter().map(|m| (1.0 - (1.0 - m).powi(n)) / nf).collect();
    (grid.weighted_sum(&plus), grid.weighted_sum(&minus))
}

/// Rescale radially so that `|E(u')| = ω_N`: `1 + u' = λ(1 + u)`.
pub fn normalize_volume(u: &RadialGraph) -> Result<RadialGraph> {
    let dim = u.dim();
    let lambda = (unit_ball_volume(dim) / volume(u)).powf(1.0 / dim as f64);
    let c0 = sphere_area(dim).sqrt();
    let mut coeffs: Vec<f64> = u.coeffs.iter().map(|c| lambda * c).collect();
    coeffs[0] = lambda * (u.coeffs[0] + c0) - c0;
    let values = u.values.iter().map(|v| lambda * (1.0 + v) - 1.0).collect();
    RadialGraph::assemble(u.grid.clone(), u.degree, coeffs, values)
}

/// Shift the barycenter to the origin by repeatedly subtracting `b · x` (a degree-one
/// harmonic), renormalizing the volume after each of the `iterations` passes.
pub fn recenter(u: &RadialGraph, iterations: usize) -> Result<RadialGraph> {
    let grid = u.grid.clone();
    let mut cur = normalize_volume(u)?;
    for _ in 0..iterations {
        let b = barycenter(&cur);
        let field: Vec<f64> = grid.nodes().iter().map(|x| -dot(&b, x)).collect();
        let shift = grid.analyze(&field, 1);
        cur = normalize_volume(&cur.plus_expansion(1, &shift)?)?;
    }
    Ok(cur)
}

/// Isoperimetric deficit against `‖u‖²_{W^{1,2}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FugledeDeficit {
    pub deficit: f64,
    pub norm_sq: f64,
    /// `None` when `norm_sq < 1e-14`.
    pub ratio: Option<f64>,
}

pub const FUGLEDE_VOLUME_TOL: f64 = 1e-8;
pub const FUGLEDE_BARYCENTER_TOL: f64 = 1e-3;
pub const FUGLEDE_MAX_AMPLITUDE: f64 = 0.2;

pub fn fuglede_deficit(u: &RadialGraph) -> Result<FugledeDeficit> {
    let dim = u.dim();
    let omega = unit_ball_volume(dim);
    let vol = volume(u);
    if ((vol - omega) / omega).abs() > FUGLEDE_VOLUME_TOL {
        return Err(Error::PreconditionViolation(format!("volume {vol} differs from {omega}")));
    }
    let b = barycenter(u);
    if norm_sq(&b).sqrt() > FUGLEDE_BARYCENTER_TOL {
        return Err(Error::PreconditionViolation(format!("barycenter {b:?} is not at the origin")));
    }
    if u.max_abs() > FUGLEDE_MAX_AMPLITUDE {
        return Err(Error::PreconditionViolation(format!(
            "amplitude {} exceeds {FUGLEDE_MAX_AMPLITUDE}",
            u.max_abs()
        )));
    }
    let deficit = perimeter(u) - sphere_area(dim);
    let norm_sq = w12_norm_sq(u);
    Ok(FugledeDeficit {
        deficit,
        norm_sq,
        ratio: (norm_sq >= 1e-14).then(|| deficit / norm_sq),
    })
}

/// Seeded random combination of harmonics of degrees `1..=degree`, scaled so the
/// nodal maximum of `|u|` equals `amplitude`.
pub fn random_shape(seed: u64, amplitude: f64, degree: usize, grid: Arc<SphereGrid>) -> Result<RadialGraph> {
    if !(0.0..=0.4).contains(&amplitude) {
        return Err(Error::PreconditionViolation(format!("amplitude {amplitude} outside [0, 0.4]")));
    }
    if degree == 0 || degree > grid.max_degree() {
        return Err(Error::PreconditionViolation(format!(
            "degree {degree} outside 1..={}",
            grid.max_degree()
        )));
    }
    if amplitude == 0.0 {
        return Ok(RadialGraph::zero(grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<f64> = (0..grid.coeff_count(degree))
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    coeffs[0] = 0.0;
    let values = grid.synthesize(&coeffs, degree);
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = amplitude / peak;
    let coeffs: Vec<f64> = coeffs.iter().map(|c| c * scale).collect();
    let values = values.iter().map(|v| (v * scale).clamp(-amplitude, amplitude)).collect();
    RadialGraph::assemble(grid, degree, coeffs, values)
}

/// Shape file: optional `#` header lines, then `N m L`, then one coefficient per line
/// in the grid's harmonic order.
pub fn write_shape(u: &RadialGraph, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    let _ = writeln!(out, "{} {} {}", u.dim(), u.grid.resolution(), u.degree);
    for c in &u.coeffs {
        let _ = writeln!(out, "{c:.17e}");
    }
    out
}

/// Parsed shape file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFile {
    pub dim: usize,
    pub m: usize,
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl ShapeFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (lineno, head) = lines.next().ok_or_else(|| Error::ShapeParse("missing `N m L` line".into()))?;
        let fields: Vec<usize> = head
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::ShapeParse(format!("line {lineno}: expected `N m L`, got `{head}`")))?;
        let [dim, m, degree] = fields[..] else {
            return Err(Error::ShapeParse(format!("line {lineno}: expected three integers, got `{head}`")));
        };
        if !(dim == 2 || dim == 3) {
            return Err(Error::ShapeParse(format!("line {lineno}: unsupported dimension {dim}")));
        }
        let coeffs: Vec<f64> = lines
            .map(|(i, l)| {
                l.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ShapeParse(format!("line {i}: bad coefficient `{l}`")))
            })
            .collect::<Result<_>>()?;
        let expected = crate::sphere_grid::coeff_count(dim, degree);
        if coeffs.len() != expected {
            return Err(Error::ShapeParse(format!(
                "expected {expected} coefficients for N={dim}, L={degree}, found {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            dim,
            m,
            degree,
            coeffs,
        })
    }

    pub fn into_graph(self) -> Result<RadialGraph> {
        let grid = Arc::new(SphereGrid::build(self.dim, self.m).map_err(|e| Error::ShapeParse(e.to_string()))?);
        RadialGraph::from_coefficients(grid, self.degree, self.coeffs).map_err(|e| Error::ShapeParse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(dim: usize, m: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::build(dim, m).unwrap())
    }

    #[test]
    fn amplitude_bound_enforced() {
        let g = grid(3, 8);
        assert!(matches!(RadialGraph::constant(g.clone(), 0.5), Err(Error::AmplitudeOverflow { .. })));
        assert!(RadialGraph::constant(g.clone(), -0.49).is_ok());
        let v: Vec<f64> = g.nodes().iter().map(|x| 0.7 * x[2]).collect();
        assert!(matches!(RadialGraph::from_values(g, &v), Err(Error::AmplitudeOverflow { .. })));
    }

    #[test]
    fn values_and_coefficients_stay_synchronized() {
        let g = grid(3, 12);
        let u = random_shape(4, 0.2, 5, g.clone()).unwrap();
        let re = g.synthesize(u.coefficients(), u.degree());
        for (a, b) in re.iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        let n = normalize_volume(&u).unwrap();
        let re = g.synthesize(n.coefficients(), n.degree());
        for (a, b) in re.iter().zip(n.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn volume_and_perimeter_examples() {
        let g3 = grid(3, 16);
        let z = RadialGraph::zero(g3.clone());
        assert!((volume(&z) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((perimeter(&z) - 4.0 * PI).abs() < 1e-12);
        let g2 = grid(2, 32);
        let c = RadialGraph::constant(g2, 0.1).unwrap();
        assert!((volume(&c) - PI * 1.21).abs() < 1e-12);
        assert!((perimeter(&c) - 2.0 * PI * 1.1).abs() < 1e-12);
    }

    #[test]
    fn dilations_match_closed_forms() {
        for (dim, m) in [(2, 16), (3, 10)] {
            let g = grid(dim, m);
            for c in [-0.3, -0.05, 0.0, 0.12, 0.4] {
                let u = RadialGraph::constant(g.clone(), c).unwrap();
                let omega = unit_ball_volume(dim);
                let n = dim as i32;
                assert!((volume(&u) / (omega * (1.0 + c).powi(n)) - 1.0).abs() < 1e-10);
                assert!((perimeter(&u) / (dim as f64 * omega * (1.0 + c).powi(n - 1)) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ellipse_perimeter_against_polyline() {
        let (a, b) = (1.1, 1.0 / 1.1);
        let g = grid(2, 256);
        let vals: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| 1.0 / ((x[0] / a).powi(2) + (x[1] / b).powi(2)).sqrt() - 1.0)
            .collect();
        let u = RadialGraph::from_values(g, &vals).unwrap();
        let segments = 1_000_000;
        let mut poly = 0.0;
        let pt = |i: usize| {
            let t = 2.0 * PI * i as f64 / segments as f64;
            (a * t.cos(), b * t.sin())
        };
        let mut prev = pt(0);
        for i in 1..=segments {
            let p = pt(i);
            poly += ((p.0 - prev.0).powi(2) + (p.1 - prev.1).powi(2)).sqrt();
            prev = p;
        }
        let p = perimeter(&u);
        assert!(((p - poly) / poly).abs() < 1e-5, "{p} vs {poly}");
    }

    #[test]
    fn w12_examples() {
        let g = grid(3, 12);
        assert_eq!(w12_norm_sq(&RadialGraph::zero(g.clone())), 0.0);
        let c = RadialGraph::constant(g.clone(), 0.2).unwrap();
        assert!((w12_norm_sq(&c) - 4.0 * PI * 0.04).abs() < 1e-12);
        // u = 0.3 x₁ (scaled to respect |u| < 1/2): 0.09 · 4π
        let vals: Vec<f64> = g.nodes().iter().map(|x| 0.3 * x[0]).collect();
        let u = RadialGraph::from_values(g, &vals).unwrap();
        assert!((w12_norm_sq(&u) - 0.09 * 4.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn layer_identities() {
        let g = grid(3, 12);
        let neg = RadialGraph::constant(g.clone(), -0.1).unwrap();
        let l = split_layers(&neg);
        assert!(l.plus.iter().all(|p| *p == 0.0));
        assert_eq!(layer_volumes(&g, &l).0, 0.0);

        let vals: Vec<f64> = g.nodes().iter().map(|x| 0.2 * x[0]).collect();
        let u = RadialGraph::from_values(g.clone(), &vals).unwrap();
        let (p, m) = layer_volumes(&g, &split_layers(&u));
        assert!(p > 0.0);
        // odd u: |E⁺| = |E⁻| only to first order; the exact relation is the volume identity
        let omega = unit_ball_volume(3);
        assert!((volume(&u) - (omega + p - m)).abs() < 1e-10);

        for seed in 0..5 {
            let u = random_shape(seed, 0.3, 4, g.clone()).unwrap();
            let l = split_layers(&u);
            assert_eq!(l.merge(), u.values());
            assert!(l.plus.iter().zip(&l.minus).all(|(a, b)| *a >= 0.0 && *b >= 0.0 && a * b == 0.0));
            let (p, m) = layer_volumes(&g, &l);
            assert!((volume(&u) - (omega + p - m)).abs() < 1e-10);
        }
    }

    #[test]
    fn normalize_examples() {
        let g = grid(3, 10);
        let z = normalize_volume(&RadialGraph::zero(g.clone())).unwrap();
        assert!(z.values().iter().all(|v| v.abs() < 1e-15));
        let c = normalize_volume(&RadialGraph::constant(g.clone(), 0.1).unwrap()).unwrap();
        assert!(c.max_abs() < 1e-14, "{}", c.max_abs());
        for seed in 0..5 {
            let u = normalize_volume(&random_shape(seed, 0.3, 4, g.clone()).unwrap()).unwrap();
            assert!((volume(&u) / unit_ball_volume(3) - 1.0).abs() < 1e-10);
        }
        // a shape whose rescaling pushes |u'| past 1/2
        let vals: Vec<f64> = g.nodes().iter().map(|x| 0.49 * x[2]).collect();
        let u = RadialGraph::from_values(g, &vals).unwrap();
        assert!(matches!(normalize_volume(&u), Err(Error::AmplitudeOverflow { .. })));
    }

    #[test]
    fn random_shape_contract() {
        let g = grid(3, 12);
        let z = random_shape(9, 0.0, 4, g.clone()).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        let a = random_shape(1, 0.1, 4, g.clone()).unwrap();
        let b = random_shape(1, 0.1, 4, g.clone()).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.max_abs() <= 0.1 + 1e-12);
        assert!((a.max_abs() - 0.1).abs() < 1e-12);
        assert!(random_shape(1, 0.5, 4, g.clone()).is_err());
        assert!(random_shape(1, 0.1, 40, g).is_err());
    }

    #[test]
    fn fuglede_examples() {
        let g = grid(3, 16);
        let z = fuglede_deficit(&RadialGraph::zero(g.clone())).unwrap();
        assert!(z.deficit.abs() < 1e-12);
        assert_eq!(z.norm_sq, 0.0);
        assert_eq!(z.ratio, None);

        let p2 = |g: &Arc<SphereGrid>| {
            let vals: Vec<f64> = g.nodes().iter().map(|x| 0.05 * (3.0 * x[0] * x[0] - 1.0) / 2.0).collect();
            let u = RadialGraph::from_values(g.clone(), &vals).unwrap();
            fuglede_deficit(&recenter(&u, 3).unwrap()).unwrap()
        };
        let coarse = p2(&g);
        let fine = p2(&grid(3, 32));
        assert!(coarse.deficit > 0.0 && coarse.ratio.unwrap() > 0.0);
        assert!((coarse.ratio.unwrap() / fine.ratio.unwrap() - 1.0).abs() < 0.01);

        let off = RadialGraph::constant(g.clone(), 0.05).unwrap();
        assert!(matches!(fuglede_deficit(&off), Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn recenter_kills_barycenter() {
        let g = grid(3, 12);
        for seed in 0..5 {
            let u = recenter(&random_shape(seed, 0.1, 4, g.clone()).unwrap(), 3).unwrap();
            assert!(norm_sq(&barycenter(&u)).sqrt() < 1e-3);
            assert!((volume(&u) / unit_ball_volume(3) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn isoperimetric_on_normalized_shapes() {
        for (dim, m) in [(2, 32), (3, 12)] {
            let g = grid(dim, m);
            for seed in 0..10 {
                let u = normalize_volume(&random_shape(seed, 0.3, 4, g.clone()).unwrap()).unwrap();
                assert!(perimeter(&u) >= sphere_area(dim) - 1e-8);
            }
        }
    }

    #[test]
    fn shape_file_round_trip_and_errors() {
        let g = grid(3, 10);
        let u = random_shape(3, 0.1, 3, g).unwrap();
        let text = write_shape(&u, &["format = shape-v1".to_string()]);
        let back = ShapeFile::parse(&text).unwrap().into_graph().unwrap();
        assert_eq!(back.coefficients(), u.coefficients());
        assert!(ShapeFile::parse("3 10\n0.0\n").is_err());
        assert!(ShapeFile::parse("3 10 1\n0.0\n0.1\n").is_err());
        assert!(ShapeFile::parse("3 10 0\nabc\n").is_err());
        assert!(ShapeFile::parse("").is_err());
    }
}
