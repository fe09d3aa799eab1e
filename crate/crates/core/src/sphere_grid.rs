//! Quadrature and spectral tangential calculus on `S^{N-1}`, `N ∈ {2, 3}`.
//!
//! `N = 2`: `m` equispaced angles. `N = 3`: a product rule, Gauss–Legendre in
//! `cos θ` (`m` rings) times `2m` uniform azimuths, nodes stored ring-major.
//!
//! Harmonic coefficients are orthonormal with respect to the surface measure.
//! Ordering: for `N = 2`, `[1, cos φ, sin φ, cos 2φ, sin 2φ, …]`; for `N = 3`,
//! `(ℓ, k)` lexicographic with `k = -ℓ..=ℓ`, where `k < 0` selects `sin(|k| φ)`
//! and `k > 0` selects `cos(k φ)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, pairwise_sum, GaussRule};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sq(a: &Vec3) -> f64 {
    dot(a, a)
}

/// `|S^{N-1}|`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unit_ball_volume(dim) * dim as f64,
    }
}

/// `ω_N`, the volume of the unit ball.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let n = dim as f64;
    PI.powf(n / 2.0) / gamma_half_integer(dim + 2)
}

/// `Γ(k/2)` for positive integers `k`.
fn gamma_half_integer(k: usize) -> f64 {
    if k == 1 {
        PI.sqrt()
    } else if k == 2 {
        1.0
    } else {
        (k as f64 / 2.0 - 1.0) * gamma_half_integer(k - 2)
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Circle {
        angles: Vec<f64>,
    },
    Product {
        cos_t: Vec<f64>,
        sin_t: Vec<f64>,
        gl_weights: Vec<f64>,
        /// `cos(kφ_p)`, `sin(kφ_p)` indexed `[k * 2m + p]`.
        cos_kp: Vec<f64>,
        sin_kp: Vec<f64>,
        /// Normalized associated Legendre values per ring, `[j * table_len + lk(l, k)]`.
        legendre: Vec<f64>,
        dlegendre: Vec<f64>,
        table_len: usize,
    },
}

/// Immutable quadrature mesh on the unit sphere.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    dim: usize,
    m: usize,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    layout: Layout,
}

#[inline]
fn lk(l: usize, k: usize) -> usize {
    l * (l + 1) / 2 + k
}

/// Normalized associated Legendre functions `P̄_ℓ^k(cos θ)` for `0 ≤ k ≤ ℓ ≤ lmax`
/// (so that `2π ∫ P̄² dx = 1`), with their θ-derivatives. `s = sin θ > 0`.
fn legendre_rows(x: f64, s: f64, lmax: usize, p: &mut [f64], dp: &mut [f64]) {
    p[0] = 1.0 / (4.0 * PI).sqrt();
    for k in 0..=lmax {
        if k > 0 {
            let kf = k as f64;
            p[lk(k, k)] = ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s * p[lk(k - 1, k - 1)];
        }
        if k < lmax {
            p[lk(k + 1, k)] = (2.0 * k as f64 + 3.0).sqrt() * x * p[lk(k, k)];
        }
        for l in k + 2..=lmax {
            let lf = l as f64;
            let kf = k as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - kf * kf)).sqrt();
            let b = (((lf - 1.0).powi(2) - kf * kf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[lk(l, k)] = a * (x * p[lk(l - 1, k)] - b * p[lk(l - 2, k)]);
        }
    }
    for l in 0..=lmax {
        for k in 0..=l {
            let lf = l as f64;
            let kf = k as f64;
            let prev = if l > k {
                ((2.0 * lf + 1.0) * (lf * lf - kf * kf) / (2.0 * lf - 1.0)).sqrt() * p[lk(l - 1, k)]
            } else {
                0.0
            };
            dp[lk(l, k)] = (lf * x * p[lk(l, k)] - prev) / s;
        }
    }
}

impl SphereGrid {
    /// `N = 2`: `m` equispaced nodes. `N = 3`: `m` Gauss–Legendre rings × `2m` azimuths.
    pub fn build(dim: usize, m: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidGrid(format!("resolution m must be at least 8, got {m}")));
        }
        match dim {
            2 => {
                let angles: Vec<f64> = (0..m).map(|p| 2.0 * PI * p as f64 / m as f64).collect();
                let nodes = angles.iter().map(|a| [a.cos(), a.sin(), 0.0]).collect();
                Ok(Self {
                    dim,
                    m,
                    nodes,
                    weights: vec![2.0 * PI / m as f64; m],
                    layout: Layout::Circle { angles },
                })
            }
            3 => Ok(Self::build_product(m)),
            other => Err(Error::UnsupportedDimension(other)),
        }
    }

    fn build_product(m: usize) -> Self {
        let (xs, ws) = gauss_legendre(m);
        let naz = 2 * m;
        let dphi = 2.0 * PI / naz as f64;
        let lmax = m - 1;
        let table_len = lk(lmax, lmax) + 1;
        let mut nodes = Vec::with_capacity(m * naz);
        let mut weights = Vec::with_capacity(m * naz);
        let sin_t: Vec<f64> = xs.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        for (j, &x) in xs.iter().enumerate() {
            for p in 0..naz {
                let phi = dphi * p as f64;
                nodes.push([sin_t[j] * phi.cos(), sin_t[j] * phi.sin(), x]);
                weights.push(ws[j] * dphi);
            }
        }
        let mut cos_kp = vec![0.0; (lmax + 1) * naz];
        let mut sin_kp = vec![0.0; (lmax + 1) * naz];
        for k in 0..=lmax {
            for p in 0..naz {
                let a = (k * p % naz) as f64 * dphi;
                cos_kp[k * naz + p] = a.cos();
                sin_kp[k * naz + p] = a.sin();
            }
        }
        let mut legendre = vec![0.0; m * table_len];
        let mut dlegendre = vec![0.0; m * table_len];
        for j in 0..m {
            let (p, dp) = (
                &mut legendre[j * table_len..(j + 1) * table_len],
                &mut dlegendre[j * table_len..(j + 1) * table_len],
            );
            legendre_rows(xs[j], sin_t[j], lmax, p, dp);
        }
        Self {
            dim: 3,
            m,
            nodes,
            weights,
            layout: Layout::Product {
                cos_t: xs,
                sin_t,
                gl_weights: ws,
                cos_kp,
                sin_kp,
                legendre,
                dlegendre,
                table_len,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Typical geodesic node spacing.
    pub fn spacing(&self) -> f64 {
        match self.dim {
            2 => 2.0 * PI / self.m as f64,
            _ => PI / self.m as f64,
        }
    }

    /// Highest harmonic degree the grid resolves with exact products.
    pub fn max_degree(&self) -> usize {
        match self.dim {
            2 => (self.m - 1) / 2,
            _ => self.m - 1,
        }
    }

    pub fn coeff_count(&self, degree: usize) -> usize {
        coeff_count(self.dim, degree)
    }

    /// `Σ wᵢ f(xᵢ)`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        assert_eq!(f.len(), self.len(), "field length must match node count");
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(self.weighted_sum(f))
    }

    /// `Σ wᵢ f(xᵢ)` without the finiteness check.
    pub(crate) fn weighted_sum(&self, f: &[f64]) -> f64 {
        let terms: Vec<f64> = self.weights.iter().zip(f).map(|(w, v)| w * v).collect();
        pairwise_sum(&terms)
    }

    /// Integral of a closure over the nodes.
    pub fn integrate_fn<F: Fn(&Vec3) -> f64>(&self, f: F) -> Result<f64> {
        let vals: Vec<f64> = self.nodes.iter().map(f).collect();
        self.integrate(&vals)
    }

    /// Project nodal values onto harmonics of degree `≤ degree`.
    pub fn analyze(&self, values: &[f64], degree: usize) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        assert!(degree <= self.max_degree(), "degree {degree} exceeds grid limit {}", self.max_degree());
        match &self.layout {
            Layout::Circle { angles } => {
                let mut out = vec![0.0; 2 * degree + 1];
                let w = 2.0 * PI / self.m as f64;
                out[0] = pairwise_sum(&values.iter().map(|v| v * w / (2.0 * PI).sqrt()).collect::<Vec<_>>());
                let s = 1.0 / PI.sqrt();
                for k in 1..=degree {
                    let kf = k as f64;
                    let c: Vec<f64> = values.iter().zip(angles).map(|(v, a)| v * (kf * a).cos()).collect();
                    let d: Vec<f64> = values.iter().zip(angles).map(|(v, a)| v * (kf * a).sin()).collect();
                    out[2 * k - 1] = pairwise_sum(&c) * w * s;
                    out[2 * k] = pairwise_sum(&d) * w * s;
                }
                out
            }
            Layout::Product {
                gl_weights,
                cos_kp,
                sin_kp,
                legendre,
                table_len,
                ..
            } => {
                let naz = 2 * self.m;
                let dphi = 2.0 * PI / naz as f64;
                let mut out = vec![0.0; (degree + 1) * (degree + 1)];
                let sqrt2 = 2f64.sqrt();
                for j in 0..self.m {
                    let ring = &values[j * naz..(j + 1) * naz];
                    let p = &legendre[j * table_len..(j + 1) * table_len];
                    for k in 0..=degree {
                        let (mut a, mut b) = (0.0, 0.0);
                        for (q, v) in ring.iter().enumerate() {
                            a += v * cos_kp[k * naz + q];
                            b += v * sin_kp[k * naz + q];
                        }
                        a *= dphi * gl_weights[j];
                        b *= dphi * gl_weights[j];
                        for l in k..=degree {
                            let pl = p[lk(l, k)];
                            if k == 0 {
                                out[l * l + l] += pl * a;
                            } else {
                                out[l * l + l + k] += sqrt2 * pl * a;
                                out[l * l + l - k] += sqrt2 * pl * b;
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Nodal values of a harmonic expansion of degree `≤ degree`.
    pub fn synthesize(&self, coeffs: &[f64], degree: usize) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.coeff_count(degree));
        assert!(degree <= self.max_degree());
        match &self.layout {
            Layout::Circle { angles } => angles.iter().map(|&a| eval_circle(coeffs, degree, a)).collect(),
            Layout::Product {
                cos_kp,
                sin_kp,
                legendre,
                table_len,
                ..
            } => {
                let naz = 2 * self.m;
                let mut out = vec![0.0; self.len()];
                let sqrt2 = 2f64.sqrt();
                let mut ck = vec![0.0; degree + 1];
                let mut sk = vec![0.0; degree + 1];
                for j in 0..self.m {
                    let p = &legendre[j * table_len..(j + 1) * table_len];
                    ring_sums(coeffs, degree, p, &mut ck, &mut sk);
                    for q in 0..naz {
                        let mut v = ck[0];
                        for k in 1..=degree {
                            v += sqrt2 * (ck[k] * cos_kp[k * naz + q] + sk[k] * sin_kp[k * naz + q]);
                        }
                        out[j * naz + q] = v;
                    }
                }
                out
            }
        }
    }

    /// Tangential gradient of a harmonic expansion at every node.
    pub fn gradient(&self, coeffs: &[f64], degree: usize) -> Vec<Vec3> {
        assert_eq!(coeffs.len(), self.coeff_count(degree));
        match &self.layout {
            Layout::Circle { angles } => angles
                .iter()
                .map(|&a| {
                    let d = deriv_circle(coeffs, degree, a);
                    [-a.sin() * d, a.cos() * d, 0.0]
                })
                .collect(),
            Layout::Product {
                cos_t,
                sin_t,
                cos_kp,
                sin_kp,
                legendre,
                dlegendre,
                table_len,
                ..
            } => {
                let naz = 2 * self.m;
                let sqrt2 = 2f64.sqrt();
                let mut out = vec![[0.0; 3]; self.len()];
                let (mut ck, mut sk) = (vec![0.0; degree + 1], vec![0.0; degree + 1]);
                let (mut dck, mut dsk) = (vec![0.0; degree + 1], vec![0.0; degree + 1]);
                for j in 0..self.m {
                    let p = &legendre[j * table_len..(j + 1) * table_len];
                    let dp = &dlegendre[j * table_len..(j + 1) * table_len];
                    ring_sums(coeffs, degree, p, &mut ck, &mut sk);
                    ring_sums(coeffs, degree, dp, &mut dck, &mut dsk);
                    let (ct, st) = (cos_t[j], sin_t[j]);
                    for q in 0..naz {
                        let (cphi, sphi) = (cos_kp[naz + q], sin_kp[naz + q]);
                        let mut d_theta = dck[0];
                        let mut d_phi = 0.0;
                        for k in 1..=degree {
                            let (c, s) = (cos_kp[k * naz + q], sin_kp[k * naz + q]);
                            d_theta += sqrt2 * (dck[k] * c + dsk[k] * s);
                            d_phi += sqrt2 * k as f64 * (sk[k] * c - ck[k] * s);
                        }
                        let d_phi = d_phi / st;
                        let e_theta = [ct * cphi, ct * sphi, -st];
                        let e_phi = [-sphi, cphi, 0.0];
                        out[j * naz + q] = [
                            d_theta * e_theta[0] + d_phi * e_phi[0],
                            d_theta * e_theta[1] + d_phi * e_phi[1],
                            d_theta * e_theta[2] + d_phi * e_phi[2],
                        ];
                    }
                }
                out
            }
        }
    }

    /// Evaluate a harmonic expansion at an arbitrary direction (normalized internally).
    pub fn eval_at(&self, coeffs: &[f64], degree: usize, dir: &Vec3) -> f64 {
        eval_harmonics(self.dim, coeffs, degree, dir)
    }

    /// `∫_{E_x} ∫_0^π f(x cos θ + ω sin θ) (sin θ)^{N-2} dθ dω`: the sphere integral
    /// written in polar coordinates about `x`.
    pub fn integrate_polar_about<F: Fn(&Vec3) -> f64>(&self, x: &Vec3, f: F) -> Result<f64> {
        let n = norm_sq(x).sqrt();
        let x = [x[0] / n, x[1] / n, x[2] / n];
        let rule = GaussRule::new(self.m.max(8) * 2);
        let (e1, e2) = orthonormal_frame(&x);
        let dirs: Vec<(Vec3, f64)> = match self.dim {
            2 => vec![(e1, 1.0), ([-e1[0], -e1[1], -e1[2]], 1.0)],
            3 => {
                let nb = 4 * self.m;
                let db = 2.0 * PI / nb as f64;
                (0..nb)
                    .map(|b| {
                        let (c, s) = ((b as f64 * db).cos(), (b as f64 * db).sin());
                        ([c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]], db)
                    })
                    .collect()
            }
            other => return Err(Error::UnsupportedDimension(other)),
        };
        let mut terms = Vec::with_capacity(dirs.len() * rule.len());
        for (w, wb) in &dirs {
            for (theta, wt) in rule.mapped(0.0, PI) {
                let (c, s) = (theta.cos(), theta.sin());
                let y = [x[0] * c + w[0] * s, x[1] * c + w[1] * s, x[2] * c + w[2] * s];
                let v = f(&y);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSample(terms.len()));
                }
                let jac = if self.dim == 3 { s } else { 1.0 };
                terms.push(wb * wt * jac * v);
            }
        }
        Ok(pairwise_sum(&terms))
    }
}

fn ring_sums(coeffs: &[f64], degree: usize, p: &[f64], ck: &mut [f64], sk: &mut [f64]) {
    for k in 0..=degree {
        let (mut c, mut s) = (0.0, 0.0);
        for l in k..=degree {
            let pl = p[lk(l, k)];
            c += coeffs[l * l + l + k] * pl;
            if k > 0 {
                s += coeffs[l * l + l - k] * pl;
            }
        }
        ck[k] = c;
        sk[k] = s;
    }
}

/// Number of harmonic coefficients of degree `≤ degree`.
pub fn coeff_count(dim: usize, degree: usize) -> usize {
    match dim {
        2 => 2 * degree + 1,
        _ => (degree + 1) * (degree + 1),
    }
}

/// Harmonic degree of the coefficient at `index`.
pub fn degree_of(dim: usize, index: usize) -> usize {
    match dim {
        2 => index.div_ceil(2),
        _ => (index as f64).sqrt().floor() as usize,
    }
}

fn eval_circle(coeffs: &[f64], degree: usize, a: f64) -> f64 {
    let s = 1.0 / PI.sqrt();
    let mut v = coeffs[0] / (2.0 * PI).sqrt();
    for k in 1..=degree {
        let kf = k as f64;
        v += s * (coeffs[2 * k - 1] * (kf * a).cos() + coeffs[2 * k] * (kf * a).sin());
    }
    v
}

fn deriv_circle(coeffs: &[f64], degree: usize, a: f64) -> f64 {
    let s = 1.0 / PI.sqrt();
    let mut v = 0.0;
    for k in 1..=degree {
        let kf = k as f64;
        v += s * kf * (-coeffs[2 * k - 1] * (kf * a).sin() + coeffs[2 * k] * (kf * a).cos());
    }
    v
}

/// Evaluate an orthonormal harmonic expansion at direction `dir`.
pub fn eval_harmonics(dim: usize, coeffs: &[f64], degree: usize, dir: &Vec3) -> f64 {
    match dim {
        2 => eval_circle(coeffs, degree, dir[1].atan2(dir[0])),
        _ => {
            let r = norm_sq(dir).sqrt();
            let x = (dir[2] / r).clamp(-1.0, 1.0);
            let s = (1.0 - x * x).sqrt().max(1e-300);
            let phi = dir[1].atan2(dir[0]);
            let len = lk(degree, degree) + 1;
            let mut p = vec![0.0; len];
            let mut dp = vec![0.0; len];
            legendre_rows(x, s, degree, &mut p, &mut dp);
            let sqrt2 = 2f64.sqrt();
            let mut v = 0.0;
            for l in 0..=degree {
                v += coeffs[l * l + l] * p[lk(l, 0)];
                for k in 1..=l {
                    let kf = k as f64;
                    v += sqrt2
                        * p[lk(l, k)]
                        * (coeffs[l * l + l + k] * (kf * phi).cos() + coeffs[l * l + l - k] * (kf * phi).sin());
                }
            }
            v
        }
    }
}

/// Two unit vectors completing `x` to an orthonormal basis.
pub fn orthonormal_frame(x: &Vec3) -> (Vec3, Vec3) {
    let a = if x[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot(&a, x);
    let mut e1 = [a[0] - d * x[0], a[1] - d * x[1], a[2] - d * x[2]];
    let n = norm_sq(&e1).sqrt();
    e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
    let e2 = [
        x[1] * e1[2] - x[2] * e1[1],
        x[2] * e1[0] - x[0] * e1[2],
        x[0] * e1[1] - x[1] * e1[0],
    ];
    (e1, e2)
}

/// `∇_τ u` at every node, via the grid's full-degree harmonic expansion of `u`.
pub fn tangential_gradient(grid: &SphereGrid, u: &[f64]) -> Vec<Vec3> {
    let l = grid.max_degree();
    let c = grid.analyze(u, l);
    grid.gradient(&c, l)
}
