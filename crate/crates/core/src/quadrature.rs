//! One-dimensional quadrature: Gauss–Legendre rules, adaptive Gauss–Kronrod,
//! geometric refinement toward an integrable endpoint singularity, and the
//! fixed-order pairwise reduction used by every grid sum in the crate.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A Gauss–Legendre rule mapped onto an interval on demand.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes on `[-1, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(x, w)` pairs for the interval `[a, b]` (oriented: `b < a` flips the sign of the weights).
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Nodes and weights on `[0, 1]` after the grading map `t ↦ t^q`, clustering toward 0.
    pub fn graded_unit(&self, q: f64) -> Vec<(f64, f64)> {
        self.mapped(0.0, 1.0)
            .map(|(t, w)| (t.powf(q), w * q * t.powf(q - 1.0)))
            .collect()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let vals: Vec<f64> = self.mapped(a, b).map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&vals)
    }
}

/// Sum in a fixed binary-tree order; the result depends only on the slice contents.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        s
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveTol {
    pub abs: f64,
    pub rel: f64,
    /// Upper bound on the number of panels.
    pub max_panels: usize,
}

impl Default for AdaptiveTol {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-11,
            max_panels: 400,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature on `[a, b]`: the panel with the largest
/// error estimate is bisected until the summed estimate meets the tolerance or the
/// panel budget runs out.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: AdaptiveTol) -> f64 {
    if a == b {
        return 0.0;
    }
    let (value, err) = gk15(&mut f, a, b);
    if !value.is_finite() {
        return value;
    }
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Panel { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    while total_err > tol.abs.max(tol.rel * total.abs()) && heap.len() < tol.max_panels {
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, m);
        let (rv, re) = gk15(&mut f, m, worst.b);
        if !(lv.is_finite() && rv.is_finite()) {
            return f64::NAN;
        }
        total += lv + rv - worst.value;
        total_err += le + re - worst.err;
        heap.push(Panel { a: worst.a, b: m, value: lv, err: le });
        heap.push(Panel { a: m, b: worst.b, value: rv, err: re });
    }
    // Re-add in a fixed order so the result does not carry the running-sum drift.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let values: Vec<f64> = panels.iter().map(|p| p.value).collect();
    pairwise_sum(&values)
}

/// Settings for [`graded_left`]: geometric refinement `[lo + L 2^{-k-1}, lo + L 2^{-k}]`.
#[derive(Debug, Clone, Copy)]
pub struct Refinement {
    pub max_levels: usize,
    pub divergence_threshold: f64,
    pub cauchy_tol: f64,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            max_levels: 60,
            divergence_threshold: 1e12,
            cauchy_tol: 1e-10,
        }
    }
}

/// Integrate `f` over `[lo, hi]` when `f` may carry an integrable singularity at `lo`.
///
/// Dyadic pieces shrinking toward `lo` are integrated one at a time. Once the piece
/// ratio settles below one, the geometric tail is added; the estimate is accepted when
/// two consecutive tail-corrected sums agree to `cauchy_tol`. Power-law tails are
/// thereby summed exactly, while a ratio stuck at one (or above) never converges and
/// is reported as divergent.
pub fn graded_left<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, cfg: Refinement) -> Result<f64> {
    let len = hi - lo;
    if len == 0.0 {
        return Ok(0.0);
    }
    let tol = AdaptiveTol {
        abs: 0.0,
        rel: 1e-12,
        max_panels: 200,
    };
    let mut sum = 0.0;
    let mut prev_piece: Option<f64> = None;
    let mut prev_est: Option<f64> = None;
    let mut agreements = 0;
    let mut zero_run = 0;
    for level in 0..cfg.max_levels {
        let right = lo + len * 0.5f64.powi(level as i32);
        let left = lo + len * 0.5f64.powi(level as i32 + 1);
        let piece = adaptive(&mut f, left, right, tol);
        if !piece.is_finite() {
            return Err(Error::DivergentIntegral {
                partial: piece,
                levels: level + 1,
            });
        }
        sum += piece;
        if sum.abs() > cfg.divergence_threshold {
            return Err(Error::DivergentIntegral {
                partial: sum,
                levels: level + 1,
            });
        }
        if piece == 0.0 {
            zero_run += 1;
            if zero_run >= 3 {
                return Ok(sum);
            }
            prev_piece = None;
            continue;
        }
        zero_run = 0;
        let est = match prev_piece {
            Some(p) if p != 0.0 => {
                let r = piece / p;
                if r > 0.0 && r < 1.0 {
                    Some(sum + piece * r / (1.0 - r))
                } else {
                    None
                }
            }
            _ => None,
        };
        match (est, prev_est) {
            (Some(e), Some(pe)) if (e - pe).abs() <= cfg.cauchy_tol * e.abs().max(f64::MIN_POSITIVE) => {
                agreements += 1;
                if agreements >= 2 {
                    return Ok(e);
                }
            }
            _ => agreements = 0,
        }
        prev_est = est;
        prev_piece = Some(piece);
    }
    Err(Error::DivergentIntegral {
        partial: sum,
        levels: cfg.max_levels,
    })
}
