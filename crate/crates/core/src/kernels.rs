//! Radial non-increasing kernels `g(t)`, their admissibility integral
//! `∫₀¹ g(t) t^{N-1} dt`, and the dilated kernel `g̃(t) = g(t/2)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::{graded_left, Refinement};

/// Kernel profile before dilation. Power families are written against the
/// dimension supplied at evaluation time: `g(t) = t^{α-N}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    RieszPower { alpha: f64 },
    Exponential { mu: f64 },
    Constant { c: f64 },
    /// `t^{α-N}` up to `cutoff`, constant `cutoff^{α-N}` beyond.
    TruncatedPower { alpha: f64, cutoff: f64 },
}

/// `g(t) = family(t / dilation)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialKernel {
    pub family: KernelFamily,
    pub dilation: f64,
}

impl RadialKernel {
    pub fn new(family: KernelFamily) -> Self {
        Self {
            family,
            dilation: 1.0,
        }
    }

    pub fn riesz(alpha: f64) -> Self {
        Self::new(KernelFamily::RieszPower { alpha })
    }

    pub fn exponential(mu: f64) -> Self {
        Self::new(KernelFamily::Exponential { mu })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(KernelFamily::Constant { c })
    }

    pub fn truncated_power(alpha: f64, cutoff: f64) -> Self {
        Self::new(KernelFamily::TruncatedPower { alpha, cutoff })
    }

    /// Short family tag used in reports and spec strings.
    pub fn family_name(&self) -> &'static str {
        match self.family {
            KernelFamily::RieszPower { .. } => "riesz",
            KernelFamily::Exponential { .. } => "exp",
            KernelFamily::Constant { .. } => "const",
            KernelFamily::TruncatedPower { .. } => "truncpow",
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, KernelFamily::Constant { .. })
    }

    /// Parameter checks that make `g` positive and non-increasing in dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let n = dim as f64;
        if !(self.dilation.is_finite() && self.dilation > 0.0) {
            return Err(Error::InvalidKernel(format!("dilation must be positive, got {}", self.dilation)));
        }
        match self.family {
            KernelFamily::RieszPower { alpha } | KernelFamily::TruncatedPower { alpha, .. }
                if !(alpha > 0.0 && alpha <= n) =>
            {
                Err(Error::InvalidKernel(format!(
                    "power kernel needs 0 < alpha <= N = {dim}, got alpha = {alpha}"
                )))
            }
            KernelFamily::TruncatedPower { cutoff, .. } if !(cutoff > 0.0 && cutoff.is_finite()) => {
                Err(Error::InvalidKernel(format!("cutoff must be positive, got {cutoff}")))
            }
            KernelFamily::Exponential { mu } if !(mu > 0.0 && mu.is_finite()) => {
                Err(Error::InvalidKernel(format!("exponential rate must be positive, got {mu}")))
            }
            KernelFamily::Constant { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidKernel(format!("constant kernel needs c > 0, got {c}")))
            }
            _ => Ok(()),
        }
    }

    /// `g(t)` in dimension `dim`.
    pub fn eval(&self, dim: usize, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(t));
        }
        Ok(BoundKernel::unchecked(*self, dim).value(t))
    }

    /// Validate for `dim` and return the evaluator used by every integration routine.
    pub fn bind(&self, dim: usize) -> Result<BoundKernel> {
        self.validate(dim)?;
        Ok(BoundKernel::unchecked(*self, dim))
    }
}

/// `g̃(t) = g(t/2)`.
pub fn scaled_kernel(k: &RadialKernel) -> RadialKernel {
    match k.family {
        KernelFamily::Constant { .. } => *k,
        _ => RadialKernel {
            family: k.family,
            dilation: 2.0 * k.dilation,
        },
    }
}

/// `∫₀¹ g(t) t^{N-1} dt` by geometric refinement toward the origin.
pub fn admissibility_integral(k: &RadialKernel, dim: usize, cfg: Refinement) -> Result<f64> {
    if dim < 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let g = BoundKernel::unchecked(*k, dim);
    let p = dim as i32 - 1;
    graded_left(|t| g.value(t) * t.powi(p), 0.0, 1.0, cfg)
}

#[derive(Debug, Clone, Copy)]
enum Profile {
    /// `scale · t^e`, with `int_exp` set when `e` is an integer.
    Power { scale: f64, e: f64, int_exp: Option<i32> },
    Exponential { mu: f64 },
    Constant { c: f64 },
    Truncated { e: f64, int_exp: Option<i32>, cutoff: f64, tail: f64 },
}

/// A kernel fixed to a dimension, ready for tight loops. `value` assumes `t > 0`.
#[derive(Debug, Clone, Copy)]
pub struct BoundKernel {
    kernel: RadialKernel,
    dim: usize,
    inv_dilation: f64,
    profile: Profile,
}

fn integer_exponent(e: f64) -> Option<i32> {
    (e.fract() == 0.0 && e.abs() < 64.0).then_some(e as i32)
}

impl BoundKernel {
    fn unchecked(kernel: RadialKernel, dim: usize) -> Self {
        let n = dim as f64;
        let profile = match kernel.family {
            KernelFamily::RieszPower { alpha } => {
                let e = alpha - n;
                Profile::Power {
                    scale: 1.0,
                    e,
                    int_exp: integer_exponent(e),
                }
            }
            KernelFamily::Exponential { mu } => Profile::Exponential { mu },
            KernelFamily::Constant { c } => Profile::Constant { c },
            KernelFamily::TruncatedPower { alpha, cutoff } => {
                let e = alpha - n;
                Profile::Truncated {
                    e,
                    int_exp: integer_exponent(e),
                    cutoff,
                    tail: cutoff.powf(e),
                }
            }
        };
        Self {
            kernel,
            dim,
            inv_dilation: 1.0 / kernel.dilation,
            profile,
        }
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bounded kernels have no singularity at the origin.
    pub fn is_bounded(&self) -> bool {
        match self.profile {
            Profile::Power { e, .. } | Profile::Truncated { e, .. } => e >= 0.0,
            Profile::Exponential { .. } | Profile::Constant { .. } => true,
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let s = t * self.inv_dilation;
        match self.profile {
            Profile::Power { scale, e, int_exp } => {
                scale
                    * match int_exp {
                        Some(-1) => 1.0 / s,
                        Some(i) => s.powi(i),
                        None => s.powf(e),
                    }
            }
            Profile::Exponential { mu } => (-mu * s).exp(),
            Profile::Constant { c } => c,
            Profile::Truncated {
                e,
                int_exp,
                cutoff,
                tail,
            } => {
                if s >= cutoff {
                    tail
                } else {
                    match int_exp {
                        Some(i) => s.powi(i),
                        None => s.powf(e),
                    }
                }
            }
        }
    }
}

fn parse_params(body: &str) -> Result<Vec<(String, f64)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidKernel(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidKernel(format!("bad number `{}` for `{}`", v.trim(), k.trim())))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl FromStr for RadialKernel {
    type Err = Error;

    /// `riesz:alpha=2`, `exp:mu=1`, `const:c=1`, `truncpow:alpha=1,cutoff=0.5`;
    /// any family also accepts `dilation=<x>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, body) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let params = parse_params(body)?;
        let mut dilation = 1.0;
        let get = |key: &str| -> Option<f64> { params.iter().find(|(k, _)| k == key).map(|(_, v)| *v) };
        if let Some(d) = get("dilation") {
            dilation = d;
        }
        let allowed: &[&str] = match name {
            "riesz" => &["alpha", "dilation"],
            "exp" => &["mu", "dilation"],
            "const" => &["c", "dilation"],
            "truncpow" => &["alpha", "cutoff", "dilation"],
            other => return Err(Error::InvalidKernel(format!("unknown kernel family `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidKernel(format!("unknown parameter `{k}` for `{name}`")));
        }
        let need = |key: &str| get(key).ok_or_else(|| Error::InvalidKernel(format!("`{name}` needs `{key}`")));
        let family = match name {
            "riesz" => KernelFamily::RieszPower { alpha: need("alpha")? },
            "exp" => KernelFamily::Exponential { mu: need("mu")? },
            "const" => KernelFamily::Constant { c: need("c")? },
            _ => KernelFamily::TruncatedPower {
                alpha: need("alpha")?,
                cutoff: need("cutoff")?,
            },
        };
        Ok(RadialKernel { family, dilation })
    }
}

impl fmt::Display for RadialKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::RieszPower { alpha } => write!(f, "riesz:alpha={alpha}")?,
            KernelFamily::Exponential { mu } => write!(f, "exp:mu={mu}")?,
            KernelFamily::Constant { c } => write!(f, "const:c={c}")?,
            KernelFamily::TruncatedPower { alpha, cutoff } => write!(f, "truncpow:alpha={alpha},cutoff={cutoff}")?,
        }
        if self.dilation != 1.0 {
            write!(f, ",dilation={}", self.dilation)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<RadialKernel> {
        vec![
            RadialKernel::riesz(2.0),
            RadialKernel::riesz(0.5),
            RadialKernel::exponential(1.0),
            RadialKernel::constant(1.0),
            RadialKernel::truncated_power(1.0, 0.5),
            scaled_kernel(&RadialKernel::riesz(1.5)),
        ]
    }

    #[test]
    fn eval_examples() {
        let g = RadialKernel::riesz(2.0);
        assert_eq!(g.eval(3, 0.5).unwrap(), 2.0);
        assert_eq!(RadialKernel::constant(1.0).eval(3, 7.3).unwrap(), 1.0);
        let e = RadialKernel::exponential(1.0).eval(3, 1.0).unwrap();
        assert!((e - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn eval_rejects_nonpositive_distance() {
        let g = RadialKernel::riesz(2.0);
        assert_eq!(g.eval(3, 0.0), Err(Error::Domain(0.0)));
        assert!(g.eval(3, -1.0).is_err());
        assert!(g.eval(3, f64::NAN).is_err());
    }

    #[test]
    fn admissibility_examples() {
        let cfg = Refinement::default();
        let v = admissibility_integral(&RadialKernel::riesz(2.0), 3, cfg).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
        let v = admissibility_integral(&RadialKernel::constant(1.0), 2, cfg).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
        let r = admissibility_integral(&RadialKernel::riesz(0.0), 3, cfg);
        assert!(matches!(r, Err(Error::DivergentIntegral { .. })), "{r:?}");
        let r = admissibility_integral(&RadialKernel::riesz(-0.5), 2, cfg);
        assert!(matches!(r, Err(Error::DivergentIntegral { .. })));
    }

    #[test]
    fn admissibility_matches_antiderivatives() {
        let cfg = Refinement::default();
        for dim in [2usize, 3] {
            for alpha in [0.1, 0.5, 1.0, 1.7] {
                let v = admissibility_integral(&RadialKernel::riesz(alpha), dim, cfg).unwrap();
                let exact = 1.0 / alpha;
                assert!((v / exact - 1.0).abs() < 1e-8, "N={dim} alpha={alpha}: {v} vs {exact}");
            }
            let v = admissibility_integral(&RadialKernel::constant(2.5), dim, cfg).unwrap();
            assert!((v / (2.5 / dim as f64) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn scaled_kernel_examples() {
        let c = RadialKernel::constant(1.0);
        assert_eq!(scaled_kernel(&c), c);
        let g = scaled_kernel(&RadialKernel::riesz(2.0));
        assert_eq!(g.eval(3, 0.5).unwrap(), 4.0);
        let cfg = Refinement::default();
        let a = admissibility_integral(&g, 3, cfg).unwrap();
        assert!((a - 1.0).abs() < 1e-9, "{a}");
        assert!(a <= 8.0 * 0.5);
    }

    #[test]
    fn scaled_admissibility_bound_holds() {
        let cfg = Refinement::default();
        for k in builtins() {
            for dim in [2usize, 3] {
                if k.validate(dim).is_err() {
                    continue;
                }
                let base = admissibility_integral(&k, dim, cfg).unwrap();
                let scaled = admissibility_integral(&scaled_kernel(&k), dim, cfg).unwrap();
                let bound = 2f64.powi(dim as i32) * base;
                assert!(scaled <= bound * (1.0 + 1e-9), "{k} N={dim}: {scaled} > {bound}");
            }
        }
    }

    #[test]
    fn builtins_are_monotone() {
        for k in builtins() {
            let g = k.bind(3).unwrap();
            let ts: Vec<f64> = (1..=300).map(|i| i as f64 * 0.01).collect();
            for w in ts.windows(2) {
                assert!(g.value(w[0]) >= g.value(w[1]), "{k} at {:?}", w);
                assert!(g.value(w[1]) > 0.0);
            }
        }
    }

    #[test]
    fn validate_ranges() {
        assert!(RadialKernel::riesz(3.5).validate(3).is_err());
        // α = N is the flat kernel t⁰.
        assert!(RadialKernel::riesz(2.0).validate(2).is_ok());
        assert_eq!(RadialKernel::riesz(2.0).eval(2, 3.7).unwrap(), 1.0);
        assert!(RadialKernel::riesz(2.5).validate(3).is_ok());
        assert!(RadialKernel::riesz(2.5).validate(2).is_err());
        assert!(RadialKernel::constant(0.0).validate(2).is_err());
        assert!(RadialKernel::exponential(-1.0).validate(2).is_err());
        assert!(RadialKernel::truncated_power(1.0, 0.0).validate(3).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["riesz:alpha=2", "exp:mu=1", "const:c=1", "truncpow:alpha=1,cutoff=0.5", "riesz:alpha=1.5,dilation=2"] {
            let k: RadialKernel = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("riesz:beta=2".parse::<RadialKernel>().is_err());
        assert!("gauss:s=1".parse::<RadialKernel>().is_err());
        assert!("riesz".parse::<RadialKernel>().is_err());
        assert!("riesz:alpha=x".parse::<RadialKernel>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn power_kernels_non_increasing(alpha in 0.05f64..2.95, t1 in 1e-3f64..3.0, dt in 0.0f64..1.0) {
            let g = RadialKernel::riesz(alpha).bind(3).unwrap();
            let t2 = (t1 + dt).min(3.0);
            proptest::prop_assert!(g.value(t1) >= g.value(t2));
        }
    }
}
