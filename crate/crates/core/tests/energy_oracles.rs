//! Independent Monte Carlo and closed-form oracles for the energy layer.

use std::f64::consts::PI;
use std::sync::Arc;

use gamow::kernels::RadialKernel;
use gamow::nonlocal_energy::{cap_area, psi, riesz_ball, riesz_cross, riesz_energy, Shell};
use gamow::sphere_grid::SphereGrid;
use gamow::star_shape::{layer_volumes, normalize_volume, random_shape, split_layers, volume, RadialGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn point_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    loop {
        let p = [
            rng.random_range(-radius..radius),
            rng.random_range(-radius..radius),
            rng.random_range(-radius..radius),
        ];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < radius * radius {
            return p;
        }
    }
}

/// Mean and standard error.
fn stats(samples: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for x in samples {
        n += 1.0;
        s += x;
        s2 += x * x;
    }
    let mean = s / n;
    (mean, ((s2 / n - mean * mean) / n).sqrt())
}

#[test]
fn cap_area_matches_sphere_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (t, a, b) in [(1.0, 1.0, 1.0), (0.7, 1.1, 0.6), (1.3, 0.9, 1.2)] {
        let n = 1_000_000;
        let (frac, se) = stats((0..n).map(|_| {
            let d = unit_vector(&mut rng);
            let p = [t * d[0], t * d[1], b + t * d[2]];
            f64::from(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < a * a)
        }));
        let full = 4.0 * PI * t * t;
        let v = cap_area(3, t, a, b).unwrap();
        assert!((v - full * frac).abs() < 3.0 * full * se, "t={t} a={a} b={b}: {v} vs {}", full * frac);
    }
    // Planar caps: arc length of a circle inside a disc.
    for (t, a, b) in [(1.0, 1.0, 1.0), (0.4, 1.2, 1.0)] {
        let n = 400_000;
        let inside = (0..n)
            .filter(|k| {
                let th = 2.0 * PI * (*k as f64 + 0.5) / n as f64;
                let (x, y) = (t * th.cos() + b, t * th.sin());
                x * x + y * y < a * a
            })
            .count();
        let arc = 2.0 * PI * t * inside as f64 / n as f64;
        assert!((cap_area(2, t, a, b).unwrap() - arc).abs() < 1e-4);
    }
}

#[test]
fn psi_matches_direct_volume_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for ks in ["exp:mu=1", "riesz:alpha=1.5"] {
        let k: RadialKernel = ks.parse().unwrap();
        for a in [0.75, 1.0, 1.25] {
            for b in [0.5, 1.0, 1.4] {
                let vol = 4.0 * PI / 3.0 * a * a * a;
                let (mean, se) = stats((0..400_000).map(|_| {
                    let y = point_in_ball(&mut rng, a);
                    let d = (y[0] * y[0] + y[1] * y[1] + (y[2] - b) * (y[2] - b)).sqrt();
                    k.eval(3, d).unwrap()
                }));
                let v = psi(&k, 3, a, b).unwrap();
                let mc = vol * mean;
                assert!((v - mc).abs() < 4.0 * vol * se, "{ks} a={a} b={b}: {v} vs {mc} ± {}", vol * se);
                assert!((v / mc - 1.0).abs() < 1e-2);
            }
        }
    }
}

#[test]
fn psi_newtonian_grid() {
    let k = RadialKernel::riesz(2.0);
    for a in [0.9, 1.0, 1.1] {
        for b in [0.5, 1.0, 2.0] {
            let exact = if b <= a {
                2.0 * PI * (a * a - b * b / 3.0)
            } else {
                4.0 * PI / 3.0 * a.powi(3) / b
            };
            let v = psi(&k, 3, a, b).unwrap();
            assert!((v / exact - 1.0).abs() < 1e-6, "a={a} b={b}: {v} vs {exact}");
        }
    }
}

#[test]
fn psi_is_monotone() {
    for ks in ["riesz:alpha=2", "exp:mu=1", "truncpow:alpha=1,cutoff=0.5"] {
        let k: RadialKernel = ks.parse().unwrap();
        for dim in [2, 3] {
            let a_vals = [0.5, 0.75, 1.0, 1.25, 1.5];
            let b_vals = [0.0, 0.3, 0.75, 1.0, 1.2, 1.5];
            for &b in &b_vals {
                let col: Vec<f64> = a_vals.iter().map(|&a| psi(&k, dim, a, b).unwrap()).collect();
                assert!(col.windows(2).all(|w| w[1] >= w[0] - 1e-10), "{ks} N={dim} b={b}: {col:?}");
            }
            for &a in &a_vals {
                let row: Vec<f64> = b_vals.iter().map(|&b| psi(&k, dim, a, b).unwrap()).collect();
                assert!(row.windows(2).all(|w| w[1] <= w[0] + 1e-10), "{ks} N={dim} a={a}: {row:?}");
            }
        }
    }
}

#[test]
fn coulomb_ball_energy() {
    let v = riesz_ball(&RadialKernel::riesz(2.0), 3).unwrap();
    assert!((v / (32.0 * PI * PI / 15.0) - 1.0).abs() < 1e-8);
}

#[test]
fn riesz_energy_matches_pair_sampling() {
    let grid = Arc::new(SphereGrid::build(3, 24).unwrap());
    let u = random_shape(1, 0.1, 4, grid.clone()).unwrap();
    let k = RadialKernel::riesz(2.0);
    let e = riesz_energy(&k, &u).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let sample = |rng: &mut ChaCha8Rng| loop {
        let p = point_in_ball(rng, 1.0 + u.max_abs());
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let dir = [p[0] / r, p[1] / r, p[2] / r];
        if r < 1.0 + u.value_at(&dir) {
            return p;
        }
    };
    let (mean, se) = stats((0..2_000_000).map(|_| {
        let z = sample(&mut rng);
        let w = sample(&mut rng);
        1.0 / ((z[0] - w[0]).powi(2) + (z[1] - w[1]).powi(2) + (z[2] - w[2]).powi(2)).sqrt()
    }));
    let vol = volume(&u);
    let mc = vol * vol * mean;
    let se = vol * vol * se;
    assert!((e - mc).abs() < 3.0 * se, "{e} vs {mc} ± {se}");
    let normalized = normalize_volume(&u).unwrap();
    assert!(riesz_energy(&k, &normalized).unwrap() <= riesz_ball(&k, 3).unwrap());
}

#[test]
fn shell_pairs_separate_for_constant_kernel() {
    let c = RadialKernel::constant(1.0);
    let k = RadialKernel::riesz(2.0);
    for (dim, m) in [(2, 32), (3, 12)] {
        let grid = Arc::new(SphereGrid::build(dim, m).unwrap());
        let u = random_shape(4, 0.25, 3, grid.clone()).unwrap();
        let layers = split_layers(&u);
        let (vp, vm) = layer_volumes(&grid, &layers);
        let shells = [
            (Shell::ball(&grid), grid.weights().iter().sum::<f64>() / dim as f64),
            (Shell::body(&u), volume(&u)),
            (Shell::outer(&layers), vp),
            (Shell::inner(&layers), vm),
        ];
        for (f, vf) in &shells {
            for (h, vh) in &shells {
                let v = riesz_cross(&c, &grid, f, h).unwrap();
                assert!((v - vf * vh).abs() <= 1e-6 * vf * vh, "N={dim}: {v} vs {}", vf * vh);
                let ab = riesz_cross(&k, &grid, f, h).unwrap();
                let ba = riesz_cross(&k, &grid, h, f).unwrap();
                assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
            }
        }
    }
    let grid = Arc::new(SphereGrid::build(3, 12).unwrap());
    let z = RadialGraph::zero(grid.clone());
    let e = riesz_energy(&k, &z).unwrap();
    assert!((e / riesz_ball(&k, 3).unwrap() - 1.0).abs() < 1e-3);
}
