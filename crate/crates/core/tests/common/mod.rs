//! Shared helpers for the integration suites: independent oracles and
//! synthetic fields. Everything here is deliberately decoupled from the
//! library's own quadrature/energy code paths.

use nodalflow::field::Field;
use nodalflow::groundstate::RadialProfile;
use nodalflow::manifold::TorusManifold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Trapezoid rule; an independent quadrature for oracle use.
fn trapezoid(f: &[f64], dx: f64) -> f64 {
    if f.len() < 2 {
        return 0.0;
    }
    let inner: f64 = f[1..f.len() - 1].iter().sum();
    dx * (0.5 * f[0] + inner + 0.5 * f[f.len() - 1])
}

fn area_factor(n: usize, r: f64) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::TAU * r,
        _ => 4.0 * std::f64::consts::PI * r * r,
    }
}

/// Independent variational oracle for the ground level: minimize the
/// Nehari-constrained energy over the dilation family `U(r/sigma)` of the
/// profile. The three radial quadratures (Dirichlet with finite-difference
/// derivatives, mass, q-th power) scale as `sigma^{n-2}`, `sigma^n` and
/// `sigma^n`, so the constrained energy is
///
/// ```text
/// E(sigma) = (q-2)/(2q) (sigma^{n-2} A + sigma^n B)^{q/(q-2)} (sigma^n C)^{-2/(q-2)}
/// ```
///
/// minimized here by golden-section search. At the true ground state the
/// minimum sits at sigma = 1 with value m(E).
pub fn scaling_search_min(profile: &RadialProfile) -> (f64, f64) {
    let n = profile.n;
    let q = profile.q;
    let s = &profile.samples;
    let dr = profile.r_max / (s.len() - 1) as f64;
    let mut dirichlet = vec![0.0; s.len()];
    let mut mass = vec![0.0; s.len()];
    let mut power = vec![0.0; s.len()];
    for j in 0..s.len() {
        let du = if j == 0 {
            0.0
        } else if j == s.len() - 1 {
            (s[j] - s[j - 1]) / dr
        } else {
            (s[j + 1] - s[j - 1]) / (2.0 * dr)
        };
        let area = area_factor(n, j as f64 * dr);
        dirichlet[j] = du * du * area;
        mass[j] = s[j] * s[j] * area;
        power[j] = s[j].abs().powf(q) * area;
    }
    let a = trapezoid(&dirichlet, dr);
    let b = trapezoid(&mass, dr);
    let c = trapezoid(&power, dr);

    let energy = |sigma: f64| -> f64 {
        let nn = n as f64;
        let quad = sigma.powf(nn - 2.0) * a + sigma.powf(nn) * b;
        let pw = sigma.powf(nn) * c;
        (q - 2.0) / (2.0 * q) * quad.powf(q / (q - 2.0)) * pw.powf(-2.0 / (q - 2.0))
    };

    // Golden-section search on [0.5, 2.0].
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.5f64, 2.0f64);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (energy(x1), energy(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = energy(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = energy(x2);
        }
    }
    let sigma = 0.5 * (lo + hi);
    (energy(sigma), sigma)
}

/// Flat-space energy of the radial profile, `1/2 (A + B) - C/q`, with the
/// same independent quadratures as the scaling search.
pub fn radial_energy(profile: &RadialProfile) -> f64 {
    let n = profile.n;
    let q = profile.q;
    let s = &profile.samples;
    let dr = profile.r_max / (s.len() - 1) as f64;
    let mut f = vec![0.0; s.len()];
    for j in 0..s.len() {
        let du = if j == 0 {
            0.0
        } else if j == s.len() - 1 {
            (s[j] - s[j - 1]) / dr
        } else {
            (s[j + 1] - s[j - 1]) / (2.0 * dr)
        };
        f[j] = (0.5 * du * du + 0.5 * s[j] * s[j] - s[j].abs().powf(q) / q)
            * area_factor(n, j as f64 * dr);
    }
    trapezoid(&f, dr)
}

/// Band-limited random field: a handful of random Fourier modes.
pub fn smooth_random_field(m: &Arc<TorusManifold>, rng: &mut ChaCha8Rng) -> Field {
    let dim = m.dim();
    let mut terms = Vec::new();
    for _ in 0..6 {
        let k: Vec<f64> = (0..dim).map(|_| rng.random_range(-3..4) as f64).collect();
        let amp: f64 = rng.random_range(-1.0..1.0);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        terms.push((k, amp, phase));
    }
    let lengths = m.lengths().to_vec();
    Field::from_fn(m.clone(), move |x| {
        terms
            .iter()
            .map(|(k, amp, phase)| {
                let arg: f64 = x
                    .iter()
                    .zip(k)
                    .zip(&lengths)
                    .map(|((xi, ki), li)| std::f64::consts::TAU * ki * xi / li)
                    .sum();
                amp * (arg + phase).cos()
            })
            .sum()
    })
}

/// Deterministic RNG for a named test.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
