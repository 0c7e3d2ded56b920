#![allow(dead_code)]

use laguerre_rve::{compute_diagram, kantorovich_value, Lattice, SeedSet, TargetMasses, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_seeds(n: usize, lattice: &Lattice, rng: &mut ChaCha8Rng) -> SeedSet {
    let half = lattice.lengths().map(|l| 0.5 * l);
    let pts = (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-half[0]..half[0]),
                rng.random_range(-half[1]..half[1]),
                rng.random_range(-half[2]..half[2]),
            )
        })
        .collect();
    SeedSet::new(*lattice, pts).unwrap()
}

/// Random weights of the order of the squared cell size, redrawn until every
/// cell has volume above `min_frac * |V| / n`.
pub fn random_weights(seeds: &SeedSet, min_frac: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    random_weights_scaled(seeds, 0.3, min_frac, rng)
}

pub fn random_weights_scaled(
    seeds: &SeedSet,
    amplitude: f64,
    min_frac: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = seeds.len();
    let vol = seeds.lattice().volume();
    let h2 = (vol / n as f64).powf(2.0 / 3.0);
    for _ in 0..1000 {
        let w: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-amplitude..amplitude) * h2)
            .collect();
        let d = compute_diagram(seeds, &w).unwrap();
        if d.min_volume() > min_frac * vol / n as f64 {
            return w;
        }
    }
    panic!("could not draw admissible weights");
}

pub fn random_masses(n: usize, lattice: &Lattice, rng: &mut ChaCha8Rng) -> TargetMasses {
    TargetMasses::new(
        (0..n).map(|_| rng.random_range(0.5..1.5)).collect(),
        lattice,
    )
    .unwrap()
}

/// Central finite differences of the Kantorovich value.
pub fn fd_gradient(seeds: &SeedSet, w: &[f64], m: &TargetMasses, step: f64) -> Vec<f64> {
    (0..w.len())
        .map(|j| {
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[j] += step;
            minus[j] -= step;
            let kp = kantorovich_value(seeds, &plus, m).unwrap();
            let km = kantorovich_value(seeds, &minus, m).unwrap();
            (kp - km) / (2.0 * step)
        })
        .collect()
}

/// Central finite differences of `m - v(w)`: column `j` is the derivative with
/// respect to `w_j`.
pub fn fd_hessian(seeds: &SeedSet, w: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut h = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut plus = w.to_vec();
        let mut minus = w.to_vec();
        plus[j] += step;
        minus[j] -= step;
        let vp = compute_diagram(seeds, &plus).unwrap().volumes();
        let vm = compute_diagram(seeds, &minus).unwrap().volumes();
        for i in 0..n {
            h[i][j] = -(vp[i] - vm[i]) / (2.0 * step);
        }
    }
    h
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// `(max |a - b| / max |b|, max entrywise relative error over entries with
/// |b| above `floor * max |b|`)`.
pub fn hessian_errors(h: &[Vec<f64>], fd: &[Vec<f64>], floor: f64) -> (f64, f64) {
    let scale = max_abs(fd.iter().flatten().copied());
    let mut normwise = 0.0f64;
    let mut entrywise = 0.0f64;
    for (hr, fr) in h.iter().zip(fd) {
        for (a, b) in hr.iter().zip(fr) {
            let d = (a - b).abs();
            normwise = normwise.max(d / scale);
            if b.abs() > floor * scale {
                entrywise = entrywise.max(d / b.abs());
            } else {
                entrywise = entrywise.max(d / (floor * scale));
            }
        }
    }
    (normwise, entrywise)
}
