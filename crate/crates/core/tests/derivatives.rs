mod common;

use common::*;
use laguerre_rve::{
    compute_diagram, kantorovich_gradient, kantorovich_hessian, kantorovich_value,
    monte_carlo_volumes, Lattice, SeedSet, TargetMasses, Vec3,
};
use rand::Rng;

#[test]
fn gradient_matches_finite_differences_of_value() {
    let lat = Lattice::unit();
    let mut r = rng(42);
    for &n in &[5usize, 20] {
        let seeds = random_seeds(n, &lat, &mut r);
        let w = random_weights(&seeds, 1e-3, &mut r);
        let m = random_masses(n, &lat, &mut r);
        let d = compute_diagram(&seeds, &w).unwrap();
        let g = kantorovich_gradient(&d, &m);
        assert!(g.iter().sum::<f64>().abs() < 1e-10);
        let fd = fd_gradient(&seeds, &w, &m, 1e-6);
        let err = max_abs(g.iter().zip(&fd).map(|(a, b)| a - b)) / max_abs(g.iter().copied());
        assert!(err < 1e-5, "n={n}: relative error {err:e}");
    }
}

#[test]
fn hessian_matches_finite_differences_of_gradient() {
    let lat = Lattice::new(1.0, 1.2, 0.9).unwrap();
    let mut r = rng(43);
    for &n in &[5usize, 20] {
        let seeds = random_seeds(n, &lat, &mut r);
        let w = random_weights(&seeds, 1e-3, &mut r);
        let d = compute_diagram(&seeds, &w).unwrap();
        let h = kantorovich_hessian(&d).unwrap();
        let dense = h.to_dense();
        let fd = fd_hessian(&seeds, &w, 1e-6);
        let (_, entrywise) = hessian_errors(&dense, &fd, 1e-3);
        assert!(entrywise < 1e-4, "n={n}: entrywise error {entrywise:e}");

        for i in 0..n {
            assert!(dense[i].iter().sum::<f64>().abs() < 1e-10);
            for j in 0..n {
                assert_eq!(dense[i][j], dense[j][i]);
                if i != j {
                    assert!(dense[i][j] >= 0.0);
                }
            }
        }
        // negative semidefinite, kernel contains the constants
        let ones = vec![1.0; n];
        assert!(max_abs(h.mul_vec(&ones)) < 1e-10);
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let hx = h.mul_vec(&x);
            let q: f64 = x.iter().zip(&hx).map(|(a, b)| a * b).sum();
            assert!(q <= 1e-12);
        }
    }
}

#[test]
fn slab_hessian_matches_finite_differences() {
    let seeds = SeedSet::new(
        Lattice::unit(),
        vec![Vec3::new(-0.25, 0.0, 0.0), Vec3::new(0.25, 0.0, 0.0)],
    )
    .unwrap();
    let fd = fd_hessian(&seeds, &[0.0, 0.0], 1e-6);
    let expected = [[-2.0, 2.0], [2.0, -2.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((fd[i][j] - expected[i][j]).abs() < 1e-8);
        }
    }
}

#[test]
fn slab_value_matches_monte_carlo() {
    // K(w) = Σ_i ∫_{L_i} (c(x, y_i) - w_i) dx + Σ_i m_i w_i, sampled by
    // brute-force assignment
    let lat = Lattice::unit();
    let seeds = SeedSet::new(
        lat,
        vec![Vec3::new(-0.25, 0.0, 0.0), Vec3::new(0.25, 0.0, 0.0)],
    )
    .unwrap();
    let m = TargetMasses::new(vec![0.5, 0.5], &lat).unwrap();
    let k = kantorovich_value(&seeds, &[0.0, 0.0], &m).unwrap();

    let mut r = rng(77);
    let samples = 1_000_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let x = Vec3::new(
            r.random_range(-0.5..0.5),
            r.random_range(-0.5..0.5),
            r.random_range(-0.5..0.5),
        );
        let c = seeds
            .positions()
            .iter()
            .map(|y| lat.periodic_sq_distance(&x, y).0)
            .fold(f64::INFINITY, f64::min);
        sum += c;
        sum_sq += c * c;
    }
    let mean = sum / samples as f64;
    let se = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
    assert!((k - mean).abs() < 4.0 * se, "{k} vs {mean} ± {se}");
    // closed form: each slab cell is [-1/4,1/4] x [-1/2,1/2]^2 around its seed
    let exact = 2.0 * (1.0 / 96.0 + 2.0 * 0.5 / 12.0);
    assert!((k - exact).abs() < 1e-12, "{k} vs {exact}");

    let mc = monte_carlo_volumes(&seeds, &[0.0, 0.0], 1000, 1).unwrap();
    assert_eq!(mc.samples, 1000);
}
