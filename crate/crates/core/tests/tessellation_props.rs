mod common;

use common::*;
use laguerre_rve::{
    compute_cell, compute_diagram, monte_carlo_volumes, ConvexPolyhedron, FacetTag, Lattice, Plane,
    SeedSet, Vec3,
};

fn slab() -> SeedSet {
    SeedSet::new(
        Lattice::unit(),
        vec![Vec3::new(-0.25, 0.0, 0.0), Vec3::new(0.25, 0.0, 0.0)],
    )
    .unwrap()
}

/// Volume of the part of `cell` inside the box translated by each shift.
fn wrapped_volume(cell: &ConvexPolyhedron, lat: &Lattice) -> f64 {
    let l = lat.lengths();
    let mut total = 0.0;
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                let centre = lat.shift_vector([a, b, c]);
                let mut piece = cell.clone();
                for k in 0..3 {
                    let mut n = Vec3::zeros();
                    n[k] = 1.0;
                    let hi = Plane::new(n, centre[k] + 0.5 * l[k]).unwrap();
                    let lo = Plane::new(-n, -(centre[k] - 0.5 * l[k])).unwrap();
                    piece.clip(&hi, FacetTag::Boundary, 1e-12);
                    piece.clip(&lo, FacetTag::Boundary, 1e-12);
                }
                total += piece.volume();
            }
        }
    }
    total
}

#[test]
fn random_diagrams_partition_the_box() {
    let mut r = rng(1);
    for (n, lat) in [
        (10, Lattice::unit()),
        (10, Lattice::new(1.0, 2.0, 0.5).unwrap()),
        (60, Lattice::cube(2.0).unwrap()),
    ] {
        let seeds = random_seeds(n, &lat, &mut r);
        for weights in [vec![0.0; n], random_weights(&seeds, 0.0, &mut r)] {
            let d = compute_diagram(&seeds, &weights).unwrap();
            let total = lat.volume();
            assert!((d.total_volume() - total).abs() <= 1e-10 * total);

            let wrapped: f64 = d
                .cells()
                .iter()
                .map(|c| wrapped_volume(&c.polyhedron, &lat))
                .sum();
            assert!((wrapped - total).abs() <= 1e-10 * total);

            for f in d.interfaces() {
                let mirror = d
                    .interfaces()
                    .iter()
                    .find(|g| {
                        g.i == f.j
                            && g.j == f.i
                            && g.shift == [-f.shift[0], -f.shift[1], -f.shift[2]]
                    })
                    .expect("mirror interface");
                assert!((mirror.area - f.area).abs() <= 1e-9 * f.area);
                assert!((mirror.distance - f.distance).abs() <= 1e-12);
            }

            for cell in d.cells().iter().filter(|c| !c.is_empty()) {
                assert_eq!(cell.polyhedron.euler_characteristic(), 2);
                for facet in cell.polyhedron.facets() {
                    assert!(facet.plane.signed_distance(&cell.centroid) < 0.0);
                }
            }
        }
    }
}

#[test]
fn compute_cell_matches_diagram() {
    let mut r = rng(2);
    let lat = Lattice::unit();
    let seeds = random_seeds(15, &lat, &mut r);
    let w = random_weights(&seeds, 0.0, &mut r);
    let d = compute_diagram(&seeds, &w).unwrap();
    for i in [0, 7, 14] {
        let cell = compute_cell(i, &seeds, &w).unwrap();
        assert!((cell.volume() - d.cells()[i].volume).abs() < 1e-15);
    }
}

#[test]
fn constant_weight_shift_changes_nothing() {
    let mut r = rng(3);
    let lat = Lattice::unit();
    let seeds = random_seeds(30, &lat, &mut r);
    let w = random_weights(&seeds, 0.0, &mut r);
    let shifted: Vec<f64> = w.iter().map(|x| x + 17.3).collect();
    let a = compute_diagram(&seeds, &w).unwrap();
    let b = compute_diagram(&seeds, &shifted).unwrap();
    for (x, y) in a.volumes().iter().zip(b.volumes()) {
        assert!((x - y).abs() < 1e-12);
    }
    assert_eq!(a.interfaces().len(), b.interfaces().len());
}

#[test]
fn translating_seeds_translates_centroids() {
    let mut r = rng(4);
    let lat = Lattice::new(1.0, 1.5, 0.8).unwrap();
    let seeds = random_seeds(25, &lat, &mut r);
    let w = random_weights(&seeds, 0.0, &mut r);
    let t = Vec3::new(0.37, -0.61, 0.23);
    let moved = SeedSet::new(
        lat,
        seeds
            .positions()
            .iter()
            .map(|p| lat.wrap_point(&(p + t)))
            .collect(),
    )
    .unwrap();
    let a = compute_diagram(&seeds, &w).unwrap();
    let b = compute_diagram(&moved, &w).unwrap();
    for (ca, cb) in a.centroids().iter().zip(b.centroids()) {
        let d = lat.periodic_sq_distance(&(ca + t), &cb).0.sqrt();
        assert!(d < 1e-9);
    }
    for (x, y) in a.volumes().iter().zip(b.volumes()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn slab_matches_monte_carlo() {
    let mc = monte_carlo_volumes(&slab(), &[0.0, 0.0], 1_000_000, 11).unwrap();
    for (v, se) in mc.volumes.iter().zip(&mc.std_errors) {
        assert!((v - 0.5).abs() < 3.0 * se);
    }
    // analytic slab: v_1 = 0.5 + 2 (w_1 - w_2)
    let d = compute_diagram(&slab(), &[0.03, -0.02]).unwrap();
    assert!((d.cells()[0].volume - 0.6).abs() < 1e-14);
}

#[test]
fn weighted_diagram_matches_monte_carlo() {
    let mut r = rng(5);
    let lat = Lattice::new(1.0, 0.7, 1.3).unwrap();
    let seeds = random_seeds(20, &lat, &mut r);
    let w = random_weights(&seeds, 0.0, &mut r);
    let d = compute_diagram(&seeds, &w).unwrap();
    let mc = monte_carlo_volumes(&seeds, &w, 1_000_000, 12).unwrap();
    for ((v, e), se) in d.volumes().iter().zip(&mc.volumes).zip(&mc.std_errors) {
        assert!((v - e).abs() <= 4.0 * se.max(1e-12), "{v} vs {e} ± {se}");
    }
}
