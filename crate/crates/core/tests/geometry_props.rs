use laguerre_rve::{ConvexPolyhedron, Facet, FacetTag, Lattice, Plane, Vec3};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn lattice() -> impl Strategy<Value = Lattice> {
    (0.2..3.0, 0.2..3.0, 0.2..3.0).prop_map(|(a, b, c)| Lattice::new(a, b, c).unwrap())
}

fn tag(k: usize) -> FacetTag {
    FacetTag::Neighbor {
        seed: k,
        shift: [0, 0, 0],
    }
}

/// Tetrahedron with outward-oriented facets.
fn tetrahedron(p: [Vec3; 4]) -> ConvexPolyhedron {
    let faces = [[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 3, 1], [1, 2, 3, 0]];
    let facets = faces
        .iter()
        .map(|&[a, b, c, opp]| {
            let mut n = (p[b] - p[a]).cross(&(p[c] - p[a]));
            let mut loop_ = vec![a, b, c];
            if n.dot(&(p[opp] - p[a])) > 0.0 {
                n = -n;
                loop_ = vec![a, c, b];
            }
            Facet {
                vertices: loop_,
                plane: Plane::new(n, n.dot(&p[a])).unwrap(),
                tag: FacetTag::Boundary,
            }
        })
        .collect();
    ConvexPolyhedron::from_parts(p.to_vec(), facets).unwrap()
}

proptest! {
    #[test]
    fn wrap_is_idempotent_and_canonical(lat in lattice(), x in vec3(20.0)) {
        let w = lat.wrap_point(&x);
        prop_assert_eq!(lat.wrap_point(&w), w);
        for k in 0..3 {
            let l = lat.length(k);
            prop_assert!(w[k] >= -0.5 * l && w[k] < 0.5 * l);
            let turns = (x[k] - w[k]) / l;
            prop_assert!((turns - turns.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn periodic_distance_symmetric_and_shift_invariant(
        lat in lattice(),
        fx in vec3(0.5),
        fy in vec3(0.5),
        u in (-3i32..=3, -3i32..=3, -3i32..=3),
    ) {
        let l = lat.lengths();
        let x = Vec3::new(fx.x * l[0], fx.y * l[1], fx.z * l[2]);
        let y = Vec3::new(fy.x * l[0], fy.y * l[1], fy.z * l[2]);
        let (d, shift) = lat.periodic_sq_distance(&x, &y);
        let (d_rev, _) = lat.periodic_sq_distance(&y, &x);
        prop_assert!((d - d_rev).abs() < 1e-12);
        let t = lat.shift_vector([u.0, u.1, u.2]);
        prop_assert!((lat.periodic_sq_distance(&(x + t), &y).0 - d).abs() < 1e-12);
        prop_assert!((lat.periodic_sq_distance(&x, &(y + t)).0 - d).abs() < 1e-12);
        // the returned shift attains the minimum
        prop_assert!(((x + lat.shift_vector(shift) - y).norm_squared() - d).abs() < 1e-12);
        // and no image in the 5^3 block does better (x, y inside the box)
        for a in -2..=2 { for b in -2..=2 { for c in -2..=2 {
            prop_assert!((x + lat.shift_vector([a, b, c]) - y).norm_squared() >= d - 1e-12);
        }}}
    }

    #[test]
    fn clip_sequences_shrink_and_respect_halfspaces(
        planes in prop::collection::vec((vec3(1.0), -0.3..0.6f64), 1..25)
    ) {
        let mut poly = ConvexPolyhedron::cuboid(Vec3::zeros(), [0.5; 3]);
        let mut applied = Vec::new();
        let mut prev = poly.volume();
        for (k, (n, c)) in planes.iter().enumerate() {
            let Ok(plane) = Plane::new(*n, *c) else { continue };
            poly.clip(&plane, tag(k), 1e-12);
            applied.push(plane);
            let vol = poly.volume();
            prop_assert!(vol <= prev + 1e-14);
            prev = vol;
            if poly.is_empty() {
                break;
            }
        }
        if !poly.is_empty() {
            prop_assert_eq!(poly.euler_characteristic(), 2);
            for v in poly.vertices() {
                for p in &applied {
                    prop_assert!(p.signed_distance(v) <= 1e-9);
                }
            }
            for f in poly.facets() {
                for v in f.vertices.iter() {
                    prop_assert!(f.plane.signed_distance(&poly.vertices()[*v]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn axis_aligned_cut_removes_exact_fraction(axis in 0usize..3, f in 0.01..0.99f64, upper in any::<bool>()) {
        let cube = ConvexPolyhedron::cuboid(Vec3::new(0.1, -0.2, 0.3), [0.5; 3]);
        let mut n = Vec3::zeros();
        let centre = [0.1, -0.2, 0.3][axis];
        // keep the part below (or above) the cut
        let (plane, kept) = if upper {
            n[axis] = 1.0;
            (Plane::new(n, centre + 0.5 - f).unwrap(), 1.0 - f)
        } else {
            n[axis] = -1.0;
            (Plane::new(n, -(centre - 0.5 + f)).unwrap(), 1.0 - f)
        };
        let cut = cube.clip_by_halfspace(&plane, tag(0), 1e-12);
        prop_assert!((cut.volume() - kept).abs() < 1e-12);
    }

    #[test]
    fn tetrahedron_volume_matches_determinant(
        a in vec3(1.0), b in vec3(1.0), c in vec3(1.0), d in vec3(1.0)
    ) {
        let det = (b - a).dot(&(c - a).cross(&(d - a)));
        prop_assume!(det.abs() > 1e-3);
        let tet = tetrahedron([a, b, c, d]);
        let m = tet.measures().unwrap();
        prop_assert!((m.volume - det.abs() / 6.0).abs() < 1e-12);
        prop_assert!((m.centroid - (a + b + c + d) / 4.0).norm() < 1e-12);
    }
}
