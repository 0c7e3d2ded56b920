//! Lattice arithmetic on the triply periodic box and convex polyhedra built
//! by successive half-space cuts.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::GeometryError;

pub type Vec3 = Vector3<f64>;

/// Integer lattice shift, in units of the box edge lengths.
pub type Shift = [i32; 3];

/// The triply periodic cuboid lattice spanned by `(L1,0,0)`, `(0,L2,0)` and
/// `(0,0,L3)`. Its fundamental cell is the box centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    lengths: [f64; 3],
}

impl Lattice {
    pub fn new(l1: f64, l2: f64, l3: f64) -> Result<Self, GeometryError> {
        for l in [l1, l2, l3] {
            if !(l.is_finite() && l > 0.0) {
                return Err(GeometryError::InvalidLattice(l));
            }
        }
        Ok(Self {
            lengths: [l1, l2, l3],
        })
    }

    pub fn cube(length: f64) -> Result<Self, GeometryError> {
        Self::new(length, length, length)
    }

    pub fn unit() -> Self {
        Self { lengths: [1.0; 3] }
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The lattice vector for an integer shift.
    pub fn shift_vector(&self, u: Shift) -> Vec3 {
        Vec3::new(
            u[0] as f64 * self.lengths[0],
            u[1] as f64 * self.lengths[1],
            u[2] as f64 * self.lengths[2],
        )
    }

    /// True if `x` lies in the open fundamental box.
    pub fn contains_interior(&self, x: &Vec3) -> bool {
        (0..3).all(|k| x[k].abs() < 0.5 * self.lengths[k])
    }

    /// Canonical representative of `x` in the half-open box `[-L/2, L/2)^3`.
    pub fn wrap_point(&self, x: &Vec3) -> Vec3 {
        Vec3::new(
            wrap_coord(x[0], self.lengths[0]),
            wrap_coord(x[1], self.lengths[1]),
            wrap_coord(x[2], self.lengths[2]),
        )
    }

    /// Periodic squared distance `min_u |x + u - y|^2` over the lattice,
    /// together with the minimizing shift `u` (applied to `x`).
    pub fn periodic_sq_distance(&self, x: &Vec3, y: &Vec3) -> (f64, Shift) {
        let mut total = 0.0;
        let mut shift = [0i32; 3];
        for k in 0..3 {
            let l = self.lengths[k];
            let d = x[k] - y[k];
            let centre = -(d / l).round();
            let mut best = f64::INFINITY;
            let mut best_u = 0.0;
            // each coordinate is separable, so the 27 nearest images reduce to 3 per axis
            for du in [-1.0, 0.0, 1.0] {
                let u = centre + du;
                let e = d + u * l;
                if e * e < best {
                    best = e * e;
                    best_u = u;
                }
            }
            total += best;
            shift[k] = best_u as i32;
        }
        (total, shift)
    }
}

fn wrap_coord(x: f64, l: f64) -> f64 {
    let half = 0.5 * l;
    let mut r = x - l * (x / l + 0.5).floor();
    while r >= half {
        r -= l;
    }
    while r < -half {
        r += l;
    }
    r
}

/// Oriented plane; the retained half-space is `{x : normal . x <= offset}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    normal: Vec3,
    offset: f64,
}

impl Plane {
    /// Builds the half-space `{x : a . x <= b}`, normalizing `a`.
    pub fn new(a: Vec3, b: f64) -> Result<Self, GeometryError> {
        let norm = a.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(GeometryError::DegeneratePlane);
        }
        Ok(Self {
            normal: a / norm,
            offset: b / norm,
        })
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance; negative inside the retained half-space.
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// What lies on the other side of a facet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FacetTag {
    /// Face of the initial bounding box.
    Boundary,
    /// Radical plane against seed `seed` translated by the lattice shift `shift`.
    Neighbor { seed: usize, shift: Shift },
}

#[derive(Clone, Debug)]
pub struct Facet {
    /// Vertex indices, counter-clockwise seen from outside.
    pub vertices: Vec<usize>,
    pub plane: Plane,
    pub tag: FacetTag,
}

/// Convex polyhedron stored as a shared vertex list and outward-oriented
/// polygonal facets.
#[derive(Clone, Debug, Default)]
pub struct ConvexPolyhedron {
    vertices: Vec<Vec3>,
    facets: Vec<Facet>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measures {
    pub volume: f64,
    pub centroid: Vec3,
    pub facet_areas: Vec<f64>,
}

impl ConvexPolyhedron {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Axis-aligned box with the given centre and half extents. All facets are
    /// tagged [`FacetTag::Boundary`].
    pub fn cuboid(centre: Vec3, half: [f64; 3]) -> Self {
        let lo = centre - Vec3::new(half[0], half[1], half[2]);
        let hi = centre + Vec3::new(half[0], half[1], half[2]);
        let corner = |i: usize| {
            Vec3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        };
        let vertices = (0..8).map(corner).collect();
        // (vertex loop ccw from outside, outward axis, sign)
        let faces: [([usize; 4], usize, f64); 6] = [
            ([0, 4, 6, 2], 0, -1.0),
            ([1, 3, 7, 5], 0, 1.0),
            ([0, 1, 5, 4], 1, -1.0),
            ([2, 6, 7, 3], 1, 1.0),
            ([0, 2, 3, 1], 2, -1.0),
            ([4, 5, 7, 6], 2, 1.0),
        ];
        let facets = faces
            .iter()
            .map(|(loop_, axis, sign)| {
                let mut n = Vec3::zeros();
                n[*axis] = *sign;
                let offset = if *sign > 0.0 { hi[*axis] } else { -lo[*axis] };
                Facet {
                    vertices: loop_.to_vec(),
                    plane: Plane { normal: n, offset },
                    tag: FacetTag::Boundary,
                }
            })
            .collect();
        Self { vertices, facets }
    }

    /// Reassembles a polyhedron from raw parts (e.g. after deserialization).
    pub fn from_parts(vertices: Vec<Vec3>, facets: Vec<Facet>) -> Result<Self, GeometryError> {
        for f in &facets {
            if f.vertices.len() < 3 || f.vertices.iter().any(|&v| v >= vertices.len()) {
                return Err(GeometryError::MalformedFacet);
            }
        }
        Ok(Self { vertices, facets })
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet_points(&self, f: usize) -> impl Iterator<Item = &Vec3> + '_ {
        self.facets[f]
            .vertices
            .iter()
            .map(move |&v| &self.vertices[v])
    }

    /// Largest squared distance from `p` to any vertex.
    pub fn max_sq_radius(&self, p: &Vec3) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - p).norm_squared())
            .fold(0.0, f64::max)
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for f in &self.facets {
            let k = f.vertices.len();
            for a in 0..k {
                let (p, q) = (f.vertices[a], f.vertices[(a + 1) % k]);
                edges.insert((p.min(q), p.max(q)));
            }
        }
        edges.len()
    }

    /// `V - E + F`; 2 for any nonempty closed convex polyhedron.
    pub fn euler_characteristic(&self) -> i64 {
        let used: std::collections::HashSet<usize> = self
            .facets
            .iter()
            .flat_map(|f| f.vertices.iter().copied())
            .collect();
        used.len() as i64 - self.edge_count() as i64 + self.facets.len() as i64
    }

    /// Pure form of [`ConvexPolyhedron::clip`].
    pub fn clip_by_halfspace(&self, plane: &Plane, tag: FacetTag, snap: f64) -> Self {
        let mut out = self.clone();
        out.clip(plane, tag, snap);
        out
    }

    /// Intersects with `{x : n . x <= c}` in place. Vertices within `snap` of
    /// the plane count as lying on it. Returns `true` if anything was cut.
    pub fn clip(&mut self, plane: &Plane, tag: FacetTag, snap: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let dist: Vec<f64> = self
            .vertices
            .iter()
            .map(|v| {
                let s = plane.signed_distance(v);
                if s.abs() <= snap {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        if dist.iter().all(|&s| s <= 0.0) {
            return false;
        }
        if dist.iter().all(|&s| s >= 0.0) {
            *self = Self::empty();
            return true;
        }

        let mut new_vertices: Vec<Vec3> = Vec::with_capacity(self.vertices.len() + 8);
        let mut remap = vec![usize::MAX; self.vertices.len()];
        for (i, v) in self.vertices.iter().enumerate() {
            if dist[i] <= 0.0 {
                remap[i] = new_vertices.len();
                new_vertices.push(*v);
            }
        }
        let mut on_plane = vec![false; new_vertices.len()];
        for (i, &s) in dist.iter().enumerate() {
            if s == 0.0 {
                on_plane[remap[i]] = true;
            }
        }

        let mut edge_points: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cap_next: HashMap<usize, usize> = HashMap::new();
        let mut facets = Vec::with_capacity(self.facets.len() + 1);

        for facet in &self.facets {
            let k = facet.vertices.len();
            let mut poly: Vec<usize> = Vec::with_capacity(k + 2);
            for a in 0..k {
                let p = facet.vertices[a];
                let q = facet.vertices[(a + 1) % k];
                if dist[p] <= 0.0 {
                    poly.push(remap[p]);
                }
                if (dist[p] < 0.0 && dist[q] > 0.0) || (dist[p] > 0.0 && dist[q] < 0.0) {
                    let key = (p.min(q), p.max(q));
                    let idx = *edge_points.entry(key).or_insert_with(|| {
                        let t = dist[p] / (dist[p] - dist[q]);
                        let x = self.vertices[p] + (self.vertices[q] - self.vertices[p]) * t;
                        new_vertices.push(x);
                        on_plane.push(true);
                        new_vertices.len() - 1
                    });
                    poly.push(idx);
                }
            }
            if poly.len() < 3 {
                continue;
            }
            let m = poly.len();
            for a in 0..m {
                let p = poly[a];
                let q = poly[(a + 1) % m];
                if on_plane[p] && on_plane[q] {
                    // the cap traverses shared edges in the opposite direction
                    cap_next.insert(q, p);
                }
            }
            facets.push(Facet {
                vertices: poly,
                plane: facet.plane,
                tag: facet.tag,
            });
        }

        if let Some(cap) = build_cap(&cap_next, &new_vertices, plane) {
            facets.push(Facet {
                vertices: cap,
                plane: *plane,
                tag,
            });
        }

        self.vertices = new_vertices;
        self.facets = facets;
        self.compact();
        if self.facets.len() < 4 {
            *self = Self::empty();
        }
        true
    }

    fn compact(&mut self) {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for f in &mut self.facets {
            for v in &mut f.vertices {
                if remap[*v] == usize::MAX {
                    remap[*v] = vertices.len();
                    vertices.push(self.vertices[*v]);
                }
                *v = remap[*v];
            }
        }
        self.vertices = vertices;
    }

    /// Area of facet `f` by fan triangulation.
    pub fn facet_area(&self, f: usize) -> f64 {
        let idx = &self.facets[f].vertices;
        let p0 = self.vertices[idx[0]];
        let mut acc = Vec3::zeros();
        for a in 1..idx.len() - 1 {
            let p1 = self.vertices[idx[a]];
            let p2 = self.vertices[idx[a + 1]];
            acc += (p1 - p0).cross(&(p2 - p0));
        }
        0.5 * acc.norm()
    }

    /// Signed tetrahedra `(apex, a, b, c)` covering the polyhedron, one fan per
    /// facet. Signed volumes sum to the volume for any apex.
    fn for_each_tet(&self, apex: &Vec3, mut f: impl FnMut(f64, Vec3, Vec3, Vec3)) {
        for facet in &self.facets {
            let idx = &facet.vertices;
            let a = self.vertices[idx[0]] - apex;
            for k in 1..idx.len() - 1 {
                let b = self.vertices[idx[k]] - apex;
                let c = self.vertices[idx[k + 1]] - apex;
                let vol = a.dot(&b.cross(&c)) / 6.0;
                f(vol, a, b, c);
            }
        }
    }

    fn reference_point(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// Volume, centroid and per-facet areas.
    pub fn measures(&self) -> Result<Measures, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyCell);
        }
        let apex = self.reference_point();
        let mut volume = 0.0;
        let mut moment = Vec3::zeros();
        self.for_each_tet(&apex, |vol, a, b, c| {
            volume += vol;
            moment += (a + b + c) * (vol / 4.0);
        });
        let centroid = if volume > 0.0 {
            apex + moment / volume
        } else {
            apex
        };
        let facet_areas = (0..self.facets.len()).map(|f| self.facet_area(f)).collect();
        Ok(Measures {
            volume,
            centroid,
            facet_areas,
        })
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let apex = self.reference_point();
        let mut volume = 0.0;
        self.for_each_tet(&apex, |vol, _, _, _| volume += vol);
        volume
    }

    /// `∫ |x - p|^2 dx` over the polyhedron.
    pub fn second_moment_about(&self, p: &Vec3) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let mut acc = 0.0;
        self.for_each_tet(p, |vol, a, b, c| {
            acc += vol / 10.0
                * (a.norm_squared()
                    + b.norm_squared()
                    + c.norm_squared()
                    + a.dot(&b)
                    + b.dot(&c)
                    + a.dot(&c));
        });
        acc
    }
}

/// Orders the cap polygon from the directed boundary edges collected while
/// clipping; falls back to an angular sort if the chain is broken.
fn build_cap(next: &HashMap<usize, usize>, vertices: &[Vec3], plane: &Plane) -> Option<Vec<usize>> {
    if next.len() < 3 {
        return None;
    }
    let start = *next.keys().min()?;
    let mut cap = Vec::with_capacity(next.len());
    let mut cur = start;
    loop {
        cap.push(cur);
        match next.get(&cur) {
            Some(&n) if n == start => break,
            Some(&n) if cap.len() <= next.len() => cur = n,
            _ => return angular_cap(next, vertices, plane),
        }
    }
    if cap.len() != next.len() {
        return angular_cap(next, vertices, plane);
    }
    Some(cap)
}

fn angular_cap(
    next: &HashMap<usize, usize>,
    vertices: &[Vec3],
    plane: &Plane,
) -> Option<Vec<usize>> {
    let mut ids: Vec<usize> = next.keys().chain(next.values()).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 3 {
        return None;
    }
    let centre = ids.iter().map(|&i| vertices[i]).sum::<Vec3>() / ids.len() as f64;
    let n = plane.normal();
    let helper = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    let angle = |i: usize| {
        let d = vertices[i] - centre;
        d.dot(&e2).atan2(d.dot(&e1))
    };
    ids.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
    Some(ids)
}
