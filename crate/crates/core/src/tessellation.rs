//! Periodic Laguerre (power) tessellations of the fundamental box.
//!
//! Each seed's cell is computed as an unwrapped convex polyhedron in R^3: the
//! power cell of the seed among all periodic images of all seeds. Wrapping it
//! back into the box gives the (possibly fragmented) periodic cell, so its
//! volume, centroid and facets are exactly what the solver and the Lloyd step
//! need.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::TessellationError;
use crate::geometry::{ConvexPolyhedron, FacetTag, Lattice, Plane, Shift, Vec3};

/// Relative vertex-snapping tolerance used while clipping cells.
pub const SNAP_TOLERANCE: f64 = 1e-12;
/// Relative area below which a facet is left out of the interface table.
pub const MIN_INTERFACE_AREA: f64 = 1e-14;
/// Relative minimum periodic separation between distinct seeds.
pub const MIN_SEED_SEPARATION: f64 = 1e-9;
/// Largest image search radius, in units of the longest box edge. A cell
/// whose certification needs images farther away than this is rejected.
pub const MAX_SEARCH_RADIUS: f64 = 2.5;

/// Seed positions in the open fundamental box of a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSet {
    lattice: Lattice,
    positions: Vec<Vec3>,
}

impl SeedSet {
    pub fn new(lattice: Lattice, positions: Vec<Vec3>) -> Result<Self, TessellationError> {
        if positions.is_empty() {
            return Err(TessellationError::NoSeeds);
        }
        if let Some(i) = positions.iter().position(|p| !lattice.contains_interior(p)) {
            return Err(TessellationError::SeedOutsideBox(i));
        }
        let seeds = Self { lattice, positions };
        if let Some((i, j)) = seeds.find_close_pair(MIN_SEED_SEPARATION * lattice.max_length()) {
            return Err(TessellationError::DuplicateSeeds(i, j));
        }
        Ok(seeds)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// First pair of seeds closer than `min_dist` in the periodic metric.
    fn find_close_pair(&self, min_dist: f64) -> Option<(usize, usize)> {
        let grid = SpatialGrid::new(&self.lattice, &self.positions);
        let min_sq = min_dist * min_dist;
        for (i, y) in self.positions.iter().enumerate() {
            let b0 = grid.block_of(y);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let (base, _) = grid.resolve([b0[0] + dx, b0[1] + dy, b0[2] + dz]);
                        for &j in grid.block(base) {
                            if j > i
                                && self.lattice.periodic_sq_distance(y, &self.positions[j]).0
                                    < min_sq
                            {
                                return Some((i, j));
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

/// Uniform bucket grid over the fundamental box, addressed with unbounded
/// block coordinates so that neighbouring blocks across the boundary resolve
/// to a base block plus a lattice shift.
#[derive(Debug)]
pub(crate) struct SpatialGrid {
    dims: [i64; 3],
    block_size: [f64; 3],
    half: [f64; 3],
    blocks: Vec<Vec<usize>>,
}

impl SpatialGrid {
    pub(crate) fn new(lattice: &Lattice, positions: &[Vec3]) -> Self {
        let n = positions.len().max(1) as f64;
        let h = (lattice.volume() / n).cbrt();
        let lengths = lattice.lengths();
        let mut dims = [1i64; 3];
        let mut block_size = [0.0; 3];
        let mut half = [0.0; 3];
        for k in 0..3 {
            dims[k] = ((lengths[k] / h).floor() as i64).clamp(1, 1 << 10);
            block_size[k] = lengths[k] / dims[k] as f64;
            half[k] = 0.5 * lengths[k];
        }
        let mut grid = Self {
            dims,
            block_size,
            half,
            blocks: vec![Vec::new(); (dims[0] * dims[1] * dims[2]) as usize],
        };
        for (i, p) in positions.iter().enumerate() {
            let b = grid.block_of(p);
            let idx = grid.flat(b);
            grid.blocks[idx].push(i);
        }
        grid
    }

    fn block_of(&self, p: &Vec3) -> [i64; 3] {
        let mut b = [0i64; 3];
        for k in 0..3 {
            b[k] = (((p[k] + self.half[k]) / self.block_size[k]).floor() as i64)
                .clamp(0, self.dims[k] - 1);
        }
        b
    }

    fn flat(&self, b: [i64; 3]) -> usize {
        ((b[0] * self.dims[1] + b[1]) * self.dims[2] + b[2]) as usize
    }

    /// Base block inside the box and the lattice shift of an unbounded block.
    fn resolve(&self, b: [i64; 3]) -> ([i64; 3], [i64; 3]) {
        let mut base = [0i64; 3];
        let mut shift = [0i64; 3];
        for k in 0..3 {
            base[k] = b[k].rem_euclid(self.dims[k]);
            shift[k] = b[k].div_euclid(self.dims[k]);
        }
        (base, shift)
    }

    fn block(&self, base: [i64; 3]) -> &[usize] {
        &self.blocks[self.flat(base)]
    }

    /// Bounds of an unbounded block in world coordinates.
    fn block_bounds(&self, b: [i64; 3]) -> ([f64; 3], [f64; 3]) {
        let lo = [0, 1, 2].map(|k| -self.half[k] + b[k] as f64 * self.block_size[k]);
        let hi = [0, 1, 2].map(|k| lo[k] + self.block_size[k]);
        (lo, hi)
    }

    fn block_sq_distance(&self, b: [i64; 3], p: &Vec3) -> f64 {
        let (lo, hi) = self.block_bounds(b);
        (0..3)
            .map(|k| {
                let gap = (lo[k] - p[k]).max(p[k] - hi[k]).max(0.0);
                gap * gap
            })
            .sum()
    }

    /// Whether some image inside block `b` (weight at most `w_i + headroom`)
    /// could beat the seed `y` somewhere in `cell`. The bound
    /// `dist(x, B)^2 - |x - y|^2` is concave in `x`, so checking the vertices
    /// is exact for the whole cell.
    fn block_may_cut(&self, b: [i64; 3], cell: &ConvexPolyhedron, y: &Vec3, headroom: f64) -> bool {
        cell.vertices()
            .iter()
            .any(|x| self.block_sq_distance(b, x) - (x - y).norm_squared() < headroom)
    }
}

/// Radical plane of the power cell of `y` (weight `w_y`) against `z`
/// (weight `w_z`): the retained side is where `|x-y|^2 - w_y <= |x-z|^2 - w_z`.
pub fn radical_plane(y: &Vec3, w_y: f64, z: &Vec3, w_z: f64) -> Result<Plane, TessellationError> {
    let d = z - y;
    let d2 = d.norm_squared();
    if d2 == 0.0 {
        return Err(TessellationError::DegeneratePair);
    }
    Plane::new(d, 0.5 * (d2 + w_y - w_z) + d.dot(y)).map_err(|_| TessellationError::DegeneratePair)
}

/// One cell of the diagram: the unwrapped polyhedron and its measures.
#[derive(Clone, Debug)]
pub struct Cell {
    pub polyhedron: ConvexPolyhedron,
    pub volume: f64,
    pub centroid: Vec3,
    /// `∫ |x - y_i|^2 dx` over the cell.
    pub second_moment: f64,
    pub facet_areas: Vec<f64>,
}

impl Cell {
    fn empty(seed: Vec3) -> Self {
        Self {
            polyhedron: ConvexPolyhedron::empty(),
            volume: 0.0,
            centroid: seed,
            second_moment: 0.0,
            facet_areas: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.polyhedron.is_empty()
    }
}

/// Shared facet between cell `i` and the image `y_j + shift` of seed `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interface {
    pub i: usize,
    pub j: usize,
    pub shift: Shift,
    pub area: f64,
    /// `|y_i - (y_j + shift)|`.
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct LaguerreDiagram {
    lattice: Lattice,
    positions: Vec<Vec3>,
    weights: Vec<f64>,
    cells: Vec<Cell>,
    interfaces: Vec<Interface>,
}

impl LaguerreDiagram {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Interface table sorted by `(i, j, shift)`.
    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.volume).collect()
    }

    pub fn centroids(&self) -> Vec<Vec3> {
        self.cells.iter().map(|c| c.centroid).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    pub fn min_volume(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.volume)
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the first cell with zero volume, if any.
    pub fn first_empty_cell(&self) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| c.is_empty() || c.volume <= 0.0)
    }
}

/// Computes the unwrapped cell of seed `i`.
pub fn compute_cell(
    i: usize,
    seeds: &SeedSet,
    weights: &[f64],
) -> Result<ConvexPolyhedron, TessellationError> {
    check_weights(seeds, weights)?;
    let grid = SpatialGrid::new(seeds.lattice(), seeds.positions());
    let w_max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    build_cell(i, seeds, weights, &grid, w_max)
}

fn check_weights(seeds: &SeedSet, weights: &[f64]) -> Result<(), TessellationError> {
    if weights.len() != seeds.len() {
        return Err(TessellationError::WeightCount {
            expected: seeds.len(),
            got: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(TessellationError::NonFiniteWeight(i));
    }
    Ok(())
}

fn build_cell(
    i: usize,
    seeds: &SeedSet,
    weights: &[f64],
    grid: &SpatialGrid,
    w_max: f64,
) -> Result<ConvexPolyhedron, TessellationError> {
    let lattice = seeds.lattice();
    let y = seeds.positions()[i];
    let w_i = weights[i];
    let snap = SNAP_TOLERANCE * lattice.max_length();
    let headroom = w_max - w_i;
    let mut cell = ConvexPolyhedron::cuboid(y, lattice.lengths().map(|l| 0.75 * l));
    let b0 = grid.block_of(&y);

    // First pass: the 27 blocks around the seed bound the cell.
    let mut near = Vec::with_capacity(27);
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                near.push([b0[0] + dx, b0[1] + dy, b0[2] + dz]);
            }
        }
    }
    clip_blocks(&mut cell, i, seeds, weights, grid, &near, snap)?;
    if cell.is_empty() {
        return Ok(cell);
    }

    // Then grow the search in annuli of blocks, nearest first, until every
    // unvisited block is farther than R + sqrt(R^2 + w_max - w_i): no image at
    // that distance can cut a cell of radius R around the seed.
    let h_min = grid
        .block_size
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let h_max = grid.block_size.iter().copied().fold(0.0, f64::max);
    let max_radius = MAX_SEARCH_RADIUS * lattice.max_length();
    let mut covered = h_min;
    let mut ring: Vec<(f64, [i64; 3])> = Vec::new();
    loop {
        let r2 = cell.max_sq_radius(&y);
        let limit = r2.sqrt() + (r2 + headroom).max(0.0).sqrt();
        if covered >= limit {
            return Ok(cell);
        }
        if covered >= max_radius {
            return Err(TessellationError::DistantImage(i));
        }
        let target = limit.min(covered + 2.0 * h_max).min(max_radius);
        let reach: [i64; 3] = [0, 1, 2].map(|k| (target / grid.block_size[k]).ceil() as i64 + 1);
        ring.clear();
        for dx in -reach[0]..=reach[0] {
            for dy in -reach[1]..=reach[1] {
                for dz in -reach[2]..=reach[2] {
                    if dx.abs() <= 1 && dy.abs() <= 1 && dz.abs() <= 1 {
                        continue;
                    }
                    let b = [b0[0] + dx, b0[1] + dy, b0[2] + dz];
                    if grid.block(grid.resolve(b).0).is_empty() {
                        continue;
                    }
                    let d2 = grid.block_sq_distance(b, &y);
                    if d2 >= covered * covered && d2 < target * target {
                        ring.push((d2, b));
                    }
                }
            }
        }
        ring.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, b) in &ring {
            if !grid.block_may_cut(b, &cell, &y, headroom) {
                continue;
            }
            clip_blocks(&mut cell, i, seeds, weights, grid, &[b], snap)?;
            if cell.is_empty() {
                return Ok(cell);
            }
        }
        covered = target;
    }
}

/// Clips `cell` against every image held by `blocks`, in order of increasing
/// power distance to the seed.
fn clip_blocks(
    cell: &mut ConvexPolyhedron,
    i: usize,
    seeds: &SeedSet,
    weights: &[f64],
    grid: &SpatialGrid,
    blocks: &[[i64; 3]],
    snap: f64,
) -> Result<(), TessellationError> {
    let lattice = seeds.lattice();
    let positions = seeds.positions();
    let y = positions[i];
    let w_i = weights[i];
    let mut candidates: Vec<(f64, usize, Shift, Vec3)> = Vec::new();
    for &b in blocks {
        let (base, shift) = grid.resolve(b);
        let u: Shift = [shift[0] as i32, shift[1] as i32, shift[2] as i32];
        let offset = lattice.shift_vector(u);
        for &j in grid.block(base) {
            if j == i && u == [0, 0, 0] {
                continue;
            }
            let z = positions[j] + offset;
            candidates.push(((z - y).norm_squared() - weights[j], j, u, z));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (_, j, u, z) in candidates {
        let plane = radical_plane(&y, w_i, &z, weights[j])?;
        if cell
            .vertices()
            .iter()
            .all(|v| plane.signed_distance(v) <= snap)
        {
            continue;
        }
        cell.clip(&plane, FacetTag::Neighbor { seed: j, shift: u }, snap);
        if cell.is_empty() {
            break;
        }
    }
    Ok(())
}

fn measure_cell(poly: ConvexPolyhedron, seed: &Vec3) -> Result<Cell, TessellationError> {
    if poly.is_empty() {
        return Ok(Cell::empty(*seed));
    }
    let m = poly.measures()?;
    if m.volume <= 0.0 {
        return Ok(Cell::empty(*seed));
    }
    let second_moment = poly.second_moment_about(seed);
    Ok(Cell {
        polyhedron: poly,
        volume: m.volume,
        centroid: m.centroid,
        second_moment,
        facet_areas: m.facet_areas,
    })
}

/// Computes the whole periodic Laguerre tessellation for the given weights.
/// Cells are built in parallel; zero-volume cells are kept as empty cells.
pub fn compute_diagram(
    seeds: &SeedSet,
    weights: &[f64],
) -> Result<LaguerreDiagram, TessellationError> {
    check_weights(seeds, weights)?;
    let lattice = *seeds.lattice();
    let grid = SpatialGrid::new(&lattice, seeds.positions());
    let w_max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let positions = seeds.positions();

    let cells: Vec<Cell> = (0..seeds.len())
        .into_par_iter()
        .map(|i| {
            let poly = build_cell(i, seeds, weights, &grid, w_max)?;
            measure_cell(poly, &positions[i])
        })
        .collect::<Result<_, _>>()?;

    let min_area = MIN_INTERFACE_AREA * lattice.max_length().powi(2);
    let mut interfaces = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        for (facet, &area) in cell.polyhedron.facets().iter().zip(&cell.facet_areas) {
            if let FacetTag::Neighbor { seed: j, shift } = facet.tag {
                if area < min_area {
                    continue;
                }
                let image = positions[j] + lattice.shift_vector(shift);
                interfaces.push(Interface {
                    i,
                    j,
                    shift,
                    area,
                    distance: (positions[i] - image).norm(),
                });
            }
        }
    }
    interfaces.sort_by_key(|a| (a.i, a.j, a.shift));

    Ok(LaguerreDiagram {
        lattice,
        positions: positions.to_vec(),
        weights: weights.to_vec(),
        cells,
        interfaces,
    })
}

/// Monte Carlo estimate of the periodic cell volumes.
#[derive(Clone, Debug)]
pub struct MonteCarloVolumes {
    pub volumes: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples: usize,
}

const MC_CHUNK: usize = 1 << 15;

/// Assigns `samples` uniform points of the box to the seed minimizing
/// `c(x, y_j) - w_j` (ties to the lowest index) by brute force.
pub fn monte_carlo_volumes(
    seeds: &SeedSet,
    weights: &[f64],
    samples: usize,
    rng_seed: u64,
) -> Result<MonteCarloVolumes, TessellationError> {
    check_weights(seeds, weights)?;
    let samples = samples.max(1);
    let lattice = *seeds.lattice();
    let n = seeds.len();
    let half = lattice.lengths().map(|l| 0.5 * l);
    let chunks = samples.div_ceil(MC_CHUNK);

    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(c as u64);
            let mut counts = vec![0u64; n];
            let todo = MC_CHUNK.min(samples - c * MC_CHUNK);
            for _ in 0..todo {
                let x = Vec3::new(
                    rng.random_range(-half[0]..half[0]),
                    rng.random_range(-half[1]..half[1]),
                    rng.random_range(-half[2]..half[2]),
                );
                let mut best = f64::INFINITY;
                let mut owner = 0;
                for (j, y) in seeds.positions().iter().enumerate() {
                    let p = lattice.periodic_sq_distance(&x, y).0 - weights[j];
                    if p < best {
                        best = p;
                        owner = j;
                    }
                }
                counts[owner] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let total = lattice.volume();
    let nf = samples as f64;
    let volumes = counts.iter().map(|&c| c as f64 * total / nf).collect();
    let std_errors = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            total * (p * (1.0 - p) / nf).sqrt()
        })
        .collect();
    Ok(MonteCarloVolumes {
        volumes,
        std_errors,
        samples,
    })
}
