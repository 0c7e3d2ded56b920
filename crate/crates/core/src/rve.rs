//! Polycrystalline RVE generation: target volume sampling, random seeds, and
//! alternating Lloyd regularization with damped Newton volume solves.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{RveError, SolverError, TessellationError};
use crate::geometry::{Lattice, Vec3};
use crate::sdot::{damped_newton, SolverConfig, SolverReport, TargetMasses};
use crate::tessellation::{compute_diagram, LaguerreDiagram, SeedSet, MIN_SEED_SEPARATION};

/// Default log-normal shape parameter (standard deviation of the underlying
/// normal).
pub const DEFAULT_LOGNORMAL_SIGMA: f64 = 0.5;
pub const DEFAULT_DP_RATIO: f64 = 5.0;

// independent RNG streams derived from one user seed
const TARGET_STREAM: u64 = 1;
const SEED_STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum VolumeDistribution {
    /// All grains have the same volume.
    SinglePhase,
    /// Half the grains are `ratio` times larger than the other half.
    DualPhase {
        ratio: f64,
    },
    /// Volumes drawn from a log-normal law. `mu` defaults to the value that
    /// makes the mean volume `|V| / n`.
    LogNormal {
        mu: Option<f64>,
        sigma: f64,
    },
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeSpec {
    pub n: usize,
    pub distribution: VolumeDistribution,
}

impl VolumeSpec {
    pub fn single_phase(n: usize) -> Self {
        Self {
            n,
            distribution: VolumeDistribution::SinglePhase,
        }
    }

    pub fn dual_phase(n: usize, ratio: f64) -> Self {
        Self {
            n,
            distribution: VolumeDistribution::DualPhase { ratio },
        }
    }

    pub fn log_normal(n: usize, sigma: f64) -> Self {
        Self {
            n,
            distribution: VolumeDistribution::LogNormal { mu: None, sigma },
        }
    }

    pub fn explicit(volumes: Vec<f64>) -> Self {
        Self {
            n: volumes.len(),
            distribution: VolumeDistribution::Explicit(volumes),
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws target volumes for `spec`, normalized to sum to the box volume.
pub fn sample_targets(
    spec: &VolumeSpec,
    lattice: &Lattice,
    rng_seed: u64,
) -> Result<TargetMasses, RveError> {
    let n = spec.n;
    if n == 0 {
        return Err(RveError::NoGrains);
    }
    let total = lattice.volume();
    let mut rng = rng_for(rng_seed, TARGET_STREAM);
    let values = match &spec.distribution {
        VolumeDistribution::SinglePhase => vec![total / n as f64; n],
        VolumeDistribution::DualPhase { ratio } => {
            if !n.is_multiple_of(2) {
                return Err(RveError::DpRequiresEvenN(n));
            }
            if !(ratio.is_finite() && *ratio > 0.0) {
                return Err(RveError::InvalidParameter(format!("DP ratio {ratio}")));
            }
            // n/2 grains of x and n/2 of ratio*x
            let small = total / ((n / 2) as f64 * (1.0 + ratio));
            let mut v: Vec<f64> = (0..n)
                .map(|i| if i < n / 2 { small } else { ratio * small })
                .collect();
            v.shuffle(&mut rng);
            v
        }
        VolumeDistribution::LogNormal { mu, sigma } => {
            if !(sigma.is_finite() && *sigma >= 0.0) {
                return Err(RveError::InvalidParameter(format!(
                    "log-normal sigma {sigma}"
                )));
            }
            let mu = mu.unwrap_or_else(|| (total / n as f64).ln() - 0.5 * sigma * sigma);
            let law = LogNormal::new(mu, *sigma)
                .map_err(|e| RveError::InvalidParameter(e.to_string()))?;
            (0..n).map(|_| law.sample(&mut rng)).collect()
        }
        VolumeDistribution::Explicit(v) => {
            if v.len() != n {
                return Err(RveError::ExplicitCount {
                    expected: n,
                    got: v.len(),
                });
            }
            v.clone()
        }
    };
    Ok(TargetMasses::new(values, lattice)?)
}

/// `n` i.i.d. uniform seeds in the open box, pairwise separated.
pub fn sample_seeds(n: usize, lattice: &Lattice, rng_seed: u64) -> Result<Vec<Vec3>, RveError> {
    if n == 0 {
        return Err(RveError::NoGrains);
    }
    let mut rng = rng_for(rng_seed, SEED_STREAM);
    let half = lattice.lengths().map(|l| 0.5 * l);
    let min_dist = MIN_SEED_SEPARATION * lattice.max_length();
    let bucket = (lattice.volume() / n as f64).cbrt().max(min_dist);
    let key =
        |p: &Vec3| -> [i64; 3] { [0, 1, 2].map(|k| ((p[k] + half[k]) / bucket).floor() as i64) };
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut seeds = Vec::with_capacity(n);
    let mut attempts = 0usize;

    while seeds.len() < n {
        attempts += 1;
        if attempts > 100 * n {
            return Err(RveError::SeedPlacement(n));
        }
        let p = Vec3::new(
            rng.random_range(-half[0]..half[0]),
            rng.random_range(-half[1]..half[1]),
            rng.random_range(-half[2]..half[2]),
        );
        if !lattice.contains_interior(&p) {
            continue;
        }
        let b = key(&p);
        let mut clash = false;
        // bucket is at least min_dist wide; periodic neighbours wrap through
        // the box, so compare across the whole lattice for boundary buckets
        'outer: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = buckets.get(&[b[0] + dx, b[1] + dy, b[2] + dz]) {
                        for &j in list {
                            if lattice.periodic_sq_distance(&p, &seeds[j]).0 < min_dist * min_dist {
                                clash = true;
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        if !clash && near_boundary(&p, &half, min_dist) {
            clash = seeds
                .iter()
                .any(|q| lattice.periodic_sq_distance(&p, q).0 < min_dist * min_dist);
        }
        if clash {
            continue;
        }
        buckets.entry(b).or_default().push(seeds.len());
        seeds.push(p);
    }
    Ok(seeds)
}

fn near_boundary(p: &Vec3, half: &[f64; 3], tol: f64) -> bool {
    (0..3).any(|k| half[k] - p[k].abs() < tol)
}

/// Moves every seed to the centroid of its unwrapped cell, wrapped back into
/// the box.
pub fn lloyd_step(diagram: &LaguerreDiagram) -> Result<Vec<Vec3>, RveError> {
    if let Some(i) = diagram.first_empty_cell() {
        return Err(SolverError::EmptyCell(i).into());
    }
    let lattice = diagram.lattice();
    let moved: Vec<Vec3> = diagram
        .centroids()
        .iter()
        .map(|c| wrap_strict(lattice, c))
        .collect();
    // distinctness re-check
    SeedSet::new(*lattice, moved.clone())?;
    Ok(moved)
}

/// Wraps into the box; a point landing exactly on the lower face is nudged
/// inward so it stays in the open box.
fn wrap_strict(lattice: &Lattice, x: &Vec3) -> Vec3 {
    let mut p = lattice.wrap_point(x);
    for k in 0..3 {
        let half = 0.5 * lattice.length(k);
        if p[k] <= -half {
            p[k] = (-half).next_up();
        }
    }
    p
}

/// Mean periodic distance between each seed and its cell centroid.
pub fn mean_centroid_displacement(diagram: &LaguerreDiagram) -> f64 {
    let lattice = diagram.lattice();
    let total: f64 = diagram
        .positions()
        .iter()
        .zip(diagram.centroids())
        .map(|(y, c)| lattice.periodic_sq_distance(y, &c).0.sqrt())
        .sum();
    total / diagram.len() as f64
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RveConfig {
    /// Number of Lloyd rounds `K`; zero means one Newton solve on the
    /// initial seeds.
    pub lloyd_steps: usize,
    pub rng_seed: u64,
    pub solver: SolverConfig,
    /// Start each inner solve from the previous weights instead of zero.
    pub warm_start: bool,
    /// Use these seeds instead of random ones.
    pub initial_seeds: Option<Vec<Vec3>>,
}

#[derive(Clone, Debug)]
pub struct RveResult {
    pub seeds: SeedSet,
    pub weights: Vec<f64>,
    pub diagram: LaguerreDiagram,
    pub targets: TargetMasses,
    /// One report per inner Newton solve.
    pub reports: Vec<SolverReport>,
    /// Mean seed-to-centroid distance of the diagram produced by each Lloyd
    /// round.
    pub lloyd_displacements: Vec<f64>,
}

impl RveResult {
    pub fn final_pct_error(&self) -> f64 {
        crate::sdot::mass_error(&self.diagram.volumes(), self.targets.as_slice()).1
    }
}

/// Runs the full pipeline: random seeds, then `K` rounds of
/// (Lloyd step, damped Newton from `w = 0`).
pub fn generate_rve(
    spec: &VolumeSpec,
    lattice: &Lattice,
    cfg: &RveConfig,
) -> Result<RveResult, RveError> {
    let targets = sample_targets(spec, lattice, cfg.rng_seed)?;
    let positions = match &cfg.initial_seeds {
        Some(p) => p.clone(),
        None => sample_seeds(spec.n, lattice, cfg.rng_seed)?,
    };
    if positions.len() != spec.n {
        return Err(RveError::ExplicitCount {
            expected: spec.n,
            got: positions.len(),
        });
    }
    let mut seeds = SeedSet::new(*lattice, positions)?;
    let stage = |name: String| {
        move |source: SolverError| RveError::Stage {
            stage: name,
            source,
        }
    };
    let n = spec.n;
    let zero = vec![0.0; n];

    if cfg.lloyd_steps == 0 {
        let sol = damped_newton(&seeds, &targets, &zero, &cfg.solver)
            .map_err(stage("damped Newton (no Lloyd rounds)".into()))?;
        return Ok(RveResult {
            seeds,
            weights: sol.weights,
            diagram: sol.diagram,
            targets,
            reports: vec![sol.report],
            lloyd_displacements: Vec::new(),
        });
    }

    let mut diagram = compute_diagram(&seeds, &zero)
        .map_err(|e: TessellationError| stage("initial Voronoi diagram".into())(e.into()))?;
    let mut weights = zero.clone();
    let mut reports = Vec::with_capacity(cfg.lloyd_steps);
    let mut displacements = Vec::with_capacity(cfg.lloyd_steps);
    for round in 1..=cfg.lloyd_steps {
        let moved = lloyd_step(&diagram).map_err(|e| match e {
            RveError::Solver(s) => stage(format!("Lloyd round {round}"))(s),
            other => other,
        })?;
        seeds = SeedSet::new(*lattice, moved)?;
        let w0 = if cfg.warm_start {
            weights.clone()
        } else {
            zero.clone()
        };
        let sol = damped_newton(&seeds, &targets, &w0, &cfg.solver)
            .map_err(stage(format!("damped Newton in Lloyd round {round}")))?;
        weights = sol.weights;
        diagram = sol.diagram;
        reports.push(sol.report);
        displacements.push(mean_centroid_displacement(&diagram));
    }
    Ok(RveResult {
        seeds,
        weights,
        diagram,
        targets,
        reports,
        lloyd_displacements: displacements,
    })
}
