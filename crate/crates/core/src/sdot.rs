//! Periodic semi-discrete optimal transport: the Kantorovich dual, its
//! gradient and Hessian, and the damped Newton method that maximizes it.

use std::time::Instant;

use crate::error::SolverError;
use crate::geometry::Lattice;
use crate::tessellation::{compute_diagram, LaguerreDiagram, SeedSet};

/// Target cell masses, positive and rescaled to sum to the box volume.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMasses(Vec<f64>);

impl TargetMasses {
    pub fn new(values: Vec<f64>, lattice: &Lattice) -> Result<Self, SolverError> {
        if let Some(i) = values.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(SolverError::InvalidTarget(i));
        }
        if values.is_empty() {
            return Err(SolverError::TargetCount {
                expected: 1,
                got: 0,
            });
        }
        let sum: f64 = values.iter().sum();
        let scale = lattice.volume() / sum;
        Ok(Self(values.into_iter().map(|m| m * scale).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Stopping tolerance on the maximum percentage volume error.
    pub eta: f64,
    pub max_iterations: usize,
    pub max_backtracking: usize,
    /// Relative residual required from the reduced linear solve.
    pub linear_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            max_iterations: 100,
            max_backtracking: 40,
            linear_tolerance: 1e-11,
        }
    }
}

impl SolverConfig {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            ..Self::default()
        }
    }
}

/// Wall-clock seconds spent in each phase of one Newton iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub diagram: f64,
    pub hessian: f64,
    pub linear_solve: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based Newton iteration index.
    pub iteration: usize,
    /// `e(w^k)`: largest absolute volume deviation.
    pub error: f64,
    pub pct_error: f64,
    /// Number of step halvings `l_k`.
    pub backtracking: usize,
    /// Kantorovich value at the accepted iterate.
    pub kantorovich: f64,
    pub min_volume: f64,
    pub linear_iterations: usize,
    pub linear_residual: f64,
    pub timings: PhaseTimings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport {
    pub epsilon: f64,
    pub initial_error: f64,
    pub initial_pct_error: f64,
    pub initial_kantorovich: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub total_time: f64,
}

impl SolverReport {
    pub fn newton_iterations(&self) -> usize {
        self.iterations.len()
    }

    pub fn total_backtracking(&self) -> usize {
        self.iterations.iter().map(|r| r.backtracking).sum()
    }

    pub fn final_pct_error(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_pct_error, |r| r.pct_error)
    }

    /// Sequence `e(w^0), e(w^1), ...`.
    pub fn errors(&self) -> Vec<f64> {
        std::iter::once(self.initial_error)
            .chain(self.iterations.iter().map(|r| r.error))
            .collect()
    }

    /// Replays the acceptance test of every logged step: the volume floor and
    /// `e(w^k) <= (1 - 2^-(l_k+1)) e(w^{k-1})`.
    pub fn acceptance_rule_holds(&self) -> bool {
        let mut prev = self.initial_error;
        for r in &self.iterations {
            let factor = 1.0 - 0.5f64.powi(r.backtracking as i32 + 1);
            if r.min_volume < self.epsilon || r.error > factor * prev {
                return false;
            }
            prev = r.error;
        }
        true
    }
}

/// Result of a damped Newton solve.
#[derive(Clone, Debug)]
pub struct NewtonSolution {
    /// Weights with the last entry pinned to zero.
    pub weights: Vec<f64>,
    pub diagram: LaguerreDiagram,
    pub report: SolverReport,
}

/// `(max_i |v_i - m_i|, 100 max_i |v_i - m_i| / m_i)`.
pub fn mass_error(volumes: &[f64], targets: &[f64]) -> (f64, f64) {
    volumes
        .iter()
        .zip(targets)
        .fold((0.0, 0.0), |(e, pct), (v, m)| {
            let d = (v - m).abs();
            (f64::max(e, d), f64::max(pct, 100.0 * d / m))
        })
}

fn check_targets(n: usize, m: &TargetMasses) -> Result<(), SolverError> {
    if m.len() != n {
        return Err(SolverError::TargetCount {
            expected: n,
            got: m.len(),
        });
    }
    Ok(())
}

/// Kantorovich value from an already computed diagram.
pub fn kantorovich_value_from_diagram(diagram: &LaguerreDiagram, m: &TargetMasses) -> f64 {
    diagram
        .cells()
        .iter()
        .zip(diagram.weights())
        .zip(m.as_slice())
        .map(|((cell, w), mi)| cell.second_moment - w * cell.volume + mi * w)
        .sum()
}

pub fn kantorovich_value(
    seeds: &SeedSet,
    weights: &[f64],
    m: &TargetMasses,
) -> Result<f64, SolverError> {
    check_targets(seeds.len(), m)?;
    let diagram = compute_diagram(seeds, weights)?;
    Ok(kantorovich_value_from_diagram(&diagram, m))
}

/// `∂K/∂w_i = m_i - v_i`.
pub fn kantorovich_gradient(diagram: &LaguerreDiagram, m: &TargetMasses) -> Vec<f64> {
    m.as_slice()
        .iter()
        .zip(diagram.cells())
        .map(|(mi, c)| mi - c.volume)
        .collect()
}

/// Symmetric sparse matrix in compressed-row form (diagonal included).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds a graph Laplacian-type matrix from off-diagonal entries
    /// `(i, j, value)`, `i != j`; repeated entries are summed and each entry
    /// is mirrored. The diagonal is minus the off-diagonal row sum.
    pub fn laplacian(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in entries {
            debug_assert_ne!(i, j);
            rows[i].push((j, v));
            rows[j].push((i, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len() + 1);
            for &(j, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            let diag: f64 = -merged.iter().map(|e| e.1).sum::<f64>();
            let pos = merged.partition_point(|e| e.0 < i);
            merged.insert(pos, (i, diag));
            for (j, v) in merged {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    /// Applies `-Ĥ` (leading `(n-1)x(n-1)` block, negated) to `x`.
    fn neg_reduced_mul(&self, x: &[f64], out: &mut [f64]) {
        let m = self.n - 1;
        for i in 0..m {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                if j < m {
                    acc -= v * x[j];
                }
            }
            out[i] = acc;
        }
    }

    /// Returns a copy with every off-diagonal entry negated.
    pub fn with_flipped_offdiagonal(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.cols[k] != i {
                    out.vals[k] = -out.vals[k];
                }
            }
        }
        out
    }
}

/// Hessian of the Kantorovich function from the interface table:
/// `H_ij = Σ area / (2 distance)` over facets shared by cell `i` and images of
/// seed `j`, `H_ii = -Σ_{j≠i} H_ij`. Facets shared with a cell's own images do
/// not contribute.
pub fn kantorovich_hessian(diagram: &LaguerreDiagram) -> Result<SparseSymmetric, SolverError> {
    if let Some(i) = diagram.first_empty_cell() {
        return Err(SolverError::EmptyCell(i));
    }
    // each facet is seen from both of its cells; halving symmetrizes exactly
    let entries = diagram
        .interfaces()
        .iter()
        .filter(|f| f.i != f.j)
        .map(|f| (f.i, f.j, 0.25 * f.area / f.distance));
    Ok(SparseSymmetric::laplacian(diagram.len(), entries))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSolution {
    pub direction: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `-Ĥ d = b` by Jacobi-preconditioned conjugate gradients, where `Ĥ`
/// drops the last row and column of `h`.
pub fn reduced_solve(
    h: &SparseSymmetric,
    b: &[f64],
    tolerance: f64,
) -> Result<ReducedSolution, SolverError> {
    let m = h.dim().saturating_sub(1);
    assert_eq!(b.len(), m, "right-hand side must have n-1 entries");
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(ReducedSolution {
            direction: vec![0.0; m],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let precond: Vec<f64> = (0..m).map(|i| -h.get(i, i)).collect();
    if precond.iter().any(|&d| !(d > 0.0)) {
        return Err(SolverError::SingularReducedHessian {
            residual: 1.0,
            iterations: 0,
        });
    }

    let max_iter = 20 * m + 100;
    let mut x = vec![0.0; m];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut rel = 1.0;

    while iterations < max_iter {
        h.neg_reduced_mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        rel = norm(&r) / b_norm;
        if rel <= tolerance {
            // confirm with the true residual
            h.neg_reduced_mul(&x, &mut ap);
            let true_rel = norm(&sub(b, &ap)) / b_norm;
            if true_rel <= tolerance {
                return Ok(ReducedSolution {
                    direction: x,
                    iterations,
                    relative_residual: true_rel,
                });
            }
            r = sub(b, &ap);
        }
        for k in 0..m {
            z[k] = r[k] / precond[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(SolverError::SingularReducedHessian {
        residual: rel,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Damped Newton maximization of the Kantorovich function.
///
/// The initial guess is shifted so that its last entry is zero; that entry
/// stays pinned for the whole run. Every accepted iterate keeps all cell
/// volumes above `epsilon = min(min_i v_i(w0), min_i m_i) / 2` and decreases
/// the maximum volume error by the factor `1 - 2^-(l+1)`, where `l` is the
/// number of step halvings.
pub fn damped_newton(
    seeds: &SeedSet,
    m: &TargetMasses,
    w0: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonSolution, SolverError> {
    let n = seeds.len();
    check_targets(n, m)?;
    if !(cfg.eta > 0.0) {
        return Err(SolverError::InvalidTolerance);
    }
    let start = Instant::now();
    let targets = m.as_slice();
    let gauge = w0.last().copied().unwrap_or(0.0);
    let mut weights: Vec<f64> = w0.iter().map(|w| w - gauge).collect();

    let mut diagram = compute_diagram(seeds, &weights)?;
    if let Some(i) = diagram.first_empty_cell() {
        return Err(SolverError::InfeasibleInitialGuess(i));
    }
    let epsilon = 0.5 * diagram.min_volume().min(m.min());
    let (mut error, mut pct) = mass_error(&diagram.volumes(), targets);
    let mut report = SolverReport {
        epsilon,
        initial_error: error,
        initial_pct_error: pct,
        initial_kantorovich: kantorovich_value_from_diagram(&diagram, m),
        iterations: Vec::new(),
        converged: false,
        total_time: 0.0,
    };

    while pct >= cfg.eta {
        let k = report.iterations.len() + 1;
        if k > cfg.max_iterations {
            return Err(SolverError::MaxIterations(cfg.max_iterations));
        }
        let iter_start = Instant::now();
        let mut timings = PhaseTimings::default();

        let t = Instant::now();
        let hessian = kantorovich_hessian(&diagram)?;
        timings.hessian = t.elapsed().as_secs_f64();

        let gradient = kantorovich_gradient(&diagram, m);
        let t = Instant::now();
        let solve = reduced_solve(&hessian, &gradient[..n - 1], cfg.linear_tolerance)?;
        timings.linear_solve = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut accepted = None;
        for l in 0..=cfg.max_backtracking {
            let scale = 0.5f64.powi(l as i32);
            let mut trial = weights.clone();
            for (w, d) in trial.iter_mut().zip(&solve.direction) {
                *w += scale * d;
            }
            trial[n - 1] = 0.0;
            let candidate = compute_diagram(seeds, &trial)?;
            let (e, p) = mass_error(&candidate.volumes(), targets);
            let factor = 1.0 - 0.5f64.powi(l as i32 + 1);
            if candidate.min_volume() >= epsilon && e <= factor * error {
                accepted = Some((l, trial, candidate, e, p));
                break;
            }
        }
        timings.diagram = t.elapsed().as_secs_f64();
        let Some((l, trial, candidate, e, p)) = accepted else {
            return Err(SolverError::LineSearchFailed {
                iteration: k,
                steps: cfg.max_backtracking,
            });
        };
        weights = trial;
        diagram = candidate;
        error = e;
        pct = p;
        timings.total = iter_start.elapsed().as_secs_f64();
        report.iterations.push(IterationRecord {
            iteration: k,
            error,
            pct_error: pct,
            backtracking: l,
            kantorovich: kantorovich_value_from_diagram(&diagram, m),
            min_volume: diagram.min_volume(),
            linear_iterations: solve.iterations,
            linear_residual: solve.relative_residual,
            timings,
        });
    }

    report.converged = true;
    report.total_time = start.elapsed().as_secs_f64();
    Ok(NewtonSolution {
        weights,
        diagram,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn slab() -> SeedSet {
        SeedSet::new(
            Lattice::unit(),
            vec![Vec3::new(-0.25, 0.0, 0.0), Vec3::new(0.25, 0.0, 0.0)],
        )
        .unwrap()
    }

    fn masses(v: &[f64]) -> TargetMasses {
        TargetMasses::new(v.to_vec(), &Lattice::unit()).unwrap()
    }

    #[test]
    fn target_masses_normalize() {
        let m = TargetMasses::new(vec![1.0, 3.0], &Lattice::cube(2.0).unwrap()).unwrap();
        assert_eq!(m.as_slice(), &[2.0, 6.0]);
        assert!(TargetMasses::new(vec![1.0, 0.0], &Lattice::unit()).is_err());
    }

    #[test]
    fn single_seed_value_is_box_moment() {
        let seeds = SeedSet::new(Lattice::unit(), vec![Vec3::new(1e-3, 0.0, 0.0)]).unwrap();
        let k = kantorovich_value(&seeds, &[0.0], &masses(&[1.0])).unwrap();
        assert!((k - 0.25).abs() < 1e-14);
    }

    #[test]
    fn value_is_shift_invariant() {
        let m = masses(&[0.3, 0.7]);
        let a = kantorovich_value(&slab(), &[0.02, -0.01], &m).unwrap();
        let b = kantorovich_value(&slab(), &[17.32, 17.29], &m).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn slab_gradient_and_hessian() {
        let d = compute_diagram(&slab(), &[0.0, 0.0]).unwrap();
        assert_eq!(
            kantorovich_gradient(&d, &masses(&[0.5, 0.5])),
            vec![0.0, 0.0]
        );
        let g = kantorovich_gradient(&d, &masses(&[0.3, 0.7]));
        assert!((g[0] + 0.2).abs() < 1e-14 && (g[1] - 0.2).abs() < 1e-14);

        let h = kantorovich_hessian(&d).unwrap();
        let dense = h.to_dense();
        let expected = [[-2.0, 2.0], [2.0, -2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((dense[i][j] - expected[i][j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hessian_rejects_empty_cells() {
        let d = compute_diagram(&slab(), &[1.0, 0.0]).unwrap();
        assert_eq!(kantorovich_hessian(&d), Err(SolverError::EmptyCell(1)));
    }

    #[test]
    fn reduced_solve_examples() {
        let d = compute_diagram(&slab(), &[0.0, 0.0]).unwrap();
        let h = kantorovich_hessian(&d).unwrap();
        let s = reduced_solve(&h, &[-0.2], 1e-11).unwrap();
        assert!((s.direction[0] + 0.1).abs() < 1e-14);
        let s = reduced_solve(&h, &[0.0], 1e-11).unwrap();
        assert_eq!(s.direction, vec![0.0]);
    }

    #[test]
    fn reduced_solve_detects_disconnected_graph() {
        // two components: {0,1} and {2,3}; the reduced block keeps {2} isolated
        // from the pinned node 3 only through nothing
        let h = SparseSymmetric::laplacian(4, [(0, 1, 1.0), (2, 3, 1.0)]);
        let err = reduced_solve(&h, &[1.0, 0.0, 0.0], 1e-11).unwrap_err();
        assert!(matches!(err, SolverError::SingularReducedHessian { .. }));
    }

    #[test]
    fn mass_error_examples() {
        assert_eq!(mass_error(&[0.3, 0.7], &[0.3, 0.7]), (0.0, 0.0));
        let (e, pct) = mass_error(&[0.5, 0.5], &[0.3, 0.7]);
        assert!((e - 0.2).abs() < 1e-15);
        assert!((pct - 100.0 * 0.2 / 0.3).abs() < 1e-12);
        let (e2, pct2) = mass_error(&[4.0, 4.0], &[2.4, 5.6]);
        assert!((e2 - 8.0 * e).abs() < 1e-12 && (pct2 - pct).abs() < 1e-12);
    }

    #[test]
    fn slab_newton_is_exact_in_one_step() {
        let sol = damped_newton(
            &slab(),
            &masses(&[0.3, 0.7]),
            &[0.0, 0.0],
            &SolverConfig::with_eta(0.01),
        )
        .unwrap();
        assert_eq!(sol.report.newton_iterations(), 1);
        assert_eq!(sol.report.iterations[0].backtracking, 0);
        assert!((sol.weights[0] + 0.1).abs() < 1e-12);
        assert_eq!(sol.weights[1], 0.0);
        assert!(sol.report.acceptance_rule_holds());
    }

    #[test]
    fn gauge_shift_on_entry() {
        let cfg = SolverConfig::with_eta(0.01);
        let m = masses(&[0.3, 0.7]);
        let a = damped_newton(&slab(), &m, &[0.0, 0.0], &cfg).unwrap();
        let b = damped_newton(&slab(), &m, &[5.0, 5.0], &cfg).unwrap();
        assert_eq!(b.weights[1], 0.0);
        for (x, y) in a.diagram.volumes().iter().zip(b.diagram.volumes()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn already_converged_takes_zero_iterations() {
        let sol = damped_newton(
            &slab(),
            &masses(&[0.5, 0.5]),
            &[0.0, 0.0],
            &SolverConfig::with_eta(1e-6),
        )
        .unwrap();
        assert_eq!(sol.report.newton_iterations(), 0);
        assert!(sol.report.converged);
    }

    #[test]
    fn infeasible_start_rejected() {
        let err = damped_newton(
            &slab(),
            &masses(&[0.5, 0.5]),
            &[1.0, 0.0],
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err, SolverError::InfeasibleInitialGuess(1));
    }

    #[test]
    fn iteration_cap_enforced() {
        let cfg = SolverConfig {
            eta: 1e-3,
            max_iterations: 0,
            ..SolverConfig::default()
        };
        let err = damped_newton(&slab(), &masses(&[0.3, 0.7]), &[0.0, 0.0], &cfg).unwrap_err();
        assert_eq!(err, SolverError::MaxIterations(0));
    }
}
