use laguerre_rve::{
    compute_diagram, damped_newton, kantorovich_gradient, kantorovich_hessian, kantorovich_value,
    monte_carlo_volumes, sample_seeds, sample_targets, Lattice, SeedSet, SolverConfig,
    SparseSymmetric, TargetMasses, Vec3, VolumeSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{Level, ValidateArgs};
use crate::error::CliError;

struct Check {
    name: String,
    measured: f64,
    tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
        }
    }

    fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

struct Instance {
    seeds: SeedSet,
    weights: Vec<f64>,
    masses: TargetMasses,
}

/// Random seeds and weights with every cell above a tenth of the mean volume.
fn instance(n: usize, lattice: &Lattice, rng: &mut ChaCha8Rng) -> Result<Instance, CliError> {
    let seeds = SeedSet::new(
        *lattice,
        sample_seeds(n, lattice, rng.random()).map_err(fail)?,
    )
    .map_err(fail)?;
    let mean = lattice.volume() / n as f64;
    let h2 = mean.powf(2.0 / 3.0);
    let floor = if n <= 20 { 0.1 } else { 1e-6 };
    for _ in 0..1000 {
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1) * h2).collect();
        let d = compute_diagram(&seeds, &weights).map_err(fail)?;
        if d.min_volume() > floor * mean {
            let masses = TargetMasses::new(
                (0..n).map(|_| rng.random_range(0.5..1.5)).collect(),
                lattice,
            )
            .map_err(fail)?;
            return Ok(Instance {
                seeds,
                weights,
                masses,
            });
        }
    }
    Err(fail(format!("could not draw admissible weights for n={n}")))
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn derivative_checks(
    instances: &[Instance],
    flip: bool,
    checks: &mut Vec<Check>,
) -> Result<(), CliError> {
    let step = 1e-6;
    let (mut grad_err, mut hess_err, mut row_sum, mut asym, mut neg_off) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for inst in instances {
        let n = inst.weights.len();
        let d = compute_diagram(&inst.seeds, &inst.weights).map_err(fail)?;
        let g = kantorovich_gradient(&d, &inst.masses);
        let mut h: SparseSymmetric = kantorovich_hessian(&d).map_err(fail)?;
        if flip {
            h = h.with_flipped_offdiagonal();
        }
        let h = h.to_dense();
        let mut fd_g = vec![0.0; n];
        let mut fd_h = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut plus = inst.weights.clone();
            let mut minus = inst.weights.clone();
            plus[j] += step;
            minus[j] -= step;
            let kp = kantorovich_value(&inst.seeds, &plus, &inst.masses).map_err(fail)?;
            let km = kantorovich_value(&inst.seeds, &minus, &inst.masses).map_err(fail)?;
            fd_g[j] = (kp - km) / (2.0 * step);
            let vp = compute_diagram(&inst.seeds, &plus).map_err(fail)?.volumes();
            let vm = compute_diagram(&inst.seeds, &minus)
                .map_err(fail)?
                .volumes();
            for i in 0..n {
                fd_h[i][j] = -(vp[i] - vm[i]) / (2.0 * step);
            }
        }
        grad_err = grad_err
            .max(max_abs(g.iter().zip(&fd_g).map(|(a, b)| a - b)) / max_abs(g.iter().copied()));
        // entries below 1e-3 of the largest are compared against that floor
        let scale = max_abs(fd_h.iter().flatten().copied());
        for i in 0..n {
            row_sum = row_sum.max(h[i].iter().sum::<f64>().abs());
            for j in 0..n {
                let denom = fd_h[i][j].abs().max(1e-3 * scale);
                hess_err = hess_err.max((h[i][j] - fd_h[i][j]).abs() / denom);
                asym = asym.max((h[i][j] - h[j][i]).abs());
                if i != j && h[i][j] < 0.0 {
                    neg_off = neg_off.max(-h[i][j]);
                }
            }
        }
    }
    checks.push(Check::new(
        "gradient vs finite differences (relative)",
        grad_err,
        1e-5,
    ));
    checks.push(Check::new(
        "Hessian vs finite differences (entrywise relative)",
        hess_err,
        1e-4,
    ));
    checks.push(Check::new("Hessian row sums", row_sum, 1e-10));
    checks.push(Check::new("Hessian asymmetry", asym, 0.0));
    checks.push(Check::new("Hessian negative off-diagonal", neg_off, 0.0));
    Ok(())
}

fn partition_check(n: usize, lattice: &Lattice, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let seeds = SeedSet::new(*lattice, sample_seeds(n, lattice, 5).map_err(fail)?).map_err(fail)?;
    let d = compute_diagram(&seeds, &vec![0.0; n]).map_err(fail)?;
    let rel = (d.total_volume() - lattice.volume()).abs() / lattice.volume();
    checks.push(Check::new(
        format!("partition sum, n={n} (relative)"),
        rel,
        1e-10,
    ));
    Ok(())
}

fn monte_carlo_check(
    inst: &Instance,
    samples: usize,
    checks: &mut Vec<Check>,
) -> Result<(), CliError> {
    let d = compute_diagram(&inst.seeds, &inst.weights).map_err(fail)?;
    let mc = monte_carlo_volumes(&inst.seeds, &inst.weights, samples, 17).map_err(fail)?;
    let total = inst.seeds.lattice().volume();
    let worst = d
        .volumes()
        .iter()
        .zip(&mc.volumes)
        .map(|(v, m)| {
            let p = v / total;
            (v - m).abs() / (total * (p * (1.0 - p) / samples as f64).sqrt())
        })
        .fold(0.0, f64::max);
    checks.push(Check::new(
        format!(
            "Monte Carlo volumes, n={} (standard errors)",
            inst.weights.len()
        ),
        worst,
        4.0,
    ));
    Ok(())
}

fn newton_check(n: usize, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let lattice = Lattice::unit();
    let m = sample_targets(&VolumeSpec::log_normal(n, 0.5), &lattice, 0).map_err(fail)?;
    let seeds = SeedSet::new(lattice, sample_seeds(n, &lattice, 0).map_err(fail)?).map_err(fail)?;
    let sol = damped_newton(&seeds, &m, &vec![0.0; n], &SolverConfig::default()).map_err(fail)?;
    checks.push(Check::new(
        format!("Newton final pct error, n={n}"),
        sol.report.final_pct_error(),
        1.0,
    ));
    let replay = if sol.report.acceptance_rule_holds() {
        0.0
    } else {
        1.0
    };
    checks.push(Check::new(
        format!("Newton acceptance rule replay, n={n}"),
        replay,
        0.0,
    ));
    Ok(())
}

fn slab_check(checks: &mut Vec<Check>) -> Result<(), CliError> {
    let lattice = Lattice::unit();
    let seeds = SeedSet::new(
        lattice,
        vec![Vec3::new(-0.25, 0.0, 0.0), Vec3::new(0.25, 0.0, 0.0)],
    )
    .map_err(fail)?;
    let m = TargetMasses::new(vec![0.3, 0.7], &lattice).map_err(fail)?;
    let sol =
        damped_newton(&seeds, &m, &[0.0, 0.0], &SolverConfig::with_eta(0.01)).map_err(fail)?;
    checks.push(Check::new(
        "two-seed weight difference",
        (sol.weights[0] - sol.weights[1] + 0.1).abs(),
        1e-8,
    ));
    Ok(())
}

pub fn run(args: ValidateArgs) -> Result<(), CliError> {
    let full = args.level == Level::Full;
    let lattice = Lattice::unit();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = Vec::new();

    let sizes: &[usize] = if full {
        &[5, 20, 5, 20, 5, 20, 5, 20, 5, 20]
    } else {
        &[5, 20]
    };
    let fd: Vec<Instance> = sizes
        .iter()
        .map(|&n| instance(n, &lattice, &mut rng))
        .collect::<Result<_, _>>()?;
    derivative_checks(&fd, args.inject_hessian_sign_error, &mut checks)?;

    slab_check(&mut checks)?;
    let mc_sizes: &[usize] = if full { &[10, 100, 1000] } else { &[20] };
    let samples = if full { 1_000_000 } else { 200_000 };
    for &n in mc_sizes {
        let inst = instance(n, &lattice, &mut rng)?;
        monte_carlo_check(&inst, samples, &mut checks)?;
    }
    partition_check(if full { 10_000 } else { 1000 }, &lattice, &mut checks)?;
    newton_check(if full { 1000 } else { 200 }, &mut checks)?;

    let mut first_failure = None;
    for c in &checks {
        let status = if c.passed() { "ok" } else { "FAIL" };
        println!(
            "{status:4} {}: {:.3e} (tolerance {:.1e})",
            c.name, c.measured, c.tolerance
        );
        if !c.passed() && first_failure.is_none() {
            first_failure = Some(c.name.clone());
        }
    }
    match first_failure {
        Some(name) => Err(CliError::Validation(name)),
        None => Ok(()),
    }
}
