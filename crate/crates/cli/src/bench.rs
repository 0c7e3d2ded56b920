use std::time::Instant;

use laguerre_rve::{
    damped_newton, sample_seeds, sample_targets, Lattice, SeedSet, SolverConfig, SolverReport,
    TargetMasses, Vec3,
};

use crate::args::{BacktrackArgs, BenchArgs, Dist, DistArgs};
use crate::error::CliError;
use crate::generate::volume_spec;
use crate::io;

pub const BENCH_COLUMNS: [&str; 13] = [
    "n",
    "dist",
    "repeats",
    "failures",
    "time_mean",
    "time_median",
    "time_std",
    "iterations_mean",
    "iterations_median",
    "iterations_std",
    "backtracking_mean",
    "backtracking_median",
    "backtracking_std",
];

pub const BACKTRACK_COLUMNS: [&str; 6] = [
    "run",
    "rng_seed",
    "iteration",
    "backtracking",
    "error",
    "pct_error",
];

fn dist_name(d: Dist) -> &'static str {
    match d {
        Dist::Sp => "sp",
        Dist::Dp => "dp",
        Dist::Lognormal => "lognormal",
        Dist::File => "file",
    }
}

/// `(mean, median, sample standard deviation)`.
fn describe(xs: &[f64]) -> (f64, f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    let median = if s.len().is_multiple_of(2) {
        0.5 * (s[mid - 1] + s[mid])
    } else {
        s[mid]
    };
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, median, std)
}

/// One Newton solve from zero weights; run `r` uses rng seed `base + r`.
fn solve_instance(
    lattice: &Lattice,
    dist: Dist,
    n: usize,
    params: &DistArgs,
    fixed: &Fixed,
    rng_seed: u64,
    eta: f64,
) -> Result<(SolverReport, f64), CliError> {
    let spec = volume_spec(dist, n, params, fixed.targets.clone())?;
    let targets: TargetMasses = sample_targets(&spec, lattice, rng_seed)?;
    let positions = match &fixed.seeds {
        Some(s) => s.clone(),
        None => sample_seeds(n, lattice, rng_seed)?,
    };
    let seeds = SeedSet::new(*lattice, positions)?;
    let start = Instant::now();
    let sol = damped_newton(
        &seeds,
        &targets,
        &vec![0.0; n],
        &SolverConfig::with_eta(eta),
    )?;
    Ok((sol.report, start.elapsed().as_secs_f64()))
}

#[derive(Default)]
struct Fixed {
    targets: Option<Vec<f64>>,
    seeds: Option<Vec<Vec3>>,
}

fn fixed_inputs(params: &DistArgs) -> Result<Fixed, CliError> {
    Ok(Fixed {
        targets: params
            .targets_file
            .as_deref()
            .map(io::read_targets)
            .transpose()?,
        seeds: params
            .seeds_file
            .as_deref()
            .map(io::read_seeds)
            .transpose()?
            .map(|s| s.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()),
    })
}

pub fn run_bench(args: BenchArgs) -> Result<(), CliError> {
    let lattice = io::lattice(args.lattice.lx, args.lattice.ly, args.lattice.lz)?;
    if args.repeats == 0 {
        return Err(CliError::usage("--repeats must be positive"));
    }
    if args.dists.contains(&Dist::File) {
        return Err(CliError::usage("bench supports sp, dp and lognormal"));
    }
    let fixed = Fixed::default();
    let mut rows = Vec::new();
    for &n in &args.sizes {
        for &dist in &args.dists {
            let (mut times, mut iters, mut bt) = (Vec::new(), Vec::new(), Vec::new());
            let mut failures = 0;
            for r in 0..args.repeats {
                let seed = args.rng_seed + r as u64;
                match solve_instance(&lattice, dist, n, &args.dist_params, &fixed, seed, args.eta) {
                    Ok((report, t)) => {
                        times.push(t);
                        iters.push(report.newton_iterations() as f64);
                        bt.push(report.total_backtracking() as f64);
                    }
                    Err(CliError::Usage(m)) => return Err(CliError::Usage(m)),
                    Err(e) => {
                        eprintln!(
                            "n={n} dist={} run {r} (rng seed {seed}): {e}",
                            dist_name(dist)
                        );
                        failures += 1;
                    }
                }
            }
            let mut row = vec![
                n.to_string(),
                dist_name(dist).to_string(),
                args.repeats.to_string(),
                failures.to_string(),
            ];
            for xs in [&times, &iters, &bt] {
                let (mean, median, std) = describe(xs);
                row.extend([io::num(mean), io::num(median), io::num(std)]);
            }
            rows.push(row);
        }
    }
    io::write_csv_rows(args.out.as_deref(), &BENCH_COLUMNS, &rows)
}

pub fn run_backtrack_study(args: BacktrackArgs) -> Result<(), CliError> {
    let lattice = io::lattice(args.lattice.lx, args.lattice.ly, args.lattice.lz)?;
    let fixed = fixed_inputs(&args.dist_params)?;
    let n = args
        .n
        .or(fixed.targets.as_ref().map(Vec::len))
        .or(fixed.seeds.as_ref().map(Vec::len))
        .ok_or_else(|| CliError::usage("--n is required"))?;
    let mut rows = Vec::new();
    let mut last_backtrack = Vec::new();
    let mut failures = 0;
    for r in 0..args.repeats {
        let seed = args.rng_seed + r as u64;
        match solve_instance(
            &lattice,
            args.dist,
            n,
            &args.dist_params,
            &fixed,
            seed,
            args.eta,
        ) {
            Ok((report, _)) => {
                for it in &report.iterations {
                    rows.push(vec![
                        r.to_string(),
                        seed.to_string(),
                        it.iteration.to_string(),
                        it.backtracking.to_string(),
                        io::num(it.error),
                        io::num(it.pct_error),
                    ]);
                }
                let last = report
                    .iterations
                    .iter()
                    .filter(|it| it.backtracking > 0)
                    .map(|it| it.iteration)
                    .max()
                    .unwrap_or(0);
                last_backtrack.push(last);
            }
            Err(CliError::Usage(m)) => return Err(CliError::Usage(m)),
            Err(e) => {
                eprintln!("run {r} (rng seed {seed}): {e}");
                failures += 1;
            }
        }
    }
    io::write_csv_rows(args.out.as_deref(), &BACKTRACK_COLUMNS, &rows)?;
    eprintln!(
        "last iteration with backtracking per run: {last_backtrack:?}; overall max {}; {failures} failed runs",
        last_backtrack.iter().max().copied().unwrap_or(0)
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn describe_small_samples() {
        assert_eq!(describe(&[2.0]), (2.0, 2.0, 0.0));
        let (mean, median, std) = describe(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!((mean, median), (4.0, 2.5));
        assert!((std - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(describe(&[]).0.is_nan());
    }
}
