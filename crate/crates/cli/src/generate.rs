use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use laguerre_rve::{
    generate_rve, RveConfig, SolverConfig, SolverReport, Vec3, VolumeDistribution, VolumeSpec,
};
use serde::{Deserialize, Serialize};

use crate::args::{Dist, DistArgs, Format, GenerateArgs};
use crate::error::CliError;
use crate::io;

/// Everything needed to rerun `generate`. Seed and target files are stored
/// by value.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct GenerateConfig {
    pub n: usize,
    pub lengths: [f64; 3],
    pub dist: Dist,
    pub dp_ratio: f64,
    pub sigma: f64,
    pub mu: Option<f64>,
    pub targets: Option<Vec<f64>>,
    pub seeds: Option<Vec<[f64; 3]>>,
    pub eta: f64,
    pub lloyd: usize,
    pub warm_start: bool,
    pub rng_seed: u64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Serialize, Deserialize, Debug, Default)]
pub struct Timings {
    pub diagram: f64,
    pub hessian: f64,
    pub linear_solve: f64,
    pub newton: f64,
    pub output: f64,
    pub total: f64,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct RoundSummary {
    pub round: usize,
    pub newton_iterations: usize,
    pub backtracking: usize,
    pub initial_pct_error: f64,
    pub final_pct_error: f64,
    /// Mean seed-to-centroid distance after the round; absent without Lloyd
    /// rounds.
    pub centroid_displacement: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
pub struct Manifest {
    pub software: Software,
    pub command: String,
    pub config: GenerateConfig,
    pub threads: usize,
    pub rounds: Vec<RoundSummary>,
    pub final_pct_error: f64,
    pub timings: Timings,
    pub outputs: Vec<PathBuf>,
}

pub fn volume_spec(
    dist: Dist,
    n: usize,
    params: &DistArgs,
    targets: Option<Vec<f64>>,
) -> Result<VolumeSpec, CliError> {
    Ok(match dist {
        Dist::Sp => VolumeSpec::single_phase(n),
        Dist::Dp => VolumeSpec::dual_phase(n, params.dp_ratio),
        Dist::Lognormal => VolumeSpec {
            n,
            distribution: VolumeDistribution::LogNormal {
                mu: params.mu,
                sigma: params.sigma,
            },
        },
        Dist::File => {
            let t = targets.ok_or_else(|| CliError::usage("--dist file needs --targets-file"))?;
            if t.len() != n {
                return Err(CliError::usage(format!(
                    "--n {n} but the targets file has {} entries",
                    t.len()
                )));
            }
            VolumeSpec::explicit(t)
        }
    })
}

fn config_from_args(args: &GenerateArgs) -> Result<GenerateConfig, CliError> {
    let p = &args.dist_params;
    let targets = p
        .targets_file
        .as_deref()
        .map(io::read_targets)
        .transpose()?;
    if targets.is_some() && args.dist != Dist::File {
        return Err(CliError::usage("--targets-file requires --dist file"));
    }
    let seeds = p.seeds_file.as_deref().map(io::read_seeds).transpose()?;
    let n = args
        .n
        .or(targets.as_ref().map(Vec::len))
        .or(seeds.as_ref().map(Vec::len))
        .ok_or_else(|| CliError::usage("--n is required"))?;
    if let Some(s) = &seeds {
        if s.len() != n {
            return Err(CliError::usage(format!(
                "--n {n} but the seeds file has {} points",
                s.len()
            )));
        }
    }
    let out = args
        .out
        .clone()
        .ok_or_else(|| CliError::usage("--out is required"))?;
    let mut formats = if args.formats.is_empty() {
        vec![Format::Json, Format::Csv]
    } else {
        args.formats.clone()
    };
    formats.dedup();
    Ok(GenerateConfig {
        n,
        lengths: [args.lattice.lx, args.lattice.ly, args.lattice.lz],
        dist: args.dist,
        dp_ratio: p.dp_ratio,
        sigma: p.sigma,
        mu: p.mu,
        targets,
        seeds,
        eta: args.eta,
        lloyd: args.lloyd,
        warm_start: args.warm_start,
        rng_seed: args.rng_seed,
        out,
        formats,
    })
}

fn config_from_manifest(path: &Path, out: Option<PathBuf>) -> Result<GenerateConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: not a manifest: {e}", path.display())))?;
    let mut cfg = manifest.config;
    if let Some(out) = out {
        cfg.out = out;
    }
    Ok(cfg)
}

fn summarize(
    reports: &[SolverReport],
    displacements: &[f64],
    first_round: usize,
) -> (Vec<RoundSummary>, Timings) {
    let mut t = Timings::default();
    let rounds = reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            for it in &r.iterations {
                t.diagram += it.timings.diagram;
                t.hessian += it.timings.hessian;
                t.linear_solve += it.timings.linear_solve;
            }
            t.newton += r.total_time;
            RoundSummary {
                round: first_round + k,
                newton_iterations: r.newton_iterations(),
                backtracking: r.total_backtracking(),
                initial_pct_error: r.initial_pct_error,
                final_pct_error: r.final_pct_error(),
                centroid_displacement: displacements.get(k).copied(),
            }
        })
        .collect();
    (rounds, t)
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = match &args.from_manifest {
        Some(path) => config_from_manifest(path, args.out.clone())?,
        None => config_from_args(&args)?,
    };
    let [lx, ly, lz] = cfg.lengths;
    let lattice = io::lattice(lx, ly, lz)?;
    let params = DistArgs {
        dp_ratio: cfg.dp_ratio,
        sigma: cfg.sigma,
        mu: cfg.mu,
        targets_file: None,
        seeds_file: None,
    };
    let spec = volume_spec(cfg.dist, cfg.n, &params, cfg.targets.clone())?;
    let rve_cfg = RveConfig {
        lloyd_steps: cfg.lloyd,
        rng_seed: cfg.rng_seed,
        solver: SolverConfig::with_eta(cfg.eta),
        warm_start: cfg.warm_start,
        initial_seeds: cfg
            .seeds
            .as_ref()
            .map(|s| s.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()),
    };
    let result = generate_rve(&spec, &lattice, &rve_cfg)?;

    let output_start = Instant::now();
    let mut outputs = Vec::new();
    for f in &cfg.formats {
        let path = match f {
            Format::Json => {
                let p = io::with_suffix(&cfg.out, ".diagram.json");
                io::write_diagram_json(&p, &result.diagram, &result.targets)?;
                p
            }
            Format::Csv => {
                let p = io::with_suffix(&cfg.out, ".stats.csv");
                io::write_stats_csv(&p, &result.diagram, &result.targets)?;
                p
            }
            Format::Obj => {
                let p = io::with_suffix(&cfg.out, ".obj");
                io::write_obj(&p, &result.diagram)?;
                p
            }
        };
        outputs.push(path);
    }

    let first_round = if cfg.lloyd == 0 { 0 } else { 1 };
    let (rounds, mut timings) =
        summarize(&result.reports, &result.lloyd_displacements, first_round);
    let final_pct_error = result.final_pct_error();
    let manifest_path = io::with_suffix(&cfg.out, ".manifest.json");
    outputs.push(manifest_path.clone());
    timings.output = output_start.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();
    let manifest = Manifest {
        software: Software {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        command: "generate".into(),
        config: cfg,
        threads: rayon::current_num_threads(),
        rounds,
        final_pct_error,
        timings,
        outputs,
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    eprintln!(
        "generated {} grains: max pct error {:.4} after {} Newton iterations, {:.2}s",
        manifest.config.n,
        final_pct_error,
        manifest
            .rounds
            .iter()
            .map(|r| r.newton_iterations)
            .sum::<usize>(),
        manifest.timings.total
    );
    Ok(())
}
