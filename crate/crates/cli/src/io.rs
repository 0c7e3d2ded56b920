use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use laguerre_rve::{FacetTag, LaguerreDiagram, Lattice, TargetMasses, Vec3};
use serde::Serialize;

use crate::error::CliError;

fn numbers(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::usage(format!("{}: not a number: {t:?}", path.display())))
        })
        .collect()
}

pub fn read_targets(path: &Path) -> Result<Vec<f64>, CliError> {
    let v = numbers(path)?;
    if v.is_empty() {
        return Err(CliError::usage(format!(
            "{}: no target volumes",
            path.display()
        )));
    }
    Ok(v)
}

pub fn read_seeds(path: &Path) -> Result<Vec<[f64; 3]>, CliError> {
    let v = numbers(path)?;
    if v.is_empty() || v.len() % 3 != 0 {
        return Err(CliError::usage(format!(
            "{}: expected x y z triples, got {} numbers",
            path.display(),
            v.len()
        )));
    }
    Ok(v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Shortest round-trip decimal, with an exponent for very small or large
/// magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[derive(Serialize)]
struct JsonFacet {
    vertices: Vec<usize>,
    /// `None` for a facet of the initial bounding box (never present in a
    /// complete diagram).
    neighbor: Option<usize>,
    shift: Option<[i32; 3]>,
    area: f64,
}

#[derive(Serialize)]
struct JsonCell {
    index: usize,
    volume: f64,
    centroid: [f64; 3],
    vertices: Vec<[f64; 3]>,
    facets: Vec<JsonFacet>,
}

#[derive(Serialize)]
struct JsonDiagram {
    lattice: [f64; 3],
    seeds: Vec<[f64; 3]>,
    weights: Vec<f64>,
    targets: Vec<f64>,
    cells: Vec<JsonCell>,
}

pub fn write_diagram_json(
    path: &Path,
    diagram: &LaguerreDiagram,
    targets: &TargetMasses,
) -> Result<(), CliError> {
    let cells = diagram
        .cells()
        .iter()
        .enumerate()
        .map(|(index, c)| JsonCell {
            index,
            volume: c.volume,
            centroid: arr(&c.centroid),
            vertices: c.polyhedron.vertices().iter().map(arr).collect(),
            facets: c
                .polyhedron
                .facets()
                .iter()
                .zip(&c.facet_areas)
                .map(|(f, &area)| {
                    let (neighbor, shift) = match f.tag {
                        FacetTag::Neighbor { seed, shift } => (Some(seed), Some(shift)),
                        FacetTag::Boundary => (None, None),
                    };
                    JsonFacet {
                        vertices: f.vertices.clone(),
                        neighbor,
                        shift,
                        area,
                    }
                })
                .collect(),
        })
        .collect();
    let doc = JsonDiagram {
        lattice: diagram.lattice().lengths(),
        seeds: diagram.positions().iter().map(arr).collect(),
        weights: diagram.weights().to_vec(),
        targets: targets.as_slice().to_vec(),
        cells,
    };
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut out, &doc)?;
    out.flush()?;
    Ok(())
}

pub const STATS_COLUMNS: [&str; 8] = [
    "grain",
    "volume",
    "target",
    "pct_error",
    "centroid_x",
    "centroid_y",
    "centroid_z",
    "faces",
];

pub fn write_stats_csv(
    path: &Path,
    diagram: &LaguerreDiagram,
    targets: &TargetMasses,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(STATS_COLUMNS)?;
    for (i, (c, m)) in diagram.cells().iter().zip(targets.as_slice()).enumerate() {
        let pct = 100.0 * (c.volume - m).abs() / m;
        w.write_record([
            i.to_string(),
            num(c.volume),
            num(*m),
            num(pct),
            num(c.centroid.x),
            num(c.centroid.y),
            num(c.centroid.z),
            c.polyhedron.facets().len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One object per cell, as unwrapped polygon soup.
pub fn write_obj(path: &Path, diagram: &LaguerreDiagram) -> Result<(), CliError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let mut base = 1;
    for (i, c) in diagram.cells().iter().enumerate() {
        writeln!(out, "o cell_{i}")?;
        for v in c.polyhedron.vertices() {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in c.polyhedron.facets() {
            write!(out, "f")?;
            for &k in &f.vertices {
                write!(out, " {}", base + k)?;
            }
            writeln!(out)?;
        }
        base += c.polyhedron.vertices().len();
    }
    out.flush()?;
    Ok(())
}

pub fn lattice(lx: f64, ly: f64, lz: f64) -> Result<Lattice, CliError> {
    Lattice::new(lx, ly, lz).map_err(CliError::usage)
}

pub fn write_csv_rows(
    out: Option<&Path>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
