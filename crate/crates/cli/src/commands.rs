use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tsdsim::dataset::{
    generate_database_with, read_database, write_database, write_matrix, DeflectionMatrix, GenerateOptions,
    MonotonicityGate, SlopeDatabase, SLOPE_HEADER,
};
use tsdsim::inverse::{
    backcalculate_batch, backcalculate_lookup, read_readings, write_results, InverseProblem, InverseSolution, Reading,
};
use tsdsim::tsd::{basin_indices, differentiate, PipelineOutput, TsdSimulator};

use crate::config::RunConfig;
use crate::svg::{Chart, Series};
use crate::validate::run_suite;
use crate::{CliError, InvertMethod};

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn check_modulus(e: f64) -> Result<(), CliError> {
    if e.is_finite() && e > 0.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("--modulus: {e} MPa violates the modulus positivity invariant (E > 0)")))
    }
}

fn simulate(cfg: &RunConfig, e_mpa: f64) -> Result<PipelineOutput<f64>, CliError> {
    check_modulus(e_mpa)?;
    let s = cfg.structure()?.with_modulus(cfg.sweep_layer()?, e_mpa * 1e6)?;
    let sim = TsdSimulator::new(&s, &cfg.tsd()?, cfg.numerics.tolerance)?;
    Ok(sim.run()?)
}

fn profile_charts(dir: &Path, out: &PipelineOutput<f64>, e_mpa: f64) -> Result<Vec<PathBuf>, CliError> {
    let label = DeflectionMatrix::label(e_mpa);
    let raw = differentiate(&out.profile)?;
    let x = &out.profile.offsets;
    let deflection = Chart {
        title: &format!("Surface deflection, {e_mpa} MPa"),
        x_label: "offset x (m)",
        y_label: "deflection (µm)",
        series: vec![Series {
            label: "deflection",
            points: x.iter().copied().zip(out.profile.deflections.iter().copied()).collect(),
        }],
    };
    let slope = Chart {
        title: &format!("Deflection slope, {e_mpa} MPa"),
        x_label: "offset x (m)",
        y_label: "slope (µm/m)",
        series: vec![
            Series {
                label: "raw",
                points: x.iter().copied().zip(raw.slopes.iter().copied()).collect(),
            },
            Series {
                label: "corrected",
                points: x.iter().copied().zip(out.slope.slopes.iter().copied()).collect(),
            },
        ],
    };
    let paths = vec![dir.join(format!("deflection_{label}.svg")), dir.join(format!("slope_{label}.svg"))];
    write_text(&paths[0], &deflection.render())?;
    write_text(&paths[1], &slope.render())?;
    Ok(paths)
}

pub fn respond(cfg: &RunConfig, e_mpa: f64, svg: bool) -> Result<(), CliError> {
    let out = simulate(cfg, e_mpa)?;
    let dir = out_dir(cfg)?;
    let label = DeflectionMatrix::label(e_mpa);
    let raw = differentiate(&out.profile)?;

    let profile_path = dir.join(format!("profile_{label}.csv"));
    let mut w = csv::Writer::from_path(&profile_path).map_err(tsdsim::Error::from)?;
    w.write_record(["x_m", "deflection_um"]).map_err(tsdsim::Error::from)?;
    for (x, d) in out.profile.offsets.iter().zip(&out.profile.deflections) {
        w.write_record([x.to_string(), d.to_string()]).map_err(tsdsim::Error::from)?;
    }
    w.flush().map_err(tsdsim::Error::from)?;

    let slope_path = dir.join(format!("slope_{label}.csv"));
    let mut w = csv::Writer::from_path(&slope_path).map_err(tsdsim::Error::from)?;
    w.write_record(["x_m", "slope_um_per_m", "raw_slope_um_per_m"]).map_err(tsdsim::Error::from)?;
    for ((x, s), r) in out.slope.offsets.iter().zip(&out.slope.slopes).zip(&raw.slopes) {
        w.write_record([x.to_string(), s.to_string(), r.to_string()]).map_err(tsdsim::Error::from)?;
    }
    w.flush().map_err(tsdsim::Error::from)?;

    let basin = basin_indices(&out.profile)?;
    println!("E = {e_mpa} MPa, structure {}", out.profile.structure_id);
    for (k, s) in out.reading.slopes.iter().enumerate() {
        println!("  Sn{} = {s:.4} um/m", k + 1);
    }
    println!("  Sn8 raw = {:.4} um/m", out.reading.sn8_raw);
    println!("  SCI = {:.4} um, BDI = {:.4} um", basin.sci, basin.bdi);
    println!("wrote {} and {}", profile_path.display(), slope_path.display());
    if svg {
        for p in profile_charts(dir, &out, e_mpa)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

pub fn generate(cfg: &RunConfig, allow_non_monotone: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = cfg.sweep()?;
    let opts = GenerateOptions {
        tolerance: cfg.numerics.tolerance,
        gate: MonotonicityGate::Record,
    };
    let (db, matrix) = generate_database_with(&spec, &cfg.tsd()?, opts)?;
    let dir = out_dir(cfg)?;
    let (slopes, deflections) = (dir.join("slopes.csv"), dir.join("deflections.csv"));
    write_database(&db, &slopes)?;
    write_matrix(&matrix, &deflections)?;
    println!(
        "generated {} rows x {} offsets in {:.1} s: {}, {}",
        db.len(),
        matrix.offsets.len(),
        start.elapsed().as_secs_f64(),
        slopes.display(),
        deflections.display()
    );
    if let Some(first) = db.manifest.non_monotone.first() {
        let list: Vec<String> = db
            .manifest
            .non_monotone
            .iter()
            .map(|v| format!("{} near {} MPa", v.column, v.modulus_mpa))
            .collect();
        let msg = format!("sensor columns not strictly monotone in the swept modulus: {}", list.join(", "));
        if !allow_non_monotone {
            return Err(CliError::Numerical(format!(
                "{msg} (files written; first: {}; pass --allow-non-monotone to accept)",
                first.column
            )));
        }
        eprintln!("warning: {msg}");
    }
    Ok(())
}

fn load_readings(path: &Path) -> Result<Vec<Reading>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let first = text.lines().find(|l| !l.starts_with('#'));
    if first.is_some_and(|l| l.starts_with(SLOPE_HEADER[0])) {
        let db = read_database(path)?;
        return Ok(db
            .rows
            .iter()
            .map(|r| Reading {
                id: DeflectionMatrix::label(r.modulus_mpa),
                slopes: r.slopes,
            })
            .collect());
    }
    Ok(read_readings(path)?)
}

fn lookup_database(cfg: &RunConfig, path: Option<&Path>) -> Result<SlopeDatabase, CliError> {
    if let Some(p) = path {
        return Ok(read_database(p)?);
    }
    eprintln!("no --database given; generating one over the configured sweep");
    let opts = GenerateOptions {
        tolerance: cfg.numerics.tolerance,
        gate: MonotonicityGate::Record,
    };
    Ok(generate_database_with(&cfg.sweep()?, &cfg.tsd()?, opts)?.0)
}

pub fn invert(cfg: &RunConfig, readings: &Path, method: InvertMethod, database: Option<&Path>) -> Result<(), CliError> {
    let start = Instant::now();
    let readings = load_readings(readings)?;
    let solutions: Vec<InverseSolution> = match method {
        InvertMethod::Brent => {
            let model = cfg.forward_model()?;
            let values = cfg.sweep()?.values_mpa;
            let bounds = (values[0], values[values.len() - 1]);
            if !(bounds.1 > bounds.0) {
                return Err(CliError::Input("sweep: inversion bounds need at least two distinct moduli".into()));
            }
            let problems: Vec<InverseProblem> = readings
                .iter()
                .map(|r| InverseProblem {
                    model: model.clone(),
                    bounds,
                    ..InverseProblem::new(r.slopes)
                })
                .collect();
            backcalculate_batch(&problems).into_iter().collect::<tsdsim::Result<_>>()?
        }
        InvertMethod::Lookup => {
            let db = lookup_database(cfg, database)?;
            readings
                .iter()
                .map(|r| backcalculate_lookup(&r.slopes, &db, &[1.0; 7]))
                .collect::<tsdsim::Result<_>>()?
        }
    };
    let dir = out_dir(cfg)?;
    let path = dir.join("results.csv");
    let rows: Vec<(String, InverseSolution)> = readings.into_iter().map(|r| r.id).zip(solutions).collect();
    write_results(&path, &rows)?;
    for (id, s) in &rows {
        for w in &s.warnings {
            eprintln!("warning: {id}: {w}");
        }
    }
    println!("inverted {} readings in {:.1} s: {}", rows.len(), start.elapsed().as_secs_f64(), path.display());
    Ok(())
}

pub fn validate(cfg: &RunConfig, corrupt_kernel: bool) -> Result<(), CliError> {
    let scale = if corrupt_kernel { 1.001 } else { 1.0 };
    let results = run_suite(cfg.numerics.tolerance, scale)?;
    let mut failed = Vec::new();
    for r in &results {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!("{status} {:<18} error {:.3e} (bound {:.1e})", r.name, r.error, r.bound);
        if !r.passed() {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        println!("all {} oracles passed", results.len());
        Ok(())
    } else {
        Err(CliError::Validation(format!("oracle failures: {}", failed.join(", "))))
    }
}

pub fn plot(cfg: &RunConfig, database: Option<&Path>, modulus: Option<f64>) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let mut written = Vec::new();
    if let Some(e) = modulus {
        let out = simulate(cfg, e)?;
        written.extend(profile_charts(dir, &out, e)?);
    }
    if let Some(path) = database {
        let db = read_database(path)?;
        let moduli = db.moduli();
        for k in 0..7 {
            let name = format!("Sn{}", k + 1);
            let chart = Chart {
                title: &format!("{name} corrected slope vs subgrade modulus"),
                x_label: "M_R (MPa)",
                y_label: "slope (µm/m)",
                series: vec![Series {
                    label: &name,
                    points: moduli.iter().copied().zip(db.column(k)).collect(),
                }],
            };
            let p = dir.join(format!("{}_vs_modulus.svg", name.to_lowercase()));
            write_text(&p, &chart.render())?;
            written.push(p);
        }
        let chart = Chart {
            title: "Raw slope at the reference sensor",
            x_label: "M_R (MPa)",
            y_label: "Sn8 raw slope (µm/m)",
            series: vec![Series {
                label: "Sn8 raw",
                points: db.rows.iter().map(|r| (r.modulus_mpa, r.sn8_raw)).collect(),
            }],
        };
        let p = dir.join("sn8_raw_vs_modulus.svg");
        write_text(&p, &chart.render())?;
        written.push(p);
    }
    if written.is_empty() {
        return Err(CliError::Input("plot: give --database PATH and/or --modulus E".into()));
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
