use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dirac_bvp::harness::{generate_path, generate_periodic_path, generate_structure, run_suite, write_report, RunReport, ScenarioConfig, Suite};
use dirac_bvp::heat::{closed_form_lim, halfline_heat_trace_with_error, CutoffFunction, TGrid};
use dirac_bvp::interval::verify_s7;
use dirac_bvp::invariants::PathRecord;
use dirac_bvp::structure::StructureRecord;
use dirac_bvp::{aps_projection, is_wellposed, DiracStructure, Error, OrthoProjection, Result};

#[derive(Parser, Debug)]
#[command(name = "dirac-bvp", version, about = "Boundary-value checks for Dirac-type model operators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Tolerance for exact identities.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a structure and optionally a boundary projection.
    CheckStructure {
        #[arg(long)]
        structure: PathBuf,
        /// Boundary projection; the APS projection is reported when omitted.
        #[arg(long)]
        p: Option<PathBuf>,
    },
    /// Interval index with every constituent of the index formula.
    IndexInterval {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
    },
    /// Half-line heat trace samples as CSV (t, value, est_error, provenance).
    HeatTrace {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        p: Option<PathBuf>,
        /// Insert the grading into the trace.
        #[arg(long)]
        omega: bool,
        #[arg(long, default_value_t = 1.0)]
        flat: f64,
        #[arg(long, default_value_t = 2.0)]
        support: f64,
        #[arg(long, default_value_t = 0.5)]
        t0: f64,
        #[arg(long, default_value_t = 0.65)]
        rho: f64,
        #[arg(long, default_value_t = 14)]
        count: usize,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Emit a seeded structure or path as JSON.
    Generate {
        #[arg(value_enum)]
        kind: GenerateKind,
        #[arg(long, default_value_t = 1)]
        dim_plus: usize,
        #[arg(long, default_value_t = 1)]
        dim_minus: usize,
        #[arg(long, default_value_t = 0)]
        kernel_dim: usize,
        #[arg(long)]
        with_omega: bool,
        #[arg(long, default_value_t = 3)]
        terms: usize,
        #[arg(long)]
        plateau: Option<f64>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum GenerateKind {
    Structure,
    Path,
    PeriodicPath,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_structure(path: &Path, tol: Option<f64>) -> Result<DiracStructure> {
    let mut rec: StructureRecord = read_json(path)?;
    if tol.is_some() {
        rec.tol = tol;
    }
    rec.to_structure()
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("report: {e}")))?;
    match out {
        Some(p) => fs::write(p, text + "\n")?,
        None => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            if let Err(e) = writeln!(std::io::stdout(), "{text}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StructureSummary {
    dim: usize,
    dim_plus: usize,
    dim_minus: usize,
    kernel_dim: usize,
    kernel_signature: i64,
    ind_a_plus: i64,
    graded: bool,
    residuals: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aps_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aps_error: Option<String>,
    wellposed: Option<dirac_bvp::structure::WellPosedness>,
}

fn run(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    let out = g.out.as_deref();
    match &cli.command {
        Command::CheckStructure { structure, p } => {
            let s = load_structure(structure, g.tol)?;
            let split = s.gamma_split()?;
            let aps = aps_projection(&s);
            let p = match p {
                Some(path) => Some(OrthoProjection::from_record(&read_json(path)?)?),
                None => aps.as_ref().ok().cloned(),
            };
            let wellposed = p.as_ref().map(|p| is_wellposed(p, &s)).transpose()?;
            let summary = StructureSummary {
                dim: s.dim(),
                dim_plus: split.h_plus.ncols(),
                dim_minus: split.h_minus.ncols(),
                kernel_dim: s.spectral()?.kernel_dim(),
                kernel_signature: s.kernel_signature()?,
                ind_a_plus: s.ind_a_plus(),
                graded: s.omega().is_some(),
                residuals: s.residuals().clone(),
                aps_rank: aps.as_ref().ok().map(|p| p.rank()),
                aps_error: aps.as_ref().err().map(|e| e.to_string()),
                wellposed: wellposed.clone(),
            };
            emit(&summary, out)?;
            Ok(wellposed.is_none_or(|w| w.is_wellposed()))
        }
        Command::IndexInterval { path, p, q } => {
            let rec: PathRecord = read_json(path)?;
            let path = rec.to_path()?;
            let p = OrthoProjection::from_record(&read_json(p)?)?;
            let q = OrthoProjection::from_record(&read_json(q)?)?;
            let report = verify_s7(&path, &p, &q, g.tol.unwrap_or(1e-10), None)?;
            emit(&report, out)?;
            Ok(report.line1_holds && report.line2_holds)
        }
        Command::HeatTrace { structure, p, omega, flat, support, t0, rho, count } => {
            let s = load_structure(structure, g.tol)?;
            let p = match p {
                Some(path) => OrthoProjection::from_record(&read_json(path)?)?,
                None => aps_projection(&s)?,
            };
            let phi = CutoffFunction::smooth_bump(*flat, *support)?;
            let grid = TGrid::new(*t0, *rho, *count)?;
            let lim = closed_form_lim(&s, &p, *omega)?;
            let sink: Box<dyn Write> = match out {
                Some(path) => Box::new(fs::File::create(path)?),
                None => Box::new(std::io::stdout()),
            };
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(["t", "value", "est_error", "provenance"])?;
            for t in grid.values() {
                let (v, e) = halfline_heat_trace_with_error(&s, &p, &phi, *omega, t)?;
                w.write_record([t.to_string(), v.to_string(), format!("{e:e}"), "exact-block".to_string()])?;
            }
            w.flush()?;
            eprintln!("closed-form limit: {lim}");
            Ok(true)
        }
        Command::Verify { suite, instances } => {
            let mut config = match (&g.config, suite) {
                (Some(path), _) => ScenarioConfig::load(path)?,
                (None, Some(name)) => ScenarioConfig::new(Suite::parse(name)?, 0),
                (None, None) => return Err(Error::Config("verify: either --suite or --config is required".into())),
            };
            if let Some(name) = suite {
                config.suite = Suite::parse(name)?.name().to_string();
            }
            if let Some(seed) = g.seed {
                config.seed = seed;
            }
            if g.dim.is_some() {
                config.dim = g.dim;
            }
            if instances.is_some() {
                config.instances = *instances;
            }
            if let Some(tol) = g.tol {
                for name in ["structure", "aps", "propagator"] {
                    config.tolerances.insert(name.to_string(), tol);
                }
            }
            if g.workers.is_some() {
                config.workers = g.workers;
            }
            if out.is_some() {
                config.output = None;
            }
            config.validate()?;
            let report = run_suite(&config)?;
            if let Some(path) = out {
                write_report(&report, path)?;
            } else if config.output.is_none() {
                emit(&report, None)?;
            }
            print_summary(&report);
            Ok(report.passed)
        }
        Command::Generate { kind, dim_plus, dim_minus, kernel_dim, with_omega, terms, plateau } => {
            let seed = g.seed.unwrap_or(0);
            match kind {
                GenerateKind::Structure => {
                    let s = generate_structure(seed, *dim_plus, *dim_minus, *kernel_dim, *with_omega)?;
                    emit(&s.record(), out)?;
                }
                GenerateKind::Path => emit(&generate_path(seed, g.dim.unwrap_or(2), *terms, *plateau)?.record(), out)?,
                GenerateKind::PeriodicPath => emit(&generate_periodic_path(seed, g.dim.unwrap_or(2), *terms)?.record(), out)?,
            }
            Ok(true)
        }
    }
}

fn print_summary(report: &RunReport) {
    let total = report.instances.len();
    let passed = report.instances.iter().filter(|i| i.passed()).count();
    eprintln!("{}: {passed}/{total} instances passed, hash {}", report.config.suite, report.hash);
    for id in &report.failing_instances {
        if let Some(i) = report.instances.iter().find(|i| i.id == *id) {
            eprintln!("  failing instance {id} (seed {}): {}", i.seed, i.label);
        }
    }
}
