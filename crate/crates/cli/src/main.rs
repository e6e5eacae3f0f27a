//! `tpm`: position kinematics, validation, topology and workspace tools.

mod render;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use tpm_core::analysis::{
    default_step, implicit_jacobian, numeric_jacobian, singularity_flags, singularity_margins,
    DEFAULT_FLAG_TOL,
};
use tpm_core::fk::{solve_branch, FkBranch, FkError};
use tpm_core::model::{chain_points, closure_residuals, InternalConfig};
use tpm_core::reference::run_table_audit;
use tpm_core::topology::{analyze, MechanismTopology, TopologyError};
use tpm_core::validate::{run_validation, AnalyticSolver, PerturbedSolver, Solver, ValidationConfig};
use tpm_core::workspace::{
    singularity_locus, sweep_inputs, sweep_poses, write_csv, write_json, write_locus_csv, Axis,
    SweepGrid, SweepKind,
};
use tpm_core::{direct_kinematics, inverse_kinematics, ActuatorInput, MechanismParams, PlatformPose};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NO_SOLUTION: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Parser)]
#[command(name = "tpm", version, about = "Kinematics of a 3-translation parallel mechanism")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Parameter file (flat JSON object a, b, d, l1..l8 in mm). Defaults to
    /// the reference prototype.
    #[arg(short, long)]
    params: Option<PathBuf>,
    #[arg(short, long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Direct kinematics: all assemblies for slider positions y_A1 y_A2 y_A3.
    #[command(allow_negative_numbers = true)]
    Fk {
        q1: f64,
        q2: f64,
        q3: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Inverse kinematics: all slider triples for a platform position.
    #[command(allow_negative_numbers = true)]
    Ik {
        x: f64,
        y: f64,
        z: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Randomized oracle equivalence and round-trip checks.
    Validate {
        /// Oracle samples per direction.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Round-trip samples per direction; defaults to `samples`.
        #[arg(long)]
        round_trips: Option<usize>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Matching tolerance, mm.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Shift every direct solution by this much along x (harness self-test).
        #[arg(long, hide = true)]
        perturb: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Audit of the published reference tables.
    Tables {
        #[command(flatten)]
        common: Common,
    },
    /// POC sets, mobility, constraint and coupling degree of a topology file.
    Topology {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Grid sweep over inputs or poses, written as CSV or JSON.
    #[command(allow_negative_numbers = true)]
    Workspace {
        #[arg(long, value_enum, default_value_t = Kind::Inputs)]
        kind: Kind,
        /// Axis specs `min:max:count` or a fixed value, in q1 q2 q3 (or x y z)
        /// order. Omitted axes use the default reach range.
        #[arg(long = "axis", num_args = 3, allow_hyphen_values = true, value_names = ["A1", "A2", "A3"])]
        axes: Option<Vec<String>>,
        /// Nodes per axis for default ranges.
        #[arg(long, default_value_t = 21)]
        count: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the singularity locus of a 2-D slice to this CSV file.
        #[arg(long)]
        locus: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Residuals, singularity flags and Jacobians of one configuration.
    #[command(allow_negative_numbers = true)]
    Check {
        q1: f64,
        q2: f64,
        q3: f64,
        /// Assembly mode such as `++-`; solves that branch.
        #[arg(long, conflicts_with_all = ["gamma", "alpha", "beta"])]
        branch: Option<String>,
        /// Passive angles; radians, or degrees with a `deg` suffix.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_angle, requires_all = ["alpha", "beta"])]
        gamma: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_angle, requires_all = ["gamma", "beta"])]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_angle, requires_all = ["gamma", "alpha"])]
        beta: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_FLAG_TOL)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Inputs,
    Poses,
}

fn parse_angle(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (num, deg) = match t.strip_suffix("deg") {
        Some(n) => (n, true),
        None => (t.strip_suffix("rad").unwrap_or(t), false),
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("bad angle `{text}`"))?;
    if !v.is_finite() {
        return Err(format!("bad angle `{text}`"));
    }
    Ok(if deg { v.to_radians() } else { v })
}

fn load_params(path: Option<&Path>) -> Result<MechanismParams> {
    match path {
        None => Ok(MechanismParams::reference()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            MechanismParams::from_json_str(&text).with_context(|| format!("parameters in {}", p.display()))
        }
    }
}

fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fk { q1, q2, q3, common } => {
            let p = load_params(common.params.as_deref())?;
            let q = ActuatorInput::new(q1, q2, q3);
            match direct_kinematics(&q, &p) {
                Ok(sols) if !sols.is_empty() => {
                    emit(&render::fk(&q, &sols, &p, common.format))?;
                    Ok(EXIT_OK)
                }
                Ok(_) => {
                    eprintln!("no real assembly");
                    Ok(EXIT_NO_SOLUTION)
                }
                Err(FkError::SelfMotion) => {
                    eprintln!("self-motion: y_A1 - y_A2 = l3, loop 1 is a parallelogram");
                    Ok(EXIT_DEGENERATE)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(EXIT_NO_SOLUTION)
                }
            }
        }
        Command::Ik { x, y, z, common } => {
            let p = load_params(common.params.as_deref())?;
            let pose = PlatformPose::new(x, y, z);
            match inverse_kinematics(&pose, &p) {
                Ok(sols) => {
                    emit(&render::ik(&pose, &sols, common.format))?;
                    Ok(EXIT_OK)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(EXIT_NO_SOLUTION)
                }
            }
        }
        Command::Validate {
            samples,
            round_trips,
            seed,
            tol,
            perturb,
            common,
        } => {
            let p = load_params(common.params.as_deref())?;
            if !(tol > 0.0) {
                bail!("tolerance must be positive");
            }
            let mut cfg = ValidationConfig::new(samples, seed);
            cfg.round_trip_samples = round_trips.unwrap_or(samples);
            cfg.tol = tol;
            let perturbed;
            let solver: &dyn Solver = match perturb {
                Some(offset) => {
                    perturbed = PerturbedSolver { offset };
                    &perturbed
                }
                None => &AnalyticSolver,
            };
            let report = run_validation(solver, &p, &cfg);
            emit(&render::validation(&report, common.format))?;
            Ok(if report.all_passed() { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Tables { common } => {
            let p = load_params(common.params.as_deref())?;
            let audit = run_table_audit(&p).context("reference inputs")?;
            emit(&render::tables(&audit, common.format))?;
            Ok(if audit.passed() { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Topology { file, common } => {
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let topo = MechanismTopology::from_toml_str(&text)?;
            match analyze(&topo) {
                Ok(report) => {
                    emit(&render::topology(&report, common.format))?;
                    Ok(EXIT_OK)
                }
                Err(e @ TopologyError::NotAnAKC(_)) => {
                    eprintln!("{e}");
                    Ok(EXIT_VALIDATION)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Workspace {
            kind,
            axes,
            count,
            out,
            locus,
            common,
        } => {
            let p = load_params(common.params.as_deref())?;
            let kind = match kind {
                Kind::Inputs => SweepKind::Inputs,
                Kind::Poses => SweepKind::Poses,
            };
            let defaults = match kind {
                SweepKind::Inputs => SweepGrid::default_inputs(&p, count)?,
                SweepKind::Poses => SweepGrid::default_poses(&p, count)?,
            };
            let grid = match axes {
                None => defaults,
                Some(specs) => {
                    let mut a = defaults.axes;
                    for (k, s) in specs.iter().enumerate() {
                        if s != "-" {
                            a[k] = Axis::parse(s)?;
                        }
                    }
                    SweepGrid::new(a)?
                }
            };
            let records = match kind {
                SweepKind::Inputs => sweep_inputs(&p, &grid),
                SweepKind::Poses => sweep_poses(&p, &grid),
            };
            let mut buf = Vec::new();
            match common.format {
                Format::Json => write_json(&records, &mut buf)?,
                Format::Csv | Format::Text => write_csv(&records, &mut buf)?,
            }
            match &out {
                Some(path) => fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?,
                None => io::stdout().lock().write_all(&buf)?,
            }
            if let Some(path) = locus {
                let points = singularity_locus(kind, &p, &grid)?;
                let mut lbuf = Vec::new();
                write_locus_csv(&points, &mut lbuf)?;
                fs::write(&path, lbuf).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("{} locus points written to {}", points.len(), path.display());
            }
            Ok(EXIT_OK)
        }
        Command::Check {
            q1,
            q2,
            q3,
            branch,
            gamma,
            alpha,
            beta,
            tol,
            common,
        } => {
            let p = load_params(common.params.as_deref())?;
            let q = ActuatorInput::new(q1, q2, q3);
            let (cfg, code) = match (branch, gamma, alpha, beta) {
                (Some(code), ..) => {
                    let b = FkBranch::parse(&code).with_context(|| format!("bad branch code `{code}`"))?;
                    match solve_branch(&q, b, &p) {
                        Ok(Some(s)) => (s.cfg, Some(b)),
                        Ok(None) => {
                            eprintln!("branch {b} does not exist for these inputs");
                            return Ok(EXIT_NO_SOLUTION);
                        }
                        Err(FkError::SelfMotion) => {
                            eprintln!("self-motion");
                            return Ok(EXIT_DEGENERATE);
                        }
                        Err(e) => {
                            eprintln!("{e}");
                            return Ok(EXIT_NO_SOLUTION);
                        }
                    }
                }
                (None, Some(g), Some(a), Some(b)) => (InternalConfig::new(g, a, b, &p), None),
                _ => bail!("give either --branch or all of --gamma --alpha --beta"),
            };
            let points = chain_points(&q, &cfg, &p);
            let residuals = closure_residuals(&q, &cfg, &p);
            let flags = singularity_flags(&cfg, &points, &p, tol);
            let margins = singularity_margins(&q, &p).ok();
            let implicit = implicit_jacobian(&q, &cfg, &p).ok();
            let numeric = code.and_then(|b| numeric_jacobian(&q, b, &p, default_step(&p)).ok());
            emit(&render::check(
                &render::CheckData {
                    input: q,
                    cfg,
                    branch: code,
                    pose: points.pose(),
                    residuals,
                    flags,
                    margins,
                    implicit,
                    numeric,
                },
                &p,
                common.format,
            ))?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert!((parse_angle("90deg").unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert_eq!(parse_angle("0.5rad").unwrap(), 0.5);
        assert!(parse_angle("x").is_err());
        assert!(parse_angle("infdeg").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
