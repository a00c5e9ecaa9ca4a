//! Command line driver: mesh diagnostics, parameter checks, single solves,
//! convergence studies and the inf-sup probe.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use galbrun::error::Error;
use galbrun::harness::{
    emit_report, render_report, run_convergence, run_infsup, run_single, ReportFormat, StudyConfig,
};
use galbrun::mesh::{AxisBox, Mesh};
use galbrun::physics::{
    estimate_cpi_sharp, mach_report, mass_conservation_check, parameter_preset,
};

#[derive(Parser)]
#[command(
    name = "galbrun",
    version,
    about = "H(div)-DG discretization of the damped time-harmonic Galbrun equation"
)]
struct Cli {
    /// Study configuration file (flat key = value format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Treat a violated Mach smallness condition as a hard error.
    #[arg(long, global = true)]
    strict_mach: bool,

    /// Report format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Write the report to this path instead of stdout only.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print mesh statistics for a structured cube mesh.
    MeshInfo {
        /// Subdivisions per axis.
        #[arg(long)]
        n: Option<usize>,
        /// Write the line-oriented ASCII mesh dump to this path.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Validate a coefficient preset and print the Mach diagnostics.
    CheckParams {
        /// Also run the randomized interpolation-stability estimate.
        #[arg(long)]
        estimate_cpi: bool,
    },
    /// Assemble and solve a single level, reporting the error row.
    Solve {
        #[arg(long)]
        n: Option<usize>,
        /// Export the assembled system in coordinate text format.
        #[arg(long)]
        export_matrix: Option<PathBuf>,
    },
    /// Run the configured convergence study and report the fitted rate.
    Convergence,
    /// Dense inf-sup probe on a coarse level.
    Infsup {
        #[arg(long)]
        n: Option<usize>,
        /// Largest admissible free-DOF count for the dense probe.
        #[arg(long, default_value_t = 4000)]
        cap: usize,
    },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::MachRefusal(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load_config(cli: &Cli) -> Result<StudyConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            StudyConfig::parse(&text)?
        }
        None => StudyConfig::default(),
    };
    if cli.strict_mach {
        cfg.strict_mach = true;
    }
    if let Some(fmt) = &cli.format {
        cfg.format = fmt.parse()?;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::MeshInfo { n, dump } => {
            let n = n.unwrap_or_else(|| cfg.levels.first().copied().unwrap_or(1));
            let mesh: Mesh<f64> = Mesh::build_structured_cube(n, AxisBox::unit())?;
            println!("n = {n}");
            println!("vertices = {}", mesh.vertices.len());
            println!("tets = {}", mesh.tets.len());
            println!("faces = {}", mesh.faces.len());
            println!("boundary_faces = {}", mesh.num_boundary_faces());
            println!("interior_faces = {}", mesh.num_interior_faces());
            println!("h_max = {}", mesh.h_max);
            println!("shape_regularity = {}", mesh.shape_regularity());
            println!("total_volume = {}", mesh.total_volume());
            if let Some(path) = dump {
                std::fs::write(path, mesh.dump_ascii())
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                println!("dump = {}", path.display());
            }
            Ok(())
        }
        Command::CheckParams { estimate_cpi } => {
            let params = parameter_preset::<f64>(&cfg.preset)?;
            params.validate(cfg.mach_grid.max(8))?;
            let mut report = mach_report(&params, cfg.cpi_sharp, cfg.mach_grid)?;
            if *estimate_cpi {
                let mesh = std::sync::Arc::new(Mesh::build_structured_cube(1, params.domain)?);
                let space = galbrun::felib::BdmSpace::new(mesh, cfg.k)?;
                report.cpi_heuristic = Some(estimate_cpi_sharp(&space, 8, 0x5eed));
            }
            let mass_defect = mass_conservation_check(&params, cfg.mach_grid);
            println!("preset = {}", cfg.preset);
            println!("mach_norm = {}", report.mach_norm);
            println!("c_m = {}", report.c_m);
            println!("theta = {}", report.theta);
            println!("cpi_sharp = {}", report.cpi_sharp);
            if let Some(h) = report.cpi_heuristic {
                println!("cpi_heuristic = {h} (heuristic)");
            }
            println!("threshold = {}", report.threshold);
            println!("satisfied = {}", report.satisfied);
            println!("mass_conservation_defect = {mass_defect}");
            if !report.satisfied {
                if cfg.strict_mach {
                    return Err(Error::MachRefusal(report.summary()));
                }
                eprintln!(
                    "warning: Mach smallness condition violated (|c_s^-1 b|^2 = {:e} >= {:e})",
                    report.mach_norm * report.mach_norm,
                    report.threshold
                );
            }
            Ok(())
        }
        Command::Solve { n, export_matrix } => {
            let n = n.unwrap_or_else(|| cfg.levels.first().copied().unwrap_or(1));
            warn_if_mach_violated(&cfg)?;
            if let Some(path) = export_matrix {
                galbrun::harness::export_system_matrix(&cfg, n, &path.display().to_string())?;
                eprintln!("matrix written to {}", path.display());
            }
            let (row, _mach) = run_single(&cfg, n)?;
            println!("level,h_max,ndof,dn_error,seconds");
            println!(
                "{},{},{},{},{}",
                row.level, row.h_max, row.ndof, row.dn_error, row.seconds
            );
            Ok(())
        }
        Command::Convergence => {
            warn_if_mach_violated(&cfg)?;
            match run_convergence(&cfg) {
                Ok(table) => {
                    let text = render_report(&table, cfg.format)?;
                    print!("{text}");
                    if cfg.format == ReportFormat::Csv {
                        if let Some(rate) = table.fitted_rate {
                            println!("# fitted_rate = {rate}");
                            if table.used_finest_pair {
                                println!("# rate taken from the finest pair (pre-asymptotic guard)");
                            }
                        }
                    }
                    if let Some(path) = &cfg.out {
                        emit_report(&table, cfg.format, path)?;
                        eprintln!("report written to {path}");
                    }
                    Ok(())
                }
                Err(failure) => {
                    // emit the partial table with its failure marker
                    let text = render_report(&failure.partial, cfg.format)?;
                    print!("{text}");
                    if let Some(path) = &cfg.out {
                        emit_report(&failure.partial, cfg.format, path)?;
                    }
                    Err(failure.error)
                }
            }
        }
        Command::Infsup { n, cap } => {
            let n = n.unwrap_or_else(|| cfg.levels.first().copied().unwrap_or(1));
            warn_if_mach_violated(&cfg)?;
            let (sigma_min, sigma_max, nfree) = run_infsup(&cfg, n, *cap)?;
            println!("n = {n}");
            println!("nfree = {nfree}");
            println!("sigma_min = {sigma_min}");
            println!("sigma_max = {sigma_max}");
            Ok(())
        }
    }
}

/// Print the warning-path message when the Mach condition fails and the run
/// is not strict; strict refusals surface later from the assembly gate.
fn warn_if_mach_violated(cfg: &StudyConfig) -> Result<(), Error> {
    let params = parameter_preset::<f64>(&cfg.preset)?;
    let report = mach_report(&params, cfg.cpi_sharp, cfg.mach_grid)?;
    if !report.satisfied && !cfg.strict_mach {
        eprintln!(
            "warning: Mach smallness condition violated for preset '{}' (proceeding; use --strict-mach to refuse)",
            cfg.preset
        );
    }
    Ok(())
}
