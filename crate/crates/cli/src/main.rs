use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nls_cli::{parse_scenario, preflight, run_path};
use nls_core::functionals::spectral_tail;
use nls_core::Field;

/// Scenario runner for the semiclassical mass-critical NLS toolkit.
#[derive(Parser)]
#[command(name = "nls", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; exit 0 pass, 2 fail, 3 inconclusive, 1 error.
    Run {
        scenario: PathBuf,
        /// Output directory (overrides the scenario's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a scenario and run the resolution preflight without evolving.
    Validate { scenario: PathBuf },
    /// Print the header and basic norms of a field file.
    FieldInfo { field: PathBuf },
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("NLS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("NLS_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match cli.command {
        Command::Run { scenario, out } => match run_path(&scenario, out.as_deref()) {
            Ok(o) => {
                println!("scenario {} ({})", o.scenario, o.kind);
                println!("label {}", o.label);
                for f in &o.failures {
                    println!("failed {f}");
                }
                println!("status {}", o.status.as_str());
                println!("output {}", o.output.display());
                println!("manifest {}", o.manifest.digest());
                ExitCode::from(o.status.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Validate { scenario } => match parse_scenario(&scenario).and_then(|s| preflight(&s).map(|_| s)) {
            Ok(s) => {
                println!("valid {} ({})", s.name, s.kind);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::FieldInfo { field } => match Field::load(&field) {
            Ok(f) => {
                let g = f.grid();
                let u = f.to_position();
                println!("dim {}", g.dim());
                println!("points {}", g.points_per_axis());
                println!("half_width {:e}", g.half_width());
                println!("dx {:e}", g.dx());
                println!("representation {:?}", f.representation());
                println!("mass {:e}", u.l2_norm());
                println!("max_abs {:e}", u.max_abs());
                println!("spectral_tail_0.9 {:e}", spectral_tail(&u, 0.9 * g.nyquist()));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}: {e}", field.display());
                ExitCode::from(1)
            }
        },
    }
}
