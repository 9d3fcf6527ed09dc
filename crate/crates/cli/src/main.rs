//! `isoforge`: batch front end for norm-field uniformization.
//!
//! Every job prints one JSON report (`"schema": 1`) on stdout. With `--out`
//! the report, a timestamp sidecar and any artifacts are written to a
//! directory. Failures print a single line `error kind=<k> code=<c>: <reason>`
//! on stderr and exit with 2 (parse), 3 (precondition), 4 (non-convergence)
//! or 1 (failed verification).

mod commands;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;
use isoforge_core::convex_kernel::DEFAULT_SAMPLES;

#[derive(Debug, Parser)]
#[command(name = "isoforge", version, about = "Uniformization of planar norm-field surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Banach–Mazur distance between two norms.
    BmDistance {
        /// First norm preset.
        #[arg(long)]
        m: String,
        /// Second norm preset.
        #[arg(long, default_value = "l2")]
        n: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Solve a Beltrami equation on a grid.
    Beltrami {
        /// `const:<re>,<im>` or `bump:<amplitude>`.
        #[arg(long)]
        mu: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Isothermal coordinates of a norm field.
    Uniformize {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Discrete moduli of quadrilaterals and annuli.
    Modulus {
        #[command(flatten)]
        field: FieldArgs,
        /// Quadrilateral `x0,y0,x1,y1`; repeatable.
        #[arg(long)]
        quad: Vec<String>,
        /// Annulus `cx,cy,r,R`; repeatable.
        #[arg(long)]
        annulus: Vec<String>,
        /// JSON list of `{"quad": {...}}` / `{"annulus": {...}}` items.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Include the active extremal paths as polylines.
        #[arg(long)]
        paths: bool,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Quadrilateral products and point decay of a field.
    Reciprocality {
        #[command(flatten)]
        field: FieldArgs,
        /// JSON `{"quads": [...], "annuli": [...]}`; defaults are derived from the domain.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check that the isothermal coordinates of the l_p annulus have constant
    /// distortion equal to the Banach–Mazur distance to l2.
    VerifyAnnulus {
        /// Exponent in [1, inf].
        #[arg(long)]
        p: String,
        /// Outer radius of the annulus `1 <= |z| <= r`.
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 65)]
        nx: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct GridArgs {
    /// Nodes per side in x (at least 17).
    #[arg(long)]
    nx: Option<usize>,
    /// Nodes per side in y; defaults to nx.
    #[arg(long)]
    ny: Option<usize>,
    /// Rectangle `x0,y0,x1,y1`.
    #[arg(long)]
    domain: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct FieldArgs {
    /// Preset (`l1`, `l2`, `linf`, `lp:<p>`, `ellipse:<a11,a12,a21,a22>`,
    /// `blend:<inner>/<outer>`) or path to a field JSON file.
    #[arg(long, default_value = "l2")]
    field: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
struct OutArgs {
    /// Directory for the report, its metadata sidecar and artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots into the output directory.
    #[arg(long)]
    svg: bool,
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("ISOFORGE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::parse(format!("ISOFORGE_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::precondition(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::BmDistance { m, n, samples, out } => commands::bm_distance(&m, &n, samples, &out),
        Command::Beltrami { mu, grid, out } => commands::beltrami(&mu, &grid, &out),
        Command::Uniformize { field, out } => commands::uniformize(&field, &out),
        Command::Modulus {
            field,
            quad,
            annulus,
            spec,
            paths,
            tol,
            out,
        } => commands::modulus(&field, &quad, &annulus, spec.as_deref(), paths, tol, &out),
        Command::Reciprocality { field, spec, tol, out } => {
            commands::reciprocality(&field, spec.as_deref(), tol, &out)
        }
        Command::VerifyAnnulus { p, r, nx, samples, out } => commands::verify_annulus(&p, r, nx, samples, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let reason: Vec<&str> = msg.lines().map(str::trim).take_while(|l| !l.is_empty()).collect();
            eprintln!("{}", Failure::parse(reason.join(" ").trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code as u8)
        }
    }
}
