//! Thin command-line front end: parses arguments, dispatches to the library
//! and prints the JSON report. Exit code 0 = success, 1 = negative verdict,
//! 2 = error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sid::report::{run, Command, GenerateParams, RunConfig};
use sid::Tolerances;

#[derive(Parser)]
#[command(
    name = "sid",
    about = "Strongly irreducible decompositions of matrix fields over atomic measure spaces",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone, Default)]
struct TolArgs {
    /// Superdiagonal zero threshold (relative to 1 + block norm)
    #[arg(long)]
    tol_zero: Option<f64>,
    /// Spectral clustering threshold (relative to 1 + max |phi|)
    #[arg(long)]
    tol_spec: Option<f64>,
    /// Numerical rank threshold (relative to the largest singular value)
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Idempotency residual gate
    #[arg(long)]
    tol_idem: Option<f64>,
    /// Eigenvalue clustering tolerance (relative to the spectral radius)
    #[arg(long)]
    tol_eig: Option<f64>,
    /// Condition-number cap for certificates
    #[arg(long)]
    kappa_max: Option<f64>,
}

impl TolArgs {
    fn resolve(&self) -> Tolerances {
        let mut t = Tolerances::from_env();
        if let Some(v) = self.tol_zero {
            t.tol_zero = v;
        }
        if let Some(v) = self.tol_spec {
            t.tol_spec = v;
        }
        if let Some(v) = self.tol_rank {
            t.tol_rank = v;
        }
        if let Some(v) = self.tol_idem {
            t.tol_idem = v;
        }
        if let Some(v) = self.tol_eig {
            t.tol_eig = v;
        }
        if let Some(v) = self.kappa_max {
            t.kappa_max = v;
        }
        t
    }
}

#[derive(Args, Clone)]
struct IoArgs {
    /// Input document (UTF-8 JSON)
    input: PathBuf,
    /// Name of the operator field in the document
    #[arg(long, default_value = "T")]
    operator: String,
    /// Write the report to this path as well as stdout
    #[arg(long, visible_alias = "report")]
    out: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-atom strong-irreducibility test with witnesses on failures
    CheckSi(IoArgs),
    /// Spectral classes and commutant bases of the operator
    Commutant {
        #[command(flatten)]
        io: IoArgs,
        /// Also solve the full coupled kernel over all atoms
        #[arg(long)]
        full_solve: bool,
    },
    /// Reduce an idempotent over an amplification to a diagonal projection
    Canonicalize {
        #[command(flatten)]
        io: IoArgs,
        /// Name of the idempotent in the document
        #[arg(long)]
        idempotent: String,
        /// Expected amplification (checked against the document)
        #[arg(long)]
        m: Option<usize>,
    },
    /// Align one or more maximal abelian families to the standard family
    AlignFamily {
        #[command(flatten)]
        io: IoArgs,
        /// Comma-separated family names; consecutive pairs are composed
        #[arg(long, value_delimiter = ',', required = true)]
        family: Vec<String>,
    },
    /// K0 class of an idempotent, or the K0 descriptor of the operator
    K0 {
        #[command(flatten)]
        io: IoArgs,
        /// Name of the idempotent in the document
        #[arg(long)]
        idempotent: Option<String>,
    },
    /// Decide uniqueness of the strongly irreducible decomposition
    Uniqueness(IoArgs),
    /// Generate a seeded instance with embedded ground truth
    Generate {
        /// Seed for the deterministic generator
        #[arg(long)]
        seed: u64,
        /// Fiber dimension of the first class
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Amplification for the seeded idempotent and families
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Cap on the number of atoms
        #[arg(long, default_value_t = 8)]
        atoms: usize,
        /// Multiplicity pattern, e.g. "1,1", "2;1", "1,inf"
        #[arg(long, default_value = "1,1")]
        pattern: String,
        /// Write the instance document here
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Run the acceptance criteria and report pass/fail per criterion
    Selftest {
        /// Seed mixed into the criterion generators
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report to this path as well as stdout
        #[arg(long, visible_alias = "report")]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
}

fn base_config(command: Command, io: &IoArgs) -> RunConfig {
    let mut config = RunConfig::new(command);
    config.input_path = Some(io.input.clone());
    config.output_path = io.out.clone();
    config.operator = io.operator.clone();
    config.tolerances = io.tol.resolve();
    config
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.command {
        Cmd::CheckSi(io) => base_config(Command::CheckSi, &io),
        Cmd::Commutant { io, full_solve } => {
            let mut c = base_config(Command::Commutant, &io);
            c.full_solve = full_solve;
            c
        }
        Cmd::Canonicalize { io, idempotent, m } => {
            let mut c = base_config(Command::Canonicalize, &io);
            c.idempotent = Some(idempotent);
            c.m = m;
            c
        }
        Cmd::AlignFamily { io, family } => {
            let mut c = base_config(Command::AlignFamily, &io);
            c.families = family;
            c
        }
        Cmd::K0 { io, idempotent } => {
            let mut c = base_config(Command::K0, &io);
            c.idempotent = idempotent;
            c
        }
        Cmd::Uniqueness(io) => base_config(Command::Uniqueness, &io),
        Cmd::Generate {
            seed,
            n,
            m,
            atoms,
            pattern,
            out,
            tol,
        } => {
            let mut c = RunConfig::new(Command::Generate);
            c.seed = Some(seed);
            c.output_path = out;
            c.tolerances = tol.resolve();
            c.generate = Some(GenerateParams {
                n,
                m,
                atoms,
                pattern,
            });
            c
        }
        Cmd::Selftest { seed, out, tol } => {
            let mut c = RunConfig::new(Command::Selftest);
            c.seed = Some(seed);
            c.output_path = out;
            c.tolerances = tol.resolve();
            c
        }
    };

    let outcome = run(&config);
    if config.command == Command::Selftest {
        if let Some(criteria) = outcome.report.results.get("criteria").and_then(|v| v.as_array()) {
            for c in criteria {
                println!(
                    "criterion {}: {} — {} [{} ms] {}",
                    c["index"],
                    if c["passed"].as_bool().unwrap_or(false) {
                        "PASS"
                    } else {
                        "FAIL"
                    },
                    c["name"].as_str().unwrap_or(""),
                    c["millis"],
                    c["details"].as_str().unwrap_or(""),
                );
            }
        }
    }
    match outcome.report.to_json() {
        Ok(text) => {
            // the report goes to stdout; --out mirrors it to a file
            // (generate writes the instance document to --out instead)
            if config.command != Command::Selftest {
                println!("{text}");
            }
            if let Some(path) = &config.output_path {
                if config.command != Command::Generate {
                    if let Err(e) = std::fs::write(path, &text) {
                        eprintln!("failed to write report: {e}");
                        return ExitCode::from(2);
                    }
                }
            }
        }
        Err(e) => {
            eprintln!("failed to serialize report: {e}");
            return ExitCode::from(2);
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
