use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use qfound::commands::{self, CircuitSource, CodeSource, Ctx, CtcModelKind, Output};
use qfound::emit::{to_csv_bytes, to_json_bytes, write_output};
use qfound::{selftest, AppError};
use qfound_core::Tol;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "qfound",
    version,
    about = "Quantum foundations toolbox: conditional-independence checks, causal-model \
             predictions, closed-timelike-curve evolutions, ontological overlap bounds, \
             and fingerprinting communication bounds"
)]
struct Cli {
    /// Seed for every randomized operation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Scale factor applied to the default numerical tolerances
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Write the report to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report encoding
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CtcModelArg {
    Dctc,
    Pctc,
    Tctc,
    TctcMc,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional-independence analysis of channels
    Qci {
        #[command(subcommand)]
        op: QciOp,
    },
    /// Quantum causal models over DAGs
    Causal {
        #[command(subcommand)]
        op: CausalOp,
    },
    /// Closed-timelike-curve evolutions of a standard form circuit
    Ctc {
        /// Consistency rule to apply
        #[arg(long, value_enum)]
        model: CtcModelArg,
        /// Circuit description file
        #[arg(long, conflicts_with = "builtin")]
        circuit: Option<PathBuf>,
        /// Built-in circuit name (grandfather, unproved_theorem, swap, identity)
        #[arg(long)]
        builtin: Option<String>,
        /// Register width for the unproved_theorem builtin
        #[arg(long, requires = "builtin")]
        bits: Option<usize>,
        /// Depolarizing strength for the dctc model
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Sample count for the tctc-mc model
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Overlap measures on a finite ontological model
    Overlap {
        /// Ontological model file
        #[arg(long)]
        model: PathBuf,
        /// Target preparation labels (comma separated)
        #[arg(long, value_delimiter = ',', required = true)]
        target: Vec<String>,
        /// Conditioning preparation label
        #[arg(long)]
        given: String,
        /// Error tolerance of the overlap
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Compute the symmetric overlap instead (one target)
        #[arg(long)]
        symmetric: bool,
    },
    /// Epistemic-overlap bound tables at given parameters
    Bounds {
        /// Pairwise amplitude overlap of the state family
        #[arg(long)]
        alpha: f64,
        /// Hilbert-space dimension
        #[arg(long)]
        d: usize,
        /// Error tolerance entering the error-dependent bound
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Fingerprinting states and communication bounds from a classical code
    Comm {
        /// Codebook file
        #[arg(long, conflicts_with = "generate")]
        code: Option<PathBuf>,
        /// Generate a random code in the distance window instead
        #[arg(long)]
        generate: bool,
        /// Message bits for --generate
        #[arg(long, requires = "generate")]
        n: Option<usize>,
        /// Codeword length for --generate
        #[arg(long, requires = "generate")]
        m: Option<usize>,
        /// Lower distance window edge as a fraction of m
        #[arg(long, default_value_t = 0.25)]
        min_frac: f64,
        /// Upper distance window edge as a fraction of m
        #[arg(long, default_value_t = 0.75)]
        max_frac: f64,
        /// Message assignment to audit for pigeonhole violations
        #[arg(long, value_delimiter = ',')]
        assignment: Option<Vec<usize>>,
    },
    /// Run the built-in worked-example suite
    Selftest {
        /// Corrupt the named check's expected constant (negative control)
        #[arg(long)]
        corrupt: Option<String>,
    },
}

#[derive(Subcommand)]
enum QciOp {
    /// Run all four conditional-independence conditions on a channel
    Check {
        /// Channel description file
        #[arg(long)]
        channel: PathBuf,
        /// Output labels of the first part (comma separated)
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<String>,
        /// Output labels of the second part (comma separated)
        #[arg(long, value_delimiter = ',', required = true)]
        c: Vec<String>,
    },
}

#[derive(Subcommand)]
enum CausalOp {
    /// Outcome distribution of the model's instruments
    Predict {
        /// Model description file
        #[arg(long)]
        model: PathBuf,
    },
    /// Decohere the model state and report its conditional factorization
    ClassicalLimit {
        /// Model description file
        #[arg(long)]
        model: PathBuf,
    },
}

fn dispatch(cli: &Cli) -> Result<Output, AppError> {
    let ctx = Ctx {
        seed: cli.seed,
        tol: cli.tol.map(Tol::scaled).unwrap_or_default(),
    };
    match &cli.command {
        Command::Qci {
            op: QciOp::Check { channel, b, c },
        } => commands::qci_check(&ctx, channel, b, c),
        Command::Causal {
            op: CausalOp::Predict { model },
        } => commands::causal_predict(&ctx, model),
        Command::Causal {
            op: CausalOp::ClassicalLimit { model },
        } => commands::causal_classical_limit(&ctx, model),
        Command::Ctc {
            model,
            circuit,
            builtin,
            bits,
            noise,
            samples,
        } => {
            let source = match (circuit, builtin) {
                (Some(path), None) => CircuitSource::File(path.clone()),
                (None, Some(name)) => CircuitSource::Builtin {
                    name: name.clone(),
                    bits: *bits,
                },
                _ => {
                    return Err(AppError::schema(
                        "provide exactly one of --circuit and --builtin".to_string(),
                    ))
                }
            };
            let kind = match model {
                CtcModelArg::Dctc => CtcModelKind::Dctc,
                CtcModelArg::Pctc => CtcModelKind::Pctc,
                CtcModelArg::Tctc => CtcModelKind::Tctc,
                CtcModelArg::TctcMc => CtcModelKind::TctcMc,
            };
            commands::ctc_run(&ctx, kind, &source, *noise, *samples)
        }
        Command::Overlap {
            model,
            target,
            given,
            epsilon,
            symmetric,
        } => commands::overlap(&ctx, model, target, given, *epsilon, *symmetric),
        Command::Bounds { alpha, d, epsilon } => commands::bounds(*alpha, *d, *epsilon),
        Command::Comm {
            code,
            generate,
            n,
            m,
            min_frac,
            max_frac,
            assignment,
        } => {
            let source = match (code, generate) {
                (Some(path), false) => CodeSource::File(path.clone()),
                (None, true) => CodeSource::Generate {
                    n: n.ok_or_else(|| {
                        AppError::schema("--generate needs --n".to_string())
                    })?,
                    m: m.ok_or_else(|| {
                        AppError::schema("--generate needs --m".to_string())
                    })?,
                    min_frac: *min_frac,
                    max_frac: *max_frac,
                },
                _ => {
                    return Err(AppError::schema(
                        "provide exactly one of --code and --generate".to_string(),
                    ))
                }
            };
            commands::comm(&ctx, &source, assignment.as_deref())
        }
        Command::Selftest { .. } => unreachable!("handled before dispatch"),
    }
}

fn encode(cli: &Cli, output: &Output) -> Result<Vec<u8>, AppError> {
    match cli.format {
        FormatArg::Json => to_json_bytes(&output.json),
        FormatArg::Csv => to_csv_bytes(&output.csv_header, &output.csv_rows),
    }
}

fn run(cli: Cli) -> i32 {
    if let Command::Selftest { corrupt } = &cli.command {
        let outcomes = selftest::run(cli.seed, corrupt.as_deref());
        let (text, all_pass) = selftest::render(&outcomes);
        return match write_output(cli.out.as_deref(), text.as_bytes()) {
            Ok(()) => {
                if all_pass {
                    0
                } else {
                    1
                }
            }
            Err(e) => {
                eprintln!("qfound: {e}");
                2
            }
        };
    }

    match dispatch(&cli) {
        Ok(output) => match encode(&cli, &output).and_then(|b| write_output(cli.out.as_deref(), &b)) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("qfound: {e}");
                2
            }
        },
        Err(AppError::Domain { name, detail }) => {
            // The run failed inside the modeled physics; the report still
            // carries the verdict.
            let report = Output {
                json: json!({ "error": { "name": name, "detail": detail } }),
                csv_header: vec!["key".to_string(), "value".to_string()],
                csv_rows: vec![
                    vec!["error_name".to_string(), name.to_string()],
                    vec!["detail".to_string(), detail.clone()],
                ],
            };
            match encode(&cli, &report).and_then(|b| write_output(cli.out.as_deref(), &b)) {
                Ok(()) => 1,
                Err(e) => {
                    eprintln!("qfound: {e}");
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("qfound: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run(Cli::parse()));
}
