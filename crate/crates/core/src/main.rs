use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use incoherence::harness::{self, MdpSource, Operator, RunConfig, Schedule};
use incoherence::{validate_mdp, Error, Report};

#[derive(Parser)]
#[command(name = "incoherence", version, about = "Exact control-as-inference on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct ModelArgs {
    /// Builtin name, path to a JSON model, or `random` (verify only).
    #[arg(long, default_value = "mountain_race")]
    mdp: String,
    /// Number of random models.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random models get point-mass dynamics.
    #[arg(long)]
    deterministic: bool,
    /// Bound on |S|^(T+1) |A|^T for enumeration oracles.
    #[arg(long, default_value_t = incoherence::DEFAULT_ENUMERATION_CAP)]
    cap: u64,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = OperatorArg::G)]
    operator: OperatorArg,
    /// Iterations (or k_max for equivalence).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// `pow2`, `linear`, or a comma-separated list of alphas.
    #[arg(long, default_value = "pow2")]
    schedule: String,
    /// Overrides every upper-bound tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    #[value(name = "G")]
    G,
    #[value(name = "F")]
    F,
    #[value(name = "H")]
    H,
    Temp,
    Coherence,
}

#[derive(Subcommand)]
enum Command {
    /// Load a model and list invariant violations.
    Validate {
        #[arg(long, default_value = "mountain_race")]
        mdp: String,
    },
    /// Run an operator and write its CSV trace.
    Iterate(RunArgs),
    /// Run a named verifier.
    Verify {
        check: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Recompute the reference values.
    Examples,
    /// n-policy-stability, or the one- vs two-step conflict without `--n`.
    Stability {
        #[arg(long, default_value = "stability_tree")]
        mdp: String,
        #[arg(long)]
        n: Option<usize>,
    },
}

fn config(args: &RunArgs) -> Result<RunConfig, Error> {
    let schedule = match args.schedule.as_str() {
        "pow2" => Schedule::Pow2,
        "linear" => Schedule::Linear,
        list => Schedule::Explicit(
            list.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Error::InvalidArgument(format!("bad schedule `{list}`")))?,
        ),
    };
    Ok(RunConfig {
        mdp: MdpSource::parse(&args.model.mdp, args.model.count),
        operator: match args.operator {
            OperatorArg::G => Operator::G,
            OperatorArg::F => Operator::F,
            OperatorArg::H => Operator::H,
            OperatorArg::Temp => Operator::Temp,
            OperatorArg::Coherence => Operator::Coherence,
        },
        steps: args.steps,
        delta: args.delta,
        schedule,
        tolerance: args.tol,
        output: args.output.clone(),
        seed: args.model.seed,
        deterministic: args.model.deterministic,
        cap: args.model.cap,
    })
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::CapExceeded { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn verdict(r: &Report) -> ExitCode {
    println!("{r}");
    if r.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Validate { mdp } => {
            let m = match harness::load_single(&MdpSource::parse(&mdp, 0)) {
                Ok(m) => m,
                Err(e) => {
                    println!("invalid: {e}");
                    return Ok(ExitCode::from(1));
                }
            };
            let violations = validate_mdp(&m);
            for v in &violations {
                println!("{v}");
            }
            if violations.is_empty() {
                println!(
                    "valid: {} states, {} actions, horizon {}, {}",
                    m.n_states(),
                    m.n_actions(),
                    m.horizon(),
                    if m.is_deterministic() { "deterministic" } else { "stochastic" }
                );
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Iterate(args) => {
            if let Some(csv) = harness::run_iterate(&config(&args)?)? {
                print!("{csv}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { check, run } => Ok(verdict(&harness::run_verify(&config(&run)?, &check)?)),
        Command::Examples => Ok(verdict(&harness::run_examples())),
        Command::Stability { mdp, n } => Ok(verdict(&harness::run_stability(&MdpSource::parse(&mdp, 0), n)?)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
