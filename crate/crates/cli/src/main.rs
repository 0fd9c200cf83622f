use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qsynth_core::circuit::{random_circuit, AngleSet, Circuit};
use qsynth_core::dsl::{curate, infer_num_qubits, parse, serialize};
use qsynth_core::eval::{DenseEvaluator, Evaluator, FactoredEvaluator};
use qsynth_core::llm::{LlmParams, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL};
use qsynth_core::optimizer::{
    compare_budget_matched, run_experiment, InitialCircuit, OptimizerConfig, ProposerSpec,
};
use qsynth_core::proposer::{
    HillClimbProposer, LlmProposer, MoveWeights, Proposer, ReplayProposer,
};
use qsynth_core::runstore::{
    read_run, render_table, replay_verify, run_file_name, write_run, RunLogFile,
};
use qsynth_core::{classify_components, sim};

#[derive(Parser)]
#[command(
    name = "qsynth",
    version,
    about = "Search for highly entangling {H, RY, CNOT} circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Meyer-Wallach value and per-qubit purities of a circuit.
    Eval {
        #[arg(long)]
        circuit: PathBuf,
        /// Register size; inferred from the largest wire when omitted.
        #[arg(long)]
        qubits: Option<usize>,
        /// Simulate the whole register instead of each component separately.
        #[arg(long)]
        dense: bool,
    },
    /// Write a random circuit.
    Random {
        #[arg(long)]
        qubits: usize,
        #[arg(long)]
        gates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "3,10,25")]
        angles: AngleSet,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the query/step search loop and write a run file.
    Synth(SynthArgs),
    /// Budget-matched hill-climbing runs from one shared start.
    Baseline {
        #[arg(long)]
        qubits: usize,
        #[arg(long)]
        gates: usize,
        #[arg(long, default_value_t = 45)]
        budget: usize,
        #[arg(long, default_value_t = 10)]
        runs: u64,
        /// Seed of the random start circuit; run r uses mutation seed `seed + r`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "3,10,25")]
        angles: AngleSet,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        dense: bool,
    },
    /// Split a circuit into interaction components and name their states.
    Analyze {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        qubits: Option<usize>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Render run files as a table of per-query improvements.
    Table {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Re-evaluate every circuit in a run file and compare with recorded scores.
    ReplayVerify {
        run: PathBuf,
        #[arg(long)]
        dense: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProposerKind {
    Llm,
    Hillclimb,
    Replay,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    qubits: usize,
    #[arg(long)]
    gates: usize,
    #[arg(long, default_value_t = 3)]
    queries: usize,
    #[arg(long, default_value_t = 15)]
    steps: usize,
    #[arg(long, value_enum)]
    proposer: ProposerKind,
    /// Include the score-change sentence in prompts.
    #[arg(long)]
    feedback: bool,
    #[arg(long, default_value = "3,10,25")]
    angles: AngleSet,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start circuit; a seeded random circuit when omitted.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Replay script, proposals separated by lines holding only `---`.
    #[arg(long, required_if_eq("proposer", "replay"))]
    script: Option<PathBuf>,
    /// Accept proposals whose gate count differs from --gates.
    #[arg(long)]
    allow_gate_count_change: bool,
    #[arg(long, env = ENV_BASE_URL, default_value = "https://api.openai.com/v1")]
    base_url: String,
    #[arg(long, env = ENV_MODEL, default_value = "gpt-4o-mini")]
    model: String,
    #[arg(long, env = ENV_API_KEY, hide_env_values = true)]
    api_key: Option<String>,
    #[arg(long, default_value_t = 0.7)]
    temperature: f64,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    #[arg(long)]
    dense: bool,
    /// Run file, or an existing directory to write `run-<hash>.json` into.
    #[arg(long)]
    out: PathBuf,
}

fn evaluator(dense: bool) -> Box<dyn Evaluator> {
    if dense {
        Box::new(DenseEvaluator)
    } else {
        Box::new(FactoredEvaluator)
    }
}

fn read_circuit(path: &Path, qubits: Option<usize>) -> Result<Circuit> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let text = curate(&raw).with_context(|| format!("{}: curation failed", path.display()))?;
    let n = match qubits {
        Some(n) => n,
        None => {
            infer_num_qubits(&text).with_context(|| format!("{}: parse error", path.display()))?
        }
    };
    let circuit = parse(&text, n).with_context(|| format!("{}: parse error", path.display()))?;
    if let Err(v) = circuit.validate() {
        bail!(
            "{}: invalid circuit: {}",
            path.display(),
            qsynth_core::circuit::describe_violations(&v)
        );
    }
    Ok(circuit)
}

fn cmd_eval(path: &Path, qubits: Option<usize>, dense: bool) -> Result<()> {
    let circuit = read_circuit(path, qubits)?;
    let report = if dense {
        sim::meyer_wallach(&sim::simulate(&circuit)?)
    } else {
        qsynth_core::analyzer::factored_meyer_wallach(&circuit)?
    };
    println!("q = {:.4}", report.q);
    println!("qubits = {}, gates = {}", circuit.num_qubits, circuit.len());
    for (i, p) in report.purities.iter().enumerate() {
        println!("purity[{i}] = {p:.6}");
    }
    Ok(())
}

fn cmd_random(qubits: usize, gates: usize, seed: u64, angles: &AngleSet, out: &Path) -> Result<()> {
    let circuit = random_circuit(qubits, gates, angles, seed)?;
    fs::write(out, serialize(&circuit) + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    let q = FactoredEvaluator.evaluate(&circuit)?;
    println!(
        "wrote {} ({} gates, q = {q:.4})",
        out.display(),
        circuit.len()
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let initial = match &args.init {
        Some(path) => InitialCircuit::Given(read_circuit(path, Some(args.qubits))?),
        None => InitialCircuit::Random,
    };
    let params = LlmParams {
        base_url: args.base_url.clone(),
        model: args.model.clone(),
        temperature: args.temperature,
        timeout: Duration::from_secs(args.timeout),
        api_key: args.api_key.clone().filter(|k| !k.is_empty()),
        ..LlmParams::default()
    };
    let (spec, mut proposer): (ProposerSpec, Box<dyn Proposer>) = match args.proposer {
        ProposerKind::Llm => (
            ProposerSpec::Llm {
                base_url: params.base_url.clone(),
                model: params.model.clone(),
                temperature: params.temperature,
            },
            Box::new(LlmProposer::new(params, args.feedback)),
        ),
        ProposerKind::Hillclimb => (
            ProposerSpec::HillClimb {
                weights: MoveWeights::default(),
            },
            Box::new(HillClimbProposer::new(
                args.angles.clone(),
                MoveWeights::default(),
                args.seed,
            )),
        ),
        ProposerKind::Replay => {
            let path = args.script.as_ref().expect("clap enforces --script");
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            (
                ProposerSpec::Replay {
                    script: Some(path.display().to_string()),
                },
                Box::new(ReplayProposer::from_script_text(&text)),
            )
        }
    };
    let config = OptimizerConfig {
        num_qubits: args.qubits,
        gate_budget: args.gates,
        angles: args.angles,
        queries: args.queries,
        steps_per_query: args.steps,
        feedback_enabled: args.feedback,
        strict_gate_count: !args.allow_gate_count_change,
        proposer: spec,
        seed: args.seed,
        initial,
    };

    let started = Utc::now();
    let mut eval = evaluator(args.dense);
    let result = run_experiment(&config, &mut proposer, eval.as_mut())?;
    let run = RunLogFile::new(result, started, Utc::now());

    let out = if args.out.is_dir() {
        args.out.join(run_file_name(&config))
    } else {
        args.out
    };
    write_run(&out, &run)?;
    let table = render_table(std::slice::from_ref(&run));
    println!("{}", table.rows[0].render());
    println!(
        "best q = {:.4} after {} evaluations{}",
        run.experiment.best_q,
        run.experiment.evaluations,
        if run.experiment.early_stopped {
            " (done)"
        } else {
            ""
        }
    );
    println!("best circuit: {}", serialize(&run.experiment.best_circuit));
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_baseline(
    qubits: usize,
    gates: usize,
    budget: usize,
    runs: u64,
    seed: u64,
    angles: AngleSet,
    init: Option<PathBuf>,
    dense: bool,
) -> Result<()> {
    if budget == 0 || runs == 0 {
        bail!("--budget and --runs must be at least 1");
    }
    let mut config = OptimizerConfig::new(qubits, gates);
    config.angles = angles;
    config.queries = 1;
    config.steps_per_query = budget;
    config.seed = seed;
    if let Some(path) = init {
        config.initial = InitialCircuit::Given(read_circuit(&path, Some(qubits))?);
    }
    let seeds: Vec<u64> = (0..runs).map(|r| seed.wrapping_add(r)).collect();
    let mut eval = evaluator(dense);
    let table = compare_budget_matched(&config, &seeds, eval.as_mut(), None)?;
    print!("{}", table.render());
    let best = table
        .rows
        .iter()
        .map(|r| r.best_q)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("max best q over {runs} runs = {best:.4}");
    Ok(())
}

fn cmd_analyze(path: &Path, qubits: Option<usize>, json: bool) -> Result<()> {
    let circuit = read_circuit(path, qubits)?;
    let report = classify_components(&circuit)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!("{}", report.summary());
    println!("q = {:.4}, clifford = {}", report.mw.q, report.clifford);
    for c in &report.components {
        println!(
            "{:?}: {} (fidelity {:.6}, q {:.4})",
            c.qubits, c.class, c.fidelity, c.mw.q
        );
    }
    Ok(())
}

fn cmd_table(paths: &[PathBuf]) -> Result<()> {
    let runs = paths
        .iter()
        .map(|p| read_run(p))
        .collect::<Result<Vec<_>, _>>()?;
    print!("{}", render_table(&runs).render());
    Ok(())
}

fn cmd_replay_verify(path: &Path, dense: bool) -> Result<()> {
    let run = read_run(path)?;
    let mut eval = evaluator(dense);
    let report = replay_verify(&run, eval.as_mut());
    for m in &report.mismatches {
        println!("mismatch: {m}");
    }
    if !report.ok() {
        bail!(
            "{}: {} of {} recorded scores do not reproduce",
            path.display(),
            report.mismatches.len(),
            report.checked
        );
    }
    println!("ok: {} recorded scores reproduce", report.checked);
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval {
            circuit,
            qubits,
            dense,
        } => cmd_eval(&circuit, qubits, dense),
        Command::Random {
            qubits,
            gates,
            seed,
            angles,
            out,
        } => cmd_random(qubits, gates, seed, &angles, &out),
        Command::Synth(args) => cmd_synth(args),
        Command::Baseline {
            qubits,
            gates,
            budget,
            runs,
            seed,
            angles,
            init,
            dense,
        } => cmd_baseline(qubits, gates, budget, runs, seed, angles, init, dense),
        Command::Analyze {
            circuit,
            qubits,
            json,
        } => cmd_analyze(&circuit, qubits, json),
        Command::Table { runs } => cmd_table(&runs),
        Command::ReplayVerify { run, dense } => cmd_replay_verify(&run, dense),
    }
}
