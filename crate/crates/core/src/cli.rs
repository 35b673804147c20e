//! `oneway` command line.
//!
//! Exit codes: 0 ok, 1 verification failed, 2 unreadable or malformed input,
//! 3 compile error, 4 cyclic measurement order, 5 statevector size limit,
//! 6 register too large for the oracle.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::circuit::{Circuit, CircuitError, ORACLE_MAX_QUBITS};
use crate::compiler::{compile_with, embed_rectangular, CompileError, CompileOptions, CompiledPattern};
use crate::controller::TraceLine;
use crate::format::{self, FormatError};
use crate::qsim::DEFAULT_MAX_QUBITS;
use crate::runtime::{self, Mode, Oracle, Plan, RunConfig, RuntimeError};
use crate::scheduler::{cone_test, ScheduleError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_COMPILE: i32 = 3;
pub const EXIT_CYCLE: i32 = 4;
pub const EXIT_SIZE: i32 = 5;
pub const EXIT_ORACLE: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "oneway", version, about = "Compile and simulate one-way quantum computer patterns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Streamed,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Streamed => Mode::Streamed,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a circuit file into a measurement pattern.
    Compile {
        input: PathBuf,
        output: PathBuf,
        /// Fill the layout's bounding box with σ_z-removed filler sites.
        #[arg(long)]
        embed: bool,
        /// Pad wires so CNOT heads share a column.
        #[arg(long)]
        align: bool,
    },
    /// Partition a pattern's measurements into rounds.
    Schedule {
        pattern: PathBuf,
        /// Where to write the schedule JSON (default: next to the pattern).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run shots and print a summary.
    Run {
        /// Pattern file (a circuit file is compiled on the fly).
        pattern: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Streamed)]
        mode: ModeArg,
        /// Write a per-shot JSON-lines trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_QUBITS)]
        max_qubits: usize,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile, schedule, run both modes and compare against the oracle.
    Verify {
        /// Circuit file or compiled pattern.
        path: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shots in full-cluster mode.
        #[arg(long, default_value_t = 50)]
        full_shots: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_QUBITS)]
        max_qubits: usize,
    },
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::new(EXIT_PARSE, e.to_string())
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        Failure::new(EXIT_COMPILE, e.to_string())
    }
}

impl From<ScheduleError> for Failure {
    fn from(e: ScheduleError) -> Self {
        let code = if matches!(e, ScheduleError::Cycle(_)) { EXIT_CYCLE } else { EXIT_PARSE };
        Failure::new(code, e.to_string())
    }
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        let code = match &e {
            _ if e.is_size_limit() => EXIT_SIZE,
            RuntimeError::Schedule(ScheduleError::Cycle(_)) => EXIT_CYCLE,
            RuntimeError::Compile(_) => EXIT_COMPILE,
            RuntimeError::Circuit(CircuitError::OracleLimit { .. }) => EXIT_ORACLE,
            _ => EXIT_VERIFY,
        };
        Failure::new(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn with_path(path: &Path, f: Failure) -> Failure {
    Failure { message: format!("{}: {}", path.display(), f.message), ..f }
}

/// Loads a pattern file, or compiles a circuit file.
fn load_pattern(path: &Path) -> Result<CompiledPattern, Failure> {
    let text = read(path)?;
    if format::is_pattern_document(&text) {
        format::parse_pattern(&text).map_err(|e| with_path(path, e.into()))
    } else {
        let c = format::parse_circuit(&text).map_err(|e| with_path(path, e.into()))?;
        Ok(compile_with(&c, CompileOptions::default())?)
    }
}

pub fn cmd_compile(input: &Path, output: &Path, embed: bool, align: bool) -> Result<(), Failure> {
    let text = read(input)?;
    let circuit = format::parse_circuit(&text).map_err(|e| with_path(input, e.into()))?;
    let mut p = compile_with(&circuit, CompileOptions { align_columns: align })?;
    if embed {
        p = embed_rectangular(&p)?;
    }
    let plan = Plan::new(p)?;
    write(output, &format::pattern_to_json(&plan.pattern))?;
    println!("sites: {}", plan.pattern.num_sites());
    println!("edges: {}", plan.pattern.edges.len());
    println!("|Q_0|: {}", plan.schedule.rounds[0].len());
    Ok(())
}

pub fn cmd_schedule(pattern: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let plan = Plan::new(load_pattern(pattern)?)?;
    for (t, round) in plan.schedule.rounds.iter().enumerate() {
        let ids: Vec<String> = round.iter().map(ToString::to_string).collect();
        println!("Q_{t}: {}", ids.join(" "));
    }
    println!("t_max = {}", plan.schedule.t_max());
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| pattern.with_extension("schedule.json"));
    write(&out, &format::schedule_to_json(&plan.schedule))
}

#[derive(Serialize)]
struct ShotTrace<'a> {
    shot: u64,
    #[serde(flatten)]
    line: &'a TraceLine,
}

pub struct RunArgs<'a> {
    pub pattern: &'a Path,
    pub shots: u64,
    pub seed: u64,
    pub mode: Mode,
    pub trace: Option<&'a Path>,
    pub threads: Option<usize>,
    pub max_qubits: usize,
    pub out: Option<&'a Path>,
}

pub fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let plan = Plan::new(load_pattern(args.pattern)?)?;
    let cfg = RunConfig {
        shots: args.shots,
        seed: args.seed,
        mode: args.mode,
        threads: args.threads,
        max_qubits: args.max_qubits,
        trace: args.trace.is_some(),
        check: true,
    };
    let (summary, records) = runtime::run_plan(&plan, &cfg)?;
    if let Some(path) = args.trace {
        let mut text = String::new();
        for r in &records {
            for line in &r.trace {
                text.push_str(&serde_json::to_string(&ShotTrace { shot: r.shot, line }).expect("trace serializes"));
                text.push('\n');
            }
        }
        write(path, &text)?;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    match args.out {
        Some(path) => write(path, &(json + "\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: &'static str,
    /// `None` when skipped.
    pub passed: Option<bool>,
    pub detail: String,
}

impl Criterion {
    fn check(name: &'static str, passed: bool, detail: String) -> Self {
        Criterion { name, passed: Some(passed), detail }
    }
}

pub struct VerifyArgs<'a> {
    pub path: &'a Path,
    pub shots: u64,
    pub seed: u64,
    pub full_shots: u64,
    pub threads: Option<usize>,
    pub max_qubits: usize,
}

/// Runs every verification criterion; errors only for unusable inputs.
pub fn verify(args: &VerifyArgs) -> Result<Vec<Criterion>, Failure> {
    let pattern = load_pattern(args.path)?;
    if pattern.qubits > ORACLE_MAX_QUBITS {
        return Err(Failure::new(
            EXIT_ORACLE,
            format!("{} qubits exceed the oracle limit of {ORACLE_MAX_QUBITS}", pattern.qubits),
        ));
    }
    let circuit: Circuit = pattern.circuit.clone();
    circuit.validate().map_err(|e| Failure::new(EXIT_COMPILE, e.to_string()))?;
    let plan = Plan::new(pattern)?;
    let oracle = Oracle::new(&circuit).map_err(|e| Failure::new(EXIT_ORACLE, e.to_string()))?;
    let p = &plan.pattern;
    let mut rows = Vec::new();

    let round = plan.schedule.round_of();
    let sound = plan.cones.fc.iter().all(|(k, fc)| fc.iter().all(|j| round[k] < round[j]));
    let clifford_ok = !circuit.is_clifford() || plan.schedule.t_max() == 0;
    rows.push(Criterion::check(
        "schedule",
        sound && clifford_ok,
        format!("t_max = {}, rounds {:?}", plan.schedule.t_max(), plan.schedule.round_sizes()),
    ));

    let mut mismatches = 0;
    let mut pairs = 0;
    for j in p.adaptive_sites() {
        for &k in p.sites.keys() {
            pairs += 1;
            let direct = plan.cones.in_forward(k, j) || plan.cones.in_backward(k, j);
            if (cone_test(p, j, k) == 1) != direct {
                mismatches += 1;
            }
        }
    }
    rows.push(Criterion::check("cone-test", mismatches == 0, format!("{mismatches} of {pairs} pairs disagree")));

    let full = RunConfig {
        shots: args.full_shots,
        seed: args.seed,
        mode: Mode::Full,
        threads: args.threads,
        max_qubits: args.max_qubits,
        trace: false,
        check: true,
    };
    match runtime::run_shots(&plan, &full, Some(&oracle)) {
        Ok(records) => {
            let min = records.iter().filter_map(|r| r.final_fidelity()).fold(f64::INFINITY, f64::min);
            let low = records.iter().filter(|r| r.final_fidelity().is_none_or(|f| f < runtime::FIDELITY_THRESHOLD)).count();
            rows.push(Criterion::check(
                "fidelity",
                low == 0,
                format!("{low} of {} full shots below 1 - 1e-9 (min {min:.12})", records.len()),
            ));
            let wrong = records
                .iter()
                .filter(|r| !r.check.as_ref().is_some_and(|c| c.corrected_readout == r.result && c.oracle_probability > runtime::SUPPORT_EPSILON))
                .count();
            rows.push(Criterion::check(
                "readout",
                wrong == 0,
                format!("{wrong} of {} full shots disagree with the corrected readout", records.len()),
            ));
            let s = runtime::summarize(&plan, &full, &records, Some(&oracle));
            let (tv, bound) = (s.tv_distance.unwrap_or(1.0), s.tv_threshold.unwrap_or(0.0));
            rows.push(Criterion::check("full-tv", tv <= bound, format!("TV {tv:.4} <= {bound:.4}")));
        }
        Err(e) if e.is_size_limit() => {
            for name in ["fidelity", "readout", "full-tv"] {
                rows.push(Criterion { name, passed: None, detail: e.to_string() });
            }
        }
        Err(e) => return Err(e.into()),
    }

    let streamed = RunConfig { shots: args.shots, mode: Mode::Streamed, ..full };
    let records = runtime::run_shots(&plan, &streamed, Some(&oracle))?;
    let s = runtime::summarize(&plan, &streamed, &records, Some(&oracle));
    let (tv, bound) = (s.tv_distance.unwrap_or(1.0), s.tv_threshold.unwrap_or(0.0));
    rows.push(Criterion::check("streamed-tv", tv <= bound, format!("TV {tv:.4} <= {bound:.4}")));
    let pval = s.chi_square_p.unwrap_or(0.0);
    rows.push(Criterion::check("streamed-chi2", pval > 1e-3, format!("p = {pval:.4}")));
    let bound = p.qubits + 4;
    rows.push(Criterion::check(
        "frontier",
        s.max_live_qubits <= bound,
        format!("{} live qubits, bound {bound}", s.max_live_qubits),
    ));
    Ok(rows)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let rows = verify(args)?;
    let mut failed = Vec::new();
    for row in &rows {
        let tag = match row.passed {
            Some(true) => "PASS",
            Some(false) => {
                failed.push(row.name);
                "FAIL"
            }
            None => "SKIP",
        };
        println!("{tag}  {:<14} {}", row.name, row.detail);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_VERIFY, format!("failed: {}", failed.join(", "))))
    }
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Compile { input, output, embed, align } => cmd_compile(&input, &output, embed, align),
        Command::Schedule { pattern, out } => cmd_schedule(&pattern, out.as_deref()),
        Command::Run { pattern, shots, seed, mode, trace, threads, max_qubits, out } => cmd_run(&RunArgs {
            pattern: &pattern,
            shots,
            seed,
            mode: mode.into(),
            trace: trace.as_deref(),
            threads,
            max_qubits,
            out: out.as_deref(),
        }),
        Command::Verify { path, shots, seed, full_shots, threads, max_qubits } => cmd_verify(&VerifyArgs {
            path: &path,
            shots,
            seed,
            full_shots,
            threads,
            max_qubits,
        }),
    }
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
