//! `hyperconc` command line: run, sweep, circuit, verify, sample.

pub mod params;
pub mod sweep;

use std::io::Write;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use hyperconc::circuits::{parse, run};
use hyperconc::fock::{FockState, ModeLabel, ModeRegister};
use hyperconc::montecarlo::{sample, AcceptRule, ShotStats};
use hyperconc::protocols::states::{self, PairPaths};
use hyperconc::protocols::{build_initial, run_protocol, BranchRecord, ProtocolKind, ProtocolParams};
use hyperconc::verify::{verify, VerifyOptions};

use params::{resolve, Given};
use sweep::{evaluate, to_csv, Axis, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "hyperconc", version, about = "Simulate linear-optical hyperentanglement concentration and purification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long)]
    f1: Option<f64>,
    /// Detector efficiency.
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
}

impl ParamArgs {
    fn given(&self) -> Given {
        Given { alpha: self.alpha, beta: self.beta, gamma: self.gamma, delta: self.delta, f1: self.f1 }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one protocol and report success, fidelity and branches.
    Run {
        kind: String,
        #[command(flatten)]
        params: ParamArgs,
        /// Also sample this many shots.
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        postselect: bool,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a parameter grid and write CSV.
    Sweep {
        kind: String,
        /// `name=start:stop:steps`, repeatable; the first is the outermost loop.
        #[arg(long = "vary", required = true)]
        vary: Vec<String>,
        /// `name=value`, repeatable.
        #[arg(long = "fix")]
        fix: Vec<String>,
        /// `target=source`: copy one parameter into another in each cell.
        #[arg(long = "link")]
        link: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Run a circuit file on a given input state and list every branch.
    Circuit {
        file: std::path::PathBuf,
        /// Input from a protocol's initial state.
        #[arg(long)]
        kind: Option<String>,
        #[command(flatten)]
        params: ParamArgs,
        /// `amp:mode,mode;amp:mode,...`, or `phi-f` / `psi-f`.
        #[arg(long, allow_hyphen_values = true)]
        state: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Compare every protocol with its closed form over a parameter grid.
    Verify {
        #[arg(long)]
        include_degenerate: bool,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo shots with lossy detectors.
    Sample {
        kind: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        postselect: bool,
        #[arg(long)]
        json: bool,
    },
}

/// Failure with its exit code.
struct Failure(i32, String);

fn usage(m: impl std::fmt::Display) -> Failure {
    Failure(EXIT_USAGE, m.to_string())
}

fn internal(m: impl std::fmt::Display) -> Failure {
    Failure(EXIT_FAIL, m.to_string())
}

fn protocol_error(e: hyperconc::Error) -> Failure {
    match e {
        hyperconc::Error::InvalidParams(_) | hyperconc::Error::BadEfficiency(_) => usage(e),
        other => internal(other),
    }
}

type Out<'a> = &'a mut dyn Write;

/// Runs the CLI on `args` (including the program name); returns the exit code.
pub fn run_cli<I, T>(args: I, out: Out, err: Out) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn kind_of(s: &str) -> Result<ProtocolKind, Failure> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = ProtocolKind::ALL.iter().map(|k| k.name()).collect();
        usage(format!("unknown protocol {s}; expected one of {}", names.join(", ")))
    })
}

fn io(e: std::io::Error) -> Failure {
    internal(e)
}

fn dispatch(cmd: Command, out: Out) -> Result<i32, Failure> {
    match cmd {
        Command::Run { kind, params, shots, seed, postselect, json } => {
            let kind = kind_of(&kind)?;
            let p = resolve(kind, &params.given(), params.eta).map_err(usage)?;
            cmd_run(kind, &p, shots, seed, rule(postselect), json, out)
        }
        Command::Sweep { kind, vary, fix, link, eta, out: path } => {
            let spec = sweep_spec(&kind, &vary, &fix, &link, eta)?;
            let rows = evaluate(&spec).map_err(usage)?;
            let csv = to_csv(&spec, &rows);
            match path {
                Some(p) => std::fs::write(&p, csv).map_err(|e| internal(format!("{}: {e}", p.display())))?,
                None => out.write_all(csv.as_bytes()).map_err(io)?,
            }
            Ok(EXIT_OK)
        }
        Command::Circuit { file, kind, params, state, json } => cmd_circuit(&file, kind, &params, state, json, out),
        Command::Verify { include_degenerate, json } => {
            let rep = verify(VerifyOptions { include_degenerate, ..Default::default() });
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&rep).map_err(internal)?).map_err(io)?;
            } else {
                for k in &rep.kinds {
                    let status = if k.passed() { "PASS" } else { "FAIL" };
                    writeln!(out, "{status} {:<22} points={:<4} max_abs_err={:.3e} max_infidelity={:.3e}", k.kind, k.points, k.max_abs_err, k.max_infidelity)
                        .map_err(io)?;
                    for f in &k.failures {
                        writeln!(out, "  failure: {f}").map_err(io)?;
                    }
                    for r in &k.rejected {
                        writeln!(out, "  rejected input: {r}").map_err(io)?;
                    }
                }
                writeln!(out, "{} max_abs_err={:.3e}", if rep.passed() { "PASS" } else { "FAIL" }, rep.max_abs_err()).map_err(io)?;
            }
            Ok(if rep.passed() { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Sample { kind, params, shots, seed, postselect, json } => {
            let kind = kind_of(&kind)?;
            let p = resolve(kind, &params.given(), params.eta).map_err(usage)?;
            let exact = run_protocol(kind, &p).map_err(protocol_error)?.joint_probability;
            let stats = sample(kind, &p, p.eta, shots, seed, rule(postselect)).map_err(protocol_error)?;
            if json {
                let rep = SampleReport { kind: kind.name(), params: p, exact_at_eta: exact, stats };
                writeln!(out, "{}", serde_json::to_string_pretty(&rep).map_err(internal)?).map_err(io)?;
            } else {
                write_stats(out, &stats)?;
                writeln!(out, "exact accept  {exact}").map_err(io)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn rule(postselect: bool) -> AcceptRule {
    if postselect {
        AcceptRule::Postselect
    } else {
        AcceptRule::Pattern
    }
}

fn sweep_spec(kind: &str, vary: &[String], fix: &[String], link: &[String], eta: f64) -> Result<SweepSpec, Failure> {
    let mut spec = SweepSpec { kind: Some(kind_of(kind)?), eta, ..Default::default() };
    for v in vary {
        spec.axes.push(Axis::parse(v).map_err(usage)?);
    }
    for f in fix {
        let (n, v) = f.split_once('=').ok_or_else(|| usage(format!("expected name=value, got {f}")))?;
        let v: f64 = v.parse().map_err(|_| usage(format!("malformed number {v}")))?;
        spec.fixed.set(n, v).map_err(usage)?;
    }
    for l in link {
        let (t, s) = l.split_once('=').ok_or_else(|| usage(format!("expected target=source, got {l}")))?;
        spec.fixed.get(t).map_err(usage)?;
        spec.fixed.get(s).map_err(usage)?;
        spec.links.push((t.to_string(), s.to_string()));
    }
    Ok(spec)
}

#[derive(Serialize)]
struct RunReport<'a> {
    kind: &'a str,
    params: ProtocolParams,
    success_probability: f64,
    closed_form: f64,
    joint_probability: f64,
    round_probabilities: &'a [f64],
    target_fidelity: f64,
    resource_count: u32,
    branches: &'a [BranchRecord],
    shots: Option<ShotStats>,
}

#[derive(Serialize)]
struct SampleReport<'a> {
    kind: &'a str,
    params: ProtocolParams,
    exact_at_eta: f64,
    stats: ShotStats,
}

fn describe(kind: ProtocolKind, p: &ProtocolParams) -> String {
    match p.f1 {
        Some(f) => format!("f1={f} eta={}", p.eta),
        None if kind.family() == hyperconc::protocols::ParamFamily::OnePair => format!("alpha={} beta={} eta={}", p.alpha, p.beta, p.eta),
        None => format!("alpha={} beta={} gamma={} delta={} eta={}", p.alpha, p.beta, p.gamma, p.delta, p.eta),
    }
}

fn write_stats(out: Out, s: &ShotStats) -> Result<(), Failure> {
    writeln!(out, "shots         {}", s.shots).map_err(io)?;
    writeln!(out, "accepted      {}", s.accepted).map_err(io)?;
    writeln!(out, "false accepts {}", s.false_accepts).map_err(io)?;
    writeln!(out, "estimate      {} +/- {}", s.estimate, s.stderr).map_err(io)?;
    writeln!(out, "seed          {}", s.seed).map_err(io)
}

fn cmd_run(kind: ProtocolKind, p: &ProtocolParams, shots: Option<u64>, seed: u64, rule: AcceptRule, json: bool, out: Out) -> Result<i32, Failure> {
    let r = run_protocol(kind, p).map_err(protocol_error)?;
    let stats = match shots {
        Some(n) => Some(sample(kind, p, p.eta, n, seed, rule).map_err(protocol_error)?),
        None => None,
    };
    if json {
        let rep = RunReport {
            kind: kind.name(),
            params: *p,
            success_probability: r.success_probability,
            closed_form: r.closed_form,
            joint_probability: r.joint_probability,
            round_probabilities: &r.round_probabilities,
            target_fidelity: r.target_fidelity,
            resource_count: r.resource_count,
            branches: &r.branches,
            shots: stats,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&rep).map_err(internal)?).map_err(io)?;
        return Ok(EXIT_OK);
    }
    let label = if kind == ProtocolKind::HyperEpp { "closed form (fidelity)" } else { "closed form" };
    writeln!(out, "protocol      {kind}").map_err(io)?;
    writeln!(out, "parameters    {}", describe(kind, p)).map_err(io)?;
    writeln!(out, "success       {}", r.success_probability).map_err(io)?;
    writeln!(out, "fidelity      {}", r.target_fidelity).map_err(io)?;
    writeln!(out, "{label:<13} {}", r.closed_form).map_err(io)?;
    if r.round_probabilities.len() > 1 {
        let rs: Vec<String> = r.round_probabilities.iter().map(|x| x.to_string()).collect();
        writeln!(out, "stages        {}", rs.join(" ")).map_err(io)?;
        writeln!(out, "all stages    {}", r.joint_probability).map_err(io)?;
    }
    writeln!(out, "pairs/trial   {}", r.resource_count).map_err(io)?;
    writeln!(out, "branches      {}", r.branches.len()).map_err(io)?;
    for b in &r.branches {
        let ops: Vec<String> = b.corrections.iter().map(op_text).collect();
        let ops = if ops.is_empty() { "-".to_string() } else { ops.join("; ") };
        writeln!(out, "  {:<52} p={:<22} F={:<20} {ops}", b.pattern.to_string(), b.probability, b.fidelity).map_err(io)?;
    }
    if let Some(s) = stats {
        write_stats(out, &s)?;
    }
    Ok(EXIT_OK)
}

fn op_text(e: &hyperconc::elements::Element) -> String {
    use hyperconc::elements::Element::*;
    match e {
        PolPhaseFlip { path } => format!("pflip {path}"),
        SpatialPhaseFlip { keep, flip } => format!("sflip {keep} {flip}"),
        other => format!("{other:?}"),
    }
}

/// Parses `amp:mode,mode;amp:mode,...` into normalized terms.
pub fn parse_state(text: &str, register: &Arc<ModeRegister>) -> Result<FockState, String> {
    let ab = PairPaths::ab();
    let terms = match text.trim() {
        "phi-f" => states::phi_f(&ab),
        "psi-f" => states::psi_f(&ab),
        t => {
            let mut terms = Vec::new();
            for part in t.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let (amp, modes) = part.split_once(':').ok_or_else(|| format!("term {part}: expected amp:modes"))?;
                let amp: f64 = amp.trim().parse().map_err(|_| format!("malformed amplitude {amp}"))?;
                let labels = modes
                    .split(',')
                    .map(|m| m.trim().parse::<ModeLabel>().map_err(|e| format!("{m}: {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                terms.push((Complex64::new(amp, 0.0), labels));
            }
            terms
        }
    };
    let s = states::on(register, &terms).map_err(|e| e.to_string())?;
    s.normalize().map(|(s, _)| s).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BranchOut {
    member_weight: f64,
    pattern: String,
    probability: f64,
    state: String,
}

fn cmd_circuit(file: &std::path::Path, kind: Option<String>, params: &ParamArgs, state: Option<String>, json: bool, out: Out) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let spec = parse(&text).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let reg = spec.register().clone();
    let inputs: Vec<(f64, FockState)> = match (kind, state) {
        (Some(_), Some(_)) => return Err(usage("give either --kind or --state, not both")),
        (None, None) => return Err(usage("give an input with --kind or --state")),
        (None, Some(s)) => vec![(1.0, parse_state(&s, &reg).map_err(usage)?)],
        (Some(k), None) => {
            let kind = kind_of(&k)?;
            let p = resolve(kind, &params.given(), params.eta).map_err(usage)?;
            build_initial(kind, &p)
                .map_err(protocol_error)?
                .members()
                .into_iter()
                .map(|(w, m)| Ok((w, m.embed(&reg).map_err(|e| usage(format!("input does not fit the circuit: {e}")))?)))
                .collect::<Result<_, Failure>>()?
        }
    };
    let mut rows = Vec::new();
    for (w, input) in &inputs {
        for b in run(&spec, input).map_err(|e| usage(e.to_string()))? {
            rows.push(BranchOut { member_weight: *w, pattern: b.pattern.to_string(), probability: b.probability, state: b.state.to_string() });
        }
    }
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rows).map_err(internal)?).map_err(io)?;
        return Ok(EXIT_OK);
    }
    let mixed = inputs.len() > 1;
    let total: f64 = rows.iter().map(|r| r.member_weight * r.probability).sum();
    writeln!(out, "branches {}", rows.len()).map_err(io)?;
    for r in &rows {
        if mixed {
            writeln!(out, "member weight {}", r.member_weight).map_err(io)?;
        }
        writeln!(out, "pattern {}", r.pattern).map_err(io)?;
        writeln!(out, "  probability {}", r.probability).map_err(io)?;
        writeln!(out, "  state {}", r.state).map_err(io)?;
    }
    writeln!(out, "total {total}").map_err(io)?;
    Ok(EXIT_OK)
}
