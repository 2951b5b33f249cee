//! Command line driver: handshake scenarios, the attack outcome matrix and
//! entropy measurements, all seeded and reproducible.
//!
//! Exit codes: 0 on success, 1 when a run finishes but an assertion or gate
//! fails (matrix differs from the expected table, measurement out of
//! tolerance, matched sessions with different keys), 2 for usage errors.
//! Results go to stdout in the selected format; verdict and diff lines go
//! to stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use twophase_core::adversary::{
    expected_matrix, run_attack_selection, AttackMatrix, Profile, ATTACK_NAMES,
};
use twophase_core::entropy::{
    reports_to_csv, reports_to_json, run_curve_report, EntropyReport, FunctionTag,
    DEFAULT_DEPTH, DEFAULT_SAMPLES,
};
use twophase_core::group::Group;
use twophase_core::protocol::{
    builtin_scenario, matching, run_scenario, Scenario, ScenarioRun, SessionId,
};

#[derive(Parser)]
#[command(name = "twophase", version, about = "Two-phase key exchange simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Run a handshake scenario and check that matched sessions agree on
    /// the key.
    Simulate {
        /// Built-in scenario name or path to a scenario JSON file.
        #[arg(long)]
        scenario: String,
        /// Override the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the session transcript (JSON lines) to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run impersonation and key-compromise attacks across deployment
    /// profiles and compare the outcomes against the expected table.
    Attack {
        /// Run a single attack instead of the full table.
        #[arg(long)]
        attack: Option<String>,
        /// Run a single profile column instead of all five.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the matrix to this file in the selected format.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Measure min-entropy of the associated value function on sampled
    /// points and check the gated curves against their targets.
    Entropy {
        /// Curve to measure; repeat the flag for several.
        #[arg(long = "curve")]
        curves: Vec<String>,
        /// Points sampled per curve and function.
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        n: usize,
        /// Context depth for the compression estimator.
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the report to this file in the selected format.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { scenario, seed, out, format } => {
            cmd_simulate(&scenario, seed, out.as_deref(), format)
        }
        Command::Attack { attack, profile, seed, out, format } => {
            cmd_attack(attack.as_deref(), profile.as_deref(), seed, out.as_deref(), format)
        }
        Command::Entropy { curves, n, depth, seed, out, format } => {
            cmd_entropy(&curves, n, depth, seed, out.as_deref(), format)
        }
    }
}

fn load_scenario(selector: &str) -> Result<Scenario> {
    if let Some(scenario) = builtin_scenario(selector) {
        return Ok(scenario);
    }
    let path = PathBuf::from(selector);
    if !path.is_file() {
        bail!("unknown scenario {selector:?}: neither a built-in name nor a file");
    }
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("malformed scenario file {}", path.display()))
}

fn cmd_simulate(
    selector: &str,
    seed: Option<u64>,
    out: Option<&std::path::Path>,
    format: Format,
) -> Result<ExitCode> {
    let mut scenario = load_scenario(selector)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let run = run_scenario(&scenario)
        .map_err(|e| anyhow!("scenario {:?} failed: {e}", scenario.name))?;

    let mut sessions: Vec<SessionId> = Vec::new();
    for &sid in &run.touched {
        if !sessions.contains(&sid) {
            sessions.push(sid);
        }
    }
    let pairs = matched_pairs(&run, &sessions);

    print!("{}", render_simulation(&scenario, &run, &sessions, &pairs, format));
    if let Some(path) = out {
        fs::write(path, run.env.transcript_jsonl())
            .with_context(|| format!("writing transcript to {}", path.display()))?;
    }

    let mut disagreements = 0;
    for &(a, b) in &pairs {
        if pair_verdict(&run, a, b) == "keys differ" {
            eprintln!(
                "matched sessions #{} and #{} derived different keys",
                a.index(),
                b.index()
            );
            disagreements += 1;
        }
    }
    Ok(if disagreements == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn matched_pairs(run: &ScenarioRun, sessions: &[SessionId]) -> Vec<(SessionId, SessionId)> {
    let mut pairs = Vec::new();
    for (i, &a) in sessions.iter().enumerate() {
        for &b in &sessions[i + 1..] {
            if matching(run.env.session(a), run.env.session(b)) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

fn pair_verdict(run: &ScenarioRun, a: SessionId, b: SessionId) -> &'static str {
    match (run.env.session(a).key(), run.env.session(b).key()) {
        (Some(ka), Some(kb)) if ka.as_bytes() == kb.as_bytes() => "keys agree",
        (Some(_), Some(_)) => "keys differ",
        _ => "incomplete",
    }
}

fn render_simulation(
    scenario: &Scenario,
    run: &ScenarioRun,
    sessions: &[SessionId],
    pairs: &[(SessionId, SessionId)],
    format: Format,
) -> String {
    match format {
        Format::Json => run.env.transcript_jsonl(),
        Format::Csv => {
            let mut out = String::from("session,scheme,owner,peer,role,state,key\n");
            for &sid in sessions {
                let s = run.env.session(sid);
                let key = s.key().map(|k| k.to_hex()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    sid.index(),
                    s.scheme().name(),
                    s.owner(),
                    s.peer(),
                    s.role().name(),
                    s.state().name(),
                    key
                );
            }
            out
        }
        Format::Table => {
            let mut out = format!(
                "scenario {} curve={} seed={}\n",
                scenario.name, scenario.curve, scenario.seed
            );
            for &sid in sessions {
                let s = run.env.session(sid);
                let key = s
                    .key()
                    .map(|k| format!("{}..", &k.to_hex()[..16]))
                    .unwrap_or_else(|| "-".to_string());
                let _ = writeln!(
                    out,
                    "#{} {} {}->{} {} {} key={}",
                    sid.index(),
                    s.scheme().name(),
                    s.owner(),
                    s.peer(),
                    s.role().name(),
                    s.state().name(),
                    key
                );
            }
            if pairs.is_empty() {
                out.push_str("no matched session pairs\n");
            }
            for &(a, b) in pairs {
                let _ = writeln!(
                    out,
                    "matched #{} <-> #{}: {}",
                    a.index(),
                    b.index(),
                    pair_verdict(run, a, b)
                );
            }
            out
        }
    }
}

fn cmd_attack(
    attack: Option<&str>,
    profile: Option<&str>,
    seed: u64,
    out: Option<&std::path::Path>,
    format: Format,
) -> Result<ExitCode> {
    let attacks: Vec<&str> = match attack {
        Some(name) => vec![name],
        None => ATTACK_NAMES.to_vec(),
    };
    let profiles: Vec<Profile> = match profile {
        Some(name) => vec![name.parse()?],
        None => Profile::ALL.to_vec(),
    };
    let matrix = run_attack_selection(seed, &attacks, &profiles)
        .ok_or_else(|| anyhow!("unknown attack {:?}", attack.unwrap_or_default()))?;
    let expected = expected_matrix()
        .select(&attacks, &profiles)
        .expect("expected table covers every known attack and profile");

    let rendered = match format {
        Format::Json => matrix.to_json(),
        Format::Csv => matrix_csv(&matrix),
        Format::Table => matrix.render_table(),
    };
    print!("{rendered}");
    if let Some(path) = out {
        fs::write(path, &rendered)
            .with_context(|| format!("writing matrix to {}", path.display()))?;
    }

    let diff = matrix.diff(&expected);
    if diff.is_empty() {
        eprintln!("matrix matches the expected table");
        Ok(ExitCode::SUCCESS)
    } else {
        for line in diff {
            eprintln!("{line}");
        }
        Ok(ExitCode::from(1))
    }
}

fn matrix_csv(matrix: &AttackMatrix) -> String {
    let mut out = String::from("attack,profile,outcome\n");
    for row in &matrix.rows {
        for cell in &row.cells {
            let _ = writeln!(out, "{},{},{}", row.attack, cell.profile, cell.outcome());
        }
    }
    out
}

struct NistGate {
    curve: &'static str,
    function: &'static str,
    target: f64,
    tolerance: f64,
}

const NIST_GATES: [NistGate; 3] = [
    NistGate { curve: "p256", function: "avf", target: 126.9, tolerance: 1.5 },
    NistGate { curve: "p256", function: "reference-hash", target: 127.9, tolerance: 1.5 },
    NistGate { curve: "sm2p256", function: "avf'", target: 125.8, tolerance: 1.5 },
];

const CTW_GATES: [(&str, &str); 2] = [("p256", "avf"), ("p256", "reference-hash")];
const CTW_FLOOR: f64 = 97.0;

fn cmd_entropy(
    curves: &[String],
    n: usize,
    depth: u32,
    seed: u64,
    out: Option<&std::path::Path>,
    format: Format,
) -> Result<ExitCode> {
    let defaults = ["p256".to_string(), "sm2p256".to_string()];
    let selected: &[String] = if curves.is_empty() { &defaults } else { curves };
    let groups = selected
        .iter()
        .map(|name| Group::by_name(name).map_err(Into::into))
        .collect::<Result<Vec<Group>>>()?;

    let mut reports: Vec<EntropyReport> = Vec::new();
    for group in &groups {
        reports.extend(run_curve_report(group, &FunctionTag::ALL, n, seed, depth)?);
    }

    let rendered = match format {
        Format::Json => reports_to_json(&reports),
        Format::Csv => reports_to_csv(&reports),
        Format::Table => entropy_table(&reports),
    };
    print!("{rendered}");
    if let Some(path) = out {
        fs::write(path, &rendered)
            .with_context(|| format!("writing report to {}", path.display()))?;
    }

    let mut failures = 0;
    for report in &reports {
        for gate in &NIST_GATES {
            if report.curve == gate.curve && report.function == gate.function {
                let delta = (report.nist_bits - gate.target).abs();
                let verdict = if delta <= gate.tolerance { "pass" } else { "FAIL" };
                eprintln!(
                    "gate {}/{} min-entropy {:.4} against {}+-{}: {verdict}",
                    gate.curve, gate.function, report.nist_bits, gate.target, gate.tolerance
                );
                if delta > gate.tolerance {
                    failures += 1;
                }
            }
        }
        for (curve, function) in CTW_GATES {
            if report.curve == curve && report.function == function {
                let verdict =
                    if report.ctw_ratio_percent >= CTW_FLOOR { "pass" } else { "FAIL" };
                eprintln!(
                    "gate {curve}/{function} compression ratio {:.2}% against >= {CTW_FLOOR}%: {verdict}",
                    report.ctw_ratio_percent
                );
                if report.ctw_ratio_percent < CTW_FLOOR {
                    failures += 1;
                }
            }
        }
    }
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn entropy_table(reports: &[EntropyReport]) -> String {
    let mut out = format!(
        "{:<10} {:<15} {:>7} {:>6} {:>10} {:>10}\n",
        "curve", "function", "n", "width", "nist-bits", "ctw-ratio%"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:<15} {:>7} {:>6} {:>10.4} {:>10.4}",
            r.curve, r.function, r.n, r.width, r.nist_bits, r.ctw_ratio_percent
        );
    }
    out
}
