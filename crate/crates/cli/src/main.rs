use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use empdesign::emp::{
    direct_modules, enumerate_branch_emps, enumerate_cycle_emps_with, enumerate_for, hybrid_emps, join_set,
    CycleOptions,
};
use empdesign::montecarlo::{check_4cycle_conjecture, run_study, StudySpec, StudyTopology};
use empdesign::reproduce::{
    largest_module_is_direct, reproduce_table, ReproduceOptions, TableId, DEFAULT_NETWORKS, DEFAULT_SEED,
};
use empdesign::simoracle::simulate_information;
use empdesign::{information_matrix, rank_emps, Emp, Error, NetworkModel, SignalConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_MODEL: u8 = 3;
const EXIT_FAILED: u8 = 4;

/// Default signal setting when no config file is given.
const DEFAULT_SIGMA2: f64 = 1.0;
const DEFAULT_LAMBDA: f64 = 0.01;
const DEFAULT_SAMPLES: usize = 1_000_000;
/// `verify` passes when every |z| stays below this.
const DEFAULT_Z: f64 = 4.0;

#[derive(Parser)]
#[command(
    name = "empdesign",
    version,
    about = "Choose which nodes to excite and measure when identifying a dynamic network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the minimal excitation/measurement patterns of a topology.
    Enumerate {
        #[command(flatten)]
        topo: TopologyArgs,
        /// For even cycles, also list the single-doubled-node patterns.
        #[arg(long)]
        with_doubled: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Rank every minimal pattern of a network by the trace of its covariance.
    Rank {
        #[arg(long, value_name = "FILE")]
        network: PathBuf,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Recompute a reference table and compare it with the published values.
    Reproduce {
        /// `table1`, `table4`, …, `table14`, or `all`.
        table: String,
        /// Networks per randomized study.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the table's tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a randomized study and tally the winning pattern.
    Study {
        #[command(flatten)]
        topo: TopologyArgs,
        /// Study specification file (JSON); replaces the topology flags.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["cycle", "branch", "network", "hybrid"])]
        spec: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// On 4-node cycles, also score the direct-module prediction.
        #[arg(long)]
        conjecture: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare the analytic information matrix with a long simulation.
    Verify {
        #[arg(long, value_name = "FILE")]
        network: PathBuf,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Simulated samples after burn-in.
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Only the pattern with this label.
        #[arg(long)]
        emp: Option<String>,
        /// Largest acceptable |z|.
        #[arg(long, default_value_t = DEFAULT_Z)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct TopologyArgs {
    #[arg(long, value_name = "N")]
    cycle: Option<usize>,
    #[arg(long, value_name = "N")]
    branch: Option<usize>,
    #[arg(long, value_name = "FILE")]
    network: Option<PathBuf>,
    /// The six-node branch/loop example network.
    #[arg(long)]
    hybrid: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
    /// Write to FILE instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Pretty,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_model_domain() { EXIT_MODEL } else { EXIT_USAGE };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<NetworkModel, Failure> {
    NetworkModel::from_json_str(&read_file(path)?).map_err(|e| match e {
        Error::Parse(m) => usage(format!("{}: {m}", path.display())),
        other => other.into(),
    })
}

fn load_config(path: Option<&Path>, n: usize) -> Result<SignalConfig, Failure> {
    match path {
        Some(p) => SignalConfig::from_json_str(&read_file(p)?, n).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => Ok(SignalConfig::uniform(n, DEFAULT_SIGMA2, DEFAULT_LAMBDA)?),
    }
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Left-aligned text table.
fn pretty_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        format!("{}\n", padded.join("  ").trim_end())
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        "singular".into()
    }
}

fn topology_model(topo: &TopologyArgs) -> Result<Option<NetworkModel>, Failure> {
    match &topo.network {
        Some(p) => Ok(Some(load_network(p)?)),
        None => Ok(None),
    }
}

fn cmd_enumerate(topo: &TopologyArgs, with_doubled: bool, out: &OutputArgs) -> CmdResult {
    let model = topology_model(topo)?;
    let emps = match (topo.cycle, topo.branch, &model, topo.hybrid) {
        (Some(n), ..) => enumerate_cycle_emps_with(n, CycleOptions { even_doubled_family: with_doubled })?,
        (_, Some(n), ..) => enumerate_branch_emps(n)?,
        (_, _, Some(m), _) => enumerate_for(m)?,
        (.., true) => hybrid_emps(),
        _ => return Err(usage("give one of --cycle N, --branch N, --network FILE, --hybrid")),
    };
    // direct modules are structural; any stable gains will do
    let structure = match (topo.cycle, topo.branch, model, topo.hybrid) {
        (Some(n), ..) => Some(NetworkModel::cycle(n, &vec![0.5; n])?),
        (_, Some(n), ..) => Some(NetworkModel::branch(n, &vec![0.5; n - 1])?),
        (_, _, Some(m), _) => Some(m),
        (.., true) => Some(NetworkModel::hybrid_example(&[0.3; 6])?),
        _ => None,
    };
    let direct = |e: &Emp| {
        structure
            .as_ref()
            .map(|m| direct_modules(e, m).iter().map(|d| d.to_string()).collect::<Vec<_>>())
            .unwrap_or_default()
    };
    let text = match out.format {
        Format::Json => {
            let rows: Vec<_> = emps
                .iter()
                .map(|e| {
                    json!({
                        "label": e.label(),
                        "excited": e.excited(),
                        "measured": e.measured(),
                        "nu": e.nu(),
                        "direct_modules": direct(e),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&rows).unwrap() + "\n"
        }
        fmt => {
            let rows: Vec<Vec<String>> = emps
                .iter()
                .map(|e| {
                    vec![
                        e.label().unwrap_or("").to_string(),
                        join_set(e.excited(), ";"),
                        join_set(e.measured(), ";"),
                        e.nu().to_string(),
                        direct(e).join(";"),
                    ]
                })
                .collect();
            let header = ["label", "excited", "measured", "nu", "direct_modules"];
            if fmt == Format::Csv {
                csv_text(&header, &rows)
            } else {
                pretty_table(&header, &rows)
            }
        }
    };
    emit(out, &text)?;
    Ok(0)
}

fn cmd_rank(network: &Path, config: Option<&Path>, out: &OutputArgs) -> CmdResult {
    let model = load_network(network)?;
    let config = load_config(config, model.n())?;
    let emps = enumerate_for(&model)?;
    let ranked = rank_emps(&model, &emps, &config)?;
    let text = match out.format {
        Format::Json => {
            let rows: Vec<_> = ranked
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let mut v = r.result.to_json(&r.emp);
                    v["rank"] = json!(k + 1);
                    v["direct_modules"] =
                        json!(direct_modules(&r.emp, &model).iter().map(|d| d.to_string()).collect::<Vec<_>>());
                    v["largest_module_direct"] = json!(largest_module_is_direct(&r.emp, &model));
                    v
                })
                .collect();
            serde_json::to_string_pretty(&rows).unwrap() + "\n"
        }
        fmt => {
            let rows: Vec<Vec<String>> = ranked
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    vec![
                        (k + 1).to_string(),
                        r.emp.label().unwrap_or("").to_string(),
                        join_set(r.emp.excited(), ";"),
                        join_set(r.emp.measured(), ";"),
                        fmt_num(r.result.trace),
                        r.result.singular.to_string(),
                        direct_modules(&r.emp, &model).iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";"),
                        largest_module_is_direct(&r.emp, &model).to_string(),
                    ]
                })
                .collect();
            let header =
                ["rank", "label", "excited", "measured", "trace", "singular", "direct_modules", "largest_direct"];
            if fmt == Format::Csv {
                csv_text(&header, &rows)
            } else {
                pretty_table(&header, &rows)
            }
        }
    };
    emit(out, &text)?;
    Ok(0)
}

fn cmd_reproduce(table: &str, opts: ReproduceOptions, out: &OutputArgs) -> CmdResult {
    let ids: Vec<TableId> = if table == "all" { TableId::ALL.to_vec() } else { vec![table.parse()?] };
    let mut reports = Vec::new();
    for id in ids {
        reports.push(reproduce_table(id, &opts)?);
    }
    let text = match out.format {
        Format::Json => serde_json::to_string_pretty(&reports).unwrap() + "\n",
        Format::Csv => reports.iter().map(|r| r.to_csv()).collect::<Vec<_>>().join("\n"),
        Format::Pretty => reports.iter().map(|r| r.to_pretty()).collect::<Vec<_>>().join("\n"),
    };
    emit(out, &text)?;
    Ok(if reports.iter().all(|r| r.passed()) { 0 } else { EXIT_FAILED })
}

fn study_spec(
    topo: &TopologyArgs,
    spec: Option<&Path>,
    n: Option<usize>,
    seed: Option<u64>,
) -> Result<StudySpec, Failure> {
    let networks = n.unwrap_or(DEFAULT_NETWORKS);
    let master = seed.unwrap_or(DEFAULT_SEED);
    let mut spec = match (spec, topo.cycle, topo.branch, topo.hybrid) {
        (Some(p), ..) => serde_json::from_str::<StudySpec>(&read_file(p)?)
            .map_err(|e| usage(format!("{}: {}", p.display(), Error::from(e))))?,
        (_, Some(c), ..) => StudySpec::random_cycle(c, networks, master),
        (_, _, Some(b), _) => StudySpec::random_branch(b, networks, master),
        (.., true) => StudySpec::random_hybrid(networks, master),
        _ => return Err(usage("give one of --cycle N, --branch N, --hybrid, --spec FILE")),
    };
    // flags override a spec file
    if let Some(n) = n {
        spec.num_networks = n;
    }
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_study(spec: StudySpec, conjecture: bool, out: &OutputArgs) -> CmdResult {
    if conjecture && spec.topology != (StudyTopology::Cycle { n: 4 }) {
        return Err(usage("--conjecture needs a 4-node cycle study"));
    }
    let report = run_study(&spec)?;
    let conj = if conjecture { Some(check_4cycle_conjecture(&spec)?) } else { None };
    let text = match out.format {
        Format::Json => {
            let mut v = json!({
                "spec": report.spec,
                "labels": report.labels,
                "wins": report.wins,
                "percentages": report.percentages,
                "degenerate": report.degenerate,
                "largest_direct_rate": report.largest_direct_rate,
                "runtime_secs": report.runtime_secs,
            });
            if let Some(c) = &conj {
                v["conjecture"] = json!({
                    "hit_rate": c.hit_rate,
                    "median_ratio": c.median_ratio,
                    "share_above_100": c.share_above_100,
                });
            }
            serde_json::to_string_pretty(&v).unwrap() + "\n"
        }
        Format::Csv => report.to_csv(),
        Format::Pretty => {
            let rows: Vec<Vec<String>> = report
                .labels
                .iter()
                .zip(&report.wins)
                .zip(&report.percentages)
                .map(|((l, w), p)| vec![l.clone(), w.to_string(), format!("{p:.2}")])
                .collect();
            let mut s = pretty_table(&["emp", "wins", "%"], &rows);
            s.push_str(&format!(
                "networks {}  degenerate {}  seed {}  largest module direct in winner {:.2}%  ({:.2} s)\n",
                report.spec.num_networks,
                report.degenerate,
                report.spec.master_seed,
                100.0 * report.largest_direct_rate,
                report.runtime_secs
            ));
            if let Some(c) = &conj {
                s.push_str(&format!(
                    "conjecture hit rate {:.2}%  median trace ratio {:.3}  ratio > 100 in {:.2}%\n",
                    100.0 * c.hit_rate,
                    c.median_ratio,
                    100.0 * c.share_above_100
                ));
            }
            s
        }
    };
    emit(out, &text)?;
    Ok(0)
}

struct VerifyArgs<'a> {
    network: &'a Path,
    config: Option<&'a Path>,
    samples: usize,
    seed: u64,
    emp: Option<&'a str>,
    tol: f64,
}

fn cmd_verify(a: VerifyArgs<'_>, out: &OutputArgs) -> CmdResult {
    let model = load_network(a.network)?;
    let config = load_config(a.config, model.n())?;
    let mut emps = enumerate_for(&model)?;
    if let Some(label) = a.emp {
        emps.retain(|e| e.label() == Some(label));
        if emps.is_empty() {
            return Err(usage(format!("no pattern labelled {label:?}")));
        }
    }
    let mut rows = Vec::new();
    let mut all_pass = true;
    for emp in &emps {
        let analytic = information_matrix(&model, emp, &config)?;
        let sim = simulate_information(&model, emp, &config, a.samples, a.seed)?;
        let z = sim.max_abs_z(&analytic.information);
        let pass = z < a.tol;
        all_pass &= pass;
        rows.push((emp, z, pass));
    }
    let text = match out.format {
        Format::Json => {
            let v: Vec<_> = rows.iter().map(|(e, z, p)| json!({"emp": e.label(), "max_abs_z": z, "pass": p})).collect();
            serde_json::to_string_pretty(&json!({"samples": a.samples, "seed": a.seed, "results": v})).unwrap() + "\n"
        }
        fmt => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(e, z, p)| {
                    vec![
                        e.label().unwrap_or("").to_string(),
                        format!("{z:.3}"),
                        if *p { "pass" } else { "FAIL" }.into(),
                    ]
                })
                .collect();
            let header = ["emp", "max_abs_z", "verdict"];
            if fmt == Format::Csv {
                csv_text(&header, &table)
            } else {
                pretty_table(&header, &table)
                    + &format!("T = {}, seed {}, pass iff max |z| < {}\n", a.samples, a.seed, a.tol)
            }
        }
    };
    emit(out, &text)?;
    Ok(if all_pass { 0 } else { EXIT_FAILED })
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Enumerate { topo, with_doubled, out } => cmd_enumerate(topo, *with_doubled, out),
        Command::Rank { network, config, out } => cmd_rank(network, config.as_deref(), out),
        Command::Reproduce { table, n, seed, tol, out } => {
            let opts = ReproduceOptions {
                networks: n.unwrap_or(DEFAULT_NETWORKS),
                seed: seed.unwrap_or(DEFAULT_SEED),
                tol: *tol,
            };
            cmd_reproduce(table, opts, out)
        }
        Command::Study { topo, spec, n, seed, conjecture, out } => {
            let spec = study_spec(topo, spec.as_deref(), *n, *seed)?;
            cmd_study(spec, *conjecture, out)
        }
        Command::Verify { network, config, samples, seed, emp, tol, out } => cmd_verify(
            VerifyArgs {
                network,
                config: config.as_deref(),
                samples: *samples,
                seed: *seed,
                emp: emp.as_deref(),
                tol: *tol,
            },
            out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
