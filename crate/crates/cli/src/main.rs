use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use hsrc_core::analysis::{self, EnergyParams, StopContext};
use hsrc_core::exec::Execution;
use hsrc_core::experiment::{self, CalibrationSpec, CalibrationTarget, EllTable, ExperimentSpec, ResultRow};
use hsrc_core::hsrc_m2::dump_decoder_csv;
use hsrc_core::omt::{self, TourInstance};
use hsrc_core::protocol::{self, Scheme};
use hsrc_core::rng::{Purpose, RngStream};
use hsrc_core::scenario::{self, ScenarioConfig};

const DEFAULT_ELL_TABLE: &str = "data/ell_table.toml";

#[derive(Parser)]
#[command(name = "hsrc", version, about = "Multi-type node cardinality estimation with a mobile base station")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    /// SRC_M end to end at every n of the range.
    EndToEnd,
    /// The phase-2 frame alone at its design load.
    DesignLoad,
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout; `-` is stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and emit one row per (scheme, sweep value).
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<u32>,
        /// ℓ table used when the experiment file does not fix ℓ.
        #[arg(long, default_value = DEFAULT_ELL_TABLE)]
        ell_table: PathBuf,
        /// Run replicates on one thread.
        #[arg(long)]
        sequential: bool,
        /// Instead of the sweep, print the per-stop HSRC-M1 trace of the
        /// first replicate at the first sweep value as JSON.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Expected slots and per-node energy of HSRC-M1 for each stop context.
    Analyze {
        ctx: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Find the smallest ℓ meeting (ε, δ) and record it in the ℓ table.
    CalibrateEll {
        #[arg(long, default_value_t = 0.03)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[arg(long, default_value_t = 30)]
        trials: u32,
        /// Comma-separated populations.
        #[arg(long, value_delimiter = ',', default_value = "100,200,500,1000,2000,5000")]
        n_values: Vec<u32>,
        #[arg(long, default_value_t = 500)]
        replicates: u32,
        #[arg(long, default_value_t = 1 << 16)]
        max_ell: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "end-to-end")]
        target: Target,
        /// Table to update (created if missing).
        #[arg(long, default_value = DEFAULT_ELL_TABLE)]
        out: PathBuf,
    },
    /// Tour planning.
    Omt {
        #[command(subcommand)]
        command: OmtCommand,
    },
    /// Network setups.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// HSRC-M2 decoding tables.
    Decoder {
        #[command(subcommand)]
        command: DecoderCommand,
    },
}

#[derive(Subcommand)]
enum OmtCommand {
    Solve {
        file: PathBuf,
        #[arg(long, conflicts_with = "exact", required_unless_present = "exact")]
        greedy: bool,
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = omt::EXACT_STOP_LIMIT)]
        max_stops: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    Generate {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Emit node and stop CSV; with `--out DIR` they go to DIR/nodes.csv
        /// and DIR/stops.csv.
        #[arg(long)]
        dump: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DecoderCommand {
    Dump {
        #[arg(long = "T")]
        types: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out.filter(|p| p.as_os_str() != "-") {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn csv_text(header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn simulate(
    spec_path: &Path,
    seed: Option<u64>,
    replicates: Option<u32>,
    ell_table: &Path,
    sequential: bool,
    trace: bool,
    output: &Output,
) -> Result<()> {
    let mut spec = ExperimentSpec::from_toml_str(&read(spec_path)?).with_context(|| format!("in {}", spec_path.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(r) = replicates {
        spec.replicates = r;
    }
    spec.validate()?;
    let table = if ell_table.exists() {
        Some(EllTable::load(ell_table).with_context(|| format!("loading {}", ell_table.display()))?)
    } else {
        None
    };
    if trace {
        return emit(output.out.as_deref(), &trace_json(&spec, table.as_ref())?);
    }
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let rows = experiment::run_experiment(&spec, table.as_ref(), exec)?;
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => csv_text(&ResultRow::CSV_HEADER, rows.iter().map(ResultRow::csv_record))?,
    };
    let out = output.out.clone().or_else(|| spec.output.as_ref().map(PathBuf::from));
    emit(out.as_deref(), &text)
}

fn trace_json(spec: &ExperimentSpec, table: Option<&EllTable>) -> Result<String> {
    let (sc, acc) = spec.point(spec.sweep.values[0])?;
    let config = spec.protocol_config(&acc, table)?;
    let mut rng = RngStream::for_replicate(spec.seed, 0, Purpose::Scenario).rng();
    let g = scenario::generate(&sc, &mut rng)?;
    let mut rng = RngStream::for_replicate(spec.seed, 0, Purpose::Protocol(1)).rng();
    let out = protocol::run(Scheme::HsrcM1, &g.deployment, &config, &mut rng)?;
    let stops: Vec<_> = out
        .stops
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let t = s.m1.as_ref();
            json!({
                "stop": m + 1,
                "K": t.map(|t| t.k),
                "R": t.map(|t| t.r),
                "slots": s.slots(),
                "phase2_slots": s.phase2.total(),
                "estimates": s.estimates,
            })
        })
        .collect();
    Ok(serde_json::to_string_pretty(&stops)? + "\n")
}

#[derive(Deserialize)]
struct AnalyzeInput {
    #[serde(default)]
    energy: EnergyParams,
    stops: Vec<StopContext>,
}

#[derive(Serialize)]
struct AnalyzeRow {
    stop: usize,
    q1: f64,
    q2: f64,
    q3: f64,
    e_k: f64,
    e_r: f64,
    e_zbp: f64,
    delta1: f64,
    delta2: f64,
    delta_stop: f64,
    energy: Vec<f64>,
}

fn analyze(ctx: &Path, output: &Output) -> Result<()> {
    let input: AnalyzeInput = toml::from_str(&read(ctx)?).with_context(|| format!("parsing {}", ctx.display()))?;
    if !input.energy.is_valid() {
        bail!("energy costs must be finite and non-negative");
    }
    let mut rows = Vec::new();
    for (m, c) in input.stops.iter().enumerate() {
        c.validate().with_context(|| format!("stop {}", m + 1))?;
        let q = analysis::q_probs(c);
        let e = analysis::expected_counts(c);
        let energy = (0..c.types())
            .map(|b| analysis::stop_energy(b, c, &input.energy))
            .collect::<hsrc_core::Result<Vec<f64>>>()
            .with_context(|| format!("stop {}", m + 1))?;
        rows.push(AnalyzeRow {
            stop: m + 1,
            q1: q.q1,
            q2: q.q2,
            q3: q.q3,
            e_k: e.e_k,
            e_r: e.e_r,
            e_zbp: e.e_zbp,
            delta1: e.delta1,
            delta2: e.delta2,
            delta_stop: e.delta_stop,
            energy,
        });
    }
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => {
            let header = [
                "stop", "q1", "q2", "q3", "e_k", "e_r", "e_zbp", "delta1", "delta2", "delta_stop", "energy_by_type",
            ];
            csv_text(
                &header,
                rows.iter().map(|r| {
                    let mut rec = vec![r.stop.to_string()];
                    rec.extend(
                        [r.q1, r.q2, r.q3, r.e_k, r.e_r, r.e_zbp, r.delta1, r.delta2, r.delta_stop]
                            .iter()
                            .map(|x| x.to_string()),
                    );
                    rec.push(r.energy.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"));
                    rec
                }),
            )?
        }
    };
    emit(output.out.as_deref(), &text)
}

#[allow(clippy::too_many_arguments)]
fn calibrate(
    epsilon: f64,
    delta: f64,
    trials: u32,
    n_values: Vec<u32>,
    replicates: u32,
    max_ell: u32,
    seed: u64,
    target: Target,
    out: &Path,
) -> Result<()> {
    let mut spec = CalibrationSpec::new(epsilon, delta);
    spec.trials = trials;
    spec.n_values = n_values;
    spec.replicates = replicates;
    spec.max_ell = max_ell;
    spec.seed = seed;
    spec.target = match target {
        Target::EndToEnd => CalibrationTarget::EndToEnd,
        Target::DesignLoad => CalibrationTarget::DesignLoad,
    };
    let entry = experiment::calibrate_ell(&spec, Execution::Parallel)?;
    let mut table = if out.exists() {
        EllTable::load(out).with_context(|| format!("loading {}", out.display()))?
    } else {
        EllTable::default()
    };
    println!("epsilon={epsilon} delta={delta} W={trials}: ell={}", entry.ell);
    table.insert(entry);
    emit(Some(out), &table.to_toml_string()?)
}

fn omt_solve(file: &Path, exact: bool, max_stops: usize, output: &Output) -> Result<()> {
    let inst = TourInstance::parse(&read(file)?).with_context(|| format!("parsing {}", file.display()))?;
    inst.check()?;
    let (tour, termination, method) = if exact {
        match omt::exact_tour(&inst, max_stops)? {
            Some(t) => (t, None, "exact"),
            None => bail!("no feasible tour exists"),
        }
    } else {
        let (t, r) = omt::greedy_tour(&inst);
        (t, Some(r), "greedy")
    };
    let feas = omt::validate(&inst, &tour.stops);
    let violations: Vec<String> = feas.violations.iter().map(|v| v.to_string()).collect();
    let text = match output.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "method": method,
                "tour": tour.stops,
                "cost": tour.cost,
                "energy": tour.energy,
                "covered": tour.covered,
                "nodes": inst.nodes(),
                "feasible": feas.is_feasible(),
                "termination": termination,
                "violations": violations,
            }))? + "\n"
        }
        Format::Csv => {
            let term = termination.map(|t| format!("{t:?}")).unwrap_or_default();
            let stops = tour.stops.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ");
            csv_text(
                &["method", "tour", "cost", "energy", "covered", "nodes", "feasible", "termination", "violations"],
                [vec![
                    method.to_string(),
                    stops,
                    tour.cost.to_string(),
                    tour.energy.to_string(),
                    tour.covered.to_string(),
                    inst.nodes().to_string(),
                    feas.is_feasible().to_string(),
                    term,
                    violations.join("; "),
                ]],
            )?
        }
    };
    emit(output.out.as_deref(), &text)
}

fn scenario_generate(config: &Path, seed: u64, dump: bool, out: Option<&Path>) -> Result<()> {
    let cfg: ScenarioConfig = toml::from_str(&read(config)?).with_context(|| format!("parsing {}", config.display()))?;
    cfg.validate()?;
    let mut rng = RngStream::for_replicate(seed, 0, Purpose::Scenario).rng();
    let g = scenario::generate(&cfg, &mut rng)?;
    if !dump {
        let per_stop: Vec<usize> = g.deployment.stops.iter().map(Vec::len).collect();
        let summary = json!({
            "nodes": g.population.nodes.len(),
            "counts": g.population.counts,
            "q": g.population.q,
            "active": g.deployment.true_counts(),
            "nodes_per_stop": per_stop,
        });
        return emit(out, &(serde_json::to_string_pretty(&summary)? + "\n"));
    }
    let mut in_range = vec![Vec::new(); g.population.nodes.len()];
    for (m, stop) in g.deployment.stops.iter().enumerate() {
        for &k in stop {
            in_range[k as usize].push((m + 1).to_string());
        }
    }
    let nodes = csv_text(
        &["node", "type", "x", "y", "active", "stops"],
        g.population.nodes.iter().enumerate().map(|(k, n)| {
            vec![
                (k + 1).to_string(),
                (n.type_index + 1).to_string(),
                n.x.to_string(),
                n.y.to_string(),
                u8::from(n.active).to_string(),
                in_range[k].join(" "),
            ]
        }),
    )?;
    let stops = csv_text(
        &["stop", "x", "y", "range", "nodes"],
        g.plan.stops.iter().enumerate().map(|(m, &(x, y))| {
            vec![
                (m + 1).to_string(),
                x.to_string(),
                y.to_string(),
                g.plan.range.to_string(),
                g.deployment.stops[m].len().to_string(),
            ]
        }),
    )?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            emit(Some(&dir.join("nodes.csv")), &nodes)?;
            emit(Some(&dir.join("stops.csv")), &stops)
        }
        None => emit(None, &format!("{nodes}\n{stops}")),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            spec,
            seed,
            replicates,
            ell_table,
            sequential,
            trace,
            output,
        } => simulate(&spec, seed, replicates, &ell_table, sequential, trace, &output),
        Command::Analyze { ctx, output } => analyze(&ctx, &output),
        Command::CalibrateEll {
            epsilon,
            delta,
            trials,
            n_values,
            replicates,
            max_ell,
            seed,
            target,
            out,
        } => calibrate(epsilon, delta, trials, n_values, replicates, max_ell, seed, target, &out),
        Command::Omt {
            command:
                OmtCommand::Solve {
                    file,
                    greedy: _,
                    exact,
                    max_stops,
                    output,
                },
        } => omt_solve(&file, exact, max_stops, &output),
        Command::Scenario {
            command: ScenarioCommand::Generate { config, seed, dump, out },
        } => scenario_generate(&config, seed, dump, out.as_deref()),
        Command::Decoder {
            command: DecoderCommand::Dump { types, out },
        } => emit(out.as_deref(), &dump_decoder_csv(types)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
