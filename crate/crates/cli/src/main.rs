//! `puppetai`: run, simulate, validate and inspect the puppet control stack.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use puppetai_core::config::{load_config, AppConfig};
use puppetai_core::console::ConsoleServer;
use puppetai_core::dsl::{compile_sequence, format_sequence, parse_sequence, ResolveMode};
use puppetai_core::gestures::load_library;
use puppetai_core::kinematics::{cable_displacement, forward_kinematics, BendState, PlaneKey, PuppetModel};
use puppetai_core::orchestrator::{
    make_backend, run_live, run_session, LiveOptions, LogSink, Orchestrator, Perception, Phase, Script, SessionReport,
    SimOptions,
};

#[derive(Parser)]
#[command(
    name = "puppetai",
    version,
    about = "Control stack for a cable-driven continuum puppet"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct ConfigArg {
    /// Config document; the bundled demo setup when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Live loop with perception and the console server.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Overrides the configured console address.
        #[arg(long)]
        bind: Option<String>,
        /// Trajectory log (JSON lines); none when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Stop after this many ticks.
        #[arg(long, hide = true)]
        max_ticks: Option<u64>,
    },
    /// Deterministic scripted run under virtual time.
    Sim {
        #[command(flatten)]
        config: ConfigArg,
        /// Timed client messages to replay.
        #[arg(long)]
        script: PathBuf,
        /// Trajectory log (JSON lines).
        #[arg(long, default_value = "trajectory.jsonl")]
        log: PathBuf,
        /// Writes the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Writes every broadcast message here, one per line.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Execute one sequence on the simulator.
    Play {
        #[command(flatten)]
        config: ConfigArg,
        /// Action sequence, e.g. "[Waving][1][Joy][1]".
        sequence: String,
        #[arg(long, default_value = "trajectory.jsonl")]
        log: PathBuf,
    },
    /// Check a sequence, gesture library, model or config.
    Validate {
        #[arg(long, group = "target")]
        seq: Option<String>,
        #[arg(long, group = "target")]
        gestures: Option<PathBuf>,
        #[arg(long, group = "target")]
        model: Option<PathBuf>,
        #[arg(long = "config", group = "target")]
        config: Option<PathBuf>,
        /// Model used to check `--gestures` and `--seq` against.
        #[arg(long = "against-model")]
        against_model: Option<PathBuf>,
    },
    /// Print forward kinematics and cable displacements for a pose.
    Kinematics {
        #[arg(long)]
        model: Option<PathBuf>,
        /// SECTION:PLANE:DEG, repeatable.
        #[arg(long = "bend", value_name = "SECTION:PLANE:DEG")]
        bends: Vec<String>,
    },
    /// Console server driving the loop without perception.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long, hide = true)]
        max_ticks: Option<u64>,
    },
}

/// A failure with a machine-readable code and an exit status.
struct Failure {
    code: String,
    message: String,
    status: u8,
}

impl Failure {
    fn validation(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            status: 1,
        }
    }

    fn runtime(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            status: 2,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.status)
        }
    }
}

fn dispatch(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Run {
            config,
            bind,
            log,
            max_ticks,
        } => live(config, bind, log, max_ticks, true),
        Cmd::Serve {
            config,
            bind,
            max_ticks,
        } => live(config, bind, None, max_ticks, false),
        Cmd::Sim {
            config,
            script,
            log,
            report,
            transcript,
        } => sim(config, &script, &log, report.as_deref(), transcript.as_deref()),
        Cmd::Play { config, sequence, log } => play(config, &sequence, &log),
        Cmd::Validate {
            seq,
            gestures,
            model,
            config,
            against_model,
        } => validate(seq, gestures, model, config, against_model),
        Cmd::Kinematics { model, bends } => kinematics(model, &bends),
    }
}

fn config_of(arg: &ConfigArg) -> Result<AppConfig, Failure> {
    match &arg.config {
        None => Ok(AppConfig::demo()),
        Some(p) => load_config(p).map_err(|e| Failure::validation(e.code(), e.to_string())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::runtime("IoError", format!("{}: {e}", path.display())))
}

fn write_report(report: &SessionReport, out: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    match out {
        None => println!("{text}"),
        Some(p) => {
            let mut f = create(p)?;
            writeln!(f, "{text}").map_err(|e| Failure::runtime("IoError", e.to_string()))?;
        }
    }
    Ok(())
}

fn fault_check(report: &SessionReport) -> CmdResult {
    match report.faults.first() {
        None => Ok(()),
        Some(f) => Err(Failure::runtime(
            "TorqueFault",
            format!(
                "channel {} faulted at tick {} ({} faults total)",
                f.channel,
                f.tick,
                report.faults.len()
            ),
        )),
    }
}

fn sim(arg: ConfigArg, script: &Path, log: &Path, report: Option<&Path>, transcript: Option<&Path>) -> CmdResult {
    let config = config_of(&arg)?;
    let text = std::fs::read_to_string(script)
        .map_err(|e| Failure::validation("FileNotFound", format!("{}: {e}", script.display())))?;
    let script = Script::from_json(&text).map_err(|e| Failure::validation("SchemaError", e.to_string()))?;
    let sink: LogSink = Box::new(create(log)?);
    let options = SimOptions {
        collect_transcript: transcript.is_some(),
        ..SimOptions::default()
    };
    let out = run_session(&config, &script, Some(sink), options)
        .map_err(|e| Failure::runtime("RuntimeError", e.to_string()))?;
    if let Some(mut sink) = out.log {
        sink.flush().map_err(|e| Failure::runtime("IoError", e.to_string()))?;
    }
    if let Some(p) = transcript {
        let mut f = create(p)?;
        for line in &out.transcript {
            writeln!(f, "{line}").map_err(|e| Failure::runtime("IoError", e.to_string()))?;
        }
    }
    write_report(&out.report, report)?;
    fault_check(&out.report)
}

fn play(arg: ConfigArg, text: &str, log: &Path) -> CmdResult {
    let config = config_of(&arg)?;
    let seq = compile_sequence(text, &config.library, ResolveMode::Strict)
        .map_err(|e| Failure::validation(e.code(), e.to_string()))?;
    let backend = make_backend(&config).map_err(|e| Failure::runtime("BackendError", e.to_string()))?;
    let mut orch = Orchestrator::new(&config, backend, Some(Box::new(create(log)?)));
    orch.play(text, seq);
    while orch.phase() == Phase::Performing {
        orch.control_tick()
            .map_err(|e| Failure::runtime("ActuationError", e.to_string()))?;
    }
    let (report, sink) = orch.finish().map_err(|e| Failure::runtime("IoError", e.to_string()))?;
    drop(sink);
    println!(
        "played {} in {} ticks ({} s)",
        report.sequences[0].sequence, report.ticks, report.duration_s
    );
    fault_check(&report)
}

fn validate(
    seq: Option<String>,
    gestures: Option<PathBuf>,
    model: Option<PathBuf>,
    config: Option<PathBuf>,
    against_model: Option<PathBuf>,
) -> CmdResult {
    let reference = match &against_model {
        Some(p) => read_model(p)?,
        None => PuppetModel::demo(),
    };
    if let Some(text) = seq {
        let parsed = parse_sequence(&text).map_err(|e| Failure::validation(e.code(), e.to_string()))?;
        let library = puppetai_core::gestures::builtin_library(&reference)
            .map_err(|e| Failure::validation("LibraryInvalid", e.to_string()))?;
        let resolved = puppetai_core::dsl::resolve_sequence(&parsed, &library, ResolveMode::Strict)
            .map_err(|e| Failure::validation("UnknownGesture", e.to_string()))?;
        println!("ok {} ({} s)", format_sequence(&parsed), resolved.total_duration_s());
    } else if let Some(p) = gestures {
        let text = read(&p)?;
        let lib = load_library(&text).map_err(|e| Failure::validation("LibraryInvalid", e.to_string()))?;
        let diags = lib.check_against(&reference);
        if !diags.is_empty() {
            let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
            return Err(Failure::validation("ModelShapeMismatch", lines.join("\n")));
        }
        println!("ok {} gestures", lib.len());
    } else if let Some(p) = model {
        let m = read_model(&p)?;
        println!("ok model `{}` with {} sections", m.name, m.sections.len());
    } else if let Some(p) = config {
        let c = load_config(&p).map_err(|e| Failure::validation(e.code(), e.to_string()))?;
        println!("ok config with {} channels at {} Hz", c.channels.len(), c.tick_hz);
    } else {
        return Err(Failure::validation(
            "MissingTarget",
            "give one of --seq, --gestures, --model, --config",
        ));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::validation("FileNotFound", format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<PuppetModel, Failure> {
    let text = read(path)?;
    PuppetModel::from_json(&text).map_err(|e| Failure::validation("ModelInvalid", e.to_string()))
}

fn parse_bend(spec: &str) -> Result<(PlaneKey, f64), Failure> {
    let bad = || Failure::validation("BadBend", format!("expected SECTION:PLANE:DEG, got `{spec}`"));
    let (key, deg) = spec.rsplit_once(':').ok_or_else(bad)?;
    let key: PlaneKey = key.parse().map_err(|_| bad())?;
    let deg: f64 = deg.parse().map_err(|_| bad())?;
    Ok((key, deg))
}

fn kinematics(model: Option<PathBuf>, bends: &[String]) -> CmdResult {
    let model = match model {
        Some(p) => read_model(&p)?,
        None => PuppetModel::demo(),
    };
    let mut state = BendState::zero(&model);
    for b in bends {
        let (key, deg) = parse_bend(b)?;
        if model.plane(&key).is_none() {
            return Err(Failure::validation(
                "UnknownPlane",
                format!("no plane `{key}` in the model"),
            ));
        }
        state.set(key, deg);
    }
    let frames =
        forward_kinematics(&model, &state).map_err(|e| Failure::validation("KinematicsError", e.to_string()))?;
    println!(
        "{:<12} {:>5} {:>12} {:>12} {:>12}",
        "section", "frame", "x_mm", "y_mm", "z_mm"
    );
    for (section, fs) in &frames {
        for (i, f) in fs.iter().enumerate() {
            let p = f.position_mm;
            println!("{section:<12} {i:>5} {:>12.6} {:>12.6} {:>12.6}", p.x, p.y, p.z);
        }
    }
    println!();
    println!("{:<22} {:>10} {:>16}", "plane", "bend_deg", "cable_mm");
    for key in model.plane_keys() {
        let (seg, _) = model.plane(&key).expect("listed plane");
        let deg = state.get(&key).unwrap_or(0.0);
        let mm = cable_displacement(seg, &key.plane, deg)
            .map_err(|e| Failure::validation("KinematicsError", e.to_string()))?;
        println!("{:<22} {deg:>10.3} {mm:>16.9}", key.to_string());
    }
    Ok(())
}

fn live(
    arg: ConfigArg,
    bind: Option<String>,
    log: Option<PathBuf>,
    max_ticks: Option<u64>,
    perception: bool,
) -> CmdResult {
    let config = config_of(&arg)?;
    let addr = bind.unwrap_or_else(|| config.console_bind.clone());
    let server = ConsoleServer::bind(&addr).map_err(|e| Failure::runtime("BindError", format!("{addr}: {e}")))?;
    eprintln!("console at ws://{}", server.local_addr());
    let shutdown = Arc::new(AtomicBool::new(false));
    {
        let flag = Arc::clone(&shutdown);
        ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
            .map_err(|e| Failure::runtime("SignalError", e.to_string()))?;
    }
    let log: Option<LogSink> = match log {
        Some(p) => Some(Box::new(create(&p)?)),
        None => None,
    };
    let hub = server.hub();
    let report = run_live(
        &config,
        LiveOptions {
            inbound: server.inbound(),
            broadcast: Box::new(move |m| hub.broadcast(m)),
            shutdown,
            perception: perception.then(|| Perception::from_config(&config.responder)),
            wall_clock: true,
            max_ticks,
            log,
        },
    )
    .map_err(|e| Failure::runtime("RuntimeError", e.to_string()))?;
    eprintln!(
        "stopped after {} ticks: {} sequences, {} faults",
        report.ticks,
        report.sequences.len(),
        report.faults.len()
    );
    fault_check(&report)
}
