//! Command-line driver: `check`, `ir`, `run` and `dist`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use slc_core::machine::FamilyReport;
use slc_core::{compile, ir_dump, run, Diagnostic, MachineConfig, RunResult, RunStatus, TraceEvent};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPILE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "slc", version, about = "SL-mini compiler and SVP machine simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check a program; print diagnostics.
    Check { file: PathBuf },
    /// Print the lowered IR.
    Ir { file: PathBuf },
    /// Run a program on the simulated machine.
    Run {
        file: PathBuf,
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long, value_enum, default_value_t = TraceFormat::None)]
        trace: TraceFormat,
        /// Write the trace here instead of standard error.
        #[arg(long, value_name = "PATH")]
        trace_out: Option<PathBuf>,
    },
    /// Show how the threads of a family were spread over cores.
    Dist {
        file: PathBuf,
        /// Thread function name, optionally `NAME#k` for its k-th family.
        #[arg(long)]
        family: String,
        #[command(flatten)]
        machine: MachineArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    None,
    Text,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MachineArgs {
    #[arg(long)]
    pub cores: Option<u32>,
    #[arg(long)]
    pub hw_threads: Option<u32>,
    #[arg(long)]
    pub family_entries: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Run every family sequentially inside its creator.
    #[arg(long)]
    pub serialize: bool,
    /// Let a thread that never writes a shared channel pass its input on.
    #[arg(long)]
    pub forward_unwritten: bool,
    /// JSON file with machine settings; flags override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

impl MachineArgs {
    pub fn resolve(&self) -> Result<MachineConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {}", path.display(), e))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {}", path.display(), e))?
            }
            None => MachineConfig::default(),
        };
        if let Some(v) = self.cores {
            cfg.cores = v;
        }
        if let Some(v) = self.hw_threads {
            cfg.hw_threads = v;
        }
        if let Some(v) = self.family_entries {
            cfg.family_entries = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        cfg.serialize_all |= self.serialize;
        cfg.forward_unwritten |= self.forward_unwritten;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse `args` (including the program name) and execute. Returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_COMPILE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "slc: {}", e);
            EXIT_COMPILE
        }
    }
}

fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> io::Result<i32> {
    match command {
        Command::Check { file } => {
            let Some(source) = read_source(file, err)? else { return Ok(EXIT_COMPILE) };
            match compile(&source, &file.display().to_string()) {
                Ok(_) => Ok(EXIT_OK),
                Err(diags) => {
                    report(&diags, err)?;
                    Ok(EXIT_COMPILE)
                }
            }
        }
        Command::Ir { file } => {
            let Some(program) = load(file, err)? else { return Ok(EXIT_COMPILE) };
            out.write_all(ir_dump(&program).as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Run {
            file,
            machine,
            trace,
            trace_out,
        } => {
            let Some(cfg) = machine_config(machine, err)? else { return Ok(EXIT_COMPILE) };
            let Some(program) = load(file, err)? else { return Ok(EXIT_COMPILE) };
            let result = run(&program, &cfg);
            out.write_all(result.output.as_bytes())?;
            out.flush()?;
            if *trace != TraceFormat::None {
                let text = render_trace(&result.trace, *trace);
                match trace_out {
                    Some(path) => fs::write(path, text)?,
                    None => err.write_all(text.as_bytes())?,
                }
            }
            report_status(&result, err)
        }
        Command::Dist { file, family, machine } => {
            let Some(cfg) = machine_config(machine, err)? else { return Ok(EXIT_COMPILE) };
            let Some(program) = load(file, err)? else { return Ok(EXIT_COMPILE) };
            let result = run(&program, &cfg);
            let selected = select_families(&result.families, family);
            if selected.is_empty() {
                writeln!(err, "slc: no family of `{}` was created", family)?;
                let _ = report_status(&result, err)?;
                return Ok(EXIT_COMPILE);
            }
            out.write_all(dist_table(&selected).as_bytes())?;
            report_status(&result, err)
        }
    }
}

fn read_source(path: &Path, err: &mut dyn Write) -> io::Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) => {
            writeln!(err, "slc: cannot read {}: {}", path.display(), e)?;
            Ok(None)
        }
    }
}

fn load(path: &Path, err: &mut dyn Write) -> io::Result<Option<slc_core::IrProgram>> {
    let Some(source) = read_source(path, err)? else { return Ok(None) };
    match compile(&source, &path.display().to_string()) {
        Ok(p) => Ok(Some(p)),
        Err(diags) => {
            report(&diags, err)?;
            Ok(None)
        }
    }
}

fn machine_config(args: &MachineArgs, err: &mut dyn Write) -> io::Result<Option<MachineConfig>> {
    match args.resolve() {
        Ok(c) => Ok(Some(c)),
        Err(e) => {
            writeln!(err, "slc: invalid machine configuration: {}", e)?;
            Ok(None)
        }
    }
}

fn report(diags: &[Diagnostic], err: &mut dyn Write) -> io::Result<()> {
    for d in diags {
        writeln!(err, "{}", d)?;
    }
    Ok(())
}

fn report_status(result: &RunResult, err: &mut dyn Write) -> io::Result<i32> {
    match &result.status {
        RunStatus::Ok => {}
        RunStatus::RuntimeError { code, message } => {
            writeln!(err, "runtime error [{}]: {}", code, message)?;
        }
        RunStatus::Deadlock { report } => {
            writeln!(err, "deadlock after {} steps:", result.steps)?;
            for line in report {
                writeln!(err, "  {}", line)?;
            }
        }
        RunStatus::StepLimit => {
            writeln!(err, "step limit reached after {} steps", result.steps)?;
        }
    }
    Ok(result.status.exit_code())
}

/// One line per event: aligned text, or JSON objects.
pub fn render_trace(trace: &[TraceEvent], format: TraceFormat) -> String {
    let mut s = String::new();
    for ev in trace {
        match format {
            TraceFormat::None => return String::new(),
            TraceFormat::Text => s.push_str(&ev.to_string()),
            TraceFormat::Json => s.push_str(&serde_json::to_string(ev).expect("trace events serialize")),
        }
        s.push('\n');
    }
    s
}

/// Families running `NAME`, or only the k-th of them for `NAME#k`.
pub fn select_families<'a>(families: &'a [FamilyReport], selector: &str) -> Vec<&'a FamilyReport> {
    let (name, nth) = match selector.split_once('#') {
        Some((n, k)) => match k.parse::<usize>() {
            Ok(k) => (n, Some(k)),
            Err(_) => return Vec::new(),
        },
        None => (selector, None),
    };
    let matching = families.iter().filter(|f| f.function == name);
    match nth {
        Some(k) => matching.skip(k).take(1).collect(),
        None => matching.collect(),
    }
}

/// `core c: [a,b)` lines, ordered by core then index.
pub fn dist_table(families: &[&FamilyReport]) -> String {
    let mut rows: Vec<(u32, i64, i64)> = families.iter().flat_map(|f| f.distribution.iter().copied()).collect();
    rows.sort();
    rows.iter().map(|(c, a, b)| format!("core {}: [{},{})\n", c, a, b)).collect()
}
