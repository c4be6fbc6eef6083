//! Command-line driver: flag/config merging, dispatch to `curvlab`, and
//! report writing.
//!
//! Exit codes: 0 success, 1 usage/input errors, 2 assertion-style failures
//! (a check reported violations, or two independent routes disagreed).

pub mod args;
mod commands;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use curvlab::CurvError;

pub use args::{Cli, Command, Format};

pub const THREADS_ENV: &str = "CURVLAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Curv(#[from] CurvError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Curv(CurvError::SearchInconsistency { .. }) => 2,
            _ => 1,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Result of a successful dispatch.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    /// Rendered report; already written when `--out` was given.
    pub text: String,
    pub written_to: Option<PathBuf>,
}

/// Settings that apply to every subcommand.
#[derive(Debug, Clone)]
pub(crate) struct Globals {
    pub out: Option<PathBuf>,
    pub format: Format,
    pub force: bool,
}

/// What a subcommand hands back for rendering.
pub(crate) struct CommandOutput {
    pub config: Value,
    pub seed: u64,
    pub result: Value,
    /// Header followed by data rows.
    pub csv: Vec<Vec<String>>,
    /// Replaces the JSON report entirely (tensor files from `model`).
    pub raw_json: Option<String>,
    pub failed: bool,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a Value,
    result: &'a Value,
    /// Only field that differs between identical runs.
    timestamp: Timestamp,
}

#[derive(Serialize)]
struct Timestamp {
    utc: String,
    wall_clock_seconds: f64,
}

/// Sizes the global rayon pool from `CURVLAB_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // a second call in the same process finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Config {
            path: path.to_path_buf(),
            message: "expected a JSON object".into(),
        }),
        Err(e) => Err(CliError::Config {
            path: path.to_path_buf(),
            message: format!("line {}, column {}: {e}", e.line(), e.column()),
        }),
    }
}

/// Overlays the flags that were given on top of the config-file values.
/// Keys in the file must name flags of the subcommand.
pub(crate) fn merge<T: Serialize + DeserializeOwned + Default>(
    flags: &T,
    file: Map<String, Value>,
    path: Option<&Path>,
) -> Result<T, CliError> {
    let config_error = |message: String| CliError::Config {
        path: path.map(Path::to_path_buf).unwrap_or_default(),
        message,
    };
    let Value::Object(allowed) = serde_json::to_value(T::default()).expect("flag structs serialize") else {
        unreachable!("flag structs serialize to objects")
    };
    if let Some(k) = file.keys().find(|k| !allowed.contains_key(*k)) {
        let mut names: Vec<&str> = allowed.keys().map(String::as_str).collect();
        names.sort_unstable();
        return Err(config_error(format!("unknown key `{k}` (expected one of {})", names.join(", "))));
    }
    let mut merged = file;
    if let Value::Object(given) = serde_json::to_value(flags).expect("flag structs serialize") {
        merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| config_error(e.to_string()))
}

fn take_global<T: DeserializeOwned>(
    file: &mut Map<String, Value>,
    key: &str,
    path: &Path,
) -> Result<Option<T>, CliError> {
    file.remove(key)
        .map(|v| {
            serde_json::from_value(v).map_err(|e| CliError::Config {
                path: path.to_path_buf(),
                message: format!("`{key}`: {e}"),
            })
        })
        .transpose()
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let utc = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let name = cli.command.name();

    let mut file = Map::new();
    let mut globals = Globals {
        out: cli.global.out.clone(),
        format: cli.global.format.unwrap_or_default(),
        force: cli.global.force,
    };
    if let Some(path) = &cli.global.config {
        file = load_config(path)?;
        if let Some(cmd) = take_global::<String>(&mut file, "command", path)? {
            if cmd != name {
                return Err(CliError::Config {
                    path: path.clone(),
                    message: format!("config is for `{cmd}`, not `{name}`"),
                });
            }
        }
        let out: Option<PathBuf> = take_global(&mut file, "out", path)?;
        let format: Option<Format> = take_global(&mut file, "format", path)?;
        let force: Option<bool> = take_global(&mut file, "force", path)?;
        globals.out = globals.out.or(out);
        globals.format = cli.global.format.or(format).unwrap_or_default();
        globals.force |= force.unwrap_or(false);
    }
    let cfg = cli.global.config.as_deref();

    let output = match &cli.command {
        Command::Model(a) => commands::model(merge(a, file, cfg)?, &globals)?,
        Command::Membership(a) => commands::membership(merge(a, file, cfg)?, &globals)?,
        Command::Flow(a) => commands::flow(merge(a, file, cfg)?, &globals)?,
        Command::Invariance(a) => commands::invariance(merge(a, file, cfg)?)?,
        Command::ConditionCheck(a) => commands::condition_check(merge(a, file, cfg)?)?,
        Command::Rigidity(a) => commands::rigidity(merge(a, file, cfg)?, &globals)?,
    };

    let mut text = match (globals.format, &output.raw_json) {
        (Format::Csv, _) => output::csv(&output.csv)?,
        (Format::Json, Some(raw)) => raw.clone(),
        (Format::Json, None) => {
            let doc = ReportDoc {
                tool: "curvlab",
                version: env!("CARGO_PKG_VERSION"),
                command: name,
                seed: output.seed,
                config: &output.config,
                result: &output.result,
                timestamp: Timestamp {
                    utc,
                    wall_clock_seconds: started.elapsed().as_secs_f64(),
                },
            };
            serde_json::to_string_pretty(&doc).expect("reports serialize")
        }
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    if let Some(path) = &globals.out {
        output::write_atomic(path, &text)?;
    }
    Ok(Outcome {
        exit_code: if output.failed { 2 } else { 0 },
        text,
        written_to: globals.out,
    })
}

/// Parses `args` (program name first), runs, and prints to the given
/// streams. Returns the process exit code.
pub fn execute<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            if outcome.written_to.is_none() {
                let _ = stdout.write_all(outcome.text.as_bytes());
            }
            outcome.exit_code
        }
        Err(e) => {
            let _ = writeln!(stderr, "curvlab: {e}");
            e.exit_code()
        }
    }
}
