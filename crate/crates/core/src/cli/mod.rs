//! Command-line front end: configuration, subcommands and file output.

pub mod commands;
pub mod config;
pub mod output;
pub mod reproduce;

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use config::{parse_config, RunConfig};
use output::{ErrorRecord, Writer};

pub const SUBCOMMANDS: [&str; 7] = ["meanfield", "steady", "sweep", "traj", "qfunc", "fpe", "reproduce"];

/// Exit status for a failed run: 2 for configuration problems, 3 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownPreset(_) => 2,
        _ => 3,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) | Error::UnknownPreset(_) => "config",
        _ => "numerical",
    }
}

/// One invocation of the tool.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub command: String,
    pub tag: Option<String>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn dispatch(inv: &Invocation, cfg: Option<&RunConfig>, w: &mut Writer) -> Result<()> {
    if inv.command == "reproduce" {
        let tag = inv.tag.as_deref().ok_or_else(|| Error::Config("reproduce needs a figure tag".into()))?;
        return reproduce::run(tag, w);
    }
    let cfg = cfg.ok_or_else(|| Error::Config(format!("{} needs --config", inv.command)))?;
    match inv.command.as_str() {
        "meanfield" => commands::meanfield(cfg, w),
        "steady" => commands::steady(cfg, w),
        "sweep" => commands::sweep(cfg, w),
        "traj" => commands::traj(cfg, w, inv.seed),
        "qfunc" => commands::qfunc(cfg, w).map(|_| ()),
        "fpe" => commands::fpe(cfg, w),
        other => Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
}

/// Runs one invocation and writes its manifest, including on failure.
/// Returns the process exit status.
pub fn run(inv: &Invocation) -> i32 {
    let start = Instant::now();
    let cfg = match &inv.config {
        Some(p) => match load_config(p) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("error: {e}");
                if let Some(out) = &inv.out {
                    write_failure(out, inv, &e);
                }
                return exit_code(&e);
            }
        },
        None => None,
    };
    let out = inv
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.output.as_ref()).and_then(|o| o.directory.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(inv.tag.as_deref().unwrap_or(&inv.command)));
    let mut w = match Writer::new(&out, inv.command.clone()) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(c) = &cfg {
        match c.to_toml() {
            Ok(t) => w.manifest.config = Some(t),
            Err(e) => eprintln!("warning: could not echo config: {e}"),
        }
    }
    let result = dispatch(inv, cfg.as_ref(), &mut w);
    w.manifest.wall_time_s = start.elapsed().as_secs_f64();
    for c in &w.manifest.checks {
        println!("{}", c.line());
    }
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            w.manifest.error = Some(ErrorRecord { kind: error_kind(e), message: e.to_string() });
            exit_code(e)
        }
    };
    if let Err(e) = w.finish() {
        eprintln!("error: {e}");
        return code.max(3);
    }
    code
}

fn write_failure(out: &Path, inv: &Invocation, e: &Error) {
    if let Ok(mut w) = Writer::new(out, inv.command.clone()) {
        w.manifest.error = Some(ErrorRecord { kind: error_kind(e), message: e.to_string() });
        let _ = w.finish();
    }
}
