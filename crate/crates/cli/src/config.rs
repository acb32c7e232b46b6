//! `key = value` run configuration merged into the command line.
//!
//! Each key names a long flag of the chosen subcommand. Entries are spliced
//! in right after the subcommand, and only for flags the user did not pass,
//! so explicit flags always win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push(Entry {
            key,
            value: v.trim().trim_matches('"').to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// Location of `--config` and of the subcommand in raw arguments.
fn scan(args: &[OsString], cmd: &Command) -> (Option<String>, Option<usize>) {
    let mut config = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            config = args.get(i + 1).map(|v| v.to_string_lossy().into_owned());
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if !a.starts_with('-') {
            return (config, cmd.find_subcommand(a.as_ref()).map(|_| i));
        }
        i += 1;
    }
    (config, None)
}

fn user_passed(args: &[OsString], flag: &str) -> bool {
    let long = format!("--{flag}");
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == long || a.starts_with(&format!("{long}="))
    })
}

/// Returns `args` with config entries spliced in. Arguments without a
/// recognizable subcommand are handed to clap untouched so it can report
/// the usage error.
pub fn expand(args: Vec<OsString>, cmd: &Command) -> Result<Vec<OsString>> {
    let (Some(path), Some(at)) = scan(&args, cmd) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let entries = parse(&text).with_context(|| format!("in {path}"))?;
    let sub = cmd
        .find_subcommand(args[at].to_string_lossy().as_ref())
        .expect("scan found it");
    let mut extra: Vec<OsString> = Vec::new();
    for e in entries {
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(e.key.as_str()));
        let Some(arg) = arg else {
            // shared config files carry keys for other subcommands
            if !cmd
                .get_subcommands()
                .any(|s| s.get_arguments().any(|a| a.get_long() == Some(e.key.as_str())))
            {
                bail!("{path} line {}: unknown key `{}`", e.line, e.key);
            }
            continue;
        };
        if e.key == "config" || user_passed(&args, &e.key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match e.value.as_str() {
                "true" => extra.push(format!("--{}", e.key).into()),
                "false" => {}
                v => bail!("{path} line {}: `{}` expects true or false, got `{v}`", e.line, e.key),
            },
            _ => extra.push(format!("--{}={}", e.key, e.value).into()),
        }
    }
    let mut out = args;
    out.splice(at + 1..at + 1, extra);
    Ok(out)
}
