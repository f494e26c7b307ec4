//! `--config` files: TOML `flag = value` pairs spliced into argv.
//!
//! ```toml
//! jobs = 4            # global flag
//! tau = 0.6           # any subcommand with --tau
//!
//! [split]
//! k = 8
//! seed = 7
//! ```
//!
//! Config flags are inserted right after the subcommand name, so flags on
//! the command line come later and override them.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::CommandFactory;

use crate::{Cli, Command};

/// Finds `--config` and the subcommand position without a full parse, so
/// config values can satisfy required flags.
fn scan(argv: &[String]) -> (Option<PathBuf>, Option<usize>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].as_str();
        if a == "--" {
            break;
        }
        if a == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if a == "--jobs" || a == "-j" {
            i += 2;
            continue;
        } else if sub.is_none() && Command::NAMES.contains(&a) {
            sub = Some(i);
        }
        i += 1;
    }
    (config, sub)
}

fn value_strings(key: &str, v: &toml::Value) -> anyhow::Result<Vec<String>> {
    Ok(match v {
        toml::Value::String(s) => vec![s.clone()],
        toml::Value::Integer(n) => vec![n.to_string()],
        toml::Value::Float(f) => vec![f.to_string()],
        toml::Value::Array(items) => {
            let mut out = Vec::new();
            for item in items {
                out.extend(value_strings(key, item)?);
            }
            out
        }
        other => bail!("config key {key:?} has unsupported value {other}"),
    })
}

/// Returns `argv` with the config file's flags spliced in.
pub fn apply_config(argv: &[String]) -> anyhow::Result<Vec<String>> {
    let (Some(path), sub) = scan(argv) else {
        return Ok(argv.to_vec());
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;
    let Some(sub_idx) = sub else {
        return Ok(argv.to_vec());
    };
    let sub_name = argv[sub_idx].as_str();
    let root = Cli::command();
    let sub_cmd = root
        .find_subcommand(sub_name)
        .ok_or_else(|| anyhow!("unknown subcommand {sub_name}"))?;

    let mut pairs: Vec<(String, toml::Value, bool)> = Vec::new();
    for (key, value) in &table {
        match value {
            toml::Value::Table(section) => {
                if !Command::NAMES.contains(&key.as_str()) {
                    bail!("config section [{key}] names no subcommand");
                }
                if key == sub_name {
                    for (k, v) in section {
                        pairs.push((k.clone(), v.clone(), true));
                    }
                }
            }
            _ => pairs.push((key.clone(), value.clone(), false)),
        }
    }

    let mut extra = Vec::new();
    for (key, value, explicit) in pairs {
        let long = key.replace('_', "-");
        if long == "config" {
            bail!("config files cannot include other config files");
        }
        let arg = sub_cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(long.as_str()));
        let Some(arg) = arg else {
            if explicit {
                bail!("config key {key:?} is not a flag of {sub_name}");
            }
            log::debug!("config key {key:?} does not apply to {sub_name}");
            continue;
        };
        if arg.get_action().takes_values() {
            for v in value_strings(&key, &value)? {
                extra.push(format!("--{long}={v}"));
            }
        } else {
            match value {
                toml::Value::Boolean(true) => extra.push(format!("--{long}")),
                toml::Value::Boolean(false) => {}
                toml::Value::Integer(n) if long == "verbose" => {
                    extra.extend((0..n.max(0)).map(|_| "--verbose".to_string()));
                }
                other => bail!("config key {key:?} is a switch; expected true or false, got {other}"),
            }
        }
    }

    let mut out = argv[..=sub_idx].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub_idx + 1..]);
    Ok(out)
}
