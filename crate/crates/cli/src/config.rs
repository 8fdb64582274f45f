//! `key=value` config files, merged under the command-line flags.

use std::path::Path;

use anyhow::{bail, Context};

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value", i + 1);
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Path given by `--config PATH` or `--config=PATH`, if any.
fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn given(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let eq = format!("--{key}=");
    args.iter().any(|a| *a == flag || a.starts_with(&eq))
}

/// Appends the config file's entries as flags, skipping keys already given on
/// the command line so flags always win. Boolean entries become bare flags.
pub fn merge_config(args: Vec<String>) -> anyhow::Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let mut out = args.clone();
    for (key, value) in parse_config(&text)? {
        if key == "config" || given(&args, &key) {
            continue;
        }
        match value.as_str() {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value);
            }
        }
    }
    Ok(out)
}
