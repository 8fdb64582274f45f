mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use output::{flatten_config, Artifacts, RunConfig};

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let name = cli.command.name();
    let mut cfg = RunConfig::new();
    flatten_config("", &commands::config_value(&cli.command), &mut cfg);
    cfg.insert("command".into(), name.into());
    cfg.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    for (k, v) in commands::rotations(&cli.command) {
        cfg.insert(k.into(), v);
    }
    let mut out = Artifacts::new(&cli.common.out, name, cfg, cli.common.svg)?;
    let checks = commands::dispatch(&cli.command, &mut out)?;
    for path in &out.written {
        println!("wrote {}", path.display());
    }
    if !cli.common.check {
        return Ok(true);
    }
    let mut ok = true;
    for c in &checks {
        println!("check {} {}: {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        ok &= c.pass;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
