use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use inclusion_lab::{init_workers, load_config, run, Scenario};

/// Evolution-inclusion experiments on spectral Gelfand triples.
#[derive(Debug, Parser)]
#[command(name = "inclusion-lab", version)]
struct Args {
    scenario: Scenario,
    /// Built-in configuration: heat, burgers, viable-ball, offcenter-ball,
    /// radial, example-4-4, example-4-4-infeasible.
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `out` from the config or `out/<scenario>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = init_workers().and_then(|()| {
        let mut cfg = load_config(args.preset.as_deref(), args.config.as_deref())?;
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        let out = args
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(args.scenario.to_string()));
        run(&cfg, args.scenario, &out)
    });
    match result {
        Ok(res) => {
            for c in &res.criteria {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
            if let Some(e) = &res.error {
                eprintln!("error: {e}");
            }
            println!("{} in {:.2?}", if res.pass { "PASS" } else { "FAIL" }, res.wall_clock);
            if res.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("report: {}", res.report_path().display());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
