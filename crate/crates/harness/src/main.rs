use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fockchaos_harness::{parse_config, run_to_dir, Experiment, HarnessError, Result, RunConfig};

#[derive(Parser)]
#[command(name = "fockchaos", version, about = "Bose-Hubbard chaos experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherent backscattering of Fock-state return probabilities.
    Cbs(Common),
    /// Out-of-time-order commutator growth and saturation.
    Otoc(Common),
    /// Level statistics of a disorder ensemble.
    Spectral(Common),
    /// Action spectroscopy over particle number.
    Actions(Common),
    /// Truncated Wigner occupations against exact dynamics.
    Twa(Common),
    /// Catalog of relative equilibria and periodic modes.
    Modes(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest sector dimension any step may build.
    #[arg(long)]
    max_dim: Option<usize>,
}

fn load(exp: Experiment, c: &Common) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&c.config)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", c.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(declared) = cfg.experiment {
        if declared != exp {
            return Err(HarnessError::Config(format!("config declares experiment '{declared}', command is '{exp}'")));
        }
    }
    cfg.experiment = Some(exp);
    cfg.fill_defaults();
    if let Some(s) = c.seed {
        cfg.numerics.seed = s;
    }
    if let Some(t) = c.threads {
        cfg.numerics.threads = Some(t);
    }
    if let Some(d) = c.max_dim {
        cfg.numerics.max_dim = d;
    }
    if let Some(o) = &c.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, common) = match &cli.command {
        Command::Cbs(c) => (Experiment::Cbs, c),
        Command::Otoc(c) => (Experiment::Otoc, c),
        Command::Spectral(c) => (Experiment::Spectral, c),
        Command::Actions(c) => (Experiment::Actions, c),
        Command::Twa(c) => (Experiment::Twa, c),
        Command::Modes(c) => (Experiment::Modes, c),
    };
    let outcome = load(exp, common).and_then(|cfg| run_to_dir(&cfg, None));
    match outcome {
        Ok((result, manifest)) => {
            for (k, v) in &result.summary {
                println!("{k} = {v}");
            }
            for n in &result.notes {
                println!("note: {n}");
            }
            println!("manifest: {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
