use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Value};

use siet::achievable::{achievable_tuple, energy_rate_bound};
use siet::codebook::{
    codebook_size, counts_from_frequencies, info_rate, unrank_codeword, Composition,
};
use siet::constellation::{
    check_layer_separation, check_peak_power, max_symbols_per_layer, strict_disjointness_oracle,
    Constellation,
};
use siet::converse::converse_tuple;
use siet::error::Error;
use siet::frontier::pareto::converse_frontier;
use siet::frontier::{
    pareto_frontier, sweep_radius, sweep_region, write_points, OutputFormat, ScenarioConfig,
};
use siet::simulate::{
    calibrate_b_for_delta, random_message_indices, simulate_joint, CodewordChoice, SimOptions,
};

#[derive(Parser, Debug)]
#[command(
    name = "siet",
    version,
    about = "Information and energy transmission bounds, sweeps and simulation"
)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 100_000)]
    trials: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodewordMode {
    Canonical,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepMode {
    Radius,
    Region,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate and print the constellation geometry.
    Constellation,
    /// Codebook size and rate; optionally list codewords as JSON lines.
    Codebook {
        /// List the first K codewords.
        #[arg(long, value_name = "K")]
        first: Option<u64>,
        /// List K codewords drawn uniformly at random (uses --seed).
        #[arg(long, value_name = "K", conflicts_with = "first")]
        sample: Option<u64>,
    },
    /// Achievable and converse tuples for the scenario.
    Bounds,
    /// Monte Carlo DEP and EOP.
    Simulate {
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value_t = CodewordMode::Canonical)]
        codeword: CodewordMode,
        /// Energy target for the EOP estimate; defaults to the energy-rate bound at the scenario's delta.
        #[arg(long)]
        b: Option<f64>,
    },
    /// Common-radius sweep or sweep over DEP targets and layer frequencies.
    Sweep {
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Emit only the Pareto-optimal (R, B) points.
        #[arg(long)]
        frontier: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_infeasible() => 2,
        Some(Error::Numeric(_)) => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let config = ScenarioConfig::load(path)?;
    match &cli.command {
        Command::Sweep { mode, frontier } => sweep(cli, &config, *mode, *frontier),
        command => {
            if cli.format == Some(Format::Csv) {
                return Err(Error::Config("csv output is only available for sweep".into()).into());
            }
            let doc = match command {
                Command::Constellation => return constellation(cli, &config),
                Command::Codebook { first, sample } => {
                    return codebook(cli, &config, *first, *sample)
                }
                Command::Bounds => bounds(&config)?,
                Command::Simulate {
                    workers,
                    codeword,
                    b,
                } => simulate(cli, &config, *workers, *codeword, *b)?,
                Command::Sweep { .. } => unreachable!(),
            };
            write_json(cli.out.as_deref(), &doc)
        }
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(out: Option<&Path>, doc: &Value) -> Result<()> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn composition(config: &ScenarioConfig, constellation: &Constellation) -> Result<Composition> {
    Ok(counts_from_frequencies(
        config.channel.n,
        &config.p,
        &constellation.layer_sizes(),
    )?)
}

fn constellation(cli: &Cli, config: &ScenarioConfig) -> Result<()> {
    let c = config.constellation()?;
    let layers: Vec<Value> = c
        .layers()
        .iter()
        .map(|l| {
            Ok(json!({
                "A": l.amplitude,
                "L": l.symbols,
                "r": l.radius,
                "max_symbols": max_symbols_per_layer(l.radius, l.amplitude)?,
            }))
        })
        .collect::<Result<_>>()?;
    let overlaps = strict_disjointness_oracle(&c);
    let separation = check_layer_separation(&c);
    let doc = json!({
        "layers": layers,
        "total_symbols": c.len(),
        "separation": separation,
        "peak_power_ok": check_peak_power(&c, config.channel.peak_power),
        "disjoint": overlaps.is_empty(),
        "overlaps": overlaps,
        "config_digest": config.digest(),
    });
    write_json(cli.out.as_deref(), &doc)?;
    if !overlaps.is_empty() {
        return Err(Error::GeometryInfeasible(format!(
            "{} pairs of decoding discs overlap",
            overlaps.len()
        ))
        .into());
    }
    Ok(())
}

fn codebook(
    cli: &Cli,
    config: &ScenarioConfig,
    first: Option<u64>,
    sample: Option<u64>,
) -> Result<()> {
    let c = config.constellation()?;
    let comp = composition(config, &c)?;
    let size = codebook_size(&comp);
    let summary = json!({
        "n": comp.n(),
        "p": comp.p(),
        "layer_sizes": comp.layer_sizes(),
        "counts": comp.layer_counts(),
        "M": size.exact.as_ref().map(|m| m.to_string()),
        "log2M": size.log2,
        "R": info_rate(size.log2, comp.n()),
        "config_digest": config.digest(),
    });
    let indices: Vec<BigUint> = match (first, sample) {
        (Some(k), _) => {
            let m = size
                .exact
                .clone()
                .unwrap_or_else(|| BigUint::from(u64::MAX));
            let k = BigUint::from(k).min(m);
            let mut out = Vec::new();
            let mut i = BigUint::from(1u32);
            while i <= k {
                out.push(i.clone());
                i += 1u32;
            }
            out
        }
        (None, Some(k)) => random_message_indices(&comp, k, cli.seed)?,
        (None, None) => Vec::new(),
    };
    if indices.is_empty() {
        return write_json(cli.out.as_deref(), &summary);
    }
    let mut w = output(cli.out.as_deref())?;
    writeln!(w, "{summary}")?;
    for index in indices {
        let word = unrank_codeword(&index, &comp)?;
        writeln!(
            w,
            "{}",
            json!({ "index": index.to_string(), "codeword": word })
        )?;
    }
    w.flush()?;
    Ok(())
}

fn bounds(config: &ScenarioConfig) -> Result<Value> {
    let c = config.constellation()?;
    let usage = config.usage(&c)?;
    let sigma2 = config.channel.sigma2;
    let ach = achievable_tuple(&c, &usage, config.delta, &config.energy, sigma2)?;
    let conv = converse_tuple(&c, &usage, config.delta, &config.energy, sigma2)?;
    Ok(json!({
        "achievable": ach,
        "converse": conv,
        "composition_integral": usage.is_integral(),
        "config_digest": config.digest(),
    }))
}

fn simulate(
    cli: &Cli,
    config: &ScenarioConfig,
    workers: Option<usize>,
    mode: CodewordMode,
    b: Option<f64>,
) -> Result<Value> {
    let c = config.constellation()?;
    let comp = composition(config, &c)?;
    let sigma2 = config.channel.sigma2;
    let b = match b {
        Some(b) => b,
        None => energy_rate_bound(
            comp.p(),
            &c.amplitudes(),
            config.delta,
            &config.energy,
            sigma2,
        )?,
    };
    let mut opts = SimOptions::new(cli.trials, cli.seed);
    opts.workers = workers;
    opts.codeword = match mode {
        CodewordMode::Canonical => CodewordChoice::Canonical,
        CodewordMode::Random => CodewordChoice::Random,
    };
    let est = simulate_joint(&c, &comp, b, &config.energy, sigma2, &opts)?;
    let calibrated = if config.delta > 0.0 {
        let cal = calibrate_b_for_delta(&c, &comp, config.delta, &config.energy, sigma2, &opts)?;
        if let Some(warning) = &cal.warning {
            eprintln!("warning: {warning}");
        }
        Some(cal.b)
    } else {
        None
    };
    Ok(json!({
        "dep": est.dep.value,
        "dep_se": est.dep.standard_error,
        "eop": est.eop.value,
        "eop_se": est.eop.standard_error,
        "trials": cli.trials,
        "seed": cli.seed,
        "b": b,
        "mean_energy": est.energy.mean,
        "delta": config.delta,
        "b_at_delta": calibrated,
        "config_digest": config.digest(),
    }))
}

fn sweep(cli: &Cli, config: &ScenarioConfig, mode: SweepMode, frontier: bool) -> Result<()> {
    let result = match mode {
        SweepMode::Radius => sweep_radius(config)?,
        SweepMode::Region => sweep_region(config)?,
    };
    for s in &result.skipped {
        eprintln!(
            "skipped r={} eps={:?} p={:?}: {}",
            s.r, s.epsilon, s.p, s.reason
        );
    }
    let points = if frontier {
        let ach = pareto_frontier(&result.points);
        if ach != converse_frontier(&result.points) {
            bail!("achievable and converse frontiers differ");
        }
        ach
    } else {
        result.points
    };
    let format = match cli.format {
        Some(Format::Json) => OutputFormat::Json,
        _ => OutputFormat::Csv,
    };
    let mut w = output(cli.out.as_deref())?;
    write_points(&points, config.layers.len(), format, &mut w)?;
    w.flush()?;
    Ok(())
}
