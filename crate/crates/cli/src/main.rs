use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use multifrac::ingest::{write_series, write_series_to};
use multifrac::pipeline::{
    emit_plot_data, run, AnalysisConfig, GeneratorSpec, InputConfig, Integrate, QRange, ScaleSpec, SurrogateChoice,
};
use multifrac::Error;

#[derive(Parser)]
#[command(name = "multifrac", version, about = "Wavelet-leader multifractal analysis of 1-D series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Write a synthetic series as one-column CSV with a comment header.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// One-column (or delimited) numeric file.
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,
    /// Synthetic source, e.g. cascade:levels=15,p=0.7 or fbm:n=16384,hurst=0.7.
    #[arg(long)]
    generate: Option<String>,
    /// Zero-based column to read.
    #[arg(long)]
    column: Option<usize>,
    #[arg(long)]
    delimiter: Option<char>,
    /// Skip the first non-comment row.
    #[arg(long)]
    header: bool,
    /// JSON file with analysis settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of vanishing moments of the Daubechies wavelet.
    #[arg(long)]
    wavelet: Option<usize>,
    /// j1:j2 or auto.
    #[arg(long)]
    scales: Option<String>,
    /// lo:step:hi.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    /// Bootstrap replicates; 0 disables.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    block_length: Option<usize>,
    /// Percentile pair low,high.
    #[arg(long)]
    ci: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// auto, on or off.
    #[arg(long)]
    integrate: Option<String>,
    #[arg(long)]
    max_lag: Option<usize>,
    /// shuffle, iaaft or both.
    #[arg(long)]
    surrogates: Option<String>,
    #[arg(long)]
    surrogate_count: Option<usize>,
    #[arg(long)]
    iaaft_iterations: Option<usize>,
    #[arg(long)]
    iaaft_tolerance: Option<f64>,
    #[arg(long)]
    mfdfa: bool,
    /// Directory for report.json and the plot CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report path; "-" or absent without --out prints to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the normalized wavelet coefficients as CSV.
    #[arg(long)]
    dump_pyramid: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    spec: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_ci(s: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Config {
        field: "ci".into(),
        message: format!("expected low,high percentiles, got {s:?}"),
    };
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn build_config(args: &AnalyzeArgs) -> anyhow::Result<AnalysisConfig> {
    let mut c = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            AnalysisConfig::from_json(&text)?
        }
        None => AnalysisConfig::default(),
    };
    if let Some(path) = &args.input {
        c.input = Some(InputConfig {
            path: path.clone(),
            ..c.input.take().unwrap_or_default()
        });
        c.generate = None;
    }
    if let Some(g) = &args.generate {
        c.generate = Some(g.clone());
        c.input = None;
    }
    if args.column.is_some() || args.delimiter.is_some() || args.header {
        let input = c
            .input
            .as_mut()
            .ok_or_else(|| anyhow!("input: --column, --delimiter and --header apply to file input only"))?;
        if let Some(col) = args.column {
            input.column = col;
        }
        if let Some(d) = args.delimiter {
            input.delimiter = d;
        }
        input.header |= args.header;
    }
    if let Some(w) = args.wavelet {
        c.wavelet = w;
    }
    if let Some(s) = &args.scales {
        c.scales = s.parse::<ScaleSpec>()?;
    }
    if let Some(q) = &args.q {
        c.q = q.parse::<QRange>()?;
    }
    if let Some(b) = args.bootstrap {
        c.bootstrap = b;
    }
    if args.block_length.is_some() {
        c.block_length = args.block_length;
    }
    if let Some(ci) = &args.ci {
        c.ci = parse_ci(ci)?;
    }
    if let Some(seed) = args.seed {
        c.seed = seed;
    }
    if let Some(i) = &args.integrate {
        c.integrate = i.parse::<Integrate>()?;
    }
    if let Some(l) = args.max_lag {
        c.max_lag = l;
    }
    if let Some(s) = &args.surrogates {
        c.surrogates = Some(s.parse::<SurrogateChoice>()?);
    }
    if let Some(n) = args.surrogate_count {
        c.surrogate_count = n;
    }
    if let Some(n) = args.iaaft_iterations {
        c.iaaft_iterations = n;
    }
    if let Some(t) = args.iaaft_tolerance {
        c.iaaft_tolerance = t;
    }
    c.mfdfa |= args.mfdfa;
    c.validate()?;
    Ok(c)
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let config = build_config(&args)?;
    let output = run(&config)?;
    let json = output.report.to_json()?;
    if let Some(path) = &args.dump_pyramid {
        output.pyramid.write_csv(path)?;
    }
    if let Some(dir) = &args.out {
        emit_plot_data(&output.report, dir)?;
        let path = dir.join("report.json");
        std::fs::write(&path, format!("{json}\n")).with_context(|| format!("cannot write {}", path.display()))?;
    }
    match &args.report {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::write(p, format!("{json}\n")).with_context(|| format!("cannot write {}", p.display()))?
        }
        Some(_) => println!("{json}"),
        None if args.out.is_none() => println!("{json}"),
        None => {}
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let spec: GeneratorSpec = args.spec.parse()?;
    let series = spec.generate(args.seed)?;
    let comments = vec![
        format!("generator: {spec}"),
        format!("seed: {}", args.seed),
        format!("n: {}", series.len()),
        format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
    ];
    match &args.output {
        Some(path) => write_series(path, &series, &comments)?,
        None => {
            let stdout = std::io::stdout();
            write_series_to(stdout.lock(), &series, &comments)?;
            stdout.lock().flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Generate(g) => generate(g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let config_error = matches!(e.downcast_ref::<Error>(), Some(Error::Config { .. }));
            eprintln!("error: {e:#}");
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
