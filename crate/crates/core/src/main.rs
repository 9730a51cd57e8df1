use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinbath::config::{parse_document, resolve, ConfigDocument, GridDoc, MetricsDoc, OutputDoc, RunConfig, SeedValue};
use spinbath::run::{self, RunError, RunResult, SweepKey};

#[derive(Parser)]
#[command(name = "spinbath", version, about = "Spin-bath decoherence simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate |r(t)|^2 over the grid and write series, metrics and metadata.
    Simulate(RunArgs),
    /// Exact recurrence time of the rationalized couplings.
    Poincare(RunArgs),
    /// Repeat a simulation while varying N, half_width or seed.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to vary: N, half_width or seed.
        #[arg(long)]
        vary: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Compare the product formulas against the full state vector (small N only).
    Oracle(RunArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sustain: Option<f64>,
    #[arg(long = "max-denominator")]
    max_denominator: Option<u64>,
}

impl RunArgs {
    fn resolve(&self) -> RunResult<(RunConfig, Vec<String>)> {
        let mut doc = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_document(&text)?
            }
            None => ConfigDocument::default(),
        };
        if let Some(p) = &self.preset {
            doc.preset = Some(p.clone());
        }
        if let Some(s) = self.seed {
            doc.seed = Some(match i64::try_from(s) {
                Ok(v) => SeedValue::Int(v),
                Err(_) => SeedValue::Text(s.to_string()),
            });
        }
        if self.t_end.is_some() || self.samples.is_some() {
            let grid = doc.grid.get_or_insert_with(GridDoc::default);
            grid.t_end = self.t_end.or(grid.t_end);
            grid.samples = self.samples.or(grid.samples);
        }
        if self.epsilon.is_some() || self.sustain.is_some() {
            let m = doc.metrics.get_or_insert_with(MetricsDoc::default);
            m.epsilon = self.epsilon.or(m.epsilon);
            m.sustain = self.sustain.or(m.sustain);
        }
        if let Some(m) = self.max_denominator {
            doc.max_denominator = Some(m);
        }
        if let Some(out) = &self.out {
            doc.output = Some(OutputDoc {
                dir: Some(out.to_string_lossy().into_owned()),
            });
        }
        Ok(resolve(&doc)?)
    }
}

fn execute(cli: Cli) -> RunResult<()> {
    match cli.command {
        Command::Presets => print!("{}", run::presets_listing()),
        Command::Simulate(args) => {
            let (config, overrides) = args.resolve()?;
            let outcome = run::run_simulate(&config, &overrides)?;
            let m = &outcome.metrics;
            println!("wrote {}", config.output_dir.display());
            match m.decoherence_time {
                Some(t) => println!("decoherence time: {t:.6}"),
                None => println!("decoherence time: not reached"),
            }
            println!(
                "recurrence ({}): t_P/pi = {}; peaks >= {}: {} ({} at recurrences)",
                m.recurrence_case,
                m.recurrence_time_over_pi,
                m.peak_floor,
                m.peaks.len(),
                m.recurrence_peaks().count()
            );
        }
        Command::Poincare(args) => {
            let (config, overrides) = args.resolve()?;
            let report = run::run_poincare(&config, config.max_denominator, &overrides)?;
            println!("case: {}", report.case_label);
            println!("exact t_P/pi: {}", report.exact_time_over_pi);
            println!("log10 of product bound Q: {:.3}", report.log10_product_bound());
        }
        Command::Sweep { run: args, vary, values } => {
            let (config, overrides) = args.resolve()?;
            let key: SweepKey = vary.parse()?;
            let rows = run::run_sweep(&config, key, &values, &overrides)?;
            print!("{}", run::sweep_csv(key, &rows));
        }
        Command::Oracle(args) => {
            let (config, overrides) = args.resolve()?;
            let result = run::run_oracle(&config, &overrides);
            let path = config.output_dir.join("oracle.toml");
            if let Ok(text) = std::fs::read_to_string(&path) {
                print!("{text}");
            }
            result?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
