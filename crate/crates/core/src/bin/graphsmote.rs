use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use graphsmote::experiment::{apply_key, read_pairs, read_predictions, run_experiment, ExperimentSpec};
use graphsmote::gradcheck::{check_variant, Tolerance};
use graphsmote::graph::{generate_sbm_graph, write_graph, SbmConfig};
use graphsmote::train::Variant;

#[derive(Parser)]
#[command(
    name = "graphsmote",
    version,
    about = "Latent-space oversampling for imbalanced node classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Dataset directory with edges.tsv, features.txt and labels.txt.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output directory (default: $GRAPHSMOTE_OUT or ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate a single run.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Run every (sweep value, variant, seed) of an experiment spec.
    Grid {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score a prediction dump.
    Metrics { predictions: PathBuf },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        /// Defaults to every variant.
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a stochastic-block-model graph as dataset files.
    GenSbm {
        /// Comma-separated class sizes.
        #[arg(long, value_delimiter = ',', default_value = "200,200,200,20")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.05)]
        p_in: f64,
        #[arg(long, default_value_t = 0.005)]
        p_out: f64,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        mean_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_spec(o: &Overrides) -> Result<ExperimentSpec, String> {
    let mut spec = ExperimentSpec::default();
    if let Some(path) = &o.config {
        for (k, v) in read_pairs(path).map_err(|e| e.to_string())? {
            apply_key(&mut spec, &k, &v).map_err(|e| format!("{}: {e}", path.display()))?;
        }
    }
    for kv in &o.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        apply_key(&mut spec, k.trim(), v.trim()).map_err(|e| e.to_string())?;
    }
    if let Some(d) = &o.data_dir {
        apply_key(&mut spec, "data_dir", &d.to_string_lossy()).map_err(|e| e.to_string())?;
    }
    if let Some(out) = &o.out {
        spec.output = out.clone();
    }
    if let Some(seed) = o.seed {
        spec.base.seed = seed;
        spec.seeds = vec![seed];
    }
    Ok(spec)
}

fn run(spec: &ExperimentSpec) -> Result<ExitCode, String> {
    let result = run_experiment(spec).map_err(|e| e.to_string())?;
    let table = std::fs::read_to_string(spec.output.join("table.csv")).map_err(|e| e.to_string())?;
    print!("{table}");
    let aborted = result.aborted();
    if aborted > 0 {
        eprintln!("{aborted} run(s) aborted");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train { overrides, variant } => build_spec(&overrides).and_then(|mut spec| {
            if let Some(v) = variant {
                spec.base.variant = v;
            }
            spec.variants = vec![spec.base.variant];
            spec.seeds = vec![spec.base.seed];
            spec.sweep_axis = graphsmote::experiment::SweepAxis::None;
            spec.sweep_values.clear();
            spec.workers = 1;
            spec.dump_predictions = true;
            spec.save_checkpoints = true;
            run(&spec)
        }),
        Command::Grid { overrides, workers } => build_spec(&overrides).and_then(|mut spec| {
            if let Some(w) = workers {
                spec.workers = w;
            }
            run(&spec)
        }),
        Command::Metrics { predictions } => File::open(&predictions)
            .map_err(|e| format!("{}: {e}", predictions.display()))
            .and_then(|f| read_predictions(BufReader::new(f)))
            .and_then(|dump| serde_json::to_string_pretty(&dump.report()).map_err(|e| e.to_string()))
            .map(|json| {
                println!("{json}");
                ExitCode::SUCCESS
            }),
        Command::Gradcheck { variant, seed } => {
            let variants = variant.map_or_else(|| Variant::ALL.to_vec(), |v| vec![v]);
            let mut ok = true;
            let mut err = None;
            for v in variants {
                match check_variant(v, seed, Tolerance::default()) {
                    Ok(report) => {
                        for p in &report.params {
                            println!(
                                "{v:<15} {:<3} max_abs {:.2e} max_rel {:.2e} {}",
                                p.param,
                                p.max_abs_err,
                                p.max_rel_err,
                                if p.passed() { "ok" } else { "FAIL" }
                            );
                        }
                        ok &= report.passed();
                    }
                    Err(e) => {
                        err = Some(e.to_string());
                        break;
                    }
                }
            }
            match err {
                Some(e) => Err(e),
                None => Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE }),
            }
        }
        Command::GenSbm {
            sizes,
            p_in,
            p_out,
            dim,
            seed,
            mean_scale,
            noise,
            out,
        } => {
            let cfg = SbmConfig {
                mean_scale,
                noise,
                ..SbmConfig::new(sizes, p_in, p_out, dim, seed)
            };
            generate_sbm_graph(&cfg)
                .and_then(|g| {
                    std::fs::create_dir_all(&out).map_err(|source| graphsmote::graph::GraphError::Io {
                        path: out.clone(),
                        source,
                    })?;
                    write_graph(&g, &out)
                })
                .map(|files| {
                    println!("wrote {}", files.edges.parent().unwrap_or(&out).display());
                    ExitCode::SUCCESS
                })
                .map_err(|e| e.to_string())
        }
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
