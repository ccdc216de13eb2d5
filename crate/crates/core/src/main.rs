use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rbm_missing::ais::{ais_log_partition, complete_data_log_likelihood, AisConfig};
use rbm_missing::bench::variance_bench;
use rbm_missing::check::{random_observation, random_params, run_oracle_checks};
use rbm_missing::dataset::{apply_mask, DEFAULT_THRESHOLD};
use rbm_missing::format::{checkpoint, load_binary_matrix, rbmi};
use rbm_missing::oracle::{exact_log_partition, MAX_ENUMERATION_BITS};
use rbm_missing::rng::tags;
use rbm_missing::run::{execute, load_complete, RunConfig};
use rbm_missing::sampler::{block_gibbs, uniform_visibles};
use rbm_missing::{Error, Result, RngStream};

#[derive(Parser)]
#[command(name = "rbm-missing", version, about = "Train and evaluate RBMs on incomplete binary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalChoice {
    Auto,
    Exact,
    Ais,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a TOML run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Log-likelihood of complete data under a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        method: EvalChoice,
        #[arg(long, default_value_t = 1000)]
        temperatures: usize,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Required when AIS is used.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run free Gibbs chains under a checkpoint and print the final states.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        chains: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare every fast path with enumeration on random small models.
    OracleCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Empirical variance of plain vs spatial estimates on a random model.
    VarianceBench {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Samples per set.
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        sets: usize,
        /// Parameters are drawn from U(-scale, scale).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Clamp a random datum with this missing rate instead of using the free distribution.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Mask a complete binary dataset into an .rbmi file.
    Mask {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn usage_error(msg: &str) -> ! {
    use clap::CommandFactory;
    Cli::command().error(clap::error::ErrorKind::MissingRequiredArgument, msg).exit()
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let (_, log) = execute(&cfg)?;
            if cfg.output.metrics.is_none() {
                emit(None, &log.to_csv())?;
            }
            Ok(true)
        }
        Command::Eval {
            checkpoint: ck,
            train,
            test,
            method,
            temperatures,
            runs,
            seed,
            threshold,
            format,
        } => {
            let params = checkpoint::load(&ck)?.params;
            let use_ais = match method {
                EvalChoice::Exact => false,
                EvalChoice::Ais => true,
                EvalChoice::Auto => params.n() > 20,
            };
            let (log_z, stderr) = if use_ais {
                let Some(seed) = seed else {
                    usage_error("--seed is required when AIS is used");
                };
                let cfg = AisConfig {
                    num_temperatures: temperatures,
                    num_runs: runs,
                };
                let est = ais_log_partition(&params, &cfg, RngStream::new(seed).derive(tags::EVAL))?;
                (est.log_z, est.std_err)
            } else {
                if params.n() > MAX_ENUMERATION_BITS {
                    return Err(Error::SizeGuard {
                        bits: params.n(),
                        limit: MAX_ENUMERATION_BITS,
                    });
                }
                (exact_log_partition(&params)?, 0.0)
            };
            let ll_train = complete_data_log_likelihood(&params, &load_complete(&train, threshold)?, log_z)?;
            let ll_test = test
                .map(|t| complete_data_log_likelihood(&params, &load_complete(&t, threshold)?, log_z))
                .transpose()?;
            let text = match format {
                OutputFormat::Csv => format!(
                    "loglik_train,loglik_test,logZ,logZ_stderr\n{ll_train:?},{},{log_z:?},{stderr:?}\n",
                    ll_test.map(|x| format!("{x:?}")).unwrap_or_default()
                ),
                OutputFormat::Json => {
                    let v = serde_json::json!({
                        "loglik_train": ll_train,
                        "loglik_test": ll_test,
                        "logZ": log_z,
                        "logZ_stderr": stderr,
                    });
                    format!("{v}\n")
                }
            };
            emit(None, &text)?;
            Ok(true)
        }
        Command::Sample {
            checkpoint: ck,
            chains,
            steps,
            seed,
            output,
        } => {
            let params = checkpoint::load(&ck)?.params;
            let stream = RngStream::new(seed);
            let init = uniform_visibles(params.n(), chains, stream.derive(tags::PCD_INIT));
            let states = block_gibbs(&params, &init, steps, stream.derive(tags::GIBBS))?;
            let mut text: String = (0..params.n())
                .map(|i| format!("v{i}"))
                .chain((0..params.m()).map(|j| format!("h{j}")))
                .collect::<Vec<_>>()
                .join(",");
            text.push('\n');
            for s in &states {
                let row: Vec<String> = s.v.iter().chain(&s.h).map(|b| b.to_string()).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            emit(output.as_deref(), &text)?;
            Ok(true)
        }
        Command::OracleCheck { n, m, trials, seed } => {
            let outcomes = run_oracle_checks(n, m, trials, seed)?;
            let mut ok = true;
            for o in &outcomes {
                ok &= o.passed;
                println!(
                    "{} {} worst={:.3e} tol={:.0e} trials={}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    o.worst,
                    o.tolerance,
                    o.trials
                );
            }
            Ok(ok)
        }
        Command::VarianceBench {
            n,
            m,
            k,
            sets,
            scale,
            p,
            seed,
            output,
        } => {
            let mut rng = RngStream::new(seed).derive(tags::INIT).rng();
            let params = random_params(n, m, scale, &mut rng)?;
            let obs = p.map(|p| random_observation(n, p, &mut rng));
            let report = variance_bench(&params, obs.as_ref(), k, sets, RngStream::new(seed).derive(tags::EVAL))?;
            emit(output.as_deref(), &report.to_csv())?;
            Ok(true)
        }
        Command::Mask {
            input,
            output,
            p,
            seed,
            threshold,
        } => {
            let matrix = load_binary_matrix(&input, threshold)?;
            let mut data = apply_mask(&matrix, p, seed)?;
            if let Some(prov) = data.provenance.as_mut() {
                prov.source = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                prov.threshold = threshold;
            }
            rbmi::save(&output, &data)?;
            eprintln!(
                "masked {} rows x {} columns, missing fraction {:.4}",
                matrix.rows,
                matrix.cols,
                data.missing_fraction()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
