use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use wden::config::parse_config;
use wden::wav::{read_wav_16k, write_wav, SAMPLE_RATE};
use wden::{bench, report, synth, weights, Error, Result};
use wden_core::augment::{self, PairBatch, ReverbPolicy};
use wden_core::model::{self, init_params};
use wden_core::objective::{total_loss, DEFAULT_RESOLUTIONS, DEFAULT_STFT_WEIGHT};
use wden_core::stream::{Lookahead, StreamReport, StreamState};
use wden_core::train::{self, AdamState, CheckOptions, FitOptions};
use wden_core::{DemucsConfig, ModelParams, Tensor};

/// Causal speech enhancement in the waveform domain.
#[derive(Parser)]
#[command(name = "wden", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Weight file (WDEN1). Without it a model is initialized from --config and --seed.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Fraction of the input mixed back into the output.
    #[arg(long, global = true, default_value_t = 0.0)]
    dry: f64,
    /// Model shape as L,H,K,S,U,causal (optionally ,nonorm).
    #[arg(long, global = true)]
    config: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    report: Format,
    /// Accept WAV files whose rate is not 16 kHz.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Latency {
    /// 3 ms of lookahead, provisional padding at the frame edge.
    Paper,
    /// Enough lookahead for output identical to the offline model.
    Exact,
}

impl From<Latency> for Lookahead {
    fn from(l: Latency) -> Self {
        match l {
            Latency::Paper => Lookahead::Paper,
            Latency::Exact => Lookahead::Exact,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Offline enhancement of a whole file.
    Enhance { input: PathBuf },
    /// Feed a file through the streaming engine in fixed chunks.
    StreamSimulate {
        input: PathBuf,
        #[arg(long, default_value_t = 16.0)]
        chunk_ms: f64,
        #[arg(long, value_enum, default_value_t = Latency::Paper)]
        latency: Latency,
    },
    /// Time the streaming engine one stride at a time.
    Bench {
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long)]
        single_core: bool,
        #[arg(long, value_enum, default_value_t = Latency::Paper)]
        latency: Latency,
    },
    /// Training loss between a clean reference and an estimate.
    Loss {
        clean: PathBuf,
        enhanced: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STFT_WEIGHT)]
        beta: f64,
    },
    /// Augment a (clean, noise) pair; writes clean.wav, noise.wav and noisy.wav into --out.
    Augment {
        clean: PathBuf,
        noise: PathBuf,
        /// Largest random shift; capped below the signal length.
        #[arg(long, default_value_t = 250.0)]
        shift_ms: f64,
        #[arg(long)]
        remix: bool,
        /// Fraction of the mel axis to remove.
        #[arg(long)]
        bandmask: Option<f64>,
        /// Probability of adding echoes.
        #[arg(long)]
        revecho: Option<f64>,
        /// keep, remove or partial:<fraction kept in the target>.
        #[arg(long, default_value = "remove")]
        policy: String,
        #[arg(long)]
        two_sources: bool,
    },
    /// Compare analytic gradients with central differences on a random pair.
    GradCheck {
        #[arg(long, default_value_t = 1200)]
        len: usize,
        #[arg(long, default_value_t = train::DEFAULT_STEP)]
        h: f64,
        #[arg(long)]
        per_tensor: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_STFT_WEIGHT)]
        beta: f64,
        /// Difference the plain loss instead of its smooth piece at the base point.
        #[arg(long)]
        no_freeze: bool,
    },
    /// Overfit one batch and print the loss curve as CSV.
    TrainToy {
        /// Clean file of a two-file pair (with --noisy).
        #[arg(long, requires = "noisy")]
        clean: Option<PathBuf>,
        #[arg(long, requires = "clean")]
        noisy: Option<PathBuf>,
        /// Directory with clean/ and noisy/ subdirectories.
        #[arg(long, conflicts_with = "clean")]
        data: Option<PathBuf>,
        /// Length of the synthetic clean signal when no data is given.
        #[arg(long, default_value_t = 4000)]
        len: usize,
        /// Peak of the white noise added to the synthetic signal.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = AdamState::DEFAULT_LR)]
        lr: f64,
        #[arg(long, default_value_t = DEFAULT_STFT_WEIGHT)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        shift_ms: f64,
        /// Where to write the trained weights.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Write freshly initialized weights to --out.
    InitWeights {
        #[arg(long)]
        zeros: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn samples_for_ms(ms: f64) -> Result<usize> {
    if !(ms >= 0.0 && ms.is_finite()) {
        return Err(usage(format!("duration {ms} ms is not valid")));
    }
    Ok((ms * f64::from(SAMPLE_RATE) / 1000.0).round() as usize)
}

fn need_out(c: &Common) -> Result<&Path> {
    c.out.as_deref().ok_or_else(|| usage("--out is required"))
}

/// Resolves the model: a weight file (cross-checked against --config when
/// both are given) or a seeded initialization.
fn load_model(c: &Common, default: DemucsConfig) -> Result<(DemucsConfig, ModelParams)> {
    let requested = c.config.as_deref().map(parse_config).transpose()?;
    match &c.model {
        Some(path) => weights::load_params(path, requested.as_ref()),
        None => {
            let config = requested.unwrap_or(default);
            Ok((config, init_params(&config, c.seed)?))
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{v}");
}

fn run(cli: Cli) -> Result<ExitCode> {
    let c = &cli.common;
    if !(0.0..=1.0).contains(&c.dry) {
        return Err(usage(format!("--dry must lie in [0, 1], got {}", c.dry)));
    }
    if let Some(s) = &c.config {
        parse_config(s)?;
    }
    match &cli.command {
        Command::Enhance { input } => {
            let out = need_out(c)?;
            let (config, params) = load_model(c, DemucsConfig::reference(48))?;
            let x = read_wav_16k(input, c.force)?;
            let t = Tensor::from_signal(&x);
            let y = model::drywet(&t, &model::forward(&params, &config, &t)?, c.dry)?;
            if !y.is_finite() {
                return Err(wden_core::Error::NonFinite("enhanced audio").into());
            }
            write_wav(out, y.data(), SAMPLE_RATE)?;
            if c.report == Format::Json {
                print_json(&serde_json::json!({ "v": report::VERSION, "samples": x.len() }));
            }
        }
        Command::StreamSimulate {
            input,
            chunk_ms,
            latency,
        } => {
            let out = need_out(c)?;
            let chunk = samples_for_ms(*chunk_ms)?.max(1);
            let (config, params) = load_model(c, DemucsConfig::reference(48))?;
            if !config.causal {
                return Err(wden_core::Error::NonCausal.into());
            }
            let x = read_wav_16k(input, c.force)?;
            let mut state = StreamState::new(&params, &config, c.dry, (*latency).into())?;
            let geometry = state.geometry();
            let mut y = Vec::with_capacity(x.len());
            let mut times = Vec::new();
            for part in x.chunks(chunk) {
                let t0 = Instant::now();
                y.extend(state.push(part)?);
                // per-stride time, so the RTF does not depend on the chunk size
                times.push(t0.elapsed().as_secs_f64() * geometry.stride as f64 / part.len() as f64);
            }
            y.extend(state.flush()?);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(wden_core::Error::NonFinite("enhanced audio").into());
            }
            write_wav(out, &y, SAMPLE_RATE)?;
            let r = StreamReport::new(&geometry, times);
            match c.report {
                Format::Json => print_json(&report::stream_json(&r)),
                Format::Text => println!("{}", report::stream_text(&r)),
            }
        }
        Command::Bench {
            seconds,
            single_core,
            latency,
        } => {
            if !(*seconds > 0.0 && seconds.is_finite()) {
                return Err(usage("--seconds must be positive"));
            }
            let (config, params) = load_model(c, DemucsConfig::reference(48))?;
            let b = bench::bench_stream(
                &params,
                &config,
                *seconds,
                c.seed,
                (*latency).into(),
                *single_core,
            )?;
            match c.report {
                Format::Json => {
                    let mut v = report::stream_json(&b.report);
                    v["affinity"] = serde_json::Value::String(b.affinity.to_string());
                    v["hidden"] = config.hidden.into();
                    print_json(&v);
                }
                Format::Text => println!("{}\n{}", report::stream_text(&b.report), b.affinity),
            }
        }
        Command::Loss {
            clean,
            enhanced,
            beta,
        } => {
            let y = read_wav_16k(clean, c.force)?;
            let y_hat = read_wav_16k(enhanced, c.force)?;
            if y.len() != y_hat.len() {
                return Err(Error::Format {
                    path: enhanced.clone(),
                    msg: format!("{} samples, the reference has {}", y_hat.len(), y.len()),
                });
            }
            let r = total_loss(&y, &y_hat, *beta, &DEFAULT_RESOLUTIONS)?;
            match c.report {
                Format::Json => print_json(&report::loss_json(&r)),
                Format::Text => println!("{}", report::loss_text(&r)),
            }
        }
        Command::Augment {
            clean,
            noise,
            shift_ms,
            remix,
            bandmask,
            revecho,
            policy,
            two_sources,
        } => {
            let out = need_out(c)?;
            let policy = parse_policy(policy)?;
            let max_shift = samples_for_ms(*shift_ms)?;
            if let Some(w) = bandmask {
                if !(*w > 0.0 && *w < 1.0) {
                    return Err(usage("--bandmask must lie in (0, 1)"));
                }
            }
            if let Some(p) = revecho {
                if !(0.0..=1.0).contains(p) {
                    return Err(usage("--revecho must lie in [0, 1]"));
                }
            }
            let y = read_wav_16k(clean, c.force)?;
            let n = read_wav_16k(noise, c.force)?;
            let len = y.len().min(n.len());
            let mut batch = PairBatch::new(
                Tensor::from_signal(&y[..len]),
                Tensor::from_signal(&n[..len]),
            )?;
            let max_shift = if max_shift >= len {
                log::warn!(
                    "shift of {max_shift} samples capped to {}",
                    len.saturating_sub(1)
                );
                len.saturating_sub(1)
            } else {
                max_shift
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(c.seed);
            let sr = f64::from(SAMPLE_RATE);
            batch = augment::shift(&batch, max_shift, &mut rng)?;
            if *remix {
                batch = augment::remix(&batch, &mut rng);
            }
            if let Some(w) = bandmask {
                batch = augment::bandmask(&batch, *w, sr, &mut rng)?;
            }
            if let Some(p) = revecho {
                batch = augment::revecho(&batch, *p, policy, *two_sources, sr, &mut rng);
            }
            std::fs::create_dir_all(out).map_err(|source| Error::Io {
                path: out.to_path_buf(),
                source,
            })?;
            write_wav(out.join("clean.wav"), batch.clean.data(), SAMPLE_RATE)?;
            write_wav(out.join("noise.wav"), batch.noise.data(), SAMPLE_RATE)?;
            write_wav(out.join("noisy.wav"), batch.noisy().data(), SAMPLE_RATE)?;
        }
        Command::GradCheck {
            len,
            h,
            per_tensor,
            beta,
            no_freeze,
        } => {
            let (config, mut params) = load_model(c, DemucsConfig::toy())?;
            train::nudge_biases(&mut params, 0.05, c.seed);
            let (batch, data_seed) = train::conditioned_pair(
                &params,
                &config,
                *len,
                c.seed,
                train::MIN_CONDITIONING,
                &DEFAULT_RESOLUTIONS,
            )?;
            log::info!("grad-check data seed {data_seed}");
            let opts = CheckOptions {
                h: *h,
                per_tensor: *per_tensor,
                freeze_branch: !no_freeze,
            };
            let r =
                train::grad_check(&params, &config, &batch, *beta, &DEFAULT_RESOLUTIONS, &opts)?;
            match c.report {
                Format::Json => print_json(&report::grad_json(&r)),
                Format::Text => println!("{}", report::grad_text(&r)),
            }
            if !r.passed {
                return Ok(ExitCode::from(4));
            }
        }
        Command::TrainToy {
            clean,
            noisy,
            data,
            len,
            noise,
            steps,
            lr,
            beta,
            shift_ms,
            save,
        } => {
            let max_shift = samples_for_ms(*shift_ms)?;
            let (config, mut params) = load_model(c, DemucsConfig::toy())?;
            let batch = if let Some(dir) = data {
                wden::dataset::PairDataset::open(dir)?.batch()?
            } else if let (Some(cp), Some(np)) = (clean, noisy) {
                let y = read_wav_16k(cp, c.force)?;
                let x = read_wav_16k(np, c.force)?;
                if x.len() != y.len() {
                    return Err(Error::Format {
                        path: np.clone(),
                        msg: "length differs from the clean file".into(),
                    });
                }
                let n: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                PairBatch::new(Tensor::from_signal(&y), Tensor::from_signal(&n))?
            } else {
                let y = synth::voiced(*len, SAMPLE_RATE, c.seed);
                let n = if *noise > 0.0 {
                    synth::white(*len, *noise, c.seed.wrapping_add(1))
                } else {
                    vec![0.0; *len]
                };
                PairBatch::new(Tensor::from_signal(&y), Tensor::from_signal(&n))?
            };
            let opts = FitOptions {
                lr: *lr,
                beta: *beta,
                max_shift,
                seed: c.seed,
                ..FitOptions::default()
            };
            let curve = train::overfit(&mut params, &config, &batch, *steps, &opts)?;
            let mut csv = String::from("step,loss\n");
            for (i, l) in curve.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            match &c.out {
                Some(p) => std::fs::write(p, csv).map_err(|source| Error::Io {
                    path: p.clone(),
                    source,
                })?,
                None => std::io::stdout()
                    .write_all(csv.as_bytes())
                    .map_err(|source| Error::Io {
                        path: "<stdout>".into(),
                        source,
                    })?,
            }
            if let Some(p) = save {
                weights::save_params(p, &config, &params)?;
            }
        }
        Command::InitWeights { zeros } => {
            let out = need_out(c)?;
            let config = c
                .config
                .as_deref()
                .map(parse_config)
                .transpose()?
                .unwrap_or(DemucsConfig::reference(48));
            let params = if *zeros {
                ModelParams::zeros(&config)?
            } else {
                init_params(&config, c.seed)?
            };
            weights::save_params(out, &config, &params)?;
            if c.report == Format::Json {
                print_json(
                    &serde_json::json!({ "v": report::VERSION, "parameters": params.num_parameters() }),
                );
            } else {
                println!("{} parameters", params.num_parameters());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_policy(s: &str) -> Result<ReverbPolicy> {
    match s {
        "keep" => Ok(ReverbPolicy::Keep),
        "remove" => Ok(ReverbPolicy::Remove),
        _ => {
            let frac = s
                .strip_prefix("partial:")
                .and_then(|f| f.parse::<f64>().ok())
                .filter(|f| (0.0..=1.0).contains(f))
                .ok_or_else(|| {
                    usage(format!(
                        "--policy '{s}': expected keep, remove or partial:<0..1>"
                    ))
                })?;
            Ok(ReverbPolicy::Partial(frac))
        }
    }
}
