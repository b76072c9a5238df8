//! Command-line front end for the augmentation toolkit.
//!
//! Exit codes: 0 on success, 2 on validation errors (bad arguments, rejected
//! inputs, malformed files), 1 on runtime failures (I/O breaking mid-run,
//! non-finite training state).

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dysaug::dsp::wav::{read_wav, write_wav, WavError};
use dysaug::features::{
    extract_fbank, read_feature_file, write_feature_file, write_feature_text, FbankConfig,
    FeatureError,
};
use dysaug::gan::{
    build_pairs, lr_schedule, train_speaker_gan, write_checkpoint, GanError, PairConfig,
    PerturbMode, TrainConfig,
};
use dysaug::neural::run_gradient_suite;
use dysaug::perturb::{speed_perturb, tempo_perturb, PerturbError, WsolaConfig};
use dysaug::pipeline::{
    run_augmentation, speaker_factor_table, spectrogram_dump, synth_corpus, AugmentationPlan,
    DumpFormat, Manifest, PipelineError, Role, SynthConfig,
};

#[derive(Parser)]
#[command(name = "dysaug", version, about = "Disordered-speech data augmentation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Tempo,
    Speed,
}

impl From<CliMode> for PerturbMode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Tempo => PerturbMode::Tempo,
            CliMode::Speed => PerturbMode::Speed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliFormat {
    Csv,
    Pgm,
}

#[derive(Subcommand)]
enum Command {
    /// Tempo-perturb a WAV file (duration changes, pitch preserved)
    Tempo {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        factor: f64,
    },
    /// Speed-perturb a WAV file (duration and spectrum change together)
    Speed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        factor: f64,
    },
    /// Per-speaker duration stats and SD factors from alignments (TSV to stdout)
    Factors {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated labels treated as silence
        #[arg(long, value_delimiter = ',', default_values_t = vec!["sil".to_string(), "sp".to_string()])]
        silence: Vec<String>,
    },
    /// Extract 40-dim log-mel FBank features to an FBK1 file
    Fbank {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Emit text (one frame per line) instead of the binary format
        #[arg(long)]
        text: bool,
        #[arg(long, default_value = "unknown")]
        speaker: String,
        /// Utterance id recorded in the file footer; defaults to the input stem
        #[arg(long)]
        utt: Option<String>,
    },
    /// Emit the training-pair index for one target speaker (JSONL to stdout)
    Pairs {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        target_speaker: String,
        #[arg(long, value_enum)]
        mode: CliMode,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
    /// Train the per-target-speaker GAN and write a DGAN checkpoint
    TrainGan {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        target_speaker: String,
        #[arg(long, value_enum)]
        mode: CliMode,
        #[arg(long, default_value_t = 10_000)]
        iters: u64,
        #[arg(long, default_value_t = 2e-4)]
        lr: f64,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        crop: usize,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an augmentation plan (JSON) over a manifest
    Augment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Generate the deterministic synthetic mini-corpus
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 17)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        control_speakers: usize,
        #[arg(long, default_value_t = 2)]
        target_speakers: usize,
        #[arg(long, default_value_t = 10)]
        words: usize,
        #[arg(long, default_value_t = 3)]
        utts_per_word: usize,
    },
    /// Dump a spectrogram of a WAV or FBK1 file as CSV or PGM
    Spectrogram {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: CliFormat,
    },
    /// Run the finite-difference gradient-check suite
    Gradcheck {
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

fn chain(err: &dyn std::error::Error) -> String {
    let mut msg = err.to_string();
    let mut src = err.source();
    while let Some(s) = src {
        msg.push_str(&format!(": {s}"));
        src = s.source();
    }
    msg
}

impl From<WavError> for Failure {
    fn from(e: WavError) -> Self {
        match e {
            WavError::Io { .. } => Failure::Runtime(chain(&e)),
            _ => Failure::Validation(chain(&e)),
        }
    }
}

impl From<PerturbError> for Failure {
    fn from(e: PerturbError) -> Self {
        Failure::Validation(chain(&e))
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Io { .. } => Failure::Runtime(chain(&e)),
            _ => Failure::Validation(chain(&e)),
        }
    }
}

impl From<GanError> for Failure {
    fn from(e: GanError) -> Self {
        match e {
            GanError::Io { .. } | GanError::NonFiniteLoss { .. } => Failure::Runtime(chain(&e)),
            GanError::Feature(inner) => inner.into(),
            _ => Failure::Validation(chain(&e)),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io { .. } => Failure::Runtime(chain(&e)),
            PipelineError::Wav(inner) => inner.into(),
            PipelineError::Feature(inner) => inner.into(),
            PipelineError::Gan(inner) => inner.into(),
            PipelineError::Perturb(inner) => inner.into(),
            _ => Failure::Validation(chain(&e)),
        }
    }
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Tempo { input, out, factor } => {
            require_file(&input)?;
            let clip = read_wav(&input)?;
            let cfg = WsolaConfig::for_sample_rate(clip.sample_rate_hz);
            let perturbed = tempo_perturb(&clip, factor, &cfg)?;
            write_wav(&out, &perturbed)?;
            println!(
                "{} -> {} ({} -> {} samples, factor {factor})",
                input.display(),
                out.display(),
                clip.len(),
                perturbed.len()
            );
            Ok(())
        }
        Command::Speed { input, out, factor } => {
            require_file(&input)?;
            let clip = read_wav(&input)?;
            let perturbed = speed_perturb(&clip, factor)?;
            write_wav(&out, &perturbed)?;
            println!(
                "{} -> {} ({} -> {} samples, factor {factor})",
                input.display(),
                out.display(),
                clip.len(),
                perturbed.len()
            );
            Ok(())
        }
        Command::Factors { manifest, silence } => {
            require_file(&manifest)?;
            let manifest = Manifest::load(&manifest)?;
            let silence: HashSet<String> = silence.into_iter().collect();
            let rows = speaker_factor_table(&manifest, &silence)?;
            println!("speaker\trole\tmean_phone_dur_sec\tphone_count\tsd_factor");
            for row in rows {
                let role = match row.role {
                    Role::Control => "control",
                    Role::Disordered => "disordered",
                };
                let factor = row
                    .sd_factor
                    .map(|f| format!("{f:.6}"))
                    .unwrap_or_else(|| "-".to_string());
                println!(
                    "{}\t{}\t{:.6}\t{}\t{}",
                    row.speaker_id, role, row.mean_phone_dur_sec, row.phone_count, factor
                );
            }
            Ok(())
        }
        Command::Fbank {
            input,
            out,
            text,
            speaker,
            utt,
        } => {
            require_file(&input)?;
            let utt = utt.unwrap_or_else(|| {
                input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "utt".into())
            });
            let clip = read_wav(&input)?.with_ids(&speaker, &utt);
            let mat = extract_fbank(&clip, &FbankConfig::default())?;
            if text {
                write_feature_text(&out, &mat)?;
            } else {
                write_feature_file(&out, &mat)?;
            }
            println!(
                "{} -> {} ({} frames x {} bins)",
                input.display(),
                out.display(),
                mat.n_frames,
                mat.n_bins
            );
            Ok(())
        }
        Command::Pairs {
            manifest,
            target_speaker,
            mode,
            seed,
        } => {
            require_file(&manifest)?;
            let manifest = Manifest::load(&manifest)?;
            let (control, target) = manifest.load_corpora(&target_speaker)?;
            let mut cfg = PairConfig::new(mode.into());
            cfg.seed = seed;
            let out = build_pairs(&control, &target, &cfg)?;
            for pair in &out.pairs {
                println!(
                    "{}",
                    serde_json::json!({
                        "word_id": pair.word_id,
                        "control_utterance": pair.control_fbank.utterance_id,
                        "target_utterance": pair.target_fbank.utterance_id,
                        "frames": pair.control_fbank.n_frames,
                    })
                );
            }
            eprintln!(
                "{} pairs ({} unmatched words, {} skipped pairs)",
                out.pairs.len(),
                out.unmatched_words,
                out.skipped_pairs
            );
            Ok(())
        }
        Command::TrainGan {
            manifest,
            target_speaker,
            mode,
            iters,
            lr,
            seed,
            crop,
            batch,
            out,
        } => {
            require_file(&manifest)?;
            let manifest = Manifest::load(&manifest)?;
            let (control, target) = manifest.load_corpora(&target_speaker)?;
            let mut pair_cfg = PairConfig::new(mode.into());
            pair_cfg.seed = seed;
            let built = build_pairs(&control, &target, &pair_cfg)?;
            eprintln!(
                "training on {} pairs for {target_speaker} ({} unmatched words, {} skipped)",
                built.pairs.len(),
                built.unmatched_words,
                built.skipped_pairs
            );
            let cfg = TrainConfig {
                initial_lr: lr,
                total_iters: iters,
                batch_size: batch,
                crop_frames: crop,
                seed,
                ..TrainConfig::default()
            };
            let outcome = train_speaker_gan(&built.pairs, &cfg)?;
            println!("iteration\tloss_d\tloss_g\tholdout_l2\tlr");
            for m in &outcome.metrics {
                println!(
                    "{}\t{:.6}\t{:.6}\t{:.6}\t{:.2e}",
                    m.iteration,
                    m.loss_d,
                    m.loss_g,
                    m.holdout_l2,
                    lr_schedule(lr, m.iteration.saturating_sub(1))
                );
            }
            write_checkpoint(&out, &outcome.checkpoint)?;
            eprintln!(
                "checkpoint written to {} (iteration {}, lr {:.2e})",
                out.display(),
                outcome.checkpoint.iteration,
                outcome.checkpoint.lr_current
            );
            Ok(())
        }
        Command::Augment { plan, manifest } => {
            require_file(&plan)?;
            require_file(&manifest)?;
            let plan = AugmentationPlan::load(&plan)?;
            let manifest = Manifest::load(&manifest)?;
            let result = run_augmentation(&manifest, &plan)?;
            println!(
                "{} feature files under {}, manifest {}",
                result.entries.len(),
                plan.output_dir,
                result.manifest_path.display()
            );
            Ok(())
        }
        Command::SynthCorpus {
            out,
            seed,
            control_speakers,
            target_speakers,
            words,
            utts_per_word,
        } => {
            if control_speakers == 0 || target_speakers == 0 || words == 0 || utts_per_word == 0 {
                return Err(Failure::Validation(
                    "speaker, word and utterance counts must be positive".into(),
                ));
            }
            let cfg = SynthConfig {
                seed,
                n_control_speakers: control_speakers,
                n_target_speakers: target_speakers,
                n_words: words,
                utts_per_word,
                sample_rate_hz: 16000,
            };
            let manifest = synth_corpus(&cfg, &out)?;
            println!(
                "synthetic corpus with {} utterances under {}",
                manifest.entries.len(),
                out.display()
            );
            Ok(())
        }
        Command::Spectrogram { input, out, format } => {
            require_file(&input)?;
            let mat = match input.extension().and_then(|e| e.to_str()) {
                Some("fbk") => read_feature_file(&input)?,
                _ => {
                    let stem = input
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "utt".into());
                    let clip = read_wav(&input)?.with_ids("unknown", &stem);
                    extract_fbank(&clip, &FbankConfig::default())?
                }
            };
            let format = match format {
                CliFormat::Csv => DumpFormat::Csv,
                CliFormat::Pgm => DumpFormat::Pgm,
            };
            spectrogram_dump(&mat, &out, format)?;
            println!(
                "{} -> {} ({} frames x {} bins)",
                input.display(),
                out.display(),
                mat.n_frames,
                mat.n_bins
            );
            Ok(())
        }
        Command::Gradcheck { seed } => {
            let reports = run_gradient_suite(seed);
            let mut failures = 0;
            for r in &reports {
                println!(
                    "{} {:<28} max_rel_error {:.3e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_rel_error
                );
                if !r.passed {
                    failures += 1;
                }
            }
            if failures > 0 {
                return Err(Failure::Runtime(format!(
                    "{failures} gradient checks failed"
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
