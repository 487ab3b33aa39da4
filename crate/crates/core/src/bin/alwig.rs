use std::path::PathBuf;
use std::process::ExitCode;

use alwig::harness::commands::{cmd_decode, cmd_eval, cmd_filter, cmd_stats, cmd_synth, cmd_train, Overrides};
use alwig::model::{Task, Variant};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alwig", version, about = "Tag-driven video-text alignment and titling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tagged-clip dataset.
    Synth {
        /// SynthConfig TOML; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train and fine-tune from a run config.
    Train {
        /// Run config TOML (see configs/desk.toml).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// full, no_tag, no_gpt or no_pretrain.
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieval and generation report for a dataset split.
    Eval {
        /// Directory written by `train`.
        run: PathBuf,
        /// Dataset JSONL.
        data: PathBuf,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score video-title pairs and split a dataset at a threshold.
    Filter {
        run: PathBuf,
        data: PathBuf,
        /// Keep pairs whose cosine score is at least this.
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Length, tag-count and vocabulary-overlap statistics.
    Stats {
        #[arg(required = true, num_args = 1..=2)]
        data: Vec<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a title (or caption) for one feature file.
    Decode {
        run: PathBuf,
        features: PathBuf,
        /// Comma-separated tag words.
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        #[arg(long)]
        caption: bool,
        #[arg(long)]
        beam: Option<usize>,
    },
}

fn run(cli: Cli) -> alwig::Result<()> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let d = cmd_synth(config.as_deref(), seed, &out)?;
            println!(
                "wrote {} train, {} holdout, {} pretrain items to {}",
                d.train.len(),
                d.holdout.len(),
                d.pretrain.len(),
                out.display()
            );
        }
        Command::Train {
            config,
            seed,
            variant,
            out,
        } => {
            let ov = Overrides {
                seed,
                variant,
                ..Overrides::default()
            };
            let r = cmd_train(&config, &ov, &out)?;
            if let Some(last) = r.log.last() {
                println!("{} epoch {}: total loss {:.4}", last.stage, last.epoch, last.total);
            }
            println!("run written to {}", out.display());
        }
        Command::Eval {
            run,
            data,
            beam,
            lexicon,
            out,
        } => {
            let ov = Overrides {
                beam,
                ..Overrides::default()
            };
            let r = cmd_eval(&run, &data, &ov, lexicon.as_deref(), &out)?;
            print!("{}", r.report.to_kv());
        }
        Command::Filter {
            run,
            data,
            threshold,
            out,
        } => {
            let ov = Overrides {
                threshold,
                ..Overrides::default()
            };
            let s = cmd_filter(&run, &data, &ov, &out)?;
            println!("kept {} of {} ({:.1}%)", s.kept, s.total, 100.0 * s.kept_fraction);
        }
        Command::Stats { data, lexicon, out } => {
            print!("{}", cmd_stats(&data, lexicon.as_deref(), &out)?.to_kv());
        }
        Command::Decode {
            run,
            features,
            tags,
            caption,
            beam,
        } => {
            let ov = Overrides {
                beam,
                ..Overrides::default()
            };
            let task = if caption { Task::Caption } else { Task::Title };
            let (text, h) = cmd_decode(&run, &features, &tags, task, &ov)?;
            println!("{text}\t{:.4}", h.score());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
