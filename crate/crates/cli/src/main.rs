use std::path::PathBuf;
use std::sync::atomic::Ordering;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use musattn_cli::commands::{evaluate, generate, inspect_mask, preprocess, render, train};

#[derive(Parser, Debug)]
#[command(name = "musattn", version, about = "Symbolic music transformer with musically structured attention")]
struct Cli {
    /// JSON file with settings for the command; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn a MIDI directory into token shards.
    Preprocess(preprocess::PreprocessArgs),
    /// Train a model on preprocessed shards.
    Train(train::TrainArgs),
    /// Sample pieces from a checkpoint.
    Generate(generate::GenerateArgs),
    /// Score generated pieces.
    Evaluate(evaluate::EvaluateArgs),
    /// Draw piano rolls and sampling heatmaps.
    Render(render::RenderArgs),
    /// Write an attention mask as PGM and CSV.
    InspectMask(inspect_mask::InspectMaskArgs),
}

fn run(cli: Cli) -> Result<()> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Preprocess(args) => {
            let stats = preprocess::run(&args.resolve(file)?)?;
            println!(
                "{} of {} files used ({} malformed, {} empty), {} records, {} tokens",
                stats.files_used,
                stats.files_found,
                stats.files_malformed,
                stats.files_empty,
                stats.records,
                stats.tokens
            );
        }
        Command::Train(args) => {
            let cfg = args.resolve(file)?;
            ctrlc::set_handler(|| train::STOP.store(true, Ordering::SeqCst))
                .context("installing interrupt handler")?;
            let s = train::run(&cfg)?;
            match (s.final_loss, s.final_accuracy) {
                (Some(l), Some(a)) => println!("step {} loss {l:.4} accuracy {a:.3}", s.final_step),
                _ => println!("step {} (nothing to do)", s.final_step),
            }
            if s.interrupted {
                println!("interrupted; final checkpoint written");
            }
        }
        Command::Generate(args) => {
            let cfg = args.resolve(file)?;
            let manifest = generate::run(&cfg)?;
            println!("{} piece(s) in {}", manifest.len(), cfg.out_dir.display());
        }
        Command::Evaluate(args) => {
            print!("{}", evaluate::run(&args.resolve(file)?)?.to_text());
        }
        Command::Render(args) => {
            let cfg = args.resolve(file)?;
            let pieces = render::run(&cfg)?;
            println!("rendered {} piece(s) into {}", pieces.len(), cfg.out_dir.display());
        }
        Command::InspectMask(args) => {
            let cfg = args.resolve(file)?;
            let (mask, path) = inspect_mask::run(&cfg)?;
            if mask.size() <= 64 {
                print!("{}", mask.to_ascii());
            }
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let jobs = cli.jobs;
    let result = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("building thread pool")
            .and_then(|pool| pool.install(|| run(cli))),
        None => run(cli),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
