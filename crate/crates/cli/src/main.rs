use clap::{Parser, Subcommand};
use dogm_cli::config::{load_config, CorrectorChoice, PipelineConfig};
use dogm_cli::run::{run, run_bench, RunError, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dogm", version, about = "Radar dynamic occupancy grid pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and run it through the grid pipeline.
    Run {
        /// Pipeline configuration (JSON).
        config: PathBuf,
        /// Also run the uncorrected baseline and write a comparison report.
        #[arg(long)]
        ab: bool,
        /// Write a PNG per frame.
        #[arg(long)]
        render: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// none, oracle or file:PATTERN
        #[arg(long)]
        corrector: Option<String>,
        /// Process only the first N frames.
        #[arg(long)]
        frames: Option<usize>,
        /// Write particle dumps per frame.
        #[arg(long)]
        dump_particles: bool,
        /// Per-frame step timing trace.
        #[arg(long)]
        timings: Option<PathBuf>,
    },
    /// Baseline versus corrected comparison over the built-in ten-scenario suite.
    Bench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
        /// Optional pipeline configuration; its scenario field is ignored.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
    },
}

fn threads() -> Result<usize, RunError> {
    match std::env::var("DOGM_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| RunError::Config(dogm_cli::config::ConfigError::Invalid(format!("DOGM_THREADS must be a positive integer, got {v:?}")))),
    }
}

fn execute(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run {
            config,
            ab,
            render,
            seed,
            out,
            corrector,
            frames,
            dump_particles,
            timings,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.render |= render;
            cfg.dump_particles |= dump_particles;
            if seed.is_some() {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(flag) = corrector {
                cfg.corrector = CorrectorChoice::from_flag(&flag, &cfg.corrector)?;
            }
            let opts = RunOptions { ab, frames, timings };
            let report = run(&cfg, &opts)?;
            for (name, row) in &report.rows {
                log::info!(
                    "{name}: IoU dynamic {:.3}, mAP {:.3}, dynamic recall {:.3}",
                    row.grid.dynamic.iou,
                    row.objects.mean_ap,
                    row.objects.dynamic.recall
                );
            }
            Ok(())
        }
        Command::Bench { seed, out, config, frames } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => PipelineConfig::with_scenario(PathBuf::new()),
            };
            let report = run_bench(&cfg, seed, &out, frames)?;
            println!("{}", report.to_json().trim_end());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = threads().and_then(|n| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunError::Runtime(format!("thread pool: {e}")))?;
        pool.install(|| execute(cli.command))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
