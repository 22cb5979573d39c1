use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use pop_bench::matrix::{append_row, row_to_csv};
use pop_bench::{
    run_matrix, run_trial, BenchConfig, DsKind, MatrixSpec, ReclaimerKind, Row, StallSpec,
};
use pop_smr::model::{self, ModelScheme, Mutation};

#[derive(Parser)]
#[command(
    name = "popbench",
    about = "Benchmarks and checks for the pop-smr reclaimers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one timed trial and print a CSV row.
    Bench(BenchArgs),
    /// Run every configuration of a TOML matrix, resuming if `--out` exists.
    Matrix {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustively explore a reclaimer's protocol model.
    ModelCheck {
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value_t = 2)]
        threads: usize,
        #[arg(long, default_value_t = model::ModelConfig::DEFAULT_BUDGET)]
        budget: usize,
        /// Fault to inject: drop-validation, drop-fence, drop-wait,
        /// scan-before-unlink.
        #[arg(long)]
        mutant: Option<String>,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "hml")]
    ds: DsKind,
    #[arg(long, default_value = "hp-pop")]
    reclaimer: ReclaimerKind,
    #[arg(long, default_value_t = 8)]
    threads: usize,
    /// Key range; the structure is prefilled to half of it.
    #[arg(long, default_value_t = 2048)]
    size: usize,
    #[arg(long, default_value_t = 50)]
    inserts: u32,
    #[arg(long, default_value_t = 50)]
    deletes: u32,
    #[arg(long)]
    duration_ms: Option<u64>,
    /// Retire-list threshold (default 1024, or 256 with --lrr).
    #[arg(long)]
    reclaim_freq: Option<usize>,
    #[arg(long, default_value_t = 100)]
    epoch_freq: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// e.g. tid=3,at-ms=200,for-ms=500
    #[arg(long)]
    stall: Option<StallSpec>,
    /// Long-running reads: half the threads search, half update near the head.
    #[arg(long)]
    lrr: bool,
    /// 5 s trials and the large retire threshold.
    #[arg(long)]
    paper_parity: bool,
    /// Count use-after-free and double frees with the debug allocator.
    #[arg(long)]
    debug_alloc: bool,
    /// With --debug-alloc, yield on about one in N checked accesses.
    #[arg(long, default_value_t = 0)]
    preempt_every: u32,
    /// Append the row here instead of printing it.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl BenchArgs {
    fn config(&self) -> BenchConfig {
        let mut cfg = BenchConfig {
            ds: self.ds,
            reclaimer: self.reclaimer,
            threads: self.threads,
            key_range: self.size,
            insert_pct: self.inserts,
            delete_pct: self.deletes,
            epoch_freq: self.epoch_freq,
            seed: self.seed,
            stall: self.stall,
            lrr: self.lrr,
            debug_alloc: self.debug_alloc,
            preempt_every: self.preempt_every,
            reclaim_freq: if self.lrr { 256 } else { 1024 },
            ..BenchConfig::default()
        };
        if self.paper_parity {
            cfg = cfg.paper_parity();
        }
        if let Some(ms) = self.duration_ms {
            cfg.duration = Duration::from_millis(ms);
        }
        if let Some(f) = self.reclaim_freq {
            cfg.reclaim_freq = f;
        }
        cfg
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Bench(args) => bench(&args),
        Cmd::Matrix { spec, out } => matrix(&spec, &out),
        Cmd::ModelCheck {
            scheme,
            threads,
            budget,
            mutant,
        } => model_check(&scheme, threads, budget, mutant.as_deref()),
    }
}

fn bench(args: &BenchArgs) -> ExitCode {
    let cfg = args.config();
    let outcome = run_trial(&cfg);
    if let Ok(r) = &outcome {
        eprintln!(
            "{} / {}: {:.3} Mops/s, max retire list {}, unreclaimed {}, signals {}",
            cfg.reclaimer,
            cfg.ds,
            r.throughput_mops,
            r.max_retire_list,
            r.total_unreclaimed,
            r.signals_sent
        );
        if cfg.lrr {
            eprintln!("read throughput {:.4} Mops/s", r.read_throughput_mops);
        }
        if let Some(m) = r.stall_max_retire_list {
            eprintln!("max retire list during stall {m}");
        }
    }
    let row = Row::new(&cfg, &outcome);
    let written = match &args.csv {
        Some(path) => append_row(path, &row),
        None => row_to_csv(&row, true).map(|s| println!("{s}")),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match outcome {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn matrix(spec: &Path, out: &Path) -> ExitCode {
    let spec = match MatrixSpec::load(spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let report = run_matrix(&spec, out, |row| {
        eprintln!(
            "{:<5} {:<9} t={:<3} trial {}: {:.3} Mops/s {}",
            row.ds, row.reclaimer, row.threads, row.trial, row.throughput_mops, row.error
        );
    });
    match report {
        Ok(r) => {
            eprintln!(
                "{} rows written, {} already present, {} errors; summary in {}",
                r.written,
                r.skipped,
                r.errors,
                r.summary.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn model_check(scheme: &str, threads: usize, budget: usize, mutant: Option<&str>) -> ExitCode {
    let Some(scheme) = ModelScheme::parse(scheme) else {
        eprintln!("error: unknown scheme `{scheme}`; expected hp, hp-pop, he-pop or epoch-pop");
        return ExitCode::FAILURE;
    };
    let mutation = match mutant.map(Mutation::parse) {
        None => Mutation::None,
        Some(Some(m)) => m,
        Some(None) => {
            eprintln!("error: unknown mutant `{}`", mutant.unwrap());
            return ExitCode::FAILURE;
        }
    };
    if !(2..=3).contains(&threads) {
        eprintln!("error: the model supports 2 or 3 threads");
        return ExitCode::FAILURE;
    }
    let start = Instant::now();
    let verdict = model::check(scheme, mutation, threads, budget);
    println!(
        "{} / {} / {threads} threads",
        scheme.name(),
        mutation.name()
    );
    println!("{verdict}");
    println!(
        "explored {} states in {:?}",
        verdict.states(),
        start.elapsed()
    );
    if verdict.is_safe() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
