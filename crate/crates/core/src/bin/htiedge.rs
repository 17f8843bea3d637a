use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use htiedge::artifacts::{replication_dir, simulate_to_dir, SUMMARY_FILE};
use htiedge::audit::{all_passed, verify_run, Verdict};
use htiedge::price::{estimate_hitting_time, Direction};
use htiedge::sweep::{sweep, write_sweep_csv, SweepGrid};
use htiedge::{RunConfig, RunReport};

#[derive(Parser)]
#[command(name = "htiedge", version, about = "Delayed-execution dominance simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the baseline and the delayed-execution strategy side by side and
    /// write the run directory (one per replication).
    Simulate {
        config: PathBuf,
        /// Overrides `run.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-audit a run directory (or a directory of `rep-*` runs) from its files.
    Verify { run_dir: PathBuf },
    /// Run a parameter grid such as `tau=10,25;gamma=25;queue_cap=1,3`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; defaults to `<output_dir>/sweep.csv`. Use `-` for stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate first-passage times of the configured price process.
    Recurrence {
        config: PathBuf,
        /// Threshold distance in ticks.
        #[arg(long)]
        xi: i64,
        #[arg(long)]
        samples: u64,
        /// Steps after which a sample counts as not hitting.
        #[arg(long, default_value_t = 10_000_000)]
        cap: u64,
        /// Starting price; defaults to the grid center.
        #[arg(long)]
        start: Option<i64>,
        #[arg(long, value_enum, default_value_t = Side::Both)]
        direction: Side,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    Above,
    Below,
    Both,
}

fn load_config(path: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = seed {
        config.run.master_seed = seed;
    }
    Ok(config)
}

fn print_verdicts(label: &str, verdicts: &[Verdict]) {
    for v in verdicts {
        let status = if v.passed { "PASS" } else { "FAIL" };
        if v.detail.is_empty() {
            println!("{label}{status} {} ({} checks)", v.clause, v.checks);
        } else {
            println!("{label}{status} {} ({} checks): {}", v.clause, v.checks, v.detail);
        }
    }
}

fn print_report(dir: &Path, report: &RunReport) {
    let s = &report.summary;
    println!(
        "{}: seed {} ticks {} phases {} Q_D {} final diff {} quanta (S {} / S* {}), min gap {}",
        dir.display(),
        report.seed,
        s.ticks,
        s.phases,
        s.delayed_quantity,
        s.final_diff,
        s.final_pnl_s,
        s.final_pnl_sstar,
        s.min_gap_ticks.map_or("-".to_string(), |g| g.to_string()),
    );
}

fn simulate(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let mut config = load_config(&config, seed)?;
    if let Some(out) = out {
        config.run.output_dir = out;
    }
    let root = config.run.output_dir.clone();
    let reps = config.run.replications;
    let dirs: Vec<PathBuf> = if reps == 1 {
        vec![root.clone()]
    } else {
        (0..reps).map(|r| replication_dir(&root, r)).collect()
    };
    let results: Vec<htiedge::Result<RunReport>> = dirs
        .par_iter()
        .enumerate()
        .map(|(rep, dir)| simulate_to_dir(&config, rep as u64, dir))
        .collect();
    let mut ok = true;
    for (dir, result) in dirs.iter().zip(results) {
        let report = result.with_context(|| format!("replication in {}", dir.display()))?;
        print_report(dir, &report);
        if !report.passed() {
            print_verdicts("  ", &report.verdicts);
        }
        ok &= report.passed();
    }
    Ok(ok)
}

fn run_dirs(root: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if root.join(SUMMARY_FILE).exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SUMMARY_FILE).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("{} holds no run directory", root.display());
    }
    Ok(dirs)
}

fn verify(root: PathBuf) -> anyhow::Result<bool> {
    let mut ok = true;
    for dir in run_dirs(&root)? {
        let verdicts = verify_run(&dir).with_context(|| format!("verifying {}", dir.display()))?;
        println!("{}", dir.display());
        print_verdicts("  ", &verdicts);
        ok &= all_passed(&verdicts);
    }
    Ok(ok)
}

fn run_sweep(config: PathBuf, grid: String, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let config = load_config(&config, seed)?;
    let grid: SweepGrid = grid.parse()?;
    let rows = sweep(&config, &grid)?;
    match out.unwrap_or_else(|| config.run.output_dir.join("sweep.csv")) {
        path if path.as_os_str() == "-" => write_sweep_csv(&rows, io::stdout().lock())?,
        path => {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            write_sweep_csv(&rows, BufWriter::new(File::create(&path)?))?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
    }
    let failures = rows.iter().filter(|r| r.is_failure()).count();
    let skipped = rows.iter().filter(|r| r.status == htiedge::sweep::CellStatus::Skipped).count();
    eprintln!("{} rows, {failures} failing, {skipped} skipped", rows.len());
    Ok(failures == 0)
}

#[allow(clippy::too_many_arguments)]
fn recurrence(
    config: PathBuf,
    xi: i64,
    samples: u64,
    cap: u64,
    start: Option<i64>,
    side: Side,
    seed: Option<u64>,
) -> anyhow::Result<bool> {
    let config = load_config(&config, seed)?;
    let price = &config.price;
    let start = start.unwrap_or((price.grid_min + price.grid_max) / 2);
    let directions: &[Direction] = match side {
        Side::Above => &[Direction::Above],
        Side::Below => &[Direction::Below],
        Side::Both => &[Direction::Above, Direction::Below],
    };
    let mut ok = true;
    let mut stdout = io::stdout().lock();
    for &direction in directions {
        let summary = estimate_hitting_time(price, start, xi, direction, samples, cap, config.run.master_seed)?;
        let all_finite = summary.count_finite == summary.samples;
        writeln!(
            stdout,
            "{} {direction:?} start {start} xi {xi}: {}/{} finite, mean {} steps, max {}",
            if all_finite { "PASS" } else { "FAIL" },
            summary.count_finite,
            summary.samples,
            summary.mean.map_or("-".to_string(), |m| format!("{m:.1}")),
            summary.max.map_or("-".to_string(), |m| m.to_string()),
        )?;
        ok &= all_finite;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, seed, out } => simulate(config, seed, out),
        Command::Verify { run_dir } => verify(run_dir),
        Command::Sweep { config, grid, seed, out } => run_sweep(config, grid, seed, out),
        Command::Recurrence { config, xi, samples, cap, start, direction, seed } => {
            recurrence(config, xi, samples, cap, start, direction, seed)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
