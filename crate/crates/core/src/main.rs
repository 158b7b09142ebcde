use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtlint::engine::DEFAULT_THRESHOLD;
use mtlint::history::DEFAULT_RENAME_THRESHOLD;
use mtlint::mapping::DEFAULT_CLONE_THRESHOLD;
use mtlint::metrics::{default_thresholds, parse_labels, threshold_sweep, MetricsRow};
use mtlint::pipeline::{analyze, run_detect, run_fix, Options};

/// Checks that a fork documents its modifications of licensed base files.
#[derive(Debug, Parser)]
#[command(name = "mtlint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify every fork commit and report violations.
    Detect(Common),
    /// Generate notice-file fixes for violating commits.
    Fix {
        #[command(flatten)]
        common: Common,
        /// Write the fixed notice files into the fork working tree.
        #[arg(long)]
        write: bool,
    },
    /// Compare classifications against labeled commits for a range of thresholds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// File with `<commit-id> <TYPE>` lines.
        #[arg(long)]
        labels: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Debug, Args)]
struct Common {
    /// Base (upstream) repository.
    #[arg(long)]
    base: PathBuf,
    /// Fork repository.
    #[arg(long)]
    fork: PathBuf,
    /// Fork point revision; defaults to the latest common ancestor.
    #[arg(long)]
    fork_point: Option<String>,
    /// Similarity a change-log entry needs to count as a notice.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Similarity for file-level clone mapping.
    #[arg(long, default_value_t = DEFAULT_CLONE_THRESHOLD)]
    clone_threshold: f64,
    /// Rename similarity in percent for history diffs.
    #[arg(long, default_value_t = DEFAULT_RENAME_THRESHOLD, value_parser = clap::value_parser!(u8).range(1..=100))]
    rename_threshold: u8,
    /// Modification-term database (TOML) replacing the built-in one.
    #[arg(long)]
    mt_db: Option<PathBuf>,
    /// Extension map (TOML) replacing the built-in one.
    #[arg(long)]
    ext_map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
}

impl Common {
    fn options(&self) -> Options {
        Options {
            fork_point: self.fork_point.clone(),
            th: self.threshold,
            clone_threshold: self.clone_threshold,
            rename_threshold: self.rename_threshold,
            mt_db: self.mt_db.clone(),
            ext_map: self.ext_map.clone(),
        }
    }
}

fn sweep_table(rows: &[MetricsRow]) -> String {
    let classes: Vec<_> = rows.first().map(|r| r.per_class.keys().copied().collect()).unwrap_or_default();
    let mut out = String::from("| th | macro P | macro R |");
    for c in &classes {
        out.push_str(&format!(" P({c}) | R({c}) |"));
    }
    out.push_str("\n|---|---|---|");
    out.push_str(&"---|---|".repeat(classes.len()));
    out.push('\n');
    for r in rows {
        out.push_str(&format!("| {:.1} | {:.3} | {:.3} |", r.th, r.macro_precision, r.macro_recall));
        for c in &classes {
            let m = &r.per_class[c];
            out.push_str(&format!(" {:.3} | {:.3} |", m.precision, m.recall));
        }
        out.push('\n');
    }
    out
}

fn run(cli: Cli) -> mtlint::Result<ExitCode> {
    match cli.command {
        Command::Detect(common) => {
            let report = run_detect(&common.base, &common.fork, &common.options())?;
            match common.format {
                Format::Json => println!("{}", report.to_json()),
                Format::Markdown => print!("{}", report.to_markdown()),
            }
            Ok(if report.has_violations() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Fix { common, write } => {
            let (report, outcome) = run_fix(&common.base, &common.fork, &common.options(), write)?;
            match common.format {
                Format::Json => {
                    let value = serde_json::json!({
                        "report": report,
                        "written": write,
                        "rounds": outcome.rounds,
                        "remaining": outcome.remaining,
                        "patches": outcome.patches.iter().map(|p| serde_json::json!({
                            "path": p.path,
                            "created": p.old.is_none(),
                            "diff": p.diff,
                        })).collect::<Vec<_>>(),
                    });
                    println!("{}", serde_json::to_string_pretty(&value)?);
                }
                Format::Markdown => {
                    print!("{}", report.to_markdown());
                    println!("\n## Fixes\n");
                    if outcome.patches.is_empty() {
                        println!("Nothing to fix.");
                    }
                    for p in &outcome.patches {
                        let verb = if write { "Wrote" } else { "Patch for" };
                        println!("{verb} `{}`:\n\n```diff\n{}```\n", p.path, p.diff);
                    }
                    if outcome.remaining > 0 {
                        println!("{} violation(s) could not be fixed automatically.", outcome.remaining);
                    }
                }
            }
            let clean = !report.has_violations() || (write && outcome.remaining == 0);
            Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Sweep { common, labels } => {
            let text = std::fs::read_to_string(&labels)?;
            let analysis = analyze(&common.base, &common.fork, &common.options())?;
            let corpus = analysis.labeled_corpus(parse_labels(&text)?)?;
            let rows = threshold_sweep(&corpus, &default_thresholds())?;
            match common.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
                Format::Markdown => print!("{}", sweep_table(&rows)),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
