//! Command-line driver: generate datasets, run queries under any
//! materialization strategy, verify results against the reference
//! evaluator, and produce benchmark CSVs.
//!
//! Every query run starts with a cold buffer pool, so page counters are a
//! pure function of (data, query, strategy, pool size) and repeat runs
//! must agree bit for bit. The bench command enforces that agreement and
//! treats a divergence as a hard failure.
//!
//! Exit codes: 0 success, 1 verification or determinism failure, 2 bad
//! usage or an unplannable query, 3 data or execution error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hmdb_core::exec::{run_plan, ExecCtx, DEFAULT_MEM_CAP};
use hmdb_core::metrics::{snapshot, QueryMetrics};
use hmdb_core::planner::{
    build_plan_with, MaterializationSchedule, PlanOptions, StrategyKind,
};
use hmdb_core::storage::{open_catalog, BufferPool, Catalog};
use hmdb_core::workload::{generate, read_manifest, Sf};
use hmdb_core::EngineError;
use hmdb_ir::{builtin_query, compare_multisets, parse_query_text, QueryIR, Row};

// ── Outcome and exit codes ──

enum Failure {
    /// Results disagree or counters are not reproducible.
    Check(String),
    /// The request cannot be planned or parsed.
    Plan(String),
    /// The data cannot be read, written, or executed over.
    Data(String),
}

type Outcome<T> = Result<T, Failure>;

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Failure {
        match e {
            EngineError::Plan(_) | EngineError::Ir(_) => Failure::Plan(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<hmdb_oracle::OracleError> for Failure {
    fn from(e: hmdb_oracle::OracleError) -> Failure {
        Failure::Data(e.to_string())
    }
}

// ── Arguments ──

#[derive(Parser)]
#[command(name = "hmdb", version, about = "Columnar SPJ engine workbench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset at the given scale factor.
    Gen {
        /// Scale factor, e.g. 0.05.
        #[arg(long)]
        sf: String,
        /// Generator seed; identical (sf, seed) reproduce identical bytes.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one query once, cold, and report its metrics.
    Run {
        #[command(flatten)]
        target: RunTarget,
        /// Materialization strategy: early, late, ultralate, or hybrid.
        #[arg(long)]
        strategy: StrategyKind,
        /// Per-attribute schedule file (hybrid only).
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Plan hybrid joins in their generic form.
        #[arg(long)]
        generic_hybrid_joins: bool,
        /// Emit one CSV row instead of the readable report.
        #[arg(long)]
        csv: bool,
    },
    /// Run a query under all four strategies and compare against the
    /// reference evaluator.
    Verify {
        #[command(flatten)]
        target: RunTarget,
    },
    /// Print the plan shape for a query without touching any data.
    Explain {
        /// Built-in query name or a query file path.
        #[arg(long)]
        query: String,
        /// Materialization strategy: early, late, ultralate, or hybrid.
        #[arg(long)]
        strategy: StrategyKind,
        /// Per-attribute schedule file (hybrid only).
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Plan hybrid joins in their generic form.
        #[arg(long)]
        generic_hybrid_joins: bool,
    },
    /// Run a query/strategy grid and emit a CSV, checking repeatability.
    Bench {
        /// Directory holding (or receiving) one dataset per scale factor.
        #[arg(long)]
        data_root: PathBuf,
        /// Comma-separated scale factors.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
        sfs: Vec<String>,
        /// Comma-separated query names or file paths.
        #[arg(long, value_delimiter = ',', default_value = "q5mod,q5mod_nocname,q9mod")]
        queries: Vec<String>,
        /// Comma-separated strategies.
        #[arg(long, value_delimiter = ',', default_value = "early,late,ultralate,hybrid")]
        strategies: Vec<StrategyKind>,
        /// Seed used when a dataset has to be generated.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Runs per cell; page counters must agree across all of them.
        #[arg(long, default_value_t = 1)]
        repeat: u32,
        /// Buffer pool pages; default is 10% of the largest column.
        #[arg(long)]
        pool_pages: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Arguments shared by run and verify.
#[derive(Args)]
struct RunTarget {
    /// Dataset directory (from `gen`).
    #[arg(long)]
    data: PathBuf,
    /// Built-in query name (q5mod, q5mod_nocname, q9mod) or a file path.
    #[arg(long)]
    query: String,
    /// Buffer pool pages; default is 10% of the largest column.
    #[arg(long)]
    pool_pages: Option<usize>,
    /// Visit probed pages in ascending order within each read batch.
    #[arg(long)]
    sort_probe: bool,
    /// Hash table memory budget in MiB.
    #[arg(long, default_value_t = 512)]
    mem_mb: u64,
}

// ── Shared plumbing ──

const CSV_HEADER: &str =
    "query,strategy,sf,pool_pages,pages_seq,pages_rand,bytes_read,rows_pushed,hashtable_peak,wall_ms";

fn load_query(name_or_path: &str) -> Outcome<QueryIR> {
    if let Some(q) = builtin_query(name_or_path) {
        return Ok(q);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(Failure::Plan(format!(
            "'{name_or_path}' is not a built-in query and no such file exists"
        )));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let fallback = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("query");
    parse_query_text(&text, fallback).map_err(|e| Failure::Plan(e.to_string()))
}

fn load_schedule(path: &Path, query: &QueryIR) -> Outcome<MaterializationSchedule> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(MaterializationSchedule::parse(&text, query)?)
}

/// Default pool: a tenth of the largest column, rounded up, at least one
/// page. Small enough that probing patterns matter, large enough that
/// sequential scans are not pathological.
fn default_pool(catalog: &Catalog) -> usize {
    let largest = catalog
        .columns()
        .iter()
        .map(|c| c.page_count())
        .max()
        .unwrap_or(1);
    (largest.div_ceil(10)).max(1) as usize
}

struct RunConfig {
    pool_pages: usize,
    sort_probe: bool,
    mem_cap: u64,
}

impl RunConfig {
    fn from_target(t: &RunTarget, catalog: &Catalog) -> RunConfig {
        RunConfig {
            pool_pages: t.pool_pages.unwrap_or_else(|| default_pool(catalog)),
            sort_probe: t.sort_probe,
            mem_cap: t.mem_mb * 1024 * 1024,
        }
    }
}

/// One cold run: fresh pool, plan, drive, snapshot.
fn run_cold(
    catalog: &Arc<Catalog>,
    query: &QueryIR,
    strategy: StrategyKind,
    schedule: Option<&MaterializationSchedule>,
    opts: PlanOptions,
    cfg: &RunConfig,
) -> Outcome<(Vec<Row>, QueryMetrics)> {
    let spec = build_plan_with(query, strategy, schedule, opts)?;
    let mut ctx = ExecCtx::new(Arc::new(BufferPool::new(cfg.pool_pages)), Arc::clone(catalog));
    ctx.sort_probe = cfg.sort_probe;
    ctx.mem_cap = cfg.mem_cap;
    let mut root = spec.instantiate(&ctx)?;
    let rows = run_plan(&mut root, &ctx, &query.select)?;
    let metrics = snapshot(&ctx)?;
    Ok((rows, metrics))
}

fn csv_row(
    query: &str,
    strategy: StrategyKind,
    sf: &str,
    pool_pages: usize,
    m: &QueryMetrics,
    wall_ms: f64,
) -> String {
    format!(
        "{query},{strategy},{sf},{pool_pages},{},{},{},{},{},{:.3}",
        m.pages_seq_total(),
        m.pages_rand_total(),
        m.bytes_read_total(),
        m.rows_pushed_total,
        m.hashtable_bytes_peak,
        wall_ms
    )
}

fn open_data(dir: &Path) -> Outcome<Arc<Catalog>> {
    Ok(Arc::new(open_catalog(dir)?))
}

fn data_sf(dir: &Path) -> String {
    read_manifest(dir).map(|m| m.sf).unwrap_or_else(|_| "?".into())
}

// ── Commands ──

fn cmd_gen(sf: &str, seed: u64, out: &Path) -> Outcome<()> {
    let sf = Sf::parse(sf)?;
    let manifest = generate(out, &sf, seed)?;
    println!("dataset sf={} seed={} at {}", manifest.sf, manifest.seed, out.display());
    for (table, rows) in &manifest.tables {
        println!("  {table:<10} {rows:>10} rows");
    }
    Ok(())
}

fn cmd_run(
    target: &RunTarget,
    strategy: StrategyKind,
    schedule: Option<&Path>,
    generic_joins: bool,
    csv: bool,
) -> Outcome<()> {
    let catalog = open_data(&target.data)?;
    let query = load_query(&target.query)?;
    let schedule = match schedule {
        Some(p) => Some(load_schedule(p, &query)?),
        None => None,
    };
    let cfg = RunConfig::from_target(target, &catalog);
    let opts = PlanOptions {
        generic_hybrid_joins: generic_joins,
    };
    let (rows, m) = run_cold(&catalog, &query, strategy, schedule.as_ref(), opts, &cfg)?;

    if csv {
        println!("{CSV_HEADER}");
        println!(
            "{}",
            csv_row(&query.name, strategy, &data_sf(&target.data), cfg.pool_pages, &m, m.wall_ms)
        );
        return Ok(());
    }

    println!("{} under {strategy}: {} result rows", query.name, rows.len());
    println!(
        "pool {} pages; pages_seq {} pages_rand {} bytes {} rows_pushed {} ht_peak {} wall {:.3} ms",
        cfg.pool_pages,
        m.pages_seq_total(),
        m.pages_rand_total(),
        m.bytes_read_total(),
        m.rows_pushed_total,
        m.hashtable_bytes_peak,
        m.wall_ms
    );
    println!("column                        seq     rand     hits  evicted");
    for (name, c) in &m.columns {
        println!(
            "{name:<26} {:>6} {:>8} {:>8} {:>8}",
            c.pages_seq, c.pages_rand, c.hits, c.evictions
        );
    }
    println!("operator outputs:");
    for op in &m.ops {
        println!("  {:<40} {:>6} blocks {:>9} rows", op.label, op.blocks_out, op.rows_out);
    }
    Ok(())
}

fn cmd_verify(target: &RunTarget) -> Outcome<()> {
    let catalog = open_data(&target.data)?;
    let query = load_query(&target.query)?;
    let cfg = RunConfig::from_target(target, &catalog);

    let oracle = hmdb_oracle::load(&target.data)?;
    let mut expected = oracle.run(&query)?;

    let mut failures = Vec::new();
    for strategy in StrategyKind::ALL {
        let (mut rows, _) = run_cold(&catalog, &query, strategy, None, PlanOptions::default(), &cfg)?;
        let n = rows.len();
        if let Some(diff) = compare_multisets(&mut rows, &mut expected) {
            failures.push(format!("{strategy}: {diff}"));
        } else {
            println!("  {strategy:<9} {n} rows, matches");
        }
    }
    if failures.is_empty() {
        println!("4 strategies == oracle: OK ({} rows)", expected.len());
        Ok(())
    } else {
        Err(Failure::Check(failures.join("\n")))
    }
}

fn cmd_explain(
    query: &str,
    strategy: StrategyKind,
    schedule: Option<&Path>,
    generic_joins: bool,
) -> Outcome<()> {
    let query = load_query(query)?;
    let schedule = match schedule {
        Some(p) => Some(load_schedule(p, &query)?),
        None => None,
    };
    let opts = PlanOptions {
        generic_hybrid_joins: generic_joins,
    };
    let spec = build_plan_with(&query, strategy, schedule.as_ref(), opts)?;
    print!("{}", spec.signature());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    data_root: &Path,
    sfs: &[String],
    queries: &[String],
    strategies: &[StrategyKind],
    seed: u64,
    repeat: u32,
    pool_pages: Option<usize>,
    csv_path: Option<&Path>,
) -> Outcome<()> {
    if repeat == 0 {
        return Err(Failure::Plan("--repeat must be at least 1".into()));
    }
    let mut lines = vec![CSV_HEADER.to_string()];
    for sf_text in sfs {
        let sf = Sf::parse(sf_text)?;
        let dir = data_root.join(format!("sf-{sf_text}"));
        if !dir.join("catalog.tsv").exists() {
            eprintln!("generating sf={sf_text} under {}", dir.display());
            generate(&dir, &sf, seed)?;
        }
        let catalog = open_data(&dir)?;
        let pool = pool_pages.unwrap_or_else(|| default_pool(&catalog));
        let cfg = RunConfig {
            pool_pages: pool,
            sort_probe: false,
            mem_cap: DEFAULT_MEM_CAP,
        };
        for query_name in queries {
            let query = load_query(query_name)?;
            for &strategy in strategies {
                let mut first: Option<QueryMetrics> = None;
                let mut wall_total = 0.0;
                for run in 0..repeat {
                    let (_, m) =
                        run_cold(&catalog, &query, strategy, None, PlanOptions::default(), &cfg)?;
                    wall_total += m.wall_ms;
                    match &first {
                        None => first = Some(m),
                        Some(f) => {
                            // Wall time varies; everything counted must not.
                            let same = f.columns == m.columns
                                && f.rows_pushed_total == m.rows_pushed_total
                                && f.hashtable_bytes_peak == m.hashtable_bytes_peak;
                            if !same {
                                return Err(Failure::Check(format!(
                                    "{} {strategy} sf={sf_text}: counters differ between run 1 and run {}",
                                    query.name,
                                    run + 1
                                )));
                            }
                        }
                    }
                }
                let m = first.expect("repeat >= 1");
                let wall = wall_total / repeat as f64;
                lines.push(csv_row(&query.name, strategy, sf_text, pool, &m, wall));
                eprintln!("  {}", lines.last().unwrap());
            }
        }
    }
    let csv = lines.join("\n") + "\n";
    match csv_path {
        Some(p) => {
            fs::write(p, csv).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            println!("wrote {} rows to {}", lines.len() - 1, p.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

// ── Entry ──

fn dispatch(cli: Cli) -> Outcome<()> {
    match cli.cmd {
        Cmd::Gen { sf, seed, out } => cmd_gen(&sf, seed, &out),
        Cmd::Run {
            target,
            strategy,
            schedule,
            generic_hybrid_joins,
            csv,
        } => cmd_run(&target, strategy, schedule.as_deref(), generic_hybrid_joins, csv),
        Cmd::Verify { target } => cmd_verify(&target),
        Cmd::Explain {
            query,
            strategy,
            schedule,
            generic_hybrid_joins,
        } => cmd_explain(&query, strategy, schedule.as_deref(), generic_hybrid_joins),
        Cmd::Bench {
            data_root,
            sfs,
            queries,
            strategies,
            seed,
            repeat,
            pool_pages,
            csv,
        } => cmd_bench(
            &data_root,
            &sfs,
            &queries,
            &strategies,
            seed,
            repeat,
            pool_pages,
            csv.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed:\n{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Plan(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
