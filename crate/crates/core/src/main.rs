use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use collusion_gnn::dataio::{dataset_stats, load_bids, save_bids, screens_by_tender, BidTable};
use collusion_gnn::experiments::{
    generate_synthetic, read_results_csv, render_report, render_table, run_phase1, run_phase2, PhaseIResult, Prepared,
    ResultRow, RunConfig, SynthConfig,
};
use collusion_gnn::graph::{build_graph, graph_stats, parse_relations, RelationKind};
use collusion_gnn::metrics::write_curve_csv;
use collusion_gnn::models::{load_checkpoint, save_checkpoint, Checkpoint, ModelKind};
use collusion_gnn::training::write_training_curve;
use collusion_gnn::{Error, Result};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Collusion detection in procurement bids with feedforward and relational
/// graph networks.
#[derive(Debug, Parser)]
#[command(name = "collusion-gnn", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a bid file and print descriptive statistics.
    Ingest {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Compute screening variables per tender.
    Screens {
        #[arg(long)]
        dataset: PathBuf,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edge counts and degree histograms of the bid graph.
    GraphStats {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated relations; everything available when omitted.
        #[arg(long)]
        relations: Option<String>,
    },
    /// Write a synthetic bid table with a planted cartel.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Rigged tenders indistinguishable from competitive ones.
        #[arg(long)]
        null_signal: bool,
    },
    /// Repeated within-dataset training and testing.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_parser = parse_model)]
        model: ModelKind,
        #[arg(long)]
        relations: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate trained checkpoints on another dataset without retraining.
    Transfer {
        /// Directory searched recursively for `*.ckpt` files.
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine `results.csv` files into one table.
    Report {
        /// Results files to merge.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Ingest { dataset } => ingest(&cfg, &dataset),
        Command::Screens { dataset, out } => screens(&cfg, &dataset, out.as_deref()),
        Command::GraphStats { dataset, relations } => graph(&cfg, &dataset, relations.as_deref()),
        Command::Synth { out, seed, null_signal } => synth(&cfg, &out, seed, null_signal),
        Command::Train {
            dataset,
            model,
            relations,
            runs,
            seed,
            out,
        } => train(&cfg, &dataset, model, relations.as_deref(), runs, seed, &out),
        Command::Transfer {
            checkpoints,
            dataset,
            out,
        } => transfer(&cfg, &checkpoints, &dataset, &out),
        Command::Report { results, out } => report(&results, out.as_deref()),
    }
}

fn load(cfg: &RunConfig, path: &Path) -> Result<BidTable> {
    load_bids(path, &cfg.schema)
}

fn ingest(cfg: &RunConfig, path: &Path) -> Result<()> {
    let table = load(cfg, path)?;
    println!("{}", dataset_stats(&table));
    let kinds: Vec<&str> = RelationKind::available_in(&table).iter().map(|k| k.name()).collect();
    println!("  Relations available:            {}", kinds.join(", "));
    Ok(())
}

fn screens(cfg: &RunConfig, path: &Path, out: Option<&Path>) -> Result<()> {
    let table = load(cfg, path)?;
    let screens = screens_by_tender(&table)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "tender_id",
            "n",
            "cv",
            "spd",
            "diffp",
            "rd",
            "kurt",
            "skew",
            "kstest",
            "a1",
            "a2",
            "undefined",
        ])?;
        for (tender, s) in &screens {
            let u = s.undefined;
            let flags: Vec<&str> = [
                (u.cv, "cv"),
                (u.diffp, "diffp"),
                (u.rd, "rd"),
                (u.kurt, "kurt"),
                (u.skew, "skew"),
                (u.kstest, "kstest"),
                (u.a2, "a2"),
            ]
            .iter()
            .filter(|(f, _)| *f)
            .map(|(_, n)| *n)
            .collect();
            let mut rec = vec![tender.clone(), s.n.to_string()];
            rec.extend([s.cv, s.spd, s.diffp, s.rd, s.kurt, s.skew, s.kstest, s.a1, s.a2].map(|v| v.to_string()));
            rec.push(flags.join(";"));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
    }
    match out {
        Some(p) => fs::write(p, buf).map_err(|e| io_error(p, e)),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

fn graph(cfg: &RunConfig, path: &Path, relations: Option<&str>) -> Result<()> {
    let table = load(cfg, path)?;
    let kinds = relations_for(cfg, &table, relations)?;
    let opts = cfg.phase_options()?;
    let g = build_graph(&table, &kinds, opts.self_loops)?;
    println!("{}", graph_stats(&g));
    Ok(())
}

fn synth(cfg: &RunConfig, out: &Path, seed: Option<u64>, null_signal: bool) -> Result<()> {
    let mut sc = if null_signal {
        SynthConfig {
            seed: cfg.synth.seed,
            ..SynthConfig::null_signal()
        }
    } else {
        cfg.synth.clone()
    };
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let table = generate_synthetic(&sc)?;
    save_bids(&table, out)?;
    println!("{}", dataset_stats(&table));
    Ok(())
}

/// Explicit relations from the flag or config, else all the table offers.
fn relations_for(cfg: &RunConfig, table: &BidTable, flag: Option<&str>) -> Result<Vec<RelationKind>> {
    let kinds = match flag {
        Some(list) => parse_relations(list)?,
        None => match cfg.relation_kinds()? {
            Some(k) => k,
            None => RelationKind::available_in(table),
        },
    };
    let available = RelationKind::available_in(table);
    if let Some(missing) = kinds.iter().find(|k| !available.contains(k)) {
        return Err(Error::Config(format!(
            "relation '{missing}' is not available in '{}'",
            table.name()
        )));
    }
    Ok(kinds)
}

fn train(
    cfg: &RunConfig,
    path: &Path,
    model: ModelKind,
    relations: Option<&str>,
    runs: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let mut opts = cfg.phase_options()?;
    if let Some(r) = runs {
        opts.runs = r;
    }
    if let Some(s) = seed {
        opts.base_seed = s;
    }
    let table = load(cfg, path)?;
    let kinds = relations_for(cfg, &table, relations)?;
    let data = Prepared::new(table, cfg.prefer_supplied_screens)?;
    let result = run_phase1(&data, model, &kinds, &opts)?;
    write_runs(&result, out)?;
    let rows = [ResultRow::from(&result)];
    render_report(&rows, out)?;
    print!("{}", render_table(&rows));
    if result.aggregate.failed == result.aggregate.attempted {
        return Err(Error::Grid(format!("all {} runs failed", result.aggregate.attempted)));
    }
    Ok(())
}

fn write_runs(result: &PhaseIResult, out: &Path) -> Result<()> {
    for run in &result.runs {
        let dir = out.join("runs").join(format!("run{}", run.index));
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let s = match &run.outcome {
            Ok(s) => s,
            Err(message) => {
                let p = dir.join("error.txt");
                fs::write(&p, format!("{message}\n")).map_err(|e| io_error(&p, e))?;
                continue;
            }
        };
        let mut curve = Vec::new();
        write_training_curve(&s.curve, &mut curve)?;
        write_file(&dir.join("curve.csv"), &curve)?;
        for (name, points) in [("roc.csv", &s.roc), ("pr.csv", &s.pr)] {
            if let Some(points) = points {
                let mut buf = Vec::new();
                write_curve_csv(points, &mut buf)?;
                write_file(&dir.join(name), &buf)?;
            }
        }
        let c = &s.config;
        let summary = format!(
            "seed={}\nlearning_rate={}\nweight_decay={}\nhidden_units={}\nf1={}\n",
            run.seed, c.learning_rate, c.weight_decay, c.hidden_units, s.metrics.thresholded.f1
        );
        write_file(&dir.join("run.txt"), summary.as_bytes())?;
        save_checkpoint(&s.checkpoint, &dir.join("model.ckpt"))?;
    }
    Ok(())
}

fn find_checkpoints(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.is_dir() {
            find_checkpoints(&path, found)?;
        } else if path.extension().is_some_and(|e| e == "ckpt") {
            found.push(path);
        }
    }
    Ok(())
}

fn transfer(cfg: &RunConfig, checkpoints: &Path, path: &Path, out: &Path) -> Result<()> {
    let mut paths = Vec::new();
    find_checkpoints(checkpoints, &mut paths)?;
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .ckpt files under {}", checkpoints.display())));
    }
    let models: Vec<Checkpoint> = paths.iter().map(|p| load_checkpoint(p)).collect::<Result<_>>()?;
    let data = Prepared::new(load(cfg, path)?, cfg.prefer_supplied_screens)?;
    let result = run_phase2(&models, &data, &cfg.transfer_options())?;
    let rows = [ResultRow::from(&result)];
    render_report(&rows, out)?;
    print!("{}", render_table(&rows));
    Ok(())
}

fn report(inputs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut rows = Vec::new();
    for p in inputs {
        let f = fs::File::open(p).map_err(|e| io_error(p, e))?;
        rows.extend(read_results_csv(f)?);
    }
    match out {
        Some(dir) => render_report(&rows, dir)?,
        None if rows.is_empty() => return Err(Error::Data("no result rows found".into())),
        None => {}
    }
    print!("{}", render_table(&rows));
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
