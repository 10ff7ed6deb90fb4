use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otgnn::graphdata::{convert_csv, Dataset, SplitSpec, Task};
use otgnn::trainer::{self, metrics, Model, TrainConfig};
use otgnn::{Error, Real, Result};
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Molecular property prediction with Wasserstein prototype readouts.
#[derive(Parser, Debug)]
#[command(name = "otgnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a CSV of SMILES and labels into a graph JSONL file.
    Convert(ConvertArgs),
    /// Split a dataset, train one model and evaluate it on the test split.
    Train(TrainArgs),
    /// Print test metrics of a checkpoint on a dataset as JSON.
    Evaluate(EvaluateArgs),
    /// Write per-graph representation vectors (the MLP input) as CSV.
    Embed(EmbedArgs),
    /// Correlate pairwise embedding distances with label differences.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    task: Task,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Overrides the config's `seed`.
    #[arg(long)]
    run_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write every optimal transport plan as JSON.
    #[arg(long)]
    dump_plans: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(EXIT_USAGE),
                _ => ExitCode::from(EXIT_RUNTIME),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert(a) => convert(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Embed(a) => embed(a),
        Command::Analyze(a) => analyze(a),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn convert(a: ConvertArgs) -> Result<()> {
    let (ds, failures) = convert_csv(BufReader::new(open(&a.input)?), a.task)?;
    ds.save_jsonl(&a.out)?;
    eprintln!("converted {} molecules, {} failed", ds.len(), failures.len());
    for f in &failures {
        eprintln!("  line {}: {}", f.line, f.message);
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config = TrainConfig::from_json(&text)?;
    config.validate().map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut config = load_config(&a.config)?;
    if let Some(seed) = a.run_seed {
        config.seed = seed;
    }
    let data = Dataset::load_jsonl(&a.data)?;
    let run = trainer::run(&config, &data, &SplitSpec::with_seed(a.split_seed), Some(&a.out))?;
    print_json(&run.metrics.summary)
}

fn load_pair(checkpoint: &Path, data: &Path) -> Result<(Model, Dataset)> {
    let (model, _) = Model::load(checkpoint)?;
    let ds = Dataset::load_jsonl(data)?;
    if ds.task != model.task {
        return Err(Error::Usage(format!(
            "dataset task {} does not match checkpoint task {}",
            ds.task, model.task
        )));
    }
    Ok((model, ds))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (model, ds) = load_pair(&a.checkpoint, &a.data)?;
    print_json(&trainer::evaluate(&model, &ds)?)
}

#[derive(Serialize)]
struct PlanDump<'a> {
    id: &'a str,
    /// One `n × N` matrix per prototype.
    plans: Vec<Vec<Vec<Real>>>,
}

fn embed(a: EmbedArgs) -> Result<()> {
    let (model, ds) = load_pair(&a.checkpoint, &a.data)?;
    if a.dump_plans.is_some() && !model.config.head.uses_transport() {
        return Err(Error::Usage(format!(
            "--dump-plans needs a transport head, checkpoint uses {}",
            model.config.head
        )));
    }
    let reps = model.represent(&ds)?;
    let width = reps.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(&a.out)?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=width).map(|k| format!("r_{k}")));
    w.write_record(&header)?;
    for (g, row) in ds.graphs.iter().zip(&reps) {
        let mut record = vec![g.id.clone()];
        record.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(&a.out, e))?;

    if let Some(path) = a.dump_plans {
        let plans = model.transport_plans(&ds)?;
        let dump: Vec<PlanDump> = ds
            .graphs
            .iter()
            .zip(&plans)
            .map(|(g, ps)| PlanDump {
                id: &g.id,
                plans: ps
                    .iter()
                    .map(|p| {
                        let m = p.matrix();
                        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
                    })
                    .collect(),
            })
            .collect();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer(io::BufWriter::new(file), &dump)?;
    }
    Ok(())
}

fn read_embeddings(path: &Path) -> Result<Vec<(String, Vec<Real>)>> {
    let mut reader = csv::Reader::from_reader(BufReader::new(open(path)?));
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("id") || headers.len() < 2 {
        return Err(Error::Usage(format!(
            "{}: expected a header `id,r_1,...`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let values = record
            .iter()
            .skip(1)
            .map(|v| {
                v.trim().parse::<Real>().map_err(|_| Error::Record {
                    line,
                    message: format!("bad number {v:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((record[0].to_string(), values));
    }
    Ok(rows)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let rows = read_embeddings(&a.embeddings)?;
    let ds = Dataset::load_jsonl(&a.data)?;
    if rows.len() != ds.len() || rows.iter().zip(&ds.graphs).any(|(r, g)| r.0 != g.id) {
        return Err(Error::Usage(
            "embedding rows must list the dataset's graphs in order (as written by `embed`)".into(),
        ));
    }
    let labels = ds
        .graphs
        .iter()
        .map(|g| g.label.ok_or_else(|| Error::Usage(format!("graph '{}' has no label", g.id))))
        .collect::<Result<Vec<_>>>()?;
    let embeddings: Vec<Vec<Real>> = rows.into_iter().map(|r| r.1).collect();
    print_json(&metrics::correlation_analysis(&embeddings, &labels)?)
}
