use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::{load_grid_file, FileConfig};
use super::{
    Cli, CliError, Command, EvaluateArgs, FeaturizeArgs, IngestArgs, LabelArgs, SplitArgs, SynthCaptureArgs,
    SynthCommand, SynthDatasetArgs, TrainArgs, TuneArgs,
};
use crate::capture;
use crate::dataset::{
    read_dataset_csv, read_feature_rows, read_split_dir, split, write_dataset_csv, write_features_csv, write_split_dir,
    LabeledDataset, MonitoredList, Partition, Ratios, Row, Task, TARGETED,
};
use crate::eval::{
    default_grid, evaluate_model, format_csv, format_table, grid_search, task_averaging, write_grid_csv, Averaging,
    AveragingMode, GridOptions, ReportRow, Scoring, DEFAULT_GRID_CAP,
};
use crate::features::featurize;
use crate::flow::{assemble, flow_stats, read_flows_csv, write_flows_csv, Flow, FlowConfig, FlowCsvError};
use crate::learners::{fit, ClassifierSpec, HyperValue, ModelKind, TrainedModel};
use crate::synth::{closed_world_profiles, generate_capture, generate_dataset};

/// Suffix of model files written by `tune` and picked up by `evaluate`
/// when given a directory.
const MODEL_SUFFIX: &str = ".model.json";

pub(super) fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Synth(SynthCommand::Capture(a)) => synth_capture(&file, a),
        Command::Synth(SynthCommand::Dataset(a)) => synth_dataset(&file, a),
        Command::Ingest(a) => ingest(&file, a),
        Command::Featurize(a) => featurize_cmd(a),
        Command::Label(a) => label_cmd(a),
        Command::Split(a) => split_cmd(&file, a),
        Command::Train(a) => train(&file, a),
        Command::Tune(a) => tune(&file, a),
        Command::Evaluate(a) => evaluate(&file, a),
    }
}

/// Every run states its fully resolved settings on standard error.
fn log_config(command: &str, settings: serde_json::Value) {
    eprintln!("{command}: resolved configuration {settings}");
}

fn require_seed(flag: Option<u64>, file: &FileConfig, command: &str) -> Result<u64, CliError> {
    flag.or(file.seed)
        .ok_or_else(|| CliError::Invalid(format!("`{command}` is randomized and requires --seed")))
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| CliError::Invalid(format!("{what}: {e}")))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn read_flows(path: &Path) -> Result<Vec<Flow>, CliError> {
    read_flows_csv(open(path)?).map_err(|e| match e {
        FlowCsvError::Csv(e) if e.is_io_error() => CliError::Io(format!("{}: {e}", path.display())),
        other => CliError::Invalid(format!("{}: {other}", path.display())),
    })
}

fn read_split(path: &Path) -> Result<LabeledDataset, CliError> {
    read_split_dir(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn print_class_counts(ds: &LabeledDataset, task: Task) {
    for (label, n) in ds.class_counts(task) {
        println!("{label}: {n}");
    }
}

fn synth_capture(file: &FileConfig, a: SynthCaptureArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, file, "synth capture")?;
    log_config(
        "synth capture",
        json!({"sites": a.sites, "background": a.background, "visits": a.visits, "seed": seed, "out": a.out}),
    );
    let generated = generate_capture(&closed_world_profiles(a.sites, a.background), a.visits, seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    write_file(&a.out.join("capture.pcapng"), &generated.capture)?;
    write_file(&a.out.join("monitored.txt"), generated.monitored.to_text().as_bytes())?;
    write_file(&a.out.join("ground_truth.csv"), generated.ground_truth_csv().as_bytes())?;
    let targeted = generated.ground_truth.iter().filter(|l| l.as_str() != crate::dataset::UNTARGETED).count();
    println!(
        "{} packets, {} flows ({} targeted, {} untargeted)",
        generated.packets,
        generated.ground_truth.len(),
        targeted,
        generated.ground_truth.len() - targeted
    );
    Ok(())
}

fn synth_dataset(file: &FileConfig, a: SynthDatasetArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, file, "synth dataset")?;
    log_config(
        "synth dataset",
        json!({
            "sites": a.sites, "background": a.background, "rows": a.rows,
            "separability": a.separability, "imbalance": a.imbalance, "seed": seed, "out": a.out,
        }),
    );
    let ds = generate_dataset(&closed_world_profiles(a.sites, a.background), a.rows, a.separability, a.imbalance, seed)?;
    write_dataset_csv(create(&a.out)?, &ds)?;
    print_class_counts(&ds, Task::Binary);
    Ok(())
}

fn ingest(file: &FileConfig, a: IngestArgs) -> Result<(), CliError> {
    let defaults = FlowConfig::default();
    let config = FlowConfig {
        idle_timeout: a.idle_timeout.or(file.idle_timeout).unwrap_or(defaults.idle_timeout),
        active_timeout: a.active_timeout.or(file.active_timeout).unwrap_or(defaults.active_timeout),
        honor_tcp_close: if a.no_tcp_close {
            false
        } else {
            file.honor_tcp_close.unwrap_or(defaults.honor_tcp_close)
        },
    };
    if !(config.idle_timeout > 0.0 && config.active_timeout > 0.0) {
        return Err(CliError::Invalid("timeouts must be positive".into()));
    }
    log_config("ingest", json!({"capture": a.capture, "flow_config": config, "out": a.out}));
    let reader = capture::open(&a.capture).map_err(|e| match e {
        capture::CaptureError::Io(e) => CliError::io(&a.capture, e),
        other => CliError::Invalid(format!("{}: {other}", a.capture.display())),
    })?;
    let summary = capture::ingest(reader).map_err(|e| match e {
        capture::CaptureError::Io(e) => CliError::io(&a.capture, e),
        other => CliError::Invalid(format!("{}: {other}", a.capture.display())),
    })?;
    let assembly = assemble(&summary.records, config);
    write_flows_csv(create(&a.out)?, &assembly.flows).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{}", flow_stats(&assembly.flows));
    eprintln!(
        "ingest: {} packets read, {} skipped, {} malformed, {} not TCP/UDP",
        summary.raw_packets, summary.skipped, summary.malformed, assembly.dropped
    );
    Ok(())
}

fn featurize_cmd(a: FeaturizeArgs) -> Result<(), CliError> {
    log_config("featurize", json!({"flows": a.flows, "out": a.out}));
    let flows = read_flows(&a.flows)?;
    let features: Vec<_> = flows.iter().map(featurize).collect();
    write_features_csv(create(&a.out)?, &features)?;
    println!("{} flows featurized", features.len());
    Ok(())
}

fn label_cmd(a: LabelArgs) -> Result<(), CliError> {
    log_config(
        "label",
        json!({"flows": a.flows, "features": a.features, "monitored": a.monitored, "out": a.out}),
    );
    let flows = read_flows(&a.flows)?;
    let (names, features) = read_feature_rows(open(&a.features)?)?;
    if flows.len() != features.len() {
        return Err(CliError::Invalid(format!(
            "{} flows but {} feature rows",
            flows.len(),
            features.len()
        )));
    }
    let text = std::fs::read_to_string(&a.monitored).map_err(|e| CliError::io(&a.monitored, e))?;
    let list = MonitoredList::parse(&text)?;
    let rows = flows
        .iter()
        .zip(features)
        .map(|(flow, f)| {
            Ok(match list.site_for(flow)? {
                Some(site) => Row::targeted(f, site),
                None => Row::untargeted(f),
            })
        })
        .collect::<Result<Vec<_>, crate::dataset::DatasetError>>()?;
    let ds = LabeledDataset::new(names, rows)?;
    write_dataset_csv(create(&a.out)?, &ds)?;
    print_class_counts(&ds, Task::Binary);
    Ok(())
}

fn split_cmd(file: &FileConfig, a: SplitArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, file, "split")?;
    let ratios: Ratios = match a.ratios.as_ref().or(file.ratios.as_ref()) {
        Some(s) => parse("--ratios", s)?,
        None => Ratios::default(),
    };
    let stratify: Task = match a.stratify.as_ref().or(file.stratify.as_ref()) {
        Some(s) => parse("--stratify", s)?,
        None => Task::Multiclass,
    };
    log_config(
        "split",
        json!({"dataset": a.dataset, "ratios": ratios, "stratify": stratify.to_string(), "seed": seed, "out": a.out}),
    );
    let ds = read_dataset_csv(open(&a.dataset)?)?;
    let ds = split(&ds, ratios, stratify, seed)?;
    write_split_dir(&a.out, &ds)?;
    for p in Partition::ALL {
        println!("{}: {} rows", p.file_name(), ds.partition_indices(p).len());
    }
    Ok(())
}

fn resolve_task(flag: Option<&String>, file: &FileConfig) -> Result<Task, CliError> {
    match flag.or(file.task.as_ref()) {
        Some(s) => parse("--task", s),
        None => Ok(Task::Binary),
    }
}

fn train(file: &FileConfig, a: TrainArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, file, "train")?;
    let kind: ModelKind = parse("--model", &a.model)?;
    let task = resolve_task(a.task.as_ref(), file)?;
    let mut spec = ClassifierSpec::new(kind, seed);
    spec.hyperparameters = file.hyperparameters_for(kind);
    for p in &a.params {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("--param {p:?}: expected NAME=VALUE")))?;
        spec.hyperparameters.insert(name.trim().to_string(), parse::<HyperValue>("--param", value)?);
    }
    spec.validate()?;
    log_config(
        "train",
        json!({"split": a.split, "task": task.to_string(), "spec": spec, "out": a.out}),
    );
    let ds = read_split(&a.split)?;
    let model = fit(&spec, &ds.partition(Partition::Train), task)?;
    write_file(&a.out, &model.save())?;
    println!("{} trained on {} rows, {} classes", kind, ds.partition_indices(Partition::Train).len(), model.classes.len());
    Ok(())
}

fn model_file_name(kind: ModelKind) -> String {
    format!("{}{MODEL_SUFFIX}", kind.display_name().to_ascii_lowercase())
}

fn tune(file: &FileConfig, a: TuneArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, file, "tune")?;
    let task = resolve_task(a.task.as_ref(), file)?;
    let names: Vec<String> = if !a.models.is_empty() {
        a.models.clone()
    } else if let Some(m) = &file.models {
        m.clone()
    } else {
        ModelKind::ALL.iter().map(|k| k.display_name().to_string()).collect()
    };
    let mut kinds: Vec<ModelKind> = names.iter().map(|n| parse("--models", n)).collect::<Result<_, _>>()?;
    kinds.sort_by_key(|k| ModelKind::ALL.iter().position(|x| x == k));
    kinds.dedup();
    let grid_path = a.grid.clone().or(file.grid.clone());
    let grids = match &grid_path {
        Some(p) => load_grid_file(p)?,
        None => BTreeMap::new(),
    };
    let options = GridOptions {
        k: a.folds.or(file.folds).unwrap_or(5),
        scoring: match a.scoring.as_ref().or(file.scoring.as_ref()) {
            Some(s) => parse::<Scoring>("--scoring", s)?,
            None => Scoring::Accuracy,
        },
        cap: DEFAULT_GRID_CAP,
    };
    let plan: Vec<(ClassifierSpec, crate::eval::Grid)> = kinds
        .iter()
        .map(|&kind| {
            let mut base = ClassifierSpec::new(kind, seed);
            base.hyperparameters = file.hyperparameters_for(kind);
            let grid = grids.get(&kind).cloned().unwrap_or_else(|| default_grid(kind));
            (base, grid)
        })
        .collect();
    log_config(
        "tune",
        json!({
            "split": a.split, "task": task.to_string(), "seed": seed, "folds": options.k,
            "scoring": options.scoring.to_string(), "grid_file": grid_path,
            "models": plan.iter().map(|(b, g)| json!({"spec": b, "grid": g})).collect::<Vec<_>>(),
            "out": a.out,
        }),
    );
    let ds = read_split(&a.split)?;
    let train = ds.partition(Partition::Train);
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    for (base, grid) in &plan {
        let result = grid_search(base, grid, &train, task, seed, options)?;
        let kind = base.kind;
        write_file(&a.out.join(model_file_name(kind)), &result.model.save())?;
        let grid_csv = a.out.join(format!("{}.grid.csv", kind.display_name().to_ascii_lowercase()));
        write_grid_csv(create(&grid_csv)?, &result.rows).map_err(|e| CliError::Io(e.to_string()))?;
        let chosen: Vec<String> = result.best.hyperparameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{kind}: best {} with mean {} {:.4}",
            if chosen.is_empty() { "defaults".to_string() } else { chosen.join(" ") },
            options.scoring,
            result.rows[result.best_index].mean
        );
    }
    Ok(())
}

/// Model files named on the command line, with directories expanded to
/// their `*.model.json` files in report order.
fn model_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for input in inputs {
        if !input.is_dir() {
            out.push(input.clone());
            continue;
        }
        let mut found: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|e| CliError::io(input, e))?
            .map(|entry| entry.map(|e| e.path()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::io(input, e))?
            .into_iter()
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(MODEL_SUFFIX)))
            .collect();
        found.sort_by_key(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            let rank = ModelKind::ALL
                .iter()
                .position(|k| name == model_file_name(*k))
                .unwrap_or(ModelKind::ALL.len());
            (rank, name)
        });
        if found.is_empty() {
            return Err(CliError::Invalid(format!("{}: no *{MODEL_SUFFIX} files", input.display())));
        }
        out.extend(found);
    }
    Ok(out)
}

fn evaluate(file: &FileConfig, a: EvaluateArgs) -> Result<(), CliError> {
    let paths = model_paths(&a.models)?;
    let models: Vec<TrainedModel> = paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| CliError::io(p, e))?;
            TrainedModel::load(&bytes).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))
        })
        .collect::<Result<_, _>>()?;
    let task = models[0].task;
    if let Some(m) = models.iter().find(|m| m.task != task) {
        return Err(CliError::Invalid(format!(
            "models mix tasks: {} and {}",
            task, m.task
        )));
    }
    let positive = a
        .positive_class
        .clone()
        .or(file.positive_class.clone())
        .unwrap_or_else(|| TARGETED.to_string());
    let averaging = match a.averaging.as_ref().or(file.averaging.as_ref()) {
        None => match task {
            Task::Binary => Averaging::Binary { positive },
            Task::Multiclass => task_averaging(task),
        },
        Some(s) => match parse::<AveragingMode>("--averaging", s)? {
            AveragingMode::Binary => Averaging::Binary { positive },
            AveragingMode::Macro => Averaging::Macro,
            AveragingMode::Weighted => Averaging::Weighted,
        },
    };
    log_config(
        "evaluate",
        json!({"split": a.split, "models": paths, "task": task.to_string(), "averaging": averaging, "out": a.out}),
    );
    let ds = read_split(&a.split)?;
    let test = ds.partition(Partition::Test);
    let rows = models
        .iter()
        .map(|m| Ok(ReportRow::from_metrics(m.spec.kind.display_name(), &evaluate_model(m, &test, averaging.clone())?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = format_table(&rows);
    print!("{table}");
    if let Some(out) = &a.out {
        let is_csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let body = if is_csv { format_csv(&rows) } else { table };
        write_file(out, body.as_bytes())?;
    }
    Ok(())
}
