use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hkt::config::{Flag, KeyValues};
use hkt::domain::{
    filter_records, load_qmatrix, parse_logs, read_archive, write_archive, write_logs, write_qmatrix, BuildParams,
    Dataset, DatasetSummary,
};
use hkt::metrics::{rmse_mae, MetricReport};
use hkt::model::{Bound, GroupInput, Model, ModelConfig};
use hkt::numerics::{check_gradients, read_checkpoint, write_checkpoint, GradCheckReport, Tape};
use hkt::synth::{generate, SynthConfig, SynthData};
use hkt::training::{
    augment_group, batch_loss, cross_validate, derive_seed, evaluate, fit, split_validation, CvReport, EpochRecord,
    TrainConfig, TrainError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{EvalArgs, GradcheckArgs, GraphArgs, IngestArgs, TraceArgs, TrainArgs};
use crate::manifest::{fingerprint, unix_now, RunManifest};
use crate::CliError;

pub const DATASET_FILE: &str = "dataset.hkt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const EPOCH_LOG_FILE: &str = "epochs.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Keys read outside the model, training and synthesis configs.
/// `mode` is `split` (one held-out test split) or `cv` (k-fold).
const EXTRA_KEYS: [&str; 4] = ["coverage_threshold", "filter", "mode", "test_fraction"];
const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Resolved configuration and output directory shared by every command.
#[derive(Clone, Debug)]
pub struct Context {
    pub kv: KeyValues,
    pub out: PathBuf,
}

impl Context {
    /// Merges config files in order, then `KEY=VALUE` overrides, then the seed.
    pub fn new(configs: &[PathBuf], overrides: &[String], seed: Option<u64>, out: PathBuf) -> Result<Self, CliError> {
        let mut kv = KeyValues::default();
        for path in configs {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            kv.merge_text(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        for item in overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
            kv.set(k.trim(), v.trim());
        }
        if let Some(seed) = seed {
            kv.set("seed", seed);
        }
        let known = known_keys();
        if let Some(bad) = kv.keys().find(|k| !known.contains(*k)) {
            return Err(CliError::Usage(format!("unknown config key `{bad}`")));
        }
        Ok(Self { kv, out })
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(CliError::io(&self.out))?;
        Ok(self.out.join(name))
    }

    fn model_config(&self) -> Result<ModelConfig, CliError> {
        let mut cfg = ModelConfig::default();
        cfg.apply(&self.kv)?;
        Ok(cfg)
    }

    fn train_config(&self) -> Result<TrainConfig, CliError> {
        let mut cfg = TrainConfig::default();
        cfg.apply(&self.kv)?;
        Ok(cfg)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        let mut v = default;
        self.kv.read(key, &mut v)?;
        Ok(v)
    }
}

fn known_keys() -> BTreeSet<String> {
    let mut keys: BTreeSet<String> = EXTRA_KEYS.iter().map(|k| k.to_string()).collect();
    keys.extend(ModelConfig::default().to_key_values().keys().map(String::from));
    keys.extend(TrainConfig::default().to_key_values().keys().map(String::from));
    keys.extend(synth_keys().into_iter().map(String::from));
    keys
}

fn synth_keys() -> Vec<&'static str> {
    vec![
        "groups",
        "students_per_group",
        "exercises",
        "concepts",
        "frames",
        "ability_drift",
        "ability_trend",
        "group_coupling",
        "absence_prob",
        "difficulty_min",
        "difficulty_max",
        "shared_per_frame",
        "own_per_frame",
        "span_secs",
        "seed",
    ]
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} not found: {}", path.display())))
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    require_file(path, "dataset")?;
    let file = File::open(path).map_err(CliError::io(path))?;
    read_archive(std::io::BufReader::new(file)).map_err(CliError::domain(path))
}

fn save_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    write_archive(&mut w, data).map_err(CliError::domain(path))?;
    w.flush().map_err(CliError::io(path))
}

pub fn load_model(path: &Path) -> Result<Model, CliError> {
    require_file(path, "checkpoint")?;
    let file = File::open(path).map_err(CliError::io(path))?;
    let ckpt = read_checkpoint(std::io::BufReader::new(file)).map_err(|source| CliError::Checkpoint {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Model::from_checkpoint(ckpt)?)
}

/// The model's embedding tables must cover the dataset catalog.
fn check_dimensions(model: &Model, data: &Dataset) -> Result<(), CliError> {
    let checks = [
        ("emb.exercise", model.num_exercises(), data.qmatrix.num_exercises(), "exercises"),
        ("emb.concept", model.num_concepts(), data.qmatrix.num_concepts(), "concepts"),
    ];
    for (tensor, rows, wanted, what) in checks {
        if rows != wanted {
            return Err(CliError::Failed(format!(
                "tensor `{tensor}` has {rows} rows but the dataset has {wanted} {what}"
            )));
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn ingest(ctx: &Context, args: &IngestArgs) -> Result<(Dataset, DatasetSummary), CliError> {
    require_file(&args.logs, "log file")?;
    require_file(&args.qmatrix, "q-matrix")?;
    let defaults = BuildParams::default();
    let params = BuildParams {
        span_secs: match args.span {
            Some(s) => s,
            None => ctx.parsed("span_secs", defaults.span_secs)?,
        },
        coverage_threshold: match args.coverage {
            Some(c) => c,
            None => ctx.parsed("coverage_threshold", defaults.coverage_threshold)?,
        },
    };
    let filter = !args.no_filter && ctx.parsed("filter", Flag(true))?.0;
    let qmatrix = load_qmatrix(&args.qmatrix).map_err(CliError::domain(&args.qmatrix))?;
    let mut records = parse_logs(&args.logs).map_err(CliError::domain(&args.logs))?;
    if filter {
        let before = records.len();
        records = filter_records(records);
        log::info!("filters kept {} of {before} records", records.len());
    }
    let data = Dataset::build(&records, &qmatrix, params).map_err(CliError::domain(&args.logs))?;
    save_dataset(&ctx.out_file(DATASET_FILE)?, &data)?;
    let summary = DatasetSummary::of(&data);
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write_text(&ctx.out_file("summary.json")?, &(json + "\n"))?;
    println!("{summary}");
    Ok((data, summary))
}

pub fn synth(ctx: &Context) -> Result<SynthData, CliError> {
    let mut cfg = SynthConfig::default();
    cfg.apply(&ctx.kv)?;
    let data = generate(&cfg)?;
    save_dataset(&ctx.out_file(DATASET_FILE)?, &data.dataset)?;

    let logs = ctx.out_file("logs.csv")?;
    let mut buf = Vec::new();
    write_logs(&mut buf, &data.records).map_err(CliError::io(&logs))?;
    fs::write(&logs, buf).map_err(CliError::io(&logs))?;
    let qpath = ctx.out_file("qmatrix.csv")?;
    let mut buf = Vec::new();
    write_qmatrix(&mut buf, &data.qmatrix).map_err(CliError::io(&qpath))?;
    fs::write(&qpath, buf).map_err(CliError::io(&qpath))?;
    let truth = serde_json::json!({ "config": cfg, "truth": data.truth });
    write_text(&ctx.out_file("truth.json")?, &(truth.to_string() + "\n"))?;
    println!("{}", DatasetSummary::of(&data.dataset));
    Ok(data)
}

/// What a training run produced, for in-process callers.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub manifest: RunManifest,
    /// Held-out scores of a single-split run.
    pub metrics: Option<MetricReport>,
    /// RMSE of predicting the mean training correct rate for every held-out
    /// group interaction.
    pub constant_rmse: Option<f64>,
    pub cv: Option<CvReport>,
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("HKT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("HKT_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn variant_name(model: &ModelConfig, train: &TrainConfig) -> String {
    let off: Vec<&str> = [
        (!model.ablation.reciprocal, "no-reciprocal"),
        (!model.ablation.dyngraph, "no-dyngraph"),
        (!model.ablation.attention_agg, "no-attention-agg"),
        (!train.contrastive, "no-contrastive"),
    ]
    .into_iter()
    .filter_map(|(disabled, name)| disabled.then_some(name))
    .collect();
    if off.is_empty() {
        "full".into()
    } else {
        off.join("+")
    }
}

fn epoch_line(fold: Option<usize>, record: &EpochRecord) -> String {
    let mut value = serde_json::to_value(record).expect("record serialises");
    if let (Some(fold), Some(map)) = (fold, value.as_object_mut()) {
        map.insert("fold".into(), fold.into());
    }
    value.to_string()
}

/// Group correct rates outside each group's first frame.
fn scored_group_rates(inputs: &[GroupInput]) -> Vec<f64> {
    let mut out = Vec::new();
    for input in inputs {
        for (i, &t) in input.group.frame.iter().enumerate() {
            if t >= 1 {
                out.push(input.group.outcome[i]);
            }
        }
    }
    out
}

pub fn train(ctx: &Context, args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let started = unix_now();
    let (ctx, dataset_path) = match &args.replay {
        Some(path) => {
            let manifest = RunManifest::load(path)?;
            let mut kv = KeyValues::default();
            for (k, v) in &manifest.config {
                kv.set(k, v);
            }
            let dataset = args.dataset.clone().unwrap_or_else(|| PathBuf::from(&manifest.dataset));
            require_file(&dataset, "dataset")?;
            let found = fingerprint(&dataset)?;
            if found != manifest.dataset_sha256 {
                return Err(CliError::Failed(format!(
                    "dataset {} has fingerprint {found}, manifest expects {}",
                    dataset.display(),
                    manifest.dataset_sha256
                )));
            }
            (Context { kv, out: ctx.out.clone() }, dataset)
        }
        None => (ctx.clone(), args.dataset.clone().expect("clap requires --dataset")),
    };
    let data = load_dataset(&dataset_path)?;
    let digest = fingerprint(&dataset_path)?;

    let mut model_cfg = ctx.model_config()?;
    let mut train_cfg = ctx.train_config()?;
    model_cfg.ablation.reciprocal &= !args.no_reciprocal;
    model_cfg.ablation.dyngraph &= !args.no_dyngraph;
    model_cfg.ablation.attention_agg &= !args.no_attention_agg;
    train_cfg.contrastive &= !args.no_contrastive;
    if let Some(e) = args.epochs {
        train_cfg.epochs = e;
    }
    if let Some(k) = args.folds {
        train_cfg.folds = k;
    }
    train_cfg.validate()?;
    let test_fraction: f64 = ctx.parsed("test_fraction", DEFAULT_TEST_FRACTION)?;
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(CliError::Usage(format!("test_fraction must lie in [0, 1), got {test_fraction}")));
    }
    let cross = match ctx.kv.get("mode") {
        _ if args.folds.is_some() => true,
        None | Some("split") => false,
        Some("cv") => true,
        Some(other) => return Err(CliError::Usage(format!("mode must be `split` or `cv`, got `{other}`"))),
    };
    let variant = variant_name(&model_cfg, &train_cfg);
    log::info!("training variant {variant}");

    let mut config = model_cfg.to_key_values();
    for (k, v) in train_cfg.to_key_values().iter() {
        config.set(k, v);
    }
    config.set("test_fraction", test_fraction);
    config.set("mode", if cross { "cv" } else { "split" });

    let metrics_path = ctx.out_file(METRICS_FILE)?;
    let log_path = ctx.out_file(EPOCH_LOG_FILE)?;
    let mut log_text = String::new();
    let mut summary = TrainSummary {
        manifest: RunManifest {
            version: env!("CARGO_PKG_VERSION").into(),
            seed: train_cfg.seed,
            variant,
            config: config.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            dataset: dataset_path.display().to_string(),
            dataset_sha256: digest.clone(),
            checkpoint: None,
            metric_report: metrics_path.display().to_string(),
            epoch_log: log_path.display().to_string(),
            started_unix: started,
            finished_unix: 0,
        },
        metrics: None,
        constant_rmse: None,
        cv: None,
    };

    if cross {
        let report = cross_validate(&data, &model_cfg, &train_cfg, threads()?, |fold, r| {
            log::info!("fold {fold} epoch {}: loss {:.4}", r.epoch, r.total)
        })?;
        for f in &report.folds {
            for r in &f.history.history {
                writeln!(log_text, "{}", epoch_line(Some(f.fold), r)).expect("string write");
            }
        }
        write_text(&metrics_path, &report.to_csv())?;
        println!("{}", report.to_csv().trim_end());
        summary.cv = Some(report);
    } else {
        let n = data.sequences.groups.len();
        let (train_groups, test_groups) = split_validation(n, test_fraction, derive_seed(train_cfg.seed, u64::MAX));
        if train_groups == test_groups {
            log::warn!("too few groups for a test split; scoring on the training groups");
        }
        let train_data = data.subset(&train_groups);
        let test_inputs = Model::inputs(&data.subset(&test_groups))?;
        let outcome = match fit(&train_data, &model_cfg, &train_cfg, |r| {
            writeln!(log_text, "{}", epoch_line(None, r)).expect("string write");
        }) {
            Ok(o) => o,
            Err(TrainError::Diverged { epoch, reason, last_good }) => {
                let path = ctx.out_file("last_good.ckpt")?;
                save_checkpoint(&path, &last_good, &[])?;
                return Err(CliError::Failed(format!(
                    "training diverged in epoch {epoch} ({reason}); last good parameters saved to {}",
                    path.display()
                )));
            }
            Err(e) => return Err(e.into()),
        };
        let (metrics, _) = evaluate(&outcome.model, &test_inputs)?;
        let train_rates = scored_group_rates(&Model::inputs(&train_data)?);
        let test_rates = scored_group_rates(&test_inputs);
        if !train_rates.is_empty() && !test_rates.is_empty() {
            let mean = train_rates.iter().sum::<f64>() / train_rates.len() as f64;
            let constant = vec![mean; test_rates.len()];
            summary.constant_rmse = Some(rmse_mae(&constant, &test_rates)?.0);
        }
        let ckpt_path = ctx.out_file(CHECKPOINT_FILE)?;
        let extra = vec![
            ("seed".to_string(), train_cfg.seed.to_string()),
            ("best_epoch".to_string(), outcome.best_epoch.to_string()),
            ("dataset_sha256".to_string(), digest),
        ];
        save_checkpoint(&ckpt_path, &outcome.model, &extra)?;
        write_text(&metrics_path, &format!("{}\n{}\n", MetricReport::CSV_HEADER, metrics.csv_row()))?;
        println!("{metrics}");
        if let Some(c) = summary.constant_rmse {
            println!("constant-mean group RMSE {c:.4}");
        }
        summary.manifest.checkpoint = Some(ckpt_path.display().to_string());
        summary.metrics = Some(metrics);
    }
    write_text(&log_path, &log_text)?;
    summary.manifest.finished_unix = unix_now();
    summary.manifest.save(&ctx.out_file(MANIFEST_FILE)?)?;
    Ok(summary)
}

fn save_checkpoint(path: &Path, model: &Model, extra: &[(String, String)]) -> Result<(), CliError> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, &model.to_checkpoint(extra)).map_err(|source| CliError::Checkpoint {
        path: path.display().to_string(),
        source,
    })?;
    w.flush().map_err(CliError::io(path))
}

pub fn eval(ctx: &Context, args: &EvalArgs) -> Result<MetricReport, CliError> {
    let model = load_model(&args.checkpoint)?;
    let data = load_dataset(&args.dataset)?;
    check_dimensions(&model, &data)?;
    let groups: Vec<usize> = match &args.groups {
        None => (0..data.sequences.groups.len()).collect(),
        Some(labels) => labels
            .iter()
            .filter(|l| !l.is_empty())
            .map(|l| {
                data.catalog
                    .group_id(l)
                    .ok_or_else(|| CliError::Failed(format!("unknown group `{l}`")))
            })
            .collect::<Result<_, _>>()?,
    };
    if groups.is_empty() {
        return Err(CliError::Failed("evaluation split is empty".into()));
    }
    let inputs = Model::inputs(&data.subset(&groups))?;
    let (report, _) = evaluate(&model, &inputs)?;
    let text = format!("{}\n{}\n", MetricReport::CSV_HEADER, report.csv_row());
    write_text(&ctx.out_file("eval.csv")?, &text)?;
    print!("{text}");
    Ok(report)
}

/// One traced value: frame, concept label, student mastery, group mastery.
pub type TraceRow = (usize, String, f64, f64);

pub fn trace(ctx: &Context, args: &TraceArgs) -> Result<Vec<TraceRow>, CliError> {
    let model = load_model(&args.checkpoint)?;
    let data = load_dataset(&args.dataset)?;
    check_dimensions(&model, &data)?;
    let student = data
        .catalog
        .student_id(&args.student)
        .ok_or_else(|| CliError::Failed(format!("unknown student `{}`", args.student)))?;
    let group = data.catalog.group_of(student).expect("every student has a group");
    let slot = data.catalog.membership[group]
        .iter()
        .position(|&s| s == student)
        .expect("member of own group");
    let concepts: Vec<usize> = if args.concepts.is_empty() {
        (0..data.qmatrix.num_concepts())
            .filter(|&c| !data.qmatrix.exercises_of(c).is_empty())
            .collect()
    } else {
        args.concepts
            .iter()
            .map(|c| {
                data.qmatrix
                    .concepts
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| CliError::Failed(format!("unknown concept `{c}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let input = &Model::inputs(&data)?[group];
    let own = model.trace(input, slot + 1, &data.qmatrix, &concepts)?;
    let shared = model.trace(input, 0, &data.qmatrix, &concepts)?;

    let mut rows = Vec::new();
    let mut text = String::from("frame,concept,individual,group\n");
    for t in 0..input.frames {
        for (i, &c) in concepts.iter().enumerate() {
            let label = data.qmatrix.concepts[c].clone();
            writeln!(text, "{t},{label},{},{}", own[i][t], shared[i][t]).expect("string write");
            rows.push((t, label, own[i][t], shared[i][t]));
        }
    }
    let path = ctx.out_file("trace.csv")?;
    write_text(&path, &text)?;
    log::info!("wrote {} rows to {}", rows.len(), path.display());
    Ok(rows)
}

/// One exported edge. Student-student rows carry the pair's similarity;
/// group-student rows carry the adjacency entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRow {
    pub frame: usize,
    pub src: String,
    pub dst: String,
    pub weight: f64,
    pub selected: bool,
}

/// Edges plus the member node features (`features[t][slot]`) they came from.
pub fn graph(ctx: &Context, args: &GraphArgs) -> Result<(Vec<EdgeRow>, Vec<Vec<Vec<f64>>>), CliError> {
    let model = load_model(&args.checkpoint)?;
    let data = load_dataset(&args.dataset)?;
    check_dimensions(&model, &data)?;
    let group = data
        .catalog
        .group_id(&args.group)
        .ok_or_else(|| CliError::Failed(format!("unknown group `{}`", args.group)))?;
    let members: Vec<&str> = data.catalog.membership[group]
        .iter()
        .map(|&s| data.catalog.students[s].as_str())
        .collect();
    let input = &Model::inputs(&data)?[group];
    let mut tape = Tape::new();
    let p = model.bind(&mut tape);
    let out = model.forward(&mut tape, &p, input)?;

    let mut edges = Vec::new();
    let mut features = Vec::new();
    let mut edge_text = String::from("frame,src,dst,weight,selected\n");
    let mut feature_text = String::from("frame,node,features\n");
    for (t, snap) in out.snapshots.iter().enumerate() {
        let n = members.len();
        for i in 0..n {
            for j in i + 1..n {
                let chosen = snap.selected.contains(&(i, j)) || snap.selected.contains(&(j, i));
                edges.push(EdgeRow {
                    frame: t,
                    src: members[i].into(),
                    dst: members[j].into(),
                    weight: snap.relation.get(i, j),
                    selected: chosen,
                });
            }
        }
        for (i, m) in members.iter().enumerate() {
            let w = snap.adjacency.get(0, i + 1);
            edges.push(EdgeRow {
                frame: t,
                src: args.group.clone(),
                dst: m.to_string(),
                weight: w,
                selected: w > 0.0,
            });
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| snap.features.row(i).to_vec()).collect();
        for (i, row) in rows.iter().enumerate() {
            let joined: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(feature_text, "{t},{},{}", members[i], joined.join(" ")).expect("string write");
        }
        features.push(rows);
    }
    for e in &edges {
        writeln!(
            edge_text,
            "{},{},{},{},{}",
            e.frame,
            e.src,
            e.dst,
            e.weight,
            u8::from(e.selected)
        )
        .expect("string write");
    }
    write_text(&ctx.out_file("graph.csv")?, &edge_text)?;
    write_text(&ctx.out_file("graph_features.csv")?, &feature_text)?;
    Ok((edges, features))
}

/// Finite-difference check of the full objective (both prediction losses
/// and the contrastive term) on a small synthetic group.
pub fn gradcheck(ctx: &Context, args: &GradcheckArgs) -> Result<GradCheckReport, CliError> {
    if args.members < 2 || args.frames < 2 {
        return Err(CliError::Usage("gradcheck needs at least 2 members and 2 frames".into()));
    }
    let seed: u64 = ctx.parsed("seed", 0)?;
    let synth = generate(&SynthConfig {
        groups: 1,
        students_per_group: args.members,
        frames: args.frames,
        exercises: 6,
        concepts: 3,
        shared_per_frame: 1,
        own_per_frame: 1,
        absence_prob: 0.0,
        seed,
        ..SynthConfig::default()
    })?;
    let model_cfg = ModelConfig {
        d: args.d,
        gcn_layers: 2,
        attn_layers: 2,
        ..ModelConfig::default()
    };
    let model = Model::new(model_cfg, 6, 3, seed)?;
    let input = Model::inputs(&synth.dataset)?.remove(0);
    let train_cfg = TrainConfig {
        gamma: 0.5,
        tau: 0.5,
        ..TrainConfig::default()
    };
    let augmented = vec![augment_group(&input, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))];
    let report = check_gradients(model.params.tensors(), args.step, args.floor, |tape, vars| {
        let p = Bound::from_vars(model.ids(), vars.to_vec());
        Ok::<_, TrainError>(batch_loss(tape, &model, &p, &[&input], Some(&augmented), &train_cfg)?.0)
    })?;
    let worst = report
        .worst
        .map(|(param, elem)| format!(" at {}[{elem}]", model.params.iter().nth(param).map_or("?", |(n, _)| n)))
        .unwrap_or_default();
    println!(
        "checked {} gradients; max relative error {:.3e}{worst}; max absolute error {:.3e}",
        report.checked, report.max_rel_error, report.max_abs_error
    );
    if !report.passes(args.tolerance) {
        return Err(CliError::Failed(format!(
            "max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_error, args.tolerance
        )));
    }
    Ok(report)
}
