//! Pipeline commands behind the `hetero-forecast` binary: synthetic data
//! generation, grid training, selective-prediction evaluation and k-means
//! exploration. Each command is a plain function so it can be driven
//! in-process from tests.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hetero_forecast::data::{
    generate_synthetic_with, kmeans_with, load_series_csv, pi1_normalize, save_series_csv, Dataset, RawSeries, SplitTag,
};
use hetero_forecast::eval::{
    error_keep_curve_with, error_score_correlation, mae_at_keep, write_curve_csv, write_scatter_csv,
};
use hetero_forecast::models::{
    baseline_records, build, model_outputs, records_with_score, train, BaselineKind, Checkpoint, History, McConfig,
    ModelSpec, ScoreKind, TrainConfig,
};
use hetero_forecast::stats::{mean, sample_std};
use hetero_forecast::ExecMode;
use serde::{Deserialize, Serialize};

pub use config::{Profile, RunConfig};

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "HETERO_FORECAST_OUT";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(path: &Path, theta: f64, split: SplitTag, mode: ExecMode) -> anyhow::Result<Dataset> {
    if !path.is_file() {
        bail!("data file {} does not exist", path.display());
    }
    let series = load_series_csv(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Dataset::from_series_with(series, theta, split, mode)?)
}

// ---------------------------------------------------------------- generate

/// Writes the configured synthetic dataset to `out`. `seed` overrides the
/// generator seed from the config. Returns the number of series written.
pub fn cmd_generate(config: &RunConfig, seed: Option<u64>, out: &Path, mode: ExecMode) -> anyhow::Result<usize> {
    let seed = seed.unwrap_or(config.generator.seed);
    let series: Vec<RawSeries> = generate_synthetic_with(&config.generator, seed, mode)?
        .into_iter()
        .map(|s| s.series)
        .collect();
    ensure_parent(out)?;
    save_series_csv(out, &series).with_context(|| format!("writing {}", out.display()))?;
    Ok(series.len())
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Replaces the config's seed list when set.
    pub seeds: Option<Vec<u64>>,
    /// Forces the desk profile regardless of the config.
    pub desk: bool,
    /// Concurrent (model, seed) jobs. With one job the data-parallel core is used instead.
    pub jobs: usize,
    pub exec: ExecMode,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            seeds: None,
            desk: false,
            jobs: 1,
            exec: ExecMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: String,
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

pub fn checkpoint_file_name(model: &str, seed: u64) -> String {
    format!("{model}_seed{seed}.json")
}

fn history_file_name(model: &str, seed: u64) -> String {
    format!("{model}_seed{seed}.history.json")
}

fn train_one(
    spec: &ModelSpec,
    seed: u64,
    data: &Dataset,
    base: &TrainConfig,
    exec: ExecMode,
    out_dir: &Path,
) -> anyhow::Result<TrainedModel> {
    let name = spec.name();
    let tc = TrainConfig {
        seed,
        exec,
        ..base.clone()
    };
    let model = build(spec, data.input_dim(), seed)?;
    let outcome = train(model, data, &tc).with_context(|| format!("training {name} seed {seed}"))?;
    let ckpt_path = out_dir.join(checkpoint_file_name(&name, seed));
    let hist_path = out_dir.join(history_file_name(&name, seed));
    Checkpoint::from_model(&outcome.model, &tc).save(&ckpt_path)?;
    write_json(&hist_path, &outcome.history)?;
    let h: &History = &outcome.history;
    Ok(TrainedModel {
        model: name,
        seed,
        checkpoint: ckpt_path,
        history: hist_path,
        epochs: h.epochs.len(),
        best_epoch: h.best_epoch,
        best_val_loss: h.best_val_loss,
    })
}

/// Trains every (model, seed) pair of the grid and writes one checkpoint and
/// one history file per pair into `out_dir`.
pub fn cmd_train(
    config: &RunConfig,
    data_path: &Path,
    out_dir: &Path,
    opts: &TrainOptions,
) -> anyhow::Result<Vec<TrainedModel>> {
    let data = load_dataset(data_path, config.theta, SplitTag::Train, opts.exec)?;
    let mut grid = config.grid.clone();
    if opts.desk {
        grid.profile = Profile::Desk;
    }
    let seeds = opts.seeds.clone().unwrap_or_else(|| config.seeds.clone());
    if seeds.is_empty() {
        bail!("seeds list must not be empty");
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let jobs: Vec<(ModelSpec, u64)> = grid
        .specs()
        .into_iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (s.clone(), seed)))
        .collect();
    run_jobs(&jobs, opts, |(spec, seed), exec| {
        let r = train_one(spec, *seed, &data, &config.train, exec, out_dir)?;
        eprintln!(
            "trained {} seed {}: {} epochs, best val loss {:.4} at epoch {}",
            r.model, r.seed, r.epochs, r.best_val_loss, r.best_epoch
        );
        Ok(r)
    })
}

/// Runs jobs either one at a time with the data-parallel core, or several at
/// once with each job single-threaded. Results keep job order either way.
#[cfg(feature = "parallel")]
fn run_jobs<J: Sync, R: Send>(
    jobs: &[J],
    opts: &TrainOptions,
    f: impl Fn(&J, ExecMode) -> anyhow::Result<R> + Sync,
) -> anyhow::Result<Vec<R>> {
    use rayon::prelude::*;
    if opts.jobs <= 1 || !opts.exec.is_parallel() {
        return jobs.iter().map(|j| f(j, opts.exec)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build()?;
    pool.install(|| jobs.par_iter().map(|j| f(j, ExecMode::Sequential)).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<J: Sync, R: Send>(
    jobs: &[J],
    opts: &TrainOptions,
    f: impl Fn(&J, ExecMode) -> anyhow::Result<R> + Sync,
) -> anyhow::Result<Vec<R>> {
    jobs.iter().map(|j| f(j, opts.exec)).collect()
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaeSummary {
    pub mean: f64,
    /// Sample standard deviation over seeds; 0 for a single run.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub model: String,
    pub score: String,
    pub seeds: Vec<u64>,
    /// Keyed by keep fraction, e.g. `"0.25"`.
    pub mae: BTreeMap<String, MaeSummary>,
    /// Spearman correlation between |error| and score, averaged over seeds.
    pub spearman: Option<f64>,
    /// Per-seed MAE, parallel to `seeds`, keyed like `mae`.
    pub per_seed: Vec<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub keep_grid: Vec<f64>,
    pub n_records: usize,
    /// Keyed by `"<model> + <score>"`.
    pub rows: BTreeMap<String, MatrixRow>,
}

impl ComparisonMatrix {
    pub fn get(&self, model: &str, score: &str) -> Option<&MatrixRow> {
        self.rows.get(&row_key(model, score))
    }
}

pub fn row_key(model: &str, score: &str) -> String {
    format!("{model} + {score}")
}

pub fn keep_label(k: f64) -> String {
    format!("{k}")
}

struct Run {
    seed: u64,
    maes: Vec<f64>,
    spearman: Option<f64>,
}

fn summarize(model: &str, score: &str, keep_grid: &[f64], runs: &[Run]) -> MatrixRow {
    let mut mae = BTreeMap::new();
    for (j, &k) in keep_grid.iter().enumerate() {
        let vals: Vec<f64> = runs.iter().map(|r| r.maes[j]).collect();
        mae.insert(
            keep_label(k),
            MaeSummary {
                mean: mean(&vals),
                std: sample_std(&vals),
            },
        );
    }
    let rhos: Vec<f64> = runs.iter().filter_map(|r| r.spearman).collect();
    let per_seed = runs
        .iter()
        .map(|r| {
            keep_grid
                .iter()
                .zip(&r.maes)
                .map(|(&k, &m)| (keep_label(k), m))
                .collect()
        })
        .collect();
    MatrixRow {
        model: model.to_string(),
        score: score.to_string(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        mae,
        spearman: (!rhos.is_empty()).then(|| mean(&rhos)),
        per_seed,
    }
}

fn write_csv_file(
    path: &Path,
    f: impl FnOnce(BufWriter<fs::File>) -> hetero_forecast::Result<()>,
) -> anyhow::Result<()> {
    ensure_parent(path)?;
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

/// Checkpoint files directly under `dir`, sorted by name.
pub fn list_checkpoints(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("checkpoint directory {} does not exist", dir.display());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".history.json") && name.contains("_seed")
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Scores every checkpoint in `checkpoints_dir` on the test set and writes
/// `matrix.json`, one curve CSV per (model, score, seed) under `curves/` and
/// one |error| vs score scatter CSV per heteroscedastic checkpoint under `scatter/`.
pub fn cmd_evaluate(
    config: &RunConfig,
    checkpoints_dir: &Path,
    test_path: &Path,
    out_dir: &Path,
    exec: ExecMode,
) -> anyhow::Result<ComparisonMatrix> {
    let data = load_dataset(test_path, config.theta, SplitTag::Test, exec)?;
    let ckpts = list_checkpoints(checkpoints_dir)?;
    if ckpts.is_empty() {
        bail!("no checkpoints found in {}", checkpoints_dir.display());
    }
    let grid = &config.eval.keep_grid;
    let mc = McConfig {
        n_samples: config.eval.mc_samples,
        seed: config.eval.mc_seed,
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut groups: BTreeMap<(String, String), Vec<Run>> = BTreeMap::new();
    for path in &ckpts {
        let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
        let model = ckpt.to_model()?;
        if model.input_dim() != data.input_dim() {
            bail!(
                "{} expects {} inputs but the test data has {}",
                path.display(),
                model.input_dim(),
                data.input_dim()
            );
        }
        let name = model.name();
        let seed = ckpt.training_config.seed;
        let outputs = model_outputs(&model, &data, mc, exec)?;
        for &score in ScoreKind::available_for(model.spec().uncertainty) {
            let records = records_with_score(&outputs, &data, score)?;
            let maes = grid
                .iter()
                .map(|&k| mae_at_keep(&records, k))
                .collect::<hetero_forecast::Result<Vec<_>>>()?;
            let curve = error_keep_curve_with(&records, config.eval.curve_points, exec)?;
            let curve_path = out_dir
                .join("curves")
                .join(format!("{name}_{}_seed{seed}.csv", score.name()));
            write_csv_file(&curve_path, |w| write_curve_csv(w, &curve))?;
            let corr = error_score_correlation(&records)?;
            if score == ScoreKind::BHet {
                let p = out_dir
                    .join("scatter")
                    .join(format!("{name}_{}_seed{seed}.csv", score.name()));
                write_csv_file(&p, |w| write_scatter_csv(w, &corr.scatter))?;
            }
            groups
                .entry((name.clone(), score.name().to_string()))
                .or_default()
                .push(Run {
                    seed,
                    maes,
                    spearman: corr.spearman_rho,
                });
        }
        eprintln!("evaluated {}", path.display());
    }

    let mut rows = BTreeMap::new();
    for ((model, score), mut runs) in groups {
        runs.sort_by_key(|r| r.seed);
        rows.insert(row_key(&model, &score), summarize(&model, &score, grid, &runs));
    }
    for kind in BaselineKind::ALL {
        let records = baseline_records(kind, &data);
        let maes = grid
            .iter()
            .map(|&k| mae_at_keep(&records, k))
            .collect::<hetero_forecast::Result<Vec<_>>>()?;
        let spearman = error_score_correlation(&records)?.spearman_rho;
        let score = ScoreKind::Var.name();
        let run = Run {
            seed: 0,
            maes,
            spearman,
        };
        let mut row = summarize(kind.name(), score, grid, std::slice::from_ref(&run));
        row.seeds.clear();
        row.per_seed.clear();
        rows.insert(row_key(kind.name(), score), row);
    }
    let matrix = ComparisonMatrix {
        keep_grid: grid.clone(),
        n_records: data.len(),
        rows,
    };
    write_json(&out_dir.join("matrix.json"), &matrix)?;
    Ok(matrix)
}

// ---------------------------------------------------------------- cluster

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub seed: u64,
    pub n_series: usize,
    pub inertia: f64,
    pub iterations: usize,
    pub inertia_history: Vec<f64>,
}

/// k-means over π₁-normalized series. Writes `centroids.csv`, `assignments.csv`
/// and `inertia.json` into `out_dir`.
pub fn cmd_cluster(
    config: &RunConfig,
    data_path: &Path,
    k: usize,
    seed: u64,
    out_dir: &Path,
    exec: ExecMode,
) -> anyhow::Result<ClusterSummary> {
    if !data_path.is_file() {
        bail!("data file {} does not exist", data_path.display());
    }
    let series = load_series_csv(data_path).with_context(|| format!("reading {}", data_path.display()))?;
    let points: Vec<Vec<f64>> = series.iter().map(|s| pi1_normalize(&s.values, config.theta)).collect();
    let result = kmeans_with(&points, k, seed, config.cluster.max_iter, exec)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let t = points.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(out_dir.join("centroids.csv"))?;
    let mut header = vec!["cluster".to_string()];
    header.extend((1..=t).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    for (c, centroid) in result.centroids.iter().enumerate() {
        let mut row = vec![c.to_string()];
        row.extend(centroid.iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("assignments.csv"))?;
    w.write_record(["series", "cluster"])?;
    for (i, a) in result.assignments.iter().enumerate() {
        w.write_record([i.to_string(), a.to_string()])?;
    }
    w.flush()?;

    let summary = ClusterSummary {
        k,
        seed,
        n_series: points.len(),
        inertia: result.inertia,
        iterations: result.iterations,
        inertia_history: result.inertia_history.clone(),
    };
    write_json(&out_dir.join("inertia.json"), &summary)?;
    Ok(summary)
}

/// Flushes a human-readable matrix table, one row per (model, score).
pub fn print_matrix<W: Write>(mut w: W, matrix: &ComparisonMatrix) -> std::io::Result<()> {
    write!(w, "{:<24}", "model + score")?;
    for k in &matrix.keep_grid {
        write!(w, " {:>16}", format!("K={}%", k * 100.0))?;
    }
    writeln!(w)?;
    for (key, row) in &matrix.rows {
        write!(w, "{key:<24}")?;
        for k in &matrix.keep_grid {
            let s = &row.mae[&keep_label(*k)];
            write!(w, " {:>16}", format!("{:.3}±{:.3}", s.mean, s.std))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
