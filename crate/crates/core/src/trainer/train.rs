use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{metrics, task_loss, Model, TrainConfig};
use crate::contrastive::{make_negatives, nc_loss, total_loss, DEFAULT_PERMUTED_NEGATIVES, DEFAULT_SINKHORN_NEGATIVES};
use crate::error::{Error, Result};
use crate::gradcore::Adam;
use crate::graphdata::{batches, split, standardize_labels, Dataset, MolecularGraph, SplitSpec, Task};
use crate::otcore::marginal_l1_violation;
use crate::{rng, Real, Tape, Tensor};

const DROPOUT_TAG: u64 = 0xd409;
const NEGATIVE_TAG: u64 = 0x4e6;

/// Exact plans must meet the marginals to this L1 tolerance.
pub const EXACT_PLAN_TOLERANCE: Real = 1e-6;
/// Sinkhorn negatives are projected to this L1 tolerance.
pub const SINKHORN_PLAN_TOLERANCE: Real = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Task loss of the end-of-epoch parameters over the whole training set,
    /// without dropout, on standardized labels.
    pub train_loss: Real,
    pub valid_metric: Real,
    /// Graph-weighted mean contrastive term over the epoch's batches; `None` when unused.
    pub nc_term: Option<Real>,
}

/// Feasibility record of every transport plan touched during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanAudit {
    pub exact_plans: usize,
    pub max_exact_violation: Real,
    pub sinkhorn_plans: usize,
    pub max_sinkhorn_violation: Real,
    pub permuted_plans: usize,
    pub max_permuted_violation: Real,
}

impl PlanAudit {
    pub fn all_feasible(&self) -> bool {
        self.max_exact_violation <= EXACT_PLAN_TOLERANCE
            && self.max_permuted_violation <= EXACT_PLAN_TOLERANCE
            && self.max_sinkhorn_violation <= SINKHORN_PLAN_TOLERANCE
    }
}

fn record(count: &mut usize, worst: &mut Real, plan: &crate::Tensor, tol: Real) {
    let v = marginal_l1_violation(plan);
    debug_assert!(v <= tol, "plan violates marginals by {v} (tolerance {tol})");
    *count += 1;
    *worst = worst.max(v);
}

pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid: Real,
    pub audit: PlanAudit,
}

pub fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Regression => "rmse",
        Task::Classification => "roc_auc",
    }
}

fn labels_of(ds: &Dataset, what: &str) -> Result<Vec<Real>> {
    ds.graphs
        .iter()
        .map(|g| {
            g.label
                .ok_or_else(|| Error::Config(format!("{what} graph '{}' has no label", g.id)))
        })
        .collect()
}

/// Task metric of `model` on `ds`, computed on the raw label scale.
pub fn task_metric(model: &Model, ds: &Dataset) -> Result<Real> {
    let labels = labels_of(ds, "evaluation")?;
    let pred = model.predict(ds)?;
    match model.task {
        Task::Regression => metrics::rmse(&pred, &labels),
        Task::Classification => metrics::roc_auc(&pred, &labels),
    }
}

fn dataset_loss(model: &Model, ds: &Dataset, targets: &[Real]) -> Result<Real> {
    let logits = model.logits(ds)?;
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_vec(logits.len(), 1, logits)?);
    let loss = task_loss(&mut tape, x, targets, model.task)?;
    Ok(tape.value(loss).item().unwrap_or(Real::NAN))
}

fn improves(task: Task, candidate: Real, best: Option<Real>) -> bool {
    match best {
        None => true,
        Some(b) => match task {
            Task::Regression => candidate < b,
            Task::Classification => candidate > b,
        },
    }
}

/// Trains one model with early stopping on the validation metric.
pub fn train(config: &TrainConfig, train_set: &Dataset, valid: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || valid.is_empty() {
        return Err(Error::Config("training and validation sets must be nonempty".into()));
    }
    if train_set.task != valid.task {
        return Err(Error::Config("training and validation tasks differ".into()));
    }
    let task = train_set.task;
    labels_of(valid, "validation")?;
    let mut scaled = train_set.clone();
    let stats = standardize_labels(&mut scaled, &mut [])?;
    let targets = labels_of(&scaled, "training")?;

    let node_width = train_set.node_width().unwrap_or(0);
    if valid.node_width() != Some(node_width) {
        return Err(Error::Schema("training and validation node widths differ".into()));
    }
    let edge_width = train_set.edge_width().or(valid.edge_width()).unwrap_or(0);
    let mut model = Model::new(config.clone(), task, node_width, edge_width, stats)?;
    model.fit_input_norm(&scaled)?;
    let mut adam = Adam::new(&model.store, vec![config.lr, config.lr_pc]);
    let cost = config.head.cost();
    let contrastive = config.uses_contrastive();

    let mut history = Vec::new();
    let mut audit = PlanAudit::default();
    let mut best: Option<(Real, usize, crate::gradcore::ParamStore<Real>)> = None;
    let mut since_best = 0;

    for epoch in 0..config.n_epochs {
        let order = batches(scaled.len(), config.batch_size, config.seed, epoch as u64);
        let mut nc_sum = 0.0;
        for (b, idx) in order.iter().enumerate() {
            let graphs: Vec<&MolecularGraph> = idx.iter().map(|&i| &scaled.graphs[i]).collect();
            let ys: Vec<Real> = idx.iter().map(|&i| targets[i]).collect();
            let mut tape = Tape::new();
            let mut drop_rng = rng::stream(config.seed, &[DROPOUT_TAG, epoch as u64, b as u64]);
            let out = model.forward(&mut tape, &graphs, true, &mut drop_rng)?;
            for plan in out.plans.iter().flatten() {
                record(&mut audit.exact_plans, &mut audit.max_exact_violation, plan.matrix(), EXACT_PLAN_TOLERANCE);
            }
            let task_node = task_loss(&mut tape, out.prediction, &ys, task)?;

            let nc_node = if contrastive {
                let cost = cost.expect("contrastive heads have a cost");
                let mut per_graph = Vec::with_capacity(graphs.len());
                for (g, plans) in out.plans.iter().enumerate() {
                    let mut neg_rng = rng::stream(config.seed, &[NEGATIVE_TAG, epoch as u64, b as u64, g as u64]);
                    let mut sets = Vec::with_capacity(plans.len());
                    for plan in plans {
                        let set = make_negatives(
                            plan.matrix(),
                            DEFAULT_SINKHORN_NEGATIVES,
                            DEFAULT_PERMUTED_NEGATIVES,
                            &mut neg_rng,
                        )?;
                        for s in &set.sinkhorn {
                            record(&mut audit.sinkhorn_plans, &mut audit.max_sinkhorn_violation, s, SINKHORN_PLAN_TOLERANCE);
                        }
                        for p in &set.permuted {
                            record(&mut audit.permuted_plans, &mut audit.max_permuted_violation, p, EXACT_PLAN_TOLERANCE);
                        }
                        sets.push(set);
                    }
                    per_graph.push(nc_loss(&mut tape, out.clouds[g], &out.prototypes, plans, &sets, cost)?);
                }
                let row = tape.concat(&per_graph)?;
                Some(tape.mean(row))
            } else {
                None
            };
            let total = total_loss(&mut tape, task_node, nc_node, config.nc_coef)?;

            let value = tape.value(total).item().unwrap_or(Real::NAN);
            if !value.is_finite() {
                return Err(Error::Training(format!("non-finite loss at epoch {epoch}, batch {b}")));
            }
            let share = idx.len() as Real;
            if let Some(nc) = nc_node {
                nc_sum += share * tape.value(nc).item().unwrap_or(Real::NAN);
            }

            let grads = tape.backward(total)?;
            let mut sink = model.store.zeros_like();
            grads.accumulate_into(&tape, &mut sink);
            adam.step(&mut model.store, &sink)
                .map_err(|e| Error::Training(format!("epoch {epoch}, batch {b}: {e}")))?;
        }

        let valid_metric = task_metric(&model, valid)?;
        let n_graphs = scaled.len() as Real;
        history.push(EpochRecord {
            epoch,
            train_loss: dataset_loss(&model, &scaled, &targets)?,
            valid_metric,
            nc_term: contrastive.then_some(nc_sum / n_graphs),
        });
        if improves(task, valid_metric, best.as_ref().map(|b| b.0)) {
            best = Some((valid_metric, epoch, model.store.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > config.patience {
                break;
            }
        }
    }

    let (best_valid, best_epoch, store) = best.expect("at least one epoch ran");
    model.store = store;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_valid,
        audit,
    })
}

/// The stable `metrics.json` document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSummary {
    pub task: Task,
    pub metric_name: String,
    pub value: Real,
    pub n_test: usize,
    pub config_digest: String,
}

/// Test-set report of a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub summary: MetricsSummary,
    /// Embedding-distance against label-gap correlation; `None` when undefined
    /// (fewer than two graphs or a constant distance or label gap).
    pub correlation: Option<metrics::Correlation>,
}

pub fn evaluate(model: &Model, test: &Dataset) -> Result<MetricsReport> {
    if test.task != model.task {
        return Err(Error::Usage(format!(
            "dataset task {} does not match checkpoint task {}",
            test.task, model.task
        )));
    }
    if test.is_empty() {
        return Err(Error::Metric("cannot evaluate on an empty dataset".into()));
    }
    let summary = MetricsSummary {
        task: model.task,
        metric_name: metric_name(model.task).to_string(),
        value: task_metric(model, test)?,
        n_test: test.len(),
        config_digest: model.config.digest(),
    };
    let correlation = match embedding_correlation(model, test) {
        Ok(c) => Some(c),
        Err(Error::Metric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport { summary, correlation })
}

/// Spearman and Pearson correlation of representation distances against label gaps.
pub fn embedding_correlation(model: &Model, ds: &Dataset) -> Result<metrics::Correlation> {
    let labels = labels_of(ds, "analysis")?;
    metrics::correlation_analysis(&model.represent(ds)?, &labels)
}

/// Everything one `train` invocation produces.
pub struct RunResult {
    pub outcome: TrainOutcome,
    pub test: Dataset,
    pub metrics: MetricsReport,
}

/// Splits `data`, trains, evaluates on the test split, and optionally writes
/// `checkpoint.json`, `history.jsonl` and `metrics.json` into `out_dir`.
pub fn run(config: &TrainConfig, data: &Dataset, split_spec: &SplitSpec, out_dir: Option<&Path>) -> Result<RunResult> {
    let (tr, va, te) = split(data, split_spec)?;
    let outcome = train(config, &tr, &va)?;
    let metrics = evaluate(&outcome.model, &te)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        outcome.model.save(dir.join("checkpoint.json"), Some(outcome.best_epoch))?;
        write_history(dir.join("history.jsonl"), &outcome.history)?;
        let path = dir.join("metrics.json");
        fs::write(&path, serde_json::to_string_pretty(&metrics.summary)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(RunResult {
        outcome,
        test: te,
        metrics,
    })
}

pub fn write_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for row in history {
        serde_json::to_writer(&mut out, row)?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}
