use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array2, NdFloat};
use serde_json::{json, Value};

use crate::data::{
    dirichlet_energy, gen_synthetic, load_dataset, make_split, matrix_to_csv, min_pairwise_distance,
    save_dataset, Dataset, SplitSpec,
};
use crate::diffusion::{
    active_step, diffuse_global_dense, diffuse_global_neumann, diffuse_local, neumann_error_bound,
    passive_operator, passive_step, source_term, DiffusionParams,
};
use crate::energy::{energy_gradient, energy_minimizer, energy_minimizer_general, params_from_diffusion, EnergyParams};
use crate::error::{Error, Result};
use crate::graph_core::{precompute_operators, BundleOptions, LaplacianMode, OperatorBundle, SolverChoice};
use crate::model::{evaluate, train, Checkpoint, ModelParams, Pipeline, Precision, TrainConfig};

use super::config::{DiffuseMode, EnergyMapping, RunConfig};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.txt";
/// Truncation bounds above this trigger a warning.
pub const NEUMANN_WARN_BOUND: f64 = 1e-6;
pub const RECOVERY_TOLERANCE: f64 = 1e-8;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn json_pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("serializable json") + "\n"
}

/// Creates the output directory and echoes the resolved config into it.
fn prepare_output(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_path();
    fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write(&dir.join(RESOLVED_CONFIG_FILE), &cfg.to_text())?;
    Ok(dir)
}

fn warn_if_loose(bundle: &OperatorBundle, dp: &DiffusionParams) {
    if bundle.solver_choice() == SolverChoice::Neumann {
        let bound = dp.neumann_error_bound();
        if bound > NEUMANN_WARN_BOUND {
            log::warn!(
                "Neumann truncation bound delta^(T+1)/(1-delta) = {bound:.3e} exceeds {NEUMANN_WARN_BOUND:e}; raise neumann_terms"
            );
        }
    }
}

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn frob_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖a − b‖/‖b‖`, or the absolute difference when `b` is zero.
fn relative_gap(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let d = frob_diff(a, b);
    let scale = frob(b);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

fn mean_std(values: &[f64]) -> Value {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    json!({ "mean": mean, "std": var.sqrt(), "values": values })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(crate::data::format_real).unwrap_or_default()
}

fn mask_accuracy<T: NdFloat>(ds: &Dataset, pipe: &Pipeline<'_>, params: &ModelParams<T>, mask: &[bool]) -> Result<Option<f64>> {
    if mask.iter().any(|&m| m) {
        evaluate(ds, pipe, params, mask).map(Some)
    } else {
        Ok(None)
    }
}

struct SeedResult {
    seed: u64,
    best_epoch: usize,
    train: f64,
    valid: Option<f64>,
    test: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn train_one<T: NdFloat>(
    ds: &Dataset,
    pipe: &Pipeline<'_>,
    tc: &TrainConfig,
    dp: &DiffusionParams,
    split: Option<SplitSpec>,
    out: &Path,
) -> Result<SeedResult> {
    let outcome = train::<T>(ds, pipe, tc)?;
    let splits = ds.splits()?;
    let result = SeedResult {
        seed: tc.seed,
        best_epoch: outcome.best_epoch,
        train: evaluate(ds, pipe, &outcome.params, &splits.train)?,
        valid: mask_accuracy(ds, pipe, &outcome.params, &splits.valid)?,
        test: mask_accuracy(ds, pipe, &outcome.params, &splits.test)?,
    };
    Checkpoint::new(&outcome.params, tc, dp, pipe.bundle(), split).save(out.join(format!("checkpoint_seed{}.json", tc.seed)))?;
    let mut history = String::from("epoch,loss,train_acc,valid_acc,test_acc\n");
    for r in &outcome.history {
        history.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            crate::data::format_real(r.loss),
            crate::data::format_real(r.train_acc),
            opt_cell(r.valid_acc),
            opt_cell(r.test_acc)
        ));
    }
    write(&out.join(format!("history_seed{}.csv", tc.seed)), &history)?;
    Ok(result)
}

/// Trains `seeds` models and writes checkpoints, `metrics.csv` and `summary.json`.
pub fn cmd_train(cfg: &RunConfig) -> Result<Value> {
    let dp = cfg.diffusion()?;
    let base = cfg.train_config()?;
    let split_base = cfg.split_spec()?;
    if cfg.seeds == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    let dataset = load_dataset(cfg.dataset_path()?)?;
    let out = prepare_output(cfg)?;
    let bundle = precompute_operators(&dataset.graph, &dp, &cfg.bundle_options())?;
    warn_if_loose(&bundle, &dp);
    let pipe = Pipeline::new(&bundle, dp, base.head)?;

    let mut results = Vec::new();
    let mut fixed_split = None;
    for i in 0..cfg.seeds {
        let tc = TrainConfig { seed: base.seed + i as u64, ..base };
        let (ds, split) = if dataset.splits.is_some() {
            (None, None)
        } else if cfg.resample_splits || fixed_split.is_none() {
            let spec = SplitSpec { seed: split_base.seed + if cfg.resample_splits { i as u64 } else { 0 }, ..split_base };
            let ds = make_split(&dataset, &spec)?;
            if !cfg.resample_splits {
                fixed_split = Some((ds.clone(), spec));
            }
            (Some(ds), Some(spec))
        } else {
            let (ds, spec) = fixed_split.clone().expect("fixed split");
            (Some(ds), Some(spec))
        };
        let ds = ds.as_ref().unwrap_or(&dataset);
        log::info!("training seed {} on {} nodes", tc.seed, ds.num_nodes());
        let r = match tc.precision {
            Precision::F32 => train_one::<f32>(ds, &pipe, &tc, &dp, split, &out)?,
            Precision::F64 => train_one::<f64>(ds, &pipe, &tc, &dp, split, &out)?,
        };
        results.push(r);
    }

    let mut metrics = String::from("seed,best_epoch,train_acc,valid_acc,test_acc\n");
    for r in &results {
        metrics.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed,
            r.best_epoch,
            crate::data::format_real(r.train),
            opt_cell(r.valid),
            opt_cell(r.test)
        ));
    }
    write(&out.join("metrics.csv"), &metrics)?;
    let collect = |f: &dyn Fn(&SeedResult) -> Option<f64>| -> Option<Vec<f64>> { results.iter().map(f).collect() };
    let summary = json!({
        "dataset": dataset.name,
        "num_nodes": dataset.num_nodes(),
        "seeds": results.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "train_acc": mean_std(&results.iter().map(|r| r.train).collect::<Vec<_>>()),
        "valid_acc": collect(&|r| r.valid).map(|v| mean_std(&v)),
        "test_acc": collect(&|r| r.test).map(|v| mean_std(&v)),
    });
    write(&out.join("summary.json"), &json_pretty(&summary))?;
    Ok(summary)
}

fn eval_with<T: NdFloat>(ck: &Checkpoint, ds: &Dataset, pipe: &Pipeline<'_>) -> Result<Value> {
    let params = ck.params::<T>(ds.feature_dim(), ds.num_classes)?;
    let splits = ds.splits()?;
    let mut out = serde_json::Map::new();
    for (name, mask) in [("train", &splits.train), ("valid", &splits.valid), ("test", &splits.test)] {
        let acc = evaluate(ds, pipe, &params, mask).map_err(|e| match e {
            Error::EmptyMask => Error::Dataset(format!("empty mask: the {name} split has no nodes")),
            other => other,
        })?;
        out.insert(name.to_string(), json!(acc));
    }
    Ok(Value::Object(out))
}

/// Accuracy of a checkpoint on every split mask.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Value> {
    let ck = Checkpoint::load(cfg.checkpoint_path()?)?;
    let mut dataset = load_dataset(cfg.dataset_path()?)?;
    let out = prepare_output(cfg)?;
    if dataset.splits.is_none() {
        let spec = match ck.split {
            Some(spec) => spec,
            None => cfg.split_spec()?,
        };
        dataset = make_split(&dataset, &spec)?;
    }
    let bundle = precompute_operators(&dataset.graph, &ck.diffusion, &ck.bundle_options(cfg.dense_threshold))?;
    let pipe = Pipeline::new(&bundle, ck.diffusion, ck.config.head)?;
    let result = match ck.config.precision {
        Precision::F32 => eval_with::<f32>(&ck, &dataset, &pipe)?,
        Precision::F64 => eval_with::<f64>(&ck, &dataset, &pipe)?,
    };
    write(&out.join("eval.json"), &json_pretty(&result))?;
    Ok(result)
}

/// Writes the selected embedding (`X*` taken as the raw features) as CSV
/// with a JSON sidecar.
pub fn cmd_diffuse(cfg: &RunConfig) -> Result<Value> {
    let dp = cfg.diffusion()?;
    let dataset = load_dataset(cfg.dataset_path()?)?;
    let out = prepare_output(cfg)?;
    let solver = match cfg.mode {
        DiffuseMode::GlobalDense => SolverChoice::Dense,
        _ => SolverChoice::Neumann,
    };
    let options = BundleOptions { solver, ..cfg.bundle_options() };
    let bundle = precompute_operators(&dataset.graph, &dp, &options)?;
    let x = dataset.features.view();
    let embedding = match cfg.mode {
        DiffuseMode::Source => source_term(x, &bundle, &dp)?,
        DiffuseMode::Local => diffuse_local(x, &bundle, &dp)?,
        DiffuseMode::GlobalDense => diffuse_global_dense(x, &bundle, &dp)?,
        DiffuseMode::GlobalNeumann => {
            warn_if_loose(&bundle, &dp);
            diffuse_global_neumann(x, &bundle, &dp)?
        }
    };
    write(&out.join("embeddings.csv"), &matrix_to_csv(&embedding))?;
    let mut sidecar = json!({
        "mode": cfg.mode.as_str(),
        "laplacian": bundle.laplacian_mode().as_str(),
        "num_nodes": embedding.nrows(),
        "dim": embedding.ncols(),
        "params": dp,
    });
    if cfg.mode == DiffuseMode::GlobalNeumann {
        sidecar["neumann_terms"] = json!(dp.neumann_terms);
        sidecar["neumann_bound"] = json!(neumann_error_bound(dp.delta, dp.neumann_terms));
    }
    write(&out.join("embeddings.json"), &json_pretty(&sidecar))?;
    Ok(sidecar)
}

/// Verifies that the energy minimizer recovers the global embeddings
/// (identity-degree Laplacian, raw features as `X*`).
pub fn cmd_energy_check(cfg: &RunConfig) -> Result<Value> {
    let dp = cfg.diffusion()?;
    let dataset = load_dataset(cfg.dataset_path()?)?;
    let out = prepare_output(cfg)?;
    if dataset.num_nodes() > cfg.dense_threshold {
        return Err(Error::InvalidParameter(format!(
            "energy-check needs dense solves; {} nodes exceed dense_threshold {}",
            dataset.num_nodes(),
            cfg.dense_threshold
        )));
    }
    let ep = match cfg.energy_mapping {
        EnergyMapping::Mapped => params_from_diffusion(&dp),
        EnergyMapping::Unmapped => EnergyParams { lambda: dp.alpha, epsilon: dp.beta, eta: dp.gamma },
    };
    let x = dataset.features.view();
    let options = |laplacian| BundleOptions {
        laplacian,
        dense_threshold: cfg.dense_threshold,
        solver: SolverChoice::Dense,
    };
    let bundle = precompute_operators(&dataset.graph, &dp, &options(LaplacianMode::IdentityDegree))?;
    let h_hat = energy_minimizer(x, &bundle, &ep)?;
    let h_star = diffuse_global_dense(x, &bundle, &dp)?;
    let residual = relative_gap(&h_hat, &h_star);
    let grad_norm = frob(&energy_gradient(h_hat.view(), x, &bundle, &ep)?);

    let paper = precompute_operators(&dataset.graph, &dp, &options(LaplacianMode::PaperDegree))?;
    let paper_gap = relative_gap(
        &energy_minimizer_general(x, &paper, &ep)?,
        &diffuse_global_dense(x, &paper, &dp)?,
    );
    let pass = residual <= RECOVERY_TOLERANCE && grad_norm <= GRADIENT_TOLERANCE;
    let report = json!({
        "pass": pass,
        "mapping": cfg.energy_mapping.as_str(),
        "lambda": ep.lambda,
        "epsilon": ep.epsilon,
        "eta": ep.eta,
        "recovery_residual": residual,
        "recovery_tolerance": RECOVERY_TOLERANCE,
        "gradient_norm": grad_norm,
        "gradient_tolerance": GRADIENT_TOLERANCE,
        "paper_degree_gap": paper_gap,
    });
    write(&out.join("energy_check.json"), &json_pretty(&report))?;
    if pass {
        Ok(report)
    } else {
        let _ = write!(std::io::stdout().lock(), "{}", json_pretty(&report));
        Err(Error::CheckFailed(format!(
            "recovery residual {residual:.3e} (tolerance {RECOVERY_TOLERANCE:e}), gradient norm {grad_norm:.3e} (tolerance {GRADIENT_TOLERANCE:e})"
        )))
    }
}

/// Passive vs active diffusion from `X*` = raw features, `k = 0..=k_max`.
pub fn cmd_oversmooth_bench(cfg: &RunConfig) -> Result<Value> {
    let dp = cfg.diffusion()?;
    let dataset = load_dataset(cfg.dataset_path()?)?;
    let out = prepare_output(cfg)?;
    let bundle = precompute_operators(&dataset.graph, &dp, &cfg.bundle_options())?;
    let x = dataset.features.view();
    let passive = passive_operator(&bundle)?;
    let source = source_term(x, &bundle, &dp)?;
    let h_star = bundle.apply_global(source.view())?;

    let mut csv = String::from(
        "k,dirichlet_energy_passive,dirichlet_energy_active,min_pairwise_distance_passive,min_pairwise_distance_active\n",
    );
    let cell = |v: Option<f64>| v.map(crate::data::format_real).unwrap_or_else(|| "NaN".into());
    let mut z = x.to_owned();
    let mut h = x.to_owned();
    let mut first = (0.0, 0.0);
    let mut last = (0.0, 0.0, None, None);
    for k in 0..=cfg.k_max {
        let (ez, eh) = (dirichlet_energy(z.view(), &bundle)?, dirichlet_energy(h.view(), &bundle)?);
        let (dz, dh) = (min_pairwise_distance(z.view()), min_pairwise_distance(h.view()));
        csv.push_str(&format!("{k},{},{},{},{}\n", cell(Some(ez)), cell(Some(eh)), cell(dz), cell(dh)));
        if k == 0 {
            first = (ez, eh);
        }
        last = (ez, eh, dz, dh);
        if k < cfg.k_max {
            z = passive_step(z.view(), &passive, dp.tau)?;
            h = active_step(h.view(), source.view(), bundle.adjacency(), dp.delta)?;
        }
    }
    write(&out.join("oversmooth.csv"), &csv)?;
    let summary = json!({
        "k_max": cfg.k_max,
        "passive_energy_initial": first.0,
        "passive_energy_final": last.0,
        "passive_energy_ratio": if first.0 > 0.0 { last.0 / first.0 } else { 0.0 },
        "active_energy_final": last.1,
        "passive_min_distance_final": last.2,
        "active_min_distance_final": last.3,
        "global_min_distance": min_pairwise_distance(h_star.view()),
        "global_energy": dirichlet_energy(h_star.view(), &bundle)?,
    });
    write(&out.join("oversmooth.json"), &json_pretty(&summary))?;
    Ok(summary)
}

/// Writes a synthetic block-model dataset into `output_dir`.
pub fn cmd_gen_synth(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.synth_spec()?;
    let dataset = gen_synthetic(&spec)?;
    let out = prepare_output(cfg)?;
    save_dataset(&dataset, &out)?;
    Ok(json!({
        "name": dataset.name,
        "num_nodes": dataset.num_nodes(),
        "num_edges": dataset.graph.num_edges(),
        "num_classes": dataset.num_classes,
        "homophily": dataset.homophily()?,
        "output_dir": out.display().to_string(),
    }))
}
