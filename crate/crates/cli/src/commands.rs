//! Subcommand implementations. Every command is deterministic given an
//! identical config and seed: re-running overwrites outputs with identical
//! bytes, regardless of --threads.

use std::path::{Path, PathBuf};

use serde::Serialize;

use stormloss::eval;
use stormloss::features::{
    assemble, matrix_from_csv, matrix_to_csv, standardize_all, AssembleOptions,
};
use stormloss::ingest::{
    generate_synthetic, load_bundle, write_bundle, DatasetBundle, SYN_COEF_DAMS,
    SYN_COEF_ELEVATED, SYN_COEF_ELEV_DIFF, SYN_COEF_WIND, SYN_INTERCEPT,
};
use stormloss::models::{gain_importance, load_model, save_model, Model, ModelDocument};
use stormloss::{Seed, HPI_BASELINE};

use crate::config::{Protocol, RunConfig};
use crate::CliError;

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::user(format!("cannot create output dir {}: {e}", dir.display())))
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::user(format!("cannot write {}: {e}", path.display())))
}

/// Load the dataset named by the config: either the six CSVs (printing the
/// ingest report when any rows were rejected) or the synthetic generator.
fn load_data(config: &RunConfig, seed: Seed) -> Result<DatasetBundle, CliError> {
    if let Some(params) = &config.synthetic {
        return generate_synthetic(seed, params.n_zctas, params.n_storms, params.noise_sigma)
            .map_err(CliError::from_input);
    }
    let paths = config.inputs.as_ref().expect("validated: one input mode set");
    let (bundle, report) = load_bundle(paths).map_err(CliError::from_input)?;
    if report.sources.iter().any(|s| s.rejected > 0) || !report.unmatched_zctas.is_empty() {
        eprintln!("{}", report.render());
    }
    Ok(bundle)
}

#[derive(Serialize)]
struct SynthManifest {
    seed: u64,
    n_zctas: usize,
    n_storms: usize,
    noise_sigma: f64,
    intercept: f64,
    coef_wind: f64,
    coef_elevated: f64,
    coef_elev_diff: f64,
    coef_dams: f64,
    hpi_baseline: f64,
}

pub fn cmd_synth(config: &RunConfig, seed: Seed, out_dir: &Path) -> Result<(), CliError> {
    let params = config
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::user("synth requires \"synthetic\" parameters in the config"))?;
    ensure_out_dir(out_dir)?;
    let bundle = generate_synthetic(seed, params.n_zctas, params.n_storms, params.noise_sigma)
        .map_err(CliError::from_input)?;
    write_bundle(&bundle, out_dir)
        .map_err(|e| CliError::user(format!("cannot write CSVs to {}: {e}", out_dir.display())))?;
    let manifest = SynthManifest {
        seed: seed.0,
        n_zctas: params.n_zctas,
        n_storms: params.n_storms,
        noise_sigma: params.noise_sigma,
        intercept: SYN_INTERCEPT,
        coef_wind: SYN_COEF_WIND,
        coef_elevated: SYN_COEF_ELEVATED,
        coef_elev_diff: SYN_COEF_ELEV_DIFF,
        coef_dams: SYN_COEF_DAMS,
        hpi_baseline: HPI_BASELINE,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(CliError::internal)?;
    write_output(&out_dir.join("manifest.json"), &(json + "\n"))?;
    println!("wrote 6 CSVs + manifest.json to {}", out_dir.display());
    Ok(())
}

pub fn cmd_train(config: &RunConfig, seed: Seed, out_dir: &Path) -> Result<(), CliError> {
    let bundle = load_data(config, seed)?;
    let assembled = assemble(&bundle, AssembleOptions::default()).map_err(CliError::from_input)?;
    let (scaled, transform) = standardize_all(&assembled).map_err(CliError::internal)?;
    let spec = config.model.spec();
    let model = spec
        .fit(scaled.rows(), scaled.target(), seed)
        .map_err(CliError::from_input)?;
    ensure_out_dir(out_dir)?;

    let doc = save_model(
        &model,
        assembled.matrix.column_names(),
        Some(&transform),
    )
    .map_err(CliError::internal)?;
    write_output(&out_dir.join("model.json"), &(doc + "\n"))?;

    // raw features: prediction re-applies the transform stored in the model
    let features = matrix_to_csv(&assembled.matrix).map_err(CliError::internal)?;
    write_output(&out_dir.join("features.csv"), &features)?;

    let preds = model.predict(scaled.rows()).map_err(CliError::internal)?;
    write_output(
        &out_dir.join("training_predictions.csv"),
        &predictions_csv(scaled.row_ids(), &preds)?,
    )?;
    println!(
        "trained {} on {} rows; wrote model.json, features.csv, training_predictions.csv",
        spec.kind(),
        scaled.n_rows()
    );
    Ok(())
}

pub fn cmd_evaluate(config: &RunConfig, seed: Seed, out_dir: &Path) -> Result<(), CliError> {
    let bundle = load_data(config, seed)?;
    let assembled = assemble(&bundle, AssembleOptions::default()).map_err(CliError::from_input)?;
    let spec = config.model.spec();
    let report = match config.protocol {
        Protocol::RepeatedCv { folds, repeats } => {
            eval::repeated_kfold(&assembled, &spec, folds, repeats, seed)
        }
        Protocol::Holdout { fraction } => eval::evaluate_holdout(&assembled, &spec, fraction, seed),
    }
    .map_err(CliError::from_input)?;
    ensure_out_dir(out_dir)?;
    let json = report.to_json().map_err(CliError::internal)?;
    write_output(&out_dir.join("report.json"), &(json + "\n"))?;
    let table = report.render_table();
    write_output(&out_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn cmd_predict(
    config: &RunConfig,
    model_path: &Path,
    rows_path: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let _ = config; // inputs are the model document and the rows CSV
    let (model, doc) = read_model(model_path)?;
    let text = std::fs::read_to_string(rows_path)
        .map_err(|e| CliError::user(format!("cannot read {}: {e}", rows_path.display())))?;
    let matrix = matrix_from_csv(text.as_bytes()).map_err(CliError::from_input)?;
    if matrix.column_names() != doc.feature_names.as_slice() {
        return Err(CliError::user(format!(
            "rows CSV columns {:?} do not match the model's features {:?}",
            matrix.column_names(),
            doc.feature_names
        )));
    }
    let rows = match &doc.transform {
        Some(t) => t.apply_rows(matrix.rows()).map_err(CliError::from_input)?,
        None => matrix.rows().to_vec(),
    };
    let preds = model.predict(&rows).map_err(CliError::from_input)?;
    ensure_out_dir(out_dir)?;
    write_output(
        &out_dir.join("predictions.csv"),
        &predictions_csv(matrix.row_ids(), &preds)?,
    )?;
    println!("wrote {} predictions to predictions.csv", preds.len());
    Ok(())
}

pub fn cmd_importance(
    config: &RunConfig,
    model_path: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let _ = config;
    let (model, doc) = read_model(model_path)?;
    if !matches!(model, Model::Forest(_) | Model::Gbm(_) | Model::Xgb(_)) {
        return Err(CliError::user(format!(
            "importance requires a tree ensemble (forest, gbm, xgb); model kind is {:?}",
            model.kind()
        )));
    }
    let table = gain_importance(&model, &doc.feature_names).map_err(CliError::from_input)?;
    let mut out = String::from("feature,share\n");
    for (name, share) in table.sorted_desc() {
        out.push_str(&format!("{name},{share}\n"));
    }
    ensure_out_dir(out_dir)?;
    write_output(&out_dir.join("importance.csv"), &out)?;
    println!("wrote importance.csv ({} features)", doc.feature_names.len());
    Ok(())
}

pub fn cmd_report(
    config: &RunConfig,
    seed: Seed,
    model_path: Option<&PathBuf>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let bundle = load_data(config, seed)?;
    let assembled = assemble(&bundle, AssembleOptions::default()).map_err(CliError::from_input)?;
    let preds = match model_path {
        Some(path) => {
            let (model, doc) = read_model(path)?;
            let rows = match &doc.transform {
                Some(t) => t
                    .apply_rows(assembled.matrix.rows())
                    .map_err(CliError::from_input)?,
                None => assembled.matrix.rows().to_vec(),
            };
            Some(model.predict(&rows).map_err(CliError::from_input)?)
        }
        None => None,
    };
    let csv = eval::export_zcta_summary(&bundle, &assembled.matrix, preds.as_deref())
        .map_err(CliError::internal)?;
    ensure_out_dir(out_dir)?;
    write_output(&out_dir.join("zcta_summary.csv"), &csv)?;
    println!("wrote zcta_summary.csv ({} rows)", assembled.matrix.n_rows());
    Ok(())
}

fn read_model(path: &Path) -> Result<(Model, ModelDocument), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::user(format!("cannot read model {}: {e}", path.display())))?;
    load_model(&text).map_err(CliError::from_input)
}

fn predictions_csv(ids: &[String], preds: &[f64]) -> Result<String, CliError> {
    let mut out = String::from("zcta,predicted_log_cost\n");
    for (id, p) in ids.iter().zip(preds) {
        out.push_str(&format!("{id},{p}\n"));
    }
    Ok(out)
}
