use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use tsfuzz::dataio::{
    generate_benchmark, load_model, load_table, save_model, write_predictions, write_scatter,
    write_selection_report, ScatterRow, SelectionRow, Split,
};
use tsfuzz::evaluation::{evaluate, loo_crossval};
use tsfuzz::pipeline::{identify, Identified};
use tsfuzz::selection::fisher_score;
use tsfuzz::{BenchmarkKind, Dataset, ModelFile, Provenance, SelectionConfig, TsModel};

use crate::format::{sig6, Table};
use crate::RunArgs;

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> tsfuzz::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    fill(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn provenance(args: &RunArgs, model: &TsModel) -> Provenance {
    let names = |cols: &[usize]| cols.iter().map(|&c| model.input_names()[c].clone()).collect();
    Provenance {
        clusters: args.clusters,
        fuzziness: args.fuzziness,
        tolerance: args.epsilon,
        seed: args.seed,
        antecedent_columns: names(model.antecedent_columns()),
        consequent_columns: names(model.consequent_columns()),
    }
}

fn warn_clustering(fit: &Identified, err: &mut dyn Write) -> Result<()> {
    let c = &fit.clustering;
    if !c.converged {
        writeln!(err, "warning: clustering stopped after {} iterations without converging", c.iterations)?;
    }
    for (iteration, cluster) in &c.diagnostics.reseeded {
        writeln!(err, "warning: cluster {cluster} lost all membership at iteration {iteration} and was re-seeded")?;
    }
    if !c.diagnostics.rank_deficient.is_empty() {
        writeln!(
            err,
            "warning: {} rank-deficient local regressions (minimum-norm solutions used)",
            c.diagnostics.rank_deficient.len()
        )?;
    }
    Ok(())
}

/// Fit statistics of `fit` on `data`, printed and optionally exported.
fn report_fit(args: &RunArgs, fit: &Identified, data: &Dataset, out: &mut dyn Write) -> Result<()> {
    let eval = evaluate(&fit.model, data)?;
    let c = &fit.clustering;
    writeln!(out, "rules       {}", fit.model.rules().len())?;
    writeln!(
        out,
        "iterations  {} ({})",
        c.iterations,
        if c.converged { "converged" } else { "not converged" }
    )?;
    writeln!(out, "Train-RMSE  {}", sig6(eval.rmse))?;
    match eval.r_squared {
        Some(r2) => writeln!(out, "Train-r2    {}", sig6(r2))?,
        None => writeln!(out, "Train-r2    undefined (constant activity)")?,
    }
    if let Some(path) = &args.scatter_out {
        let rows: Vec<ScatterRow> = data
            .activity()
            .iter()
            .zip(&eval.predictions)
            .map(|(&observed, &predicted)| ScatterRow { observed, predicted, split: Split::Train })
            .collect();
        write_file(path, |w| write_scatter(w, &rows))?;
    }
    Ok(())
}

fn save(args: &RunArgs, model: &TsModel) -> Result<()> {
    if let Some(path) = &args.model {
        let file = ModelFile::new(model.clone(), provenance(args, model));
        save_model(&file, path).with_context(|| format!("cannot save model to {}", path.display()))?;
    }
    Ok(())
}

pub fn train(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if args.keep_antecedent.is_some() || args.keep_consequent.is_some() {
        bail!("train uses every column; use the select command with --keep-antecedent/--keep-consequent");
    }
    args.require(&args.model, "model")?;
    let data = args.load_data()?;
    let fit = identify(&data, &args.pipeline_config())?;
    warn_clustering(&fit, err)?;
    save(args, &fit.model)?;
    report_fit(args, &fit, &data, out)
}

pub fn crossval(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let data = args.load_data()?;
    let config = args.pipeline_config();
    let report = loo_crossval(&data, &config)?;
    let m = &report.metrics;
    let method = if config.selection.is_active() {
        format!("reduced TS, c={}", args.clusters)
    } else {
        format!("TS, c={}", args.clusters)
    };
    let mut table = Table::new(&["Method", "Train RMSE", "Test RMSE", "Train r2", "Test r2"]);
    table.row(vec![method, sig6(m.train_rmse), sig6(m.test_rmse), sig6(m.train_r2), sig6(m.test_r2)]);
    write!(out, "{}", table.render())?;
    let unconverged = report.unconverged_folds().count();
    writeln!(out, "folds       {} ({} not converged)", report.folds.len(), unconverged)?;
    if !report.train_converged {
        writeln!(err, "warning: the all-data fit did not converge")?;
    }
    if unconverged > 0 {
        writeln!(err, "warning: {unconverged} folds did not converge; their predictions are included")?;
    }
    if let Some(path) = &args.scatter_out {
        let train = data
            .activity()
            .iter()
            .zip(&report.train_predictions)
            .map(|(&observed, &predicted)| ScatterRow { observed, predicted, split: Split::Train });
        let test = report
            .pooled_predictions
            .iter()
            .map(|&(observed, predicted)| ScatterRow { observed, predicted, split: Split::Test });
        let rows: Vec<ScatterRow> = train.chain(test).collect();
        write_file(path, |w| write_scatter(w, &rows))?;
    }
    Ok(())
}

pub fn select(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let data = args.load_data()?;
    let k = data.width();
    let mut config = args.pipeline_config();
    if !config.selection.is_active() {
        config.selection = SelectionConfig { keep_antecedent: None, keep_consequent: Some(k) };
    }
    let fit = identify(&data, &config)?;
    warn_clustering(&fit, err)?;
    let report = fit.selection.as_ref().expect("selection requested");
    let names = data.column_names();
    let mut rows = Vec::new();

    writeln!(out, "Consequent ranking (error-reduction ratio)")?;
    let mut table = Table::new(&["rank", "descriptor", "score", "status"]);
    for (rank, (&col, &score)) in report
        .consequent
        .aggregate_order
        .iter()
        .zip(&report.consequent.aggregate_scores)
        .enumerate()
    {
        let kept = report.kept_consequents.contains(&col);
        table.row(vec![
            (rank + 1).to_string(),
            names[col].clone(),
            sig6(score),
            if kept { "kept" } else { "dropped" }.into(),
        ]);
        rows.push(SelectionRow { stage: "consequent".into(), rank: rank + 1, name: names[col].clone(), score, kept });
    }
    write!(out, "{}", table.render())?;

    writeln!(out, "\nAntecedent elimination (separability after removal)")?;
    let trace = &report.antecedent;
    let mut table = Table::new(&["step", "descriptor", "score"]);
    for (step, (&col, &score)) in trace.elimination_order.iter().zip(&trace.scores_after_removal).enumerate() {
        table.row(vec![(step + 1).to_string(), names[col].clone(), sig6(score)]);
        rows.push(SelectionRow { stage: "antecedent".into(), rank: step + 1, name: names[col].clone(), score, kept: false });
    }
    if trace.elimination_order.is_empty() {
        writeln!(out, "none removed")?;
    } else {
        write!(out, "{}", table.render())?;
    }
    let final_score = match trace.scores_after_removal.last() {
        Some(&s) => s,
        None => fisher_score(&trace.full.between, &trace.full.within)?,
    };
    for (i, &col) in trace.kept.iter().enumerate() {
        rows.push(SelectionRow {
            stage: "antecedent".into(),
            rank: trace.elimination_order.len() + i + 1,
            name: names[col].clone(),
            score: final_score,
            kept: true,
        });
    }

    let list = |cols: &[usize]| -> String {
        if cols.is_empty() {
            "-".into()
        } else {
            cols.iter().map(|&c| names[c].as_str()).collect::<Vec<_>>().join(", ")
        }
    };
    let dropped = |kept: &[usize]| (0..k).filter(|c| !kept.contains(c)).collect::<Vec<_>>();
    writeln!(out)?;
    writeln!(out, "kept antecedents     {}", list(&report.kept_antecedents))?;
    writeln!(out, "dropped antecedents  {}", list(&dropped(&report.kept_antecedents)))?;
    writeln!(out, "kept consequents     {}", list(&report.kept_consequents))?;
    writeln!(out, "dropped consequents  {}", list(&dropped(&report.kept_consequents)))?;
    writeln!(out)?;

    if let Some(path) = &args.out {
        write_file(path, |w| write_selection_report(w, &rows))?;
    }
    save(args, &fit.model)?;
    report_fit(args, &fit, &data, out)
}

pub fn predict(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let model_path = args.require(&args.model, "model")?;
    let data_path = args.require(&args.data, "data")?;
    let file = load_model(model_path).with_context(|| format!("cannot load model {}", model_path.display()))?;
    let model = if args.unit_weights { file.model.with_unit_weights() } else { file.model };
    let (header, table) = load_table(data_path).with_context(|| format!("cannot load {}", data_path.display()))?;
    let columns = model
        .input_names()
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .with_context(|| format!("{} has no column named '{name}' required by the model", data_path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let predictions: Vec<f64> = model.predict_batch(&table.select_columns(&columns))?.iter().copied().collect();
    match &args.out {
        Some(path) => {
            write_file(path, |w| write_predictions(w, &predictions))?;
            writeln!(out, "predicted {} rows", predictions.len())?;
        }
        None => write_predictions(out, &predictions)?,
    }
    Ok(())
}

pub fn benchmark(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let path = args.require(&args.out, "out")?;
    let kind: BenchmarkKind = args.benchmark_kind.parse()?;
    let (data, _) = generate_benchmark(kind, args.samples, args.noise, args.seed)?;
    write_file(path, |w| data.write_csv(w, "activity"))?;
    writeln!(
        out,
        "wrote {} rows, {} descriptors ({}) to {}",
        data.len(),
        data.width(),
        args.benchmark_kind,
        path.display()
    )?;
    Ok(())
}
