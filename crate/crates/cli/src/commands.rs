use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fpdist::eval::{evaluate as score, export_histogram, read_report_rows, write_report_rows, ReportRow};
use fpdist::fingerprint::{filter_by_label, generate_pairs};
use fpdist::io::{
    checksum_file, export_pairs, import_pairs, load_fingerprints, load_model, partition_pairs, read_manifests, save_fingerprints,
    save_model, write_manifests, write_split_manifest, DatasetManifest, DatasetRole, InputFormat,
};
use fpdist::learners::random_search;
use fpdist::select::{ga_select, importance_votes};
use fpdist::synth::generate_venue;
use fpdist::{FeatureMask, Fingerprint, TrainedModel};

use crate::config::RunConfig;
use crate::{
    CliError, EvaluateArgs, FilterArgs, IngestArgs, ModelInput, PairsArgs, ReportArgs, SelectGaArgs, SplitArgs, SynthArgs, TrainArgs,
    TuneArgs, VoteArgs,
};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Prefixes a data error with the file it came from.
fn at<T, E: Into<CliError>>(path: &Path, r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| match e.into() {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Dataset ids become file names, so anything outside `[A-Za-z0-9._-]` is
/// replaced and leading dots are dropped.
fn file_stem_for(dataset_id: &str) -> String {
    let s: String = dataset_id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' }).collect();
    let s = s.trim_start_matches('.');
    if s.is_empty() {
        "dataset".to_string()
    } else {
        s.to_string()
    }
}

fn parse_mask(raw: &str) -> Result<FeatureMask, CliError> {
    let text = match raw.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read mask file {path}: {e}")))?,
        None => raw.to_string(),
    };
    let mask: FeatureMask = text.trim().parse().map_err(CliError::Usage)?;
    if mask.count() == 0 {
        return Err(CliError::Usage("feature mask selects no features".into()));
    }
    Ok(mask)
}

pub fn synth(cfg: &RunConfig, a: SynthArgs) -> Result<(), CliError> {
    let mut spec = cfg.venue.clone();
    if let Some(n) = a.fingerprints {
        spec.fingerprint_count = n;
    }
    if let Some(n) = a.aps {
        spec.ap_count = n;
    }
    if let Some(w) = a.width_m {
        spec.width_m = w;
    }
    if let Some(h) = a.height_m {
        spec.height_m = h;
    }
    if let Some(s) = a.sigma_db {
        spec.shadowing_sigma_db = s;
    }
    if let Some(e) = a.path_loss_exponent {
        spec.path_loss_exponent = e;
    }
    if let Some(id) = a.dataset_id {
        spec.dataset_id = id;
    }
    let fps = generate_venue(&spec).map_err(CliError::Usage)?;
    at(&a.out, save_fingerprints(&fps, &a.out))?;
    say!("wrote {} fingerprints to {}", fps.len(), a.out.display());
    Ok(())
}

pub fn ingest(cfg: &RunConfig, a: IngestArgs) -> Result<(), CliError> {
    let mut datasets: BTreeMap<String, Vec<Fingerprint>> = BTreeMap::new();
    for input in &a.inputs {
        let report = at(input, load_fingerprints(input, InputFormat::LongCsv, &cfg.pipeline))?;
        if report.dropped_readings > 0 || !report.dropped_fingerprints.is_empty() {
            eprintln!(
                "{}: dropped {} out-of-range readings, {} empty fingerprints",
                input.display(),
                report.dropped_readings,
                report.dropped_fingerprints.len()
            );
        }
        for fp in report.fingerprints {
            datasets.entry(fp.dataset_id.clone()).or_default().push(fp);
        }
    }
    for id in &a.isolate {
        if !datasets.contains_key(id) {
            return Err(CliError::Usage(format!("--isolate {id}: no such dataset in the inputs")));
        }
    }
    create_dir(&a.out_dir)?;
    let mut manifests = Vec::new();
    let mut used_names = BTreeMap::new();
    for (id, fps) in &datasets {
        let stem = file_stem_for(id);
        if let Some(prev) = used_names.insert(stem.clone(), id.clone()) {
            return Err(CliError::Data(format!("datasets `{prev}` and `{id}` map to the same file name {stem}.csv")));
        }
        let file = format!("{stem}.csv");
        let path = a.out_dir.join(&file);
        at(&path, save_fingerprints(fps, &path))?;
        let role = if a.isolate.contains(id) { DatasetRole::Isolated } else { DatasetRole::Pool };
        manifests.push(DatasetManifest {
            dataset_id: id.clone(),
            role,
            source: file,
            fingerprint_count: fps.len(),
            checksum: at(&path, checksum_file(&path))?,
        });
    }
    let manifest_path = a.out_dir.join("manifest.csv");
    at(&manifest_path, write_manifests(&manifests, &manifest_path))?;
    for m in &manifests {
        say!("{}\t{:?}\t{} fingerprints", m.dataset_id, m.role, m.fingerprint_count);
    }
    Ok(())
}

pub fn pairs(cfg: &RunConfig, a: PairsArgs) -> Result<(), CliError> {
    let manifests = at(&a.manifest, read_manifests(&a.manifest))?;
    let base = a.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut all = Vec::new();
    for m in &manifests {
        let path = base.join(&m.source);
        let checksum = at(&path, checksum_file(&path))?;
        if checksum != m.checksum {
            return Err(CliError::Data(format!("{}: checksum does not match the manifest", path.display())));
        }
        let report = at(&path, load_fingerprints(&path, InputFormat::LongCsv, &cfg.pipeline))?;
        if let Some(fp) = report.fingerprints.iter().find(|fp| fp.dataset_id != m.dataset_id) {
            return Err(CliError::Data(format!(
                "{}: fingerprint {} belongs to `{}`, not `{}`",
                path.display(),
                fp.id,
                fp.dataset_id,
                m.dataset_id
            )));
        }
        let pairs = generate_pairs(&report.fingerprints, &cfg.pipeline);
        say!("{}\t{} fingerprints\t{} pairs", m.dataset_id, report.fingerprints.len(), pairs.len());
        all.extend(pairs);
    }
    at(&a.out, export_pairs(&all, &a.out))?;
    Ok(())
}

pub fn filter(cfg: &RunConfig, a: FilterArgs) -> Result<(), CliError> {
    let pairs = at(&a.input, import_pairs(&a.input))?;
    let kept = filter_by_label(&pairs, cfg.pipeline.train_filter_m);
    at(&a.out, export_pairs(&kept, &a.out))?;
    say!("kept {} of {} pairs with label <= {} m", kept.len(), pairs.len(), cfg.pipeline.train_filter_m);
    Ok(())
}

pub fn split(cfg: &RunConfig, a: SplitArgs) -> Result<(), CliError> {
    let pairs = at(&a.input, import_pairs(&a.input))?;
    let manifests = match &a.manifest {
        Some(p) => at(p, read_manifests(p))?,
        None => Vec::new(),
    };
    let part = partition_pairs(&pairs, &manifests, &cfg.pipeline.split, cfg.pipeline.seed)?;
    create_dir(&a.out_dir)?;
    for (name, set) in [("train", &part.train), ("validation", &part.validation), ("test", &part.test)] {
        let path = a.out_dir.join(format!("{name}.csv"));
        at(&path, export_pairs(set, &path))?;
        say!("{name}\t{}", set.len());
    }
    for (id, set) in &part.isolated {
        let path = a.out_dir.join(format!("isolated-{}.csv", file_stem_for(id)));
        at(&path, export_pairs(set, &path))?;
        say!("isolated {id}\t{}", set.len());
    }
    let pool: Vec<_> = pairs.iter().filter(|p| !part.isolated.contains_key(&p.dataset_id)).cloned().collect();
    let path = a.out_dir.join("splits.csv");
    let w = create_file(&path)?;
    at(&path, write_split_manifest(&pool, &part.assignment, w))?;
    Ok(())
}

/// Votes on the training file as given; a label filter is applied only when
/// `--max-m` is passed explicitly.
pub fn vote(cfg: &RunConfig, a: VoteArgs, max_m: Option<f64>) -> Result<(), CliError> {
    let mut train = at(&a.train, import_pairs(&a.train))?;
    if let Some(m) = max_m {
        train = filter_by_label(&train, m);
    }
    let table = importance_votes(&train, &cfg.eval)?;
    let w = create_file(&a.out)?;
    at(&a.out, table.write_csv(w))?;
    for row in &table.rows {
        say!("{:<16}{}", row.feature.name(), row.total());
    }
    Ok(())
}

pub fn select_ga(cfg: &RunConfig, a: SelectGaArgs) -> Result<(), CliError> {
    let train = at(&a.train, import_pairs(&a.train))?;
    let validation = at(&a.validation, import_pairs(&a.validation))?;
    let out = ga_select(&train, &validation, &cfg.ga, &cfg.eval)?;
    let mut w = create_file(&a.out)?;
    writeln!(w, "{}", out.best_mask).map_err(|e| CliError::Data(format!("cannot write {}: {e}", a.out.display())))?;
    flush(w, &a.out)?;
    if let Some(h) = &a.history {
        let w = create_file(h)?;
        at(h, out.write_history_csv(w))?;
    }
    let names: Vec<&str> = out.best_mask.features().iter().map(|f| f.name()).collect();
    say!("mask {} fitness {:.6} ({})", out.best_mask, out.best_fitness, names.join(","));
    Ok(())
}

fn train_filter(cfg: &RunConfig, input: &ModelInput) -> Option<f64> {
    if input.no_filter {
        None
    } else {
        Some(cfg.pipeline.train_filter_m)
    }
}

pub fn train(cfg: &RunConfig, a: TrainArgs) -> Result<(), CliError> {
    let a = a.input;
    let mask = parse_mask(&a.mask)?;
    let pairs = at(&a.train, import_pairs(&a.train))?;
    let model = TrainedModel::train(&a.learner.default_spec(), &pairs, &mask, train_filter(cfg, &a))?;
    at(&a.out, save_model(&model, &a.out))?;
    say!("trained {} on {} pairs with mask {}", a.learner, model.n_train, model.mask);
    Ok(())
}

pub fn tune(cfg: &RunConfig, a: TuneArgs) -> Result<(), CliError> {
    let mask = parse_mask(&a.input.mask)?;
    let train = at(&a.input.train, import_pairs(&a.input.train))?;
    let validation = at(&a.validation, import_pairs(&a.validation))?;
    let out = random_search(a.input.learner, &cfg.search, &train, &validation, &mask, train_filter(cfg, &a.input), &cfg.eval)?;
    at(&a.input.out, save_model(&out.best, &a.input.out))?;
    if let Some(path) = &a.trials {
        let mut w = create_file(path)?;
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "trial,f_beta,spec")?;
            for (i, t) in out.trials.iter().enumerate() {
                let spec = serde_json::to_string(&t.spec).map_err(std::io::Error::other)?;
                writeln!(w, "{i},{},\"{}\"", t.f_beta, spec.replace('"', "\"\""))?;
            }
            Ok(())
        };
        write(&mut w).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        flush(w, path)?;
    }
    let best = &out.trials[out.best_index];
    say!("best trial {} of {}: F_beta {:.6} {:?}", out.best_index, out.trials.len(), best.f_beta, best.spec);
    Ok(())
}

/// With `--isolated`, every pair must come from a dataset the model was not
/// trained on and, when a manifest is given, that the manifest marks isolated.
fn check_isolation(model: &TrainedModel, pairs: &[fpdist::PairRecord], manifest: Option<&Path>) -> Result<(), CliError> {
    let roles: Option<BTreeMap<String, DatasetRole>> = match manifest {
        Some(p) => Some(at(p, read_manifests(p))?.into_iter().map(|m| (m.dataset_id, m.role)).collect()),
        None => None,
    };
    let mut seen = std::collections::BTreeSet::new();
    for p in pairs {
        if !seen.insert(p.dataset_id.as_str()) {
            continue;
        }
        if model.train_datasets.iter().any(|d| d == &p.dataset_id) {
            return Err(CliError::Data(format!(
                "dataset `{}` was used to train the model and cannot be evaluated as isolated",
                p.dataset_id
            )));
        }
        if let Some(roles) = &roles {
            match roles.get(&p.dataset_id) {
                Some(DatasetRole::Isolated) => {}
                Some(DatasetRole::Pool) => {
                    return Err(CliError::Data(format!("dataset `{}` is a pool dataset, not isolated", p.dataset_id)));
                }
                None => return Err(CliError::Data(format!("dataset `{}` is not listed in the manifest", p.dataset_id))),
            }
        }
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, a: EvaluateArgs) -> Result<(), CliError> {
    let model = at(&a.model, load_model(&a.model))?;
    let pairs = at(&a.pairs, import_pairs(&a.pairs))?;
    if a.isolated {
        check_isolation(&model, &pairs, a.manifest.as_deref())?;
    }
    let name = a.dataset.clone().unwrap_or_else(|| a.pairs.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let report = score(&model, &pairs, &cfg.eval, &name)?;
    let rows = report.rows();
    at(&a.out, write_report_rows(&rows, &a.out))?;
    if let Some(h) = &a.histogram {
        at(h, export_histogram(&report.full.histogram, h))?;
    }
    print_table(&rows);
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<(), CliError> {
    let mut rows: Vec<ReportRow> = Vec::new();
    for input in &a.inputs {
        rows.extend(at(input, read_report_rows(input))?);
    }
    let (all, restricted): (Vec<ReportRow>, Vec<ReportRow>) = rows.into_iter().partition(|r| r.subset == "all");
    create_dir(&a.out_dir)?;
    let outputs: [(PathBuf, &[ReportRow]); 2] =
        [(a.out_dir.join("table_all.csv"), &all), (a.out_dir.join("table_restricted.csv"), &restricted)];
    for (path, set) in &outputs {
        at(path, write_report_rows(set, path))?;
    }
    print_table(&all);
    if !restricted.is_empty() {
        say!();
        print_table(&restricted);
    }
    Ok(())
}

fn print_table(rows: &[ReportRow]) {
    say!(
        "{:<18} {:<6} {:<8} {:>7} {:>8} {:>8} {:>9} {:>7} {:>7} {:>7} {:>9} {:>9}",
        "dataset",
        "ML",
        "subset",
        "n",
        "MAE",
        "RMSE",
        "MSE",
        "Prec",
        "Recall",
        "F_beta",
        "Train-t",
        "Test-t"
    );
    for r in rows {
        say!(
            "{:<18} {:<6} {:<8} {:>7} {:>8.3} {:>8.3} {:>9.3} {:>7.4} {:>7.4} {:>7.4} {:>9.4} {:>9.4}",
            r.dataset,
            r.learner,
            r.subset,
            r.n,
            r.mae,
            r.rmse,
            r.mse,
            r.precision,
            r.recall,
            r.f_beta,
            r.train_time_s,
            r.test_time_s
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_ids_become_safe_file_names() {
        assert_eq!(file_stem_for("venue-a"), "venue-a");
        assert_eq!(file_stem_for("../etc/x y"), "_etc_x_y");
        assert_eq!(file_stem_for("..."), "dataset");
    }

    #[test]
    fn masks_parse_from_all_forms() {
        assert_eq!(parse_mask("all").unwrap().count(), 14);
        assert_eq!(parse_mask("10000000000001").unwrap().indices(), vec![0, 13]);
        assert_eq!(parse_mask("cosine,euclidean").unwrap().count(), 2);
        assert!(matches!(parse_mask("00000000000000"), Err(CliError::Usage(_))));
        assert!(matches!(parse_mask("nonsense"), Err(CliError::Usage(_))));
        assert!(matches!(parse_mask("@/definitely/missing"), Err(CliError::Data(_))));
    }
}
