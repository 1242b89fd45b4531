use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use soundnet::formats::{read_feature_dump, write_atomic, Manifest, ManifestMode};
use soundnet::svm::{classify_windows, svm_train_grouped, ConfusionMatrix, SvmModel, SvmOptions};

use crate::{CmdResult, Failure, SvmEvalArgs, SvmTrainArgs};

/// Window features grouped by recording id, in first-seen order.
struct Recordings {
    layer: String,
    order: Vec<String>,
    windows: BTreeMap<String, Vec<Vec<f32>>>,
}

fn load_features(paths: &[PathBuf]) -> Result<Recordings, Failure> {
    let mut rec = Recordings {
        layer: String::new(),
        order: Vec::new(),
        windows: BTreeMap::new(),
    };
    let mut dim = None;
    for path in paths {
        let dump = read_feature_dump(path)?;
        match dim {
            None => {
                dim = Some(dump.dim);
                rec.layer = dump.layer.clone();
            }
            Some(d) if d != dump.dim || rec.layer != dump.layer => {
                return Err(Failure::usage(format!(
                    "{} holds {} x {} features, expected {} x {d}",
                    path.display(),
                    dump.layer,
                    dump.dim,
                    rec.layer
                )))
            }
            Some(_) => {}
        }
        for (id, values) in dump.records {
            let recording = id.rsplit_once('#').map_or(id.as_str(), |(r, _)| r).to_string();
            if !rec.windows.contains_key(&recording) {
                rec.order.push(recording.clone());
            }
            rec.windows.entry(recording).or_default().push(values);
        }
    }
    Ok(rec)
}

/// `(recording id, label)` pairs from an `audio,label` CSV.
fn load_labels(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read labels {}: {e}", path.display())))?;
    let manifest = Manifest::parse(&text, path.parent().unwrap_or(Path::new("")))?;
    if manifest.mode != ManifestMode::Labeled {
        return Err(Failure::usage(format!(
            "{} must have header `audio,label`",
            path.display()
        )));
    }
    Ok(manifest
        .rows
        .iter()
        .map(|r| (r.id(), r.label().expect("labeled mode").to_string()))
        .collect())
}

fn check_coverage(labels: &[(String, String)], rec: &Recordings) -> CmdResult {
    let mut labeled = std::collections::BTreeSet::new();
    for (id, _) in labels {
        if !labeled.insert(id) {
            return Err(Failure::usage(format!("recording `{id}` is labeled twice")));
        }
        if !rec.windows.contains_key(id) {
            return Err(Failure::usage(format!(
                "recording `{id}` has a label but no feature records"
            )));
        }
    }
    if let Some(extra) = rec.order.iter().find(|id| !labeled.contains(id)) {
        return Err(Failure::usage(format!("feature records for `{extra}` have no label")));
    }
    Ok(())
}

pub fn train(args: &SvmTrainArgs) -> CmdResult {
    let rec = load_features(&args.features)?;
    let labels = load_labels(&args.labels)?;
    check_coverage(&labels, &rec)?;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut groups = Vec::new();
    for (id, label) in &labels {
        for w in &rec.windows[id] {
            features.push(w.clone());
            targets.push(label.clone());
            groups.push(id.clone());
        }
    }
    let options = SvmOptions {
        c_grid: args.c_grid.clone(),
        folds: args.folds,
        seed: args.seed,
        ..SvmOptions::default()
    };
    let model = svm_train_grouped(&features, &targets, Some(&groups), &options)?;
    let json = serde_json::to_vec_pretty(&model).map_err(|e| Failure::runtime(e.to_string()))?;
    write_atomic(&args.output, &json)?;
    for (c, acc) in &model.cv_accuracy {
        println!("C={c}\tcv_accuracy={acc:.4}");
    }
    println!(
        "trained {} classes on {} windows from {} recordings ({}); chose C={}",
        model.classes.len(),
        features.len(),
        labels.len(),
        rec.layer,
        model.c
    );
    Ok(())
}

pub fn eval(args: &SvmEvalArgs) -> CmdResult {
    let bytes = std::fs::read(&args.model)
        .map_err(|e| Failure::usage(format!("cannot read model {}: {e}", args.model.display())))?;
    let model: SvmModel = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::usage(format!("{} is not a model file: {e}", args.model.display())))?;
    let rec = load_features(&args.features)?;
    let labels = load_labels(&args.labels)?;
    check_coverage(&labels, &rec)?;

    let mut cm = ConfusionMatrix::new(model.classes.clone());
    for (id, label) in &labels {
        let truth = model
            .classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Failure::usage(format!("label `{label}` of `{id}` is not a model class")))?;
        let p = classify_windows(&model, &rec.windows[id])?;
        cm.record(truth, p.class_index);
    }

    let mut out = String::from("class,accuracy,count\n");
    for (i, class) in model.classes.iter().enumerate() {
        let count: usize = cm.counts[i].iter().sum();
        let acc = cm.class_accuracy(i).map_or("n/a".to_string(), |a| format!("{a:.4}"));
        out.push_str(&format!("{class},{acc},{count}\n"));
    }
    out.push_str(&format!("overall,{:.4},{}\n\n", cm.accuracy(), cm.total()));
    out.push_str(&cm.to_csv());
    print!("{out}");
    if let Some(path) = &args.confusion {
        write_atomic(path, cm.to_csv().as_bytes())?;
    }
    Ok(())
}
