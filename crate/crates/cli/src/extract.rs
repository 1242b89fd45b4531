use soundnet::audio::{extract_windows, load_wav, preprocess, window_samples, TARGET_RATE};
use soundnet::features::{extract_features, feature_dim, FeatureOptions};
use soundnet::formats::manifest::recording_id;
use soundnet::formats::{load_checkpoint, FeatureDumpWriter, Manifest};

use crate::{warn, CmdResult, ExtractArgs, Failure};

pub fn run(args: &ExtractArgs) -> CmdResult {
    let ck = load_checkpoint(&args.checkpoint)?;
    let options = FeatureOptions {
        mean_over_time: args.mean_over_time,
    };
    let win = window_samples(args.window_seconds, TARGET_RATE)?;
    let dim = feature_dim(&ck.network, &args.layer, win, options)?;

    let mut paths = args.audio.clone();
    if let Some(m) = &args.manifest {
        if !m.exists() {
            return Err(Failure::usage(format!("manifest not found: {}", m.display())));
        }
        paths.extend(Manifest::load(m)?.rows.into_iter().map(|r| r.audio));
    }
    if paths.is_empty() {
        return Err(Failure::usage("no audio files given"));
    }

    let mut writer = FeatureDumpWriter::create(&args.output, &args.layer, dim)?;
    let mut ok = 0;
    for path in &paths {
        let windows = load_wav(path)
            .and_then(|w| preprocess(&w))
            .and_then(|w| extract_windows(&w, args.window_seconds, args.overlap));
        let windows = match windows {
            Ok(w) => w,
            Err(e) => {
                warn(format!("skipping {}: {e}", path.display()));
                continue;
            }
        };
        let id = recording_id(path);
        let ids: Vec<String> = (0..windows.len()).map(|k| format!("{id}#{k}")).collect();
        for f in extract_features(&ck.network, &ck.params, &args.layer, &windows, &ids, options)? {
            writer.write(&f)?;
        }
        ok += 1;
    }
    if ok == 0 {
        return Err(Failure::runtime("none of the audio files could be read"));
    }
    let records = writer.records();
    writer.finish()?;
    println!(
        "wrote {records} windows from {ok} recordings ({} x {dim}) to {}",
        args.layer,
        args.output.display()
    );
    Ok(())
}
