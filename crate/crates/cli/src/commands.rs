use std::path::{Path, PathBuf};

use ctclass_core::classifier::{self, LabeledTrack, ModelMeta, SvmModel};
use ctclass_core::config::RunConfig;
use ctclass_core::detector::{self, Annotations, EventLog};
use ctclass_core::features::{feature_track, FeatureCurve, SvmType};
use ctclass_core::io::{self, fmt_f64, FeatureTable, TableCurve};
use ctclass_core::model::{self, CtType};
use ctclass_core::pipeline::{self, Recording, SelectionCriteria, Source};
use ctclass_core::{Error, Trajectory};
use log::warn;

use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::manifest::{Ctx, FileHash, Manifest};

const EPS: f64 = 1e-9;

pub fn run(cmd: &Command) -> CliResult<PathBuf> {
    match cmd {
        Command::Rerun(a) => rerun(a),
        _ => {
            let common = common(cmd).expect("not a rerun");
            let cfg = load_config(common.config.as_deref())?;
            execute(cmd, cfg, common.out.clone(), None)
        }
    }
}

fn common(cmd: &Command) -> Option<&Common> {
    Some(match cmd {
        Command::Simulate(a) => &a.common,
        Command::Detect(a) => &a.common,
        Command::Features(a) => &a.common,
        Command::Corpus(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Classify(a) => &a.common,
        Command::Report(a) => &a.common,
        Command::Rerun(_) => return None,
    })
}

fn common_mut(cmd: &mut Command) -> Option<&mut Common> {
    Some(match cmd {
        Command::Simulate(a) => &mut a.common,
        Command::Detect(a) => &mut a.common,
        Command::Features(a) => &mut a.common,
        Command::Corpus(a) => &mut a.common,
        Command::Train(a) => &mut a.common,
        Command::Classify(a) => &mut a.common,
        Command::Report(a) => &mut a.common,
        Command::Rerun(_) => return None,
    })
}

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::io(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))
        }
        None => Ok(RunConfig::default()),
    }
}

fn execute(cmd: &Command, cfg: RunConfig, out: PathBuf, expected: Option<Vec<FileHash>>) -> CliResult<PathBuf> {
    let mut ctx = Ctx::new(cfg, out, expected)?;
    match cmd {
        Command::Simulate(a) => simulate(&mut ctx, a)?,
        Command::Detect(a) => detect(&mut ctx, a)?,
        Command::Features(a) => features(&mut ctx, a)?,
        Command::Corpus(a) => corpus(&mut ctx, a)?,
        Command::Train(a) => train(&mut ctx, a)?,
        Command::Classify(a) => classify(&mut ctx, a)?,
        Command::Report(a) => report(&mut ctx, a)?,
        Command::Rerun(_) => unreachable!("handled by run"),
    }
    ctx.finish(cmd)
}

fn rerun(a: &RerunArgs) -> CliResult<PathBuf> {
    let m = Manifest::load(&a.manifest)?;
    let cfg = RunConfig::from_toml(&m.config)
        .map_err(|e| CliError::validation(format!("{}: {e}", a.manifest.display())))?;
    if crate::manifest::sha256_hex(m.config.as_bytes()) != m.config_sha256 {
        warn!("configuration in {} does not match its recorded hash", a.manifest.display());
    }
    let mut cmd = m.command.clone();
    let common = common_mut(&mut cmd).ok_or_else(|| CliError::validation("a manifest cannot record a rerun"))?;
    if let Some(out) = &a.out {
        common.out = out.clone();
    }
    let out = common.out.clone();
    execute(&cmd, cfg, out, Some(m.inputs))
}

fn or_default(p: &Option<PathBuf>, ctx: &Ctx, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| ctx.out_path(name))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn read_trajectory(ctx: &mut Ctx, path: &Path) -> CliResult<Trajectory> {
    let b = ctx.read_input("trajectory", path)?;
    Ok(io::read_trajectory(&b[..], &display(path), Some(ctx.cfg.sim.dt))?)
}

fn read_annotations(ctx: &mut Ctx, path: &Path) -> CliResult<Annotations> {
    let b = ctx.read_input("annotations", path)?;
    Ok(io::read_annotations(&b[..], &display(path))?)
}

fn read_events(ctx: &mut Ctx, path: &Path) -> CliResult<EventLog> {
    let b = ctx.read_input("events", path)?;
    Ok(io::read_event_log(&b[..], &display(path))?)
}

fn read_model(ctx: &mut Ctx, path: &Path) -> CliResult<SvmModel> {
    let b = ctx.read_input("model", path)?;
    let text = String::from_utf8(b).map_err(|_| CliError::validation(format!("{} is not UTF-8", display(path))))?;
    io::model_from_toml(&text).map_err(|e| CliError::validation(format!("{}: {e}", display(path))))
}

fn read_feature_table(ctx: &mut Ctx, role: &str, path: &Path) -> CliResult<FeatureTable> {
    let b = ctx.read_input(role, path)?;
    Ok(FeatureTable::read(&b[..], &display(path), ctx.cfg.window.dm)?)
}

fn regime_type(r: Regime) -> CtType {
    match r {
        Regime::Bct => CtType::Bct,
        Regime::Bnct => CtType::Bnct,
        Regime::Nct => CtType::Nct,
    }
}

/// Model output carries the `y` channel; anything else is treated as a
/// measurement unless the source is given.
fn source_of(arg: Option<SourceArg>, tr: &Trajectory) -> Source {
    match arg {
        Some(SourceArg::Model) => Source::Model,
        Some(SourceArg::External) => Source::External,
        None if tr.y().is_some() => Source::Model,
        None => Source::External,
    }
}

fn recording_id(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("recording").to_string()
}

/// `start:stop:step`, both ends included.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::validation(format!("expected START:STOP:STEP, got '{spec}'"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [a, b, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0 && a.is_finite() && b >= a) {
        return Err(bad());
    }
    let n = ((b - a) / step + EPS).floor() as usize;
    Ok((0..=n).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Multiples of `step` in `[lo, hi]`.
fn step_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k0 = (lo / step - EPS).ceil() as i64;
    let k1 = (hi / step + EPS).floor() as i64;
    (k0..=k1).map(|k| k as f64 * step).collect()
}

fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> CliResult<()> {
    if let Some(t) = a.t_end {
        ctx.cfg.sim.t_end = t;
    }
    if let Some(s) = a.seed {
        ctx.cfg.sim.seed = s;
    }
    ctx.cfg.validate()?;
    let ty = regime_type(a.regime);
    let (params, path) = (ctx.cfg.params(ty), ctx.cfg.path(ty));
    let tr = model::simulate(&params, &path, &ctx.cfg.sim)?;
    ctx.write_with("trajectory", "trajectory.csv", |w| io::write_trajectory(w, &tr))?;
    ctx.result("regime", ty.as_str());
    ctx.result("params", params);
    ctx.result("path", path);
    ctx.result("seed", ctx.cfg.sim.seed);
    ctx.result("n_samples", tr.len());
    println!("simulated {} ({} samples, seed {})", ty, tr.len(), ctx.cfg.sim.seed);
    Ok(())
}

fn detect(ctx: &mut Ctx, a: &DetectArgs) -> CliResult<()> {
    if let Some(alpha) = a.alpha {
        ctx.cfg.detector = ctx.cfg.detector.with_alpha(alpha);
    }
    ctx.cfg.validate()?;
    let grid = a.tune_alpha.as_deref().map(parse_grid).transpose()?;
    if grid.is_some() && a.annotations.is_none() {
        return Err(CliError::validation("--tune-alpha needs --annotations"));
    }
    let input = or_default(&a.input, ctx, "trajectory.csv");
    let tr = read_trajectory(ctx, &input)?;
    let ann = match &a.annotations {
        Some(p) => Some(read_annotations(ctx, p)?),
        None => None,
    };
    if let (Some(grid), Some(ann)) = (&grid, &ann) {
        let sweep = detector::tune_alpha(&tr, ann, &ctx.cfg.detector, grid)?;
        let rows: Vec<Vec<f64>> = sweep.scores.iter().map(|&(al, s)| vec![al, s as f64]).collect();
        ctx.write_with("alpha_sweep", "alpha_sweep.csv", |w| io::write_table(w, &["alpha", "score"], &rows))?;
        ctx.cfg.detector = ctx.cfg.detector.with_alpha(sweep.best);
        println!("tuned alpha = {}", sweep.best);
    }
    let log = detector::detect(&tr, &ctx.cfg.detector)?;
    ctx.write_with("events", "events.csv", |w| io::write_event_log(w, &log))?;
    ctx.result("alpha", ctx.cfg.detector.alpha);
    ctx.result("beta", ctx.cfg.detector.beta);
    ctx.result("n_onsets", log.onsets.len());
    ctx.result("n_almost_onsets", log.almost_onsets.len());
    ctx.result("n_artefacts", log.artefacts.len());
    if let Some(ann) = &ann {
        let r = detector::overlap_score(&log, ann, ctx.cfg.selection.min_overlap_frac);
        ctx.result("n_correct", r.n_correct);
        ctx.result("n_false", r.n_false);
    }
    println!("detected {} transitions", log.onsets.len());
    Ok(())
}

fn criteria(base: SelectionCriteria, t_minus: Option<f64>, t_plus: Option<f64>) -> SelectionCriteria {
    SelectionCriteria {
        t_minus: t_minus.unwrap_or(base.t_minus),
        t_plus: t_plus.unwrap_or(base.t_plus),
        ..base
    }
}

fn features(ctx: &mut Ctx, a: &FeaturesArgs) -> CliResult<()> {
    ctx.cfg.classify.criteria = criteria(ctx.cfg.classify.criteria, a.t_minus, a.t_plus);
    if let Some(tm) = a.t_m {
        ctx.cfg.train.t_m = tm;
        if !ctx.cfg.corpus.t_m_list.iter().any(|&v| (v - tm).abs() < EPS) {
            ctx.cfg.corpus.t_m_list.push(tm);
        }
    }
    ctx.cfg.validate()?;
    let crit = ctx.cfg.classify.criteria;
    let w = ctx.cfg.window.with_t_m(ctx.cfg.train.t_m);
    let input = or_default(&a.input, ctx, "trajectory.csv");
    let tr = read_trajectory(ctx, &input)?;
    let onsets = if a.t1.is_empty() {
        let events = or_default(&a.events, ctx, "events.csv");
        let log = read_events(ctx, &events)?;
        pipeline::filter_cts(&log, None, &crit).kept
    } else {
        a.t1.clone()
    };
    let rec = Recording {
        id: recording_id(&input),
        source: source_of(a.source, &tr),
        trajectory: tr,
        annotations: None,
    };
    let signal = rec.feature_signal(&w)?;
    let mut index = Vec::new();
    for (i, &t1) in onsets.iter().enumerate() {
        match feature_track(&signal, t1, crit.t_minus, crit.t_plus, &w) {
            Ok(ft) => {
                let name = format!("features_{i:03}.csv");
                ctx.write_with("features", &name, |out| io::write_feature_track(out, &ft))?;
                index.push(vec![i.to_string(), fmt_f64(t1), name]);
            }
            Err(e) => {
                warn!("no features for the onset at t = {t1}: {e}");
                index.push(vec![i.to_string(), fmt_f64(t1), String::new()]);
            }
        }
    }
    ctx.write_with("features_index", "features_index.csv", |out| {
        io::write_text_table(out, &["index", "t1", "file"], &index)
    })?;
    ctx.result("n_onsets", onsets.len());
    println!("wrote features for {} onsets", onsets.len());
    Ok(())
}

fn corpus(ctx: &mut Ctx, a: &CorpusArgs) -> CliResult<()> {
    if let Some(n) = a.n_per_type {
        ctx.cfg.corpus.n_per_type = n;
    }
    if let Some(s) = a.seed {
        ctx.cfg.corpus.seed = s;
    }
    ctx.cfg.validate()?;
    let c = pipeline::generate_corpus(&ctx.cfg.corpus_config())?;
    let table = FeatureTable::from_tracks(&c.tracks, &ctx.cfg.corpus.t_m_list)?;
    ctx.write_with("corpus", "corpus.csv", |w| table.write(w))?;
    let mut header = vec!["type", "runs", "candidates", "accepted", "no_onset", "diverged"];
    header.extend(["c1", "c2", "c3", "c4", "c5", "sim_time"]);
    let rows: Vec<Vec<String>> = CtType::ALL
        .iter()
        .map(|ty| {
            let s = &c.stats[ty.index()];
            let mut r = vec![ty.as_str().to_string()];
            r.extend([s.runs, s.candidates, s.accepted, s.no_onset, s.diverged].map(|v| v.to_string()));
            r.extend(s.rejected.iter().map(|v| v.to_string()));
            r.push(fmt_f64(s.sim_time));
            r
        })
        .collect();
    ctx.write_with("corpus_stats", "corpus_stats.csv", |w| io::write_text_table(w, &header, &rows))?;
    for (i, t1s) in c.t1_by_type().iter().enumerate() {
        let ty = CtType::from_index(i).expect("class index");
        if let Ok(s) = pipeline::t1_statistics(t1s) {
            ctx.result(&format!("t1_mean_{}", ty.as_str()), s.mean);
        }
    }
    ctx.result("n_tracks", c.tracks.len());
    println!("corpus: {} transitions", c.tracks.len());
    Ok(())
}

fn train(ctx: &mut Ctx, a: &TrainArgs) -> CliResult<()> {
    if let Some(n) = a.svm_type {
        ctx.cfg.train.svm_type = SvmType::from_number(n)?;
    }
    if let Some(tm) = a.t_m {
        ctx.cfg.train.t_m = tm;
    }
    if let Some(t) = a.t_eval {
        ctx.cfg.train.t_eval = t;
    }
    if let Some(s) = a.split_seed {
        ctx.cfg.train.split_seed = s;
    }
    ctx.cfg.validate()?;
    let path = or_default(&a.corpus, ctx, "corpus.csv");
    let table = read_feature_table(ctx, "corpus", &path)?;
    let t = ctx.cfg.train.clone();
    let meta = ModelMeta {
        svm_type: t.svm_type,
        t_m: t.t_m,
        t_eval: t.t_eval,
    };
    let samples = table.samples_at(t.t_eval, t.svm_type, t.t_m)?;
    let rep = classifier::train(&samples, t.split_seed, &t.hyper, meta)?;
    let text = io::model_to_toml(&rep.model)?;
    ctx.write_output("model", "model.toml", text.as_bytes())?;

    let grid: Vec<f64> = table
        .common_times(t.svm_type, t.t_m)?
        .into_iter()
        .filter(|&v| ((v / t.curve_step) - (v / t.curve_step).round()).abs() < 1e-6)
        .map(|v| (v / t.curve_step).round() * t.curve_step)
        .collect();
    let curve = classifier::accuracy_curve_with(
        |tv| table.samples_at(tv, t.svm_type, t.t_m),
        t.svm_type,
        t.t_m,
        &grid,
        &t.hyper,
        t.split_seed,
    )?;
    let rows: Vec<Vec<f64>> = curve.iter().map(|&(tv, acc)| vec![tv, acc]).collect();
    ctx.write_with("accuracy", "accuracy.csv", |w| io::write_table(w, &["T", "accuracy"], &rows))?;
    ctx.result("test_accuracy", rep.test_accuracy);
    ctx.result("n_train", rep.train_idx.len());
    ctx.result("n_test", rep.test_idx.len());
    println!(
        "type-{} model at T = {}: held-out accuracy {:.3}",
        t.svm_type.number(),
        t.t_eval,
        rep.test_accuracy
    );
    Ok(())
}

/// Evaluation times for a classification: multiples of the curve step
/// from the first time every feature of the model is defined up to `T⁺`.
fn eval_times(cfg: &RunConfig, model: &SvmModel, crit: &SelectionCriteria) -> CliResult<Vec<f64>> {
    let w = &cfg.window;
    let lead = if model.meta.svm_type.uses_slopes() { model.meta.t_m } else { 0.0 };
    let earliest = crit.t_minus + 2.0 * w.t_w + lead;
    let mut grid = step_grid(earliest, crit.t_plus, cfg.train.curve_step);
    if grid.last().is_none_or(|&t| t < crit.t_plus - EPS) && crit.t_plus >= earliest - EPS {
        grid.push(crit.t_plus);
    }
    if grid.is_empty() {
        return Err(CliError::validation(format!(
            "features are undefined before T = {earliest}, after T+ = {}",
            crit.t_plus
        )));
    }
    Ok(grid)
}

fn classify(ctx: &mut Ctx, a: &ClassifyArgs) -> CliResult<()> {
    ctx.cfg.classify.criteria = criteria(ctx.cfg.classify.criteria, a.t_minus, a.t_plus);
    ctx.cfg.validate()?;
    let model_path = or_default(&a.model, ctx, "model.toml");
    let model = read_model(ctx, &model_path)?;
    let crit = ctx.cfg.classify.criteria;
    let w = ctx.cfg.window;
    crit.validate(&w.with_t_m(model.meta.t_m))?;
    let t_evals = eval_times(&ctx.cfg, &model, &crit)?;

    let input = or_default(&a.input, ctx, "trajectory.csv");
    let tr = read_trajectory(ctx, &input)?;
    let ann = match &a.annotations {
        Some(p) => Some(read_annotations(ctx, p)?),
        None => None,
    };
    let events = or_default(&a.events, ctx, "events.csv");
    let log = read_events(ctx, &events)?;
    let rec = Recording {
        id: recording_id(&input),
        source: source_of(a.source, &tr),
        trajectory: tr,
        annotations: ann,
    };
    rec.check_dt(ctx.cfg.sim.dt)?;

    let filtered = pipeline::filter_cts(&log, rec.annotations.as_ref(), &crit);
    let rep = pipeline::classify_filtered(&filtered, &rec, &model, &t_evals, &w, &crit)?;
    for (t1, why) in &rep.dropped {
        warn!("onset at t = {t1} dropped: {why}");
    }

    let mut screen = vec![rep.n_det as f64, rep.n_filt as f64];
    screen.extend(rep.excluded.iter().map(|&v| v as f64));
    screen.push(rep.dropped.len() as f64);
    ctx.write_with("screening", "screening.csv", |out| {
        io::write_table(
            out,
            &["n_det", "n_filt", "c1", "c2", "c3", "c4", "c5", "n_dropped"],
            &[screen],
        )
    })?;

    let counts: Vec<Vec<f64>> = rep
        .counts
        .iter()
        .map(|(t, c)| vec![*t, c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    ctx.write_with("counts", "counts.csv", |out| {
        io::write_table(out, &["T", "n_bct", "n_bnct", "n_nct"], &counts)
    })?;

    let names = model.meta.svm_type.names();
    let mut header = vec!["recording", "t1", "T", "predicted"];
    header.extend(names);
    let rows: Vec<Vec<String>> = rep
        .items
        .iter()
        .map(|c| {
            let mut r = vec![c.recording_id.clone(), fmt_f64(c.t1), fmt_f64(c.t_eval), c.predicted.as_str().into()];
            r.extend(c.features.iter().map(|&v| fmt_f64(v)));
            r
        })
        .collect();
    ctx.write_with("classified", "classified.csv", |out| io::write_text_table(out, &header, &rows))?;

    let sweep = pipeline::sweep_t_minus(&rec, &log, &model, &ctx.cfg.classify.t_minus_grid, crit.t_plus, &w, &crit)?;
    let rows: Vec<Vec<f64>> = sweep
        .iter()
        .map(|r| vec![r.t_minus, r.prop_filt, r.props[0], r.props[1], r.props[2]])
        .collect();
    ctx.write_with("sweep", "sweep.csv", |out| {
        io::write_table(out, &["Tminus", "prop_filt", "prop_bct", "prop_bnct", "prop_nct"], &rows)
    })?;

    // Tracks of the classified onsets, labelled with the prediction at T⁺.
    let t_last = *t_evals.last().expect("non-empty");
    let signal = rec.feature_signal(&w)?;
    let wm = w.with_t_m(model.meta.t_m);
    let mut tracks = Vec::new();
    for c in rep.items.iter().filter(|c| c.t_eval == t_last) {
        tracks.push(LabeledTrack {
            track: feature_track(&signal, c.t1, crit.t_minus, crit.t_plus, &wm)?,
            label: c.predicted,
            t1: c.t1,
            source_id: c.recording_id.clone(),
        });
    }
    if tracks.is_empty() {
        warn!("no transition survived screening; classified_tracks.csv is not written");
    } else {
        let table = FeatureTable::from_tracks(&tracks, &[model.meta.t_m])?;
        ctx.write_with("classified_tracks", "classified_tracks.csv", |out| table.write(out))?;
    }

    ctx.result("n_det", rep.n_det);
    ctx.result("n_filt", rep.n_filt);
    ctx.result("excluded", rep.excluded);
    ctx.result("counts_at_Tplus", rep.counts.last().map(|c| c.1));
    println!(
        "{} detected, {} classified; at T = {t_last}: {:?}",
        rep.n_det,
        rep.n_filt,
        rep.counts.last().map(|c| c.1).unwrap_or_default()
    );
    Ok(())
}

fn report(ctx: &mut Ctx, a: &ReportArgs) -> CliResult<()> {
    if !a.mpi && !a.mffe {
        return Err(CliError::validation("choose at least one of --mpi and --mffe"));
    }
    if let Some(n) = a.n_perms {
        ctx.cfg.train.n_perms = n;
    }
    ctx.cfg.validate()?;
    let corpus_path = or_default(&a.corpus, ctx, "corpus.csv");
    let corpus = read_feature_table(ctx, "corpus", &corpus_path)?;
    if a.mpi {
        let model_path = or_default(&a.model, ctx, "model.toml");
        let model = read_model(ctx, &model_path)?;
        report_mpi(ctx, &corpus, &model)?;
    }
    if a.mffe {
        let path = or_default(&a.classified, ctx, "classified_tracks.csv");
        let classified = read_feature_table(ctx, "classified_tracks", &path)?;
        report_mffe(ctx, &corpus, &classified)?;
    }
    Ok(())
}

fn report_mpi(ctx: &mut Ctx, corpus: &FeatureTable, model: &SvmModel) -> CliResult<()> {
    let m = model.meta;
    let samples = corpus.samples_at(m.t_eval, m.svm_type, m.t_m)?;
    let labels: Vec<CtType> = samples.iter().map(|s| s.label).collect();
    let (_, test_idx) = classifier::stratified_split(&labels, 0.7, ctx.cfg.train.split_seed);
    let test: Vec<_> = test_idx.iter().map(|&i| samples[i].clone()).collect();
    let r = classifier::permutation_importance(model, &test, ctx.cfg.train.n_perms, ctx.cfg.train.perm_seed)?;
    let rows: Vec<Vec<String>> = m
        .svm_type
        .names()
        .iter()
        .enumerate()
        .map(|(j, n)| vec![n.to_string(), fmt_f64(r.mean[j]), fmt_f64(r.std[j])])
        .collect();
    ctx.write_with("mpi", "mpi.csv", |w| io::write_text_table(w, &["feature", "mpi", "std"], &rows))?;
    let top = (0..r.mean.len())
        .max_by(|&i, &j| r.mean[i].total_cmp(&r.mean[j]))
        .map(|j| m.svm_type.names()[j]);
    ctx.result("baseline_accuracy", r.baseline);
    ctx.result("n_perms", r.n_perms);
    ctx.result("most_important", top);
    println!("baseline accuracy {:.3}; most important feature {}", r.baseline, top.unwrap_or("-"));
    Ok(())
}

fn report_mffe(ctx: &mut Ctx, corpus: &FeatureTable, classified: &FeatureTable) -> CliResult<()> {
    let t_m = *classified
        .t_ms
        .first()
        .ok_or_else(|| CliError::validation("classified tracks carry no slope length"))?;
    let refs: Vec<(CtType, TableCurve)> = (0..corpus.tracks.len())
        .map(|k| Ok((corpus.tracks[k].label, corpus.curve(k, t_m)?)))
        .collect::<Result<_, Error>>()?;
    let cls: Vec<(CtType, TableCurve)> = (0..classified.tracks.len())
        .map(|k| Ok((classified.tracks[k].label, classified.curve(k, t_m)?)))
        .collect::<Result<_, Error>>()?;
    let lo = cls.iter().map(|(_, c)| c.first_defined(0)).fold(f64::INFINITY, f64::min);
    let hi = cls.iter().map(|(_, c)| c.last_time()).fold(f64::NEG_INFINITY, f64::max);
    let grid = step_grid(lo, hi, ctx.cfg.train.curve_step);
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        let mut row = vec![t];
        for ty in CtType::ALL {
            let a: Vec<&TableCurve> = cls.iter().filter(|(l, _)| *l == ty).map(|(_, c)| c).collect();
            let b: Vec<&TableCurve> = refs.iter().filter(|(l, _)| *l == ty).map(|(_, c)| c).collect();
            let v = if a.is_empty() || b.is_empty() {
                f64::NAN
            } else {
                match pipeline::mffe(&a, &b, t) {
                    Ok(e) => e.mffe,
                    Err(Error::InsufficientData(_)) => f64::NAN,
                    Err(e) => return Err(e.into()),
                }
            };
            row.push(v);
        }
        rows.push(row);
    }
    ctx.write_with("mffe", "mffe.csv", |w| {
        io::write_table(w, &["T", "mffe_bct", "mffe_bnct", "mffe_nct"], &rows)
    })?;
    ctx.result("n_classified", cls.len());
    println!("mffe over {} times for {} classified transitions", grid.len(), cls.len());
    Ok(())
}
