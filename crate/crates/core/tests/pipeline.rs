use std::sync::OnceLock;

use ctclass_core::classifier::{self, Hyper, LabeledTrack, ModelMeta, SvmModel};
use ctclass_core::detector::{detect, Annotations, DetectorParams, EventLog};
use ctclass_core::features::{feature_vector_with_t_m, SvmType, GV};
use ctclass_core::io::{self, FeatureTable, TableCurve};
use ctclass_core::model::{simulate, CtType, Regimes, SimConfig};
use ctclass_core::pipeline::{self, Corpus, CorpusConfig, Recording, SelectionCriteria, Source};
use ctclass_core::Trajectory;

fn small_config(n: usize) -> CorpusConfig {
    CorpusConfig {
        n_per_type: n,
        base_seed: 7,
        ..CorpusConfig::default()
    }
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| pipeline::generate_corpus(&small_config(16)).expect("corpus"))
}

fn table() -> &'static FeatureTable {
    static T: OnceLock<FeatureTable> = OnceLock::new();
    T.get_or_init(|| FeatureTable::from_tracks(&corpus().tracks, &[4.0, 8.0]).unwrap())
}

fn model() -> &'static SvmModel {
    static M: OnceLock<SvmModel> = OnceLock::new();
    M.get_or_init(|| {
        let s = classifier::samples_at(&corpus().tracks, 2.0, SvmType::All, 8.0).unwrap();
        let meta = ModelMeta {
            svm_type: SvmType::All,
            t_m: 8.0,
            t_eval: 2.0,
        };
        classifier::train(&s, 0, &Hyper::default(), meta).unwrap().model
    })
}

/// A long noise-induced run, observed through `x` only.
fn nct_recording(t_end: f64, seed: u64) -> (Recording, EventLog) {
    let r = Regimes::default();
    let sim = SimConfig {
        t_end,
        seed,
        ..SimConfig::default()
    };
    let tr = simulate(&r.params(CtType::Nct), &r.path(CtType::Nct), &sim).unwrap();
    let x = Trajectory::new(tr.t0(), tr.dt(), tr.into_values()).unwrap();
    let log = detect(&x, &DetectorParams::default()).unwrap();
    let rec = Recording {
        id: format!("nct{seed}"),
        trajectory: x,
        source: Source::Model,
        annotations: None,
    };
    (rec, log)
}

fn ensemble_mean(tracks: &[&LabeledTrack], i: usize, t: f64) -> f64 {
    let v: Vec<f64> = tracks.iter().map(|lt| lt.track.value(i, t).unwrap()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn corpus_counts_and_labels() {
    let c = corpus();
    for ty in CtType::ALL {
        assert_eq!(c.of_type(ty).count(), 16, "{ty}");
        assert_eq!(c.stats[ty.index()].accepted, 16);
    }
    for lt in &c.tracks {
        assert_eq!(lt.track.t_minus(), -30.0);
        assert_eq!(lt.track.t_plus(), 10.0);
    }
}

#[test]
fn corpus_is_reproducible() {
    let a = pipeline::generate_corpus(&small_config(3)).unwrap();
    let b = pipeline::generate_corpus(&small_config(3)).unwrap();
    let bytes = |c: &Corpus| {
        let mut v = Vec::new();
        FeatureTable::from_tracks(&c.tracks, &[8.0]).unwrap().write(&mut v).unwrap();
        v
    };
    assert_eq!(bytes(&a), bytes(&b));
    let mut other = small_config(3);
    other.base_seed = 8;
    let c = pipeline::generate_corpus(&other).unwrap();
    assert_ne!(bytes(&a), bytes(&c));
}

#[test]
fn ramp_onsets_come_late_and_bnct_first() {
    let [bct, bnct, _] = corpus().t1_by_type();
    assert!(bct.iter().chain(&bnct).all(|&t| t > 35.0), "{bct:?} {bnct:?}");
    let s_bct = pipeline::t1_statistics(&bct).unwrap();
    let s_bnct = pipeline::t1_statistics(&bnct).unwrap();
    assert!(s_bnct.mean < s_bct.mean, "{s_bnct:?} {s_bct:?}");
}

#[test]
fn feature_table_round_trip() {
    let t = table();
    let mut first = Vec::new();
    t.write(&mut first).unwrap();
    let back = FeatureTable::read(&first[..], "corpus.csv", t.dm).unwrap();
    let mut second = Vec::new();
    back.write(&mut second).unwrap();
    assert_eq!(first, second);
    assert_eq!(back.tracks.len(), t.tracks.len());
    assert_eq!(back.t_ms, vec![4.0, 8.0]);

    for (svm, tm, time) in [(SvmType::All, 8.0, 2.0), (SvmType::Slopes, 4.0, -3.0), (SvmType::Tsp, 8.0, 0.5)] {
        let direct = classifier::samples_at(&corpus().tracks, time, svm, tm).unwrap();
        let via = back.samples_at(time, svm, tm).unwrap();
        assert_eq!(direct, via, "{svm:?} t_m = {tm} T = {time}");
    }
    assert!(back.samples_at(2.0, SvmType::All, 12.0).is_err());
}

#[test]
fn model_file_round_trip() {
    let m = model();
    let text = io::model_to_toml(m).unwrap();
    let back = io::model_from_toml(&text).unwrap();
    assert_eq!(&back, m);
    for s in classifier::samples_at(&corpus().tracks, 2.0, SvmType::All, 8.0).unwrap() {
        assert_eq!(m.scores(&s.features).unwrap(), back.scores(&s.features).unwrap());
    }
}

fn curves_of(t: &FeatureTable, ty: CtType) -> Vec<TableCurve<'_>> {
    (0..t.tracks.len())
        .filter(|&k| t.tracks[k].label == ty)
        .map(|k| t.curve(k, 8.0).unwrap())
        .collect()
}

#[test]
fn mffe_identity_affine_and_separation() {
    let t = table();
    let bct = curves_of(t, CtType::Bct);
    let refs: Vec<&TableCurve> = bct.iter().collect();
    let same = pipeline::mffe(&refs, &refs, 2.0).unwrap();
    assert_eq!(same.mffe, 0.0);

    // A positive affine map of every feature leaves the normalised curves unchanged.
    let mut scaled = t.clone();
    for st in &mut scaled.tracks {
        for row in st.tsp.iter_mut().chain(st.slopes.iter_mut().flatten()) {
            for v in row.iter_mut() {
                *v = 3.0 * *v + 1.5;
            }
        }
    }
    let sc = curves_of(&scaled, CtType::Bct);
    let sc_refs: Vec<&TableCurve> = sc.iter().collect();
    let affine = pipeline::mffe(&sc_refs, &refs, 2.0).unwrap();
    assert!(affine.mffe < 1e-12, "{affine:?}");

    // Halves of one class fit each other better than another class.
    let (a, b) = refs.split_at(refs.len() / 2);
    let within = pipeline::mffe(a, b, 2.0).unwrap().mffe;
    let nct = curves_of(t, CtType::Nct);
    let nct_refs: Vec<&TableCurve> = nct.iter().collect();
    let across = pipeline::mffe(a, &nct_refs, 2.0).unwrap().mffe;
    println!("mffe within BCT {within:.4}, BCT vs NCT {across:.4}");
    assert!(across > within, "{across} <= {within}");

    assert!(pipeline::mffe::<TableCurve, TableCurve>(&[], &refs, 2.0).is_err());
}

#[test]
fn feature_ensembles_show_the_state_change() {
    let c = corpus();
    let by = |ty| c.of_type(ty).collect::<Vec<_>>();
    for ty in CtType::ALL {
        let tr = by(ty);
        // Far enough before onset that the ramps are still well inside NS.
        let ns = ensemble_mean(&tr, GV, -20.0);
        let s = ensemble_mean(&tr, GV, 8.0);
        println!("{ty}: GV before {ns:.4e}, after {s:.4e}");
        assert!(s > 10.0 * ns, "{ty}: {s} vs {ns}");
        // Lag-one autocorrelation of a smooth oscillation sampled at 1 kHz.
        assert!(ensemble_mean(&tr, 2, 5.0) > 0.95);
        // Variance rises across the onset.
        for k in 0..=5 {
            let m = ensemble_mean(&tr, 4, k as f64);
            assert!(m > 0.0, "{ty}: m_gv at T = {k} is {m}");
        }
    }
    // Pre-onset variance trend: the ramp regimes show critical slowing
    // down, the noise-induced regime does not.
    let trend = |ty| {
        let tr = by(ty);
        ensemble_mean(&tr, 5, -2.0)
    };
    let (b, bn, n) = (trend(CtType::Bct), trend(CtType::Bnct), trend(CtType::Nct));
    println!("m_log10gv at T = -2: BCT {b:.4}, BNCT {bn:.4}, NCT {n:.4}");
    assert!(b > 3.0 * n.abs(), "{b} vs {n}");
}

#[test]
fn classified_items_rederive_from_the_model_file() {
    let (rec, log) = nct_recording(4000.0, 11);
    let crit = SelectionCriteria::new(-8.0, 2.0);
    let f = pipeline::filter_cts(&log, None, &crit);
    assert_eq!(f.kept.len() + f.excluded.iter().sum::<usize>(), f.n_det);
    let m = model();
    let rep = pipeline::classify_filtered(&f, &rec, m, &[2.0], &Default::default(), &crit).unwrap();
    assert!(rep.n_filt <= f.kept.len());
    assert_eq!(rep.counts[0].1.iter().sum::<usize>(), rep.n_filt);
    let back = io::model_from_toml(&io::model_to_toml(m).unwrap()).unwrap();
    let w = Default::default();
    let signal = rec.feature_signal(&w).unwrap();
    for item in &rep.items {
        assert_eq!(back.predict(&item.features).unwrap(), item.predicted);
        let ft = ctclass_core::features::feature_track(&signal, item.t1, -8.0, 2.0, &w).unwrap();
        let again = feature_vector_with_t_m(&ft, item.t_eval, SvmType::All, 8.0).unwrap();
        assert_eq!(again, item.features);
    }
}

#[test]
fn nothing_passes_gives_empty_report() {
    let (rec, log) = nct_recording(200.0, 3);
    let crit = SelectionCriteria::new(-8.0, 2.0);
    let none = Annotations::new(vec![]).unwrap();
    // Without any annotated seizure every onset fails C3.
    let f = pipeline::filter_cts(&log, Some(&none), &crit);
    assert!(f.kept.is_empty());
    let rep = pipeline::classify_filtered(&f, &rec, model(), &[2.0], &Default::default(), &crit).unwrap();
    assert_eq!(rep.n_filt, 0);
    assert_eq!(rep.prop_filt(), 0.0);
    assert_eq!(rep.proportions(0), [0.0; 3]);
    assert!(rep.items.is_empty());
}

#[test]
fn noise_induced_recording_is_classified_as_nct() {
    let (rec, log) = nct_recording(8000.0, 5);
    let grid = [-16.0, -12.0, -8.0];
    let rows = pipeline::sweep_t_minus(&rec, &log, model(), &grid, 2.0, &Default::default(), &SelectionCriteria::default())
        .unwrap();
    for r in &rows {
        println!("{r:?}");
        assert!(r.n_filt > 0);
        // The corpus behind the model is small, so ask for a clear majority.
        assert!(r.props[2] >= 0.75, "{r:?}");
    }
    // A longer clean history can only exclude more.
    assert!(rows.windows(2).all(|w| w[0].n_filt <= w[1].n_filt));
}

#[test]
fn held_out_recall_per_class() {
    let s = classifier::samples_at(&corpus().tracks, 2.0, SvmType::All, 8.0).unwrap();
    let meta = ModelMeta {
        svm_type: SvmType::All,
        t_m: 8.0,
        t_eval: 2.0,
    };
    let rep = classifier::train(&s, 0, &Hyper::default(), meta).unwrap();
    let test: Vec<_> = rep.test_idx.iter().map(|&i| s[i].clone()).collect();
    let conf = rep.model.confusion(&test).unwrap();
    for (c, row) in conf.iter().enumerate() {
        let n: usize = row.iter().sum();
        assert!(n > 0);
        let recall = row[c] as f64 / n as f64;
        assert!(recall >= 0.75, "class {c}: {conf:?}");
    }
}
