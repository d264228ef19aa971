//! End-to-end orchestration: labelled training corpus from the model,
//! screening of detected transitions in a recording, classification and
//! summary statistics.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{LabeledTrack, SvmModel};
use crate::detector::{detect, Annotations, DetectorParams, Event, EventLog, RelayDetector};
use crate::error::{Error, Result};
use crate::features::{detrend, feature_track, feature_vector_with_t_m, FeatureCurve, WindowConfig, FEATURE_NAMES};
use crate::model::{derive_seed, simulate, CtType, ModelParams, Regimes, SimConfig, Simulator};
use crate::trajectory::Trajectory;

const EPS: f64 = 1e-9;
const CHUNK: usize = 1 << 16;

/// Window around a transition that must be clean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionCriteria {
    pub t_minus: f64,
    pub t_plus: f64,
    /// Reject transitions with an almost-occurring onset in `[T⁻, 0)`.
    pub require_no_almost: bool,
    /// Minimum fraction of a detected interval that must overlap an
    /// annotation; zero accepts any overlap.
    pub min_overlap_frac: f64,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria {
            t_minus: -30.0,
            t_plus: 10.0,
            require_no_almost: true,
            min_overlap_frac: 0.0,
        }
    }
}

impl SelectionCriteria {
    pub fn new(t_minus: f64, t_plus: f64) -> Self {
        SelectionCriteria {
            t_minus,
            t_plus,
            ..SelectionCriteria::default()
        }
    }

    /// Check the window against the feature arithmetic: every feature must
    /// be available somewhere in `[T⁻ + 2t_w + t_m, T⁺]`.
    pub fn validate(&self, w: &WindowConfig) -> Result<()> {
        if !(self.t_minus < 0.0 && self.t_plus > 0.0) {
            return Err(Error::invalid("need T- < 0 < T+"));
        }
        if self.t_minus + 2.0 * w.t_w + w.t_m > self.t_plus + EPS {
            return Err(Error::invalid(format!(
                "T- = {} leaves no time with all features defined before T+ = {} (needs T- <= T+ - 2 t_w - t_m)",
                self.t_minus, self.t_plus
            )));
        }
        if !(0.0..=1.0).contains(&self.min_overlap_frac) {
            return Err(Error::invalid("min_overlap_frac must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Why a detected onset was not used. For recordings the first five map to
/// the screening conditions C1 to C5 and are checked in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Exclusion {
    /// `[T⁻, 0)` is not entirely NS inside the analysed record.
    NotNsBefore,
    /// `[0, T⁺]` is not entirely S inside the analysed record.
    NotSAfter,
    /// No overlap with an annotated seizure.
    NoAnnotation,
    /// An artefact intersects `[T⁻, 0)`.
    Artefact,
    /// An almost-occurring onset lies in `[T⁻, 0)`.
    AlmostOnset,
}

impl Exclusion {
    pub const ALL: [Exclusion; 5] = [
        Exclusion::NotNsBefore,
        Exclusion::NotSAfter,
        Exclusion::NoAnnotation,
        Exclusion::Artefact,
        Exclusion::AlmostOnset,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        ["C1", "C2", "C3", "C4", "C5"][self.index()]
    }
}

/// Screen onset `k` of `log`. `ann = None` skips the annotation test.
fn screen(log: &EventLog, k: usize, crit: &SelectionCriteria, ann: Option<&Annotations>) -> Option<Exclusion> {
    let t1 = log.onsets[k];
    let lo = t1 + crit.t_minus;
    let hi = t1 + crit.t_plus;

    let prev_offset = if k > 0 { log.offsets.get(k - 1).copied() } else { None };
    if lo < log.t_start - EPS || prev_offset.is_some_and(|t2| t2 > lo + EPS) {
        return Some(Exclusion::NotNsBefore);
    }
    let s_ok = match log.offsets.get(k) {
        Some(&t2) => t2 >= hi - EPS,
        None => hi <= log.t_end + EPS,
    };
    if !s_ok {
        return Some(Exclusion::NotSAfter);
    }
    if let Some(ann) = ann {
        let t2 = log.offsets.get(k).copied().unwrap_or(log.t_end);
        let ok = match ann.overlap(t1, t2) {
            Some(len) => crit.min_overlap_frac <= 0.0 || len >= crit.min_overlap_frac * (t2 - t1),
            None => false,
        };
        if !ok {
            return Some(Exclusion::NoAnnotation);
        }
    }
    if log.artefacts.iter().any(|&(a, b)| a < t1 - EPS && b >= lo - EPS) {
        return Some(Exclusion::Artefact);
    }
    if crit.require_no_almost && log.almost_onsets.iter().any(|&t| t >= lo - EPS && t < t1 - EPS) {
        return Some(Exclusion::AlmostOnset);
    }
    None
}

/// Corpus generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub n_per_type: usize,
    pub base_seed: u64,
    pub criteria: SelectionCriteria,
    pub window: WindowConfig,
    pub detector: DetectorParams,
    /// Integration step and initial condition (end time and seed are set
    /// per run).
    pub sim: SimConfig,
    pub regimes: Regimes,
    /// Ramp runs allowed per ramp type, as a multiple of `n_per_type`.
    pub max_runs_factor: usize,
    /// Longest noise-induced run, in model time.
    pub nct_time_budget: f64,
    /// Keep the raw `x` segment `[t₁ + T⁻, t₁ + T⁺]` of each accepted CT.
    pub keep_segments: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_per_type: 100,
            base_seed: 0,
            criteria: SelectionCriteria::default(),
            window: WindowConfig::default(),
            detector: DetectorParams::default(),
            sim: SimConfig::default(),
            regimes: Regimes::default(),
            max_runs_factor: 20,
            nct_time_budget: 5.0e6,
            keep_segments: false,
        }
    }
}

impl CorpusConfig {
    pub fn params(&self, ty: CtType) -> ModelParams {
        self.regimes.params(ty)
    }
}

/// Per-type bookkeeping of corpus generation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HarvestStats {
    /// Ramp runs started (zero for the noise-induced regime).
    pub runs: usize,
    /// Onsets considered.
    pub candidates: usize,
    pub accepted: usize,
    pub no_onset: usize,
    pub diverged: usize,
    /// Rejections by [`Exclusion`] index (the annotation slot stays zero).
    pub rejected: [usize; 5],
    /// Model time simulated.
    pub sim_time: f64,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub tracks: Vec<LabeledTrack>,
    /// Raw segments when requested, parallel to `tracks`.
    pub segments: Vec<Option<Trajectory>>,
    pub stats: [HarvestStats; 3],
    pub config: CorpusConfig,
}

impl Corpus {
    pub fn of_type(&self, ty: CtType) -> impl Iterator<Item = &LabeledTrack> {
        self.tracks.iter().filter(move |t| t.label == ty)
    }

    pub fn t1_by_type(&self) -> [Vec<f64>; 3] {
        std::array::from_fn(|i| {
            self.of_type(CtType::from_index(i).expect("index")).map(|t| t.t1).collect()
        })
    }
}

/// Simulate until `n_per_type` transitions of each type pass the selection
/// criteria and compute their feature tracks. Ramp regimes contribute at
/// most the first onset of each run; the noise-induced regime is one long
/// run harvested as it streams.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    if cfg.n_per_type == 0 {
        return Err(Error::invalid("n_per_type must be at least 1"));
    }
    cfg.criteria.validate(&cfg.window)?;
    cfg.detector.validate()?;
    cfg.window.validate(cfg.sim.dt)?;
    cfg.regimes.validate()?;
    let mut tracks = Vec::with_capacity(3 * cfg.n_per_type);
    let mut segments = Vec::with_capacity(3 * cfg.n_per_type);
    let mut stats: [HarvestStats; 3] = Default::default();
    for ty in [CtType::Bct, CtType::Bnct] {
        harvest_ramp(cfg, ty, &mut tracks, &mut segments, &mut stats[ty.index()])?;
    }
    harvest_nct(cfg, &mut tracks, &mut segments, &mut stats[CtType::Nct.index()])?;
    Ok(Corpus {
        tracks,
        segments,
        stats,
        config: *cfg,
    })
}

fn harvest_ramp(
    cfg: &CorpusConfig,
    ty: CtType,
    tracks: &mut Vec<LabeledTrack>,
    segments: &mut Vec<Option<Trajectory>>,
    st: &mut HarvestStats,
) -> Result<()> {
    let path = cfg.regimes.path(ty);
    let params = cfg.params(ty);
    let max_runs = cfg.max_runs_factor * cfg.n_per_type;
    let mut accepted = 0;
    let mut run = 0u64;
    while accepted < cfg.n_per_type {
        if st.runs >= max_runs {
            return Err(Error::Budget(format!(
                "{ty}: {accepted} of {} transitions after {max_runs} runs",
                cfg.n_per_type
            )));
        }
        let seed = derive_seed(cfg.base_seed, ty.index() as u64, run);
        run += 1;
        st.runs += 1;
        let sim = SimConfig {
            t_end: path.t_end,
            seed,
            ..cfg.sim
        };
        st.sim_time += sim.t_end;
        let tr = match simulate(&params, &path, &sim) {
            Ok(tr) => tr,
            Err(Error::Diverged { .. }) => {
                st.diverged += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let x = Trajectory::new(tr.t0(), tr.dt(), tr.into_values())?;
        let log = detect(&x, &cfg.detector)?;
        if log.onsets.is_empty() {
            st.no_onset += 1;
            continue;
        }
        st.candidates += 1;
        if let Some(why) = screen(&log, 0, &cfg.criteria, None) {
            st.rejected[why.index()] += 1;
            continue;
        }
        let t1 = log.onsets[0];
        let track = feature_track(&x, t1, cfg.criteria.t_minus, cfg.criteria.t_plus, &cfg.window)?;
        segments.push(if cfg.keep_segments { Some(cut(&x, t1, &cfg.criteria)?) } else { None });
        tracks.push(LabeledTrack {
            track,
            label: ty,
            t1,
            source_id: format!("{}-run{}", ty.as_str(), run - 1),
        });
        accepted += 1;
        st.accepted += 1;
    }
    Ok(())
}

fn cut(x: &Trajectory, t1: f64, crit: &SelectionCriteria) -> Result<Trajectory> {
    let a = x
        .index_of(t1 + crit.t_minus)
        .ok_or_else(|| Error::OutOfRange(format!("segment start {}", t1 + crit.t_minus)))?;
    let b = x
        .index_of(t1 + crit.t_plus)
        .ok_or_else(|| Error::OutOfRange(format!("segment end {}", t1 + crit.t_plus)))?;
    x.slice(a, b)
}

/// Rolling history of the most recent samples of a stream.
struct History {
    buf: VecDeque<f64>,
    /// Global index of `buf[0]`.
    base: usize,
    cap: usize,
}

impl History {
    fn new(cap: usize) -> Self {
        History {
            buf: VecDeque::with_capacity(cap + CHUNK),
            base: 0,
            cap,
        }
    }

    fn extend(&mut self, xs: &[f64]) {
        self.buf.extend(xs.iter().copied());
        if self.buf.len() > self.cap {
            let drop = self.buf.len() - self.cap;
            self.buf.drain(..drop);
            self.base += drop;
        }
    }

    fn end(&self) -> usize {
        self.base + self.buf.len()
    }

    /// Samples `[a, b]` inclusive, when still held.
    fn range(&self, a: usize, b: usize) -> Option<Vec<f64>> {
        if a < self.base || b >= self.end() || a > b {
            return None;
        }
        Some(self.buf.range(a - self.base..=b - self.base).copied().collect())
    }
}

fn harvest_nct(
    cfg: &CorpusConfig,
    tracks: &mut Vec<LabeledTrack>,
    segments: &mut Vec<Option<Trajectory>>,
    st: &mut HarvestStats,
) -> Result<()> {
    let ty = CtType::Nct;
    let crit = &cfg.criteria;
    let dt = cfg.sim.dt;
    let seed = derive_seed(cfg.base_seed, ty.index() as u64, 0);
    let sim_cfg = SimConfig {
        t_end: cfg.nct_time_budget,
        seed,
        ..cfg.sim
    };
    let mut sim = Simulator::new(cfg.params(ty), cfg.regimes.path(ty), &sim_cfg)?;
    let mut det = RelayDetector::new(cfg.detector, 0.0)?;
    // Decisions about an onset are final once the detector has seen
    // t₁ + T⁺ + τ_NS; keep enough history to cut [t₁ + T⁻, t₁ + T⁺] then.
    let settle = crit.t_plus + cfg.detector.tau_ns + 2.0 * cfg.detector.tau_w;
    let span = ((settle - crit.t_minus) / dt).ceil() as usize + 2 * CHUNK;
    let mut hist = History::new(span);
    let mut pending: VecDeque<usize> = VecDeque::new();
    let mut buf = Vec::with_capacity(CHUNK + 1);
    buf.push(cfg.sim.x0);
    let mut accepted = 0;
    while accepted < cfg.n_per_type {
        let n = sim.fill(CHUNK, &mut buf, None)?;
        let done = n == 0;
        for e in det.push(&buf) {
            if let Event::Onset(_) = e {
                pending.push_back(det.log().onsets.len() - 1);
            }
        }
        hist.extend(&buf);
        buf.clear();
        let now = (hist.end() - 1) as f64 * dt;
        while let Some(&k) = pending.front() {
            let t1 = det.log().onsets[k];
            if !done && now < t1 + settle {
                break;
            }
            pending.pop_front();
            st.candidates += 1;
            let mut log = det.log().clone();
            log.t_end = now;
            if let Some(why) = screen(&log, k, crit, None) {
                st.rejected[why.index()] += 1;
                continue;
            }
            let a = ((t1 + crit.t_minus) / dt).round() as usize;
            let b = ((t1 + crit.t_plus) / dt).round() as usize;
            let xs = hist
                .range(a, b)
                .ok_or_else(|| Error::InsufficientData(format!("history no longer holds t1 = {t1}")))?;
            let seg = Trajectory::new(a as f64 * dt, dt, xs)?;
            let track = feature_track(&seg, t1, crit.t_minus, crit.t_plus, &cfg.window)?;
            segments.push(if cfg.keep_segments { Some(seg) } else { None });
            tracks.push(LabeledTrack {
                track,
                label: ty,
                t1,
                source_id: format!("nct-t{t1:.3}"),
            });
            accepted += 1;
            st.accepted += 1;
            if accepted == cfg.n_per_type {
                break;
            }
        }
        if done && accepted < cfg.n_per_type {
            st.sim_time = sim.time();
            return Err(Error::Budget(format!(
                "NCT: {accepted} of {} transitions within t = {}",
                cfg.n_per_type, cfg.nct_time_budget
            )));
        }
    }
    st.sim_time = sim.time();
    Ok(())
}

/// Whether a recording is model output or an external measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Model,
    External,
}

/// A signal to be screened and classified. External recordings are detrended
/// before feature extraction; model output is used as is.
#[derive(Debug, Clone)]
pub struct Recording {
    pub id: String,
    pub trajectory: Trajectory,
    pub source: Source,
    pub annotations: Option<Annotations>,
}

impl Recording {
    /// Check the sample spacing against the configured one.
    pub fn check_dt(&self, dt: f64) -> Result<()> {
        if ((self.trajectory.dt() - dt) / dt).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "recording {} has sample spacing {}, expected {dt}",
                self.id,
                self.trajectory.dt()
            )));
        }
        Ok(())
    }

    /// The signal features are computed from.
    pub fn feature_signal(&self, w: &WindowConfig) -> Result<Trajectory> {
        match self.source {
            Source::Model => Ok(self.trajectory.clone()),
            Source::External => detrend(&self.trajectory, w.bandwidth),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub n_det: usize,
    /// Onset times that passed C1 to C5.
    pub kept: Vec<f64>,
    /// Exclusions per condition, each CT counted at its first failure.
    pub excluded: [usize; 5],
}

/// Screen every detected onset against C1 to C5.
pub fn filter_cts(log: &EventLog, ann: Option<&Annotations>, crit: &SelectionCriteria) -> FilterReport {
    let mut kept = Vec::new();
    let mut excluded = [0; 5];
    for k in 0..log.onsets.len() {
        match screen(log, k, crit, ann) {
            Some(why) => excluded[why.index()] += 1,
            None => kept.push(log.onsets[k]),
        }
    }
    FilterReport {
        n_det: log.onsets.len(),
        kept,
        excluded,
    }
}

/// One classified transition with everything needed to re-derive the
/// prediction from the serialised model.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub recording_id: String,
    pub t1: f64,
    pub t_eval: f64,
    pub features: Vec<f64>,
    pub predicted: CtType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub n_det: usize,
    /// CTs that passed screening and had features at every `T`.
    pub n_filt: usize,
    pub excluded: [usize; 5],
    /// Onsets dropped because a feature was undefined, with the reason.
    pub dropped: Vec<(f64, String)>,
    /// `(T, [n_BCT, n_BNCT, n_NCT])` per evaluated `T`.
    pub counts: Vec<(f64, [usize; 3])>,
    pub items: Vec<Classified>,
}

impl ClassificationReport {
    pub fn prop_filt(&self) -> f64 {
        if self.n_det == 0 {
            0.0
        } else {
            self.n_filt as f64 / self.n_det as f64
        }
    }

    /// `n_type / n_filt` at the `i`-th evaluated `T`; zeros when nothing
    /// passed.
    pub fn proportions(&self, i: usize) -> [f64; 3] {
        let c = self.counts[i].1;
        if self.n_filt == 0 {
            return [0.0; 3];
        }
        c.map(|v| v as f64 / self.n_filt as f64)
    }
}

/// Features per screened CT at every `T` in `t_evals`, predicted with
/// `model`. Uses the model's feature set and slope length.
pub fn classify_filtered(
    filtered: &FilterReport,
    rec: &Recording,
    model: &SvmModel,
    t_evals: &[f64],
    w: &WindowConfig,
    crit: &SelectionCriteria,
) -> Result<ClassificationReport> {
    let signal = rec.feature_signal(w)?;
    let (svm_type, t_m) = (model.meta.svm_type, model.meta.t_m);
    let wcfg = w.with_t_m(t_m);
    let mut dropped = Vec::new();
    let mut items = Vec::new();
    let mut counts: Vec<(f64, [usize; 3])> = t_evals.iter().map(|&t| (t, [0; 3])).collect();
    let mut n_filt = 0;
    for &t1 in &filtered.kept {
        let ft = match feature_track(&signal, t1, crit.t_minus, crit.t_plus, &wcfg) {
            Ok(ft) => ft,
            Err(e) => {
                dropped.push((t1, e.to_string()));
                continue;
            }
        };
        let vectors: Result<Vec<Vec<f64>>> = t_evals
            .iter()
            .map(|&t| feature_vector_with_t_m(&ft, t, svm_type, t_m))
            .collect();
        let vectors = match vectors {
            Ok(v) => v,
            Err(e) => {
                dropped.push((t1, e.to_string()));
                continue;
            }
        };
        n_filt += 1;
        for (i, (v, &t)) in vectors.into_iter().zip(t_evals).enumerate() {
            let predicted = model.predict(&v)?;
            counts[i].1[predicted.index()] += 1;
            items.push(Classified {
                recording_id: rec.id.clone(),
                t1,
                t_eval: t,
                features: v,
                predicted,
            });
        }
    }
    Ok(ClassificationReport {
        n_det: filtered.n_det,
        n_filt,
        excluded: filtered.excluded,
        dropped,
        counts,
        items,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t_minus: f64,
    pub n_det: usize,
    pub n_filt: usize,
    pub prop_filt: f64,
    /// `n_type / n_filt` at `T = T⁺`.
    pub props: [f64; 3],
}

/// Screen and classify at `T = T⁺` for each `T⁻` in the grid.
pub fn sweep_t_minus(
    rec: &Recording,
    log: &EventLog,
    model: &SvmModel,
    t_minus_grid: &[f64],
    t_plus: f64,
    w: &WindowConfig,
    base: &SelectionCriteria,
) -> Result<Vec<SweepRow>> {
    if t_minus_grid.is_empty() {
        return Err(Error::invalid("T- grid is empty"));
    }
    t_minus_grid
        .iter()
        .map(|&t_minus| {
            let crit = SelectionCriteria {
                t_minus,
                t_plus,
                ..*base
            };
            let filtered = filter_cts(log, rec.annotations.as_ref(), &crit);
            let rep = classify_filtered(&filtered, rec, model, &[t_plus], w, &crit)?;
            Ok(SweepRow {
                t_minus,
                n_det: rep.n_det,
                n_filt: rep.n_filt,
                prop_filt: rep.prop_filt(),
                props: rep.proportions(0),
            })
        })
        .collect()
}

/// Per-feature fit between two ensembles.
#[derive(Debug, Clone, PartialEq)]
pub struct FitEntry {
    pub rmse: [f64; 8],
    pub mffe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub t: f64,
    /// Indexed by class; `None` where either ensemble is empty.
    pub entries: [Option<FitEntry>; 3],
}

/// Ensemble mean of feature `i` at `T`, over curves where it is defined.
fn ensemble_mean<C: FeatureCurve>(curves: &[&C], i: usize, t: f64) -> Option<f64> {
    let mut s = 0.0;
    let mut n = 0usize;
    for c in curves {
        if let Some(v) = c.feature(i, t) {
            s += v;
            n += 1;
        }
    }
    (n > 0).then(|| s / n as f64)
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Mean feature fit error between two ensembles, over the common grid of
/// spacing `Δ_m` up to `t`. Each ensemble-mean curve is min-max normalised
/// over that grid before the per-feature RMSE is taken.
pub fn mffe<A: FeatureCurve, B: FeatureCurve>(classified: &[&A], reference: &[&B], t: f64) -> Result<FitEntry> {
    if classified.is_empty() || reference.is_empty() {
        return Err(Error::InsufficientData("both ensembles must be non-empty".into()));
    }
    let dm = reference[0].grid_step();
    let mut rmse = [0.0; 8];
    for (i, r) in rmse.iter_mut().enumerate() {
        let lo = classified
            .iter()
            .map(|c| c.first_defined(i))
            .chain(reference.iter().map(|c| c.first_defined(i)))
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = classified
            .iter()
            .map(|c| c.last_time())
            .chain(reference.iter().map(|c| c.last_time()))
            .fold(t, f64::min);
        let k0 = (lo / dm - EPS).ceil() as i64;
        let k1 = (hi / dm + EPS).floor() as i64;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for k in k0..=k1 {
            let tk = k as f64 * dm;
            if let (Some(x), Some(y)) = (ensemble_mean(classified, i, tk), ensemble_mean(reference, i, tk)) {
                a.push(x);
                b.push(y);
            }
        }
        if a.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no common grid for {} up to T = {t}",
                FEATURE_NAMES[i]
            )));
        }
        let (a, b) = (min_max(&a), min_max(&b));
        *r = (a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt();
    }
    Ok(FitEntry {
        rmse,
        mffe: rmse.iter().sum::<f64>() / 8.0,
    })
}

/// [`mffe`] for each class; classes with an empty ensemble are left out.
pub fn mffe_by_type<A: FeatureCurve, B: FeatureCurve>(
    classified: &[Vec<&A>; 3],
    reference: &[Vec<&B>; 3],
    t: f64,
) -> Result<FitReport> {
    let mut entries: [Option<FitEntry>; 3] = Default::default();
    for c in 0..3 {
        if !classified[c].is_empty() && !reference[c].is_empty() {
            entries[c] = Some(mffe(&classified[c], &reference[c], t)?);
        }
    }
    Ok(FitReport { t, entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T1Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn t1_statistics(t1s: &[f64]) -> Result<T1Stats> {
    if t1s.is_empty() {
        return Err(Error::InsufficientData("no onset times".into()));
    }
    let n = t1s.len();
    let mean = t1s.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (t1s.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(T1Stats {
        n,
        mean,
        std,
        min: t1s.iter().copied().fold(f64::INFINITY, f64::min),
        max: t1s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// First onset of each of `n_runs` ramp runs of type `ty`; runs without a
/// confirmed onset or that diverge are skipped.
pub fn ramp_onsets(
    ty: CtType,
    regimes: &Regimes,
    n_runs: usize,
    base_seed: u64,
    sim: &SimConfig,
    det: &DetectorParams,
) -> Result<Vec<f64>> {
    let params = regimes.params(ty);
    let path = regimes.path(ty);
    let mut out = Vec::with_capacity(n_runs);
    for i in 0..n_runs {
        let cfg = SimConfig {
            t_end: path.t_end,
            seed: derive_seed(base_seed, ty.index() as u64, i as u64),
            ..*sim
        };
        let tr = match simulate(&params, &path, &cfg) {
            Ok(tr) => tr,
            Err(Error::Diverged { .. }) => continue,
            Err(e) => return Err(e),
        };
        let x = Trajectory::new(tr.t0(), tr.dt(), tr.into_values())?;
        if let Some(&t1) = detect(&x, det)?.onsets.first() {
            out.push(t1);
        }
    }
    Ok(out)
}

/// Residence times in one shear setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ShearRow {
    pub sigma: f64,
    pub s_times: Vec<f64>,
    pub ns_times: Vec<f64>,
    pub sim_time: f64,
}

/// Run the noise-induced regime at each shear until `n_cts` residence
/// times of each state are available, then draw `n_cts` of each at random.
pub fn residence_shear_study(
    regimes: &Regimes,
    sigmas: &[f64],
    n_cts: usize,
    base_seed: u64,
    sim: &SimConfig,
    det: &DetectorParams,
    time_budget: f64,
) -> Result<Vec<ShearRow>> {
    let mut rows = Vec::with_capacity(sigmas.len());
    for (k, &sigma) in sigmas.iter().enumerate() {
        let params = ModelParams {
            sigma,
            ..regimes.params(CtType::Nct)
        };
        let path = regimes.path(CtType::Nct);
        let cfg = SimConfig {
            t_end: time_budget,
            seed: derive_seed(base_seed, 10 + k as u64, 0),
            ..*sim
        };
        let mut simr = Simulator::new(params, path, &cfg)?;
        let mut detector = RelayDetector::new(*det, 0.0)?;
        let mut buf = Vec::with_capacity(CHUNK + 1);
        buf.push(cfg.x0);
        while detector.log().n_pairs() < n_cts + 1 {
            if simr.fill(CHUNK, &mut buf, None)? == 0 && buf.is_empty() {
                return Err(Error::Budget(format!(
                    "sigma = {sigma}: {} residence pairs within t = {time_budget}",
                    detector.log().n_pairs()
                )));
            }
            detector.push(&buf);
            buf.clear();
        }
        let (mut s, mut ns) = crate::detector::residence_times(detector.log());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base_seed, 20 + k as u64, 0));
        s.shuffle(&mut rng);
        ns.shuffle(&mut rng);
        s.truncate(n_cts);
        ns.truncate(n_cts);
        rows.push(ShearRow {
            sigma,
            s_times: s,
            ns_times: ns,
            sim_time: simr.time(),
        });
    }
    Ok(rows)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Counts of `values` in bins with the given edges (left-closed; the last
/// bin also takes its right edge), normalised to a probability density.
pub fn density_histogram(values: &[f64], edges: &[f64]) -> Vec<f64> {
    let nb = edges.len().saturating_sub(1);
    let mut counts = vec![0usize; nb];
    for &v in values {
        if nb == 0 || v < edges[0] || v > edges[nb] {
            continue;
        }
        let k = edges.partition_point(|&e| e <= v).saturating_sub(1).min(nb - 1);
        counts[k] += 1;
    }
    let n = values.len().max(1) as f64;
    counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (n * (e[1] - e[0])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log_with(onsets: &[f64], offsets: &[f64]) -> EventLog {
        EventLog {
            onsets: onsets.to_vec(),
            offsets: offsets.to_vec(),
            t_start: 0.0,
            t_end: 200.0,
            ..EventLog::default()
        }
    }

    fn crit() -> SelectionCriteria {
        SelectionCriteria::new(-8.0, 2.0)
    }

    #[test]
    fn clean_ct_kept() {
        let log = log_with(&[50.0], &[70.0]);
        let ann = Annotations::new(vec![(49.0, 71.0)]).unwrap();
        let r = filter_cts(&log, Some(&ann), &crit());
        assert_eq!(r.kept, vec![50.0]);
        assert_eq!(r.excluded, [0; 5]);
    }

    #[test]
    fn almost_onset_excluded_by_c5() {
        let mut log = log_with(&[50.0], &[70.0]);
        log.almost_onsets = vec![47.0];
        let r = filter_cts(&log, None, &crit());
        assert!(r.kept.is_empty());
        assert_eq!(r.excluded[Exclusion::AlmostOnset.index()], 1);
    }

    #[test]
    fn artefact_excluded_by_c4() {
        let mut log = log_with(&[50.0], &[70.0]);
        log.artefacts = vec![(40.0, 43.0)];
        let r = filter_cts(&log, None, &crit());
        assert_eq!(r.excluded[Exclusion::Artefact.index()], 1);
        // an artefact ending before the window does not matter
        log.artefacts = vec![(30.0, 41.0)];
        assert_eq!(filter_cts(&log, None, &crit()).kept, vec![50.0]);
    }

    #[test]
    fn attribution_order_and_conservation() {
        // Onset 2 follows offset 1 too closely (C1), onset 3 ends too soon
        // (C2), onset 4 lacks an annotation (C3), onset 1 is clean.
        let log = log_with(&[10.0, 24.0, 60.0, 100.0], &[20.0, 40.0, 61.0, 130.0]);
        let ann = Annotations::new(vec![(9.0, 45.0), (59.0, 62.0)]).unwrap();
        let r = filter_cts(&log, Some(&ann), &crit());
        assert_eq!(r.kept, vec![10.0]);
        assert_eq!(r.excluded, [1, 1, 1, 0, 0]);
        assert_eq!(r.n_det, r.kept.len() + r.excluded.iter().sum::<usize>());
    }

    #[test]
    fn window_must_lie_in_record() {
        let mut log = log_with(&[5.0], &[30.0]);
        assert_eq!(filter_cts(&log, None, &crit()).excluded[0], 1);
        log.onsets = vec![195.0];
        log.offsets = vec![];
        assert_eq!(filter_cts(&log, None, &crit()).excluded[0], 0);
        assert_eq!(filter_cts(&log, None, &crit()).kept, vec![195.0]);
        log.onsets = vec![199.0];
        assert_eq!(filter_cts(&log, None, &crit()).excluded[1], 1);
    }

    #[test]
    fn longer_history_keeps_fewer() {
        let log = log_with(&[10.0, 30.0, 55.0, 90.0], &[20.0, 40.0, 80.0, 95.0]);
        let mut last = usize::MAX;
        for t_minus in [-8.0, -10.0, -12.0, -14.0, -16.0] {
            let n = filter_cts(&log, None, &SelectionCriteria::new(t_minus, 2.0)).kept.len();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn criteria_guard() {
        let w = WindowConfig::default();
        assert!(SelectionCriteria::new(-8.0, 2.0).validate(&w).is_ok());
        assert!(SelectionCriteria::new(-7.0, 2.0).validate(&w).is_err());
        assert!(SelectionCriteria::new(-30.0, 10.0).validate(&w).is_ok());
    }

    #[test]
    fn t1_stats_single() {
        let s = t1_statistics(&[41.0]).unwrap();
        assert_eq!((s.mean, s.std), (41.0, 0.0));
        let s = t1_statistics(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(s.std, 1.0);
        assert!(t1_statistics(&[]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_relative_eq!(ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[2.5, 3.5, 4.5, 5.5]), 0.5);
    }

    #[test]
    fn histogram_is_a_density() {
        let v = [0.5, 1.5, 1.6, 3.0];
        let h = density_histogram(&v, &[0.0, 1.0, 2.0, 4.0]);
        assert_eq!(h, vec![0.25, 0.5, 0.125]);
        let area: f64 = h.iter().zip([1.0, 1.0, 2.0]).map(|(d, w)| d * w).sum();
        assert_relative_eq!(area, 1.0);
    }

    #[test]
    fn history_ring() {
        let mut h = History::new(5);
        h.extend(&[0.0, 1.0, 2.0]);
        h.extend(&[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(h.base, 2);
        assert_eq!(h.range(3, 5), Some(vec![3.0, 4.0, 5.0]));
        assert_eq!(h.range(1, 3), None);
    }
}
