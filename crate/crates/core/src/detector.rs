//! Two-threshold relay detection of transitions between the low-amplitude
//! (NS) and high-amplitude (S) states.
//!
//! The detector is a single forward pass. In the NS state it waits for `|x|`
//! to cross the on-threshold `α` and then slides a window of length `τ_w` in
//! steps of `Δ` across `[t₁, t₁ + τ_S]`; the onset is confirmed when every
//! window position holds a sample with `|x| > β`. In the S state it waits for
//! `|x|` to drop below the off-threshold `β` and confirms the offset when no
//! window position across `[t₂, t₂ + τ_NS]` holds a sample with `|x| ≥ α`.
//! Crossings whose confirmation fails are kept as almost-occurring
//! transitions. An on-crossing followed within `τ_w` by a sample-to-sample
//! jump of at least `ξ` opens an artefact interval instead.
//!
//! Window positions are counted `k = 0..=n` with `τ = nΔ + τ_w`, so the last
//! position ends exactly at `t₁ + τ_S` (or `t₂ + τ_NS`). Windows are closed
//! and contain both endpoint samples. A crossing is reported at the first
//! sample past the threshold: `|x_k| ≤ α < |x_{k+1}|` gives `t₁ = t_{k+1}`.
//!
//! After a confirmed onset the search for an offset resumes at `t₁ + τ_S`,
//! and after a confirmed offset the search for an onset resumes at
//! `t₂ + τ_NS`. If `|x|` is already below `β` where the offset search
//! resumes, that sample is the offset candidate. A failed onset resumes at
//! the first window that held no sample above `β`, and a failed offset at the
//! sample that reached `α`. An
//! off-crossing that fails inside its very first window is ordinary
//! oscillation within the S state and is not recorded as almost-occurring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    /// On-threshold.
    pub alpha: f64,
    /// Off-threshold.
    pub beta: f64,
    /// Moving-window length.
    pub tau_w: f64,
    /// Moving-window step.
    pub delta: f64,
    /// Minimum duration of the S state.
    pub tau_s: f64,
    /// Minimum duration of the NS state.
    pub tau_ns: f64,
    /// Jump size that marks an artefact.
    pub xi: f64,
    /// Sample spacing of the signal.
    pub dt: f64,
}

impl Default for DetectorParams {
    /// Thresholds and windows used on model output.
    fn default() -> Self {
        DetectorParams {
            alpha: 0.55,
            beta: 0.45,
            tau_w: 1.0,
            delta: 0.001,
            tau_s: 2.0,
            tau_ns: 5.0,
            xi: 0.2,
            dt: 0.001,
        }
    }
}

impl DetectorParams {
    /// Settings for voltage recordings: `β = α − 0.01`, `τ_NS = 3`.
    pub fn for_recording(alpha: f64) -> Self {
        DetectorParams {
            alpha,
            beta: alpha - 0.01,
            tau_ns: 3.0,
            ..DetectorParams::default()
        }
    }

    /// Copy with a new on-threshold and `β = α − 0.01`.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        DetectorParams {
            alpha,
            beta: alpha - 0.01,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().map(|_| ())
    }

    /// Number of window steps `n_S = (τ_S − τ_w)/Δ`.
    pub fn n_s(&self) -> Result<usize> {
        Ok(self.geometry()?.n_s)
    }

    /// Number of window steps `n_NS = (τ_NS − τ_w)/Δ`.
    pub fn n_ns(&self) -> Result<usize> {
        Ok(self.geometry()?.n_ns)
    }

    fn geometry(&self) -> Result<Geometry> {
        let p = self;
        let vals = [p.alpha, p.beta, p.tau_w, p.delta, p.tau_s, p.tau_ns, p.xi, p.dt];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("detector parameters must be finite"));
        }
        if !(0.0 < p.beta && p.beta < p.alpha) {
            return Err(Error::invalid(format!(
                "thresholds must satisfy 0 < beta < alpha (alpha = {}, beta = {})",
                p.alpha, p.beta
            )));
        }
        if !(p.dt > 0.0 && p.dt <= p.delta && p.delta <= p.tau_w) {
            return Err(Error::invalid("window step must satisfy dt <= delta <= tau_w"));
        }
        if !(p.tau_s > p.tau_w) {
            return Err(Error::invalid("tau_s must exceed tau_w"));
        }
        if p.tau_ns < p.tau_s {
            return Err(Error::invalid("tau_ns must be at least tau_s"));
        }
        if !(p.xi > 0.0) {
            return Err(Error::invalid("artefact jump threshold must be positive"));
        }
        let w = whole(p.tau_w / p.dt, "tau_w / dt")?;
        let step = whole(p.delta / p.dt, "delta / dt")?;
        let n_s = whole((p.tau_s - p.tau_w) / p.delta, "(tau_s - tau_w) / delta")?;
        let n_ns = whole((p.tau_ns - p.tau_w) / p.delta, "(tau_ns - tau_w) / delta")?;
        let quiet = (p.tau_ns / p.dt).round() as usize;
        Ok(Geometry {
            w,
            step,
            n_s,
            n_ns,
            s_span: n_s * step + w,
            ns_span: n_ns * step + w,
            quiet,
        })
    }
}

fn whole(ratio: f64, what: &str) -> Result<usize> {
    let r = ratio.round();
    if r < 1.0 || (ratio - r).abs() > 1e-6 * r {
        return Err(Error::invalid(format!("{what} must be a whole number, got {ratio}")));
    }
    Ok(r as usize)
}

/// Window geometry in samples.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    w: usize,
    step: usize,
    n_s: usize,
    n_ns: usize,
    s_span: usize,
    ns_span: usize,
    quiet: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum State {
    Ns,
    S,
}

/// A detection result as it becomes final.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// The initial NS stretch was found; analysis starts here.
    Start(f64),
    Onset(f64),
    Offset(f64),
    AlmostOnset(f64),
    AlmostOffset(f64),
    Artefact(f64, f64),
}

/// Everything the detector found in one signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub onsets: Vec<f64>,
    pub offsets: Vec<f64>,
    pub almost_onsets: Vec<f64>,
    pub almost_offsets: Vec<f64>,
    pub artefacts: Vec<(f64, f64)>,
    pub state_at_end: Option<State>,
    /// Start of the initial NS stretch; samples before it were skipped.
    pub t_start: f64,
    /// Time of the last sample analysed.
    pub t_end: f64,
}

impl EventLog {
    fn record(&mut self, e: Event) {
        match e {
            Event::Start(t) => self.t_start = t,
            Event::Onset(t) => self.onsets.push(t),
            Event::Offset(t) => self.offsets.push(t),
            Event::AlmostOnset(t) => self.almost_onsets.push(t),
            Event::AlmostOffset(t) => self.almost_offsets.push(t),
            Event::Artefact(a, b) => self.artefacts.push((a, b)),
        }
    }

    /// `(t₁, t₂)` for every onset; `t₂` is `None` when the signal ends in S.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, Option<f64>)> + '_ {
        self.onsets
            .iter()
            .enumerate()
            .map(|(i, &t1)| (t1, self.offsets.get(i).copied()))
    }

    /// Closed `(t₁, t₂)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.onsets.iter().copied().zip(self.offsets.iter().copied())
    }

    pub fn n_pairs(&self) -> usize {
        self.offsets.len()
    }
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    /// Looking for `|x| < β` lasting `τ_NS`.
    Startup { run_start: usize, scan: usize },
    /// Looking for an on-crossing at pairs `(k, k+1)`, `k ≥ scan`.
    Ns { scan: usize },
    OnsetCheck {
        cand: usize,
        artefact_checked: bool,
        k: usize,
        witness: Option<usize>,
        probe: usize,
    },
    Artefact { start: usize, e: usize },
    /// Looking for an off-crossing at pairs `(k, k+1)`, `k ≥ scan`.
    S { scan: usize },
    OffsetCheck { cand: usize, probe: usize },
}

/// Detection state machine over a signal addressed by global sample index.
/// Callers hand it a view `xs` whose first element has index `base`.
struct Machine {
    p: DetectorParams,
    g: Geometry,
    t0: f64,
    phase: Phase,
    log: EventLog,
    fresh: Vec<Event>,
}

enum Step {
    Continue,
    NeedMore,
}

impl Machine {
    fn new(p: DetectorParams, t0: f64) -> Result<Self> {
        let g = p.geometry()?;
        Ok(Machine {
            p,
            g,
            t0,
            phase: Phase::Startup {
                run_start: 0,
                scan: 0,
            },
            log: EventLog {
                t_start: t0,
                t_end: t0,
                ..EventLog::default()
            },
            fresh: Vec::new(),
        })
    }

    #[inline]
    fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.p.dt
    }

    fn emit(&mut self, e: Event) {
        self.log.record(e);
        self.fresh.push(e);
    }

    /// Earliest sample index the machine may still read.
    fn needed_from(&self) -> usize {
        match self.phase {
            Phase::Startup { scan, .. } => scan,
            Phase::Ns { scan } | Phase::S { scan } => scan,
            Phase::OnsetCheck { cand, .. } => cand,
            Phase::Artefact { e, .. } => e,
            Phase::OffsetCheck { probe, .. } => probe,
        }
    }

    fn run(&mut self, xs: &[f64], base: usize) {
        while let Step::Continue = self.step(xs, base) {}
    }

    fn step(&mut self, xs: &[f64], base: usize) -> Step {
        let end = base + xs.len();
        let at = |i: usize| xs[i - base];
        let (alpha, beta, xi) = (self.p.alpha, self.p.beta, self.p.xi);
        let g = self.g;

        match self.phase {
            Phase::Startup { mut run_start, scan } => {
                for i in scan..end {
                    if at(i).abs() < beta {
                        if i - run_start >= g.quiet {
                            self.emit(Event::Start(self.time(run_start)));
                            self.phase = Phase::Ns { scan: run_start };
                            return Step::Continue;
                        }
                    } else {
                        run_start = i + 1;
                    }
                }
                self.phase = Phase::Startup {
                    run_start,
                    scan: end,
                };
                Step::NeedMore
            }

            Phase::Ns { scan } => {
                let mut k = scan;
                while k + 1 < end {
                    if at(k).abs() <= alpha && at(k + 1).abs() > alpha {
                        let cand = k + 1;
                        self.phase = Phase::OnsetCheck {
                            cand,
                            artefact_checked: false,
                            k: 0,
                            witness: None,
                            probe: cand,
                        };
                        return Step::Continue;
                    }
                    k += 1;
                }
                self.phase = Phase::Ns { scan: k };
                Step::NeedMore
            }

            Phase::OnsetCheck {
                cand,
                mut artefact_checked,
                mut k,
                mut witness,
                mut probe,
            } => {
                if !artefact_checked {
                    // Pairs (i, i+1) for i in [cand, cand + w].
                    if end < cand + g.w + 2 {
                        return Step::NeedMore;
                    }
                    if (cand..=cand + g.w).any(|i| (at(i + 1) - at(i)).abs() >= xi) {
                        self.phase = Phase::Artefact {
                            start: cand,
                            e: cand + 1,
                        };
                        return Step::Continue;
                    }
                    artefact_checked = true;
                }
                while k <= g.n_s {
                    let start = cand + k * g.step;
                    let stop = start + g.w;
                    if witness.is_some_and(|q| q >= start) {
                        k += 1;
                        continue;
                    }
                    probe = probe.max(start);
                    let mut found = None;
                    while probe <= stop {
                        if probe >= end {
                            self.phase = Phase::OnsetCheck {
                                cand,
                                artefact_checked,
                                k,
                                witness,
                                probe,
                            };
                            return Step::NeedMore;
                        }
                        if at(probe).abs() > beta {
                            found = Some(probe);
                            break;
                        }
                        probe += 1;
                    }
                    match found {
                        Some(q) => {
                            witness = Some(q);
                            probe = q + 1;
                            k += 1;
                        }
                        None => {
                            if k > 0 {
                                self.emit(Event::AlmostOnset(self.time(cand)));
                            }
                            self.phase = Phase::Ns { scan: start };
                            return Step::Continue;
                        }
                    }
                }
                self.emit(Event::Onset(self.time(cand)));
                self.phase = Phase::S {
                    scan: cand + g.s_span,
                };
                Step::Continue
            }

            Phase::Artefact { start, mut e } => loop {
                if end < e + g.w + 2 {
                    self.phase = Phase::Artefact { start, e };
                    return Step::NeedMore;
                }
                if at(e).abs() >= alpha {
                    e += 1;
                    continue;
                }
                match (e..=e + g.w).find(|&i| (at(i + 1) - at(i)).abs() >= xi) {
                    Some(j) => e = j + 1,
                    None => {
                        self.emit(Event::Artefact(self.time(start), self.time(e)));
                        self.phase = Phase::Ns { scan: e };
                        return Step::Continue;
                    }
                }
            },

            Phase::S { scan } => {
                if scan < end && at(scan).abs() < beta {
                    // Already quiet where the search resumes.
                    self.phase = Phase::OffsetCheck {
                        cand: scan,
                        probe: scan,
                    };
                    return Step::Continue;
                }
                let mut k = scan;
                while k + 1 < end {
                    if at(k).abs() >= beta && at(k + 1).abs() < beta {
                        self.phase = Phase::OffsetCheck {
                            cand: k + 1,
                            probe: k + 1,
                        };
                        return Step::Continue;
                    }
                    k += 1;
                }
                self.phase = Phase::S { scan: k };
                Step::NeedMore
            }

            Phase::OffsetCheck { cand, mut probe } => {
                let stop = cand + g.ns_span;
                while probe <= stop {
                    if probe >= end {
                        self.phase = Phase::OffsetCheck { cand, probe };
                        return Step::NeedMore;
                    }
                    if at(probe).abs() >= alpha {
                        if probe > cand + g.w {
                            self.emit(Event::AlmostOffset(self.time(cand)));
                        }
                        self.phase = Phase::S { scan: probe };
                        return Step::Continue;
                    }
                    probe += 1;
                }
                self.emit(Event::Offset(self.time(cand)));
                self.phase = Phase::Ns {
                    scan: cand + g.ns_span,
                };
                Step::Continue
            }
        }
    }

    /// Settle whatever is pending once no more samples will arrive.
    fn finish(&mut self, n_total: usize) -> Result<()> {
        let last = n_total.saturating_sub(1);
        self.log.t_end = self.time(last);
        let state = match self.phase {
            Phase::Startup { .. } => {
                return Err(Error::InsufficientData(format!(
                    "no stretch with |x| < beta lasting tau_ns = {} s",
                    self.p.tau_ns
                )))
            }
            Phase::Ns { .. } => State::Ns,
            Phase::OnsetCheck { cand, .. } => {
                self.emit(Event::AlmostOnset(self.time(cand)));
                State::Ns
            }
            Phase::Artefact { start, .. } => {
                self.emit(Event::Artefact(self.time(start), self.time(last)));
                State::Ns
            }
            Phase::S { .. } => State::S,
            Phase::OffsetCheck { cand, .. } => {
                self.emit(Event::AlmostOffset(self.time(cand)));
                State::S
            }
        };
        self.log.state_at_end = Some(state);
        Ok(())
    }
}

/// Incremental detector for signals too long to hold in memory. Samples are
/// pushed in chunks; events are reported as soon as they are final, and only
/// the samples still needed for pending decisions are retained.
pub struct RelayDetector {
    machine: Machine,
    buf: Vec<f64>,
    base: usize,
}

impl RelayDetector {
    /// `t0` is the time of the first sample that will be pushed.
    pub fn new(params: DetectorParams, t0: f64) -> Result<Self> {
        Ok(RelayDetector {
            machine: Machine::new(params, t0)?,
            buf: Vec::new(),
            base: 0,
        })
    }

    /// Feed further samples; returns the events that became final.
    pub fn push(&mut self, xs: &[f64]) -> Vec<Event> {
        self.buf.extend_from_slice(xs);
        self.machine.run(&self.buf, self.base);
        let keep = self.machine.needed_from().clamp(self.base, self.samples_seen());
        let drop = keep - self.base;
        if drop > (1 << 16) && drop * 2 > self.buf.len() {
            self.buf.drain(..drop);
            self.base = keep;
        }
        std::mem::take(&mut self.machine.fresh)
    }

    /// Samples consumed so far.
    pub fn samples_seen(&self) -> usize {
        self.base + self.buf.len()
    }

    /// The log so far (pending decisions excluded).
    pub fn log(&self) -> &EventLog {
        &self.machine.log
    }

    /// Close the stream; returns any last events and the complete log.
    pub fn finish(mut self) -> Result<(Vec<Event>, EventLog)> {
        let n = self.samples_seen();
        self.machine.finish(n)?;
        let fresh = std::mem::take(&mut self.machine.fresh);
        Ok((fresh, self.machine.log))
    }
}

/// Run the detector over a whole trajectory.
pub fn detect(tr: &Trajectory, p: &DetectorParams) -> Result<EventLog> {
    p.validate()?;
    if ((tr.dt() - p.dt) / p.dt).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "trajectory spacing {} does not match detector dt {}",
            tr.dt(),
            p.dt
        )));
    }
    let duration = tr.len().saturating_sub(1) as f64 * tr.dt();
    if duration < p.tau_ns {
        return Err(Error::InsufficientData(format!(
            "trajectory lasts {duration} s, shorter than tau_ns = {} s",
            p.tau_ns
        )));
    }
    let mut m = Machine::new(*p, tr.t0())?;
    m.run(tr.values(), 0);
    m.finish(tr.len())?;
    Ok(m.log)
}

/// Durations of completed S episodes (`t₂ − t₁`) and of completed NS episodes
/// between them (`t₁⁽ⁱ⁺¹⁾ − t₂⁽ⁱ⁾`). Open episodes at either end are left out.
pub fn residence_times(log: &EventLog) -> (Vec<f64>, Vec<f64>) {
    let s: Vec<f64> = log.pairs().map(|(a, b)| b - a).collect();
    let ns = log
        .offsets
        .iter()
        .zip(log.onsets.iter().skip(1))
        .map(|(t2, t1)| t1 - t2)
        .collect();
    (s, ns)
}

/// Expert-provided seizure intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Annotations {
    intervals: Vec<(f64, f64)>,
}

impl Annotations {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid(format!("annotation {i} is not an interval: ({a}, {b})")));
            }
            if i > 0 && a < intervals[i - 1].1 {
                return Err(Error::invalid(format!(
                    "annotation {i} overlaps or precedes annotation {}",
                    i - 1
                )));
            }
        }
        Ok(Annotations { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Length of `[a, b] ∩ annotations`, or `None` when disjoint from all.
    pub fn overlap(&self, a: f64, b: f64) -> Option<f64> {
        let mut total = None;
        for &(s, e) in &self.intervals {
            let lo = a.max(s);
            let hi = b.min(e);
            if lo <= hi {
                *total.get_or_insert(0.0) += hi - lo;
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub n_correct: usize,
    pub n_false: usize,
    /// One flag per detected interval, in onset order.
    pub correct: Vec<bool>,
}

impl OverlapReport {
    pub fn score(&self) -> i64 {
        self.n_correct as i64 - self.n_false as i64
    }
}

/// Agreement between detected seizure intervals and annotations. A detected
/// interval counts as correct when it lies within, contains, or partially
/// overlaps an annotated interval (at least `min_overlap_frac` of its length
/// when that knob is positive), and as false when it lies entirely in an
/// annotated non-seizure gap. An interval still open at the end of the log
/// runs to `log.t_end`.
pub fn overlap_score(log: &EventLog, ann: &Annotations, min_overlap_frac: f64) -> OverlapReport {
    let mut correct = Vec::with_capacity(log.onsets.len());
    let mut n_false = 0;
    for (t1, t2) in log.intervals() {
        let t2 = t2.unwrap_or(log.t_end);
        match ann.overlap(t1, t2) {
            Some(len) => {
                let ok = min_overlap_frac <= 0.0 || len >= min_overlap_frac * (t2 - t1);
                correct.push(ok);
            }
            None => {
                correct.push(false);
                n_false += 1;
            }
        }
    }
    OverlapReport {
        n_correct: correct.iter().filter(|&&c| c).count(),
        n_false,
        correct,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSweep {
    pub best: f64,
    /// `(α, n_correct − n_false)` for every grid point that could be evaluated.
    pub scores: Vec<(f64, i64)>,
}

/// Pick the on-threshold from `grid` that maximises `n_correct − n_false`,
/// with `β = α − 0.01` at each point; ties go to the smaller `α`.
pub fn tune_alpha(
    tr: &Trajectory,
    ann: &Annotations,
    base: &DetectorParams,
    grid: &[f64],
) -> Result<AlphaSweep> {
    if grid.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let p = base.with_alpha(alpha);
        if p.validate().is_err() {
            continue;
        }
        match detect(tr, &p) {
            Ok(log) => scores.push((alpha, overlap_score(&log, ann, 0.0).score())),
            Err(Error::InsufficientData(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let best = scores
        .iter()
        .copied()
        .reduce(|b, c| {
            if c.1 > b.1 || (c.1 == b.1 && c.0 < b.0) {
                c
            } else {
                b
            }
        })
        .ok_or_else(|| Error::invalid("no alpha in the grid yields a valid detection"))?;
    Ok(AlphaSweep {
        best: best.0,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(n: usize, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory::new(0.0, 0.001, (0..n).map(|i| f(i as f64 * 0.001)).collect()).unwrap()
    }

    /// `0.9 sin(40 (t − a))` for `n` whole periods from `a`, so it starts and
    /// ends at zero without a jump.
    fn burst(t: f64, a: f64, n: f64) -> f64 {
        let b = a + n * std::f64::consts::TAU / 40.0;
        if (a..b).contains(&t) {
            0.9 * (40.0 * (t - a)).sin()
        } else {
            0.0
        }
    }

    fn fast_params() -> DetectorParams {
        DetectorParams {
            delta: 0.01,
            ..DetectorParams::default()
        }
    }

    #[test]
    fn geometry_validation() {
        assert_eq!(DetectorParams::default().n_s().unwrap(), 1000);
        assert_eq!(DetectorParams::default().n_ns().unwrap(), 4000);
        let bad = DetectorParams {
            beta: 0.6,
            ..DetectorParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorParams {
            delta: 0.0007,
            ..DetectorParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorParams {
            tau_ns: 1.5,
            ..DetectorParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(DetectorParams::for_recording(0.055).validate().is_ok());
    }

    #[test]
    fn single_burst_detected() {
        // 0.9 sin(40 t) on [10, 25), zero elsewhere.
        let tr = synth(40_000, |t| if (10.0..25.0).contains(&t) { 0.9 * (40.0 * t).sin() } else { 0.0 });
        let log = detect(&tr, &DetectorParams::default()).unwrap();
        assert_eq!(log.onsets.len(), 1);
        assert_eq!(log.offsets.len(), 1);
        assert!(log.almost_onsets.is_empty());
        assert!(log.almost_offsets.is_empty());
        assert!(log.artefacts.is_empty());
        assert_eq!(log.state_at_end, Some(State::Ns));
        // |x(10)| = 0.9 |sin 400| > alpha and x(9.999) = 0.
        assert!((0.9 * 400f64.sin()).abs() > 0.55);
        assert!((log.onsets[0] - 10.0).abs() < 1e-9);
        // x(24.999) is above beta and x(25) = 0.
        assert!((0.9 * (40.0 * 24.999f64).sin()).abs() >= 0.45);
        assert!((log.offsets[0] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn short_burst_is_almost_onset() {
        // Shorter than tau_s - tau_w, so the last window positions see nothing.
        let tr = synth(20_000, |t| burst(t, 8.0, 5.0));
        let log = detect(&tr, &fast_params()).unwrap();
        assert!(log.onsets.is_empty());
        assert_eq!(log.almost_onsets.len(), 1);
    }

    #[test]
    fn jump_opens_artefact() {
        // Baseline 0.1 with a two-sample step of 0.5 at t = 8.
        let tr = synth(20_000, |t| if (7.9995..8.0015).contains(&t) { 0.6 } else { 0.1 });
        let log = detect(&tr, &fast_params()).unwrap();
        assert!(log.onsets.is_empty());
        assert_eq!(log.artefacts.len(), 1);
        let (a, b) = log.artefacts[0];
        assert!((a - 8.0).abs() < 1e-9);
        assert!(b > a);
    }

    #[test]
    fn startup_skips_noisy_prefix() {
        let tr = synth(30_000, |t| if t < 3.0 { 0.5 * (40.0 * t).sin() } else { 0.0 });
        let log = detect(&tr, &fast_params()).unwrap();
        assert!(log.t_start >= 2.9);
        assert!(log.onsets.is_empty());
    }

    #[test]
    fn too_short_is_an_error() {
        let tr = synth(3000, |_| 0.0);
        assert!(matches!(
            detect(&tr, &DetectorParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ends_mid_confirmation() {
        let tr = synth(11_000, |t| if t >= 10.0 { 0.9 * (40.0 * t).sin() } else { 0.0 });
        let log = detect(&tr, &fast_params()).unwrap();
        assert!(log.onsets.is_empty());
        assert_eq!(log.almost_onsets.len(), 1);
    }

    #[test]
    fn streaming_matches_batch() {
        let tr = synth(60_000, |t| {
            burst(t, 10.0, 95.0) + burst(t, 33.0, 4.0) + burst(t, 40.0, 76.0) + 0.05 * (7.0 * t).sin()
        });
        let p = DetectorParams::default();
        let batch = detect(&tr, &p).unwrap();
        for chunk in [1usize, 997, 20_000] {
            let mut det = RelayDetector::new(p, 0.0).unwrap();
            let mut events = Vec::new();
            for c in tr.values().chunks(chunk) {
                events.extend(det.push(c));
            }
            let (last, log) = det.finish().unwrap();
            events.extend(last);
            assert_eq!(log, batch, "chunk = {chunk}");
            let onsets: Vec<f64> = events
                .iter()
                .filter_map(|e| match e {
                    Event::Onset(t) => Some(*t),
                    _ => None,
                })
                .collect();
            assert_eq!(onsets, batch.onsets);
        }
        assert_eq!(batch.onsets.len(), 2);
        assert_eq!(batch.almost_onsets.len(), 1);
    }

    #[test]
    fn residence_arithmetic() {
        let log = EventLog {
            onsets: vec![10.0, 40.0],
            offsets: vec![25.0, 50.0],
            ..EventLog::default()
        };
        assert_eq!(residence_times(&log), (vec![15.0, 10.0], vec![15.0]));
        assert_eq!(residence_times(&EventLog::default()), (vec![], vec![]));
    }

    #[test]
    fn overlap_taxonomy() {
        let log = |a: f64, b: f64| EventLog {
            onsets: vec![a],
            offsets: vec![b],
            ..EventLog::default()
        };
        let ann = Annotations::new(vec![(6.0, 9.0)]).unwrap();
        assert_eq!(overlap_score(&log(5.0, 8.0), &ann, 0.0).n_correct, 1);
        let ann = Annotations::new(vec![(20.0, 25.0)]).unwrap();
        let r = overlap_score(&log(5.0, 8.0), &ann, 0.0);
        assert_eq!((r.n_correct, r.n_false), (0, 1));
        let ann = Annotations::new(vec![(5.0, 10.0)]).unwrap();
        assert_eq!(overlap_score(&log(6.0, 7.0), &ann, 0.0).n_correct, 1);
        // containment the other way round
        assert_eq!(overlap_score(&log(4.0, 11.0), &ann, 0.0).n_correct, 1);
        // overlap fraction knob
        let ann = Annotations::new(vec![(7.5, 9.0)]).unwrap();
        assert_eq!(overlap_score(&log(5.0, 8.0), &ann, 0.5).n_correct, 0);
        assert_eq!(overlap_score(&log(5.0, 8.0), &ann, 0.1).n_correct, 1);
    }

    #[test]
    fn annotations_validated() {
        assert!(Annotations::new(vec![(1.0, 2.0), (1.5, 3.0)]).is_err());
        assert!(Annotations::new(vec![(2.0, 1.0)]).is_err());
        assert!(Annotations::new(vec![(1.0, 2.0), (2.0, 3.0)]).is_ok());
    }

    #[test]
    fn single_point_grid() {
        let tr = synth(20_000, |_| 0.0);
        let ann = Annotations::default();
        let sweep = tune_alpha(&tr, &ann, &fast_params(), &[0.55]).unwrap();
        assert_eq!(sweep.best, 0.55);
        assert!(tune_alpha(&tr, &ann, &fast_params(), &[]).is_err());
    }
}
