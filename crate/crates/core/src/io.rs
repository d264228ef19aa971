//! CSV and TOML interchange. Floats are written in Rust's shortest
//! round-trip form, so reading a file back reproduces the values exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classifier::{LabeledSample, LabeledTrack, SvmModel};
use crate::detector::{Annotations, EventLog, State};
use crate::error::{Error, Result};
use crate::features::{FeatureCurve, FeatureTrack, SvmType, FEATURE_NAMES};
use crate::model::CtType;
use crate::trajectory::Trajectory;

/// Version written into serialised models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Float cell; NaN becomes an empty cell.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn parse_err(source: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        msg: msg.into(),
    }
}

fn csv_err(source: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_err(source, line, format!("{kind:?}")),
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn write_row<W: Write, I, S>(w: &mut csv::Writer<W>, cells: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(cells).map_err(|e| csv_err("output", e))
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?
        .flush()?;
    Ok(())
}

/// CSV records with their 1-based line numbers, header checked against
/// `expected` (a prefix match when `prefix` is set).
struct Records {
    source: String,
    header: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Records {
    fn read<R: Read>(r: R, source: &str) -> Result<Records> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(source, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(source, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(str::is_empty) {
                continue;
            }
            rows.push((line, rec));
        }
        Ok(Records {
            source: source.to_string(),
            header,
            rows,
        })
    }

    fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header.len() < expected.len() || self.header.iter().zip(expected).any(|(a, b)| a != b) {
            return Err(parse_err(
                &self.source,
                1,
                format!("expected header '{}', found '{}'", expected.join(","), self.header.join(",")),
            ));
        }
        Ok(())
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        parse_err(&self.source, line, msg)
    }

    fn cell<'a>(&self, line: usize, rec: &'a csv::StringRecord, i: usize) -> Result<&'a str> {
        rec.get(i)
            .ok_or_else(|| self.err(line, format!("expected at least {} fields, found {}", i + 1, rec.len())))
    }

    fn f64(&self, line: usize, rec: &csv::StringRecord, i: usize) -> Result<f64> {
        let s = self.cell(line, rec, i)?;
        s.parse::<f64>()
            .map_err(|_| self.err(line, format!("field {}: '{s}' is not a number", i + 1)))
    }

    /// Empty cells read as NaN.
    fn f64_or_nan(&self, line: usize, rec: &csv::StringRecord, i: usize) -> Result<f64> {
        match self.cell(line, rec, i)? {
            "" => Ok(f64::NAN),
            _ => self.f64(line, rec, i),
        }
    }
}

/// `t,x` or `t,x,y`, one row per sample.
pub fn write_trajectory<W: Write>(w: W, tr: &Trajectory) -> Result<()> {
    let mut w = writer(w);
    match tr.y() {
        Some(y) => {
            write_row(&mut w, ["t", "x", "y"])?;
            for (i, (x, y)) in tr.values().iter().zip(y).enumerate() {
                write_row(&mut w, [fmt_f64(tr.time(i)), fmt_f64(*x), fmt_f64(*y)])?;
            }
        }
        None => {
            write_row(&mut w, ["t", "x"])?;
            for (i, x) in tr.values().iter().enumerate() {
                write_row(&mut w, [fmt_f64(tr.time(i)), fmt_f64(*x)])?;
            }
        }
    }
    finish(w)
}

/// Read a uniformly sampled trajectory. With `expected_dt` the spacing must
/// match it within 1e-9 relative and the returned trajectory uses it exactly.
pub fn read_trajectory<R: Read>(r: R, source: &str, expected_dt: Option<f64>) -> Result<Trajectory> {
    let recs = Records::read(r, source)?;
    recs.expect_header(&["t", "x"])?;
    let has_y = recs.header.get(2).is_some_and(|h| h == "y");
    let n = recs.rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{source}: need at least two samples")));
    }
    let mut ts = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(if has_y { n } else { 0 });
    for (line, rec) in &recs.rows {
        ts.push(recs.f64(*line, rec, 0)?);
        let x = recs.f64(*line, rec, 1)?;
        if !x.is_finite() {
            return Err(recs.err(*line, "non-finite sample"));
        }
        xs.push(x);
        if has_y {
            ys.push(recs.f64(*line, rec, 2)?);
        }
    }
    let est = (ts[n - 1] - ts[0]) / (n - 1) as f64;
    if !(est > 0.0) {
        return Err(recs.err(recs.rows[1].0, "time column must increase"));
    }
    let dt = match expected_dt {
        Some(dt) => {
            if ((est - dt) / dt).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "{source}: sample spacing {est} does not match dt = {dt}"
                )));
            }
            dt
        }
        None => est,
    };
    for (i, (line, _)) in recs.rows.iter().enumerate() {
        if (ts[i] - (ts[0] + i as f64 * dt)).abs() > 1e-6 * dt {
            return Err(recs.err(*line, format!("t = {} breaks the uniform spacing {dt}", ts[i])));
        }
    }
    if has_y {
        Trajectory::with_y(ts[0], dt, xs, ys)
    } else {
        Trajectory::new(ts[0], dt, xs)
    }
}

/// `onset_s,offset_s`.
pub fn write_annotations<W: Write>(w: W, ann: &Annotations) -> Result<()> {
    let mut w = writer(w);
    write_row(&mut w, ["onset_s", "offset_s"])?;
    for &(a, b) in ann.intervals() {
        write_row(&mut w, [fmt_f64(a), fmt_f64(b)])?;
    }
    finish(w)
}

pub fn read_annotations<R: Read>(r: R, source: &str) -> Result<Annotations> {
    let recs = Records::read(r, source)?;
    recs.expect_header(&["onset_s", "offset_s"])?;
    let mut iv = Vec::with_capacity(recs.rows.len());
    for (line, rec) in &recs.rows {
        let a = recs.f64(*line, rec, 0)?;
        let b = recs.f64(*line, rec, 1)?;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(recs.err(*line, format!("need onset < offset, got {a}, {b}")));
        }
        iv.push((a, b));
    }
    Annotations::new(iv)
}

/// `kind,t_start,t_end` with kinds `analysis` (the analysed span), `ct`
/// (open at the end when `t_end` is empty), `almost_on`, `almost_off` and
/// `artefact`.
pub fn write_event_log<W: Write>(w: W, log: &EventLog) -> Result<()> {
    let mut w = writer(w);
    write_row(&mut w, ["kind", "t_start", "t_end"])?;
    write_row(&mut w, ["analysis".to_string(), fmt_f64(log.t_start), fmt_f64(log.t_end)])?;
    for (t1, t2) in log.intervals() {
        write_row(&mut w, ["ct".to_string(), fmt_f64(t1), t2.map(fmt_f64).unwrap_or_default()])?;
    }
    for &t in &log.almost_onsets {
        write_row(&mut w, ["almost_on".to_string(), fmt_f64(t), String::new()])?;
    }
    for &t in &log.almost_offsets {
        write_row(&mut w, ["almost_off".to_string(), fmt_f64(t), String::new()])?;
    }
    for &(a, b) in &log.artefacts {
        write_row(&mut w, ["artefact".to_string(), fmt_f64(a), fmt_f64(b)])?;
    }
    finish(w)
}

pub fn read_event_log<R: Read>(r: R, source: &str) -> Result<EventLog> {
    let recs = Records::read(r, source)?;
    recs.expect_header(&["kind", "t_start", "t_end"])?;
    let mut log = EventLog::default();
    let mut seen_analysis = false;
    for (line, rec) in &recs.rows {
        let line = *line;
        let a = recs.f64(line, rec, 1)?;
        match recs.cell(line, rec, 0)? {
            "analysis" => {
                log.t_start = a;
                log.t_end = recs.f64(line, rec, 2)?;
                seen_analysis = true;
            }
            "ct" => {
                if log.onsets.len() > log.offsets.len() {
                    return Err(recs.err(line, "transition after an open one"));
                }
                log.onsets.push(a);
                let b = recs.f64_or_nan(line, rec, 2)?;
                if !b.is_nan() {
                    log.offsets.push(b);
                }
            }
            "almost_on" => log.almost_onsets.push(a),
            "almost_off" => log.almost_offsets.push(a),
            "artefact" => log.artefacts.push((a, recs.f64(line, rec, 2)?)),
            other => return Err(recs.err(line, format!("unknown event kind '{other}'"))),
        }
    }
    if !seen_analysis {
        return Err(recs.err(1, "missing 'analysis' row"));
    }
    log.state_at_end = Some(if log.onsets.len() > log.offsets.len() {
        State::S
    } else {
        State::Ns
    });
    Ok(log)
}

/// Full-resolution features of one transition: a row per TSP time, slope
/// cells filled only on the slope grid.
pub fn write_feature_track<W: Write>(w: W, ft: &FeatureTrack) -> Result<()> {
    let mut w = writer(w);
    write_row(&mut w, std::iter::once("T").chain(FEATURE_NAMES))?;
    for k in 0..ft.n_tsp() {
        let t = ft.tsp_time(k);
        let mut row = vec![fmt_f64(t)];
        row.extend((0..4).map(|f| fmt_f64(ft.tsp(f)[k])));
        row.extend((4..8).map(|i| ft.value(i, t).map(fmt_f64).unwrap_or_default()));
        write_row(&mut w, row)?;
    }
    finish(w)
}

/// Features of one transition sampled on the slope grid, with slope
/// columns for several slope lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrack {
    pub source_id: String,
    pub label: CtType,
    pub t1: f64,
    pub times: Vec<f64>,
    /// `[gv, log10gv, ac, log10gv_ac]` per time.
    pub tsp: Vec<[f64; 4]>,
    /// Per slope length, the four slopes per time.
    pub slopes: Vec<Vec<[f64; 4]>>,
}

/// A set of [`SampledTrack`]s sharing slope lengths and grid spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dm: f64,
    pub t_ms: Vec<f64>,
    pub tracks: Vec<SampledTrack>,
}

/// One [`SampledTrack`] viewed with a particular slope length.
pub struct TableCurve<'a> {
    track: &'a SampledTrack,
    slope_idx: usize,
    dm: f64,
}

impl SampledTrack {
    /// Sample `lt` on the grid `k·dm` within its TSP range.
    pub fn from_track(lt: &LabeledTrack, t_ms: &[f64]) -> SampledTrack {
        let ft = &lt.track;
        let dm = ft.config().dm;
        let k0 = (ft.defined_from(0) / dm - 1e-9).ceil() as i64;
        let k1 = (ft.t_plus() / dm + 1e-9).floor() as i64;
        let times: Vec<f64> = (k0..=k1).map(|k| k as f64 * dm).collect();
        let tsp = times
            .iter()
            .map(|&t| std::array::from_fn(|f| ft.value(f, t).unwrap_or(f64::NAN)))
            .collect();
        let slopes = t_ms
            .iter()
            .map(|&tm| {
                times
                    .iter()
                    .map(|&t| std::array::from_fn(|f| ft.slope_at(f, t, tm).unwrap_or(f64::NAN)))
                    .collect()
            })
            .collect();
        SampledTrack {
            source_id: lt.source_id.clone(),
            label: lt.label,
            t1: lt.t1,
            times,
            tsp,
            slopes,
        }
    }

    fn index(&self, t: f64, dm: f64) -> Option<usize> {
        let first = *self.times.first()?;
        let k = ((t - first) / dm).round();
        if k < 0.0 || k as usize >= self.times.len() || (self.times[k as usize] - t).abs() > 1e-6 * dm {
            return None;
        }
        Some(k as usize)
    }
}

impl FeatureCurve for TableCurve<'_> {
    fn feature(&self, i: usize, t: f64) -> Option<f64> {
        let k = self.track.index(t, self.dm)?;
        let v = if i < 4 {
            self.track.tsp[k][i]
        } else {
            self.track.slopes[self.slope_idx][k][i - 4]
        };
        (!v.is_nan()).then_some(v)
    }

    fn first_defined(&self, i: usize) -> f64 {
        self.track
            .times
            .iter()
            .find(|&&t| self.feature(i, t).is_some())
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    fn last_time(&self) -> f64 {
        self.track.times.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    fn grid_step(&self) -> f64 {
        self.dm
    }
}

fn slope_header(t_m: f64) -> impl Iterator<Item = String> {
    FEATURE_NAMES[4..].iter().map(move |n| format!("{n}@{t_m}"))
}

impl FeatureTable {
    pub fn from_tracks(tracks: &[LabeledTrack], t_ms: &[f64]) -> Result<FeatureTable> {
        let dm = tracks
            .first()
            .ok_or_else(|| Error::InsufficientData("no tracks".into()))?
            .track
            .config()
            .dm;
        if t_ms.is_empty() {
            return Err(Error::invalid("need at least one slope length"));
        }
        Ok(FeatureTable {
            dm,
            t_ms: t_ms.to_vec(),
            tracks: tracks.iter().map(|lt| SampledTrack::from_track(lt, t_ms)).collect(),
        })
    }

    fn slope_index(&self, t_m: f64) -> Result<usize> {
        self.t_ms
            .iter()
            .position(|&v| (v - t_m).abs() < 1e-9)
            .ok_or_else(|| Error::invalid(format!("slope length t_m = {t_m} is not in the table ({:?})", self.t_ms)))
    }

    pub fn curve(&self, k: usize, t_m: f64) -> Result<TableCurve<'_>> {
        Ok(TableCurve {
            track: &self.tracks[k],
            slope_idx: self.slope_index(t_m)?,
            dm: self.dm,
        })
    }

    /// Feature vectors of every track at `t`.
    pub fn samples_at(&self, t: f64, svm_type: SvmType, t_m: f64) -> Result<Vec<LabeledSample>> {
        let j = self.slope_index(t_m)?;
        self.tracks
            .iter()
            .map(|st| {
                let curve = TableCurve {
                    track: st,
                    slope_idx: j,
                    dm: self.dm,
                };
                let features = svm_type
                    .columns()
                    .map(|i| {
                        curve.feature(i, t).ok_or(Error::UndefinedFeature {
                            feature: FEATURE_NAMES[i],
                            t,
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(LabeledSample {
                    features,
                    label: st.label,
                    t,
                    source_id: st.source_id.clone(),
                })
            })
            .collect()
    }

    /// Grid times at which every track has every feature of `svm_type`.
    pub fn common_times(&self, svm_type: SvmType, t_m: f64) -> Result<Vec<f64>> {
        let j = self.slope_index(t_m)?;
        let Some(first) = self.tracks.first() else {
            return Ok(Vec::new());
        };
        Ok(first
            .times
            .iter()
            .copied()
            .filter(|&t| {
                self.tracks.iter().all(|st| {
                    let c = TableCurve {
                        track: st,
                        slope_idx: j,
                        dm: self.dm,
                    };
                    svm_type.columns().all(|i| c.feature(i, t).is_some())
                })
            })
            .collect())
    }

    /// `source_id,label,t1,T,<4 TSPs>,<4 slopes per t_m>`; the `dm` is
    /// recovered from the time column on reading.
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut w = writer(w);
        let mut header: Vec<String> = ["source_id", "label", "t1", "T"].map(String::from).to_vec();
        header.extend(FEATURE_NAMES[..4].iter().map(|s| s.to_string()));
        for &tm in &self.t_ms {
            header.extend(slope_header(tm));
        }
        write_row(&mut w, &header)?;
        for st in &self.tracks {
            for (k, &t) in st.times.iter().enumerate() {
                let mut row = vec![st.source_id.clone(), st.label.as_str().to_string(), fmt_f64(st.t1), fmt_f64(t)];
                row.extend(st.tsp[k].iter().map(|&v| fmt_f64(v)));
                for s in &st.slopes {
                    row.extend(s[k].iter().map(|&v| fmt_f64(v)));
                }
                write_row(&mut w, row)?;
            }
        }
        finish(w)
    }

    pub fn read<R: Read>(r: R, source: &str, dm: f64) -> Result<FeatureTable> {
        let recs = Records::read(r, source)?;
        let mut fixed: Vec<&str> = vec!["source_id", "label", "t1", "T"];
        fixed.extend(&FEATURE_NAMES[..4]);
        recs.expect_header(&fixed)?;
        let extra = &recs.header[fixed.len()..];
        if extra.is_empty() || extra.len() % 4 != 0 {
            return Err(recs.err(1, "slope columns must come in groups of four"));
        }
        let mut t_ms = Vec::new();
        for group in extra.chunks(4) {
            let tm_str = group[0]
                .split_once('@')
                .map(|(_, v)| v)
                .ok_or_else(|| recs.err(1, format!("slope column '{}' lacks '@t_m'", group[0])))?;
            let tm: f64 = tm_str
                .parse()
                .map_err(|_| recs.err(1, format!("bad slope length in '{}'", group[0])))?;
            let want: Vec<String> = slope_header(tm).collect();
            if group != want.as_slice() {
                return Err(recs.err(1, format!("expected columns {}", want.join(","))));
            }
            t_ms.push(tm);
        }
        let width = fixed.len() + extra.len();
        let mut tracks: Vec<SampledTrack> = Vec::new();
        for (line, rec) in &recs.rows {
            let line = *line;
            if rec.len() != width {
                return Err(recs.err(line, format!("expected {width} fields, found {}", rec.len())));
            }
            let id = recs.cell(line, rec, 0)?;
            let label: CtType = recs
                .cell(line, rec, 1)?
                .parse()
                .map_err(|e: Error| recs.err(line, e.to_string()))?;
            let t1 = recs.f64(line, rec, 2)?;
            let t = recs.f64(line, rec, 3)?;
            let start_new = tracks.last().is_none_or(|st| st.source_id != id || st.t1 != t1);
            if start_new {
                tracks.push(SampledTrack {
                    source_id: id.to_string(),
                    label,
                    t1,
                    times: Vec::new(),
                    tsp: Vec::new(),
                    slopes: vec![Vec::new(); t_ms.len()],
                });
            }
            let st = tracks.last_mut().expect("pushed above");
            if let Some(&prev) = st.times.last() {
                if ((t - prev) / dm - 1.0).abs() > 1e-6 {
                    return Err(recs.err(line, format!("T = {t} does not follow {prev} by {dm}")));
                }
            }
            st.times.push(t);
            let mut vals = [0.0; 4];
            for (f, v) in vals.iter_mut().enumerate() {
                *v = recs.f64_or_nan(line, rec, 4 + f)?;
            }
            st.tsp.push(vals);
            for (j, s) in st.slopes.iter_mut().enumerate() {
                let mut vals = [0.0; 4];
                for (f, v) in vals.iter_mut().enumerate() {
                    *v = recs.f64_or_nan(line, rec, 8 + 4 * j + f)?;
                }
                s.push(vals);
            }
        }
        Ok(FeatureTable { dm, t_ms, tracks })
    }
}

/// A header plus float rows, NaN written as empty cells.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(w);
    write_row(&mut w, header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::LengthMismatch {
                expected: header.len(),
                got: r.len(),
            });
        }
        write_row(&mut w, r.iter().map(|&v| fmt_f64(v)))?;
    }
    finish(w)
}

/// Like [`write_table`] for rows of preformatted cells.
pub fn write_text_table<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(w);
    write_row(&mut w, header)?;
    for r in rows {
        write_row(&mut w, r)?;
    }
    finish(w)
}

/// Read a float table written by [`write_table`]; returns the header and
/// rows, empty cells as NaN.
pub fn read_table<R: Read>(r: R, source: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let recs = Records::read(r, source)?;
    let width = recs.header.len();
    let mut rows = Vec::with_capacity(recs.rows.len());
    for (line, rec) in &recs.rows {
        if rec.len() != width {
            return Err(recs.err(*line, format!("expected {width} fields, found {}", rec.len())));
        }
        rows.push((0..width).map(|i| recs.f64_or_nan(*line, rec, i)).collect::<Result<Vec<f64>>>()?);
    }
    Ok((recs.header.clone(), rows))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    model: SvmModel,
}

pub fn model_to_toml(m: &SvmModel) -> Result<String> {
    toml::to_string(&ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: m.clone(),
    })
    .map_err(|e| Error::Config(e.to_string()))
}

pub fn model_from_toml(s: &str) -> Result<SvmModel> {
    let f: ModelFile = toml::from_str(s).map_err(|e| Error::Config(format!("model file: {e}")))?;
    if f.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            f.format_version
        )));
    }
    let m = f.model;
    let n = m.scaler.len();
    if m.weights.len() != 3 || m.biases.len() != 3 || m.weights.iter().any(|w| w.len() != n) {
        return Err(Error::Config("model file: weight shapes do not match the scaler".into()));
    }
    if n != m.meta.svm_type.columns().len() {
        return Err(Error::Config(format!(
            "model file: {n} features but SVM type {} uses {}",
            m.meta.svm_type,
            m.meta.svm_type.columns().len()
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip_is_exact() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 1e-7 + 1.0 / 3.0).collect();
        let tr = Trajectory::with_y(12.5, 0.001, x, y).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &tr).unwrap();
        let back = read_trajectory(buf.as_slice(), "mem", Some(0.001)).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "t,x\n0,0.1\n0.001,0.2\n0.002,abc\n";
        let e = read_trajectory(text.as_bytes(), "rec.csv", None).unwrap_err();
        match e {
            Error::Parse { line, ref source_name, .. } => {
                assert_eq!(line, 4);
                assert_eq!(source_name, "rec.csv");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "t,x\n0,0.1\n0.001,0.2\n0.0025,0.3\n0.003,0.3\n";
        assert!(matches!(
            read_trajectory(text.as_bytes(), "r", None),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn wrong_spacing_rejected() {
        let text = "t,x\n0,0.1\n0.002,0.2\n0.004,0.3\n";
        assert!(read_trajectory(text.as_bytes(), "r", Some(0.001)).unwrap_err().is_validation());
    }

    #[test]
    fn event_log_round_trip() {
        let log = EventLog {
            onsets: vec![10.0, 30.5],
            offsets: vec![25.25],
            almost_onsets: vec![3.1],
            almost_offsets: vec![20.0],
            artefacts: vec![(7.0, 7.5)],
            state_at_end: Some(State::S),
            t_start: 0.0,
            t_end: 40.0,
        };
        let mut buf = Vec::new();
        write_event_log(&mut buf, &log).unwrap();
        let back = read_event_log(buf.as_slice(), "ev").unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn annotations_round_trip_and_validation() {
        let ann = Annotations::new(vec![(1.0, 2.5), (10.0, 12.0)]).unwrap();
        let mut buf = Vec::new();
        write_annotations(&mut buf, &ann).unwrap();
        assert_eq!(read_annotations(buf.as_slice(), "a").unwrap(), ann);
        let bad = "onset_s,offset_s\n1,2\n5,4\n";
        assert!(matches!(read_annotations(bad.as_bytes(), "a"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn table_nan_cells() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["T", "v"], &[vec![1.0, f64::NAN], vec![2.0, 0.1]]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "T,v\n1,\n2,0.1\n");
        let (h, rows) = read_table(buf.as_slice(), "t").unwrap();
        assert_eq!(h, vec!["T", "v"]);
        assert!(rows[0][1].is_nan());
        assert_eq!(rows[1], vec![2.0, 0.1]);
    }
}
