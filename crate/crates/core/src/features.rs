//! Time-series properties around a transition and their slopes.
//!
//! For a transition at `t₁` every quantity is indexed by the shifted clock
//! `T = t − t₁`. The four properties (TSPs) are the Gaussian-weighted
//! variance `GV`, `log₁₀GV`, the lag autocorrelation `AC` and `log₁₀GV(AC)`;
//! the four slope features are least-squares slopes of those tracks over the
//! preceding `t_m` seconds.
//!
//! Internally all positions are integer sample offsets from the sample at
//! `t₁`, so tracks of different transitions line up exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Column names in feature-vector order.
pub const FEATURE_NAMES: [&str; 8] = [
    "gv",
    "log10gv",
    "ac",
    "log10gv_ac",
    "m_gv",
    "m_log10gv",
    "m_ac",
    "m_log10gv_ac",
];

pub const GV: usize = 0;
pub const LOG10GV: usize = 1;
pub const AC: usize = 2;
pub const LOG10GV_AC: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    /// TSP window length.
    pub t_w: f64,
    /// TSP step.
    pub dw: f64,
    /// Slope length.
    pub t_m: f64,
    /// Slope step.
    pub dm: f64,
    /// Autocorrelation lag in seconds.
    pub lag: f64,
    /// Detrending kernel standard deviation, in samples.
    pub bandwidth: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            t_w: 1.0,
            dw: 0.001,
            t_m: 8.0,
            dm: 0.1,
            lag: 0.001,
            bandwidth: 30.0,
        }
    }
}

/// Window geometry in samples of spacing `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Grid {
    w: usize,
    sw: usize,
    m: usize,
    sm: usize,
    lag: usize,
}

impl WindowConfig {
    pub fn with_t_m(&self, t_m: f64) -> Self {
        WindowConfig { t_m, ..*self }
    }

    pub fn validate(&self, dt: f64) -> Result<()> {
        self.grid(dt).map(|_| ())
    }

    fn grid(&self, dt: f64) -> Result<Grid> {
        let c = self;
        if ![c.t_w, c.dw, c.t_m, c.dm, c.lag, c.bandwidth].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("window settings must be finite"));
        }
        if !(c.t_w > 0.0 && c.t_m > c.t_w) {
            return Err(Error::invalid("window lengths must satisfy 0 < t_w < t_m"));
        }
        if c.lag < dt * (1.0 - 1e-9) {
            return Err(Error::invalid("autocorrelation lag must be at least one sample"));
        }
        if !(c.bandwidth >= 1.0) {
            return Err(Error::invalid("detrending bandwidth must be at least one sample"));
        }
        let g = Grid {
            w: samples(c.t_w, dt, "t_w")?,
            sw: samples(c.dw, dt, "dw")?,
            m: samples(c.t_m, dt, "t_m")?,
            sm: samples(c.dm, dt, "dm")?,
            lag: samples(c.lag, dt, "lag")?,
        };
        if g.w % g.sw != 0 || g.m % g.sw != 0 || g.sm % g.sw != 0 {
            return Err(Error::invalid("t_w, t_m and dm must be multiples of dw"));
        }
        if g.lag >= g.w {
            return Err(Error::invalid("autocorrelation lag must be shorter than t_w"));
        }
        Ok(g)
    }
}

fn samples(v: f64, dt: f64, what: &str) -> Result<usize> {
    let r = (v / dt).round();
    if r < 1.0 || (v / dt - r).abs() > 1e-6 * r {
        return Err(Error::invalid(format!("{what} = {v} is not a whole number of samples of {dt}")));
    }
    Ok(r as usize)
}

/// Feature subsets used by the three classifier variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SvmType {
    /// The four TSPs.
    Tsp,
    /// The four slopes.
    Slopes,
    /// TSPs and slopes.
    All,
}

impl SvmType {
    pub fn number(self) -> u8 {
        match self {
            SvmType::Tsp => 1,
            SvmType::Slopes => 2,
            SvmType::All => 3,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(SvmType::Tsp),
            2 => Ok(SvmType::Slopes),
            3 => Ok(SvmType::All),
            _ => Err(Error::invalid(format!("svm type must be 1, 2 or 3, got {n}"))),
        }
    }

    /// Indices into [`FEATURE_NAMES`].
    pub fn columns(self) -> std::ops::Range<usize> {
        match self {
            SvmType::Tsp => 0..4,
            SvmType::Slopes => 4..8,
            SvmType::All => 0..8,
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        &FEATURE_NAMES[self.columns()]
    }

    pub fn uses_slopes(self) -> bool {
        self != SvmType::Tsp
    }
}

impl From<SvmType> for u8 {
    fn from(t: SvmType) -> u8 {
        t.number()
    }
}

impl TryFrom<u8> for SvmType {
    type Error = Error;
    fn try_from(n: u8) -> Result<Self> {
        SvmType::from_number(n)
    }
}

impl std::fmt::Display for SvmType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Gaussian weights for `n` equally spaced points across a window, centred
/// on the window midpoint with standard deviation of one sixth of its span.
fn gaussian_weights(n: usize) -> Vec<f64> {
    let span = (n - 1) as f64;
    let mid = 0.5 * span;
    let sd = span / 6.0;
    (0..n)
        .map(|k| {
            let z = (k as f64 - mid) / sd;
            (-0.5 * z * z).exp()
        })
        .collect()
}

/// `Σ wᵢ xᵢ² / Σ wᵢ`; NaN when any sample is NaN.
fn weighted_second_moment(xs: &[f64], w: &[f64], w_sum: f64) -> f64 {
    debug_assert_eq!(xs.len(), w.len());
    let mut acc = [0.0f64; 4];
    let chunks = xs.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let i = 4 * c + l;
            acc[l] += w[i] * xs[i] * xs[i];
        }
    }
    for i in 4 * chunks..xs.len() {
        acc[0] += w[i] * xs[i] * xs[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) / w_sum
}

/// Pearson correlation of `xs[..n-lag]` with `xs[lag..]`; NaN when either
/// segment has zero variance.
fn lag_correlation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len() - lag;
    let a = &xs[..n];
    let b = &xs[lag..];
    // Shifted sums; the shift makes a constant segment exactly zero.
    let (ca, cb) = (a[0], b[0]);
    let (mut su, mut sv, mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x - ca, y - cb);
        su += u;
        sv += v;
        suu += u * u;
        svv += v * v;
        suv += u * v;
    }
    let nf = n as f64;
    let saa = suu - su * su / nf;
    let sbb = svv - sv * sv / nf;
    let sab = suv - su * sv / nf;
    if saa <= 0.0 || sbb <= 0.0 {
        return f64::NAN;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

fn log10_or_nan(v: f64) -> f64 {
    if v > 0.0 {
        v.log10()
    } else {
        f64::NAN
    }
}

/// Least-squares slope of `ys` against `xs`, skipping NaN values; NaN when
/// fewer than two distinct abscissae remain.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        if !y.is_nan() {
            n += 1;
            sx += x;
            sy += y;
        }
    }
    if n < 2 {
        return f64::NAN;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        if !y.is_nan() {
            let u = x - mx;
            sxx += u * u;
            sxy += u * (y - my);
        }
    }
    if sxx <= 0.0 {
        return f64::NAN;
    }
    sxy / sxx
}

/// Subtract a Gaussian-kernel smooth (standard deviation `bandwidth`
/// samples, truncated at four standard deviations, renormalised where the
/// kernel runs off either end).
pub fn detrend(tr: &Trajectory, bandwidth: f64) -> Result<Trajectory> {
    if !(bandwidth >= 1.0 && bandwidth.is_finite()) {
        return Err(Error::invalid("detrending bandwidth must be at least one sample"));
    }
    let xs = tr.values();
    let n = xs.len();
    let half = (4.0 * bandwidth + 0.5) as usize;
    let kernel: Vec<f64> = (0..=half)
        .map(|k| {
            let z = k as f64 / bandwidth;
            (-0.5 * z * z).exp()
        })
        .collect();
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let (mut num, mut den) = (0.0, 0.0);
            for (j, &x) in xs.iter().enumerate().take(hi + 1).skip(lo) {
                let k = kernel[i.abs_diff(j)];
                num += k * x;
                den += k;
            }
            xs[i] - num / den
        })
        .collect();
    tr.with_values(out)
}

/// Sample range `[t − t_w, t]` of `tr`, checked.
fn window_range(tr: &Trajectory, t: f64, t_w: f64) -> Result<(usize, usize)> {
    let w = samples(t_w, tr.dt(), "t_w")?;
    let end = tr
        .index_of(t)
        .ok_or_else(|| Error::OutOfRange(format!("t = {t} is outside the trajectory")))?;
    if end < w {
        return Err(Error::OutOfRange(format!(
            "window [{}, {t}] starts before the trajectory",
            t - t_w
        )));
    }
    Ok((end - w, end))
}

/// Zero-mean Gaussian-weighted variance over `[t − t_w, t]`.
pub fn gaussian_variance(tr: &Trajectory, t: f64, t_w: f64) -> Result<f64> {
    let (a, b) = window_range(tr, t, t_w)?;
    let w = gaussian_weights(b - a + 1);
    let s: f64 = w.iter().sum();
    Ok(weighted_second_moment(&tr.values()[a..=b], &w, s))
}

/// Pearson correlation between `[t − t_w + lag, t]` and `[t − t_w, t − lag]`;
/// NaN for a constant window.
pub fn lag1_autocorr(tr: &Trajectory, t: f64, t_w: f64, lag: f64) -> Result<f64> {
    let (a, b) = window_range(tr, t, t_w)?;
    let l = samples(lag, tr.dt(), "lag")?;
    if l >= b - a {
        return Err(Error::invalid("lag must be shorter than the window"));
    }
    Ok(lag_correlation(&tr.values()[a..=b], l))
}

/// `log₁₀` of the Gaussian variance of an autocorrelation track over
/// `[t − t_w, t]`; NaN when that variance is zero.
pub fn log10_gv_of_ac(ac: &Trajectory, t: f64, t_w: f64) -> Result<f64> {
    Ok(log10_or_nan(gaussian_variance(ac, t, t_w)?))
}

/// Least-squares slope of `track` over `[t − t_m, t]`.
pub fn slope(track: &Trajectory, t: f64, t_m: f64) -> Result<f64> {
    let (a, b) = window_range(track, t, t_m)?;
    let xs: Vec<f64> = (a..=b).map(|i| track.time(i)).collect();
    Ok(ols_slope(&xs, &track.values()[a..=b]))
}

/// The eight feature tracks around one transition.
///
/// TSPs live on a grid of spacing `dw` starting at `T⁻ + t_w`; slopes on a
/// grid of spacing `dm` anchored at `T = 0`. Entries that are not yet
/// defined (for example `log₁₀GV(AC)` before `T⁻ + 2t_w`) hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack {
    dt: f64,
    t_minus: f64,
    t_plus: f64,
    cfg: WindowConfig,
    grid: Grid,
    /// Sample offset (from `t₁`) of the first TSP entry.
    tsp_first: i64,
    tsp: [Vec<f64>; 4],
    /// Sample offset of the first slope entry.
    slope_first: i64,
    slopes: [Vec<f64>; 4],
}

/// Compute the feature tracks of `tr` around `t1` over `[T⁻, T⁺]`.
pub fn feature_track(
    tr: &Trajectory,
    t1: f64,
    t_minus: f64,
    t_plus: f64,
    cfg: &WindowConfig,
) -> Result<FeatureTrack> {
    let dt = tr.dt();
    let g = cfg.grid(dt)?;
    if !(t_minus < 0.0 && t_plus >= 0.0) {
        return Err(Error::invalid(format!(
            "need T- < 0 <= T+, got T- = {t_minus}, T+ = {t_plus}"
        )));
    }
    let i1 = tr
        .index_of(t1)
        .ok_or_else(|| Error::OutOfRange(format!("t1 = {t1} is outside the trajectory")))?;
    let lo = (t_minus / dt).round() as i64;
    let hi = (t_plus / dt).round() as i64;
    if i1 as i64 + lo < 0 || i1 as i64 + hi >= tr.len() as i64 {
        return Err(Error::OutOfRange(format!(
            "[t1 + T-, t1 + T+] = [{}, {}] is not covered by the trajectory [{}, {}]",
            t1 + t_minus,
            t1 + t_plus,
            tr.t0(),
            tr.t_end()
        )));
    }
    if lo + (2 * g.w) as i64 > hi {
        return Err(Error::invalid("T+ - T- must be at least 2 t_w"));
    }
    let xs = tr.values();
    let at = |off: i64| (i1 as i64 + off) as usize;

    let tsp_first = lo + g.w as i64;
    let n_tsp = ((hi - tsp_first) as usize) / g.sw + 1;
    let weights = gaussian_weights(g.w + 1);
    let w_sum: f64 = weights.iter().sum();

    let mut gv = Vec::with_capacity(n_tsp);
    let mut ac = Vec::with_capacity(n_tsp);
    for k in 0..n_tsp {
        let end = at(tsp_first + (k * g.sw) as i64);
        let win = &xs[end - g.w..=end];
        gv.push(weighted_second_moment(win, &weights, w_sum));
        ac.push(lag_correlation(win, g.lag));
    }
    let log10gv: Vec<f64> = gv.iter().map(|&v| log10_or_nan(v)).collect();

    // GV of the AC track, over windows of the same length on the TSP grid.
    let wa = g.w / g.sw;
    let ac_weights = gaussian_weights(wa + 1);
    let ac_sum: f64 = ac_weights.iter().sum();
    let log10gv_ac: Vec<f64> = (0..n_tsp)
        .map(|k| {
            if k < wa {
                f64::NAN
            } else {
                log10_or_nan(weighted_second_moment(&ac[k - wa..=k], &ac_weights, ac_sum))
            }
        })
        .collect();

    let mut ft = FeatureTrack {
        dt,
        t_minus,
        t_plus,
        cfg: *cfg,
        grid: g,
        tsp_first,
        tsp: [gv, log10gv, ac, log10gv_ac],
        slope_first: 0,
        slopes: Default::default(),
    };
    ft.compute_slopes();
    Ok(ft)
}

impl FeatureTrack {
    fn compute_slopes(&mut self) {
        let g = self.grid;
        let hi = self.tsp_first + ((self.n_tsp() - 1) * g.sw) as i64;
        let first_defined = self.tsp_first + g.m as i64;
        let sm = g.sm as i64;
        let slope_first = first_defined.div_euclid(sm) * sm
            + if first_defined.rem_euclid(sm) == 0 { 0 } else { sm };
        self.slope_first = slope_first;
        let n = if slope_first > hi {
            0
        } else {
            ((hi - slope_first) / sm) as usize + 1
        };
        let span = g.m / g.sw;
        let xs: Vec<f64> = (0..=span).map(|k| (k * g.sw) as f64 * self.dt).collect();
        // log10GV(AC) starts t_w later than the other TSPs.
        let wa = g.w / g.sw;
        for f in 0..4 {
            let track = &self.tsp[f];
            self.slopes[f] = (0..n)
                .map(|j| {
                    let end_off = slope_first + j as i64 * sm;
                    let end = ((end_off - self.tsp_first) as usize) / g.sw;
                    if f == LOG10GV_AC && end - span < wa {
                        return f64::NAN;
                    }
                    ols_slope(&xs, &track[end - span..=end])
                })
                .collect();
        }
    }

    /// Same TSPs with slopes over a different slope length.
    pub fn with_t_m(&self, t_m: f64) -> Result<FeatureTrack> {
        let cfg = self.cfg.with_t_m(t_m);
        let grid = cfg.grid(self.dt)?;
        let mut ft = FeatureTrack {
            cfg,
            grid,
            slopes: Default::default(),
            ..self.clone()
        };
        ft.compute_slopes();
        Ok(ft)
    }

    pub fn config(&self) -> &WindowConfig {
        &self.cfg
    }

    pub fn t_minus(&self) -> f64 {
        self.t_minus
    }

    pub fn t_plus(&self) -> f64 {
        self.t_plus
    }

    pub fn t_m(&self) -> f64 {
        self.cfg.t_m
    }

    pub fn n_tsp(&self) -> usize {
        self.tsp[0].len()
    }

    pub fn n_slopes(&self) -> usize {
        self.slopes[0].len()
    }

    /// Shifted time of TSP entry `k`.
    pub fn tsp_time(&self, k: usize) -> f64 {
        (self.tsp_first + (k * self.grid.sw) as i64) as f64 * self.dt
    }

    /// Shifted time of slope entry `j`.
    pub fn slope_time(&self, j: usize) -> f64 {
        (self.slope_first + (j * self.grid.sm) as i64) as f64 * self.dt
    }

    /// TSP track by index (`GV`, `LOG10GV`, `AC`, `LOG10GV_AC`).
    pub fn tsp(&self, f: usize) -> &[f64] {
        &self.tsp[f]
    }

    /// Slope track of TSP `f`.
    pub fn slope(&self, f: usize) -> &[f64] {
        &self.slopes[f]
    }

    /// Earliest shifted time at which feature `i` (in [`FEATURE_NAMES`]
    /// order) is defined by construction.
    pub fn defined_from(&self, i: usize) -> f64 {
        let c = &self.cfg;
        let base = self.t_minus + c.t_w;
        match i {
            0..=2 => base,
            3 => base + c.t_w,
            4..=6 => base + c.t_m,
            _ => base + c.t_w + c.t_m,
        }
    }

    fn offset_of(&self, t: f64) -> Result<i64> {
        let off = t / self.dt;
        let r = off.round();
        if (off - r).abs() > 1e-6 {
            return Err(Error::OutOfRange(format!("T = {t} is not on the sample grid")));
        }
        Ok(r as i64)
    }

    /// Value of feature `i` at shifted time `t`.
    pub fn value(&self, i: usize, t: f64) -> Result<f64> {
        let off = self.offset_of(t)?;
        let (first, step, track) = if i < 4 {
            (self.tsp_first, self.grid.sw as i64, &self.tsp[i])
        } else {
            (self.slope_first, self.grid.sm as i64, &self.slopes[i - 4])
        };
        let d = off - first;
        if d < 0 || d % step != 0 || (d / step) as usize >= track.len() {
            return Err(Error::OutOfRange(format!(
                "{} is not available at T = {t}",
                FEATURE_NAMES[i]
            )));
        }
        let v = track[(d / step) as usize];
        if v.is_nan() {
            return Err(Error::UndefinedFeature {
                feature: FEATURE_NAMES[i],
                t,
            });
        }
        Ok(v)
    }

    /// Slope of TSP `f` over `[t − t_m, t]` for any slope length, fitted on
    /// demand from the stored TSP track.
    pub fn slope_at(&self, f: usize, t: f64, t_m: f64) -> Result<f64> {
        let g = self.grid;
        let m = samples(t_m, self.dt, "t_m")?;
        if m % g.sw != 0 {
            return Err(Error::invalid("t_m must be a multiple of dw"));
        }
        let d = self.offset_of(t)? - self.tsp_first;
        let span = m / g.sw;
        let lead = if f == LOG10GV_AC { g.w / g.sw } else { 0 };
        let sw = g.sw as i64;
        if d < 0 || d % sw != 0 || (d / sw) as usize >= self.n_tsp() || ((d / sw) as usize) < span + lead {
            return Err(Error::OutOfRange(format!(
                "{} with t_m = {t_m} is not available at T = {t}",
                FEATURE_NAMES[f + 4]
            )));
        }
        let end = (d / sw) as usize;
        let xs: Vec<f64> = (0..=span).map(|k| (k * g.sw) as f64 * self.dt).collect();
        let v = ols_slope(&xs, &self.tsp[f][end - span..=end]);
        if v.is_nan() {
            return Err(Error::UndefinedFeature {
                feature: FEATURE_NAMES[f + 4],
                t,
            });
        }
        Ok(v)
    }

    /// All eight features at `t`, NaN where unavailable.
    pub fn row(&self, t: f64) -> [f64; 8] {
        std::array::from_fn(|i| self.value(i, t).unwrap_or(f64::NAN))
    }
}

/// Read access to the eight feature curves of one transition.
pub trait FeatureCurve {
    /// Feature `i` at shifted time `t`; `None` where unavailable.
    fn feature(&self, i: usize, t: f64) -> Option<f64>;
    /// Earliest shifted time at which feature `i` can be defined.
    fn first_defined(&self, i: usize) -> f64;
    fn last_time(&self) -> f64;
    /// Spacing of the grid the slopes live on.
    fn grid_step(&self) -> f64;
}

impl FeatureCurve for FeatureTrack {
    fn feature(&self, i: usize, t: f64) -> Option<f64> {
        self.value(i, t).ok()
    }

    fn first_defined(&self, i: usize) -> f64 {
        self.defined_from(i)
    }

    fn last_time(&self) -> f64 {
        self.t_plus
    }

    fn grid_step(&self) -> f64 {
        self.cfg.dm
    }
}

/// Feature vector for `svm_type` at shifted time `t`, in [`FEATURE_NAMES`]
/// order.
pub fn feature_vector_at(ft: &FeatureTrack, t: f64, svm_type: SvmType) -> Result<Vec<f64>> {
    svm_type.columns().map(|i| ft.value(i, t)).collect()
}

/// Like [`feature_vector_at`] but with slopes over `t_m` instead of the
/// slope length the track was built with.
pub fn feature_vector_with_t_m(ft: &FeatureTrack, t: f64, svm_type: SvmType, t_m: f64) -> Result<Vec<f64>> {
    svm_type
        .columns()
        .map(|i| if i < 4 { ft.value(i, t) } else { ft.slope_at(i - 4, t, t_m) })
        .collect()
}
