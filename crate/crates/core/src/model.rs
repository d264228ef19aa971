//! Shear-augmented Bautin normal form with additive noise.
//!
//! In Cartesian coordinates `z = x + iy` the model reads
//!
//! ```text
//! dx/dt = γ (μx + s r² (x − σy) − ωy − r⁴x) + ν η_x
//! dy/dt = γ (μy + s r² (y + σx) + ωx − r⁴y) + ν η_y,     r² = x² + y²
//! ```
//!
//! and is integrated with Euler–Maruyama at a fixed step. The noise source is
//! pinned for reproducibility across platforms: uniform bits come from
//! ChaCha8 (`rand_chacha`) seeded with a `u64`, and standard normal variates
//! come from the Ziggurat sampler `rand_distr::StandardNormal` (version pinned
//! in the manifest). Each step draws `η_x` then `η_y`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Mechanism behind a transition from the non-seizure to the seizure state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CtType {
    /// Bifurcation-induced: drifting across the supercritical Hopf curve.
    Bct,
    /// Bifurcation/noise-induced: drifting across the subcritical Hopf curve
    /// through the bistable region.
    Bnct,
    /// Noise-induced: escape from the origin's basin at fixed parameters.
    Nct,
}

impl CtType {
    pub const ALL: [CtType; 3] = [CtType::Bct, CtType::Bnct, CtType::Nct];

    /// Class index used by the classifier (also the tie-break order).
    pub fn index(self) -> usize {
        match self {
            CtType::Bct => 0,
            CtType::Bnct => 1,
            CtType::Nct => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<CtType> {
        CtType::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CtType::Bct => "bct",
            CtType::Bnct => "bnct",
            CtType::Nct => "nct",
        }
    }

    /// Model parameters that generate this transition type.
    pub fn params(self) -> ModelParams {
        Regimes::default().params(self)
    }

    /// Parameter path that generates this transition type. Ramps run over
    /// `[0, 60]`; the constant path is unbounded.
    pub fn path(self) -> ParameterPath {
        Regimes::default().path(self)
    }
}

impl fmt::Display for CtType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CtType::Bct => "BCT",
            CtType::Bnct => "BNCT",
            CtType::Nct => "NCT",
        })
    }
}

impl std::str::FromStr for CtType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bct" => Ok(CtType::Bct),
            "bnct" => Ok(CtType::Bnct),
            "nct" => Ok(CtType::Nct),
            other => Err(Error::invalid(format!("unknown transition type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Bifurcation parameter multiplying the cubic term.
    pub s: f64,
    /// Shear.
    pub sigma: f64,
    /// Noise level (standard deviation of the additive white noise).
    pub nu: f64,
    /// Small-amplitude oscillation frequency.
    pub omega: f64,
    /// Timescale factor; zero switches the drift off.
    pub gamma: f64,
}

impl Default for ModelParams {
    /// Parameters of the noise-induced regime: `s = σ = 1`, `ν = 0.18`,
    /// `ω = 1.3`, `γ = 10`.
    fn default() -> Self {
        ModelParams {
            s: 1.0,
            sigma: 1.0,
            nu: 0.18,
            omega: 1.3,
            gamma: 10.0,
        }
    }
}

impl ModelParams {
    /// Quintic coefficient; fixed.
    pub const B: f64 = 1.0;

    pub fn validate(&self) -> Result<()> {
        let all = [self.s, self.sigma, self.nu, self.omega, self.gamma];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        if self.gamma <= 0.0 {
            return Err(Error::invalid(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.nu < 0.0 {
            return Err(Error::invalid(format!("nu must be >= 0, got {}", self.nu)));
        }
        if self.s != 0.0 && self.sigma != 0.0 && self.s.signum() != self.sigma.signum() {
            return Err(Error::invalid(format!(
                "shear sigma = {} must have the same sign as s = {}",
                self.sigma, self.s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Constant,
    LinearRamp,
}

/// Time course of `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterPath {
    pub kind: PathKind,
    pub mu0: f64,
    /// `dμ/dt`; zero for a constant path.
    pub rate: f64,
    /// Last time at which the path is defined.
    pub t_end: f64,
}

impl ParameterPath {
    pub fn constant(mu: f64) -> Self {
        ParameterPath {
            kind: PathKind::Constant,
            mu0: mu,
            rate: 0.0,
            t_end: f64::INFINITY,
        }
    }

    pub fn ramp(mu0: f64, rate: f64, t_end: f64) -> Self {
        ParameterPath {
            kind: PathKind::LinearRamp,
            mu0,
            rate,
            t_end,
        }
    }

    #[inline]
    pub fn mu_at(&self, t: f64) -> f64 {
        match self.kind {
            PathKind::Constant => self.mu0,
            PathKind::LinearRamp => self.mu0 + self.rate * t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() || !self.rate.is_finite() || self.t_end.is_nan() {
            return Err(Error::invalid("parameter path values must be finite"));
        }
        if self.kind == PathKind::Constant && self.rate != 0.0 {
            return Err(Error::invalid("a constant path must have zero rate"));
        }
        if self.t_end <= 0.0 {
            return Err(Error::invalid("parameter path must have positive duration"));
        }
        Ok(())
    }
}

/// Settings shared by the three generating regimes. The BCT regime uses
/// `s = −1` and shear `−|shear|`, the other two `s = 1` and `|shear|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Regimes {
    pub nu: f64,
    pub omega: f64,
    pub gamma: f64,
    pub shear: f64,
    pub ramp_mu0: f64,
    pub ramp_rate: f64,
    pub ramp_t_end: f64,
    pub nct_mu: f64,
}

impl Default for Regimes {
    fn default() -> Self {
        Regimes {
            nu: 0.18,
            omega: 1.3,
            gamma: 10.0,
            shear: 1.0,
            ramp_mu0: -2.0,
            ramp_rate: 1.0 / 20.0,
            ramp_t_end: 60.0,
            nct_mu: -0.22,
        }
    }
}

impl Regimes {
    pub fn params(&self, ty: CtType) -> ModelParams {
        let s = if ty == CtType::Bct { -1.0 } else { 1.0 };
        ModelParams {
            s,
            sigma: s * self.shear.abs(),
            nu: self.nu,
            omega: self.omega,
            gamma: self.gamma,
        }
    }

    pub fn path(&self, ty: CtType) -> ParameterPath {
        match ty {
            CtType::Bct | CtType::Bnct => ParameterPath::ramp(self.ramp_mu0, self.ramp_rate, self.ramp_t_end),
            CtType::Nct => ParameterPath::constant(self.nct_mu),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ty in CtType::ALL {
            self.params(ty).validate()?;
            self.path(ty).validate()?;
        }
        if !self.ramp_t_end.is_finite() {
            return Err(Error::invalid("ramp_t_end must be finite"));
        }
        Ok(())
    }
}

/// The ramp `μ(t) = −2 + t/20` that drives the bifurcation regimes.
pub fn mu_ramp(t: f64) -> f64 {
    -2.0 + t / 20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub x0: f64,
    pub y0: f64,
    pub seed: u64,
    /// Abort when `|z|` exceeds this bound.
    pub divergence_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.001,
            t_end: 60.0,
            x0: 0.1,
            y0: 0.1,
            seed: 0,
            divergence_bound: 1e6,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::invalid(format!(
                "t_end must be finite and >= dt, got {}",
                self.t_end
            )));
        }
        if !self.x0.is_finite() || !self.y0.is_finite() {
            return Err(Error::invalid("initial condition must be finite"));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::invalid("divergence bound must be positive"));
        }
        Ok(())
    }

    /// Number of integration steps; the trajectory holds one more sample.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Deterministic part of the vector field.
#[inline]
pub fn drift(x: f64, y: f64, mu: f64, p: &ModelParams) -> (f64, f64) {
    let r2 = x * x + y * y;
    let r4 = r2 * r2;
    let dx = mu * x + p.s * r2 * (x - p.sigma * y) - p.omega * y - ModelParams::B * r4 * x;
    let dy = mu * y + p.s * r2 * (y + p.sigma * x) + p.omega * x - ModelParams::B * r4 * y;
    (p.gamma * dx, p.gamma * dy)
}

/// Radii of the limit cycles of the noise-free system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    /// Stable outer cycle.
    pub r_plus: f64,
    /// Unstable inner cycle, present only in the bistable region.
    pub r_minus: Option<f64>,
}

/// Radii of the large stable cycle `L₊` and, when it exists, the unstable
/// cycle `L₋`, i.e. the positive roots of `μ + s r² − r⁴ = 0`.
///
/// `L₊` exists for `μ ≥ −s²/4` when `s > 0` and for `μ > 0` otherwise; `L₋`
/// exists for `−s²/4 ≤ μ < 0` with `s > 0`. At the fold both radii coincide.
pub fn limit_cycle_radii(mu: f64, s: f64) -> Option<Radii> {
    let disc = s * s + 4.0 * mu;
    let outer_exists = if s > 0.0 { disc >= 0.0 } else { mu > 0.0 };
    if !outer_exists {
        return None;
    }
    let root = disc.max(0.0).sqrt();
    // r₊² = (s + d)/2; written as −2μ/(s − d) when s + d cancels (s < 0).
    let r_plus_sq = if s >= 0.0 {
        0.5 * (s + root)
    } else {
        -2.0 * mu / (s - root)
    };
    let r_minus = if s > 0.0 && mu < 0.0 {
        // r₋² = (s − d)/2 = −2μ/(s + d), free of cancellation.
        Some((-2.0 * mu / (s + root)).sqrt())
    } else {
        None
    };
    Some(Radii {
        r_plus: r_plus_sq.sqrt(),
        r_minus,
    })
}

/// Stability region of the noise-free system in the `(μ, s)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Only the origin is stable.
    NsOnly,
    /// Only the large cycle is stable.
    SOnly,
    /// Origin and large cycle are both stable.
    Bistable,
    /// On the Hopf line `μ = 0` or the fold curve `μ = −s²/4, s > 0`.
    Boundary,
}

pub fn classify_region(mu: f64, s: f64) -> Region {
    let fold = -s * s / 4.0;
    if mu == 0.0 || (s > 0.0 && mu == fold) {
        Region::Boundary
    } else if mu > 0.0 {
        Region::SOnly
    } else if s > 0.0 && mu > fold {
        Region::Bistable
    } else {
        Region::NsOnly
    }
}

/// SplitMix64 finaliser; used to derive independent per-run seeds.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ stream) ^ index)
}

/// Euler–Maruyama integrator that can be advanced in chunks.
pub struct Simulator {
    params: ModelParams,
    path: ParameterPath,
    dt: f64,
    noise: f64,
    bound_sq: f64,
    bound: f64,
    x: f64,
    y: f64,
    step: u64,
    n_steps: u64,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(params: ModelParams, path: ParameterPath, cfg: &SimConfig) -> Result<Self> {
        params.validate()?;
        path.validate()?;
        cfg.validate()?;
        if cfg.t_end > path.t_end + 0.5 * cfg.dt {
            return Err(Error::invalid(format!(
                "simulation end {} exceeds parameter path end {}",
                cfg.t_end, path.t_end
            )));
        }
        Ok(Simulator {
            params,
            path,
            dt: cfg.dt,
            noise: params.nu * cfg.dt.sqrt(),
            bound_sq: cfg.divergence_bound * cfg.divergence_bound,
            bound: cfg.divergence_bound,
            x: cfg.x0,
            y: cfg.y0,
            step: 0,
            n_steps: cfg.n_steps() as u64,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    /// Current time `t_n = n·dt`.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn state(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn steps_remaining(&self) -> u64 {
        self.n_steps - self.step
    }

    /// Advance one step; `μ` is taken at the left end of the step.
    #[inline]
    pub fn advance(&mut self) -> Result<(f64, f64)> {
        let t = self.time();
        let mu = self.path.mu_at(t);
        let (fx, fy) = drift(self.x, self.y, mu, &self.params);
        let ex: f64 = self.rng.sample(StandardNormal);
        let ey: f64 = self.rng.sample(StandardNormal);
        let x = self.x + self.dt * fx + self.noise * ex;
        let y = self.y + self.dt * fy + self.noise * ey;
        self.step += 1;
        let r2 = x * x + y * y;
        // NaN fails the comparison and is treated as divergence too.
        if !(r2 <= self.bound_sq) {
            return Err(Error::Diverged {
                t: self.time(),
                radius: r2.sqrt().max(self.bound),
            });
        }
        self.x = x;
        self.y = y;
        Ok((x, y))
    }

    /// Append up to `n` further samples (bounded by the configured end time).
    /// Returns the number of samples appended.
    pub fn fill(&mut self, n: usize, xs: &mut Vec<f64>, mut ys: Option<&mut Vec<f64>>) -> Result<usize> {
        let n = n.min(self.steps_remaining() as usize);
        xs.reserve(n);
        for _ in 0..n {
            let (x, y) = self.advance()?;
            xs.push(x);
            if let Some(ys) = ys.as_deref_mut() {
                ys.push(y);
            }
        }
        Ok(n)
    }
}

/// Integrate the model from `(x0, y0)` at `t = 0` to `cfg.t_end`; the result
/// holds `n_steps + 1` samples of both channels, starting with the initial
/// condition.
pub fn simulate(params: &ModelParams, path: &ParameterPath, cfg: &SimConfig) -> Result<Trajectory> {
    let mut sim = Simulator::new(*params, *path, cfg)?;
    let n = cfg.n_steps();
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    xs.push(cfg.x0);
    ys.push(cfg.y0);
    sim.fill(n, &mut xs, Some(&mut ys))?;
    Trajectory::with_y(0.0, cfg.dt, xs, ys)
}
