//! Monte Carlo capture experiments: launch sampling, parallel trajectory
//! execution and binomial statistics.

use std::f64::consts::PI;
use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooling::steady_state_b0;
use crate::dynamics::{total_energy, CaptureCriteria, CaptureMonitor, Dynamics, IntegratorConfig, Outcome, SystemState};
use crate::error::{Error, Result};
use crate::optics::ScatteringKernel;
use crate::params::{ParticleKind, System};
use crate::rotor::{any_perpendicular, RotorState};
use crate::Vec3;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Initial-condition distribution for one forward velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchDistribution {
    /// Forward velocity, m/s.
    pub vx: f64,
    /// `v_z` is uniform in `[-spread·v_x, spread·v_x]`.
    pub vz_spread: f64,
    /// `|L|/I`, rad/s.
    pub rotation_rate: f64,
    /// Launch position `x0 = -launch_offset · w0`.
    pub launch_offset: f64,
}

impl LaunchDistribution {
    pub fn new(vx: f64) -> Self {
        Self {
            vx,
            vz_spread: 0.05,
            rotation_rate: 1e6,
            launch_offset: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vx > 0.0 && self.vx.is_finite()) {
            return Err(Error::invalid("vx", format!("must be positive, got {}", self.vx)));
        }
        if !(0.0..=1.0).contains(&self.vz_spread) {
            return Err(Error::invalid("vz_spread", "must lie in [0, 1]"));
        }
        if !(self.rotation_rate >= 0.0 && self.rotation_rate.is_finite()) {
            return Err(Error::invalid("rotation_rate", "must be non-negative"));
        }
        if !(self.launch_offset > 0.0) {
            return Err(Error::invalid("launch_offset", "must be positive"));
        }
        Ok(())
    }
}

/// Seed of trajectory `trajectory` at grid point `point`. Independent of
/// scheduling, so any worker count sees the same streams.
pub fn trajectory_seed(master: u64, point: usize, trajectory: usize) -> u64 {
    let mut x = master;
    for word in [point as u64, trajectory as u64] {
        x = splitmix(x ^ splitmix(word.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform point on the unit sphere.
pub fn uniform_unit<R: Rng>(rng: &mut R) -> Vec3 {
    let u: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - u * u).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), u)
}

/// Deterministic launch state for `seed`. The cavity starts in the
/// empty-cavity steady state; spheres carry no angular momentum.
pub fn sample_initial(system: &System, dist: &LaunchDistribution, seed: u64) -> SystemState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = 2.0 * PI / system.k();
    let z0 = rng.random_range(0.0..lambda);
    let vz = if dist.vz_spread > 0.0 {
        let w = dist.vz_spread * dist.vx;
        rng.random_range(-w..=w)
    } else {
        0.0
    };
    let m = uniform_unit(&mut rng);
    let psi: f64 = rng.random_range(0.0..2.0 * PI);
    let e1 = any_perpendicular(&m);
    let e2 = m.cross(&e1);
    let l = match system.kind() {
        ParticleKind::Sphere => Vec3::zeros(),
        _ => (e1 * psi.cos() + e2 * psi.sin()) * (system.inertia * dist.rotation_rate),
    };
    SystemState::new(
        Vec3::new(-dist.launch_offset * system.waist(), 0.0, z0),
        Vec3::new(dist.vx, 0.0, vz) * system.mass,
        RotorState::new(m, l),
        system.empty_cavity_amplitude(),
    )
}

/// Timing and classification settings shared by all grid points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureSettings {
    /// Run length in crossing times `6 w0 / v_x`.
    pub max_crossings: f64,
    /// Time a state must stay bound, in crossing times.
    pub window_crossings: f64,
    /// Bound means `E < -depth_fraction · ħ|U0||b0|²`.
    pub depth_fraction: f64,
    /// Bound states stay within `|x| < capture_radius · w0`.
    pub capture_radius: f64,
    /// Transmission plane, in waists.
    pub exit_radius: f64,
}

impl Default for CaptureSettings {
    fn default() -> Self {
        Self {
            max_crossings: 20.0,
            window_crossings: 10.0,
            depth_fraction: 1e-3,
            capture_radius: 1.0,
            exit_radius: 3.0,
        }
    }
}

impl CaptureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_crossings > 0.0) {
            return Err(Error::invalid("max_crossings", "must be positive"));
        }
        if !(self.window_crossings > 0.0 && self.window_crossings < self.max_crossings) {
            return Err(Error::invalid("window_crossings", "must be positive and below max_crossings"));
        }
        if !(self.depth_fraction >= 0.0) {
            return Err(Error::invalid("depth_fraction", "must be non-negative"));
        }
        if !(self.capture_radius > 0.0 && self.exit_radius >= self.capture_radius) {
            return Err(Error::invalid("exit_radius", "must be at least capture_radius > 0"));
        }
        Ok(())
    }

    /// Crossing time `6 w0 / v_x`, seconds.
    pub fn crossing_time(system: &System, vx: f64) -> f64 {
        6.0 * system.waist() / vx
    }

    pub fn criteria(&self, system: &System, reference_depth: f64, vx: f64) -> CaptureCriteria {
        CaptureCriteria {
            reference_depth,
            depth_fraction: self.depth_fraction,
            waist: system.waist(),
            capture_radius: self.capture_radius,
            exit_radius: self.exit_radius,
            window: self.window_crossings * Self::crossing_time(system, vx),
        }
    }
}

/// `ħ|U0||b0|²` at the trap minimum.
pub fn reference_depth(system: &System) -> Result<f64> {
    let kernel = ScatteringKernel::for_system(system, 30)?;
    Ok(system.hbar_u0().abs() * steady_state_b0(system, &kernel).photons)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub seed: u64,
    pub outcome: Outcome,
    /// Simulated time, seconds.
    pub duration: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Message of a numerical failure; such runs count as undecided.
    pub failure: Option<String>,
}

/// Runs one launch to classification or `max_time`.
pub fn run_capture(
    dynamics: &Dynamics<'_>,
    criteria: &CaptureCriteria,
    initial: &SystemState,
    max_time: f64,
    seed: u64,
) -> TrajectoryOutcome {
    let system = dynamics.system();
    let mut monitor = CaptureMonitor::new(*criteria);
    let e0 = total_energy(system, initial);
    let run = dynamics.propagate(initial, initial.t + max_time, |st| {
        let e = total_energy(system, st);
        match monitor.update(st.t, st.r.x, st.p.x, e) {
            Some(_) => ControlFlow::Break(()),
            None => ControlFlow::Continue(()),
        }
    });
    match run {
        Ok((end, _)) => TrajectoryOutcome {
            seed,
            outcome: monitor.outcome(),
            duration: end.t - initial.t,
            initial_energy: e0,
            final_energy: total_energy(system, &end),
            failure: None,
        },
        Err(e) => TrajectoryOutcome {
            seed,
            outcome: Outcome::Undecided,
            duration: f64::NAN,
            initial_energy: e0,
            final_energy: f64::NAN,
            failure: Some(e.to_string()),
        },
    }
}

/// Binomial proportion with a Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

pub fn wilson_interval(successes: usize, total: usize, z: f64) -> Proportion {
    if total == 0 {
        return Proportion {
            estimate: 0.0,
            low: 0.0,
            high: 1.0,
        };
    }
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        estimate: p,
        low: (centre - half).max(0.0),
        high: (centre + half).min(1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub vx: f64,
    pub total: usize,
    pub captured: usize,
    pub transmitted: usize,
    pub undecided: usize,
    pub failures: usize,
    pub capture: Proportion,
    pub trajectories: Vec<TrajectoryOutcome>,
}

impl PointResult {
    fn from_outcomes(vx: f64, trajectories: Vec<TrajectoryOutcome>) -> Self {
        let count = |o: Outcome| trajectories.iter().filter(|t| t.outcome == o).count();
        let total = trajectories.len();
        let captured = count(Outcome::Captured);
        Self {
            vx,
            total,
            captured,
            transmitted: count(Outcome::Transmitted),
            undecided: count(Outcome::Undecided),
            failures: trajectories.iter().filter(|t| t.failure.is_some()).count(),
            capture: wilson_interval(captured, total, Z95),
            trajectories,
        }
    }

    pub fn undecided_fraction(&self) -> f64 {
        self.undecided as f64 / self.total.max(1) as f64
    }
}

/// Fraction of undecided runs above which a point is flagged.
pub const UNDECIDED_LIMIT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub master_seed: u64,
    pub points: Vec<PointResult>,
}

impl EnsembleResult {
    /// Velocities whose undecided fraction exceeds [`UNDECIDED_LIMIT`].
    pub fn flagged(&self) -> Vec<f64> {
        self.points.iter().filter(|p| p.undecided_fraction() > UNDECIDED_LIMIT).map(|p| p.vx).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub velocities: Vec<f64>,
    pub trajectories: usize,
    pub master_seed: u64,
    pub vz_spread: f64,
    /// rad/s.
    pub rotation_rate: f64,
    pub launch_offset: f64,
    pub capture: CaptureSettings,
    pub integrator: IntegratorConfig,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.velocities.is_empty() {
            return Err(Error::invalid("velocities", "grid is empty"));
        }
        if self.trajectories < 100 {
            return Err(Error::invalid("trajectories", format!("need at least 100, got {}", self.trajectories)));
        }
        for &vx in &self.velocities {
            self.launch(vx).validate()?;
        }
        self.capture.validate()?;
        self.integrator.validate()
    }

    pub fn launch(&self, vx: f64) -> LaunchDistribution {
        LaunchDistribution {
            vx,
            vz_spread: self.vz_spread,
            rotation_rate: self.rotation_rate,
            launch_offset: self.launch_offset,
        }
    }
}

/// Runs the capture curve on the current rayon pool. Results are indexed by
/// grid point and trajectory, so they do not depend on the worker count.
pub fn capture_curve(system: &System, config: &EnsembleConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let dynamics = Dynamics::new(system, config.integrator)?;
    let depth = reference_depth(system)?;
    let points = config
        .velocities
        .iter()
        .enumerate()
        .map(|(i, &vx)| {
            let dist = config.launch(vx);
            let criteria = config.capture.criteria(system, depth, vx);
            let max_time = config.capture.max_crossings * CaptureSettings::crossing_time(system, vx);
            let outcomes: Vec<_> = (0..config.trajectories)
                .into_par_iter()
                .map(|j| {
                    let seed = trajectory_seed(config.master_seed, i, j);
                    let start = sample_initial(system, &dist, seed);
                    run_capture(&dynamics, &criteria, &start, max_time, seed)
                })
                .collect();
            PointResult::from_outcomes(vx, outcomes)
        })
        .collect();
    Ok(EnsembleResult {
        master_seed: config.master_seed,
        points,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    Ok(pool.install(f))
}

/// Bin of `m` in a 48-cell equal-area partition: 4 bands of equal `m_z`
/// width, each split into 12 azimuthal sectors.
pub fn equal_area_bin(m: &Vec3) -> usize {
    let band = (((m.z + 1.0) * 2.0).floor() as usize).min(3);
    let phi = m.y.atan2(m.x).rem_euclid(2.0 * PI);
    let sector = ((phi / (2.0 * PI) * 12.0).floor() as usize).min(11);
    band * 12 + sector
}

/// Pearson statistic against equal expected counts.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// Upper 1% point of χ² with 47 degrees of freedom.
pub const CHI2_47_P01: f64 = 72.443;

/// Weighted non-increasing isotonic fit (pool adjacent violators).
pub fn isotonic_decreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (v2, w2, n2) = blocks[blocks.len() - 1];
            let (v1, w1, n1) = blocks[blocks.len() - 2];
            if v1 >= v2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((v1 * w1 + v2 * w2) / w, w, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(v, _, n)| std::iter::repeat_n(v, n)).collect()
}
