//! Classical equations of motion for the particle and the cavity amplitude.
//!
//! The integrator works on a scaled 14-component vector: `k r`,
//! `k p / (M κ)`, `m`, `L / (I κ)` and `b κ / η`, with time measured in
//! units of `1/κ`. All quantities crossing the public API are SI.

pub mod ode;

use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{potential_with_gradient, ScatteringKernel, ScatteringSums, DEFAULT_QUADRATURE_DEGREE};
use crate::params::System;
use crate::rotor::RotorState;
use crate::Vec3;

use ode::{Failure, Stats, Tolerances};

/// How the cavity amplitude is treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavityMode {
    /// `b` is integrated together with the particle.
    #[default]
    Dynamic,
    /// `b` follows the instantaneous steady state.
    Adiabatic,
    /// `b` is held fixed and scattering is switched off.
    Frozen,
}

impl std::str::FromStr for CavityMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dynamic" => Ok(CavityMode::Dynamic),
            "adiabatic" => Ok(CavityMode::Adiabatic),
            "frozen" => Ok(CavityMode::Frozen),
            other => Err(format!("unknown cavity mode `{other}` (dynamic, adiabatic, frozen)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// Seconds.
    pub t: f64,
    pub r: Vec3,
    pub p: Vec3,
    pub rotor: RotorState,
    pub b: Complex64,
}

impl SystemState {
    pub fn new(r: Vec3, p: Vec3, rotor: RotorState, b: Complex64) -> Self {
        Self {
            t: 0.0,
            r,
            p,
            rotor,
            b,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().chain(self.p.iter()).chain(self.rotor.m.iter()).chain(self.rotor.l.iter()).all(|v| v.is_finite())
            && self.b.re.is_finite()
            && self.b.im.is_finite()
    }

    pub fn kinetic_energy(&self, system: &System) -> f64 {
        self.p.norm_squared() / (2.0 * system.mass) + self.rotor.kinetic_energy(system.inertia)
    }
}

/// Time derivative of a [`SystemState`], SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub r: Vec3,
    pub p: Vec3,
    pub m: Vec3,
    pub l: Vec3,
    pub b: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Seconds.
    pub max_step: f64,
    /// Sample spacing of stored trajectories, seconds.
    pub output_interval: f64,
    pub cavity_mode: CavityMode,
    /// Rayleigh scattering as an extra cavity loss `γ_sc/2` in the field
    /// equation.
    pub scattering_loss: bool,
    pub radiation_pressure: bool,
    pub quadrature_degree: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            max_step: 1e-6,
            output_interval: 1e-7,
            cavity_mode: CavityMode::Dynamic,
            scattering_loss: true,
            radiation_pressure: true,
            quadrature_degree: DEFAULT_QUADRATURE_DEGREE,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(1e-12..=1e-4).contains(&v) {
                return Err(Error::invalid(name, format!("must lie in [1e-12, 1e-4], got {v}")));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step", "must be positive"));
        }
        if !(self.output_interval > 0.0) {
            return Err(Error::invalid("output_interval", "must be positive"));
        }
        Ok(())
    }
}

/// Observables derived from a state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    /// `|p|²/2M + |L|²/2I + V`, joules.
    pub energy: f64,
    pub photons: f64,
    /// Rayleigh scattering rate, 1/s, reported even when it is not fed
    /// back into the cavity.
    pub gamma_sc: f64,
    pub potential: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: SystemState,
    pub observables: Observables,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stats: RunStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl From<Stats> for RunStats {
    fn from(s: Stats) -> Self {
        Self {
            accepted: s.accepted,
            rejected: s.rejected,
            evaluations: s.evaluations,
        }
    }
}

/// Energy `|p|²/2M + |L|²/2I + ħ U0 |b|² v`. Negative means bound.
pub fn total_energy(system: &System, state: &SystemState) -> f64 {
    let v = crate::optics::dimensionless_potential(system, &state.r, &state.rotor.m);
    state.kinetic_energy(system) + system.hbar_u0() * state.b.norm_sqr() * v
}

const N: usize = 14;

/// Equations of motion for one system, with cached quadrature tables.
#[derive(Clone, Debug)]
pub struct Dynamics<'a> {
    system: &'a System,
    kernel: ScatteringKernel,
    config: IntegratorConfig,
    b_scale: f64,
}

impl<'a> Dynamics<'a> {
    pub fn new(system: &'a System, config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        let c = &system.coupling;
        let b_scale = if c.eta > 0.0 { c.eta / c.kappa } else { 1.0 };
        Ok(Self {
            system,
            kernel: ScatteringKernel::for_system(system, config.quadrature_degree)?,
            config,
            b_scale,
        })
    }

    pub fn system(&self) -> &System {
        self.system
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    fn scattering(&self, r: &Vec3, m: &Vec3) -> ScatteringSums {
        let c = &self.config;
        if c.cavity_mode == CavityMode::Frozen || !(c.scattering_loss || c.radiation_pressure) {
            return ScatteringSums::default();
        }
        let w0 = self.system.waist();
        // beyond ~19 waists f² underflows to zero anyway
        if r.x * r.x + r.y * r.y > 400.0 * w0 * w0 {
            return ScatteringSums::default();
        }
        self.kernel.evaluate(self.system, r, m, self.config.radiation_pressure)
    }

    fn loss(&self, sums: &ScatteringSums) -> f64 {
        if self.config.scattering_loss {
            self.system.coupling.gamma0 * sums.rate
        } else {
            0.0
        }
    }

    fn adiabatic_amplitude(&self, v: f64, gamma_sc: f64) -> Complex64 {
        let c = &self.system.coupling;
        Complex64::new(c.eta, 0.0) / Complex64::new(c.kappa + 0.5 * gamma_sc, -(c.delta - c.u0 * v))
    }

    /// Right-hand side in SI units. In adiabatic mode `b` is replaced by its
    /// instantaneous steady state and the returned `b` derivative is zero.
    pub fn derivative(&self, state: &SystemState) -> StateDerivative {
        self.derivative_parts(state).0
    }

    fn derivative_parts(&self, state: &SystemState) -> (StateDerivative, Complex64) {
        let s = self.system;
        let c = &s.coupling;
        let m = state.rotor.m;
        let pg = potential_with_gradient(s, &state.r, &m);
        let sums = self.scattering(&state.r, &m);
        let gamma_sc = self.loss(&sums);
        let b = match self.config.cavity_mode {
            CavityMode::Adiabatic => self.adiabatic_amplitude(pg.value, gamma_sc),
            _ => state.b,
        };
        let photons = b.norm_sqr();
        let depth = -s.hbar_u0() * photons;
        let mut force = pg.grad_r * depth;
        let mut torque = m.cross(&pg.grad_m) * depth;
        if self.config.radiation_pressure && self.config.cavity_mode != CavityMode::Frozen {
            let rp = sums.radiation_pressure(s, photons);
            force += rp.force;
            torque += rp.torque;
        }
        let b_dot = match self.config.cavity_mode {
            CavityMode::Dynamic => {
                Complex64::new(-(c.kappa + 0.5 * gamma_sc), c.delta - c.u0 * pg.value) * b + c.eta
            }
            _ => Complex64::new(0.0, 0.0),
        };
        let omega = state.rotor.l / s.inertia;
        (
            StateDerivative {
                r: state.p / s.mass,
                p: force,
                m: omega.cross(&m),
                l: torque,
                b: b_dot,
            },
            b,
        )
    }

    pub fn observables(&self, state: &SystemState) -> Observables {
        let s = self.system;
        let v = crate::optics::dimensionless_potential(s, &state.r, &state.rotor.m);
        let rate = match self.config.cavity_mode {
            CavityMode::Frozen => 0.0,
            _ => self.kernel.evaluate(s, &state.r, &state.rotor.m, false).rate,
        };
        let gamma_sc = s.coupling.gamma0 * rate;
        let b = match self.config.cavity_mode {
            CavityMode::Adiabatic => self.adiabatic_amplitude(v, if self.config.scattering_loss { gamma_sc } else { 0.0 }),
            _ => state.b,
        };
        let photons = b.norm_sqr();
        let potential = s.hbar_u0() * photons * v;
        Observables {
            energy: state.kinetic_energy(s) + potential,
            photons,
            gamma_sc,
            potential,
        }
    }

    fn pack(&self, state: &SystemState) -> [f64; N] {
        let s = self.system;
        let k = s.k();
        let kappa = s.coupling.kappa;
        let pv = k / (s.mass * kappa);
        let lv = 1.0 / (s.inertia * kappa);
        let m = state.rotor.m;
        let l = state.rotor.l;
        [
            k * state.r.x,
            k * state.r.y,
            k * state.r.z,
            pv * state.p.x,
            pv * state.p.y,
            pv * state.p.z,
            m.x,
            m.y,
            m.z,
            lv * l.x,
            lv * l.y,
            lv * l.z,
            state.b.re / self.b_scale,
            state.b.im / self.b_scale,
        ]
    }

    fn unpack(&self, tau: f64, y: &[f64; N], spin: f64) -> SystemState {
        let s = self.system;
        let k = s.k();
        let kappa = s.coupling.kappa;
        let pv = s.mass * kappa / k;
        let lv = s.inertia * kappa;
        SystemState {
            t: tau / kappa,
            r: Vec3::new(y[0], y[1], y[2]) / k,
            p: Vec3::new(y[3], y[4], y[5]) * pv,
            rotor: RotorState {
                m: Vec3::new(y[6], y[7], y[8]),
                l: Vec3::new(y[9], y[10], y[11]) * lv,
                spin,
            },
            b: Complex64::new(y[12], y[13]) * self.b_scale,
        }
    }

    fn rhs(&self, tau: f64, y: &[f64; N], spin: f64) -> [f64; N] {
        let state = self.unpack(tau, y, spin);
        let d = self.derivative(&state);
        let s = self.system;
        let k = s.k();
        let kappa = s.coupling.kappa;
        let pv = k / (s.mass * kappa * kappa);
        let lv = 1.0 / (s.inertia * kappa * kappa);
        let mv = 1.0 / kappa;
        let bv = 1.0 / (kappa * self.b_scale);
        [
            y[3],
            y[4],
            y[5],
            pv * d.p.x,
            pv * d.p.y,
            pv * d.p.z,
            mv * d.m.x,
            mv * d.m.y,
            mv * d.m.z,
            lv * d.l.x,
            lv * d.l.y,
            lv * d.l.z,
            bv * d.b.re,
            bv * d.b.im,
        ]
    }

    fn finalize(&self, mut state: SystemState) -> SystemState {
        if self.config.cavity_mode == CavityMode::Adiabatic {
            let (_, b) = self.derivative_parts(&state);
            state.b = b;
        }
        state
    }

    /// Propagates `initial` until `t_end` or until `observe` breaks.
    ///
    /// `observe` is called after every accepted step with the projected
    /// state. Energies above ten times the larger of the initial kinetic
    /// energy and the potential depth abort the run.
    pub fn propagate<O>(&self, initial: &SystemState, t_end: f64, mut observe: O) -> Result<(SystemState, RunStats)>
    where
        O: FnMut(&SystemState) -> ControlFlow<()>,
    {
        self.propagate_dense(initial, t_end, |_, _, state| observe(state))
    }

    fn propagate_dense<O>(&self, initial: &SystemState, t_end: f64, mut observe: O) -> Result<(SystemState, RunStats)>
    where
        O: FnMut(&Self, &ode::DenseStep<N>, &SystemState) -> ControlFlow<()>,
    {
        if !(t_end > initial.t) {
            return Err(Error::invalid("t_end", format!("must exceed the start time {}", initial.t)));
        }
        if !initial.is_finite() {
            return Err(Error::NonFinite {
                t: initial.t,
                state: format!("{initial:?}"),
            });
        }
        let s = self.system;
        let kappa = s.coupling.kappa;
        let spin = initial.rotor.spin;
        let mut start = *initial;
        start.rotor.project();
        let tol = Tolerances {
            rel: self.config.rel_tol,
            abs: self.config.abs_tol,
            max_step: self.config.max_step * kappa,
            max_steps: self.config.max_steps,
        };
        let depth = s.hbar_u0().abs() * s.empty_cavity_amplitude().norm_sqr();
        let limit = 10.0 * start.kinetic_energy(s).max(depth).max(total_energy(s, &start).abs());
        let mut blow_up: Option<(f64, f64)> = None;
        let mut stats = Stats::default();

        let out = ode::integrate(
            |tau, y: &[f64; N]| self.rhs(tau, y, spin),
            |y: &mut [f64; N]| project_rotor(y),
            |dense, y| {
                let state = self.finalize(self.unpack(dense.t1(), y, spin));
                let e = total_energy(s, &state);
                if e > limit {
                    blow_up = Some((state.t, e));
                    return ControlFlow::Break(());
                }
                observe(self, dense, &state)
            },
            start.t * kappa,
            self.pack(&start),
            t_end * kappa,
            &tol,
            &mut stats,
        );
        let (tau, y) = out.map_err(|f| match f {
            Failure::NonFinite { t } => Error::NonFinite {
                t: t / kappa,
                state: format!("{start:?}"),
            },
            Failure::StepUnderflow { t, h } => Error::StepUnderflow {
                t: t / kappa,
                h: h / kappa,
            },
            Failure::TooManySteps { t } => Error::StepUnderflow {
                t: t / kappa,
                h: 0.0,
            },
        })?;
        if let Some((t, energy)) = blow_up {
            return Err(Error::EnergyBlowUp { t, energy, limit });
        }
        let state = self.finalize(self.unpack(tau, &y, spin));
        if !state.is_finite() {
            return Err(Error::NonFinite {
                t: state.t,
                state: format!("{state:?}"),
            });
        }
        Ok((state, stats.into()))
    }

    /// Integrates to `t_end` and samples at `output_interval`, starting with
    /// the initial state.
    pub fn integrate(&self, initial: &SystemState, t_end: f64) -> Result<Trajectory> {
        self.integrate_until(initial, t_end, |_| ControlFlow::Continue(()))
    }

    /// As [`Dynamics::integrate`], stopping early when `stop` breaks.
    pub fn integrate_until<O>(&self, initial: &SystemState, t_end: f64, mut stop: O) -> Result<Trajectory>
    where
        O: FnMut(&SystemState) -> ControlFlow<()>,
    {
        let kappa = self.system.coupling.kappa;
        let dt = self.config.output_interval;
        let spin = initial.rotor.spin;
        let mut first = *initial;
        first.rotor.project();
        let first = self.finalize(first);
        let mut samples = vec![Sample {
            state: first,
            observables: self.observables(&first),
        }];
        let mut next = 1usize;
        let (_, stats) = self.propagate_dense(initial, t_end, |dyn_, dense, state| {
            loop {
                let t = initial.t + next as f64 * dt;
                if t > state.t || t > t_end {
                    break;
                }
                let mut y = dense.eval(t * kappa);
                project_rotor(&mut y);
                let mut st = dyn_.finalize(dyn_.unpack(t * kappa, &y, spin));
                st.t = t;
                samples.push(Sample {
                    state: st,
                    observables: dyn_.observables(&st),
                });
                next += 1;
            }
            stop(state)
        })?;
        Ok(Trajectory { samples, stats })
    }
}

fn project_rotor(y: &mut [f64; N]) {
    let m = Vec3::new(y[6], y[7], y[8]).normalize();
    let l = Vec3::new(y[9], y[10], y[11]);
    let l = l - m * m.dot(&l);
    y[6..9].copy_from_slice(m.as_slice());
    y[9..12].copy_from_slice(l.as_slice());
}

/// Trajectory outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Captured,
    Transmitted,
    Undecided,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Captured => "captured",
            Outcome::Transmitted => "transmitted",
            Outcome::Undecided => "undecided",
        }
    }
}

/// Thresholds for [`classify`] and [`CaptureMonitor`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureCriteria {
    /// `ħ |U0| |b0|²`, joules.
    pub reference_depth: f64,
    /// Bound means `E < -depth_fraction · reference_depth`.
    pub depth_fraction: f64,
    pub waist: f64,
    /// Bound states must stay within `|x| < capture_radius · w0`.
    pub capture_radius: f64,
    /// Transmission plane `|x| > exit_radius · w0`.
    pub exit_radius: f64,
    /// Seconds a state must stay bound to count as captured.
    pub window: f64,
}

impl CaptureCriteria {
    fn threshold(&self) -> f64 {
        -self.depth_fraction * self.reference_depth
    }

    fn bound(&self, x: f64, energy: f64) -> bool {
        energy < self.threshold() && x.abs() < self.capture_radius * self.waist
    }

    fn escaped(&self, x: f64, px: f64, energy: f64) -> bool {
        x.abs() > self.exit_radius * self.waist && x * px > 0.0 && energy > 0.0
    }
}

/// Streaming form of [`classify`]: feed states in time order.
#[derive(Clone, Debug)]
pub struct CaptureMonitor {
    criteria: CaptureCriteria,
    bound_since: Option<f64>,
    outcome: Option<Outcome>,
}

impl CaptureMonitor {
    pub fn new(criteria: CaptureCriteria) -> Self {
        Self {
            criteria,
            bound_since: None,
            outcome: None,
        }
    }

    pub fn update(&mut self, t: f64, x: f64, px: f64, energy: f64) -> Option<Outcome> {
        if self.outcome.is_some() {
            return self.outcome;
        }
        let c = &self.criteria;
        if c.bound(x, energy) {
            let since = *self.bound_since.get_or_insert(t);
            if t - since >= c.window {
                self.outcome = Some(Outcome::Captured);
            }
        } else {
            self.bound_since = None;
            if c.escaped(x, px, energy) {
                self.outcome = Some(Outcome::Transmitted);
            }
        }
        self.outcome
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome.unwrap_or(Outcome::Undecided)
    }
}

/// Classifies a stored trajectory by its final stretch: captured if every
/// sample of the last `window` is bound, transmitted if the last sample has
/// left through the exit plane with positive energy.
pub fn classify(trajectory: &Trajectory, criteria: &CaptureCriteria) -> Outcome {
    let Some(last) = trajectory.samples.last() else {
        return Outcome::Undecided;
    };
    let t_end = last.state.t;
    let t_start = trajectory.samples[0].state.t;
    if t_end - t_start >= criteria.window
        && trajectory
            .samples
            .iter()
            .filter(|s| s.state.t >= t_end - criteria.window)
            .all(|s| criteria.bound(s.state.r.x, s.observables.energy))
    {
        return Outcome::Captured;
    }
    if criteria.escaped(last.state.r.x, last.state.p.x, last.observables.energy) {
        return Outcome::Transmitted;
    }
    Outcome::Undecided
}
