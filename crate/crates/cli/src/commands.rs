use std::f64::consts::PI;

use serde_json::json;

use rotcav::cooling::{cooling_report, equilibrium};
use rotcav::dynamics::{classify, CavityMode, Dynamics, SystemState};
use rotcav::ensemble::{capture_curve, reference_depth, sample_initial, with_threads, CaptureSettings, EnsembleResult, UNDECIDED_LIMIT};
use rotcav::optics::{detector_intensity, dimensionless_potential};
use rotcav::output::{write_json, write_table, Header};
use rotcav::params::System;
use rotcav::rotor::m_from_euler;
use rotcav::{Complex64, Vec3};

use crate::{CliError, Run};

fn grid(start: f64, end: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| start + (end - start) * i as f64 / (n - 1) as f64)
}

/// Adiabatic-field evaluator for static maps.
fn static_dynamics<'a>(run: &Run, system: &'a System) -> Result<Dynamics<'a>, CliError> {
    let mut integrator = run.config.integrator;
    integrator.cavity_mode = CavityMode::Adiabatic;
    Ok(Dynamics::new(system, integrator)?)
}

fn at_rest(r: Vec3, m: Vec3) -> SystemState {
    SystemState::new(r, Vec3::zeros(), rotcav::rotor::RotorState::at_rest(m), Complex64::new(0.0, 0.0))
}

pub fn validate(run: &Run) -> Result<(), CliError> {
    let system = run.config.system()?;
    let c = &system.coupling;
    let depth = reference_depth(&system)?;
    let validity = system.validity();
    println!("particle            {}", system.kind().name());
    println!("mass                {:.6e} kg", system.mass);
    println!("inertia             {:.6e} kg m^2", system.inertia);
    println!("size parameter      {:.6}", system.size);
    println!("kappa               {:.6e} 1/s", c.kappa);
    println!("delta               {:.6e} 1/s ({:.4} kappa)", c.delta, c.delta / c.kappa);
    println!("eta                 {:.6e} 1/s", c.eta);
    println!("mode volume         {:.6e} m^3", c.mode_volume);
    println!("U0                  {:.6e} 1/s ({:.4} kappa)", c.u0, c.u0 / c.kappa);
    println!("gamma0              {:.6e} 1/s ({:.4} kappa)", c.gamma0, c.gamma0 / c.kappa);
    println!("trap depth          {:.6e} J", depth);
    match validity.value {
        Some(v) => println!("validity            {} = {:.6} (threshold {})", validity.criterion, v, validity.threshold),
        None => println!("validity            {}", validity.criterion),
    }
    for w in &validity.warnings {
        println!("warning             {w}");
    }
    if !run.config.defaulted.is_empty() {
        println!("defaulted           {}", run.config.defaulted.join(", "));
    }
    Ok(())
}

pub fn potential_map(run: &Run) -> Result<(), CliError> {
    let system = run.config.system()?;
    let dynamics = static_dynamics(run, &system)?;
    let maps = &run.config.maps;
    let lambda = system.cavity.wavelength;
    let mut rows = Vec::with_capacity(maps.z_points * maps.angle_points);
    for z in grid(0.0, lambda, maps.z_points) {
        for beta in grid(0.0, PI, maps.angle_points) {
            let m = m_from_euler(0.0, beta);
            let r = Vec3::new(0.0, 0.0, z);
            let obs = dynamics.observables(&at_rest(r, m));
            rows.push(vec![z, beta, dimensionless_potential(&system, &r, &m), obs.photons, obs.potential]);
        }
    }
    let header = Header::new("potential-map", &run.text, &run.config, &[&system], &["z", "beta", "v", "photons", "potential"])
        .with_extra(json!({"alpha": 0.0, "field": "adiabatic steady state"}));
    let path = run.output_dir()?.join("potential_map.csv");
    write_table(&path, &header, &rows)?;
    println!("{}", path.display());
    Ok(())
}

pub fn intensity_map(run: &Run) -> Result<(), CliError> {
    let system = run.config.system()?;
    let dynamics = static_dynamics(run, &system)?;
    let maps = &run.config.maps;
    let lambda = system.cavity.wavelength;
    let (_, m) = equilibrium(&system);
    let mut rows = Vec::with_capacity(maps.z_points * maps.angle_points);
    let mut near_field = false;
    for z in grid(0.0, lambda, maps.z_points) {
        let r = Vec3::new(0.0, 0.0, z);
        let photons = dynamics.observables(&at_rest(r, m)).photons;
        for theta in grid(0.0, PI, maps.angle_points) {
            let n = Vec3::new(0.0, theta.sin(), theta.cos());
            let reading = detector_intensity(&system, &n, maps.detector_distance, &r, &m, photons)?;
            near_field |= reading.near_field_warning;
            rows.push(vec![z, theta, reading.total, reading.polarized[0], reading.polarized[1]]);
        }
    }
    if near_field {
        eprintln!("warning: detector distance is below 100 wavelengths; far-field form is approximate");
    }
    let header = Header::new("intensity-map", &run.text, &run.config, &[&system], &["z", "theta", "intensity", "intensity_theta", "intensity_phi"])
        .with_extra(json!({
            "detector_plane": "y-z",
            "orientation": [m.x, m.y, m.z],
            "detector_distance": maps.detector_distance,
            "near_field_warning": near_field,
        }));
    let path = run.output_dir()?.join("intensity_map.csv");
    write_table(&path, &header, &rows)?;
    println!("{}", path.display());
    Ok(())
}

pub fn trajectory(run: &Run) -> Result<(), CliError> {
    let config = &run.config;
    let rod = config.system()?;
    let system = if config.trajectory.equivalent_sphere { config.sphere_system()? } else { rod.clone() };
    let t = &config.trajectory;
    let mut launch = config.ensemble_config().launch(t.vx);
    launch.vz_spread = 0.0;
    let mut start = sample_initial(&system, &launch, config.seed);
    start.p = system.mass * Vec3::new(t.vx, 0.0, t.vz);
    if let Some(z0) = t.z0 {
        start.r.z = z0;
    }
    let duration = t.duration.unwrap_or(config.capture.max_crossings * CaptureSettings::crossing_time(&system, t.vx));
    let dynamics = Dynamics::new(&system, config.integrator)?;
    let trajectory = dynamics.integrate(&start, duration)?;
    let criteria = config.capture.criteria(&system, reference_depth(&system)?, t.vx);
    let outcome = classify(&trajectory, &criteria);

    let rows: Vec<Vec<f64>> = trajectory
        .samples
        .iter()
        .map(|s| {
            let st = &s.state;
            let (r, p, m, l) = (st.r, st.p, st.rotor.m, st.rotor.l);
            vec![
                st.t, r.x, r.y, r.z, p.x, p.y, p.z, m.x, m.y, m.z, l.x, l.y, l.z, st.b.re, st.b.im,
                s.observables.energy, s.observables.gamma_sc,
            ]
        })
        .collect();
    let columns = [
        "t", "x", "y", "z", "px", "py", "pz", "mx", "my", "mz", "Lx", "Ly", "Lz", "re_b", "im_b", "energy", "gamma_sc",
    ];
    let initial = &trajectory.samples[0].state;
    let header = Header::new("trajectory", &run.text, config, &[&system], &columns).with_extra(json!({
        "seed": config.seed,
        "outcome": outcome.name(),
        "duration": duration,
        "initial_kinetic_energy": initial.kinetic_energy(&system),
        "capture_criteria": criteria,
        "stats": trajectory.stats,
    }));
    let name = if config.trajectory.equivalent_sphere { "trajectory_sphere.csv" } else { "trajectory.csv" };
    let path = run.output_dir()?.join(name);
    write_table(&path, &header, &rows)?;
    let last = trajectory.samples.last().map(|s| s.observables.energy).unwrap_or(f64::NAN);
    println!("{} {} final_energy={last:e}", path.display(), outcome.name());
    Ok(())
}

fn ensemble_rows(result: &EnsembleResult) -> Vec<Vec<f64>> {
    result
        .points
        .iter()
        .map(|p| {
            vec![
                p.vx,
                p.capture.estimate,
                p.capture.low,
                p.capture.high,
                p.captured as f64,
                p.transmitted as f64,
                p.undecided as f64,
                p.failures as f64,
                p.total as f64,
            ]
        })
        .collect()
}

pub fn ensemble(run: &Run) -> Result<(), CliError> {
    let config = &run.config;
    let rod = config.system()?;
    let mut systems = vec![rod];
    if config.ensemble.compare_sphere && systems[0].kind() != rotcav::params::ParticleKind::Sphere {
        systems.push(config.sphere_system()?);
    }
    let ensemble = config.ensemble_config();
    let threads = run.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let dir = run.output_dir()?.to_path_buf();
    let columns = ["vx", "p_capture", "ci_low", "ci_high", "captured", "transmitted", "undecided", "failures", "total"];
    let mut flagged = Vec::new();
    for system in &systems {
        let result = with_threads(threads, || capture_curve(system, &ensemble))??;
        let header = Header::new("ensemble", &run.text, config, &[system], &columns).with_extra(json!({
            "seed_scheme": "splitmix64(master, point index, trajectory index)",
            "master_seed": result.master_seed,
            "rotation_rate": ensemble.rotation_rate,
            "reference_depth": reference_depth(system)?,
            "undecided_limit": UNDECIDED_LIMIT,
            "flagged_velocities": result.flagged(),
        }));
        let path = dir.join(format!("ensemble_{}.csv", system.kind().name()));
        write_table(&path, &header, &ensemble_rows(&result))?;
        println!("{}", path.display());
        for p in &result.points {
            println!(
                "  {:<6} vx={:<6} p={:.4} [{:.4}, {:.4}] captured={} transmitted={} undecided={}",
                system.kind().name(),
                p.vx,
                p.capture.estimate,
                p.capture.low,
                p.capture.high,
                p.captured,
                p.transmitted,
                p.undecided
            );
        }
        flagged.extend(result.flagged());
    }
    if flagged.is_empty() {
        Ok(())
    } else {
        Err(CliError::Flagged {
            velocities: flagged,
            limit: UNDECIDED_LIMIT,
        })
    }
}

pub fn cooling_limits(run: &Run) -> Result<(), CliError> {
    let config = &run.config;
    let base = config.system()?;
    let cooling = &config.cooling;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut mode_names: Vec<String> = Vec::new();
    for &detuning in &cooling.detunings {
        for &power in &cooling.pump_powers {
            let mut cavity = base.cavity.clone();
            cavity.detuning = detuning;
            cavity.pump_power = power;
            cavity.mode_volume = rotcav::params::ModeVolume::Direct(base.coupling.mode_volume);
            let system = System::new(base.particle.clone(), cavity)?;
            let report = cooling_report(&system, cooling.quadrature_degree)?;
            if mode_names.is_empty() {
                mode_names = report.modes.iter().map(|m| m.name.clone()).collect();
            }
            let mut row = vec![detuning, power, report.steady_state.photons, report.steady_state.gamma_sc0];
            for mode in &report.modes {
                row.extend([
                    mode.frequency,
                    mode.temperature,
                    mode.occupation.unwrap_or(f64::NAN),
                    mode.bose_occupation.unwrap_or(f64::NAN),
                ]);
            }
            rows.push(row);
            reports.push(json!({"detuning": detuning, "pump_power": power, "report": report}));
        }
    }
    let mut columns: Vec<String> = ["detuning", "pump_power", "photons", "gamma_sc0"].map(String::from).to_vec();
    for name in &mode_names {
        for field in ["omega", "T", "n", "n_bose"] {
            columns.push(format!("{field}_{name}"));
        }
    }
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let header = Header::new("cooling-limits", &run.text, config, &[&base], &column_refs).with_extra(json!({
        "quadrature_degree": cooling.quadrature_degree,
        "detuning_units": "quoted, converted with cavity.rate_convention",
    }));
    let dir = run.output_dir()?;
    let csv = dir.join("cooling_limits.csv");
    let json_path = dir.join("cooling_limits.json");
    write_table(&csv, &header, &rows)?;
    write_json(&json_path, &header, &reports)?;
    println!("{}", json_path.display());
    println!("{}", csv.display());
    Ok(())
}
