//! Executes one scenario: integrate, evaluate the declared checks, write the
//! CSV series and the JSON summary.

use std::path::{Path, PathBuf};

use serde::Serialize;
use threebody::dynamics::{
    integrate, integrate_on_grid, invariant_manifold_monitor, momenta_from_velocities,
    momentum_transform, Trajectory,
};
use threebody::oracle::{integrate_cartesian, zero_L_initial};
use threebody::{HamiltonianSpec, MassTriple, PhaseState, PotentialSpec, Representation, RhoPoint};

use crate::config::{CheckSpec, InitialState, ScenarioConfig};
use crate::output::{format_float, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyEvent {
    pub t: f64,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub representation: Representation,
    pub final_time: f64,
    pub final_state: PhaseState,
    pub max_energy_drift: f64,
    /// `sup |p_i|` over the monitored components, when any are declared.
    pub max_invariant_manifold_violation: Option<f64>,
    /// Samples where the shape class changes.
    pub degeneracy_events: Vec<DegeneracyEvent>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Integration(#[from] threebody::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub struct Artifacts {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub summary: Summary,
}

fn as3(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..v.len()].copy_from_slice(v);
    out
}

pub fn initial_phase_state(config: &ScenarioConfig) -> threebody::Result<PhaseState> {
    let rep = config.representation;
    let m = &config.masses;
    match &config.initial {
        InitialState::Phase { q, p } => PhaseState::new(rep, q, p),
        InitialState::Velocities { q, qdot } => {
            let p = momenta_from_velocities(rep, &as3(q), &as3(qdot), m)?;
            PhaseState::new(rep, q, &p[..rep.dim()])
        }
        InitialState::RhoRates { rho, rho_dot } => {
            let p = momenta_from_velocities(Representation::Rho, rho, rho_dot, m)?;
            let state = PhaseState::new(Representation::Rho, rho, &p)?;
            momentum_transform(Representation::Rho, rep, &state, m)
        }
    }
}

fn grid(t_span: (f64, f64), n: usize) -> Vec<f64> {
    let (a, b) = t_span;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn max_abs_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

/// Oracle runs in each dimension plus the squared-distance flow, compared
/// pairwise.
fn cross_representation(
    config: &ScenarioConfig,
    rho: &[f64; 3],
    rho_dot: &[f64; 3],
    dimensions: &[usize],
    times: &[f64],
) -> threebody::Result<Vec<(String, f64)>> {
    let m: &MassTriple = &config.masses;
    let potential: &PotentialSpec = &config.potential;
    let mut series: Vec<(String, Vec<[f64; 3]>)> = Vec::new();
    for &d in dimensions {
        let s0 = zero_L_initial(&RhoPoint::from_array(*rho), rho_dot, m, d)?;
        let traj = integrate_cartesian(&s0, potential, m, times, &config.integrator)?;
        series.push((
            format!("oracle_d{d}"),
            traj.states.iter().map(|s| s.rho().as_array()).collect(),
        ));
    }
    let spec = HamiltonianSpec::new(Representation::Rho, *m, potential.clone(), 0.0)?;
    let p = momenta_from_velocities(Representation::Rho, rho, rho_dot, m)?;
    let state = PhaseState::new(Representation::Rho, rho, &p)?;
    let flow = integrate_on_grid(&spec, &state, times, &config.integrator, &[])?;
    series.push(("rho_flow".into(), flow.states.iter().map(|s| s.q).collect()));

    let mut out = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            out.push((
                format!("{}_vs_{}", series[i].0, series[j].0),
                max_abs_diff(&series[i].1, &series[j].1),
            ));
        }
    }
    Ok(out)
}

fn evaluate_checks(
    config: &ScenarioConfig,
    traj: &Trajectory,
) -> threebody::Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut push = |name: String, measured: f64, tolerance: f64| {
        out.push(CheckResult {
            name,
            measured,
            tolerance,
            passed: measured <= tolerance,
        });
    };
    for check in &config.checks {
        match check {
            CheckSpec::ClosedForm { form, tolerance } => {
                let mut worst = 0.0_f64;
                for (t, s) in traj.times.iter().zip(&traj.states) {
                    worst = worst.max((s.q[0] - form.value(*t)?).abs());
                }
                push("closed_form_max_err".into(), worst, *tolerance);
            }
            CheckSpec::EnergyDrift { tolerance } => {
                push(
                    "max_energy_drift".into(),
                    traj.max_energy_drift(),
                    *tolerance,
                );
            }
            CheckSpec::InvariantManifold { index, tolerance } => {
                push(
                    format!("invariant_manifold_p{index}"),
                    invariant_manifold_monitor(traj, *index),
                    *tolerance,
                );
            }
            CheckSpec::CrossRepresentation {
                dimensions,
                tolerance,
            } => {
                let InitialState::RhoRates { rho, rho_dot } = &config.initial else {
                    unreachable!("validated: cross-representation needs rho_rates");
                };
                for (name, dev) in
                    cross_representation(config, rho, rho_dot, dimensions, &traj.times)?
                {
                    push(name, dev, *tolerance);
                }
            }
        }
    }
    Ok(out)
}

fn degeneracy_events(traj: &Trajectory) -> Vec<DegeneracyEvent> {
    let mut out = Vec::new();
    let mut last = None;
    for (t, class) in traj.times.iter().zip(&traj.degeneracy) {
        if let Some(c) = class {
            if last != Some(*c) {
                out.push(DegeneracyEvent {
                    t: *t,
                    class: format!("{c:?}"),
                });
                last = Some(*c);
            }
        }
    }
    out
}

/// CSV with header `t, coordinates, momenta, energy, |p_i| monitors`.
pub fn render_csv(traj: &Trajectory, monitors: &[usize]) -> String {
    let rep = traj.rep;
    let n = rep.dim();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(rep.coordinate_names().iter().map(|s| s.to_string()));
    header.extend(rep.momentum_names().iter().map(|s| s.to_string()));
    header.push("energy".into());
    header.extend(
        monitors
            .iter()
            .map(|&i| format!("abs_{}", rep.momentum_names()[i])),
    );
    let mut out = header.join(",");
    out.push('\n');
    for (k, s) in traj.states.iter().enumerate() {
        let mut row = vec![format_float(traj.times[k])];
        row.extend(s.q[..n].iter().map(|&x| format_float(x)));
        row.extend(s.p[..n].iter().map(|&x| format_float(x)));
        row.push(format_float(traj.energy[k]));
        row.extend(monitors.iter().map(|&i| format_float(s.p[i].abs())));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn integrate_scenario(config: &ScenarioConfig) -> threebody::Result<Trajectory> {
    let spec = HamiltonianSpec::new(
        config.representation,
        config.masses,
        config.potential.clone(),
        0.0,
    )?;
    let state0 = initial_phase_state(config)?;
    match config.samples {
        Some(n) => integrate_on_grid(
            &spec,
            &state0,
            &grid(config.t_span, n),
            &config.integrator,
            &config.monitors,
        ),
        None => integrate(
            &spec,
            &state0,
            config.t_span,
            &config.integrator,
            &config.monitors,
        ),
    }
}

pub fn summarize(config: &ScenarioConfig, traj: &Trajectory) -> threebody::Result<Summary> {
    let checks = evaluate_checks(config, traj)?;
    let violation = config
        .monitors
        .iter()
        .map(|&i| invariant_manifold_monitor(traj, i))
        .reduce(f64::max);
    Ok(Summary {
        representation: traj.rep,
        final_time: *traj.times.last().expect("initial sample"),
        final_state: *traj.final_state(),
        max_energy_drift: traj.max_energy_drift(),
        max_invariant_manifold_violation: violation,
        degeneracy_events: degeneracy_events(traj),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Runs the scenario and writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn run_scenario(config: &ScenarioConfig, dir: &Path) -> Result<Artifacts, RunError> {
    let traj = integrate_scenario(config)?;
    let summary = summarize(config, &traj)?;
    let csv = dir.join(format!("{}.csv", config.output.stem));
    let json = dir.join(format!("{}.json", config.output.stem));
    let text = serde_json::to_string_pretty(&summary).expect("summaries serialize");
    for (path, bytes) in [
        (&csv, render_csv(&traj, &config.monitors).into_bytes()),
        (&json, text.into_bytes()),
    ] {
        write_atomic(path, &bytes).map_err(|source| RunError::Output {
            path: path.clone(),
            source,
        })?;
    }
    Ok(Artifacts { csv, json, summary })
}
