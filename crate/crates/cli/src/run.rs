//! Executes a resolved scenario: one worker thread per trajectory.

use std::time::Instant;

use dnls_core::analysis::{attractor_verdict, first_peak, mi_scan, AttractorVerdict, MiScan};
use dnls_core::proximity::{proximity_report, ProximityReport};
use dnls_core::{integrate, make_initial_condition, ComplexState, DpsParams, System, Trajectory, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::scenario::{NoiseFloor, Product, ScenarioSpec, Variant};

/// Threshold factor for `--auto-t0`: the first central-node peak above
/// twice the background density.
pub const AUTO_T0_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub auto_t0: bool,
}

#[derive(Debug, Clone)]
pub struct SystemRun {
    pub system: System,
    pub traj: Trajectory,
    pub attractor: Option<AttractorVerdict>,
}

#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub runs: Vec<SystemRun>,
    pub proximity: Option<ProximityReport>,
    /// Peak time located by `--auto-t0`, when requested.
    pub auto_t0: Option<f64>,
}

impl VariantRun {
    pub fn run(&self, system: System) -> Option<&SystemRun> {
        self.runs.iter().find(|r| r.system == system)
    }

    /// The dPS reference actually used (after `--auto-t0`).
    pub fn dps(&self) -> Option<DpsParams> {
        let mut p = self.variant.dps?;
        if let Some(t0) = self.auto_t0 {
            p.t0 = t0;
        }
        Some(p)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub variants: Vec<VariantRun>,
    pub mi_scan: Option<MiScan>,
    pub wall_time: f64,
    pub options: RunOptions,
}

/// Adds a reproducible complex perturbation, uniform in `[-a, a]²` per node.
pub fn add_noise(state: &ComplexState, noise: NoiseFloor) -> CliResult<ComplexState> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let a = noise.amplitude;
    let values = state
        .values()
        .iter()
        .map(|z| z + C64::new(rng.random_range(-a..=a), rng.random_range(-a..=a)))
        .collect();
    Ok(ComplexState::new(values, state.t())?)
}

pub fn initial_state(spec: &ScenarioSpec, variant: &Variant) -> CliResult<ComplexState> {
    let ic = make_initial_condition(&variant.ic, &spec.cfg.grid())?;
    let ic = match spec.noise {
        Some(noise) => add_noise(&ic, noise)?,
        None => ic,
    };
    Ok(ic)
}

/// Shifted runs start from the profile minus its background.
fn start_for(system: System, ic: &ComplexState) -> CliResult<ComplexState> {
    match system {
        System::Shifted { background } => Ok(ComplexState::new(
            ic.values().iter().map(|z| z - background).collect(),
            ic.t(),
        )?),
        _ => Ok(ic.clone()),
    }
}

pub fn run_scenario(spec: &ScenarioSpec, options: RunOptions) -> CliResult<ScenarioRun> {
    let start = Instant::now();
    let starts = spec
        .variants
        .iter()
        .map(|v| initial_state(spec, v))
        .collect::<CliResult<Vec<_>>>()?;

    let jobs: Vec<(usize, System)> = (0..spec.variants.len())
        .flat_map(|i| spec.systems.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<CliResult<Trajectory>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(i, system)| {
                let ic = &starts[i];
                scope.spawn(move || -> CliResult<Trajectory> {
                    let start = start_for(system, ic)?;
                    Ok(integrate(system, &start, &spec.cfg, &spec.integrator)?)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Validation("worker thread panicked".into()))))
            .collect()
    });

    let mut variants: Vec<VariantRun> = spec
        .variants
        .iter()
        .map(|v| VariantRun {
            variant: v.clone(),
            runs: Vec::new(),
            proximity: None,
            auto_t0: None,
        })
        .collect();
    for (&(i, system), traj) in jobs.iter().zip(results) {
        variants[i].runs.push(SystemRun {
            system,
            traj: traj?,
            attractor: None,
        });
    }

    let a_star = spec.critical_amplitude();
    for v in &mut variants {
        if spec.wants(Product::Attractor) {
            let a_star = a_star.expect("checked at load time");
            for r in &mut v.runs {
                r.attractor = Some(attractor_verdict(
                    &r.traj,
                    &spec.cfg,
                    a_star,
                    spec.attractor_tol,
                    spec.attractor_window,
                )?);
            }
        }
        if spec.wants(Product::Proximity) {
            let (Some(u), Some(phi)) = (v.run(System::Dnls), v.run(System::AblowitzLadik)) else {
                unreachable!("checked at load time");
            };
            v.proximity = Some(proximity_report(&u.traj, &phi.traj, &spec.cfg, spec.window)?);
        }
        if options.auto_t0 && v.variant.dps.is_some() {
            v.auto_t0 = locate_first_peak(spec, v);
        }
    }

    let mi = if spec.wants(Product::MiScan) {
        let a_star = a_star.expect("checked at load time");
        match spec.variants[0].ic {
            dnls_core::InitialCondition::PlaneWave { mode, .. } => Some(mi_scan(mode, &spec.cfg, a_star, spec.cfg.delta())?),
            _ => None,
        }
    } else {
        None
    };

    Ok(ScenarioRun {
        spec: spec.clone(),
        variants,
        mi_scan: mi,
        wall_time: start.elapsed().as_secs_f64(),
        options,
    })
}

/// Central-node density series of a trajectory, shifted runs mapped back
/// onto their background.
pub fn central_density(spec: &ScenarioSpec, run: &SystemRun) -> Option<(Vec<f64>, Vec<f64>)> {
    let centre = spec.cfg.central_node().ok()?;
    let shift = match run.system {
        System::Shifted { background } => background,
        _ => 0.0,
    };
    let values = run.traj.node_series(centre).map(|(_, z)| (z + shift).norm_sqr()).collect();
    Some((run.traj.times.clone(), values))
}

fn locate_first_peak(spec: &ScenarioSpec, v: &VariantRun) -> Option<f64> {
    let run = v.run(System::Dnls).or_else(|| v.runs.first())?;
    let (times, values) = central_density(spec, run)?;
    let background = v.variant.ic.background();
    first_peak(&times, &values, AUTO_T0_FACTOR * background * background).map(|(t, _)| t)
}

/// Indices of the samples nearest to each multiple of `every`, plus the last.
pub fn frame_indices(times: &[f64], every: f64) -> Vec<usize> {
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let target = first + k as f64 * every;
        if target > last + 1e-9 * every {
            break;
        }
        let idx = match times.binary_search_by(|t| t.total_cmp(&target)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= times.len() => times.len() - 1,
            Err(i) => {
                if target - times[i - 1] <= times[i] - target {
                    i - 1
                } else {
                    i
                }
            }
        };
        if out.last() != Some(&idx) {
            out.push(idx);
        }
        k += 1;
    }
    if out.last() != Some(&(times.len() - 1)) {
        out.push(times.len() - 1);
    }
    out
}
