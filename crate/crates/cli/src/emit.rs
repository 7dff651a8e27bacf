//! CSV products, plot scripts and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use dnls_core::analysis::{wedge_half_width, SpectrumPlanner, FIT_LOWER_FACTOR, FIT_UPPER};
use dnls_core::proximity::{dps_value, ProximityReport};
use dnls_core::timestep::IntegratorStats;
use dnls_core::{ComplexState, IntegratorSpec, LatticeConfig, System};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::run::{central_density, frame_indices, ScenarioRun, SystemRun, VariantRun};
use crate::scenario::{NoiseFloor, Product, ScenarioSpec, GATE_TOL};

/// Floats carry 17 significant digits so that files diff bit-for-bit.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table built in memory with a fixed header.
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

pub enum Cell {
    Int(i64),
    Float(f64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = Cell>) {
        let fields = cells.into_iter().map(|c| match c {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_float(v),
        });
        // the writer rejects rows whose width differs from the header
        self.writer.write_record(fields).expect("row width matches header");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// `|u|²` of a sample, with shifted runs mapped back onto their background.
fn densities_of(system: System, s: &ComplexState) -> Vec<f64> {
    let shift = match system {
        System::Shifted { background } => background,
        _ => 0.0,
    };
    s.values().iter().map(|z| (z + shift).norm_sqr()).collect()
}

pub fn densities_csv(cfg: &LatticeConfig, run: &SystemRun, frame_every: f64) -> Csv {
    let mut csv = Csv::new(&["t", "x", "density"]);
    let grid = cfg.grid();
    for i in frame_indices(&run.traj.times, frame_every) {
        let t = run.traj.times[i];
        for (x, d) in grid.x().iter().zip(densities_of(run.system, &run.traj.states[i])) {
            csv.row([t.into(), (*x).into(), d.into()]);
        }
    }
    csv
}

pub fn spectrum_csv(cfg: &LatticeConfig, run: &SystemRun, frame_every: f64) -> Csv {
    let mut csv = Csv::new(&["t", "K", "abs_coeff"]);
    let mut planner = SpectrumPlanner::new(cfg.nodes());
    for i in frame_indices(&run.traj.times, frame_every) {
        let frame = planner.frame(&run.traj.states[i], cfg.spacing());
        for (k, m) in frame.magnitudes().enumerate() {
            csv.row([run.traj.times[i].into(), k.into(), m.into()]);
        }
    }
    csv
}

pub fn phase_plane_csv(cfg: &LatticeConfig, run: &SystemRun) -> CliResult<Csv> {
    let centre = cfg.central_node()?;
    let shift = match run.system {
        System::Shifted { background } => background,
        _ => 0.0,
    };
    let mut csv = Csv::new(&["t", "re_u", "im_u"]);
    for (t, z) in run.traj.node_series(centre) {
        let z = z + shift;
        csv.row([t.into(), z.re.into(), z.im.into()]);
    }
    Ok(csv)
}

pub fn central_series_csv(spec: &ScenarioSpec, v: &VariantRun, run: &SystemRun) -> CliResult<Csv> {
    let (times, dens) = central_density(spec, run).ok_or_else(|| CliError::Validation("central node needs even N".into()))?;
    let dps = v.dps();
    let mut csv = Csv::new(&["t", "density", "dps_density"]);
    for (t, d) in times.iter().zip(dens) {
        let reference = dps.map_or(f64::NAN, |p| dps_value(0.0, t - p.t0, p.q).norm_sqr());
        csv.row([(*t).into(), d.into(), reference.into()]);
    }
    Ok(csv)
}

pub fn wedge_csv(times: &[f64], amplitude: f64) -> Csv {
    let mut csv = Csv::new(&["t", "x_left", "x_right"]);
    for &t in times {
        let w = wedge_half_width(amplitude, t);
        csv.row([t.into(), (-w).into(), w.into()]);
    }
    csv
}

pub fn mi_scan_csv(scan: &dnls_core::MiScan) -> Csv {
    let mut csv = Csv::new(&["K", "M", "growth"]);
    for (&m, &g) in scan.modes.iter().zip(&scan.growth) {
        csv.row([scan.carrier_mode.into(), m.into(), g.into()]);
    }
    csv
}

pub fn proximity_csv(report: &ProximityReport) -> Csv {
    let mut csv = Csv::new(&["t", "D_a", "D_a_r", "bound_I", "bound_II"]);
    for i in 0..report.times.len() {
        let bound_i = report.bound_i.as_ref().map_or(f64::NAN, |b| b[i]);
        csv.row([
            report.times[i].into(),
            report.d_a[i].into(),
            report.d_a_r[i].into(),
            bound_i.into(),
            report.bound_ii[i].into(),
        ]);
    }
    csv
}

pub fn diagnostics_csv(run: &SystemRun) -> Csv {
    let mut csv = Csv::new(&["t", "P_a", "balance_residual", "al_invariant"]);
    for (t, d) in run.traj.times.iter().zip(&run.traj.diagnostics) {
        csv.row([
            (*t).into(),
            d.averaged_power.into(),
            d.balance_residual.unwrap_or(f64::NAN).into(),
            d.al_invariant.unwrap_or(f64::NAN).into(),
        ]);
    }
    csv
}

fn plot_script(product: Product, files: &[String]) -> Option<String> {
    let mut s = String::from("# gnuplot script; run from this directory\nset datafile separator ','\nset key autotitle columnhead\n");
    let (setup, each): (&str, fn(&str) -> String) = match product {
        Product::Densities => (
            "set view map\nset xlabel 'x'\nset ylabel 't'\nset pm3d map\n",
            |f| format!("splot '{f}' using 2:1:3 with pm3d notitle\n"),
        ),
        Product::Spectrum => (
            "set xlabel 'K'\nset ylabel '|A_K|'\nset logscale y\n",
            |f| format!("plot '{f}' using 2:3 with impulses title '{f}'\n"),
        ),
        Product::PhasePlane => (
            "set size square\nset xlabel 'Re u_0'\nset ylabel 'Im u_0'\n",
            |f| format!("plot '{f}' using 2:3 with lines title '{f}'\n"),
        ),
        Product::CentralSeries => (
            "set xlabel 't'\nset ylabel '|u_0|^2'\n",
            |f| format!("plot '{f}' using 1:2 with lines title 'lattice', '' using 1:3 with lines dashtype 2 title 'dPS'\n"),
        ),
        Product::Wedge => (
            "set xlabel 'x'\nset ylabel 't'\n",
            |f| format!("plot '{f}' using 2:1 with lines lc black notitle, '' using 3:1 with lines lc black notitle\n"),
        ),
        Product::MiScan => (
            "set xlabel 'M'\nset ylabel 'growth'\n",
            |f| format!("plot '{f}' using 2:3 with linespoints title 'carrier'\n"),
        ),
        Product::Proximity => (
            "set xlabel 't'\nset logscale y\n",
            |f| {
                format!(
                    "plot '{f}' using 1:2 with lines title 'D_a', '' using 1:3 with lines title 'D_a^r', \
                     '' using 1:4 with lines title 'estimate I', '' using 1:5 with lines title 'estimate II'\n"
                )
            },
        ),
        Product::Attractor => return None,
    };
    s.push_str(setup);
    for f in files {
        s.push_str("set title '");
        s.push_str(f);
        s.push_str("'\n");
        s.push_str(&each(f));
        s.push_str("pause -1\n");
    }
    Some(s)
}

#[derive(Debug, Serialize)]
pub struct GateRecord {
    pub variant: String,
    pub background: f64,
    pub gamma: f64,
    pub delta: f64,
    pub critical_amplitude: Option<f64>,
    pub tol: f64,
    pub solvable: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub variant: String,
    pub system: System,
    pub samples: usize,
    pub stats: IntegratorStats,
    pub attractor: Option<dnls_core::AttractorVerdict>,
}

#[derive(Debug, Serialize)]
pub struct ProximitySummary {
    pub variant: String,
    pub max_d_a: f64,
    pub max_d_a_r: f64,
    pub estimate_ii_violations: usize,
    /// Absent when the estimate I hypothesis fails for this pair.
    pub estimate_i_violations: Option<usize>,
    pub alpha: dnls_core::proximity::EstimateIIRate,
    pub invariant0: f64,
    pub smallness: dnls_core::proximity::SmallnessCheck,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub smoke: bool,
    /// The key/value text the run was resolved from, overrides applied.
    pub config: String,
    pub lattice: LatticeConfig,
    pub systems: Vec<System>,
    pub variants: Vec<crate::scenario::Variant>,
    pub integrator: IntegratorSpec,
    pub frame_every: f64,
    pub outputs: Vec<Product>,
    pub noise_floor: Option<NoiseFloor>,
    pub window: (f64, f64),
    pub gate: Vec<GateRecord>,
    pub runs: Vec<RunRecord>,
    pub proximity: Vec<ProximitySummary>,
    /// `t0` located by `--auto-t0`, per variant.
    pub auto_t0: Vec<(String, Option<f64>)>,
    pub dft_normalization: &'static str,
    pub mi_fit_window: (f64, f64),
    pub files: Vec<String>,
}

pub const DFT_NORMALIZATION: &str = "A_K = h * sum_n u_n exp(-2 pi i K n / N); inverse scaled by 1/(N h)";

fn write_file(dir: &Path, name: &str, body: impl AsRef<[u8]>) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn manifest(run: &ScenarioRun, smoke: bool, files: Vec<String>) -> Manifest {
    let spec = &run.spec;
    let (gamma, delta) = (spec.cfg.gamma(), spec.cfg.delta());
    let gate = spec
        .variants
        .iter()
        .map(|v| GateRecord {
            variant: v.label.clone(),
            background: v.ic.background(),
            gamma,
            delta,
            critical_amplitude: spec.critical_amplitude(),
            tol: GATE_TOL,
            solvable: spec.gate(v.ic.background()),
        })
        .collect();
    let runs = run
        .variants
        .iter()
        .flat_map(|v| {
            v.runs.iter().map(|r| RunRecord {
                variant: v.variant.label.clone(),
                system: r.system,
                samples: r.traj.len(),
                stats: r.traj.stats,
                attractor: r.attractor,
            })
        })
        .collect();
    let proximity = run
        .variants
        .iter()
        .filter_map(|v| {
            let p = v.proximity.as_ref()?;
            Some(ProximitySummary {
                variant: v.variant.label.clone(),
                max_d_a: p.d_a.iter().cloned().fold(0.0, f64::max),
                max_d_a_r: p.d_a_r.iter().cloned().fold(0.0, f64::max),
                estimate_ii_violations: p.estimate_ii_violations().len(),
                estimate_i_violations: p.bound_i.as_ref().map(|_| p.estimate_i_violations().len()),
                alpha: p.alpha,
                invariant0: p.invariant0,
                smallness: p.smallness,
            })
        })
        .collect();
    Manifest {
        scenario: spec.name.clone(),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: run.wall_time,
        smoke,
        config: spec.source.to_text(),
        lattice: spec.cfg,
        systems: spec.systems.clone(),
        variants: spec.variants.clone(),
        integrator: spec.integrator,
        frame_every: spec.frame_every,
        outputs: spec.outputs.clone(),
        noise_floor: spec.noise,
        window: spec.window,
        gate,
        runs,
        proximity,
        auto_t0: if run.options.auto_t0 {
            run.variants.iter().map(|v| (v.variant.label.clone(), v.auto_t0)).collect()
        } else {
            Vec::new()
        },
        dft_normalization: DFT_NORMALIZATION,
        mi_fit_window: (FIT_LOWER_FACTOR, FIT_UPPER),
        files,
    }
}

/// Writes a single table into `dir`, creating it if needed.
pub fn write_csv(dir: &Path, name: &str, csv: Csv) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write_file(dir, name, csv.into_bytes())
}

/// Writes every requested product of `run` into `dir`; returns the file names.
pub fn emit_products(run: &ScenarioRun, dir: &Path, smoke: bool) -> CliResult<Vec<String>> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let spec = &run.spec;
    let mut files: Vec<String> = Vec::new();
    let mut by_product: Vec<(Product, Vec<String>)> = Vec::new();
    let mut put = |product: Option<Product>, name: String, csv: Csv| -> CliResult<()> {
        write_file(dir, &name, csv.into_bytes())?;
        if let Some(p) = product {
            match by_product.iter_mut().find(|(q, _)| *q == p) {
                Some((_, v)) => v.push(name.clone()),
                None => by_product.push((p, vec![name.clone()])),
            }
        }
        files.push(name);
        Ok(())
    };

    for v in &run.variants {
        let label = &v.variant.label;
        for r in &v.runs {
            let tag = format!("{label}_{}", r.system.name());
            put(None, format!("diagnostics_{tag}.csv"), diagnostics_csv(r))?;
            if spec.wants(Product::Densities) {
                put(Some(Product::Densities), format!("densities_{tag}.csv"), densities_csv(&spec.cfg, r, spec.frame_every))?;
            }
            if spec.wants(Product::Spectrum) {
                put(Some(Product::Spectrum), format!("spectrum_{tag}.csv"), spectrum_csv(&spec.cfg, r, spec.frame_every))?;
            }
            if spec.wants(Product::PhasePlane) {
                put(Some(Product::PhasePlane), format!("phase_plane_{tag}.csv"), phase_plane_csv(&spec.cfg, r)?)?;
            }
            if spec.wants(Product::CentralSeries) {
                put(Some(Product::CentralSeries), format!("central_series_{tag}.csv"), central_series_csv(spec, v, r)?)?;
            }
        }
        if spec.wants(Product::Wedge) {
            let times = v.runs.first().map(|r| frame_indices(&r.traj.times, spec.frame_every).into_iter().map(|i| r.traj.times[i]).collect::<Vec<_>>()).unwrap_or_default();
            put(Some(Product::Wedge), format!("wedge_{label}.csv"), wedge_csv(&times, v.variant.ic.background()))?;
        }
        if let Some(p) = &v.proximity {
            put(Some(Product::Proximity), format!("proximity_{label}.csv"), proximity_csv(p))?;
        }
    }
    if let Some(scan) = &run.mi_scan {
        put(Some(Product::MiScan), "mi_scan.csv".into(), mi_scan_csv(scan))?;
    }

    for (product, names) in &by_product {
        if let Some(script) = plot_script(*product, names) {
            let name = format!("plot_{}.txt", product.key());
            write_file(dir, &name, &script)?;
            files.push(name);
        }
    }
    files.push("manifest.json".into());
    let m = manifest(run, smoke, files.clone());
    let json = serde_json::to_string_pretty(&m).expect("manifest serializes");
    write_file(dir, "manifest.json", &(json + "\n"))?;
    Ok(files)
}

/// `<root>/<scenario>` where the root is `--out`, else `$DNLS_OUT`, else `out`.
pub fn output_dir(out: Option<&Path>, scenario: &str) -> PathBuf {
    let root = match out {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os("DNLS_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
    };
    root.join(scenario)
}
