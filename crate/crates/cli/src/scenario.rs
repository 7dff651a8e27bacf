//! Scenario specifications and the built-in catalog.

use std::path::Path;

use dnls_core::lattice::{critical_amplitude, solvability_gate};
use dnls_core::proximity::DEFAULT_WINDOW;
use dnls_core::timestep::{PROPERTY_DT, SCENARIO_ATOL, SCENARIO_RTOL};
use dnls_core::{Boundary, DpsParams, InitialCondition, IntegratorSpec, LatticeConfig, Method, System};
use serde::Serialize;

use crate::config::RawConfig;
use crate::error::{CliError, CliResult};

/// Horizon used by `--smoke`.
pub const SMOKE_T_END: f64 = 10.0;
/// Tolerance of the solvability verdict recorded in manifests.
pub const GATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    Densities,
    Spectrum,
    PhasePlane,
    CentralSeries,
    MiScan,
    Proximity,
    Attractor,
    Wedge,
}

impl Product {
    pub const ALL: [Product; 8] = [
        Self::Densities,
        Self::Spectrum,
        Self::PhasePlane,
        Self::CentralSeries,
        Self::MiScan,
        Self::Proximity,
        Self::Attractor,
        Self::Wedge,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Self::Densities => "densities",
            Self::Spectrum => "spectrum",
            Self::PhasePlane => "phase_plane",
            Self::CentralSeries => "central_series",
            Self::MiScan => "mi_scan",
            Self::Proximity => "proximity",
            Self::Attractor => "attractor",
            Self::Wedge => "wedge",
        }
    }
}

impl std::str::FromStr for Product {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|p| p.key() == s).ok_or(())
    }
}

/// One initial condition of a scenario, with its optional dPS reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub label: String,
    pub ic: InitialCondition,
    pub dps: Option<DpsParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseFloor {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub systems: Vec<System>,
    pub cfg: LatticeConfig,
    pub variants: Vec<Variant>,
    pub integrator: IntegratorSpec,
    /// Spacing of density and spectrum frames.
    pub frame_every: f64,
    pub outputs: Vec<Product>,
    pub noise: Option<NoiseFloor>,
    pub window: (f64, f64),
    pub attractor_window: f64,
    pub attractor_tol: f64,
    /// The key/value text this spec was resolved from.
    #[serde(skip)]
    pub source: RawConfig,
}

impl ScenarioSpec {
    pub fn wants(&self, product: Product) -> bool {
        self.outputs.contains(&product)
    }

    /// Caps the horizon at [`SMOKE_T_END`].
    pub fn smoke(mut self) -> Self {
        if self.integrator.t_end > SMOKE_T_END {
            self.integrator.t_end = SMOKE_T_END;
            self.attractor_window = self.attractor_window.min(SMOKE_T_END);
            self.frame_every = self.frame_every.min(SMOKE_T_END);
        }
        self
    }

    /// Critical amplitude, when the parameters are in the gain/loss regime.
    pub fn critical_amplitude(&self) -> Option<f64> {
        critical_amplitude(self.cfg.gamma(), self.cfg.delta()).ok()
    }

    /// Solvability verdict for a background amplitude.
    pub fn gate(&self, background: f64) -> Option<bool> {
        solvability_gate(background, self.cfg.gamma(), self.cfg.delta(), GATE_TOL).ok()
    }
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "systems",
    "half_length",
    "nodes",
    "spacing",
    "gamma",
    "delta",
    "boundary",
    "shift_background",
    "ic",
    "base",
    "perturbation",
    "mode",
    "background",
    "lambda1",
    "lambda2",
    "lambda3",
    "sigma",
    "rho",
    "method",
    "dt",
    "rtol",
    "atol",
    "t_end",
    "sample_every",
    "frame_every",
    "outputs",
    "dps_q",
    "dps_t0",
    "noise_floor",
    "noise_seed",
    "window",
    "attractor_window",
    "attractor_tol",
];

fn invalid(e: dnls_core::Error) -> CliError {
    CliError::Validation(e.to_string())
}

fn parse_system(raw: &RawConfig, name: &str) -> CliResult<System> {
    match name.trim() {
        "dnls" => Ok(System::Dnls),
        "al" => Ok(System::AblowitzLadik),
        "shifted" => Ok(System::Shifted {
            background: raw.require("shift_background")?,
        }),
        other => Err(CliError::parse(
            raw.raw("systems").map(|e| e.line).filter(|&l| l > 0),
            format!("unknown system `{other}` (expected dnls, al or shifted)"),
        )),
    }
}

fn format_label(value: f64) -> String {
    format!("{value}")
}

/// Resolves and validates a parsed configuration.
pub fn resolve(raw: RawConfig) -> CliResult<ScenarioSpec> {
    raw.check_known(KNOWN_KEYS)?;
    let name = raw.str_or("name", "custom").to_string();
    let systems = raw
        .str_or("systems", "dnls")
        .split(',')
        .map(|s| parse_system(&raw, s))
        .collect::<CliResult<Vec<_>>>()?;

    let half_length: f64 = raw.require("half_length")?;
    let gamma: f64 = raw.require("gamma")?;
    let delta: f64 = raw.require("delta")?;
    let boundary = match raw.str_or("boundary", "periodic") {
        "periodic" => Boundary::Periodic,
        "dirichlet_zero" => Boundary::DirichletZero,
        other => return Err(CliError::parse(None, format!("unknown boundary `{other}`"))),
    };
    let cfg = match (raw.optional::<usize>("nodes")?, raw.optional::<f64>("spacing")?) {
        (Some(n), None) => LatticeConfig::new(half_length, n, gamma, delta, boundary),
        (None, Some(h)) => LatticeConfig::with_spacing(half_length, h, gamma, delta, boundary),
        (Some(n), Some(h)) => LatticeConfig::new(half_length, n, gamma, delta, boundary).and_then(|c| {
            if (c.spacing() - h).abs() > 1e-12 * h {
                Err(dnls_core::Error::Config(format!("spacing {h} does not equal 2L/N = {}", c.spacing())))
            } else {
                Ok(c)
            }
        }),
        (None, None) => return Err(CliError::parse(None, "missing required key `nodes` (or `spacing`)")),
    }
    .map_err(invalid)?;
    for s in &systems {
        s.validate(&cfg).map_err(invalid)?;
    }

    let kinds: Vec<String> = raw.require_list("ic")?;
    let t0s: Option<Vec<f64>> = raw.list("dps_t0")?;
    let dps_q: Option<f64> = raw.optional("dps_q")?;
    if t0s.is_some() != dps_q.is_some() {
        return Err(CliError::Validation("dps_q and dps_t0 must be given together".into()));
    }
    let mut variants = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        let dps = match (&t0s, dps_q) {
            (Some(t0s), Some(q)) => {
                let t0 = *t0s.get(i).ok_or_else(|| {
                    CliError::Validation(format!("dps_t0 needs one entry per ic ({} given)", t0s.len()))
                })?;
                Some(DpsParams::new(q, t0).map_err(invalid)?)
            }
            _ => None,
        };
        match kind.as_str() {
            "plane_wave" => {
                let base: f64 = raw.require("base")?;
                let mode: i64 = raw.require("mode")?;
                for p in raw.require_list::<f64>("perturbation")? {
                    variants.push(Variant {
                        label: format!("ap_{}", format_label(p)),
                        ic: InitialCondition::PlaneWave { base, perturbation: p, mode },
                        dps,
                    });
                }
            }
            "algebraic" => variants.push(Variant {
                label: "algebraic".into(),
                ic: InitialCondition::AlgebraicBump {
                    background: raw.require("background")?,
                    lambda1: raw.require("lambda1")?,
                    lambda2: raw.require("lambda2")?,
                    lambda3: raw.require("lambda3")?,
                },
                dps,
            }),
            "sech" => variants.push(Variant {
                label: "sech".into(),
                ic: InitialCondition::SechBump {
                    background: raw.require("background")?,
                    sigma: raw.require("sigma")?,
                    rho: raw.require("rho")?,
                },
                dps,
            }),
            other => {
                return Err(CliError::parse(
                    raw.raw("ic").map(|e| e.line).filter(|&l| l > 0),
                    format!("unknown ic `{other}` (expected plane_wave, algebraic or sech)"),
                ))
            }
        }
    }
    if variants.is_empty() {
        return Err(CliError::Validation("no initial condition".into()));
    }
    for v in &variants {
        dnls_core::make_initial_condition(&v.ic, &cfg.grid()).map_err(invalid)?;
    }

    let method = match raw.str_or("method", "dp54") {
        "dp54" => Method::Dp54Adaptive,
        "rk4" => Method::Rk4Fixed,
        other => return Err(CliError::parse(None, format!("unknown method `{other}`"))),
    };
    let default_dt = if method == Method::Rk4Fixed { PROPERTY_DT } else { 1e-2 };
    let integrator = IntegratorSpec {
        method,
        dt: raw.or("dt", default_dt)?,
        rtol: raw.or("rtol", SCENARIO_RTOL)?,
        atol: raw.or("atol", SCENARIO_ATOL)?,
        t_end: raw.require("t_end")?,
        sample_every: raw.require("sample_every")?,
    };
    integrator.validate().map_err(invalid)?;
    let frame_every: f64 = raw.or("frame_every", integrator.sample_every)?;
    if !(frame_every >= integrator.sample_every) {
        return Err(CliError::Validation("frame_every must be at least sample_every".into()));
    }

    let outputs = raw
        .list::<String>("outputs")?
        .unwrap_or_else(|| vec!["densities".into()])
        .iter()
        .map(|s| {
            s.parse::<Product>()
                .map_err(|_| CliError::parse(raw.raw("outputs").map(|e| e.line).filter(|&l| l > 0), format!("unknown output `{s}`")))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let noise_floor: f64 = raw.or("noise_floor", 0.0)?;
    if !(noise_floor >= 0.0) {
        return Err(CliError::Validation("noise_floor must be nonnegative".into()));
    }
    let noise = (noise_floor > 0.0).then(|| -> CliResult<NoiseFloor> {
        Ok(NoiseFloor {
            amplitude: noise_floor,
            seed: raw.or("noise_seed", 0u64)?,
        })
    });
    let noise = noise.transpose()?;

    let window = match raw.list::<f64>("window")? {
        None => DEFAULT_WINDOW,
        Some(w) if w.len() == 2 && w[0] < w[1] => (w[0], w[1]),
        Some(_) => return Err(CliError::Validation("window needs two increasing values".into())),
    };

    let spec = ScenarioSpec {
        name,
        systems,
        cfg,
        variants,
        integrator,
        frame_every,
        outputs,
        noise,
        window,
        attractor_window: raw.or("attractor_window", 1.0)?,
        attractor_tol: raw.or("attractor_tol", 1e-3)?,
        source: raw,
    };
    check_products(&spec)?;
    Ok(spec)
}

fn check_products(spec: &ScenarioSpec) -> CliResult<()> {
    let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::Validation(msg.into())) };
    let has = |s: System| spec.systems.contains(&s);
    if spec.wants(Product::Proximity) {
        need(has(System::Dnls) && has(System::AblowitzLadik), "proximity needs both dnls and al systems")?;
        need(spec.critical_amplitude().is_some(), "proximity needs gamma > 0 and delta < 0")?;
    }
    if spec.wants(Product::Attractor) || spec.wants(Product::MiScan) {
        need(spec.critical_amplitude().is_some(), "attractor and mi_scan need gamma > 0 and delta < 0")?;
    }
    if spec.wants(Product::MiScan) {
        need(
            spec.variants.iter().all(|v| matches!(v.ic, InitialCondition::PlaneWave { .. })),
            "mi_scan needs a plane-wave initial condition",
        )?;
    }
    if spec.wants(Product::PhasePlane) || spec.wants(Product::CentralSeries) {
        need(spec.cfg.nodes().is_multiple_of(2), "tracking the central node needs an even node count")?;
    }
    if spec.variants.iter().any(|v| v.dps.is_some()) && (spec.cfg.spacing() - 1.0).abs() > 1e-12 {
        return Err(CliError::Validation("the dPS reference needs unit spacing".into()));
    }
    Ok(())
}

pub const CATALOG: &[(&str, &str, &str)] = &[
    ("fig5", "stable carrier K=45 relaxing onto the plane-wave attractor", FIG5),
    ("fig6", "unstable carrier K=8: MI transient and stable-band selection", FIG6),
    ("fig8", "algebraic bump on A=0.5 != A*: spectrum transient on L=50", FIG8),
    ("fig9a", "DNLS, algebraic bump on the critical background", FIG9A),
    ("fig9b", "DNLS, sech bump on the critical background", FIG9B),
    ("fig9c", "AL lattice, algebraic bump", FIG9C),
    ("fig9d", "AL lattice, sech bump", FIG9D),
    ("fig10a", "DNLS, algebraic bump on A=0.5 != A*=1", FIG10A),
    ("fig10b", "DNLS, sech bump on A=0.5 != A*=1", FIG10B),
    ("fig11", "first extreme events against the dPS when A != A*", FIG11),
    ("fig12", "DNLS/AL distance curves with both analytic estimates", FIG12),
];

const PLANE_WAVE_LATTICE: &str = "half_length = 50\nnodes = 100\ngamma = 1.5\ndelta = -1.5\n";
const WIDE_CRITICAL: &str = "half_length = 200\nnodes = 400\ngamma = 0.0025\ndelta = -0.01\n";
const WIDE_OFF_CRITICAL: &str = "half_length = 200\nnodes = 400\ngamma = 0.01\ndelta = -0.01\n";
const ALGEBRAIC: &str = "background = 0.5\nlambda1 = 1\nlambda2 = 1\nlambda3 = 4\n";
const SECH: &str = "background = 0.5\nsigma = 0.6\nrho = 1\n";

const FIG5: &str = "name = fig5
systems = dnls
ic = plane_wave
base = 1
perturbation = 2, -0.999
mode = 45
t_end = 10
sample_every = 0.01
frame_every = 0.5
attractor_window = 1
outputs = spectrum, phase_plane, attractor, mi_scan, densities
";

const FIG6: &str = "name = fig6
systems = dnls
ic = plane_wave
base = 1
perturbation = 2
mode = 8
t_end = 3700
sample_every = 0.5
frame_every = 25
noise_floor = 1e-12
noise_seed = 8
attractor_window = 100
outputs = spectrum, phase_plane, attractor, mi_scan
";

const FIG8: &str = "name = fig8
systems = dnls
half_length = 50
nodes = 100
gamma = 0.1
delta = -0.1
ic = algebraic
t_end = 1000
sample_every = 0.5
frame_every = 20
attractor_window = 50
outputs = spectrum, attractor, densities
";

const LOCALIZED_RUN: &str = "t_end = 40
sample_every = 0.05
frame_every = 0.5
";

const FIG9A: &str = "name = fig9a
systems = dnls
ic = algebraic
dps_q = 0.5
dps_t0 = 2.40
outputs = densities, wedge, central_series
";

const FIG9B: &str = "name = fig9b
systems = dnls
ic = sech
dps_q = 0.5
dps_t0 = 3.30
outputs = densities, wedge, central_series
";

const FIG9C: &str = "name = fig9c
systems = al
ic = algebraic
outputs = densities, wedge, central_series
";

const FIG9D: &str = "name = fig9d
systems = al
ic = sech
outputs = densities, wedge, central_series
";

const FIG10A: &str = "name = fig10a
systems = dnls
ic = algebraic
outputs = densities, wedge, central_series
";

const FIG10B: &str = "name = fig10b
systems = dnls
ic = sech
outputs = densities, wedge, central_series
";

const FIG11: &str = "name = fig11
systems = dnls
ic = algebraic, sech
dps_q = 0.5
dps_t0 = 2.40, 3.30
t_end = 10
sample_every = 0.01
frame_every = 0.5
outputs = central_series, densities
";

const FIG12: &str = "name = fig12
systems = dnls, al
ic = algebraic, sech
t_end = 10
sample_every = 0.05
outputs = proximity, central_series
";

/// Full key/value text of a catalog entry.
pub fn catalog_text(name: &str) -> Option<String> {
    let (_, _, body) = CATALOG.iter().find(|(n, _, _)| *n == name)?;
    let mut text = body.to_string();
    let lattice = match name {
        "fig5" | "fig6" => PLANE_WAVE_LATTICE,
        "fig9a" | "fig9b" | "fig9c" | "fig9d" | "fig12" => WIDE_CRITICAL,
        "fig10a" | "fig10b" | "fig11" => WIDE_OFF_CRITICAL,
        _ => "",
    };
    text.push_str(lattice);
    if body.contains("ic = algebraic") || body.contains("ic = algebraic, sech") {
        text.push_str(ALGEBRAIC);
    }
    if body.contains("sech") {
        // the sech profile shares the background key with the algebraic one
        let sech_only: String = SECH
            .lines()
            .filter(|l| !(text.contains("background =") && l.starts_with("background")))
            .map(|l| format!("{l}\n"))
            .collect();
        text.push_str(&sech_only);
    }
    if !text.contains("t_end =") {
        text.push_str(LOCALIZED_RUN);
    }
    Some(text)
}

/// Resolves a catalog name or a path to a config file.
pub fn load_scenario(name_or_path: &str, overrides: &[String]) -> CliResult<ScenarioSpec> {
    let text = match catalog_text(name_or_path) {
        Some(t) => t,
        None => {
            let path = Path::new(name_or_path);
            if !path.exists() {
                return Err(CliError::Validation(format!(
                    "`{name_or_path}` is neither a catalog scenario nor a readable file"
                )));
            }
            std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: name_or_path.to_string(),
                source,
            })?
        }
    };
    let mut raw = RawConfig::parse(&text)?;
    for o in overrides {
        raw.set(o)?;
    }
    resolve(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_catalog_entry_resolves() {
        for (name, _, _) in CATALOG {
            let spec = load_scenario(name, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(spec.name, *name);
        }
    }

    #[test]
    fn fig6_parameters() {
        let s = load_scenario("fig6", &[]).unwrap();
        assert_eq!(s.cfg.half_length(), 50.0);
        assert_eq!(s.cfg.spacing(), 1.0);
        assert_eq!(s.cfg.nodes(), 100);
        assert_eq!((s.cfg.gamma(), s.cfg.delta()), (1.5, -1.5));
        assert_eq!(s.integrator.t_end, 3700.0);
        assert_eq!(
            s.variants[0].ic,
            InitialCondition::PlaneWave { base: 1.0, perturbation: 2.0, mode: 8 }
        );
    }

    #[test]
    fn fig9a_parameters() {
        let s = load_scenario("fig9a", &[]).unwrap();
        assert_eq!((s.cfg.half_length(), s.cfg.nodes(), s.cfg.spacing()), (200.0, 400, 1.0));
        assert_eq!((s.cfg.gamma(), s.cfg.delta()), (0.0025, -0.01));
        assert_eq!(
            s.variants[0].ic,
            InitialCondition::AlgebraicBump { background: 0.5, lambda1: 1.0, lambda2: 1.0, lambda3: 4.0 }
        );
        assert_eq!(s.gate(0.5), Some(true));
    }

    #[test]
    fn sech_scenarios_carry_their_profile() {
        let s = load_scenario("fig9b", &[]).unwrap();
        assert_eq!(s.variants[0].ic, InitialCondition::SechBump { background: 0.5, sigma: 0.6, rho: 1.0 });
        assert_eq!(s.variants[0].dps.unwrap().t0, 3.30);
        let s = load_scenario("fig12", &[]).unwrap();
        assert_eq!(s.variants.len(), 2);
        assert_eq!(s.gate(0.5), Some(true));
        let s = load_scenario("fig10a", &[]).unwrap();
        assert_eq!(s.gate(0.5), Some(false));
    }

    #[test]
    fn missing_delta_is_a_parse_error() {
        let text = catalog_text("fig9a").unwrap().replace("delta = -0.01\n", "");
        let err = resolve(RawConfig::parse(&text).unwrap()).unwrap_err();
        assert!(matches!(err, CliError::Parse { .. }), "{err}");
        assert!(err.to_string().contains("delta"));
    }

    #[test]
    fn unknown_key_and_invalid_values() {
        let text = format!("{}colour = blue\n", catalog_text("fig5").unwrap());
        assert!(matches!(resolve(RawConfig::parse(&text).unwrap()), Err(CliError::Parse { .. })));
        assert!(matches!(load_scenario("fig5", &["mode=51".into()]), Err(CliError::Validation(_))));
        assert!(matches!(load_scenario("fig5", &["nodes=0".into()]), Err(CliError::Validation(_))));
        assert!(matches!(load_scenario("fig9a", &["lambda2=0".into()]), Err(CliError::Validation(_))));
        assert!(matches!(load_scenario("nonexistent", &[]), Err(CliError::Validation(_))));
    }

    #[test]
    fn shifted_system_needs_dirichlet_closure() {
        let text = "systems = shifted\nshift_background = 0.5\nhalf_length = 10\nnodes = 20\ngamma = 0.0025\n\
                    delta = -0.01\nic = sech\nbackground = 0\nsigma = 0.6\nrho = 1\nt_end = 1\nsample_every = 0.1\n";
        assert!(matches!(resolve(RawConfig::parse(text).unwrap()), Err(CliError::Validation(_))));
        let ok = format!("{text}boundary = dirichlet_zero\n");
        assert!(resolve(RawConfig::parse(&ok).unwrap()).is_ok());
    }

    #[test]
    fn smoke_caps_horizon() {
        let s = load_scenario("fig6", &[]).unwrap().smoke();
        assert_eq!(s.integrator.t_end, SMOKE_T_END);
        assert!(s.attractor_window <= SMOKE_T_END);
    }
}
