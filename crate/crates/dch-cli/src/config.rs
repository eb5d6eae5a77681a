//! Run configuration: a TOML file with one section per concern. Parsing
//! reports syntax errors with positions; validation collects every problem
//! in the file before giving up, so a config can be fixed in one pass.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use dch_core::climb::{AppliedForce, ClimbParams};
use dch_core::dynamics::{Scheme, StabilizationMode, StepperConfig};
use dch_core::model::{ModelParams, Potential};
use dch_core::spectral::{PeriodicField, PeriodicGrid};

use crate::error::{CliError, CliResult};

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: PeriodicGrid,
    pub model: ModelParams,
    pub stepper: StepperConfig,
    pub initial: InitialCondition,
    pub t_end: f64,
    /// Reserved for randomized initial fields; recorded in the manifest so
    /// reruns are reproducible.
    pub seed: u64,
    pub output: OutputConfig,
    /// Verbatim config text, copied into the run manifest.
    pub raw_text: String,
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Simulation-time interval between snapshots.
    pub snapshot_cadence: f64,
    /// Simulation-time interval between diagnostics rows.
    pub diagnostics_cadence: f64,
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    Constant(f64),
    TanhCircle { center: [f64; 2], radius: f64 },
    TanhLoops { centers: Vec<(f64, f64)>, radii: Vec<f64> },
    ModePerturbedCircle { radius: f64, mode: u32, delta: f64 },
    File(PathBuf),
}

// Raw deserialization targets: everything optional so defaults can be
// documented in one place (`validate`) and all omissions diagnosed together.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    t_end: Option<f64>,
    seed: Option<u64>,
    grid: Option<RawGrid>,
    model: Option<RawModel>,
    stepper: Option<RawStepper>,
    initial_condition: Option<RawIc>,
    output: Option<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: Option<usize>,
    n: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    epsilon: Option<f64>,
    theta: Option<f64>,
    m: Option<f64>,
    m0: Option<f64>,
    potential: Option<String>,
    scaled_form: Option<bool>,
    separation_floor: Option<f64>,
    climb: Option<RawClimb>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClimb {
    coefficient: Option<f64>,
    f_app: Option<f64>,
    enabled: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStepper {
    scheme: Option<String>,
    dt_init: Option<f64>,
    dt_min: Option<f64>,
    dt_max: Option<f64>,
    rel_tol: Option<f64>,
    stabilization: Option<RawStabilization>,
    stab_kappa: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawStabilization {
    Name(String),
    Fixed { fixed: f64 },
    ScaledFloor { scaled_floor: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIc {
    kind: Option<String>,
    value: Option<f64>,
    center: Option<[f64; 2]>,
    radius: Option<f64>,
    centers: Option<Vec<[f64; 2]>>,
    radii: Option<Vec<f64>>,
    mode: Option<u32>,
    delta: Option<f64>,
    path: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    snapshot_cadence: Option<f64>,
    diagnostics_cadence: Option<f64>,
}

/// Load and validate a config file.
pub fn parse_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    validate(raw, text, base)
}

fn validate(raw: RawConfig, raw_text: String, base: &Path) -> CliResult<RunConfig> {
    let mut errs: Vec<String> = Vec::new();

    // grid
    let dim = raw.grid.as_ref().and_then(|g| g.dim).unwrap_or(2);
    let n = raw.grid.as_ref().and_then(|g| g.n).unwrap_or(64);
    let grid = match PeriodicGrid::new(dim, n) {
        Ok(g) => Some(g),
        Err(e) => {
            errs.push(format!("grid: {e}"));
            None
        }
    };

    // model
    let rm = raw.model.as_ref();
    let epsilon = rm.and_then(|m| m.epsilon).unwrap_or(0.1);
    let theta = rm.and_then(|m| m.theta).unwrap_or(0.1);
    let m = rm.and_then(|m| m.m).unwrap_or(2.0);
    let m0 = rm.and_then(|m| m.m0).unwrap_or(1.0);
    if !(epsilon > 0.0) {
        errs.push(format!("model.epsilon must be > 0, got {epsilon}"));
    }
    if !(m >= 2.0) {
        errs.push(format!("model.m must be >= 2, got {m}"));
    }
    if !(m0 > 0.0) {
        errs.push(format!("model.m0 must be > 0, got {m0}"));
    }
    if !(theta >= 0.0) {
        errs.push(format!("model.theta must be >= 0, got {theta}"));
    }
    let potential = match rm.and_then(|m| m.potential.as_deref()).unwrap_or("quartic") {
        "quartic" => Potential::QUARTIC,
        "scaled_quartic" => Potential::SCALED_QUARTIC,
        other => {
            errs.push(format!(
                "model.potential must be \"quartic\" or \"scaled_quartic\", got \"{other}\""
            ));
            Potential::QUARTIC
        }
    };
    let climb = match rm.and_then(|m| m.climb.as_ref()) {
        None => None,
        Some(rc) => {
            let coefficient = rc.coefficient.unwrap_or(1.0);
            if !(coefficient > 0.0) {
                errs.push(format!(
                    "model.climb.coefficient must be > 0, got {coefficient}"
                ));
            }
            Some(ClimbParams {
                coefficient,
                f_app: AppliedForce::Constant(rc.f_app.unwrap_or(0.0)),
                enabled: rc.enabled.unwrap_or(true),
            })
        }
    };
    let model = ModelParams {
        epsilon,
        m,
        m0,
        theta,
        potential,
        scaled_form: rm.and_then(|m| m.scaled_form).unwrap_or(true),
        climb,
        separation_floor: rm.and_then(|m| m.separation_floor).unwrap_or(1e-12),
    };

    // stepper
    let rs = raw.stepper.as_ref();
    let defaults = StepperConfig::default();
    let scheme = match rs.and_then(|s| s.scheme.as_deref()).unwrap_or("explicit_rk4") {
        "explicit_rk4" => Scheme::ExplicitRk4Adaptive,
        "imex" => Scheme::ImexStabilized,
        other => {
            errs.push(format!(
                "stepper.scheme must be \"explicit_rk4\" or \"imex\", got \"{other}\""
            ));
            Scheme::ExplicitRk4Adaptive
        }
    };
    let stabilization = match rs.and_then(|s| s.stabilization.as_ref()) {
        None => defaults.stabilization,
        Some(RawStabilization::Name(name)) if name == "auto" => StabilizationMode::Auto,
        Some(RawStabilization::Name(name)) => {
            errs.push(format!(
                "stepper.stabilization must be \"auto\", {{ fixed = A }} or \
                 {{ scaled_floor = mult }}, got \"{name}\""
            ));
            defaults.stabilization
        }
        Some(RawStabilization::Fixed { fixed }) => StabilizationMode::Fixed(*fixed),
        Some(RawStabilization::ScaledFloor { scaled_floor }) => {
            StabilizationMode::ScaledFloor(*scaled_floor)
        }
    };
    let stepper = StepperConfig {
        scheme,
        dt_init: rs.and_then(|s| s.dt_init).unwrap_or(defaults.dt_init),
        dt_min: rs.and_then(|s| s.dt_min).unwrap_or(defaults.dt_min),
        dt_max: rs.and_then(|s| s.dt_max).unwrap_or(defaults.dt_max),
        rel_tol: rs.and_then(|s| s.rel_tol).unwrap_or(defaults.rel_tol),
        stabilization,
        stab_kappa: rs.and_then(|s| s.stab_kappa).unwrap_or(0.0),
    };
    if let Err(e) = stepper.validate() {
        errs.push(format!("stepper: {e}"));
    }

    // initial condition
    let initial = validate_ic(raw.initial_condition.as_ref(), dim, base, &mut errs);

    // time and output
    let t_end = raw.t_end.unwrap_or(1.0);
    if !(t_end >= 0.0) {
        errs.push(format!("t_end must be >= 0, got {t_end}"));
    }
    let ro = raw.output.as_ref();
    let output = OutputConfig {
        directory: ro
            .and_then(|o| o.directory.clone())
            .unwrap_or_else(|| PathBuf::from("dch-out")),
        snapshot_cadence: ro
            .and_then(|o| o.snapshot_cadence)
            .unwrap_or(if t_end > 0.0 { t_end } else { 1.0 }),
        diagnostics_cadence: ro
            .and_then(|o| o.diagnostics_cadence)
            .unwrap_or(if t_end > 0.0 { t_end / 100.0 } else { 1.0 }),
    };
    if !(output.snapshot_cadence > 0.0) {
        errs.push(format!(
            "output.snapshot_cadence must be > 0, got {}",
            output.snapshot_cadence
        ));
    }
    if !(output.diagnostics_cadence > 0.0) {
        errs.push(format!(
            "output.diagnostics_cadence must be > 0, got {}",
            output.diagnostics_cadence
        ));
    }

    if let Err(e) = model.validate() {
        // primitive checks above should have caught everything; backstop
        let msg = format!("model: {e}");
        if !errs.contains(&msg) {
            errs.push(msg);
        }
    }

    if !errs.is_empty() {
        return Err(CliError::InvalidConfig(errs));
    }
    Ok(RunConfig {
        grid: grid.expect("grid errors reported above"),
        model,
        stepper,
        initial,
        t_end,
        seed: raw.seed.unwrap_or(0),
        output,
        raw_text,
    })
}

fn validate_ic(
    raw: Option<&RawIc>,
    dim: usize,
    base: &Path,
    errs: &mut Vec<String>,
) -> InitialCondition {
    let fallback = InitialCondition::Constant(0.0);
    let Some(ic) = raw else {
        return fallback;
    };
    let kind = ic.kind.as_deref().unwrap_or("constant");
    let need_2d = |errs: &mut Vec<String>| {
        if dim != 2 {
            errs.push(format!(
                "initial_condition.kind \"{kind}\" needs a 2D grid, got dim={dim}"
            ));
        }
    };
    match kind {
        "constant" => InitialCondition::Constant(ic.value.unwrap_or(0.0)),
        "tanh_circle" => {
            need_2d(errs);
            let radius = ic.radius.unwrap_or_else(|| {
                errs.push("initial_condition.radius is required for tanh_circle".into());
                1.0
            });
            if !(radius > 0.0) {
                errs.push(format!("initial_condition.radius must be > 0, got {radius}"));
            }
            InitialCondition::TanhCircle {
                center: ic
                    .center
                    .unwrap_or([std::f64::consts::PI, std::f64::consts::PI]),
                radius,
            }
        }
        "tanh_loops" => {
            need_2d(errs);
            let centers: Vec<(f64, f64)> = ic
                .centers
                .clone()
                .unwrap_or_default()
                .iter()
                .map(|c| (c[0], c[1]))
                .collect();
            let radii = ic.radii.clone().unwrap_or_default();
            if centers.is_empty() {
                errs.push("initial_condition.centers must list at least one loop".into());
            }
            if centers.len() != radii.len() {
                errs.push(format!(
                    "initial_condition: {} centers but {} radii",
                    centers.len(),
                    radii.len()
                ));
            }
            InitialCondition::TanhLoops { centers, radii }
        }
        "mode_perturbed_circle" => {
            need_2d(errs);
            let radius = ic.radius.unwrap_or_else(|| {
                errs.push("initial_condition.radius is required for mode_perturbed_circle".into());
                1.0
            });
            let mode = ic.mode.unwrap_or_else(|| {
                errs.push("initial_condition.mode is required for mode_perturbed_circle".into());
                2
            });
            let delta = ic.delta.unwrap_or_else(|| {
                errs.push("initial_condition.delta is required for mode_perturbed_circle".into());
                0.05
            });
            if !(radius > 0.0) {
                errs.push(format!("initial_condition.radius must be > 0, got {radius}"));
            }
            if mode < 2 {
                errs.push(format!("initial_condition.mode must be >= 2, got {mode}"));
            }
            if !(delta > 0.0) {
                errs.push(format!("initial_condition.delta must be > 0, got {delta}"));
            }
            InitialCondition::ModePerturbedCircle {
                radius,
                mode,
                delta,
            }
        }
        "file" => {
            let Some(p) = ic.path.clone() else {
                errs.push("initial_condition.path is required for kind \"file\"".into());
                return fallback;
            };
            let resolved = if p.is_absolute() { p } else { base.join(p) };
            if !resolved.is_file() {
                errs.push(format!(
                    "initial_condition.path {} does not exist",
                    resolved.display()
                ));
            }
            InitialCondition::File(resolved)
        }
        other => {
            errs.push(format!(
                "initial_condition.kind \"{other}\" unknown (constant, tanh_circle, \
                 tanh_loops, mode_perturbed_circle, file)"
            ));
            fallback
        }
    }
}

/// Realize the configured initial condition on the configured grid.
pub fn build_initial_field(cfg: &RunConfig) -> CliResult<PeriodicField> {
    let grid = cfg.grid;
    let width = 2.0_f64.sqrt() * cfg.model.epsilon;
    match &cfg.initial {
        InitialCondition::Constant(c) => Ok(PeriodicField::constant(grid, *c)),
        InitialCondition::TanhCircle { center, radius } => {
            let [cx, cy] = *center;
            let r0 = *radius;
            Ok(PeriodicField::from_fn(grid, |x, y| {
                let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                (-(r - r0) / width).tanh()
            }))
        }
        InitialCondition::TanhLoops { centers, radii } => {
            dch_core::climb::loop_superposition(grid, centers, radii, cfg.model.epsilon)
                .map_err(crate::error::validation)
        }
        InitialCondition::ModePerturbedCircle {
            radius,
            mode,
            delta,
        } => {
            let (r0, k, d) = (*radius, *mode as f64, *delta);
            let c = std::f64::consts::PI;
            Ok(PeriodicField::from_fn(grid, |x, y| {
                let (dx, dy) = (x - c, y - c);
                let rho = (dx * dx + dy * dy).sqrt();
                let phi = dy.atan2(dx);
                ((r0 + d * (k * phi).cos() - rho) / width).tanh()
            }))
        }
        InitialCondition::File(path) => {
            let snap = crate::snapshot::read_snapshot(path)?;
            if snap.u.grid() != grid {
                return Err(CliError::Validation(format!(
                    "initial field in {} is on a {}^{} grid, config wants {}^{}",
                    path.display(),
                    snap.u.grid().n(),
                    snap.u.grid().dim(),
                    grid.n(),
                    grid.dim()
                )));
            }
            Ok(snap.u)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> CliResult<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        fs::write(&path, text).unwrap();
        parse_config(&path)
    }

    #[test]
    fn empty_config_gets_documented_defaults() {
        let cfg = parse_str("").unwrap();
        assert_eq!(cfg.grid.dim(), 2);
        assert_eq!(cfg.grid.n(), 64);
        assert_eq!(cfg.model.theta, 0.1);
        assert_eq!(cfg.model.m, 2.0);
        assert!(matches!(cfg.initial, InitialCondition::Constant(c) if c == 0.0));
        assert_eq!(cfg.t_end, 1.0);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.output.snapshot_cadence, 1.0);
        assert_eq!(cfg.output.diagnostics_cadence, 0.01);
    }

    #[test]
    fn all_validation_errors_are_collected() {
        let err = parse_str(
            "[model]\nepsilon = -0.1\nm = 1.5\n\n[output]\nsnapshot_cadence = 0.0\n",
        )
        .unwrap_err();
        let CliError::InvalidConfig(list) = err else {
            panic!("expected aggregated errors, got {err}");
        };
        assert!(list.iter().any(|e| e.contains("m must be >= 2")), "{list:?}");
        assert!(list.iter().any(|e| e.contains("epsilon")), "{list:?}");
        assert!(list.iter().any(|e| e.contains("snapshot_cadence")), "{list:?}");
    }

    #[test]
    fn stabilization_forms_parse() {
        let auto = parse_str("[stepper]\nstabilization = \"auto\"\n").unwrap();
        assert!(matches!(
            auto.stepper.stabilization,
            StabilizationMode::Auto
        ));
        let fixed = parse_str("[stepper]\nstabilization = { fixed = 3.5 }\n").unwrap();
        assert!(matches!(
            fixed.stepper.stabilization,
            StabilizationMode::Fixed(a) if a == 3.5
        ));
        let floor = parse_str("[stepper]\nstabilization = { scaled_floor = 64.0 }\n").unwrap();
        assert!(matches!(
            floor.stepper.stabilization,
            StabilizationMode::ScaledFloor(m) if m == 64.0
        ));
    }

    #[test]
    fn loops_require_matching_lists() {
        let err = parse_str(
            "[initial_condition]\nkind = \"tanh_loops\"\ncenters = [[1.0, 1.0]]\nradii = [0.5, 0.6]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("1 centers but 2 radii"), "{err}");
    }

    #[test]
    fn missing_ic_file_is_caught_at_validation() {
        let err = parse_str("[initial_condition]\nkind = \"file\"\npath = \"nope.bin\"\n")
            .unwrap_err();
        assert!(err.to_string().contains("nope.bin"), "{err}");
    }
}
