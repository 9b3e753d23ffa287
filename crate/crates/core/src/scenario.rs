//! Scenario files and the runs behind the `sgsim` command.
//!
//! A scenario is a TOML document. Values are layered: the file, then
//! environment variables `SGSIM_<KEY>` (nested keys joined by `__`, so
//! `SGSIM_PARAMS__KICK=2` sets `params.kick`), then command-line overrides.
//! Unknown keys are rejected before anything is computed.
//!
//! ```toml
//! models = ["pauli_qm", "dirac_field"]
//! output_dir = "out"
//! check_force = true
//!
//! [params]
//! kick = 4.0          # μηΔt in units of ħ/d
//! field_ratio = 200.0 # B₀ / (η d)
//!
//! [grid]
//! dims = [64, 64, 64]
//! halfwidth = [8.0, 8.0, 12.0]
//!
//! [spin]
//! theta = 1.0471975511965976
//!
//! [sweep]
//! thetas = [0.0, 1.5707963267948966, 3.141592653589793]
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acceptance::expected_verdict;
use crate::detector::{
    classical_monotone, classify_sweep, default_flight_time, emit_table, mirror_defect,
    model_output, run_sweep, standard_thetas, to_detector, write_arrivals_csv, DetectorRecord,
    ModelKind, ModelOutput, OutcomeClassification, SweepSetup,
};
use crate::dirac::{
    charge_density, dirac_force_density, evolve_nr, lift_to_dirac, lump_fractions,
    prepared_spin_state,
};
use crate::error::{Result, SimError};
use crate::field::{sg_field, EmField, FieldFree};
use crate::grid::{grid_curl, grid_divergence, sample_field, Grid3};
use crate::io::{slice, write_pgm, GridDump, SlicePlane};
use crate::lumps::split_density;
use crate::params::{PhysParams, UnitSystem};
use crate::pauli::{
    density, free_evolve_spectral, make_gaussian, momentum_expectation, sg_phase_kick,
    spin_from_polar, GaussianPacketSpec, DEFAULT_MARGIN_TOL,
};
use crate::point::{integrate_point, point_force, PointModel, PointState};
use crate::sphere::{integrate_rigid, sphere_total_force, SphereModel, SphereState};
use crate::vec3::Vec3;

pub const ENV_PREFIX: &str = "SGSIM_";

/// Environment variables read by the command itself rather than as overrides.
pub const RESERVED_ENV: &[&str] = &["SGSIM_CONFIG"];

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
    pub charge_e: Option<f64>,
    pub c: Option<f64>,
    pub b0: Option<f64>,
    pub eta: Option<f64>,
    pub dt_field: Option<f64>,
    pub d: Option<f64>,
    pub radius: Option<f64>,
    pub unit_system: Option<UnitSystem>,
    /// μηΔt in units of ħ/d; sets η.
    pub kick: Option<f64>,
    /// B₀/(ηd), used when `b0` is not given. Defaults to 200.
    pub field_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_dims")]
    pub dims: [usize; 3],
    /// In units of the packet width d.
    #[serde(default = "default_halfwidth")]
    pub halfwidth: [f64; 3],
}

fn default_dims() -> [usize; 3] {
    [64, 64, 64]
}

fn default_halfwidth() -> [f64; 3] {
    [8.0, 8.0, 12.0]
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            halfwidth: default_halfwidth(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum AxisSpec {
    /// `x`, `y`, `z`, optionally with a leading `-`.
    Named(String),
    Vector([f64; 3]),
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    pub theta: Option<f64>,
    pub phi: Option<f64>,
    pub axis: Option<AxisSpec>,
}

impl SpinConfig {
    /// Polar angles (θ, φ) of the prepared spin; z-up when nothing is given.
    pub fn angles(&self) -> Result<(f64, f64)> {
        match (&self.axis, self.theta, self.phi) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(SimError::Config(
                "spin: give either axis or theta/phi, not both".into(),
            )),
            (Some(a), None, None) => {
                let v = match a {
                    AxisSpec::Vector(v) => Vec3::new(v[0], v[1], v[2]),
                    AxisSpec::Named(s) => {
                        let (sign, name) =
                            s.strip_prefix('-').map_or((1.0, s.as_str()), |r| (-1.0, r));
                        let e = match name {
                            "x" => Vec3::unit_x(),
                            "y" => Vec3::unit_y(),
                            "z" => Vec3::unit_z(),
                            _ => {
                                return Err(SimError::Config(format!(
                                    "spin.axis: unknown axis `{s}`"
                                )))
                            }
                        };
                        e * sign
                    }
                };
                let n = v.norm();
                if !(n > 0.0) {
                    return Err(SimError::Config("spin.axis must be non-zero".into()));
                }
                Ok(((v.z / n).clamp(-1.0, 1.0).acos(), v.y.atan2(v.x)))
            }
            (None, th, ph) => Ok((th.unwrap_or(0.0), ph.unwrap_or(0.0))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub thetas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub spin: SpinConfig,
    /// Detector time; derived from the kick when absent.
    pub flight_time: Option<f64>,
    /// Time after the magnet at which lumps are split; md²/ħ when absent.
    pub t_sep: Option<f64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub include_sigma_x: bool,
    #[serde(default = "yes")]
    pub consistency_c_fix: bool,
    #[serde(default)]
    pub check_force: bool,
    pub sweep: Option<SweepConfig>,
    pub margin_tol: Option<f64>,
}

fn yes() -> bool {
    true
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_table(toml::Table::new()).expect("empty scenario is valid")
    }
}

/// Sets `dotted.key = raw`, reading `raw` as a TOML value and falling back
/// to a plain string.
pub fn set_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    set_value(table, key, value)
}

pub fn set_value(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(SimError::Config(format!("malformed override key `{key}`")));
    }
    let mut t = table;
    for part in &parts[..parts.len() - 1] {
        let entry = t
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| {
            SimError::Config(format!("override `{key}`: `{part}` is not a table"))
        })?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Applies `SGSIM_*` variables (other than [`RESERVED_ENV`]) to `table`.
pub fn apply_env_overrides(
    table: &mut toml::Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<()> {
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && !RESERVED_ENV.contains(&k.as_str()))
        .collect();
    vars.sort();
    for (k, v) in vars {
        let key = k[ENV_PREFIX.len()..]
            .to_ascii_lowercase()
            .replace("__", ".");
        set_override(table, &key, &v).map_err(|e| SimError::Config(format!("{k}: {e}")))?;
    }
    Ok(())
}

impl ScenarioConfig {
    /// Parses a document without overrides; syntax and unknown-key errors
    /// carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| SimError::Config(e.to_string()))
    }

    /// Parses `text`, then applies environment and command-line overrides in that order.
    pub fn load(
        text: &str,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, toml::Value)],
    ) -> Result<Self> {
        // report file errors against the file itself, with positions
        Self::from_toml_str(text)?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| SimError::Config(e.to_string()))?;
        apply_env_overrides(&mut table, env)?;
        for (k, v) in overrides {
            set_value(&mut table, k, v.clone())?;
        }
        let cfg = Self::from_table(table)?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        self.spin.angles()?;
        self.physical()?;
        self.grid()?;
        for (name, v) in [
            ("flight_time", self.flight_time),
            ("t_sep", self.t_sep),
            ("margin_tol", self.margin_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(SimError::Config(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Physical parameters in atomic units.
    pub fn physical(&self) -> Result<PhysParams<f64>> {
        let c = &self.params;
        let cfg_err = |e: SimError| SimError::Config(format!("params: {e}"));
        if c.unit_system == Some(UnitSystem::GaussianCgsRaw) {
            if c.kick.is_some() || c.field_ratio.is_some() {
                return Err(SimError::Config(
                    "params: kick and field_ratio apply to atomic units only".into(),
                ));
            }
            let need = |name: &str, v: Option<f64>| {
                v.ok_or_else(|| {
                    SimError::Config(format!("params.{name} is required with gaussian-cgs-raw"))
                })
            };
            let raw = PhysParams {
                hbar: need("hbar", c.hbar)?,
                mass: need("mass", c.mass)?,
                charge_e: need("charge_e", c.charge_e)?,
                c: need("c", c.c)?,
                b0: need("b0", c.b0)?,
                eta: need("eta", c.eta)?,
                dt_field: need("dt_field", c.dt_field)?,
                d: need("d", c.d)?,
                radius: need("radius", c.radius)?,
                unit_system: UnitSystem::GaussianCgsRaw,
            };
            return raw.to_atomic().map(|(p, _)| p).map_err(cfg_err);
        }
        let mut p = PhysParams::<f64>::default_atomic();
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.hbar, c.hbar);
        set(&mut p.mass, c.mass);
        set(&mut p.charge_e, c.charge_e);
        set(&mut p.c, c.c);
        set(&mut p.dt_field, c.dt_field);
        set(&mut p.d, c.d);
        set(&mut p.radius, c.radius);
        match (c.kick, c.eta) {
            (Some(_), Some(_)) => {
                return Err(SimError::Config(
                    "params: give kick or eta, not both".into(),
                ))
            }
            (Some(k), None) => p.set_kick(k),
            (None, Some(e)) => p.eta = e,
            (None, None) => p.set_kick(4.0),
        }
        match (c.b0, c.field_ratio) {
            (Some(_), Some(_)) => {
                return Err(SimError::Config(
                    "params: give b0 or field_ratio, not both".into(),
                ))
            }
            (Some(b), None) => p.b0 = b,
            (None, r) => p.b0 = r.unwrap_or(200.0) * p.eta * p.d,
        }
        p.validate().map_err(cfg_err)?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<Grid3<f64>> {
        let d = self.physical()?.d;
        Grid3::new(self.grid.dims, self.grid.halfwidth.map(|h| h * d))
            .map_err(|e| SimError::Config(format!("grid: {e}")))
    }

    fn setup(&self) -> Result<SweepSetup<f64>> {
        let params = self.physical()?;
        Ok(SweepSetup {
            grid: self.grid()?,
            t_sep: self.t_sep.unwrap_or_else(|| params.spreading_time()),
            params,
            include_sigma_x: self.include_sigma_x,
            consistency_c_fix: self.consistency_c_fix,
            margin_tol: self.margin_tol.unwrap_or(DEFAULT_MARGIN_TOL),
        })
    }

    /// Creates the output directory, if one is configured.
    pub fn prepare_output(&self) -> Result<Option<&Path>> {
        match &self.output_dir {
            Some(dir) => {
                fs::create_dir_all(dir)
                    .map_err(|e| SimError::Config(format!("output_dir {}: {e}", dir.display())))?;
                Ok(Some(dir.as_path()))
            }
            None => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub name: String,
    pub oracle: String,
    pub value: f64,
    pub expected: f64,
    /// Absolute tolerance on |value − expected|.
    pub tolerance: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn new(
        name: impl Into<String>,
        oracle: impl Into<String>,
        value: f64,
        expected: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            oracle: oracle.into(),
            value,
            expected,
            tolerance,
            pass: (value - expected).abs() <= tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: {:.6e} vs {:.6e} ± {:.1e} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.expected,
            self.tolerance,
            self.oracle
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub results: BTreeMap<String, f64>,
    pub comparisons: Vec<Comparison>,
    pub records: Vec<DetectorRecord>,
    pub classifications: Vec<OutcomeClassification>,
    pub table: Option<String>,
    /// Wall-clock seconds per stage; the only non-deterministic field.
    pub timings: BTreeMap<String, f64>,
}

impl RunSummary {
    fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            ..Self::default()
        }
    }

    pub fn all_pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `summary.json` (and `arrivals.csv` when there are records) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("summary.json"), self.to_json()? + "\n")?;
        if !self.records.is_empty() {
            write_arrivals_csv(
                &self.records,
                BufWriter::new(File::create(dir.join("arrivals.csv"))?),
            )?;
        }
        if let Some(t) = &self.table {
            fs::write(dir.join("table1.txt"), t)?;
        }
        Ok(())
    }

    fn time<R>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let r = f(self);
        self.timings
            .insert(stage.into(), start.elapsed().as_secs_f64());
        r
    }
}

/// Grid of halfwidth 1.5R used for sphere quadratures.
fn sphere_grid(p: &PhysParams<f64>) -> Result<Grid3<f64>> {
    Grid3::cube(128, 1.5 * p.radius)
}

fn dump_density(dir: &Path, stem: &str, rho: &crate::grid::ScalarGridField<f64>) -> Result<()> {
    GridDump::from_scalar(rho).write_to(BufWriter::new(File::create(
        dir.join(format!("{stem}.sgg")),
    )?))?;
    let mid = rho.grid.dims[1] / 2;
    write_pgm(
        &slice(rho, SlicePlane::Xz(mid)),
        BufWriter::new(File::create(dir.join(format!("{stem}_xz.pgm")))?),
    )?;
    Ok(())
}

/// Runs every configured model for the configured spin.
pub fn simulate(cfg: &ScenarioConfig) -> Result<RunSummary> {
    let out_dir = cfg.prepare_output()?;
    let mut sum = RunSummary::new("simulate");
    let setup = cfg.setup()?;
    let p = setup.params;
    let (theta, phi) = cfg.spin.angles()?;
    let flight = match cfg.flight_time {
        Some(t) => t,
        None if cfg.models.is_empty() => return Ok(sum),
        None => default_flight_time(&p)?,
    };
    let mu_eta = p.mu() * p.eta;
    let v_kick = mu_eta * p.dt_field / p.mass;
    let axis = Vec3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    );
    let f = sg_field(&p);
    for &model in &cfg.models {
        let name = model.name();
        sum.time(name, |sum| {
            let out = match model {
                ModelKind::RigidSphere | ModelKind::PointParticle => {
                    let out = model_output(model, theta, phi, &setup)?;
                    if let ModelOutput::Classical { velocity_z } = out {
                        sum.results.insert(format!("{name}.velocity_z"), velocity_z);
                        sum.comparisons.push(Comparison::new(
                            format!("{name}.velocity_z"),
                            "dipole kick mu eta dt cos(theta) / m",
                            velocity_z,
                            v_kick * theta.cos(),
                            2e-3 * v_kick,
                        ));
                    }
                    if cfg.check_force {
                        let force = if model == ModelKind::RigidSphere {
                            let s = SphereState::at_rest(&p, axis)?;
                            sphere_total_force(
                                &SphereModel::from_params(&p),
                                &s,
                                &f,
                                &sphere_grid(&p)?,
                            )?
                        } else {
                            let m = PointModel::from_params(&p, cfg.consistency_c_fix);
                            point_force(&m, &PointState::electron(&p, axis)?, &f)
                        };
                        sum.results.insert(format!("{name}.force_z"), force.z);
                        sum.comparisons.push(Comparison::new(
                            format!("{name}.force_z"),
                            "gradient force mu eta cos(theta)",
                            force.z,
                            mu_eta * theta.cos(),
                            1e-3 * mu_eta,
                        ));
                    }
                    if let Some(dir) = out_dir {
                        let path = dir.join(format!("{name}_trajectory.csv"));
                        let w = BufWriter::new(File::create(path)?);
                        let dt = crate::sphere::precession_step_limit(
                            p.mu(),
                            p.hbar,
                            f.b_at(Vec3::zero()),
                        )
                        .map_or(p.dt_field / 1000.0, |m| 0.5 * m);
                        if model == ModelKind::RigidSphere {
                            let s = SphereState::at_rest(&p, axis)?;
                            integrate_rigid(&SphereModel::from_params(&p), &s, &f, p.dt_field, dt)?
                                .write_csv(w)?;
                        } else {
                            let m = PointModel::from_params(&p, cfg.consistency_c_fix);
                            integrate_point(
                                &m,
                                &PointState::electron(&p, axis)?,
                                &f,
                                p.dt_field,
                                dt,
                            )?
                            .write_csv(w)?;
                        }
                    }
                    out
                }
                ModelKind::PauliQm | ModelKind::DiracField => {
                    let g = setup.grid;
                    let spin = spin_from_polar(theta, phi);
                    let chi = make_gaussian(&GaussianPacketSpec::new(p.d, spin), &g)?;
                    let kicked = sg_phase_kick(&chi, &p, cfg.include_sigma_x);
                    if cfg.check_force {
                        if model == ModelKind::PauliQm {
                            let pz = momentum_expectation(&kicked, p.hbar).value.z;
                            sum.results.insert(format!("{name}.momentum_z"), pz);
                            sum.comparisons.push(Comparison::new(
                                format!("{name}.momentum_z"),
                                "phase-kick momentum mu eta dt cos(theta)",
                                pz,
                                mu_eta * p.dt_field * theta.cos(),
                                1e-6 * mu_eta * p.dt_field,
                            ));
                        } else {
                            let pre = prepared_spin_state(spin, false, &p, &g)?;
                            let fz = dirac_force_density(&pre, &f, &p).integrate().z;
                            sum.results.insert(format!("{name}.force_z"), fz);
                            sum.comparisons.push(Comparison::new(
                                format!("{name}.force_z"),
                                "integrated (1/c) J x B against mu eta cos(theta)",
                                fz,
                                mu_eta * theta.cos(),
                                1e-4 * mu_eta,
                            ));
                        }
                    }
                    let rho = if model == ModelKind::PauliQm {
                        density(&free_evolve_spectral(
                            &kicked,
                            &p,
                            setup.t_sep,
                            4,
                            setup.margin_tol,
                        )?)
                    } else {
                        let psi = lift_to_dirac(&kicked, &FieldFree, &p)?;
                        charge_density(&evolve_nr(&psi, setup.t_sep, &p, setup.margin_tol)?, &p)
                    };
                    let (up, down) = split_density(&rho)?.fractions_about(0.0);
                    let (eu, ed) = lump_fractions(theta, phi);
                    for (tag, v, e) in [("up", up, eu), ("down", down, ed)] {
                        let key = format!("{name}.fraction_{tag}");
                        sum.results.insert(key.clone(), v);
                        sum.comparisons.push(Comparison::new(
                            key,
                            "z-basis spin probabilities",
                            v,
                            e,
                            1e-3,
                        ));
                    }
                    if let Some(dir) = out_dir {
                        dump_density(dir, &format!("{name}_density"), &rho)?;
                    }
                    ModelOutput::from_density(&rho, setup.t_sep)
                }
            };
            sum.records
                .push(to_detector(model, (theta, phi), &out, flight)?);
            Ok(())
        })?;
    }
    if let Some(dir) = out_dir {
        sum.write(dir)?;
    }
    Ok(sum)
}

/// θ-sweep over the configured models (all four when none are named),
/// classified for uniqueness and discreteness.
pub fn sweep(cfg: &ScenarioConfig) -> Result<RunSummary> {
    let out_dir = cfg.prepare_output()?;
    let mut sum = RunSummary::new("sweep");
    let thetas = cfg
        .sweep
        .as_ref()
        .map_or_else(standard_thetas, |s| s.thetas.clone());
    if thetas.is_empty() {
        if let Some(dir) = out_dir {
            sum.write(dir)?;
        }
        return Ok(sum);
    }
    let models: Vec<ModelKind> = if cfg.models.is_empty() {
        ModelKind::ALL.to_vec()
    } else {
        cfg.models.clone()
    };
    let setup = cfg.setup()?;
    let p = setup.params;
    let (_, phi) = cfg.spin.angles()?;
    let recs = sum.time("sweep", |_| {
        run_sweep(&models, &thetas, phi, &setup, cfg.flight_time)
    })?;
    let v_kick = p.mu() * p.eta * p.dt_field / p.mass;
    for &m in &models {
        let own: Vec<DetectorRecord> = recs.iter().filter(|r| r.model == m).cloned().collect();
        let classical = matches!(m, ModelKind::RigidSphere | ModelKind::PointParticle);
        if let Some(defect) = mirror_defect(&own, v_kick) {
            let tol = if classical { 2e-3 } else { 1e-3 };
            sum.comparisons.push(Comparison::new(
                format!("{}.mirror_symmetry", m.name()),
                "theta -> pi - theta swaps outcomes",
                defect,
                0.0,
                tol,
            ));
        }
        if classical {
            let mono = classical_monotone(&own, m);
            sum.comparisons.push(Comparison::new(
                format!("{}.monotone_in_cos_theta", m.name()),
                "classical deflection grows with cos(theta)",
                f64::from(u8::from(mono)),
                1.0,
                0.0,
            ));
        }
    }
    let cls = classify_sweep(&recs, v_kick);
    sum.table = Some(emit_table(&cls));
    sum.records = recs;
    sum.classifications = cls;
    if let Some(dir) = out_dir {
        sum.write(dir)?;
    }
    Ok(sum)
}

/// Standard sweep of all four models, checked against the reference verdicts.
pub fn table1(cfg: &ScenarioConfig) -> Result<RunSummary> {
    let mut all = cfg.clone();
    all.models = ModelKind::ALL.to_vec();
    all.sweep = Some(SweepConfig {
        thetas: standard_thetas(),
    });
    let mut sum = sweep(&all)?;
    sum.command = "table1".into();
    for c in sum.classifications.clone() {
        let (u, d) = expected_verdict(c.model);
        let name = c.model.name();
        for (what, got, want) in [("unique", c.unique, u), ("discrete", c.discrete, d)] {
            sum.comparisons.push(Comparison::new(
                format!("{name}.{what}"),
                "reference uniqueness/discreteness verdict",
                f64::from(u8::from(got)),
                f64::from(u8::from(want)),
                0.0,
            ));
        }
    }
    if let Some(dir) = cfg.prepare_output()? {
        sum.write(dir)?;
    }
    Ok(sum)
}

/// Samples B and A of the magnet on the configured grid and checks
/// curl A = B and div B = 0 with centred differences.
pub fn dump_field(cfg: &ScenarioConfig) -> Result<RunSummary> {
    let out_dir = cfg.prepare_output()?;
    let mut sum = RunSummary::new("dump-field");
    let p = cfg.physical()?;
    let g = cfg.grid()?;
    let f = sg_field(&p);
    let b = sample_field(|x| f.b_at(x), g);
    let a = sample_field(|x| f.a_at(x), g);
    let curl = grid_curl(&a)?;
    let div = grid_divergence(&b)?;
    let curl_err = (0..g.len())
        .filter(|&i| g.is_interior(i))
        .map(|i| (curl.values[i] - b.values[i]).norm())
        .fold(0.0, f64::max);
    let scale = b.max_norm();
    sum.results.insert("max_b".into(), scale);
    sum.comparisons.push(Comparison::new(
        "curl_a_minus_b",
        "B = curl A",
        curl_err,
        0.0,
        1e-9 * scale,
    ));
    sum.comparisons.push(Comparison::new(
        "div_b",
        "div B = 0",
        div.max_abs_interior(),
        0.0,
        1e-9 * scale,
    ));
    if let Some(dir) = out_dir {
        GridDump::from_vector(&b)
            .write_to(BufWriter::new(File::create(dir.join("field_b.sgg"))?))?;
        GridDump::from_vector(&a)
            .write_to(BufWriter::new(File::create(dir.join("field_a.sgg"))?))?;
        let bz = b.component(2);
        write_pgm(
            &slice(&bz, SlicePlane::Xz(g.dims[1] / 2)),
            BufWriter::new(File::create(dir.join("field_bz_xz.pgm"))?),
        )?;
        sum.write(dir)?;
    }
    Ok(sum)
}

/// Process exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &SimError) -> i32 {
    match e {
        SimError::Config(_) | SimError::InvalidParams(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn unknown_keys_rejected_with_position() {
        let e = ScenarioConfig::load("[params]\nkik = 2.0\n", env(&[]), &[]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("kik") && msg.contains("line 2"), "{msg}");
        assert_eq!(exit_code(&e), 2);
        let e = ScenarioConfig::load("", env(&[("SGSIM_BOGUS", "1")]), &[]).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn layering_order() {
        let text = "[params]\nkick = 2.0\n";
        let cfg = ScenarioConfig::load(
            text,
            env(&[("SGSIM_PARAMS__KICK", "3.0"), ("SGSIM_CONFIG", "x.toml")]),
            &[],
        )
        .unwrap();
        assert_eq!(cfg.params.kick, Some(3.0));
        let cli = vec![("params.kick".to_string(), toml::Value::Float(5.0))];
        let cfg = ScenarioConfig::load(text, env(&[("SGSIM_PARAMS__KICK", "3.0")]), &cli).unwrap();
        assert!((cfg.physical().unwrap().kick_over_hbar_d() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn string_overrides() {
        let mut t = toml::Table::new();
        set_override(&mut t, "models", "[\"pauli_qm\"]").unwrap();
        set_override(&mut t, "spin.axis", "x").unwrap();
        let cfg = ScenarioConfig::from_table(t).unwrap();
        assert_eq!(cfg.models, vec![ModelKind::PauliQm]);
        let (th, ph) = cfg.spin.angles().unwrap();
        assert!((th - std::f64::consts::FRAC_PI_2).abs() < 1e-15 && ph == 0.0);
    }

    #[test]
    fn default_params_match_library_defaults() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.physical().unwrap(), PhysParams::default_atomic());
        assert!(cfg.consistency_c_fix);
    }

    #[test]
    fn conflicting_keys() {
        assert!(ScenarioConfig::load("[params]\nkick = 1.0\neta = 3.0\n", env(&[]), &[]).is_err());
        assert!(
            ScenarioConfig::load("[spin]\ntheta = 1.0\naxis = \"z\"\n", env(&[]), &[]).is_err()
        );
        let e = ScenarioConfig::load(
            "[params]\nunit_system = \"gaussian-cgs-raw\"\n",
            env(&[]),
            &[],
        )
        .unwrap_err();
        assert!(e.to_string().contains("hbar"));
    }

    #[test]
    fn empty_sweep_is_empty_success() {
        let cfg = ScenarioConfig::load("[sweep]\nthetas = []\n", env(&[]), &[]).unwrap();
        let s = sweep(&cfg).unwrap();
        assert!(s.records.is_empty() && s.comparisons.is_empty() && s.all_pass());
    }

    #[test]
    fn rigid_sphere_force_check() {
        let cfg = ScenarioConfig::load(
            "models = [\"rigid_sphere\"]\ncheck_force = true\n[spin]\naxis = \"z\"\n",
            env(&[]),
            &[],
        )
        .unwrap();
        let s = simulate(&cfg).unwrap();
        let c = s
            .comparisons
            .iter()
            .find(|c| c.name == "rigid_sphere.force_z")
            .unwrap();
        assert!(c.pass, "{}", c.line());
        assert_eq!(s.records[0].arrivals.len(), 1);
    }

    #[test]
    fn field_dump_consistency() {
        let cfg = ScenarioConfig::load(
            "[grid]\ndims = [8, 8, 8]\nhalfwidth = [2.0, 2.0, 2.0]\n",
            env(&[]),
            &[],
        )
        .unwrap();
        let s = dump_field(&cfg).unwrap();
        assert_eq!(s.comparisons.len(), 2);
        assert!(s.all_pass(), "{:?}", s.comparisons);
    }
}
