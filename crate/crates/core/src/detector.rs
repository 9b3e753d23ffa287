//! Detector-plane arrivals and the uniqueness/discreteness verdicts.
//!
//! Classical models leave the magnet with a definite velocity and arrive at
//! z = v_z T. Field models (Pauli packet, Dirac charge) are followed until
//! their lumps separate at `t_sep`; each lump then flies ballistically from
//! the origin to z = centroid · T / t_sep carrying its share of the norm or
//! charge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dirac::{charge_density, evolve_nr, lift_to_dirac};
use crate::error::{Result, SimError};
use crate::field::{sg_field, EmField, FieldFree};
use crate::grid::{Grid3, ScalarGridField};
use crate::lumps::{split_lumps, LumpSplit};
use crate::num::Real;
use crate::params::PhysParams;
use crate::pauli::{
    density, free_evolve_spectral, make_gaussian, sg_phase_kick, spin_from_polar,
    GaussianPacketSpec, DEFAULT_MARGIN_TOL,
};
use crate::point::{integrate_point, PointModel, PointState};
use crate::sphere::{integrate_rigid, precession_step_limit, SphereModel, SphereState};
use crate::vec3::Vec3;

/// Arrivals below this weight are ignored when counting clusters.
pub const MIN_ARRIVAL_WEIGHT: f64 = 1e-6;

/// Tolerance of the two-point test, as a fraction of v_kick·T.
pub const DISCRETE_TOL: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RigidSphere,
    PointParticle,
    PauliQm,
    DiracField,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        Self::RigidSphere,
        Self::PointParticle,
        Self::PauliQm,
        Self::DiracField,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RigidSphere => "rigid_sphere",
            Self::PointParticle => "point_particle",
            Self::PauliQm => "pauli_qm",
            Self::DiracField => "dirac_field",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::RigidSphere => "Classical rigid body",
            Self::PointParticle => "Classical point particle",
            Self::PauliQm => "Non-relativistic quantum particle",
            Self::DiracField => "Classical Dirac field",
        }
    }

    fn is_quantum(self) -> bool {
        self == Self::PauliQm
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Arrival {
    pub z: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectorRecord {
    pub model: ModelKind,
    pub arrivals: Vec<Arrival>,
    pub flight_time: f64,
    /// (θ, φ_s) of the prepared spin.
    pub spin_prep: (f64, f64),
}

/// What a model hands to the detector.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelOutput {
    /// Velocity along z after leaving the magnet.
    Classical { velocity_z: f64 },
    /// z-marginal of |density| at `time`, for a state that started at the origin.
    Field {
        z: Vec<f64>,
        weights: Vec<f64>,
        time: f64,
    },
}

impl ModelOutput {
    pub fn from_density<T: Real>(rho: &ScalarGridField<T>, time: T) -> Self {
        let abs = ScalarGridField {
            grid: rho.grid,
            values: rho.values.iter().map(|v| v.abs()).collect(),
        };
        Self::Field {
            z: rho
                .grid
                .axis_coords(2)
                .iter()
                .map(|v| v.to_f64_lossy())
                .collect(),
            weights: abs.z_marginal().iter().map(|v| v.to_f64_lossy()).collect(),
            time: time.to_f64_lossy(),
        }
    }
}

pub fn to_detector(
    model: ModelKind,
    spin_prep: (f64, f64),
    out: &ModelOutput,
    flight_time: f64,
) -> Result<DetectorRecord> {
    if !(flight_time > 0.0) {
        return Err(SimError::InvalidParams(
            "flight time must be positive".into(),
        ));
    }
    let arrivals = match out {
        ModelOutput::Classical { velocity_z } => vec![Arrival {
            z: velocity_z * flight_time,
            weight: 1.0,
        }],
        ModelOutput::Field { z, weights, time } => {
            if !(*time > 0.0) {
                return Err(SimError::InvalidParams(
                    "lumps need a positive separation time".into(),
                ));
            }
            let LumpSplit { lumps, .. } = split_lumps(z, weights)?;
            lumps
                .iter()
                .map(|l| Arrival {
                    z: l.centroid * flight_time / time,
                    weight: l.fraction,
                })
                .collect()
        }
    };
    Ok(DetectorRecord {
        model,
        arrivals,
        flight_time,
        spin_prep,
    })
}

/// Detector time: at least 10 md²/ħ, and late enough that two lumps moving
/// apart at ±v_kick are 8 evolved widths apart.
pub fn default_flight_time<T: Real>(p: &PhysParams<T>) -> Result<f64> {
    let v = (p.mu() * p.eta * p.dt_field / p.mass).to_f64_lossy();
    let d = p.d.to_f64_lossy();
    let a = (p.hbar / (p.mass * p.d * p.d)).to_f64_lossy();
    let floor = 10.0 / a;
    // 2vT >= 8σ(T) with σ² = d²(1 + a²T²)/2
    let den = 4.0 * v * v - 32.0 * d * d * a * a;
    if !(den > 0.0) {
        return Err(SimError::InvalidParams(format!(
            "kick speed {v:.4e} too small for the lumps ever to separate by 8 widths"
        )));
    }
    Ok(floor.max((32.0 * d * d / den).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeClassification {
    pub model: ModelKind,
    pub unique: bool,
    pub discrete: bool,
    pub cluster_centers: Vec<f64>,
    /// Set for quantum models: a single outcome needs a resolution of the
    /// measurement problem, which is not simulated.
    pub uniqueness_requires_interpretation: bool,
}

/// One verdict per model present in `records`, in [`ModelKind`] order.
pub fn classify_sweep(records: &[DetectorRecord], v_kick: f64) -> Vec<OutcomeClassification> {
    let mut by_model: BTreeMap<ModelKind, Vec<&DetectorRecord>> = BTreeMap::new();
    for r in records {
        by_model.entry(r.model).or_default().push(r);
    }
    by_model
        .into_iter()
        .map(|(model, recs)| {
            let live = |r: &&DetectorRecord| {
                r.arrivals
                    .iter()
                    .filter(|a| a.weight > MIN_ARRIVAL_WEIGHT)
                    .count()
            };
            let unique = recs.iter().all(|r| live(r) == 1);
            let mut discrete = true;
            let mut zs = Vec::new();
            for r in &recs {
                let target = v_kick * r.flight_time;
                let tol = DISCRETE_TOL * target.abs();
                for a in r.arrivals.iter().filter(|a| a.weight > MIN_ARRIVAL_WEIGHT) {
                    discrete &= (a.z.abs() - target.abs()).abs() <= tol;
                    zs.push((a.z, tol));
                }
            }
            OutcomeClassification {
                model,
                unique,
                discrete,
                cluster_centers: merge_centers(zs),
                uniqueness_requires_interpretation: model.is_quantum(),
            }
        })
        .collect()
}

/// Greedy merge of sorted positions closer than their tolerance.
fn merge_centers(mut zs: Vec<(f64, f64)>) -> Vec<f64> {
    zs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for (z, tol) in zs {
        match groups.last_mut() {
            Some((sum, n, last)) if (z - *last).abs() <= tol.max(1e-12) => {
                *sum += z;
                *n += 1;
                *last = z;
            }
            _ => groups.push((z, 1, z)),
        }
    }
    groups.into_iter().map(|(s, n, _)| s / n as f64).collect()
}

fn mark(b: bool) -> &'static str {
    if b {
        "✓"
    } else {
        "✗"
    }
}

/// Plain-text uniqueness/discreteness table, one column per model.
pub fn emit_table(cls: &[OutcomeClassification]) -> String {
    if cls.is_empty() {
        return String::new();
    }
    let head = "";
    let rows = ["Uniqueness", "Discreteness"];
    let label_w = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = cls
        .iter()
        .map(|c| c.model.title().chars().count())
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{head:label_w$}");
    for (c, w) in cls.iter().zip(&widths) {
        let _ = write!(out, "  {:w$}", c.model.title());
    }
    out.push('\n');
    let mut caveat = false;
    for (ri, r) in rows.iter().enumerate() {
        let _ = write!(out, "{r:label_w$}");
        for (c, w) in cls.iter().zip(&widths) {
            let cell = if ri == 0 {
                let star = if c.uniqueness_requires_interpretation {
                    "*"
                } else {
                    ""
                };
                caveat |= c.uniqueness_requires_interpretation;
                format!("{}{star}", mark(c.unique))
            } else {
                mark(c.discrete).to_string()
            };
            let _ = write!(out, "  {cell:w$}");
        }
        out.push('\n');
    }
    let mut out: String = out.lines().map(|l| format!("{}\n", l.trim_end())).collect();
    if caveat {
        out.push_str("* a single outcome follows only once the measurement problem is solved; no interpretation is simulated\n");
    }
    out.push_str("not simulated: relativistic quantum particle, relativistic quantum field\n");
    out
}

/// Writes `model,theta,arrival_z,weight` rows.
pub fn write_arrivals_csv(records: &[DetectorRecord], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "model,theta,arrival_z,weight")?;
    for r in records {
        for a in &r.arrivals {
            writeln!(
                w,
                "{},{},{},{}",
                r.model.name(),
                r.spin_prep.0,
                a.z,
                a.weight
            )?;
        }
    }
    w.flush()
}

/// Largest violation of θ → π − θ symmetry: for classical models
/// |z(θ) + z(π−θ)| / (v_kick T), for field models the mismatch of swapped
/// lump weights. `None` when no mirrored pair is present.
pub fn mirror_defect(records: &[DetectorRecord], v_kick: f64) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for a in records {
        for b in records {
            if a.model != b.model
                || (a.spin_prep.0 + b.spin_prep.0 - std::f64::consts::PI).abs() > 1e-9
            {
                continue;
            }
            let defect =
                if a.arrivals.len() == 1 && b.arrivals.len() == 1 && a.arrivals[0].weight == 1.0 {
                    (a.arrivals[0].z + b.arrivals[0].z).abs() / (v_kick * a.flight_time)
                } else {
                    let (ua, da) = up_down(a);
                    let (ub, db) = up_down(b);
                    (ua - db).abs().max((da - ub).abs())
                };
            worst = Some(worst.map_or(defect, |w| w.max(defect)));
        }
    }
    worst
}

fn up_down(r: &DetectorRecord) -> (f64, f64) {
    let up = r
        .arrivals
        .iter()
        .filter(|a| a.z > 0.0)
        .map(|a| a.weight)
        .sum();
    let down = r
        .arrivals
        .iter()
        .filter(|a| a.z <= 0.0)
        .map(|a| a.weight)
        .sum();
    (up, down)
}

/// True when every single-arrival record of `model` lands no lower as cos θ grows.
pub fn classical_monotone(records: &[DetectorRecord], model: ModelKind) -> bool {
    let mut pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.model == model && r.arrivals.len() == 1)
        .map(|r| (r.spin_prep.0.cos(), r.arrivals[0].z / r.flight_time))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2)
        .all(|w| w[1].1 >= w[0].1 - 1e-12 * w[1].1.abs().max(1.0))
}

/// Everything needed to push one spin preparation through a model.
#[derive(Clone, Debug)]
pub struct SweepSetup<T> {
    pub params: PhysParams<T>,
    /// Grid for the field models.
    pub grid: Grid3<T>,
    /// Time after the magnet at which lumps are split.
    pub t_sep: T,
    pub include_sigma_x: bool,
    pub consistency_c_fix: bool,
    pub margin_tol: f64,
}

impl<T: Real> SweepSetup<T> {
    /// Default experiment on a 64×64×64 grid of halfwidths (8d, 8d, 12d), split at t = md²/ħ.
    pub fn standard(params: PhysParams<T>) -> Result<Self> {
        let d = params.d;
        Ok(Self {
            grid: Grid3::new(
                [64, 64, 64],
                [T::lit(8.0) * d, T::lit(8.0) * d, T::lit(12.0) * d],
            )?,
            t_sep: params.spreading_time(),
            params,
            include_sigma_x: false,
            consistency_c_fix: true,
            margin_tol: DEFAULT_MARGIN_TOL,
        })
    }
}

fn spin_axis<T: Real>(theta: T, phi_s: T) -> Vec3<T> {
    Vec3::new(
        theta.sin() * phi_s.cos(),
        theta.sin() * phi_s.sin(),
        theta.cos(),
    )
}

/// Integration step for the classical models: half the precession limit at the origin.
fn classical_step<T: Real>(p: &PhysParams<T>) -> T {
    let b = sg_field(p).b_at(Vec3::zero());
    precession_step_limit(p.mu(), p.hbar, b)
        .map_or(p.dt_field / T::lit(1000.0), |m| m * T::lit(0.5))
}

/// Runs one model for one spin preparation up to the detector hand-off.
pub fn model_output<T: Real>(
    model: ModelKind,
    theta: T,
    phi_s: T,
    s: &SweepSetup<T>,
) -> Result<ModelOutput> {
    let p = &s.params;
    p.validate()?;
    let f = sg_field(p);
    match model {
        ModelKind::RigidSphere => {
            let s0 = SphereState::at_rest(p, spin_axis(theta, phi_s))?;
            let traj = integrate_rigid(
                &SphereModel::from_params(p),
                &s0,
                &f,
                p.dt_field,
                classical_step(p),
            )?;
            let end = traj.last().copied().unwrap_or(s0);
            Ok(ModelOutput::Classical {
                velocity_z: (end.momentum.z / p.mass).to_f64_lossy(),
            })
        }
        ModelKind::PointParticle => {
            let s0 = PointState::electron(p, spin_axis(theta, phi_s))?;
            let m = PointModel::from_params(p, s.consistency_c_fix);
            let traj = integrate_point(&m, &s0, &f, p.dt_field, classical_step(p))?;
            let end = traj.last().copied().unwrap_or(s0);
            Ok(ModelOutput::Classical {
                velocity_z: end.velocity.z.to_f64_lossy(),
            })
        }
        ModelKind::PauliQm | ModelKind::DiracField => {
            let spec = GaussianPacketSpec::new(p.d, spin_from_polar(theta, phi_s));
            let chi = sg_phase_kick(&make_gaussian(&spec, &s.grid)?, p, s.include_sigma_x);
            if model == ModelKind::PauliQm {
                let out = free_evolve_spectral(&chi, p, s.t_sep, 4, s.margin_tol)?;
                Ok(ModelOutput::from_density(&density(&out), s.t_sep))
            } else {
                let psi = lift_to_dirac(&chi, &FieldFree, p)?;
                let out = evolve_nr(&psi, s.t_sep, p, s.margin_tol)?;
                Ok(ModelOutput::from_density(&charge_density(&out, p), s.t_sep))
            }
        }
    }
}

/// Detector records for every (model, θ) pair, models outermost.
pub fn run_sweep<T: Real>(
    models: &[ModelKind],
    thetas: &[T],
    phi_s: T,
    s: &SweepSetup<T>,
    flight_time: Option<f64>,
) -> Result<Vec<DetectorRecord>> {
    let t_det = match flight_time {
        Some(t) => t,
        None => default_flight_time(&s.params)?,
    };
    let mut out = Vec::with_capacity(models.len() * thetas.len());
    for &m in models {
        for &th in thetas {
            let o = model_output(m, th, phi_s, s)?;
            out.push(to_detector(
                m,
                (th.to_f64_lossy(), phi_s.to_f64_lossy()),
                &o,
                t_det,
            )?);
        }
    }
    Ok(out)
}

/// θ values used for the standard sweep.
pub fn standard_thetas() -> Vec<f64> {
    use std::f64::consts::PI;
    vec![
        0.0,
        PI / 6.0,
        PI / 4.0,
        PI / 3.0,
        PI / 2.0,
        2.0 * PI / 3.0,
        PI,
    ]
}
