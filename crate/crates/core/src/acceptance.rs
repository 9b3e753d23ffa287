//! The acceptance suite: each criterion computes one headline number and
//! compares it with its tolerance. Some criteria carry extra conditions
//! (refinement trends, wall-clock limits) that are folded into `pass` and
//! spelled out in `detail`.

use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use crate::detector::{
    classify_sweep, emit_table, run_sweep, standard_thetas, ModelKind, SweepSetup,
};
use crate::dirac::{
    charge_density, dirac_force_density, evolve_nr, lift_to_dirac, lump_fractions,
    post_field_current_xup, prepared_spin_state, prepared_state, Prepared,
};
use crate::error::Result;
use crate::field::{sg_field, FieldFree};
use crate::grid::{grid_divergence, Grid3};
use crate::lumps::split_density;
use crate::ode::fit_precession_frequency;
use crate::params::PhysParams;
use crate::pauli::{
    free_evolve_analytic, free_evolve_spectral, l2_distance, larmor_envelope, make_gaussian,
    momentum_expectation, relative_l2, sg_phase_kick, spin_expectation, spin_from_polar,
    GaussianPacketSpec, DEFAULT_MARGIN_TOL,
};
use crate::point::{integrate_point, point_force, PointModel, PointState};
use crate::sphere::{
    angular_momentum_quadrature, integrate_rigid, magnetic_moment_quadrature, sphere_torque,
    sphere_total_force, SphereModel, SphereState,
};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Fast,
    Full,
}

impl Profile {
    pub fn criteria(self) -> &'static [u32] {
        match self {
            Profile::Fast => &[3, 5, 6, 8, 9, 11],
            Profile::Full => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13],
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AcceptanceOptions {
    /// Test hook: the named criterion is run with a zero tolerance.
    pub break_tolerance: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<34} value {:.3e} tol {:.1e} ({:.2}s) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.value,
            self.tolerance,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub profile: Profile,
    pub results: Vec<CriterionResult>,
    /// Rendered uniqueness/discreteness table, when criterion 12 ran.
    pub table1: Option<String>,
}

impl AcceptanceReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn failing(&self) -> Vec<&CriterionResult> {
        self.results.iter().filter(|r| !r.pass).collect()
    }
}

/// Reference verdicts (unique, discrete) for the four simulated models.
pub fn expected_verdict(m: ModelKind) -> (bool, bool) {
    match m {
        ModelKind::RigidSphere | ModelKind::PointParticle => (true, false),
        ModelKind::PauliQm | ModelKind::DiracField => (false, true),
    }
}

pub const CRITERION_NAMES: [&str; 13] = [
    "bohr magneton quadrature",
    "sphere angular momentum",
    "three-model force agreement",
    "torque and larmor frequency",
    "pauli kick momentum",
    "dropped sigma_x validation",
    "spectral vs analytic evolution",
    "packet splitting",
    "pauli reduction of lifted state",
    "divergence-free post-field current",
    "lump fractions sweep",
    "table 1 reproduction",
    "larmor decoherence envelope",
];

struct Outcome {
    value: f64,
    tolerance: f64,
    extra_ok: bool,
    detail: String,
    table: Option<String>,
}

impl Outcome {
    fn new(value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            value,
            tolerance,
            extra_ok: true,
            detail,
            table: None,
        }
    }

    fn with(mut self, ok: bool) -> Self {
        self.extra_ok &= ok;
        self
    }
}

fn params(kick: f64) -> PhysParams<f64> {
    let mut p = PhysParams::default_atomic();
    p.set_kick(kick);
    p.b0 = 200.0 * p.eta * p.d;
    p
}

fn rel(a: Vec3<f64>, b: Vec3<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Runs one criterion by number.
pub fn run_criterion(id: u32, opts: &AcceptanceOptions) -> Result<CriterionResult> {
    evaluate(id, opts).map(|(r, _)| r)
}

fn evaluate(id: u32, opts: &AcceptanceOptions) -> Result<(CriterionResult, Option<String>)> {
    let start = Instant::now();
    let out = match id {
        1 | 2 => c_sphere_integrals(id)?,
        3 => c_force_agreement()?,
        4 => c_torque_larmor()?,
        5 => c_kick_momentum()?,
        6 => c_dropped_sigma_x()?,
        7 => c_free_evolution()?,
        8 => c_splitting()?,
        9 => c_pauli_reduction()?,
        10 => c_divergence()?,
        11 => c_lump_fractions()?,
        12 => c_table1()?,
        13 => c_larmor_envelope()?,
        _ => {
            return Err(crate::SimError::Config(format!(
                "no acceptance criterion {id}"
            )))
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let limit = match id {
        1 | 2 => Some(5.0),
        3 => Some(30.0),
        4 => Some(20.0),
        7 => Some(60.0),
        _ => None,
    };
    let in_time = limit.is_none_or(|l| seconds < l);
    let tolerance = if opts.break_tolerance == Some(id) {
        0.0
    } else {
        out.tolerance
    };
    let mut detail = out.detail;
    if !in_time {
        detail.push_str(&format!(" over the {}s limit", limit.unwrap_or_default()));
    }
    let r = CriterionResult {
        id,
        name: CRITERION_NAMES[(id - 1) as usize],
        value: out.value,
        tolerance,
        pass: out.value < tolerance && out.extra_ok && in_time,
        seconds,
        detail,
    };
    Ok((r, out.table))
}

/// Runs every criterion of the profile. Criteria that error are reported as
/// failures with the error text.
pub fn run_acceptance(profile: Profile, opts: &AcceptanceOptions) -> AcceptanceReport {
    let mut table1 = None;
    let results = profile
        .criteria()
        .iter()
        .map(|&id| {
            let start = Instant::now();
            match evaluate(id, opts) {
                Ok((r, table)) => {
                    table1 = table1.take().or(table);
                    r
                }
                Err(e) => CriterionResult {
                    id,
                    name: CRITERION_NAMES[(id - 1) as usize],
                    value: f64::NAN,
                    tolerance: 0.0,
                    pass: false,
                    seconds: start.elapsed().as_secs_f64(),
                    detail: format!("error: {e}"),
                },
            }
        })
        .collect();
    AcceptanceReport {
        profile,
        results,
        table1,
    }
}

/// Moment (1) or angular momentum (2) of the z-up sphere on 64³ and 128³,
/// halfwidth 1.5R. The headline value is the 64³ relative error; the 128³
/// error must be at most half of it.
fn c_sphere_integrals(id: u32) -> Result<Outcome> {
    let p = PhysParams::<f64>::default_atomic();
    let m = SphereModel::from_params(&p);
    let s = SphereState::at_rest(&p, Vec3::unit_z())?;
    let errs = [64, 128]
        .iter()
        .map(|&n| {
            let g = Grid3::cube(n, 1.5 * p.radius)?;
            Ok(if id == 1 {
                rel(
                    magnetic_moment_quadrature(&m, &s, &g)?,
                    Vec3::unit_z() * -p.mu(),
                )
            } else {
                rel(
                    angular_momentum_quadrature(&m, &s, &g)?,
                    Vec3::unit_z() * (p.hbar / 2.0),
                )
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Outcome::new(
        errs[0],
        0.02,
        format!("64^3 {:.2e}, 128^3 {:.2e}", errs[0], errs[1]),
    )
    .with(errs[1] <= 0.5 * errs[0]))
}

fn c_force_agreement() -> Result<Outcome> {
    let p = params(4.0);
    let f = sg_field(&p);
    let target = Vec3::new(0.0, 0.0, p.mu() * p.eta);
    let sphere = {
        let s = SphereState::at_rest(&p, Vec3::unit_z())?;
        sphere_total_force(
            &SphereModel::from_params(&p),
            &s,
            &f,
            &Grid3::cube(128, 1.5 * p.radius)?,
        )?
    };
    let point = point_force(
        &PointModel::from_params(&p, true),
        &PointState::electron(&p, Vec3::unit_z())?,
        &f,
    );
    let g = Grid3::cube(64, 6.0 * p.d)?;
    let dirac = dirac_force_density(&prepared_state(Prepared::ZUpPre, &p, &g)?, &f, &p).integrate();
    let (es, ep, ed) = (rel(sphere, target), rel(point, target), rel(dirac, target));
    Ok(Outcome::new(
        es.max(ep),
        1e-3,
        format!("sphere {es:.2e}, point {ep:.2e}, dirac {ed:.2e} (tol 1e-4)"),
    )
    .with(ed < 1e-4))
}

fn c_torque_larmor() -> Result<Outcome> {
    let p = params(4.0);
    let f = sg_field(&p);
    let model = SphereModel::from_params(&p);
    let s = SphereState::at_rest(&p, Vec3::unit_x())?;
    let torque = sphere_torque(&model, &s, &f, &Grid3::cube(128, 1.5 * p.radius)?)?;
    let et = rel(torque, Vec3::new(0.0, p.mu() * p.b0, 0.0));
    let omega = 2.0 * p.mu() * p.b0 / p.hbar;
    let period = 2.0 * PI / omega;
    let dt = period / 200.0;
    let rig = integrate_rigid(&model, &s, &f, 3.0 * period, dt)?;
    let axes: Vec<_> = rig.states.iter().map(|s| s.spin_axis).collect();
    let wr = fit_precession_frequency(&rig.times, &axes);
    let pt = integrate_point(
        &PointModel::from_params(&p, true),
        &PointState::electron(&p, Vec3::unit_x())?,
        &f,
        3.0 * period,
        dt,
    )?;
    let axes: Vec<_> = pt.states.iter().map(|s| -s.m_vec).collect();
    let wp = fit_precession_frequency(&pt.times, &axes);
    let (er, ep) = ((wr - omega).abs() / omega, (wp - omega).abs() / omega);
    Ok(Outcome::new(
        er.max(ep),
        1e-3,
        format!("torque {et:.2e} (tol 1e-2), rigid omega {er:.2e}, point omega {ep:.2e}"),
    )
    .with(et < 1e-2))
}

fn c_kick_momentum() -> Result<Outcome> {
    let p = params(4.0);
    let g = Grid3::cube(64, 6.0 * p.d)?;
    let chi = sg_phase_kick(
        &make_gaussian(&GaussianPacketSpec::z_up(p.d), &g)?,
        &p,
        false,
    );
    let rep = momentum_expectation(&chi, p.hbar);
    let target = Vec3::new(0.0, 0.0, p.mu() * p.eta * p.dt_field);
    let e = rel(rep.value, target);
    Ok(Outcome::new(
        e,
        1e-6,
        format!(
            "<p>_z = {:.10}, imaginary residual {:.1e}",
            rep.value.z, rep.imag_residual
        ),
    ))
}

/// Full-matrix vs phase-only kick of the x-up packet at B₀ = 200ηd.
fn c_dropped_sigma_x() -> Result<Outcome> {
    let p = params(4.0);
    let g = Grid3::cube(64, 6.0 * p.d)?;
    let chi = make_gaussian(&GaussianPacketSpec::x_up(p.d), &g)?;
    let diff = l2_distance(
        &sg_phase_kick(&chi, &p, true),
        &sg_phase_kick(&chi, &p, false),
    )?;
    Ok(Outcome::new(
        diff,
        1e-3,
        format!(
            "B0/(eta d) = {:.0}, transverse-field bound eta d/(2 B0) = {:.1e}",
            p.b0 / (p.eta * p.d),
            p.eta * p.d / (2.0 * p.b0)
        ),
    ))
}

fn c_free_evolution() -> Result<Outcome> {
    let p = params(0.5);
    let g = Grid3::cube(64, 8.0 * p.d)?;
    let spec = GaussianPacketSpec::x_up(p.d).kicked(&p);
    let chi = sg_phase_kick(
        &make_gaussian(&GaussianPacketSpec::x_up(p.d), &g)?,
        &p,
        false,
    );
    let t = p.spreading_time();
    let num = free_evolve_spectral(&chi, &p, t, 1, DEFAULT_MARGIN_TOL)?;
    let exact = free_evolve_analytic(&spec, &p, t, &g)?;
    let err = relative_l2(&num, &exact)?;
    let drift = (num.norm_sq() - chi.norm_sq()).abs();
    Ok(Outcome::new(err, 1e-6, format!("norm drift {drift:.1e} (tol 1e-10)")).with(drift < 1e-10))
}

fn split_grid(p: &PhysParams<f64>) -> Result<Grid3<f64>> {
    Grid3::new([64, 64, 64], [8.0 * p.d, 8.0 * p.d, 12.0 * p.d])
}

fn c_splitting() -> Result<Outcome> {
    let p = params(4.0);
    let g = split_grid(&p)?;
    let chi = sg_phase_kick(
        &make_gaussian(&GaussianPacketSpec::x_up(p.d), &g)?,
        &p,
        false,
    );
    let t = p.spreading_time();
    let rho = crate::pauli::density(&free_evolve_spectral(&chi, &p, t, 4, DEFAULT_MARGIN_TOL)?);
    let split = split_density(&rho)?;
    let z = p.mu() * p.eta * p.dt_field / p.mass * t;
    if split.lumps.len() != 2 {
        return Ok(Outcome::new(
            f64::INFINITY,
            1e-2,
            format!("{} lump(s) found", split.lumps.len()),
        ));
    }
    let (lo, hi) = (split.lumps[0], split.lumps[1]);
    let ec = ((hi.centroid - z).abs() / z).max((lo.centroid + z).abs() / z);
    let ew = (hi.fraction - 0.5).abs().max((lo.fraction - 0.5).abs());
    Ok(Outcome::new(
        ec,
        1e-2,
        format!(
            "centroids {:.4}/{:.4} vs ±{z}, weight error {ew:.1e} (tol 1e-3)",
            lo.centroid, hi.centroid
        ),
    )
    .with(ew < 1e-3))
}

fn c_pauli_reduction() -> Result<Outcome> {
    let p = params(4.0);
    let g = Grid3::cube(64, 8.0 * p.d)?;
    let pre = prepared_state(Prepared::ZUpPre, &p, &g)?;
    let lifted = lift_to_dirac(&sg_phase_kick(&pre.upper(), &p, false), &FieldFree, &p)?;
    let post = prepared_state(Prepared::ZUpPost, &p, &g)?;
    let e = lifted.max_rel_diff(&post)?;
    Ok(Outcome::new(
        e,
        1e-10,
        "max node difference over max |psi|".into(),
    ))
}

/// Kick μηΔt = ħ/(2d) and a box of halfwidth 2.5d keep the phase resolved on
/// 32³ while the Gaussian still dominates the interior.
fn c_divergence() -> Result<Outcome> {
    let p = params(0.5);
    let mut errs = Vec::new();
    let mut scaled = 0.0;
    for n in [32, 64, 128] {
        let g = Grid3::cube(n, 2.5 * p.d)?;
        let j = post_field_current_xup(&p, &g);
        let div = grid_divergence(&j)?.max_abs_interior();
        scaled = div / (j.max_norm() / p.d);
        errs.push(div);
    }
    let (r1, r2) = (errs[0] / errs[1], errs[1] / errs[2]);
    Ok(Outcome::new(
        scaled,
        1e-3,
        format!("refinement ratios {r1:.2}, {r2:.2} (need > 3.5)"),
    )
    .with(r1 > 3.5 && r2 > 3.5))
}

fn c_lump_fractions() -> Result<Outcome> {
    let p = params(4.0);
    let g = split_grid(&p)?;
    let t = p.spreading_time();
    let mut worst: f64 = 0.0;
    for th in standard_thetas() {
        let psi = prepared_spin_state(spin_from_polar(th, 0.0), true, &p, &g)?;
        let rho = charge_density(&evolve_nr(&psi, t, &p, DEFAULT_MARGIN_TOL)?, &p);
        let (up, down) = split_density(&rho)?.fractions_about(0.0);
        let (eu, ed) = lump_fractions(th, 0.0);
        worst = worst.max((up - eu).abs()).max((down - ed).abs());
    }
    Ok(Outcome::new(
        worst,
        1e-3,
        format!("{} angles", standard_thetas().len()),
    ))
}

fn c_table1() -> Result<Outcome> {
    let p = params(4.0);
    let setup = SweepSetup::standard(p)?;
    let recs = run_sweep(&ModelKind::ALL, &standard_thetas(), 0.0, &setup, None)?;
    let cls = classify_sweep(&recs, p.mu() * p.eta * p.dt_field / p.mass);
    let mut wrong = 0usize;
    let mut notes = Vec::new();
    for m in ModelKind::ALL {
        match cls.iter().find(|c| c.model == m) {
            Some(c) => {
                let (u, d) = expected_verdict(m);
                let caveat_ok = c.uniqueness_requires_interpretation == (m == ModelKind::PauliQm);
                let bad = usize::from(c.unique != u)
                    + usize::from(c.discrete != d)
                    + usize::from(!caveat_ok);
                if bad > 0 {
                    notes.push(m.name());
                }
                wrong += bad;
            }
            None => {
                wrong += 3;
                notes.push(m.name());
            }
        }
    }
    let detail = if notes.is_empty() {
        "all verdicts match".into()
    } else {
        format!("mismatch: {}", notes.join(", "))
    };
    let mut out = Outcome::new(wrong as f64, 0.5, detail);
    out.table = Some(emit_table(&cls));
    Ok(out)
}

/// ⟨σx⟩ of the kicked x-up packet against the closed-form envelope for
/// Δt = 0.1, 0.2, …, 1.0 at fixed η and B₀.
fn c_larmor_envelope() -> Result<Outcome> {
    let base = params(4.0);
    let g = Grid3::cube(64, 6.0 * base.d)?;
    let chi = make_gaussian(&GaussianPacketSpec::x_up(base.d), &g)?;
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        let mut p = base;
        p.dt_field = 0.1 * i as f64;
        let sx = spin_expectation(&sg_phase_kick(&chi, &p, false)).x;
        worst = worst.max((sx - larmor_envelope(&p)).abs());
    }
    Ok(Outcome::new(worst, 1e-4, "10 field durations".into()))
}
