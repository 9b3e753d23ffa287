//! Electron as a rigid sphere of radius R with uniform charge −e and mass m.
//!
//! Charge and mass circulate about the spin axis n̂ with separately fixed
//! magnitudes, giving magnetic moment −μn̂ and angular momentum (ħ/2)n̂:
//!
//! J = (15μc / 4πR⁵) (r × n̂),   G = −(15ħ / 16πR⁵) (r × n̂),   r = x − center,
//!
//! both zero outside the ball. Quadratures use the midpoint rule on a
//! [`Grid3`] with a sharp inside/outside test, so the error is set by the
//! staircase boundary and falls roughly like h.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::field::EmField;
use crate::grid::{sum_kahan, Grid3};
use crate::num::Real;
use crate::ode::{pack3, rk4_step, step_plan, unpack3};
use crate::params::PhysParams;
use crate::vec3::Vec3;

/// Constants of the sphere model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereModel<T> {
    pub hbar: T,
    pub mass: T,
    pub charge_e: T,
    pub c: T,
}

impl<T: Real> SphereModel<T> {
    pub fn from_params(p: &PhysParams<T>) -> Self {
        Self {
            hbar: p.hbar,
            mass: p.mass,
            charge_e: p.charge_e,
            c: p.c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereState<T> {
    pub center: Vec3<T>,
    pub momentum: Vec3<T>,
    /// Unit vector along the angular momentum.
    pub spin_axis: Vec3<T>,
    pub mu: T,
    pub radius: T,
}

impl<T: Real> SphereState<T> {
    /// Sphere at rest at the origin with the given spin axis (normalised here).
    pub fn at_rest(p: &PhysParams<T>, spin_axis: Vec3<T>) -> Result<Self> {
        let n = spin_axis.norm();
        if !(n > T::zero()) {
            return Err(SimError::InvalidParams("spin axis must be non-zero".into()));
        }
        Ok(Self {
            center: Vec3::zero(),
            momentum: Vec3::zero(),
            spin_axis: spin_axis / n,
            mu: p.mu(),
            radius: p.radius,
        })
    }

    /// m = −μ n̂.
    pub fn magnetic_moment(&self) -> Vec3<T> {
        -self.spin_axis * self.mu
    }

    /// L = (ħ/2) n̂.
    pub fn angular_momentum(&self, model: &SphereModel<T>) -> Vec3<T> {
        self.spin_axis * (model.hbar * T::lit(0.5))
    }

    #[inline]
    fn relative(&self, x: Vec3<T>) -> Option<Vec3<T>> {
        let r = x - self.center;
        (r.norm_sq() <= self.radius * self.radius).then_some(r)
    }
}

pub fn sphere_current_density<T: Real>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    x: Vec3<T>,
) -> Vec3<T> {
    match s.relative(x) {
        Some(r) => {
            let k = T::lit(15.0) * s.mu * m.c / (T::lit(4.0) * T::PI() * s.radius.powi(5));
            r.cross(s.spin_axis) * k
        }
        None => Vec3::zero(),
    }
}

pub fn sphere_momentum_density<T: Real>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    x: Vec3<T>,
) -> Vec3<T> {
    match s.relative(x) {
        Some(r) => {
            let k = T::lit(15.0) * m.hbar / (T::lit(16.0) * T::PI() * s.radius.powi(5));
            -r.cross(s.spin_axis) * k
        }
        None => Vec3::zero(),
    }
}

/// Uniform charge density −e / (4πR³/3) inside the ball.
pub fn sphere_charge_density<T: Real>(m: &SphereModel<T>, s: &SphereState<T>, x: Vec3<T>) -> T {
    match s.relative(x) {
        Some(_) => -m.charge_e / (T::lit(4.0 / 3.0) * T::PI() * s.radius.powi(3)),
        None => T::zero(),
    }
}

/// Lorentz force density ρE + (1/c) J × B.
pub fn sphere_force_density<T: Real, F: EmField<T>>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    f: &F,
    x: Vec3<T>,
) -> Vec3<T> {
    if s.relative(x).is_none() {
        return Vec3::zero();
    }
    let j = sphere_current_density(m, s, x);
    f.e_at(x) * sphere_charge_density(m, s, x) + j.cross(f.b_at(x)) / m.c
}

fn require_contains<T: Real>(s: &SphereState<T>, g: &Grid3<T>) -> Result<()> {
    if g.contains_ball(s.center, s.radius) {
        Ok(())
    } else {
        Err(SimError::BoxTooSmall(format!(
            "sphere of radius {} at {:?} does not fit in halfwidth {:?}",
            s.radius, s.center, g.halfwidth
        )))
    }
}

/// Midpoint-rule integral of `f(r, x)` over the nodes inside the sphere,
/// with r the offset from the centre.
fn ball_quadrature<T: Real>(
    s: &SphereState<T>,
    g: &Grid3<T>,
    f: impl Fn(Vec3<T>, Vec3<T>) -> Vec3<T>,
) -> Result<Vec3<T>> {
    require_contains(s, g)?;
    let vals: Vec<Vec3<T>> = g
        .positions()
        .filter_map(|x| s.relative(x).map(|r| f(r, x)))
        .collect();
    let dv = g.cell_volume();
    Ok(Vec3::new(
        sum_kahan(vals.iter().map(|v| v.x)),
        sum_kahan(vals.iter().map(|v| v.y)),
        sum_kahan(vals.iter().map(|v| v.z)),
    ) * dv)
}

/// m = (1/2c) ∫ r × J dV.
pub fn magnetic_moment_quadrature<T: Real>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    g: &Grid3<T>,
) -> Result<Vec3<T>> {
    let v = ball_quadrature(s, g, |r, x| r.cross(sphere_current_density(m, s, x)))?;
    Ok(v / (T::lit(2.0) * m.c))
}

/// L = ∫ r × G dV.
pub fn angular_momentum_quadrature<T: Real>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    g: &Grid3<T>,
) -> Result<Vec3<T>> {
    ball_quadrature(s, g, |r, x| r.cross(sphere_momentum_density(m, s, x)))
}

/// ∫ J dV.
pub fn net_current_quadrature<T: Real>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    g: &Grid3<T>,
) -> Result<Vec3<T>> {
    ball_quadrature(s, g, |_, x| sphere_current_density(m, s, x))
}

pub fn sphere_total_force<T: Real, F: EmField<T>>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    f: &F,
    g: &Grid3<T>,
) -> Result<Vec3<T>> {
    ball_quadrature(s, g, |_, x| sphere_force_density(m, s, f, x))
}

/// Torque ∫ r × f dV about the sphere centre.
pub fn sphere_torque<T: Real, F: EmField<T>>(
    m: &SphereModel<T>,
    s: &SphereState<T>,
    f: &F,
    g: &Grid3<T>,
) -> Result<Vec3<T>> {
    ball_quadrature(s, g, |r, x| r.cross(sphere_force_density(m, s, f, x)))
}

/// U = −m·B.
pub fn potential_energy<T: Real, F: EmField<T>>(m_vec: Vec3<T>, f: &F, x: Vec3<T>) -> T {
    -m_vec.dot(f.b_at(x))
}

/// F = −∇U = ∇(m·B), from the field's analytic Jacobian.
pub fn potential_force<T: Real, F: EmField<T>>(m_vec: Vec3<T>, f: &F, x: Vec3<T>) -> Vec3<T> {
    f.grad_m_dot_b(m_vec, x)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RigidTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<SphereState<T>>,
}

impl<T: Real> RigidTrajectory<T> {
    pub fn last(&self) -> Option<&SphereState<T>> {
        self.states.last()
    }

    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut w = io::BufWriter::new(w);
        writeln!(w, "t,x,y,z,px,py,pz,nx,ny,nz")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let (c, p, n) = (s.center, s.momentum, s.spin_axis);
            writeln!(
                w,
                "{t},{},{},{},{},{},{},{},{},{}",
                c.x, c.y, c.z, p.x, p.y, p.z, n.x, n.y, n.z
            )?;
        }
        w.flush()
    }
}

/// Largest admissible step: 1/20 of the local Larmor period.
pub(crate) fn precession_step_limit<T: Real>(mu: T, hbar: T, b: Vec3<T>) -> Option<T> {
    let omega = T::lit(2.0) * mu * b.norm() / hbar;
    (omega > T::zero()).then(|| T::lit(0.05) * T::lit(2.0) * T::PI() / omega)
}

/// Fixed-step RK4 for the spinning sphere in a static field.
///
/// The spin axis obeys dn̂/dt = (2μ/ħ) B(center) × n̂ (torque m × B acting on
/// L = (ħ/2) n̂), and is renormalised after every step. The bulk momentum
/// changes by the net dipole force ∇(m·B) at the centre; for fields linear in
/// position this equals the force-density quadrature exactly. The centre moves
/// with p/m.
pub fn integrate_rigid<T: Real, F: EmField<T>>(
    model: &SphereModel<T>,
    s0: &SphereState<T>,
    f: &F,
    t_end: T,
    dt: T,
) -> Result<RigidTrajectory<T>> {
    if !(dt > T::zero()) {
        return Err(SimError::InvalidParams("time step must be positive".into()));
    }
    if let Some(max) = precession_step_limit(s0.mu, model.hbar, f.b_at(s0.center)) {
        if dt > max {
            return Err(SimError::StepTooLarge {
                dt: dt.to_f64_lossy(),
                max: max.to_f64_lossy(),
            });
        }
    }
    let (steps, h) = step_plan(t_end, dt);
    let gyro = T::lit(2.0) * s0.mu / model.hbar;
    let rhs = |_t: T, y: &[T; 9]| -> [T; 9] {
        let [x, p, n] = unpack3(y);
        let b = f.b_at(x);
        let force = f.grad_m_dot_b(-n * s0.mu, x);
        pack3([p / model.mass, force, b.cross(n) * gyro])
    };
    let mut traj = RigidTrajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    let mut y = pack3([s0.center, s0.momentum, s0.spin_axis]);
    traj.times.push(T::zero());
    traj.states.push(*s0);
    for i in 0..steps {
        let t = T::of_usize(i) * h;
        y = rk4_step(t, &y, h, rhs);
        let [x, p, n] = unpack3(&y);
        let n = n.normalized();
        y = pack3([x, p, n]);
        traj.times.push(t + h);
        traj.states.push(SphereState {
            center: x,
            momentum: p,
            spin_axis: n,
            ..*s0
        });
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubluminalReport {
    /// Equator speed 5ħ/(4mR) of the mass flow.
    pub equator_speed: f64,
    pub c: f64,
    /// R = 5ħ/(4mc) to within 1e-12 relative.
    pub at_boundary: bool,
    pub pass: bool,
}

pub fn validate_subluminal<T: Real>(p: &PhysParams<T>) -> SubluminalReport {
    let v = (T::lit(5.0) * p.hbar / (T::lit(4.0) * p.mass * p.radius)).to_f64_lossy();
    let c = p.c.to_f64_lossy();
    SubluminalReport {
        equator_speed: v,
        c,
        at_boundary: ((v - c) / c).abs() < 1e-12,
        pass: v < c * (1.0 - 1e-12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SternGerlachField;

    fn setup() -> (PhysParams<f64>, SphereModel<f64>) {
        let p = PhysParams::default_atomic();
        (p, SphereModel::from_params(&p))
    }

    #[test]
    fn current_on_axis_and_at_half_radius() {
        let (p, m) = setup();
        let s = SphereState::at_rest(&p, Vec3::unit_z()).unwrap();
        assert_eq!(
            sphere_current_density(&m, &s, Vec3::new(0.0, 0.0, 0.3)),
            Vec3::zero()
        );
        let r = p.radius;
        let j = sphere_current_density(&m, &s, Vec3::new(r / 2.0, 0.0, 0.0));
        let expect = -15.0 * s.mu * p.c / (8.0 * std::f64::consts::PI * r.powi(4));
        assert!((j - Vec3::new(0.0, expect, 0.0)).norm() < 1e-12 * expect.abs());
        assert_eq!(
            sphere_current_density(&m, &s, Vec3::new(1.01 * r, 0.0, 0.0)),
            Vec3::zero()
        );
    }

    #[test]
    fn no_net_current() {
        let (p, m) = setup();
        let g = Grid3::cube(32, 1.5 * p.radius).unwrap();
        for axis in [Vec3::unit_z(), Vec3::unit_x(), Vec3::new(1.0, 2.0, -0.5)] {
            let s = SphereState::at_rest(&p, axis).unwrap();
            let j = net_current_quadrature(&m, &s, &g).unwrap();
            let scale = 15.0 * s.mu * p.c / (4.0 * std::f64::consts::PI);
            assert!(j.norm() < 1e-12 * scale, "{j:?}");
        }
    }

    #[test]
    fn momentum_density_support_and_equator_speed() {
        let (p, m) = setup();
        let s = SphereState::at_rest(&p, Vec3::unit_z()).unwrap();
        assert_eq!(
            sphere_momentum_density(&m, &s, Vec3::new(0.0, 0.0, 2.0)),
            Vec3::zero()
        );
        let g = sphere_momentum_density(&m, &s, Vec3::new(p.radius, 0.0, 0.0));
        let rho_m = 3.0 * p.mass / (4.0 * std::f64::consts::PI * p.radius.powi(3));
        let v = g.norm() / rho_m;
        assert!((v - 5.0 * p.hbar / (4.0 * p.mass * p.radius)).abs() < 1e-12);
    }

    #[test]
    fn moment_rotates_with_axis() {
        let (p, m) = setup();
        let g = Grid3::cube(48, 1.5 * p.radius).unwrap();
        let mu = p.mu();
        for axis in [Vec3::unit_z(), Vec3::unit_x()] {
            let s = SphereState::at_rest(&p, axis).unwrap();
            let mm = magnetic_moment_quadrature(&m, &s, &g).unwrap();
            assert!((mm + axis * mu).norm() < 0.02 * mu, "{mm:?}");
        }
    }

    #[test]
    fn force_density_z_spin_up_pattern() {
        let (p, m) = setup();
        let f = SternGerlachField::new(p.b0, p.eta);
        let s = SphereState::at_rest(&p, Vec3::unit_z()).unwrap();
        let k = 15.0 * s.mu / (4.0 * std::f64::consts::PI * p.radius.powi(5));
        let x = Vec3::new(0.3, -0.2, 0.4);
        let fd = sphere_force_density(&m, &s, &f, x);
        let expect = Vec3::new(
            -p.b0 * x.x + p.eta * x.x * x.z,
            -p.b0 * x.y + p.eta * x.y * x.z,
            p.eta * x.x * x.x,
        ) * k;
        assert!((fd - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn force_density_x_spin_up_pattern() {
        let (p, m) = setup();
        let f = SternGerlachField::new(p.b0, p.eta);
        let s = SphereState::at_rest(&p, Vec3::unit_x()).unwrap();
        let k = 15.0 * s.mu / (4.0 * std::f64::consts::PI * p.radius.powi(5));
        let x = Vec3::new(0.1, 0.5, -0.3);
        let fd = sphere_force_density(&m, &s, &f, x);
        let expect = Vec3::new(
            p.b0 * x.z - p.eta * x.z * x.z,
            -p.eta * x.x * x.y,
            -p.eta * x.x * x.z,
        ) * k;
        assert!((fd - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn uniform_field_gives_no_force() {
        let (p, m) = setup();
        let f = SternGerlachField::new(p.b0, 0.0);
        let g = Grid3::cube(32, 1.5 * p.radius).unwrap();
        let s = SphereState::at_rest(&p, Vec3::unit_z()).unwrap();
        let force = sphere_total_force(&m, &s, &f, &g).unwrap();
        assert!(force.norm() < 1e-10 * s.mu * p.b0, "{force:?}");
        let tau = sphere_torque(&m, &s, &f, &g).unwrap();
        assert!(tau.norm() < 1e-10 * s.mu * p.b0);
    }

    #[test]
    fn x_up_has_no_vertical_force() {
        let (p, m) = setup();
        let f = SternGerlachField::new(p.b0, p.eta);
        let g = Grid3::cube(48, 1.5 * p.radius).unwrap();
        let s = SphereState::at_rest(&p, Vec3::unit_x()).unwrap();
        let force = sphere_total_force(&m, &s, &f, &g).unwrap();
        let mu_eta = s.mu * p.eta;
        assert!(force.z.abs() < 1e-10 * mu_eta);
        // sideways pull toward -x before precession averages it out
        assert!(force.x < -0.9 * mu_eta);
    }

    #[test]
    fn quadrature_force_matches_potential_force() {
        let (p, m) = setup();
        let f = SternGerlachField::new(p.b0, p.eta);
        let g = Grid3::cube(96, 1.5 * p.radius).unwrap();
        let s = SphereState::at_rest(&p, Vec3::unit_z()).unwrap();
        let fq = sphere_total_force(&m, &s, &f, &g).unwrap();
        let fp = potential_force(s.magnetic_moment(), &f, s.center);
        assert!((fp - Vec3::new(0.0, 0.0, s.mu * p.eta)).norm() < 1e-12 * s.mu * p.eta);
        assert!((fq - fp).norm() < 5e-3 * fp.norm(), "{fq:?} vs {fp:?}");
    }

    #[test]
    fn potential_energy_examples() {
        let (p, _) = setup();
        let f = SternGerlachField::new(p.b0, p.eta);
        let mu = p.mu();
        let z0 = 0.3;
        let u = potential_energy(Vec3::new(0.0, 0.0, -mu), &f, Vec3::new(0.0, 0.0, z0));
        assert!((u - mu * (p.b0 - p.eta * z0)).abs() < 1e-12 * u.abs());
        let uni = SternGerlachField::new(p.b0, 0.0);
        let perp = Vec3::new(mu, 0.0, 0.0);
        assert_eq!(potential_energy(perp, &uni, Vec3::new(0.4, 0.1, 0.2)), 0.0);
        assert_eq!(
            potential_force(perp, &uni, Vec3::new(0.4, 0.1, 0.2)),
            Vec3::zero()
        );
    }

    #[test]
    fn torque_x_up_matches_closed_form() {
        let (p, m) = setup();
        let f = SternGerlachField::new(p.b0, p.eta);
        let g = Grid3::cube(64, 1.5 * p.radius).unwrap();
        let s = SphereState::at_rest(&p, Vec3::unit_x()).unwrap();
        let tau = sphere_torque(&m, &s, &f, &g).unwrap();
        let closed = s.magnetic_moment().cross(f.b_at(s.center));
        assert!((closed - Vec3::new(0.0, s.mu * p.b0, 0.0)).norm() < 1e-12 * s.mu * p.b0);
        assert!((tau - closed).norm() < 0.01 * closed.norm(), "{tau:?}");
    }

    #[test]
    fn subluminal_gate() {
        let mut p = PhysParams::<f64>::default_atomic();
        p.radius = 5.0 * p.hbar / (4.0 * p.mass * p.c);
        let r = validate_subluminal(&p);
        assert!(r.at_boundary && !r.pass);
        p.radius *= 10.0;
        let r = validate_subluminal(&p);
        assert!(r.pass && (r.equator_speed / r.c - 0.1).abs() < 1e-12);
        p.radius = 1e12;
        assert!(validate_subluminal(&p).equator_speed < 1e-11);
    }

    #[test]
    fn grid_must_contain_sphere() {
        let (p, m) = setup();
        let g = Grid3::cube(16, 0.9 * p.radius).unwrap();
        let s = SphereState::at_rest(&p, Vec3::unit_z()).unwrap();
        assert!(matches!(
            magnetic_moment_quadrature(&m, &s, &g),
            Err(SimError::BoxTooSmall(_))
        ));
    }

    #[test]
    fn step_limit_enforced() {
        let (p, m) = setup();
        let f = SternGerlachField::new(p.b0, p.eta);
        let s = SphereState::at_rest(&p, Vec3::unit_z()).unwrap();
        let period = 2.0 * std::f64::consts::PI / (2.0 * s.mu * p.b0);
        assert!(matches!(
            integrate_rigid(&m, &s, &f, 1.0, 0.1 * period),
            Err(SimError::StepTooLarge { .. })
        ));
    }
}
