//! Point electron with charge, intrinsic moment and intrinsic angular momentum.
//!
//! Force law F = qE + (q/c) v × B + k ∇(m·B). As printed, k = 1/c; the
//! `consistency_c_fix` flag (on by default) uses k = 1 so the force on a
//! z-up electron is μη ẑ like the other models.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::field::EmField;
use crate::num::Real;
use crate::ode::{pack3, rk4_step, step_plan, unpack3};
use crate::params::PhysParams;
use crate::sphere::precession_step_limit;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointModel<T> {
    pub hbar: T,
    pub mass: T,
    pub c: T,
    pub mu: T,
    pub consistency_c_fix: bool,
}

impl<T: Real> PointModel<T> {
    pub fn from_params(p: &PhysParams<T>, consistency_c_fix: bool) -> Self {
        Self {
            hbar: p.hbar,
            mass: p.mass,
            c: p.c,
            mu: p.mu(),
            consistency_c_fix,
        }
    }

    fn moment_coupling(&self) -> T {
        if self.consistency_c_fix {
            T::one()
        } else {
            T::one() / self.c
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointState<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub m_vec: Vec3<T>,
    /// Always −(ħ/2μ) m_vec.
    pub l_vec: Vec3<T>,
    pub charge: T,
}

impl<T: Real> PointState<T> {
    /// Electron at rest at the origin whose spin (angular momentum) points along `axis`.
    pub fn electron(p: &PhysParams<T>, axis: Vec3<T>) -> Result<Self> {
        let n = axis.norm();
        if !(n > T::zero()) {
            return Err(SimError::InvalidParams("spin axis must be non-zero".into()));
        }
        let mu = p.mu();
        Ok(Self::with_moment(p, -axis / n * mu, -p.charge_e))
    }

    /// State with the given moment; the angular momentum is slaved to it.
    pub fn with_moment(p: &PhysParams<T>, m_vec: Vec3<T>, charge: T) -> Self {
        let mu = p.mu();
        Self {
            position: Vec3::zero(),
            velocity: Vec3::zero(),
            m_vec,
            l_vec: -m_vec * (p.hbar / (T::lit(2.0) * mu)),
            charge,
        }
    }
}

pub fn point_force<T: Real, F: EmField<T>>(
    model: &PointModel<T>,
    s: &PointState<T>,
    f: &F,
) -> Vec3<T> {
    let x = s.position;
    let lorentz = f.e_at(x) * s.charge + s.velocity.cross(f.b_at(x)) * (s.charge / model.c);
    lorentz + f.grad_m_dot_b(s.m_vec, x) * model.moment_coupling()
}

/// τ = m × B.
pub fn point_torque<T: Real, F: EmField<T>>(s: &PointState<T>, f: &F) -> Vec3<T> {
    s.m_vec.cross(f.b_at(s.position))
}

/// U = −m·B.
pub fn point_potential<T: Real, F: EmField<T>>(s: &PointState<T>, f: &F) -> T {
    -s.m_vec.dot(f.b_at(s.position))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PointTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<PointState<T>>,
}

impl<T: Real> PointTrajectory<T> {
    pub fn last(&self) -> Option<&PointState<T>> {
        self.states.last()
    }

    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut w = io::BufWriter::new(w);
        writeln!(w, "t,x,y,z,vx,vy,vz,mx,my,mz")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let (x, v, m) = (s.position, s.velocity, s.m_vec);
            writeln!(
                w,
                "{t},{},{},{},{},{},{},{},{},{}",
                x.x, x.y, x.z, v.x, v.y, v.z, m.x, m.y, m.z
            )?;
        }
        w.flush()
    }
}

/// Fixed-step RK4 on (position, velocity, m). |m| is restored after each
/// step and L recomputed from it.
pub fn integrate_point<T: Real, F: EmField<T>>(
    model: &PointModel<T>,
    s0: &PointState<T>,
    f: &F,
    t_end: T,
    dt: T,
) -> Result<PointTrajectory<T>> {
    if !(dt > T::zero()) {
        return Err(SimError::InvalidParams("time step must be positive".into()));
    }
    if let Some(max) = precession_step_limit(model.mu, model.hbar, f.b_at(s0.position)) {
        if dt > max {
            return Err(SimError::StepTooLarge {
                dt: dt.to_f64_lossy(),
                max: max.to_f64_lossy(),
            });
        }
    }
    let m_mag = s0.m_vec.norm();
    let l_per_m = model.hbar / (T::lit(2.0) * model.mu);
    let gyro = T::lit(2.0) * model.mu / model.hbar;
    let (steps, h) = step_plan(t_end, dt);
    let rhs = |_t: T, y: &[T; 9]| -> [T; 9] {
        let [x, v, m] = unpack3(y);
        let s = PointState {
            position: x,
            velocity: v,
            m_vec: m,
            l_vec: Vec3::zero(),
            charge: s0.charge,
        };
        let acc = point_force(model, &s, f) / model.mass;
        pack3([v, acc, f.b_at(x).cross(m) * gyro])
    };
    let mut traj = PointTrajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    traj.times.push(T::zero());
    traj.states.push(*s0);
    let mut y = pack3([s0.position, s0.velocity, s0.m_vec]);
    for i in 0..steps {
        let t = T::of_usize(i) * h;
        y = rk4_step(t, &y, h, rhs);
        let [x, v, mut m] = unpack3(&y);
        let n = m.norm();
        if n > T::zero() {
            m = m * (m_mag / n);
        }
        y = pack3([x, v, m]);
        traj.times.push(t + h);
        traj.states.push(PointState {
            position: x,
            velocity: v,
            m_vec: m,
            l_vec: -m * l_per_m,
            charge: s0.charge,
        });
    }
    Ok(traj)
}
