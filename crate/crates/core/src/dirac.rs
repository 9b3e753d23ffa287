//! Four-component spinors, the slaved lower pair and the charge and current
//! of the Dirac field read as a classical field.
//!
//! ψ = e^{−imc²t/ħ} (χ_u, χ_l). The rest-energy phase is never sampled: it is
//! carried as `rest_phase_time` and every density is independent of it.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::field::{EmField, FieldFree};
use crate::grid::{sum_kahan, Grid3, ScalarGridField, VecGridField};
use crate::num::Real;
use crate::params::{require_nonrelativistic, PhysParams};
use crate::pauli::{free_evolve_spectral, spin_from_polar, KickRecord, SpinorField2, C};
use crate::spectral::Fft3;
use crate::vec3::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField4<T> {
    pub grid: Grid3<T>,
    /// (χ_u,1, χ_u,2, χ_l,1, χ_l,2)
    pub c: [Vec<C<T>>; 4],
    /// Time t of the factored-out phase e^{−imc²t/ħ}.
    pub rest_phase_time: T,
}

impl<T: Real> SpinorField4<T> {
    pub fn zeros(grid: Grid3<T>) -> Self {
        let z = vec![C::new(T::zero(), T::zero()); grid.len()];
        Self {
            grid,
            c: [z.clone(), z.clone(), z.clone(), z],
            rest_phase_time: T::zero(),
        }
    }

    /// ∫ψ†ψ dV. Lifted states are not normalised; this reports by how much.
    pub fn norm_sq(&self) -> T {
        sum_kahan(self.c.iter().flat_map(|v| v.iter().map(|z| z.norm_sqr())))
            * self.grid.cell_volume()
    }

    pub fn upper(&self) -> SpinorField2<T> {
        SpinorField2 {
            grid: self.grid,
            c: [self.c[0].clone(), self.c[1].clone()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c
            .iter()
            .flatten()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Multiplies every component by e^{iγ}.
    pub fn with_global_phase(&self, gamma: T) -> Self {
        let ph = C::from_polar(T::one(), gamma);
        let mut out = self.clone();
        for v in out.c.iter_mut().flatten() {
            *v = *v * ph;
        }
        out
    }

    /// max |ψ_a − φ_a| over nodes and components, divided by max |φ_a|.
    pub fn max_rel_diff(&self, other: &Self) -> Result<T> {
        if self.grid != other.grid {
            return Err(SimError::GridMismatch);
        }
        let mut diff = T::zero();
        let mut scale = T::zero();
        for (a, b) in self.c.iter().zip(&other.c) {
            for (u, v) in a.iter().zip(b) {
                diff = diff.max((*u - *v).norm());
                scale = scale.max(v.norm());
            }
        }
        Ok(diff / scale)
    }
}

type M4<T> = [[C<T>; 4]; 4];

/// α and β in the block form α_i = [[0, σ_i], [σ_i, 0]], β = diag(I, −I).
pub struct DiracMatrices;

impl DiracMatrices {
    pub fn alpha<T: Real>(i: usize) -> M4<T> {
        let s = crate::pauli::PauliMatrices::sigma::<T>(i);
        let mut m = [[C::new(T::zero(), T::zero()); 4]; 4];
        for r in 0..2 {
            for q in 0..2 {
                m[r][q + 2] = s[r][q];
                m[r + 2][q] = s[r][q];
            }
        }
        m
    }

    pub fn beta<T: Real>() -> M4<T> {
        let mut m = [[C::new(T::zero(), T::zero()); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = C::new(if i < 2 { T::one() } else { -T::one() }, T::zero());
        }
        m
    }

    pub fn mul<T: Real>(a: &M4<T>, b: &M4<T>) -> M4<T> {
        let mut out = [[C::new(T::zero(), T::zero()); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4).fold(C::new(T::zero(), T::zero()), |s, k| s + a[i][k] * b[k][j]);
            }
        }
        out
    }
}

/// σ·v applied to (a, b) for a complex vector v.
#[inline]
fn sigma_dot<T: Real>(v: [C<T>; 3], a: C<T>, b: C<T>) -> [C<T>; 2] {
    let i = C::new(T::zero(), T::one());
    [
        v[2] * a + (v[0] - i * v[1]) * b,
        (v[0] + i * v[1]) * a - v[2] * b,
    ]
}

/// χ_l = (−iħc σ·∇ + e σ·A − eφ) χ_u / (2mc²), with spectral derivatives.
pub fn lift_to_dirac<T: Real, F: EmField<T>>(
    chi_u: &SpinorField2<T>,
    f: &F,
    p: &PhysParams<T>,
) -> Result<SpinorField4<T>> {
    require_nonrelativistic(p)?;
    let g = chi_u.grid;
    let fft = Fft3::new(&g);
    let du = fft.gradient(&chi_u.c[0]);
    let dd = fft.gradient(&chi_u.c[1]);
    let two_mc2 = T::lit(2.0) * p.mass * p.c * p.c;
    let grad_coef = C::new(T::zero(), -p.hbar * p.c) / two_mc2;
    let e = p.charge_e;
    let mut out = SpinorField4::zeros(g);
    out.c[0] = chi_u.c[0].clone();
    out.c[1] = chi_u.c[1].clone();
    for (idx, x) in g.positions().enumerate() {
        let (a, b) = (chi_u.c[0][idx], chi_u.c[1][idx]);
        let grad = sigma_dot_grad(&du, &dd, idx);
        let av = f.a_at(x);
        let sa = sigma_dot_real(av, a, b);
        let phi = f.phi_at(x);
        for r in 0..2 {
            let chi = if r == 0 { a } else { b };
            out.c[2 + r][idx] = grad[r] * grad_coef + (sa[r] * e - chi * (e * phi)) / two_mc2;
        }
    }
    Ok(out)
}

/// σ·∇ applied to (u, d) from precomputed gradients.
#[inline]
fn sigma_dot_grad<T: Real>(du: &[Vec<C<T>>; 3], dd: &[Vec<C<T>>; 3], idx: usize) -> [C<T>; 2] {
    let i = C::new(T::zero(), T::one());
    [
        du[2][idx] + dd[0][idx] - i * dd[1][idx],
        du[0][idx] + i * du[1][idx] - dd[2][idx],
    ]
}

#[inline]
fn sigma_dot_real<T: Real>(v: Vec3<T>, a: C<T>, b: C<T>) -> [C<T>; 2] {
    let z = T::zero();
    sigma_dot([C::new(v.x, z), C::new(v.y, z), C::new(v.z, z)], a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prepared {
    ZUpPre,
    ZUpPost,
    XUpPre,
    XUpPost,
}

/// Closed-form lifted Gaussian for spin amplitudes (a, b), before or after
/// the magnet. After the magnet the z-up branch carries e^{−iμB₀Δt/ħ + ikz}
/// and a shift μηΔt/2mc in its third component; the z-down branch the
/// conjugate phase and the same shift in its fourth.
pub fn prepared_spin_state<T: Real>(
    spin: [C<T>; 2],
    after_field: bool,
    p: &PhysParams<T>,
    g: &Grid3<T>,
) -> Result<SpinorField4<T>> {
    let min_half = g.halfwidth.iter().fold(T::infinity(), |m, &h| m.min(h));
    if min_half < T::lit(5.0) * p.d {
        return Err(SimError::BoxTooSmall(format!(
            "halfwidth {min_half} below 5d"
        )));
    }
    let eps = p.hbar / (T::lit(2.0) * p.mass * p.c * p.d * p.d);
    let (phase0, k, shift) = if after_field {
        let r = KickRecord::from_params(p);
        (
            r.phase0,
            r.k,
            p.mu() * p.eta * p.dt_field / (T::lit(2.0) * p.mass * p.c),
        )
    } else {
        (T::zero(), T::zero(), T::zero())
    };
    let norm = (T::one() / (T::PI() * p.d * p.d)).powf(T::lit(0.75));
    let zero = T::zero();
    let i = C::new(zero, T::one());
    let re = |v: T| C::new(v, zero);
    let mut out = SpinorField4::zeros(*g);
    out.rest_phase_time = if after_field { p.dt_field } else { zero };
    for (idx, x) in g.positions().enumerate() {
        let env = norm * (-x.norm_sq() / (T::lit(2.0) * p.d * p.d)).exp();
        let up = spin[0] * C::from_polar(env, -phase0 + k * x.z);
        let dn = spin[1] * C::from_polar(env, phase0 - k * x.z);
        let up_l = [i * (eps * x.z) + re(shift), i * (eps * x.x) - re(eps * x.y)];
        let dn_l = [
            i * (eps * x.x) + re(eps * x.y),
            -i * (eps * x.z) + re(shift),
        ];
        out.c[0][idx] = up;
        out.c[1][idx] = dn;
        out.c[2][idx] = up * up_l[0] + dn * dn_l[0];
        out.c[3][idx] = up * up_l[1] + dn * dn_l[1];
    }
    Ok(out)
}

pub fn prepared_state<T: Real>(
    which: Prepared,
    p: &PhysParams<T>,
    g: &Grid3<T>,
) -> Result<SpinorField4<T>> {
    let (theta, post) = match which {
        Prepared::ZUpPre => (T::zero(), false),
        Prepared::ZUpPost => (T::zero(), true),
        Prepared::XUpPre => (T::FRAC_PI_2(), false),
        Prepared::XUpPost => (T::FRAC_PI_2(), true),
    };
    prepared_spin_state(spin_from_polar(theta, T::zero()), post, p, g)
}

/// ρ = −e ψ†ψ.
pub fn charge_density<T: Real>(psi: &SpinorField4<T>, p: &PhysParams<T>) -> ScalarGridField<T> {
    let values = (0..psi.grid.len())
        .map(|i| -p.charge_e * psi.c.iter().fold(T::zero(), |s, v| s + v[i].norm_sqr()))
        .collect();
    ScalarGridField {
        grid: psi.grid,
        values,
    }
}

/// ψ†α_iψ = 2 Re(χ_u† σ_i χ_l) at one node.
#[inline]
fn alpha_bilinear<T: Real>(psi: &SpinorField4<T>, idx: usize) -> Vec3<T> {
    let (u1, u2, l1, l2) = (psi.c[0][idx], psi.c[1][idx], psi.c[2][idx], psi.c[3][idx]);
    let i = C::new(T::zero(), T::one());
    let sx = u1.conj() * l2 + u2.conj() * l1;
    let sy = u1.conj() * (-i * l2) + u2.conj() * (i * l1);
    let sz = u1.conj() * l1 - u2.conj() * l2;
    Vec3::new(sx.re, sy.re, sz.re) * T::lit(2.0)
}

/// J = −ec ψ†αψ.
pub fn current_density<T: Real>(psi: &SpinorField4<T>, p: &PhysParams<T>) -> VecGridField<T> {
    let k = -p.charge_e * p.c;
    let values = (0..psi.grid.len())
        .map(|i| alpha_bilinear(psi, i) * k)
        .collect();
    VecGridField {
        grid: psi.grid,
        values,
    }
}

/// f = ρE + (1/c) J × B.
pub fn dirac_force_density<T: Real, F: EmField<T>>(
    psi: &SpinorField4<T>,
    f: &F,
    p: &PhysParams<T>,
) -> VecGridField<T> {
    let rho = charge_density(psi, p);
    let j = current_density(psi, p);
    let values = psi
        .grid
        .positions()
        .enumerate()
        .map(|(i, x)| f.e_at(x) * rho.values[i] + j.values[i].cross(f.b_at(x)) / p.c)
        .collect();
    VecGridField {
        grid: psi.grid,
        values,
    }
}

/// Closed-form current of the x-up packet just after the magnet:
/// G²{[(2μc/d²)(x×x̂) − (eμη/m)Δt x̂] cos Φ + [(2μc/d²)(x×ŷ) − (eμη/m)Δt ŷ] sin Φ},
/// Φ = 2μ(B₀ − ηz)Δt/ħ.
pub fn post_field_current_xup<T: Real>(p: &PhysParams<T>, g: &Grid3<T>) -> VecGridField<T> {
    let mu = p.mu();
    let d2 = p.d * p.d;
    let n = (T::one() / (T::PI() * d2)).powf(T::lit(1.5));
    let spin = T::lit(2.0) * mu * p.c / d2;
    let drift = p.charge_e * mu * p.eta * p.dt_field / p.mass;
    VecGridField::from_fn(*g, |x| {
        let g2 = n * (-x.norm_sq() / d2).exp();
        let phase = T::lit(2.0) * mu * (p.b0 - p.eta * x.z) * p.dt_field / p.hbar;
        let a = x.cross(Vec3::unit_x()) * spin - Vec3::unit_x() * drift;
        let b = x.cross(Vec3::unit_y()) * spin - Vec3::unit_y() * drift;
        (a * phase.cos() + b * phase.sin()) * g2
    })
}

/// Free evolution in the non-relativistic reduction: χ_u evolves by the
/// free Pauli equation (spectral, with the boundary monitor) and χ_l is
/// re-lifted with A = φ = 0.
pub fn evolve_nr<T: Real>(
    psi: &SpinorField4<T>,
    t: T,
    p: &PhysParams<T>,
    margin_tol: f64,
) -> Result<SpinorField4<T>> {
    require_nonrelativistic(p)?;
    let chi = free_evolve_spectral(&psi.upper(), p, t, 4, margin_tol)?;
    let mut out = lift_to_dirac(&chi, &FieldFree, p)?;
    out.rest_phase_time = psi.rest_phase_time + t;
    Ok(out)
}

/// z-basis probabilities (cos²θ/2, sin²θ/2) of the prepared spin.
pub fn lump_fractions<T: Real>(theta: T, phi_s: T) -> (T, T) {
    let s = spin_from_polar(theta, phi_s);
    let up = s[0].norm_sqr();
    (up, T::one() - up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SternGerlachField;
    use crate::grid::grid_divergence;
    use crate::pauli::{make_gaussian, sg_phase_kick, GaussianPacketSpec, DEFAULT_MARGIN_TOL};

    fn params(kick: f64) -> PhysParams<f64> {
        let mut p = PhysParams::default_atomic();
        p.set_kick(kick);
        p.b0 = 200.0 * p.eta * p.d;
        p
    }

    fn close(a: C<f64>, b: C<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn dirac_algebra() {
        let id = {
            let mut m = [[C::new(0.0, 0.0); 4]; 4];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = C::new(1.0, 0.0);
            }
            m
        };
        let add = |a: &M4<f64>, b: &M4<f64>| {
            let mut o = *a;
            for i in 0..4 {
                for j in 0..4 {
                    o[i][j] += b[i][j];
                }
            }
            o
        };
        let beta = DiracMatrices::beta::<f64>();
        assert_eq!(DiracMatrices::mul(&beta, &beta), id);
        for i in 0..3 {
            let ai = DiracMatrices::alpha::<f64>(i);
            let ab = add(
                &DiracMatrices::mul(&ai, &beta),
                &DiracMatrices::mul(&beta, &ai),
            );
            assert!(ab.iter().flatten().all(|z| z.norm() == 0.0));
            for j in 0..3 {
                let aj = DiracMatrices::alpha::<f64>(j);
                let anti = add(&DiracMatrices::mul(&ai, &aj), &DiracMatrices::mul(&aj, &ai));
                for (r, row) in anti.iter().enumerate() {
                    for (q, z) in row.iter().enumerate() {
                        let e = if i == j && r == q { 2.0 } else { 0.0 };
                        assert_eq!(*z, C::new(e, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn lift_of_z_up_gaussian() {
        let p = params(4.0);
        let g = Grid3::cube(64, 8.0).unwrap();
        let chi = make_gaussian(&GaussianPacketSpec::z_up(p.d), &g).unwrap();
        let psi = lift_to_dirac(&chi, &FieldFree, &p).unwrap();
        let eps = p.hbar / (2.0 * p.mass * p.c * p.d * p.d);
        let scale = eps * chi.c[0].iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for (idx, x) in g.positions().enumerate() {
            let gg = chi.c[0][idx];
            assert!(close(
                psi.c[2][idx],
                gg * C::new(0.0, eps * x.z),
                1e-9 * scale
            ));
            assert!(close(
                psi.c[3][idx],
                gg * C::new(-eps * x.y, eps * x.x),
                1e-9 * scale
            ));
        }
        let pre = prepared_state(Prepared::ZUpPre, &p, &g).unwrap();
        assert!(psi.max_rel_diff(&pre).unwrap() < 1e-10);
    }

    #[test]
    fn lift_of_x_up_gaussian() {
        let p = params(4.0);
        let g = Grid3::cube(64, 8.0).unwrap();
        let chi = make_gaussian(&GaussianPacketSpec::x_up(p.d), &g).unwrap();
        let psi = lift_to_dirac(&chi, &FieldFree, &p).unwrap();
        let pre = prepared_state(Prepared::XUpPre, &p, &g).unwrap();
        assert!(psi.max_rel_diff(&pre).unwrap() < 1e-10);
        let s = 0.5f64.sqrt();
        let eps = p.hbar / (2.0 * p.mass * p.c * p.d * p.d);
        let idx = g.index(36, 26, 30);
        let x = g.position(idx);
        let env = pre.c[0][idx] / s;
        let l3 = env * s * eps * C::new(x.y, x.x + x.z);
        let l4 = env * s * eps * C::new(-x.y, x.x - x.z);
        assert!(close(pre.c[2][idx], l3, 1e-15) && close(pre.c[3][idx], l4, 1e-15));
    }

    #[test]
    fn constant_spinor_has_no_lower_part() {
        let p = params(1.0);
        let g = Grid3::cube(8, 6.0).unwrap();
        let mut chi = SpinorField2::zeros(g);
        chi.c[0].iter_mut().for_each(|v| *v = C::new(0.3, -0.2));
        let psi = lift_to_dirac(&chi, &FieldFree, &p).unwrap();
        assert!(psi.c[2].iter().chain(&psi.c[3]).all(|z| z.norm() < 1e-16));
    }

    #[test]
    fn scalar_potential_shifts_lower_part() {
        let p = params(1.0);
        let g = Grid3::cube(8, 6.0).unwrap();
        let f = crate::field::FnField::<f64> {
            b: Box::new(|_| Vec3::zero()),
            a: Box::new(|_| Vec3::zero()),
            e: Box::new(|_| Vec3::zero()),
            phi: Box::new(|_| 2.0),
        };
        let mut chi = SpinorField2::zeros(g);
        chi.c[1].iter_mut().for_each(|v| *v = C::new(1.0, 0.0));
        let psi = lift_to_dirac(&chi, &f, &p).unwrap();
        let expect = -p.charge_e * 2.0 / (2.0 * p.mass * p.c * p.c);
        assert!(psi.c[3]
            .iter()
            .all(|z| close(*z, C::new(expect, 0.0), 1e-18)));
    }

    #[test]
    fn relativistic_gate() {
        let mut p = params(1.0);
        p.d = 5.0 / p.c;
        p.set_kick(1.0);
        let g = Grid3::cube(8, 6.0).unwrap();
        let chi = SpinorField2::zeros(g);
        assert!(matches!(
            lift_to_dirac(&chi, &FieldFree, &p),
            Err(SimError::NonRelativistic { .. })
        ));
    }

    #[test]
    fn kicked_then_lifted_matches_post_state() {
        let p = params(4.0);
        let g = Grid3::cube(64, 8.0).unwrap();
        let pre = prepared_state(Prepared::ZUpPre, &p, &g).unwrap();
        let kicked = sg_phase_kick(&pre.upper(), &p, false);
        let lifted = lift_to_dirac(&kicked, &FieldFree, &p).unwrap();
        let post = prepared_state(Prepared::ZUpPost, &p, &g).unwrap();
        assert!(lifted.max_rel_diff(&post).unwrap() < 1e-10);
    }

    #[test]
    fn post_phase_gradient() {
        let p = params(2.0);
        let g = Grid3::<f64>::new([4, 4, 64], [6.0, 6.0, 6.0]).unwrap();
        let post = prepared_state(Prepared::ZUpPost, &p, &g).unwrap();
        let k = p.mu() * p.eta * p.dt_field / p.hbar;
        let h = g.spacing()[2];
        for kz in 20..40 {
            let a = post.c[0][g.index(1, 2, kz)];
            let b = post.c[0][g.index(1, 2, kz + 1)];
            let dphi = (b / a).arg();
            assert!((dphi / h - k).abs() < 1e-10 * k);
        }
    }

    #[test]
    fn zero_dt_post_equals_pre_up_to_phase() {
        let mut p = params(1.0);
        p.eta = 0.0;
        p.b0 = 0.0;
        let g = Grid3::cube(16, 6.0).unwrap();
        let a = prepared_state(Prepared::XUpPre, &p, &g).unwrap();
        let b = prepared_state(Prepared::XUpPost, &p, &g).unwrap();
        assert!(a.max_rel_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn z_up_charge_and_current() {
        let p = params(4.0);
        let g = Grid3::cube(32, 6.0).unwrap();
        let pre = prepared_state(Prepared::ZUpPre, &p, &g).unwrap();
        let rho = charge_density(&pre, &p);
        assert!(rho.values.iter().all(|&v| v <= 0.0));
        let q = rho.integrate();
        let eps = p.hbar / (p.mass * p.c * p.d);
        // lower pair adds (3/8)ε² of norm
        assert!(
            (q + p.charge_e * (1.0 + 0.375 * eps * eps)).abs() < 1e-9,
            "{q}"
        );
        let j = current_density(&pre, &p);
        let mu = p.mu();
        for (idx, x) in g.positions().enumerate() {
            let g2 = (1.0 / (std::f64::consts::PI * p.d * p.d)).powf(1.5)
                * (-x.norm_sq() / (p.d * p.d)).exp();
            let expect = x.cross(Vec3::unit_z()) * (g2 * 2.0 * mu * p.c / (p.d * p.d));
            assert!((j.values[idx] - expect).norm() < 1e-12 * mu * p.c);
        }
        let post = prepared_state(Prepared::ZUpPost, &p, &g).unwrap();
        let jp = current_density(&post, &p);
        for (idx, x) in g.positions().enumerate() {
            let g2 = (1.0 / (std::f64::consts::PI * p.d * p.d)).powf(1.5)
                * (-x.norm_sq() / (p.d * p.d)).exp();
            let extra = Vec3::unit_z() * (-p.charge_e * mu * p.eta * p.dt_field / p.mass * g2);
            assert!((jp.values[idx] - j.values[idx] - extra).norm() < 1e-12 * mu * p.c);
        }
    }

    #[test]
    fn constant_spinor_carries_no_current() {
        let p = params(1.0);
        let g = Grid3::cube(4, 6.0).unwrap();
        let mut psi = SpinorField4::zeros(g);
        psi.c[0].iter_mut().for_each(|v| *v = C::new(1.0, 0.0));
        assert!(current_density(&psi, &p)
            .values
            .iter()
            .all(|v| *v == Vec3::zero()));
        let zero = SpinorField4::<f64>::zeros(g);
        assert!(charge_density(&zero, &p).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn z_up_force_density_and_total() {
        let p = params(4.0);
        let g = Grid3::cube(64, 6.0).unwrap();
        let f = SternGerlachField::new(p.b0, p.eta);
        let pre = prepared_state(Prepared::ZUpPre, &p, &g).unwrap();
        let fd = dirac_force_density(&pre, &f, &p);
        let mu = p.mu();
        let idx = g.index(40, 20, 33);
        let x = g.position(idx);
        let g2 = (1.0 / (std::f64::consts::PI * p.d * p.d)).powf(1.5)
            * (-x.norm_sq() / (p.d * p.d)).exp();
        let fz = 2.0 * mu / (p.d * p.d) * g2 * p.eta * x.x * x.x;
        assert!((fd.values[idx].z - fz).abs() < 1e-12 * fz.abs());
        let total = fd.integrate();
        assert!(
            (total - Vec3::new(0.0, 0.0, mu * p.eta)).norm() < 1e-4 * mu * p.eta,
            "{total:?}"
        );
        let xs = prepared_state(Prepared::XUpPre, &p, &g).unwrap();
        assert!(dirac_force_density(&xs, &f, &p).integrate().z.abs() < 1e-10 * mu * p.eta);
    }

    #[test]
    fn closed_form_post_current_matches_state() {
        let p = params(4.0);
        let g = Grid3::cube(32, 6.0).unwrap();
        let closed = post_field_current_xup(&p, &g);
        let from_state = current_density(&prepared_state(Prepared::XUpPost, &p, &g).unwrap(), &p);
        let scale = closed.max_norm();
        let diff = closed
            .values
            .iter()
            .zip(&from_state.values)
            .fold(0.0f64, |m, (a, b)| m.max((*a - *b).norm()));
        assert!(diff < 1e-10 * scale, "{diff} vs {scale}");
    }

    #[test]
    fn full_period_reduces_to_pre_current_plus_drift() {
        let mut p = params(1.0);
        // 2μB₀Δt/ħ = 2π·50
        p.b0 = 50.0 * std::f64::consts::PI * p.hbar / (p.mu() * p.dt_field);
        // odd node count puts a layer at z = 0
        let g = Grid3::<f64>::new([16, 16, 33], [6.0, 6.0, 6.0]).unwrap();
        let post = post_field_current_xup(&p, &g);
        let pre = current_density(&prepared_state(Prepared::XUpPre, &p, &g).unwrap(), &p);
        let mu = p.mu();
        let mut checked = 0;
        for (idx, x) in g.positions().enumerate() {
            if x.z.abs() > 1e-12 {
                continue;
            }
            let g2 = (1.0 / (std::f64::consts::PI * p.d * p.d)).powf(1.5)
                * (-x.norm_sq() / (p.d * p.d)).exp();
            let drift = Vec3::unit_x() * (-p.charge_e * mu * p.eta * p.dt_field / p.mass * g2);
            assert!((post.values[idx] - pre.values[idx] - drift).norm() < 1e-9 * mu * p.c);
            checked += 1;
        }
        assert_eq!(checked, 256);
    }

    #[test]
    fn post_current_divergence_shrinks() {
        let p = params(0.5);
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = Grid3::cube(n, 2.5).unwrap();
            let div = grid_divergence(&post_field_current_xup(&p, &g)).unwrap();
            errs.push(div.max_abs_interior());
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn global_phase_invariance() {
        let p = params(4.0);
        let g = Grid3::cube(16, 6.0).unwrap();
        let psi = prepared_state(Prepared::XUpPost, &p, &g).unwrap();
        let rot = psi.with_global_phase(1.234);
        let (r1, r2) = (charge_density(&psi, &p), charge_density(&rot, &p));
        for (a, b) in r1.values.iter().zip(&r2.values) {
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        let (j1, j2) = (current_density(&psi, &p), current_density(&rot, &p));
        let s = j1.max_norm();
        for (a, b) in j1.values.iter().zip(&j2.values) {
            assert!((*a - *b).norm() <= 1e-14 * s);
        }
    }

    #[test]
    fn evolve_moves_charge_up() {
        let p = params(1.0);
        let g = Grid3::cube(48, 8.0).unwrap();
        let post = prepared_state(Prepared::ZUpPost, &p, &g).unwrap();
        let t = 0.8;
        let later = evolve_nr(&post, t, &p, DEFAULT_MARGIN_TOL).unwrap();
        assert!((later.rest_phase_time - (p.dt_field + t)).abs() < 1e-15);
        let (_, c, _) = charge_density(&later, &p).moments();
        let v = p.mu() * p.eta * p.dt_field / p.mass;
        assert!((c.z - v * t).abs() < 1e-3 * v * t, "{c:?}");
        let same = evolve_nr(&post, 0.0, &p, DEFAULT_MARGIN_TOL).unwrap();
        assert!(same.max_rel_diff(&post).unwrap() < 1e-8);
    }

    #[test]
    fn fractions() {
        use std::f64::consts::PI;
        let (u, d) = lump_fractions(PI / 2.0, 0.3);
        assert!((u - 0.5).abs() < 1e-15 && (d - 0.5).abs() < 1e-15);
        assert_eq!(lump_fractions(0.0f64, 0.0), (1.0, 0.0));
        let (u, d) = lump_fractions(PI / 3.0, 0.0);
        assert!((u - 0.75).abs() < 1e-15 && (d - 0.25).abs() < 1e-15);
        assert_eq!(u + d, 1.0);
    }
}
