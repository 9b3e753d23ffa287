//! Analytic electromagnetic fields.

use serde::Serialize;

use crate::num::Real;
use crate::params::PhysParams;
use crate::vec3::Vec3;

/// Position-dependent field bundle (E, B, A, φ).
///
/// `E` and `φ` default to zero; the Lorentz law is nevertheless written for
/// the general case so other instances can supply them.
pub trait EmField<T: Real> {
    fn b_at(&self, x: Vec3<T>) -> Vec3<T>;
    fn a_at(&self, x: Vec3<T>) -> Vec3<T>;

    fn e_at(&self, _x: Vec3<T>) -> Vec3<T> {
        Vec3::zero()
    }

    fn phi_at(&self, _x: Vec3<T>) -> T {
        T::zero()
    }

    /// Jacobian `J[i][j] = ∂B_i/∂x_j`. The default uses centred differences.
    fn b_jacobian(&self, x: Vec3<T>) -> [[T; 3]; 3] {
        let h = T::lit(1e-5) * (T::one() + x.norm());
        let mut jac = [[T::zero(); 3]; 3];
        for j in 0..3 {
            let mut e = [T::zero(); 3];
            e[j] = h;
            let e = Vec3::from_array(e);
            let d = (self.b_at(x + e) - self.b_at(x - e)) / (T::lit(2.0) * h);
            for (i, row) in jac.iter_mut().enumerate() {
                row[j] = d[i];
            }
        }
        jac
    }

    /// ∇(m·B) at `x` for a fixed moment `m`.
    fn grad_m_dot_b(&self, m: Vec3<T>, x: Vec3<T>) -> Vec3<T> {
        let jac = self.b_jacobian(x);
        let g = |j: usize| m.x * jac[0][j] + m.y * jac[1][j] + m.z * jac[2][j];
        Vec3::new(g(0), g(1), g(2))
    }
}

impl<T: Real, F: EmField<T> + ?Sized> EmField<T> for &F {
    fn b_at(&self, x: Vec3<T>) -> Vec3<T> {
        (**self).b_at(x)
    }
    fn a_at(&self, x: Vec3<T>) -> Vec3<T> {
        (**self).a_at(x)
    }
    fn e_at(&self, x: Vec3<T>) -> Vec3<T> {
        (**self).e_at(x)
    }
    fn phi_at(&self, x: Vec3<T>) -> T {
        (**self).phi_at(x)
    }
    fn b_jacobian(&self, x: Vec3<T>) -> [[T; 3]; 3] {
        (**self).b_jacobian(x)
    }
}

/// Magnet field B = ηx x̂ + (B₀ − ηz) ẑ with potential A = (B₀x − ηxz) ŷ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SternGerlachField<T> {
    pub b0: T,
    pub eta: T,
}

impl<T: Real> SternGerlachField<T> {
    pub fn new(b0: T, eta: T) -> Self {
        Self { b0, eta }
    }
}

impl<T: Real> EmField<T> for SternGerlachField<T> {
    #[inline]
    fn b_at(&self, x: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.eta * x.x, T::zero(), self.b0 - self.eta * x.z)
    }

    #[inline]
    fn a_at(&self, x: Vec3<T>) -> Vec3<T> {
        Vec3::new(T::zero(), self.b0 * x.x - self.eta * x.x * x.z, T::zero())
    }

    fn b_jacobian(&self, _x: Vec3<T>) -> [[T; 3]; 3] {
        let z = T::zero();
        [[self.eta, z, z], [z, z, z], [z, z, -self.eta]]
    }
}

/// No field at all; used for states outside the magnet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FieldFree;

impl<T: Real> EmField<T> for FieldFree {
    fn b_at(&self, _x: Vec3<T>) -> Vec3<T> {
        Vec3::zero()
    }
    fn a_at(&self, _x: Vec3<T>) -> Vec3<T> {
        Vec3::zero()
    }
    fn b_jacobian(&self, _x: Vec3<T>) -> [[T; 3]; 3] {
        [[T::zero(); 3]; 3]
    }
}

/// Field bundle assembled from closures.
pub struct FnField<T> {
    pub b: Box<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>,
    pub a: Box<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>,
    pub e: Box<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>,
    pub phi: Box<dyn Fn(Vec3<T>) -> T + Send + Sync>,
}

impl<T: Real> EmField<T> for FnField<T> {
    fn b_at(&self, x: Vec3<T>) -> Vec3<T> {
        (self.b)(x)
    }
    fn a_at(&self, x: Vec3<T>) -> Vec3<T> {
        (self.a)(x)
    }
    fn e_at(&self, x: Vec3<T>) -> Vec3<T> {
        (self.e)(x)
    }
    fn phi_at(&self, x: Vec3<T>) -> T {
        (self.phi)(x)
    }
}

/// The Stern-Gerlach field for the given parameters.
pub fn sg_field<T: Real>(p: &PhysParams<T>) -> SternGerlachField<T> {
    SternGerlachField::new(p.b0, p.eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// max |∇×A − B| over the samples
    pub curl_residual: f64,
    /// max |∇·B| over the samples
    pub div_residual: f64,
}

/// Checks B = ∇×A and ∇·B = 0 with centred differences of step `h`.
pub fn check_potential_consistency<T: Real, F: EmField<T>>(
    f: &F,
    samples: &[Vec3<T>],
    h: T,
) -> ConsistencyReport {
    let two_h = T::lit(2.0) * h;
    let unit = [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()];
    let mut curl_res = T::zero();
    let mut div_res = T::zero();
    for &x in samples {
        // dA[j] = ∂A/∂x_j, dB[j] = ∂B/∂x_j
        let da: Vec<Vec3<T>> = unit
            .iter()
            .map(|&e| (f.a_at(x + e * h) - f.a_at(x - e * h)) / two_h)
            .collect();
        let db: Vec<Vec3<T>> = unit
            .iter()
            .map(|&e| (f.b_at(x + e * h) - f.b_at(x - e * h)) / two_h)
            .collect();
        let curl = Vec3::new(da[1].z - da[2].y, da[2].x - da[0].z, da[0].y - da[1].x);
        curl_res = curl_res.max((curl - f.b_at(x)).norm());
        div_res = div_res.max((db[0].x + db[1].y + db[2].z).abs());
    }
    ConsistencyReport {
        curl_residual: curl_res.to_f64_lossy(),
        div_residual: div_res.to_f64_lossy(),
    }
}
