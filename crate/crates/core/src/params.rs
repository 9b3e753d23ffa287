//! Unit system, physical constants and experiment parameters.
//!
//! Every formula in the crate is written in Gaussian-cgs form. Internally the
//! numbers are carried in Hartree atomic units (ħ = m = e = 1, c ≈ 137.036),
//! which keeps them O(1) without changing any formula. Raw Gaussian-cgs input
//! is converted with [`PhysParams::to_atomic`].

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::num::Real;

/// Speed of light in Hartree atomic units.
pub const C_ATOMIC: f64 = 137.036;

/// Largest ħ/(m c d) accepted by operations that rely on the
/// non-relativistic lift of a two-spinor into a four-spinor.
pub const EPSILON_REL_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitSystem {
    #[default]
    HartreeAtomic,
    GaussianCgsRaw,
}

/// Physical constants and Stern-Gerlach experiment parameters.
///
/// The electron carries charge `-charge_e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams<T> {
    pub hbar: T,
    pub mass: T,
    pub charge_e: T,
    pub c: T,
    /// Homogeneous background field B₀.
    pub b0: T,
    /// Field gradient η.
    pub eta: T,
    /// Time Δt spent inside the magnet.
    pub dt_field: T,
    /// Gaussian packet width d.
    pub d: T,
    /// Rigid-sphere radius R.
    pub radius: T,
    #[serde(default)]
    pub unit_system: UnitSystem,
}

/// Quantities derived from [`PhysParams`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales<T> {
    /// Bohr magneton eħ/2mc.
    pub mu: T,
    /// Larmor angular frequency 2μB₀/ħ.
    pub omega_larmor: T,
    /// ħ/(m c d).
    pub epsilon_rel: T,
    /// μηΔt/m.
    pub v_kick: T,
    /// μηΔt.
    pub p_kick: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonRelReport {
    pub epsilon_rel: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Base scales of the atomic unit system built from a given (ħ, m, e).
///
/// Multiplying an atomic-unit value by the matching scale gives the value in
/// the original cgs units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitScales {
    pub length: f64,
    pub time: f64,
    pub mass: f64,
    pub charge: f64,
    pub action: f64,
    pub speed: f64,
    pub field: f64,
}

impl UnitScales {
    pub fn identity() -> Self {
        Self {
            length: 1.0,
            time: 1.0,
            mass: 1.0,
            charge: 1.0,
            action: 1.0,
            speed: 1.0,
            field: 1.0,
        }
    }

    /// Gaussian-cgs atomic scales for the given electron constants.
    pub fn atomic_from_cgs(hbar: f64, mass: f64, charge: f64) -> Self {
        let e2 = charge * charge;
        let length = hbar * hbar / (mass * e2);
        let time = hbar * hbar * hbar / (mass * e2 * e2);
        Self {
            length,
            time,
            mass,
            charge,
            action: hbar,
            speed: e2 / hbar,
            field: charge / (length * length),
        }
    }
}

impl<T: Real> PhysParams<T> {
    /// Default experiment in atomic units: d = R = Δt = 1, a kick of
    /// μηΔt = 4ħ/d and a background field B₀ = 200·η·d.
    pub fn default_atomic() -> Self {
        let mut p = Self {
            hbar: T::one(),
            mass: T::one(),
            charge_e: T::one(),
            c: T::lit(C_ATOMIC),
            b0: T::zero(),
            eta: T::zero(),
            dt_field: T::one(),
            d: T::one(),
            radius: T::one(),
            unit_system: UnitSystem::HartreeAtomic,
        };
        p.set_kick(T::lit(4.0));
        p.b0 = T::lit(200.0) * p.eta * p.d;
        p
    }

    /// Bohr magneton eħ/2mc.
    pub fn mu(&self) -> T {
        self.charge_e * self.hbar / (T::lit(2.0) * self.mass * self.c)
    }

    /// Sets η so that the kick momentum μηΔt equals `kick` in units of ħ/d.
    pub fn set_kick(&mut self, kick: T) {
        self.eta = kick * self.hbar / (self.d * self.mu() * self.dt_field);
    }

    /// Dimensionless kick μηΔt·d/ħ.
    pub fn kick_over_hbar_d(&self) -> T {
        self.mu() * self.eta * self.dt_field * self.d / self.hbar
    }

    /// Characteristic spreading time m d²/ħ.
    pub fn spreading_time(&self) -> T {
        self.mass * self.d * self.d / self.hbar
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("charge_e", self.charge_e),
            ("c", self.c),
            ("dt_field", self.dt_field),
            ("d", self.d),
            ("radius", self.radius),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(SimError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("b0", self.b0), ("eta", self.eta)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(SimError::InvalidParams(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if self.unit_system == UnitSystem::HartreeAtomic
            && (self.hbar != T::one() || self.mass != T::one() || self.charge_e != T::one())
        {
            return Err(SimError::InvalidParams(
                "hartree-atomic parameters require hbar = mass = charge_e = 1".into(),
            ));
        }
        Ok(())
    }

    /// Converts to Hartree atomic units, returning the scales needed to map
    /// results back. Atomic input passes through unchanged.
    pub fn to_atomic(&self) -> Result<(Self, UnitScales)> {
        self.validate()?;
        match self.unit_system {
            UnitSystem::HartreeAtomic => Ok((*self, UnitScales::identity())),
            UnitSystem::GaussianCgsRaw => {
                let s = UnitScales::atomic_from_cgs(
                    self.hbar.to_f64_lossy(),
                    self.mass.to_f64_lossy(),
                    self.charge_e.to_f64_lossy(),
                );
                let conv = |v: T, scale: f64| T::lit(v.to_f64_lossy() / scale);
                Ok((
                    Self {
                        hbar: T::one(),
                        mass: T::one(),
                        charge_e: T::one(),
                        c: conv(self.c, s.speed),
                        b0: conv(self.b0, s.field),
                        eta: conv(self.eta, s.field / s.length),
                        dt_field: conv(self.dt_field, s.time),
                        d: conv(self.d, s.length),
                        radius: conv(self.radius, s.length),
                        unit_system: UnitSystem::HartreeAtomic,
                    },
                    s,
                ))
            }
        }
    }
}

/// Computes μ, the Larmor frequency, ε_rel and the kick from the defining formulas.
pub fn derive_scales<T: Real>(p: &PhysParams<T>) -> Result<DerivedScales<T>> {
    for (name, v) in [("mass", p.mass), ("c", p.c), ("hbar", p.hbar), ("d", p.d)] {
        if !(v > T::zero()) {
            return Err(SimError::InvalidParams(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let mu = p.mu();
    let p_kick = mu * p.eta * p.dt_field;
    Ok(DerivedScales {
        mu,
        omega_larmor: T::lit(2.0) * mu * p.b0 / p.hbar,
        epsilon_rel: p.hbar / (p.mass * p.c * p.d),
        v_kick: p_kick / p.mass,
        p_kick,
    })
}

pub fn validate_nonrelativistic<T: Real>(p: &PhysParams<T>) -> NonRelReport {
    let eps = (p.hbar / (p.mass * p.c * p.d)).to_f64_lossy();
    NonRelReport {
        epsilon_rel: eps,
        threshold: EPSILON_REL_THRESHOLD,
        pass: eps < EPSILON_REL_THRESHOLD,
    }
}

/// Errors unless the non-relativistic gate passes.
pub fn require_nonrelativistic<T: Real>(p: &PhysParams<T>) -> Result<()> {
    let r = validate_nonrelativistic(p);
    if r.pass {
        Ok(())
    } else {
        Err(SimError::NonRelativistic {
            epsilon: r.epsilon_rel,
            threshold: r.threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atomic() -> PhysParams<f64> {
        PhysParams::default_atomic()
    }

    #[test]
    fn bohr_magneton_atomic() {
        let s = derive_scales(&atomic()).unwrap();
        assert!((s.mu - 1.0 / (2.0 * 137.036)).abs() < 1e-18);
        assert!((s.mu - 3.64868e-3).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_zero_kick() {
        let mut p = atomic();
        p.eta = 0.0;
        let s = derive_scales(&p).unwrap();
        assert_eq!(s.p_kick, 0.0);
        assert_eq!(s.v_kick, 0.0);
    }

    #[test]
    fn zero_field_zero_larmor() {
        let mut p = atomic();
        p.b0 = 0.0;
        assert_eq!(derive_scales(&p).unwrap().omega_larmor, 0.0);
    }

    #[test]
    fn rejects_nonpositive() {
        for f in [
            |p: &mut PhysParams<f64>| p.mass = 0.0,
            |p: &mut PhysParams<f64>| p.c = -1.0,
            |p: &mut PhysParams<f64>| p.hbar = 0.0,
            |p: &mut PhysParams<f64>| p.d = 0.0,
        ] {
            let mut p = atomic();
            f(&mut p);
            assert!(derive_scales(&p).is_err());
        }
    }

    #[test]
    fn nonrel_gate_examples() {
        let mut p = atomic();
        let compton = p.hbar / (p.mass * p.c);
        p.d = 100.0 * compton;
        let r = validate_nonrelativistic(&p);
        assert!((r.epsilon_rel - 0.01).abs() < 1e-15 && r.pass);
        p.d = 5.0 * compton;
        let r = validate_nonrelativistic(&p);
        assert!((r.epsilon_rel - 0.2).abs() < 1e-15 && !r.pass);
        p.d = 10.0;
        let r = validate_nonrelativistic(&p);
        assert!((r.epsilon_rel - 1.0 / 1370.36).abs() < 1e-15 && r.pass);
        assert!((r.epsilon_rel - 7.30e-4).abs() < 1e-6);
    }

    #[test]
    fn default_kick_and_ratio() {
        let p = atomic();
        assert!((p.kick_over_hbar_d() - 4.0).abs() < 1e-12);
        assert!((p.b0 / (p.eta * p.d) - 200.0).abs() < 1e-9);
        p.validate().unwrap();
    }

    #[test]
    fn cgs_round_trip_preserves_dimensionless() {
        // CODATA electron constants in Gaussian cgs.
        let hbar = 1.054_571_817e-27;
        let m = 9.109_383_701_5e-28;
        let e = 4.803_204_71e-10;
        let c = 2.997_924_58e10;
        let s = UnitScales::atomic_from_cgs(hbar, m, e);
        let cgs = PhysParams::<f64> {
            hbar,
            mass: m,
            charge_e: e,
            c,
            b0: 1.0e4,
            eta: 1.0e6,
            dt_field: 1.0e-9,
            d: 1.0e-6,
            radius: 1.0e-7,
            unit_system: UnitSystem::GaussianCgsRaw,
        };
        let (au, scales) = cgs.to_atomic().unwrap();
        assert_eq!(scales, s);
        assert!((au.c - 137.036).abs() < 1e-3);
        let dc = derive_scales(&cgs).unwrap();
        let da = derive_scales(&au).unwrap();
        assert!((dc.epsilon_rel - da.epsilon_rel).abs() / dc.epsilon_rel < 1e-12);
        // μ_B in erg/G
        assert!((dc.mu - 9.274_010e-21).abs() / dc.mu < 1e-5);
        let omega_cgs = dc.omega_larmor;
        assert!((da.omega_larmor / scales.time - omega_cgs).abs() / omega_cgs < 1e-12);
        assert!((da.v_kick * scales.speed - dc.v_kick).abs() / dc.v_kick < 1e-12);
    }

    #[test]
    fn derive_is_pure() {
        let p = atomic();
        let a = derive_scales(&p).unwrap();
        let b = derive_scales(&p).unwrap();
        assert_eq!(a.mu.to_bits(), b.mu.to_bits());
        assert_eq!(a.omega_larmor.to_bits(), b.omega_larmor.to_bits());
    }

    #[test]
    fn atomic_mode_requires_unit_constants() {
        let mut p = atomic();
        p.hbar = 2.0;
        assert!(p.validate().is_err());
    }
}
