//! Small dense tensor algebra for isotropic small-strain elasticity.
//!
//! Tensors are stored as their six independent components. Off-diagonal
//! entries hold the tensor component itself (not the engineering shear), so
//! the double contraction counts them twice.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Symmetric second-order tensor in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3 {
        xx: 0.0,
        yy: 0.0,
        zz: 0.0,
        xy: 0.0,
        xz: 0.0,
        yz: 0.0,
    };

    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        SymTensor3 {
            xx,
            yy,
            zz,
            xy,
            xz,
            yz,
        }
    }

    pub fn diag(xx: f64, yy: f64, zz: f64) -> Self {
        SymTensor3::new(xx, yy, zz, 0.0, 0.0, 0.0)
    }

    pub fn identity() -> Self {
        SymTensor3::diag(1.0, 1.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    /// Full `a_ij b_ij` contraction.
    pub fn contract(&self, other: &SymTensor3) -> f64 {
        self.xx * other.xx
            + self.yy * other.yy
            + self.zz * other.zz
            + 2.0 * (self.xy * other.xy + self.xz * other.xz + self.yz * other.yz)
    }

    /// Deviatoric and spherical parts, `t = dev + sph` with `sph = tr(t)/3 I`.
    pub fn split(&self) -> (SymTensor3, SymTensor3) {
        let mean = self.trace() / 3.0;
        let sph = SymTensor3::diag(mean, mean, mean);
        let dev = SymTensor3::new(
            self.xx - mean,
            self.yy - mean,
            self.zz - mean,
            self.xy,
            self.xz,
            self.yz,
        );
        (dev, sph)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
    }
}

impl Add for SymTensor3 {
    type Output = SymTensor3;

    fn add(self, o: SymTensor3) -> SymTensor3 {
        SymTensor3::new(
            self.xx + o.xx,
            self.yy + o.yy,
            self.zz + o.zz,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yz + o.yz,
        )
    }
}

impl Sub for SymTensor3 {
    type Output = SymTensor3;

    fn sub(self, o: SymTensor3) -> SymTensor3 {
        SymTensor3::new(
            self.xx - o.xx,
            self.yy - o.yy,
            self.zz - o.zz,
            self.xy - o.xy,
            self.xz - o.xz,
            self.yz - o.yz,
        )
    }
}

impl Mul<SymTensor3> for f64 {
    type Output = SymTensor3;

    fn mul(self, t: SymTensor3) -> SymTensor3 {
        SymTensor3::new(
            self * t.xx,
            self * t.yy,
            self * t.zz,
            self * t.xy,
            self * t.xz,
            self * t.yz,
        )
    }
}

/// Free-function form of [`SymTensor3::split`].
pub fn split(t: &SymTensor3) -> (SymTensor3, SymTensor3) {
    t.split()
}

/// Free-function form of [`SymTensor3::contract`].
pub fn contract(a: &SymTensor3, b: &SymTensor3) -> f64 {
    a.contract(b)
}

/// Isotropic elastic constants. The Lamé parameters are derived once at
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticModuli {
    young: f64,
    poisson: f64,
    lambda: f64,
    mu: f64,
}

impl ElasticModuli {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !young.is_finite() {
            return Err(Error::invalid("young", format!("E must be > 0, got {young}")));
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::invalid(
                "poisson",
                format!("nu must satisfy -1 < nu < 0.5, got {poisson}"),
            ));
        }
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let mu = young / (2.0 * (1.0 + poisson));
        Ok(ElasticModuli {
            young,
            poisson,
            lambda,
            mu,
        })
    }

    pub fn young(&self) -> f64 {
        self.young
    }

    pub fn poisson(&self) -> f64 {
        self.poisson
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Ratio of horizontal to vertical stress under laterally confined
    /// uniaxial strain, `lambda / (lambda + 2 mu)`.
    pub fn lateral_pressure_coefficient(&self) -> f64 {
        self.lambda / (self.lambda + 2.0 * self.mu)
    }
}

/// `A0 eps = 2 mu eps + lambda tr(eps) I`.
pub fn isotropic_stress(eps: &SymTensor3, m: &ElasticModuli) -> SymTensor3 {
    let lt = m.lambda * eps.trace();
    let two_mu = 2.0 * m.mu;
    SymTensor3::new(
        two_mu * eps.xx + lt,
        two_mu * eps.yy + lt,
        two_mu * eps.zz + lt,
        two_mu * eps.xy,
        two_mu * eps.xz,
        two_mu * eps.yz,
    )
}

/// Embed an in-plane strain `[[xx, xy], [xy, yy]]` with zero out-of-plane
/// components.
pub fn lift_plane_strain(xx: f64, yy: f64, xy: f64) -> SymTensor3 {
    SymTensor3::new(xx, yy, 0.0, xy, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rock() -> ElasticModuli {
        ElasticModuli::new(2.9e10, 0.3).unwrap()
    }

    #[test]
    fn split_isotropic_has_zero_deviator() {
        let t = SymTensor3::diag(-4.5, -4.5, -4.5);
        let (d, s) = t.split();
        assert_eq!(d, SymTensor3::ZERO);
        assert_eq!(s, t);
    }

    #[test]
    fn split_traceless_is_its_own_deviator() {
        let t = SymTensor3::diag(1.0, -1.0, 0.0);
        let (d, s) = t.split();
        assert_eq!(d, t);
        assert_eq!(s, SymTensor3::ZERO);
    }

    #[test]
    fn split_uniaxial() {
        let (d, s) = SymTensor3::diag(3.0, 0.0, 0.0).split();
        assert_eq!(d, SymTensor3::diag(2.0, -1.0, -1.0));
        assert_eq!(s, SymTensor3::identity());
    }

    #[test]
    fn stress_of_zero_strain() {
        assert_eq!(isotropic_stress(&SymTensor3::ZERO, &rock()), SymTensor3::ZERO);
    }

    #[test]
    fn stress_of_identity_strain() {
        let m = rock();
        assert_relative_eq!(m.lambda(), 1.673_076_923_076_923e10, max_relative = 1e-12);
        assert_relative_eq!(m.mu(), 1.115_384_615_384_615e10, max_relative = 1e-12);
        let s = isotropic_stress(&SymTensor3::identity(), &m);
        let expect = 2.0 * m.mu() + 3.0 * m.lambda();
        assert_relative_eq!(s.xx, expect, max_relative = 1e-14);
        assert_relative_eq!(s.zz, expect, max_relative = 1e-14);
        assert_eq!(s.xy, 0.0);
    }

    #[test]
    fn stress_of_uniaxial_strain() {
        let m = ElasticModuli::new(1.0, 0.25).unwrap();
        let s = isotropic_stress(&SymTensor3::diag(1.0, 0.0, 0.0), &m);
        assert_relative_eq!(s.xx, 2.0 * m.mu() + m.lambda(), max_relative = 1e-15);
        assert_relative_eq!(s.yy, m.lambda(), max_relative = 1e-15);
        assert_relative_eq!(s.zz, m.lambda(), max_relative = 1e-15);
    }

    #[test]
    fn lifted_plane_strain() {
        assert_eq!(lift_plane_strain(0.0, 0.0, 0.0), SymTensor3::ZERO);
        let t = lift_plane_strain(1.0, 1.0, 0.0);
        assert_eq!((t.xx, t.yy, t.zz), (1.0, 1.0, 0.0));

        let m = rock();
        let s = isotropic_stress(&lift_plane_strain(1.0, 0.0, 0.0), &m);
        assert_relative_eq!(s.zz / s.xx, 0.428_571_428_571_428_6, max_relative = 1e-12);
        assert_relative_eq!(s.zz / s.xx, m.lambda() / (2.0 * m.mu() + m.lambda()));
    }

    #[test]
    fn contraction_examples() {
        let i = SymTensor3::identity();
        assert_eq!(contract(&i, &i), 3.0);
        assert_eq!(contract(&i, &SymTensor3::new(1.0, -3.0, 2.0, 5.0, 1.0, -7.0)), 0.0);
        let a = SymTensor3::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(contract(&a, &a), 2.0);
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(ElasticModuli::new(0.0, 0.3).is_err());
        assert!(ElasticModuli::new(1.0, 0.5).is_err());
        assert!(ElasticModuli::new(1.0, -1.0).is_err());
        assert!(ElasticModuli::new(1.0, 0.7).is_err());
    }

    fn tensor() -> impl Strategy<Value = SymTensor3> {
        prop::array::uniform6(-1.0f64..1.0)
            .prop_map(|c| SymTensor3::new(c[0], c[1], c[2], c[3], c[4], c[5]))
    }

    proptest! {
        #[test]
        fn split_recomposes(t in tensor()) {
            let (d, s) = t.split();
            let r = d + s;
            for (a, b) in r.as_array().iter().zip(t.as_array()) {
                prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
            prop_assert!(d.trace().abs() <= 1e-14);
            prop_assert!(contract(&d, &s).abs() <= 1e-12);
        }

        #[test]
        fn stress_is_linear(e1 in tensor(), e2 in tensor(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let m = ElasticModuli::new(2.9e10, 0.3).unwrap();
            let lhs = isotropic_stress(&(a * e1 + b * e2), &m);
            let rhs = a * isotropic_stress(&e1, &m) + b * isotropic_stress(&e2, &m);
            let scale = 1e10 * (1.0 + a.abs() + b.abs());
            for (x, y) in lhs.as_array().iter().zip(rhs.as_array()) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }
}
