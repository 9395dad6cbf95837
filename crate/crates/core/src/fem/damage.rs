//! The damage functional at fixed displacement, with its exact gradient and
//! Hessian under nodal quadrature.

use super::element_strain;
use crate::continuum::isotropic_stress;
use crate::error::{check_len, Error, Result};
use crate::material::{shear_compression_measure, MaterialParams};
use crate::mesh::Mesh;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Damage functional frozen at a displacement field.
///
/// With `c_n` the nodal share of the elastic measure, `m_n` the lumped
/// mass and `K` the P1 Laplacian stiffness, the functional is
/// `sum_n [c_n a_eff(α_n)² + m_n w(α_n)] + w1 ℓ² αᵀKα`.
#[derive(Debug, Clone)]
pub struct DamageFunctional {
    elastic: Vec<f64>,
    mass: Vec<f64>,
    stiffness: CsrMatrix,
    params: MaterialParams,
}

impl DamageFunctional {
    pub fn new(mesh: &Mesh, u: &[f64], params: &MaterialParams) -> Result<Self> {
        check_len("u", u.len(), 2 * mesh.node_count())?;
        let young = params.moduli.young();
        let mut elastic = vec![0.0; mesh.node_count()];
        let mut trip = TripletBuilder::with_capacity(mesh.node_count(), 9 * mesh.element_count());
        for (e, t) in mesh.triangles().iter().enumerate() {
            let g = mesh.geometry(e);
            if !(g.area > 0.0) {
                return Err(Error::SingularElement(e));
            }
            let sigma0 = isotropic_stress(&element_strain(mesh, u, e), &params.moduli);
            let share = g.area / 3.0 * shear_compression_measure(&sigma0, params.kappa) / (2.0 * young);
            for a in 0..3 {
                elastic[t[a]] += share;
                for b in 0..3 {
                    let k = g.area * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
                    trip.add(t[a], t[b], k);
                }
            }
        }
        Ok(DamageFunctional {
            elastic,
            mass: mesh.lumped_mass(),
            stiffness: trip.build(),
            params: *params,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Lumped nodal areas.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Nodal elastic coefficients `c_n`.
    pub fn elastic(&self) -> &[f64] {
        &self.elastic
    }

    /// Scalar P1 stiffness of the gradient term, without its coefficient.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    /// Checks length and range of a damage field.
    pub fn check(&self, alpha: &[f64]) -> Result<()> {
        check_len("alpha", alpha.len(), self.dim())?;
        match alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            Some(&value) => Err(Error::DamageDomain { value }),
            None => Ok(()),
        }
    }

    /// Local part of the nodal terms: value, first and second derivatives
    /// of `c a_eff² + m w` at node `n`.
    fn local(&self, n: usize, alpha: f64) -> (f64, f64, f64) {
        let (a, da, dda) = self.params.effective_degradation(alpha);
        let (w, dw, ddw) = self.params.law.dissipation_unchecked(alpha);
        let (c, m) = (self.elastic[n], self.mass[n]);
        (
            c * a * a + m * w,
            2.0 * c * a * da + m * dw,
            2.0 * c * (da * da + a * dda) + m * ddw,
        )
    }

    /// Value of the functional. `alpha` is assumed to lie in `[0, 1]`.
    pub fn objective(&self, alpha: &[f64]) -> f64 {
        let local: f64 = alpha.iter().enumerate().map(|(n, &a)| self.local(n, a).0).sum();
        local + self.params.gradient_coefficient() * self.stiffness.quadratic_form(alpha)
    }

    /// `objective(to) - objective(from)`, summed term by term so that small
    /// changes are resolved without cancellation between large totals.
    pub fn difference(&self, from: &[f64], to: &[f64]) -> f64 {
        let mut local = 0.0;
        for n in 0..from.len() {
            let (x, y) = (from[n], to[n]);
            if x == y {
                continue;
            }
            let (ax, _, _) = self.params.effective_degradation(x);
            let (ay, _, _) = self.params.effective_degradation(y);
            let da = self.params.law.degradation_difference(x, y);
            let dw = self.params.law.dissipation_difference(x, y);
            local += self.elastic[n] * da * (ay + ax) + self.mass[n] * dw;
        }
        let delta: Vec<f64> = to.iter().zip(from).map(|(y, x)| y - x).collect();
        let sum: Vec<f64> = to.iter().zip(from).map(|(y, x)| y + x).collect();
        let k_delta = self.stiffness.mul_vec(&delta);
        let quad: f64 = k_delta.iter().zip(&sum).map(|(a, b)| a * b).sum();
        local + self.params.gradient_coefficient() * quad
    }

    pub fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let q = 2.0 * self.params.gradient_coefficient();
        let mut g = self.stiffness.mul_vec(alpha);
        for (n, gn) in g.iter_mut().enumerate() {
            *gn = q * *gn + self.local(n, alpha[n]).1;
        }
        g
    }

    /// Second derivatives of the nodal (diagonal) part.
    pub fn local_curvature(&self, alpha: &[f64]) -> Vec<f64> {
        alpha.iter().enumerate().map(|(n, &a)| self.local(n, a).2).collect()
    }

    pub fn hessian(&self, alpha: &[f64]) -> CsrMatrix {
        let mut h = self.stiffness.scaled(2.0 * self.params.gradient_coefficient());
        h.add_diagonal(&self.local_curvature(alpha));
        h
    }

    /// Gradient divided by the lumped nodal area (units of stress).
    pub fn residual(&self, alpha: &[f64]) -> Vec<f64> {
        let mut r = self.gradient(alpha);
        for (rn, m) in r.iter_mut().zip(&self.mass) {
            *rn /= m;
        }
        r
    }
}

fn prepare(mesh: &Mesh, u: &[f64], alpha: &[f64], params: &MaterialParams) -> Result<DamageFunctional> {
    let f = DamageFunctional::new(mesh, u, params)?;
    f.check(alpha)?;
    Ok(f)
}

pub fn damage_objective(mesh: &Mesh, u: &[f64], alpha: &[f64], params: &MaterialParams) -> Result<f64> {
    Ok(prepare(mesh, u, alpha, params)?.objective(alpha))
}

pub fn damage_gradient(mesh: &Mesh, u: &[f64], alpha: &[f64], params: &MaterialParams) -> Result<Vec<f64>> {
    Ok(prepare(mesh, u, alpha, params)?.gradient(alpha))
}

pub fn damage_hessian(mesh: &Mesh, u: &[f64], alpha: &[f64], params: &MaterialParams) -> Result<CsrMatrix> {
    Ok(prepare(mesh, u, alpha, params)?.hessian(alpha))
}

pub fn criterion_residual(
    mesh: &Mesh,
    u: &[f64],
    alpha: &[f64],
    params: &MaterialParams,
) -> Result<Vec<f64>> {
    Ok(prepare(mesh, u, alpha, params)?.residual(alpha))
}

/// Nodal dissipated energy `m_n w(α_n)`.
pub fn nodal_dissipation(mesh: &Mesh, alpha: &[f64], params: &MaterialParams) -> Result<Vec<f64>> {
    check_len("alpha", alpha.len(), mesh.node_count())?;
    let mut out = mesh.lumped_mass();
    for (o, &a) in out.iter_mut().zip(alpha) {
        *o *= params.law.dissipation(a)?.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::ElasticModuli;
    use crate::material::{DamageLaw, DamageModel};
    use crate::mesh::{build_mesh, MeshSizes, Rect};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params(model: DamageModel, eta_r: f64) -> MaterialParams {
        MaterialParams::new(
            ElasticModuli::new(2.9e10, 0.3).unwrap(),
            DamageLaw::new(model, 1e3).unwrap(),
            1e6,
            0.3,
            1.0,
            eta_r,
        )
        .unwrap()
    }

    const MODELS: [DamageModel; 4] = [
        DamageModel::Model1,
        DamageModel::Model2,
        DamageModel::Model3 { p: 4.0 },
        DamageModel::Model4 { k: 2.0 },
    ];

    /// A structured mesh with jittered interior nodes, at most 49 nodes.
    fn random_mesh(rng: &mut StdRng) -> Mesh {
        let n = rng.gen_range(2..=6);
        let h = 1.0 / n as f64;
        let base = build_mesh(&Rect::new(0.0, 1.0, 0.0, 1.0), &MeshSizes::uniform(h).unwrap(), None).unwrap();
        let nodes: Vec<[f64; 2]> = base
            .nodes()
            .iter()
            .map(|p| {
                let interior = p[0] > 1e-9 && p[0] < 1.0 - 1e-9 && p[1] > 1e-9 && p[1] < 1.0 - 1e-9;
                if interior {
                    [p[0] + rng.gen_range(-0.2..0.2) * h, p[1] + rng.gen_range(-0.2..0.2) * h]
                } else {
                    *p
                }
            })
            .collect();
        Mesh::with_tagger(nodes, base.triangles().to_vec(), h, h, |_| crate::mesh::BoundaryTag::Lateral).unwrap()
    }

    fn random_fields(rng: &mut StdRng, mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
        let u = (0..2 * mesh.node_count()).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        let alpha = (0..mesh.node_count()).map(|_| rng.gen_range(0.05..0.95)).collect();
        (u, alpha)
    }

    #[test]
    fn zero_state_is_zero() {
        let m = build_mesh(&Rect::new(0.0, 1.0, 0.0, 1.0), &MeshSizes::uniform(0.25).unwrap(), None).unwrap();
        let p = params(DamageModel::Model1, 0.0);
        let z = vec![0.0; m.node_count()];
        assert_eq!(damage_objective(&m, &vec![0.0; 2 * m.node_count()], &z, &p).unwrap(), 0.0);
    }

    #[test]
    fn constant_damage_without_strain() {
        let m = build_mesh(&Rect::new(0.0, 2.0, 0.0, 1.5), &MeshSizes::uniform(0.25).unwrap(), None).unwrap();
        let u = vec![0.0; 2 * m.node_count()];
        for model in MODELS {
            let p = params(model, 1e-6);
            let c = 0.37;
            let alpha = vec![c; m.node_count()];
            let w = p.law.dissipation(c).unwrap().0;
            assert_relative_eq!(damage_objective(&m, &u, &alpha, &p).unwrap(), w * 3.0, max_relative = 1e-12);
            let g = damage_gradient(&m, &u, &alpha, &p).unwrap();
            let mass = m.lumped_mass();
            let dw = p.law.dissipation(c).unwrap().1;
            for (gn, mn) in g.iter().zip(&mass) {
                assert_relative_eq!(*gn, dw * mn, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn unloaded_residual_is_slack() {
        let m = build_mesh(&Rect::new(0.0, 1.0, 0.0, 1.0), &MeshSizes::uniform(0.2).unwrap(), None).unwrap();
        let p = params(DamageModel::Model1, 1e-6);
        let r = criterion_residual(&m, &vec![0.0; 2 * m.node_count()], &vec![0.0; m.node_count()], &p).unwrap();
        for v in r {
            assert_relative_eq!(v, 1e3, max_relative = 1e-12);
        }
    }

    #[test]
    fn fully_damaged_model1_has_no_elastic_gradient() {
        let mut rng = StdRng::seed_from_u64(5);
        let m = random_mesh(&mut rng);
        let (u, _) = random_fields(&mut rng, &m);
        let p = params(DamageModel::Model1, 1e-6);
        let ones = vec![1.0; m.node_count()];
        let g = damage_gradient(&m, &u, &ones, &p).unwrap();
        for (gn, mn) in g.iter().zip(m.lumped_mass()) {
            assert_relative_eq!(*gn, 1e3 * mn, max_relative = 1e-12);
        }
    }

    #[test]
    fn quadratic_dissipation_hessian() {
        let m = build_mesh(&Rect::new(0.0, 1.0, 0.0, 1.0), &MeshSizes::uniform(0.25).unwrap(), None).unwrap();
        let p = params(DamageModel::Model2, 1e-6);
        let u = vec![0.0; 2 * m.node_count()];
        let alpha: Vec<f64> = (0..m.node_count()).map(|i| (i as f64 * 0.37).fract()).collect();
        let f = DamageFunctional::new(&m, &u, &p).unwrap();
        let h = f.hessian(&alpha).to_dense();
        let k = f.stiffness().to_dense();
        let mass = m.lumped_mass();
        for i in 0..m.node_count() {
            for j in 0..m.node_count() {
                let expect = 2.0 * p.gradient_coefficient() * k[i][j] + if i == j { 2.0 * 1e3 * mass[i] } else { 0.0 };
                assert_relative_eq!(h[i][j], expect, epsilon = 1e-9 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn model1_unstrained_hessian_is_constant() {
        let m = build_mesh(&Rect::new(0.0, 1.0, 0.0, 1.0), &MeshSizes::uniform(0.25).unwrap(), None).unwrap();
        let p = params(DamageModel::Model1, 1e-6);
        let f = DamageFunctional::new(&m, &vec![0.0; 2 * m.node_count()], &p).unwrap();
        let h1 = f.hessian(&vec![0.1; m.node_count()]).to_dense();
        let h2 = f.hessian(&vec![0.9; m.node_count()]).to_dense();
        assert_eq!(h1, h2);
    }

    /// Independent evaluation on one triangle: strain from the explicit
    /// displacement gradient, the split done by hand on a 3x3 array, and the
    /// gradient term from the gradient of the linear damage field.
    #[test]
    fn single_triangle_matches_dense_quadrature() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let m = Mesh::with_tagger(nodes.clone(), vec![[0, 1, 2]], 1.0, 1.0, |_| crate::mesh::BoundaryTag::Lateral)
            .unwrap();
        // u = G x with G = [[g11, g12], [g21, g22]]
        let gm = [[2e-4, -1e-4], [3e-4, -5e-4]];
        let u: Vec<f64> = nodes
            .iter()
            .flat_map(|x| [gm[0][0] * x[0] + gm[0][1] * x[1], gm[1][0] * x[0] + gm[1][1] * x[1]])
            .collect();
        let alpha = [0.1, 0.5, 0.3];
        let p = params(DamageModel::Model1, 0.0);

        let (e, nu) = (2.9e10, 0.3);
        let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let mut eps = [[0.0; 3]; 3];
        eps[0][0] = gm[0][0];
        eps[1][1] = gm[1][1];
        eps[0][1] = 0.5 * (gm[0][1] + gm[1][0]);
        eps[1][0] = eps[0][1];
        let tr = eps[0][0] + eps[1][1];
        let mut sig = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                sig[i][j] = 2.0 * mu * eps[i][j] + if i == j { lam * tr } else { 0.0 };
            }
        }
        let mean = (sig[0][0] + sig[1][1] + sig[2][2]) / 3.0;
        let (mut dd, mut ss) = (0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let s = if i == j { mean } else { 0.0 };
                dd += (sig[i][j] - s) * (sig[i][j] - s);
                ss += s * s;
            }
        }
        let b = (dd - 2.0 / 3.0 * ss) / (2.0 * e);
        let area = 0.5;
        let local: f64 = alpha
            .iter()
            .map(|&a| area / 3.0 * (b * (1.0 - a) * (1.0 - a) * (1.0 - a) * (1.0 - a) + 1e3 * a))
            .sum();
        let grad = [alpha[1] - alpha[0], alpha[2] - alpha[0]];
        let expect = local + 1e6 * 0.09 * area * (grad[0] * grad[0] + grad[1] * grad[1]);
        let got = damage_objective(&m, &u, &alpha, &p).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn rigid_translation_leaves_objective_unchanged() {
        let mut rng = StdRng::seed_from_u64(11);
        for model in MODELS {
            let m = random_mesh(&mut rng);
            let (u, alpha) = random_fields(&mut rng, &m);
            let p = params(model, 1e-6);
            let shifted: Vec<f64> = u.iter().enumerate().map(|(i, v)| v + if i % 2 == 0 { 0.7 } else { -2.1 }).collect();
            let a = damage_objective(&m, &u, &alpha, &p).unwrap();
            let b = damage_objective(&m, &shifted, &alpha, &p).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = StdRng::seed_from_u64(seed);
            let m = random_mesh(&mut rng);
            assert!(m.node_count() <= 60);
            let (u, alpha) = random_fields(&mut rng, &m);
            let p = params(MODELS[seed as usize % 4], 1e-6);
            let f = DamageFunctional::new(&m, &u, &p).unwrap();
            let g = f.gradient(&alpha);
            let h = f.hessian(&alpha).to_dense();
            let step = 1e-5;
            let gscale = g.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            for i in 0..m.node_count() {
                let mut ap = alpha.clone();
                let mut am = alpha.clone();
                ap[i] += step;
                am[i] -= step;
                let fd = (f.objective(&ap) - f.objective(&am)) / (2.0 * step);
                assert!((fd - g[i]).abs() <= 1e-6 * gscale, "seed {seed} node {i}: {fd} vs {}", g[i]);
                let gp = f.gradient(&ap);
                let gm = f.gradient(&am);
                let hscale = h[i].iter().fold(0.0f64, |s, v| s.max(v.abs()));
                for j in 0..m.node_count() {
                    let fd = (gp[j] - gm[j]) / (2.0 * step);
                    assert!((fd - h[j][i]).abs() <= 1e-5 * hscale, "seed {seed} ({j},{i}): {fd} vs {}", h[j][i]);
                }
            }
            assert!(f.hessian(&alpha).symmetry_error() < 1e-12);
            let other: Vec<f64> = alpha.iter().map(|a| (a + 0.01).min(1.0)).collect();
            let direct = f.objective(&other) - f.objective(&alpha);
            assert!((f.difference(&alpha, &other) - direct).abs() <= 1e-9 * f.objective(&alpha).abs());
        }
    }

    #[test]
    fn rejects_bad_fields() {
        let m = build_mesh(&Rect::new(0.0, 1.0, 0.0, 1.0), &MeshSizes::uniform(0.5).unwrap(), None).unwrap();
        let p = params(DamageModel::Model1, 0.0);
        let u = vec![0.0; 2 * m.node_count()];
        assert!(damage_objective(&m, &u[1..], &vec![0.0; m.node_count()], &p).is_err());
        assert!(damage_gradient(&m, &u, &[0.0], &p).is_err());
        let mut alpha = vec![0.0; m.node_count()];
        alpha[0] = -0.1;
        assert!(matches!(criterion_residual(&m, &u, &alpha, &p), Err(Error::DamageDomain { .. })));
    }

    proptest! {
        #[test]
        fn dissipation_is_nonnegative(seed in 0u64..1000, c in 0.0f64..=1.0) {
            let mut rng = StdRng::seed_from_u64(seed);
            let m = random_mesh(&mut rng);
            let p = params(MODELS[(seed % 4) as usize], 0.0);
            let d = nodal_dissipation(&m, &vec![c; m.node_count()], &p).unwrap();
            prop_assert!(d.iter().all(|v| *v >= 0.0));
        }
    }
}
