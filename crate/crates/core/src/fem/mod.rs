//! P1 finite elements: the degraded plane-strain elasticity system and the
//! damage functional.

mod damage;

use crate::continuum::{lift_plane_strain, SymTensor3};
use crate::error::{check_len, Error, Result};
use crate::material::MaterialParams;
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{CsrMatrix, TripletBuilder};

pub use damage::{
    criterion_residual, damage_gradient, damage_hessian, damage_objective, nodal_dissipation,
    DamageFunctional,
};

/// Gravity and lateral confinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyLoads {
    /// Density (kg/m³).
    pub rho: f64,
    /// Gravitational acceleration (m/s²).
    pub grav: f64,
    /// Stiffness of the Robin closure on the lateral boundary (Pa/m).
    pub kbar: f64,
}

impl BodyLoads {
    pub fn new(rho: f64, grav: f64, kbar: f64) -> Result<Self> {
        for (name, v) in [("rho", rho), ("grav", grav), ("kbar", kbar)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(BodyLoads { rho, grav, kbar })
    }

    pub fn none() -> Self {
        BodyLoads {
            rho: 0.0,
            grav: 0.0,
            kbar: 0.0,
        }
    }

    pub fn weight_density(&self) -> f64 {
        self.rho * self.grav
    }
}

/// Support on the bottom boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Zero normal displacement, free tangential slip.
    Roller,
    /// Zero displacement.
    Clamped,
}

/// Which conditions apply on the tagged boundary regions. The cavity wall
/// is always traction free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticBoundary {
    /// Apply the gravity-consistent lateral pressure and the Robin term on
    /// the lateral boundary; otherwise it is traction free.
    pub lateral_closure: bool,
    pub down: Support,
    /// Prescribed vertical displacement of the top boundary; `None` leaves
    /// it traction free.
    pub top_displacement: Option<f64>,
}

impl ElasticBoundary {
    /// Rock-mass setting: confined sides, roller base, free surface.
    pub fn caving() -> Self {
        ElasticBoundary {
            lateral_closure: true,
            down: Support::Roller,
            top_displacement: None,
        }
    }

    /// Compression specimen: clamped base, top pushed down, free sides.
    pub fn compression(top_displacement: f64) -> Self {
        ElasticBoundary {
            lateral_closure: false,
            down: Support::Clamped,
            top_displacement: Some(top_displacement),
        }
    }
}

/// Assembled system after elimination of the constrained degrees of
/// freedom.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `(dof, value)` pairs eliminated from the system.
    pub constrained: Vec<(usize, f64)>,
}

/// Constant strain of element `e` under the interleaved displacement `u`,
/// lifted to 3D.
pub fn element_strain(mesh: &Mesh, u: &[f64], e: usize) -> SymTensor3 {
    let t = mesh.triangles()[e];
    let g = mesh.geometry(e);
    let (mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0);
    for a in 0..3 {
        let (ux, uy) = (u[2 * t[a]], u[2 * t[a] + 1]);
        let [bx, by] = g.grad[a];
        exx += bx * ux;
        eyy += by * uy;
        exy += 0.5 * (by * ux + bx * uy);
    }
    lift_plane_strain(exx, eyy, exy)
}

/// Pressure of the laterally confined gravity column at height `y`,
/// `lambda/(lambda+2mu) rho g (y - h_max)`.
pub fn lateral_pressure(params: &MaterialParams, loads: &BodyLoads, y: f64, h_max: f64) -> f64 {
    params.moduli.lateral_pressure_coefficient() * loads.weight_density() * (y - h_max)
}

/// Assemble the plane-strain system for the displacement at fixed damage.
pub fn assemble_elasticity(
    mesh: &Mesh,
    alpha: &[f64],
    params: &MaterialParams,
    loads: &BodyLoads,
    bc: &ElasticBoundary,
) -> Result<LinearSystem> {
    check_len("alpha", alpha.len(), mesh.node_count())?;
    if let Some(&bad) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::DamageDomain { value: bad });
    }
    let ndof = 2 * mesh.node_count();
    let lam = params.moduli.lambda();
    let mu = params.moduli.mu();
    let mut trip = TripletBuilder::with_capacity(ndof, 36 * mesh.element_count() + 16 * mesh.facets().len());
    let mut rhs = vec![0.0; ndof];
    let weight = loads.weight_density();

    for (e, t) in mesh.triangles().iter().enumerate() {
        let g = mesh.geometry(e);
        if !(g.area > 0.0) {
            return Err(Error::SingularElement(e));
        }
        let mean_alpha = (alpha[t[0]] + alpha[t[1]] + alpha[t[2]]) / 3.0;
        let (a_eff, _, _) = params.effective_degradation(mean_alpha);
        let s = g.area * a_eff;
        for a in 0..3 {
            let [ba, ca] = g.grad[a];
            for b in 0..3 {
                let [bb, cb] = g.grad[b];
                let kxx = (lam + 2.0 * mu) * ba * bb + mu * ca * cb;
                let kxy = lam * ba * cb + mu * ca * bb;
                let kyx = lam * ca * bb + mu * ba * cb;
                let kyy = (lam + 2.0 * mu) * ca * cb + mu * ba * bb;
                let (ia, ib) = (2 * t[a], 2 * t[b]);
                trip.add(ia, ib, s * kxx);
                trip.add(ia, ib + 1, s * kxy);
                trip.add(ia + 1, ib, s * kyx);
                trip.add(ia + 1, ib + 1, s * kyy);
            }
            rhs[2 * t[a] + 1] -= weight * g.area / 3.0;
        }
    }

    if bc.lateral_closure {
        let h_max = mesh.max_height();
        for f in mesh.facets().iter().filter(|f| f.tag == BoundaryTag::Lateral) {
            let len = mesh.facet_length(f);
            let n = mesh.facet_normal(f);
            let [a, b] = f.nodes;
            let pa = lateral_pressure(params, loads, mesh.nodes()[a][1], h_max);
            let pb = lateral_pressure(params, loads, mesh.nodes()[b][1], h_max);
            let fa = len / 6.0 * (2.0 * pa + pb);
            let fb = len / 6.0 * (pa + 2.0 * pb);
            for i in 0..2 {
                rhs[2 * a + i] += fa * n[i];
                rhs[2 * b + i] += fb * n[i];
            }
            if loads.kbar > 0.0 {
                for i in 0..2 {
                    for j in 0..2 {
                        let k = loads.kbar * n[i] * n[j] * len;
                        trip.add(2 * a + i, 2 * a + j, k / 3.0);
                        trip.add(2 * b + i, 2 * b + j, k / 3.0);
                        trip.add(2 * a + i, 2 * b + j, k / 6.0);
                        trip.add(2 * b + i, 2 * a + j, k / 6.0);
                    }
                }
            }
        }
    }

    let mut constrained = Vec::new();
    for node in mesh.tagged_nodes(BoundaryTag::Down) {
        if bc.down == Support::Clamped {
            constrained.push((2 * node, 0.0));
        }
        constrained.push((2 * node + 1, 0.0));
    }
    if let Some(v) = bc.top_displacement {
        for node in mesh.tagged_nodes(BoundaryTag::Up) {
            constrained.push((2 * node + 1, v));
        }
    }
    constrained.sort_by_key(|c| c.0);
    constrained.dedup_by_key(|c| c.0);

    let mut matrix = trip.build();
    eliminate(&mut matrix, &mut rhs, &constrained);
    Ok(LinearSystem {
        matrix,
        rhs,
        constrained,
    })
}

/// Symmetric elimination of prescribed values: the column is moved to the
/// right-hand side, the row and column are zeroed and the diagonal kept.
fn eliminate(matrix: &mut CsrMatrix, rhs: &mut [f64], constrained: &[(usize, f64)]) {
    let mut is_fixed = vec![false; rhs.len()];
    for &(d, _) in constrained {
        is_fixed[d] = true;
    }
    for &(d, v) in constrained {
        let (cols, vals) = matrix.row(d);
        let entries: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
        for (i, aid) in entries {
            if i == d {
                continue;
            }
            if !is_fixed[i] {
                rhs[i] -= aid * v;
            }
            matrix.set(i, d, 0.0);
            matrix.set(d, i, 0.0);
        }
        let diag = matrix.get(d, d);
        let diag = if diag > 0.0 { diag } else { 1.0 };
        matrix.set(d, d, diag);
        rhs[d] = diag * v;
    }
}
