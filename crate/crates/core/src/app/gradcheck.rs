//! Finite-difference consistency of the damage functional's derivatives on
//! randomized small meshes.

use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::continuum::ElasticModuli;
use crate::error::Result;
use crate::fem::DamageFunctional;
use crate::material::{DamageLaw, DamageModel, MaterialParams};
use crate::mesh::{build_mesh, BoundaryTag, Mesh, MeshSizes, Rect};

/// Central-difference step in α.
const FD_STEP: f64 = 1e-5;

/// Largest relative deviations over all cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    pub cases: usize,
    /// Largest mesh used, in nodes.
    pub max_nodes: usize,
    /// `max_i |fd_i - g_i| / max_i |g_i|`, worst case.
    pub max_gradient_error: f64,
    /// `max_ij |fd_ij - H_ij| / max_ij |H_ij|`, worst case.
    pub max_hessian_error: f64,
}

impl GradcheckReport {
    pub fn passed(&self, gradient_tol: f64, hessian_tol: f64) -> bool {
        self.max_gradient_error <= gradient_tol && self.max_hessian_error <= hessian_tol
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cases: {} (up to {} nodes)", self.cases, self.max_nodes)?;
        writeln!(f, "gradient: max relative error {:.3e}", self.max_gradient_error)?;
        write!(f, "hessian: max relative error {:.3e}", self.max_hessian_error)
    }
}

/// Unit square on an `n × n` grid (n in 2..=6, at most 49 nodes) with
/// interior nodes jittered by up to a fifth of a cell.
pub fn random_mesh(rng: &mut impl Rng) -> Result<Mesh> {
    let n = rng.gen_range(2..=6);
    let h = 1.0 / n as f64;
    let base = build_mesh(&Rect::new(0.0, 1.0, 0.0, 1.0), &MeshSizes::uniform(h)?, None)?;
    let nodes = base
        .nodes()
        .iter()
        .map(|p| {
            let interior = p.iter().all(|c| *c > 1e-9 && *c < 1.0 - 1e-9);
            if interior {
                [p[0] + rng.gen_range(-0.2..0.2) * h, p[1] + rng.gen_range(-0.2..0.2) * h]
            } else {
                *p
            }
        })
        .collect();
    Mesh::with_tagger(nodes, base.triangles().to_vec(), h, h, |_| BoundaryTag::Lateral)
}

fn random_params(rng: &mut impl Rng, case: usize) -> Result<MaterialParams> {
    let model = match case % 4 {
        0 => DamageModel::Model1,
        1 => DamageModel::Model2,
        2 => DamageModel::Model3 { p: [1.0, 2.0, 4.0][rng.gen_range(0..3)] },
        _ => DamageModel::Model4 { k: rng.gen_range(1.5..4.0) },
    };
    MaterialParams::new(
        ElasticModuli::new(2.9e10, rng.gen_range(0.1..0.45))?,
        DamageLaw::new(model, rng.gen_range(1e2..1e4))?,
        1e6,
        rng.gen_range(0.05..0.5),
        rng.gen_range(0.5..1.5),
        1e-6,
    )
}

/// Compare the analytic gradient and Hessian of the damage functional with
/// central differences of the objective and gradient on `cases` random
/// instances.
pub fn gradcheck(seed: u64, cases: usize) -> Result<GradcheckReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = GradcheckReport {
        cases,
        max_nodes: 0,
        max_gradient_error: 0.0,
        max_hessian_error: 0.0,
    };
    for case in 0..cases {
        let mesh = random_mesh(&mut rng)?;
        let n = mesh.node_count();
        report.max_nodes = report.max_nodes.max(n);
        let params = random_params(&mut rng, case)?;
        let u: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let f = DamageFunctional::new(&mesh, &u, &params)?;
        let g = f.gradient(&alpha);
        let h = f.hessian(&alpha).to_dense();
        let gscale = g.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        let hscale = h.iter().flatten().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        let (mut gerr, mut herr) = (0.0f64, 0.0f64);
        for i in 0..n {
            let mut ap = alpha.clone();
            let mut am = alpha.clone();
            ap[i] += FD_STEP;
            am[i] -= FD_STEP;
            let fd = (f.objective(&ap) - f.objective(&am)) / (2.0 * FD_STEP);
            gerr = gerr.max((fd - g[i]).abs());
            let gp = f.gradient(&ap);
            let gm = f.gradient(&am);
            for j in 0..n {
                let fd = (gp[j] - gm[j]) / (2.0 * FD_STEP);
                herr = herr.max((fd - h[j][i]).abs());
            }
        }
        report.max_gradient_error = report.max_gradient_error.max(gerr / gscale);
        report.max_hessian_error = report.max_hessian_error.max(herr / hscale);
    }
    Ok(report)
}
