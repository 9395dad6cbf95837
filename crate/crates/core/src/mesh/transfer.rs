use super::Mesh;
use crate::error::{check_len, Error, Result};

/// Bucketed point location on a triangle mesh.
#[derive(Debug)]
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    origin: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    bins: Vec<Vec<usize>>,
    tol: f64,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let bb = mesh.bounding_box();
        let tol = 1e-10 * bb.diameter();
        let side = ((mesh.element_count() as f64).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell = [
            (bb.width() / side as f64).max(f64::MIN_POSITIVE),
            (bb.height() / side as f64).max(f64::MIN_POSITIVE),
        ];
        let origin = [bb.x0, bb.y0];
        let mut bins = vec![Vec::new(); side * side];
        let loc = PointLocator {
            mesh,
            origin,
            cell,
            dims,
            bins: Vec::new(),
            tol,
        };
        for (e, t) in mesh.triangles().iter().enumerate() {
            let p = t.map(|i| mesh.nodes()[i]);
            let lo = loc.bin_of([
                p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min) - tol,
                p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min) - tol,
            ]);
            let hi = loc.bin_of([
                p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max) + tol,
                p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max) + tol,
            ]);
            for by in lo[1]..=hi[1] {
                for bx in lo[0]..=hi[0] {
                    bins[by * side + bx].push(e);
                }
            }
        }
        PointLocator { bins, ..loc }
    }

    fn bin_of(&self, p: [f64; 2]) -> [usize; 2] {
        let f = |k: usize| {
            let v = ((p[k] - self.origin[k]) / self.cell[k]).floor();
            (v.max(0.0) as usize).min(self.dims[k] - 1)
        };
        [f(0), f(1)]
    }

    /// Lowest-index triangle containing `p` (within tolerance) and the
    /// clamped, renormalized barycentric coordinates of `p` in it.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let [bx, by] = self.bin_of(p);
        let candidates = &self.bins[by * self.dims[0] + bx];
        // bins are filled in element order, so the first hit has the lowest index
        candidates.iter().find_map(|&e| {
            let t = self.mesh.triangles()[e];
            let g = self.mesh.geometry(e);
            let mut lam = [0.0; 3];
            for i in 0..3 {
                let xi = self.mesh.nodes()[t[i]];
                lam[i] = 1.0 + g.grad[i][0] * (p[0] - xi[0]) + g.grad[i][1] * (p[1] - xi[1]);
                let dist = lam[i] / g.grad[i][0].hypot(g.grad[i][1]);
                if dist < -self.tol {
                    return None;
                }
            }
            lam.iter_mut().for_each(|l| *l = l.max(0.0));
            let s: f64 = lam.iter().sum();
            Some((e, lam.map(|l| l / s)))
        })
    }

    /// Closest point of the boundary to `p`: facet index and the parameter
    /// along it.
    fn nearest_boundary(&self, p: [f64; 2]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, f) in self.mesh.facets().iter().enumerate() {
            let a = self.mesh.nodes()[f.nodes[0]];
            let b = self.mesh.nodes()[f.nodes[1]];
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
            let q = [a[0] + t * d[0], a[1] + t * d[1]];
            let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
            if best.is_none_or(|(_, _, bd)| dist < bd) {
                best = Some((k, t, dist));
            }
        }
        best.map(|(k, t, _)| (k, t))
    }

    /// P1 interpolation of a nodal scalar field at `p`; points outside the
    /// mesh take the value at the nearest boundary point.
    pub fn interpolate(&self, field: &[f64], p: [f64; 2]) -> f64 {
        if let Some((e, lam)) = self.locate(p) {
            let t = self.mesh.triangles()[e];
            return lam[0] * field[t[0]] + lam[1] * field[t[1]] + lam[2] * field[t[2]];
        }
        match self.nearest_boundary(p) {
            Some((k, t)) => {
                let f = self.mesh.facets()[k];
                (1.0 - t) * field[f.nodes[0]] + t * field[f.nodes[1]]
            }
            None => 0.0,
        }
    }
}

/// Interpolate the damage of `old` onto the nodes of `new`, clamped to
/// `[0, 1]`. The result serves as the irreversibility lower bound on `new`.
pub fn transfer_damage(old: &Mesh, old_alpha: &[f64], new: &Mesh) -> Result<Vec<f64>> {
    if old.node_count() == 0 || old.element_count() == 0 {
        return Err(Error::Geometry("cannot transfer from an empty mesh".into()));
    }
    check_len("alpha", old_alpha.len(), old.node_count())?;
    let locator = PointLocator::new(old);
    Ok(new
        .nodes()
        .iter()
        .map(|&p| locator.interpolate(old_alpha, p).clamp(0.0, 1.0))
        .collect())
}
