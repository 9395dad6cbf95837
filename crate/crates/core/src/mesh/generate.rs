use super::{boundary_edges, midpoint, BoundaryFacet, BoundaryTag, Mesh, Rect};
use crate::error::{Error, Result};

/// Growth ratio of consecutive cells leaving the refined zone.
const GRADING_RATIO: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSizes {
    pub h_coarse: f64,
    pub h_fine: f64,
    /// Width of the refined zone around the cavity.
    pub band: f64,
}

impl MeshSizes {
    pub fn new(h_coarse: f64, h_fine: f64, band: f64) -> Result<Self> {
        let s = MeshSizes {
            h_coarse,
            h_fine,
            band,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform(h: f64) -> Result<Self> {
        MeshSizes::new(h, h, h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_fine > 0.0 && self.h_coarse > 0.0) {
            return Err(Error::Geometry("mesh sizes must be positive".into()));
        }
        if self.h_fine > self.h_coarse {
            return Err(Error::Geometry(format!(
                "h_fine ({}) must not exceed h_coarse ({})",
                self.h_fine, self.h_coarse
            )));
        }
        if !(self.band > 0.0) {
            return Err(Error::Geometry("refinement band must be positive".into()));
        }
        Ok(())
    }
}

/// Grid lines of one axis. Inside `fine` the lines sit on the lattice
/// `lo + k h_fine` (so that successive meshes share nodes), with `breaks`
/// inserted exactly; outside, cells grow geometrically up to `h_coarse`.
fn axis_lines(lo: f64, hi: f64, fine: Option<(f64, f64)>, breaks: &[f64], hf: f64, hc: f64) -> Vec<f64> {
    let len = hi - lo;
    let eps = 1e-9 * hf;
    let Some((fl, fh)) = fine else {
        let n = ((len / hc) - 1e-9).ceil().max(1.0) as usize;
        return (0..=n).map(|i| if i == n { hi } else { lo + len * i as f64 / n as f64 }).collect();
    };

    let snap_down = |x: f64| lo + ((x - lo) / hf + 1e-9).floor() * hf;
    let snap_up = |x: f64| lo + ((x - lo) / hf - 1e-9).ceil() * hf;
    let mut fl = snap_down(fl.max(lo)).max(lo);
    let mut fh = snap_up(fh.min(hi)).min(hi);
    // do not leave slivers of coarse zone against the domain edge
    if fl - lo < 0.5 * hf {
        fl = lo;
    }
    if hi - fh < 0.5 * hf {
        fh = hi;
    }

    let mut pts: Vec<f64> = Vec::new();
    let k0 = ((fl - lo) / hf).round() as i64;
    let k1 = ((fh - lo) / hf).round() as i64;
    for k in k0..=k1 {
        let x = lo + k as f64 * hf;
        if x < fl - eps || x > fh + eps {
            continue;
        }
        if breaks.iter().any(|&b| (b - x).abs() < 0.3 * hf && (b - x).abs() > eps) {
            continue;
        }
        pts.push(x);
    }
    pts.push(fl);
    pts.push(fh);
    pts.extend(breaks.iter().copied().filter(|&b| b > fl + eps && b < fh - eps));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= eps);

    // keep every fine cell at most h_fine wide
    let mut fine_pts = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        fine_pts.push(w[0]);
        let gap = w[1] - w[0];
        let parts = (gap / hf - 1e-9).ceil().max(1.0) as usize;
        for j in 1..parts {
            fine_pts.push(w[0] + gap * j as f64 / parts as f64);
        }
    }
    fine_pts.push(*pts.last().unwrap());

    let graded = |length: f64| -> Vec<f64> {
        // cumulative offsets from the fine zone edge
        if length <= eps {
            return Vec::new();
        }
        let mut sizes = Vec::new();
        let mut total = 0.0;
        let mut h = hf;
        while total < length - eps {
            h = (h * GRADING_RATIO).min(hc);
            sizes.push(h);
            total += h;
        }
        let scale = length / total;
        let mut acc = 0.0;
        sizes
            .iter()
            .map(|s| {
                acc += s * scale;
                acc
            })
            .collect()
    };

    let mut lines: Vec<f64> = graded(fl - lo).into_iter().map(|d| fl - d).collect();
    lines.reverse();
    if let Some(first) = lines.first_mut() {
        *first = lo;
    }
    lines.extend(fine_pts);
    let upper = graded(hi - fh);
    let m = upper.len();
    lines.extend(upper.into_iter().enumerate().map(|(i, d)| if i + 1 == m { hi } else { fh + d }));
    lines.dedup_by(|a, b| (*a - *b).abs() <= eps);
    lines
}

fn validate_cavity(bounds: &Rect, cavity: &Rect) -> Result<()> {
    let ok = cavity.x0 > bounds.x0
        && cavity.x1 < bounds.x1
        && cavity.y0 >= bounds.y0
        && cavity.y1 < bounds.y1;
    if ok {
        Ok(())
    } else {
        Err(Error::Geometry(format!(
            "cavity {cavity:?} must lie inside {bounds:?} (it may only touch the bottom)"
        )))
    }
}

/// Triangulate `bounds` minus `cavity` on a tensor-product grid that is
/// refined to `h_fine` within `band` of the cavity and graded up to
/// `h_coarse` elsewhere. Each cell is split into two right triangles with
/// alternating diagonals.
pub fn build_mesh(bounds: &Rect, sizes: &MeshSizes, cavity: Option<&Rect>) -> Result<Mesh> {
    sizes.validate()?;
    if bounds.is_empty() || !bounds.area().is_finite() {
        return Err(Error::Geometry(format!("empty or invalid bounds {bounds:?}")));
    }
    let cavity = cavity.filter(|c| !c.is_empty());
    if let Some(c) = cavity {
        validate_cavity(bounds, c)?;
    }

    let (hf, hc) = (sizes.h_fine, sizes.h_coarse);
    let (xs, ys) = match cavity {
        Some(c) => (
            axis_lines(bounds.x0, bounds.x1, Some((c.x0 - sizes.band, c.x1 + sizes.band)), &[c.x0, c.x1], hf, hc),
            axis_lines(bounds.y0, bounds.y1, Some((c.y0 - sizes.band, c.y1 + sizes.band)), &[c.y0, c.y1], hf, hc),
        ),
        None if hf == hc => (
            axis_lines(bounds.x0, bounds.x1, None, &[], hf, hc),
            axis_lines(bounds.y0, bounds.y1, None, &[], hf, hc),
        ),
        None => (
            axis_lines(bounds.x0, bounds.x1, None, &[], hc, hc),
            axis_lines(bounds.y0, bounds.y1, None, &[], hc, hc),
        ),
    };
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);

    let removed = |i: usize, j: usize| {
        cavity.is_some_and(|c| {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            cx > c.x0 && cx < c.x1 && cy > c.y0 && cy < c.y1
        })
    };

    let mut used = vec![false; (nx + 1) * (ny + 1)];
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            if !removed(i, j) {
                for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    used[grid(a, b)] = true;
                }
            }
        }
    }
    let mut index = vec![usize::MAX; used.len()];
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[grid(i, j)] {
                index[grid(i, j)] = nodes.len();
                nodes.push([xs[i], ys[j]]);
            }
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if removed(i, j) {
                continue;
            }
            let n00 = index[grid(i, j)];
            let n10 = index[grid(i + 1, j)];
            let n01 = index[grid(i, j + 1)];
            let n11 = index[grid(i + 1, j + 1)];
            if (i + j) % 2 == 0 {
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            } else {
                triangles.push([n00, n10, n01]);
                triangles.push([n10, n11, n01]);
            }
        }
    }

    let tol = 1e-9 * bounds.diameter();
    let on_cavity = |p: [f64; 2]| cavity.is_some_and(|c| c.boundary_distance(p) <= tol);
    let mut facets = Vec::new();
    for [a, b] in boundary_edges(&triangles) {
        let (p, q) = (nodes[a], nodes[b]);
        let m = midpoint(p, q);
        let tag = if on_cavity(p) && on_cavity(q) && on_cavity(m) {
            BoundaryTag::Cavity
        } else if (m[1] - bounds.y0).abs() <= tol {
            BoundaryTag::Down
        } else if (m[1] - bounds.y1).abs() <= tol {
            BoundaryTag::Up
        } else if (m[0] - bounds.x0).abs() <= tol || (m[0] - bounds.x1).abs() <= tol {
            BoundaryTag::Lateral
        } else {
            return Err(Error::Geometry(format!("boundary edge at {m:?} matches no region")));
        };
        facets.push(BoundaryFacet { nodes: [a, b], tag });
    }

    Mesh::new(nodes, triangles, facets, hc, hf)
}
