//! Triangle meshes of box-with-cavity domains.
//!
//! Nodal fields are plain `Vec<f64>`: one value per node for damage, two
//! interleaved values `[ux0, uy0, ux1, uy1, ...]` for displacement. The
//! second coordinate is the vertical one.

mod cavity;
mod generate;
mod transfer;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use cavity::{excavate, CavitySequence};
pub use generate::{build_mesh, MeshSizes};
pub use transfer::{transfer_damage, PointLocator};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.is_empty()
            || (other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1)
    }

    /// Distance from `p` to the boundary of the rectangle.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        let inside = p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1;
        if inside {
            (p[0] - self.x0)
                .min(self.x1 - p[0])
                .min(p[1] - self.y0)
                .min(self.y1 - p[1])
        } else {
            let dx = (self.x0 - p[0]).max(p[0] - self.x1).max(0.0);
            let dy = (self.y0 - p[1]).max(p[1] - self.y1).max(0.0);
            dx.hypot(dy)
        }
    }
}

/// Boundary region a facet belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Lateral,
    Up,
    Down,
    Cavity,
}

/// A boundary edge. `nodes` follow the counter-clockwise orientation of the
/// owning triangle, so the outward normal is `(dy, -dx) / len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Area and constant gradients of the three barycentric basis functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad: [[f64; 2]; 3],
}

impl ElementGeometry {
    fn compute(p: [[f64; 2]; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grad = [[0.0; 2]; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            grad[i] = [(p[j][1] - p[k][1]) / det, (p[k][0] - p[j][0]) / det];
        }
        ElementGeometry {
            area: 0.5 * det,
            grad,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<BoundaryFacet>,
    geometry: Vec<ElementGeometry>,
    h_coarse: f64,
    h_fine: f64,
}

impl Mesh {
    /// Assemble a mesh from raw parts and check every validity invariant.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        facets: Vec<BoundaryFacet>,
        h_coarse: f64,
        h_fine: f64,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut geometry = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Geometry(format!("triangle {e} references a missing node")));
            }
            geometry.push(ElementGeometry::compute([nodes[t[0]], nodes[t[1]], nodes[t[2]]]));
        }
        let mesh = Mesh {
            nodes,
            triangles,
            facets,
            geometry,
            h_coarse,
            h_fine,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Build a mesh and tag its boundary edges with `tagger(midpoint)`.
    pub fn with_tagger(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        h_coarse: f64,
        h_fine: f64,
        tagger: impl Fn([f64; 2]) -> BoundaryTag,
    ) -> Result<Self> {
        let facets = boundary_edges(&triangles)
            .into_iter()
            .map(|[a, b]| {
                let m = midpoint(nodes[a], nodes[b]);
                BoundaryFacet {
                    nodes: [a, b],
                    tag: tagger(m),
                }
            })
            .collect();
        Mesh::new(nodes, triangles, facets, h_coarse, h_fine)
    }

    /// Check orientation, node ranges, degeneracy and facet tagging.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.triangles.is_empty() {
            return Err(Error::Geometry("mesh has no triangles".into()));
        }
        let min_area = 1e-12 * self.h_fine * self.h_fine;
        for (e, (t, g)) in self.triangles.iter().zip(&self.geometry).enumerate() {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Geometry(format!("triangle {e} references a missing node")));
            }
            if !(g.area > min_area) {
                return Err(Error::Geometry(format!(
                    "triangle {e} is degenerate or inverted (area {:e})",
                    g.area
                )));
            }
        }
        let boundary = boundary_edges(&self.triangles);
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.facets {
            let [a, b] = f.nodes;
            if a >= n || b >= n {
                return Err(Error::Geometry("facet references a missing node".into()));
            }
            *tagged.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        if tagged.values().any(|&c| c != 1) {
            return Err(Error::Geometry("a boundary facet carries more than one tag".into()));
        }
        if tagged.len() != boundary.len()
            || boundary
                .iter()
                .any(|&[a, b]| !tagged.contains_key(&(a.min(b), a.max(b))))
        {
            return Err(Error::Geometry(
                "tagged facets do not match the boundary edges".into(),
            ));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn geometry(&self, element: usize) -> &ElementGeometry {
        &self.geometry[element]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn h_coarse(&self) -> f64 {
        self.h_coarse
    }

    pub fn h_fine(&self) -> f64 {
        self.h_fine
    }

    pub fn area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Bounding box of the nodes.
    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.nodes {
            r.x0 = r.x0.min(p[0]);
            r.x1 = r.x1.max(p[0]);
            r.y0 = r.y0.min(p[1]);
            r.y1 = r.y1.max(p[1]);
        }
        r
    }

    /// Maximum vertical coordinate.
    pub fn max_height(&self) -> f64 {
        self.nodes.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Row-sum lumped mass: a third of each adjacent triangle's area.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nodes.len()];
        for (t, g) in self.triangles.iter().zip(&self.geometry) {
            for &i in t {
                m[i] += g.area / 3.0;
            }
        }
        m
    }

    /// Nodes lying on a facet with the given tag, sorted.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .facets
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| f.nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn facet_length(&self, f: &BoundaryFacet) -> f64 {
        let [a, b] = f.nodes;
        let (p, q) = (self.nodes[a], self.nodes[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    pub fn facet_normal(&self, f: &BoundaryFacet) -> [f64; 2] {
        let [a, b] = f.nodes;
        let (p, q) = (self.nodes[a], self.nodes[b]);
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let len = dx.hypot(dy);
        [dy / len, -dx / len]
    }
}

pub(crate) fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Edges used by exactly one triangle, in counter-clockwise orientation of
/// that triangle, in order of first appearance.
pub(crate) fn boundary_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                out.push([a, b]);
            }
        }
    }
    out
}
