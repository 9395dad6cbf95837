use super::{build_mesh, Mesh, MeshSizes, Rect};
use crate::error::{Error, Result};

/// Nested sequence of excavated regions, one per excavation step.
#[derive(Debug, Clone, PartialEq)]
pub struct CavitySequence {
    regions: Vec<Rect>,
}

impl CavitySequence {
    pub fn new(regions: Vec<Rect>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::Geometry("cavity sequence needs at least one step".into()));
        }
        for (i, w) in regions.windows(2).enumerate() {
            if !w[1].contains_rect(&w[0]) {
                return Err(Error::Geometry(format!(
                    "cavity {} is not contained in cavity {}",
                    i,
                    i + 1
                )));
            }
        }
        Ok(CavitySequence { regions })
    }

    /// Rectangle centred at `center_x` standing on `base`, whose width and
    /// height grow linearly from the first to the last step.
    pub fn linear(
        center_x: f64,
        base: f64,
        width: (f64, f64),
        height: (f64, f64),
        steps: usize,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Geometry("cavity sequence needs at least one step".into()));
        }
        let regions = (0..steps)
            .map(|i| {
                let t = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
                let w = width.0 + t * (width.1 - width.0);
                let h = height.0 + t * (height.1 - height.0);
                Rect::new(center_x - 0.5 * w, center_x + 0.5 * w, base, base + h)
            })
            .collect();
        CavitySequence::new(regions)
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region(&self, step: usize) -> &Rect {
        &self.regions[step]
    }

    pub fn regions(&self) -> &[Rect] {
        &self.regions
    }
}

/// Fresh mesh of the domain left after excavation step `step`.
pub fn excavate(bounds: &Rect, sizes: &MeshSizes, seq: &CavitySequence, step: usize) -> Result<Mesh> {
    if step >= seq.len() {
        return Err(Error::Geometry(format!(
            "step {step} out of range for a {}-step sequence",
            seq.len()
        )));
    }
    build_mesh(bounds, sizes, Some(seq.region(step)))
}
