//! Quasi-static evolution: a sequence of loading steps chained through the
//! irreversibility lower bound.

use super::alternate::solve_step;
use super::{ErrorHistory, SolverConfig, State};
use crate::error::{check_len, Error, Result};
use crate::fem::{criterion_residual, BodyLoads, ElasticBoundary};
use crate::material::MaterialParams;
use crate::mesh::{build_mesh, excavate, transfer_damage, CavitySequence, Mesh, MeshSizes, Rect};

/// Straight band of initial damage around the segment `from`–`to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedBand {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub half_width: f64,
    pub value: f64,
}

impl SeedBand {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::invalid("half_width", format!("must be > 0, got {}", self.half_width)));
        }
        if !(0.0..=1.0).contains(&self.value) {
            return Err(Error::invalid("value", format!("must lie in [0, 1], got {}", self.value)));
        }
        Ok(())
    }

    /// Distance from `p` to the band's centre segment.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let d = [self.to[0] - self.from[0], self.to[1] - self.from[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (((p[0] - self.from[0]) * d[0] + (p[1] - self.from[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [self.from[0] + t * d[0], self.from[1] + t * d[1]];
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    /// Raise `alpha` to the seed value inside the band.
    pub fn apply(&self, mesh: &Mesh, alpha: &mut [f64]) {
        for (a, p) in alpha.iter_mut().zip(mesh.nodes()) {
            if self.distance(*p) <= self.half_width {
                *a = a.max(self.value);
            }
        }
    }
}

/// How the domain is loaded over time.
#[derive(Debug, Clone, PartialEq)]
pub enum Loading {
    /// Growing cavity at the base of a gravity-loaded, laterally confined
    /// block; the mesh is rebuilt at every step.
    Excavation {
        bounds: Rect,
        sizes: MeshSizes,
        cavities: CavitySequence,
    },
    /// Fixed mesh, clamped base, top displaced downwards by `rate * t` at
    /// `t = dt, 2 dt, ...`.
    Compression {
        bounds: Rect,
        sizes: MeshSizes,
        rate: f64,
        dt: f64,
        steps: usize,
    },
}

impl Loading {
    pub fn steps(&self) -> usize {
        match self {
            Loading::Excavation { cavities, .. } => cavities.len(),
            Loading::Compression { steps, .. } => *steps,
        }
    }
}

/// Everything needed for a run besides the solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub loading: Loading,
    pub params: MaterialParams,
    pub loads: BodyLoads,
    pub seeds: Vec<SeedBand>,
}

/// Converged state of one step together with the bound it respected.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub mesh: Mesh,
    /// Irreversibility bound of this step (transferred previous damage).
    pub lower: Vec<f64>,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evolution {
    pub steps: Vec<StepResult>,
    pub history: ErrorHistory,
}

/// A run that stopped on an error; `partial` holds the completed steps.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Evolution,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} completed steps)", self.error, self.partial.steps.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn step_setup(program: &Program, step: usize) -> Result<(Mesh, ElasticBoundary)> {
    match &program.loading {
        Loading::Excavation {
            bounds,
            sizes,
            cavities,
        } => Ok((excavate(bounds, sizes, cavities, step)?, ElasticBoundary::caving())),
        Loading::Compression {
            bounds,
            sizes,
            rate,
            dt,
            ..
        } => {
            let t = (step + 1) as f64 * dt;
            Ok((build_mesh(bounds, sizes, None)?, ElasticBoundary::compression(-rate * t)))
        }
    }
}

/// Run all loading steps. The first step is bounded below by the seed
/// damage; each later step by the previous damage carried to its mesh.
pub fn run_quasi_static(program: &Program, cfg: &SolverConfig) -> std::result::Result<Evolution, RunFailure> {
    let mut evolution = Evolution::default();
    let fail = |error, partial| RunFailure { error, partial };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, evolution));
    }
    if let Some(e) = program.seeds.iter().find_map(|s| s.validate().err()) {
        return Err(fail(e, evolution));
    }
    if program.loading.steps() == 0 {
        return Err(fail(Error::invalid("steps", "at least one loading step is required"), evolution));
    }
    let fixed_mesh = matches!(program.loading, Loading::Compression { .. });
    for step in 0..program.loading.steps() {
        let outcome = (|| -> Result<StepResult> {
            let (mesh, bc) = match (fixed_mesh, evolution.steps.last()) {
                (true, Some(prev)) => {
                    let (_, bc) = step_setup(program, step)?;
                    (prev.mesh.clone(), bc)
                }
                _ => step_setup(program, step)?,
            };
            let lower = match evolution.steps.last() {
                None => {
                    let mut seed = vec![0.0; mesh.node_count()];
                    for s in &program.seeds {
                        s.apply(&mesh, &mut seed);
                    }
                    seed
                }
                Some(prev) if fixed_mesh => prev.state.alpha.clone(),
                Some(prev) => transfer_damage(&prev.mesh, &prev.state.alpha, &mesh)?,
            };
            let out = solve_step(&mesh, &lower, &program.params, &program.loads, &bc, cfg, step)?;
            evolution.history.steps.push(out.history);
            Ok(StepResult {
                mesh,
                lower,
                state: out.state,
            })
        })();
        match outcome {
            Ok(r) => {
                log::info!(
                    "step {step}: {} nodes, {} outer iterations, max alpha {:.4}",
                    r.mesh.node_count(),
                    evolution.history.steps.last().map_or(0, |h| h.iterations()),
                    r.state.alpha.iter().fold(0.0f64, |m, a| m.max(*a))
                );
                evolution.steps.push(r);
            }
            Err(e) => return Err(fail(e, evolution)),
        }
    }
    Ok(evolution)
}

/// Outcome of checking the discrete damage criterion at a solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// Nodes below full damage whose criterion residual is below `-tol`.
    pub criterion_violations: usize,
    /// Nodes below full damage where `|r (α - lower)| > tol max(1, |r|)`.
    pub complementarity_violations: usize,
    /// Largest `-r` over nodes below full damage.
    pub worst_criterion: f64,
    /// Largest `|r (α - lower)| / max(1, |r|)` over nodes below full damage.
    pub worst_complementarity: f64,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.criterion_violations == 0 && self.complementarity_violations == 0
    }
}

/// Check the damage criterion and its complementarity with the
/// irreversibility bound. Fully damaged nodes carry an upper-bound
/// multiplier and are exempt.
pub fn check_kkt(
    mesh: &Mesh,
    u: &[f64],
    alpha: &[f64],
    lower: &[f64],
    params: &MaterialParams,
    tol: f64,
) -> Result<KktReport> {
    check_len("lower", lower.len(), mesh.node_count())?;
    let r = criterion_residual(mesh, u, alpha, params)?;
    let mut report = KktReport::default();
    for n in 0..r.len() {
        if alpha[n] >= 1.0 {
            continue;
        }
        report.worst_criterion = report.worst_criterion.max(-r[n]);
        if r[n] < -tol {
            report.criterion_violations += 1;
        }
        let comp = (r[n] * (alpha[n] - lower[n])).abs() / r[n].abs().max(1.0);
        report.worst_complementarity = report.worst_complementarity.max(comp);
        if comp > tol {
            report.complementarity_violations += 1;
        }
    }
    Ok(report)
}
