//! Alternate minimization at one loading step, plain and relaxed.

use std::time::Instant;

use super::damage::{minimize_damage_from, DamageSolverOptions};
use super::{solve_linear_with, Algorithm, SolverConfig, State, StepHistory};
use crate::error::{check_len, Error, Result};
use crate::fem::{assemble_elasticity, BodyLoads, DamageFunctional, ElasticBoundary};
use crate::material::MaterialParams;
use crate::mesh::Mesh;

/// Converged (or capped) pair of one loading step with its history.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub history: StepHistory,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Plain alternate minimization starting from and bounded below by
/// `lower`.
pub fn alternate_step(
    mesh: &Mesh,
    lower: &[f64],
    params: &MaterialParams,
    loads: &BodyLoads,
    bc: &ElasticBoundary,
    cfg: &SolverConfig,
    step: usize,
) -> Result<StepOutcome> {
    let cfg = SolverConfig {
        algorithm: Algorithm::Alternate,
        ..*cfg
    };
    solve_step(mesh, lower, params, loads, bc, &cfg, step)
}

/// Alternate minimization with the error-triggered relaxation
/// `α ← C_L α_prev + (1 - C_L) α`.
pub fn fast_alternate_step(
    mesh: &Mesh,
    lower: &[f64],
    params: &MaterialParams,
    loads: &BodyLoads,
    bc: &ElasticBoundary,
    cfg: &SolverConfig,
    step: usize,
) -> Result<StepOutcome> {
    let cfg = SolverConfig {
        algorithm: Algorithm::Fast,
        ..*cfg
    };
    solve_step(mesh, lower, params, loads, bc, &cfg, step)
}

/// One loading step with the algorithm selected in `cfg`.
///
/// The outer error starts at 1. In the relaxed variant a new iterate whose
/// error exceeds the previous accepted error is blended with the previous
/// iterate until it no longer does (or the blend cap is reached); the
/// comparison baseline stays fixed while blending and the displacement is
/// not re-solved. When the loop stops on a blended iterate, the returned
/// damage is that iteration's unblended minimizer, which is the field that
/// satisfies the damage criterion for the returned displacement.
pub fn solve_step(
    mesh: &Mesh,
    lower: &[f64],
    params: &MaterialParams,
    loads: &BodyLoads,
    bc: &ElasticBoundary,
    cfg: &SolverConfig,
    step: usize,
) -> Result<StepOutcome> {
    cfg.validate()?;
    check_len("lower", lower.len(), mesh.node_count())?;
    if let Some(&value) = lower.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::DamageDomain { value });
    }
    let opts = DamageSolverOptions {
        tol_kkt: cfg.tol_kkt,
        ..Default::default()
    };
    let mut history = StepHistory {
        step,
        ..Default::default()
    };
    let mut alpha_prev = lower.to_vec();
    let mut err_prev = 1.0;
    let mut result = None;

    for _ in 0..cfg.max_outer {
        let clock = Instant::now();
        let sys = assemble_elasticity(mesh, &alpha_prev, params, loads, bc)?;
        let u = solve_linear_with(&sys, cfg.tol_lin, cfg.linear_solver)?;
        let functional = DamageFunctional::new(mesh, &u, params)?;
        let minimizer = minimize_damage_from(&functional, lower, &alpha_prev, &opts)?;
        let mut err = sup_distance(&alpha_prev, &minimizer.alpha);

        let mut accepted = minimizer.alpha.clone();
        let mut blends = 0;
        if cfg.algorithm == Algorithm::Fast {
            while err > err_prev && blends < cfg.max_inner_relax {
                for (a, p) in accepted.iter_mut().zip(&alpha_prev) {
                    *a = cfg.c_l * p + (1.0 - cfg.c_l) * *a;
                }
                err = sup_distance(&alpha_prev, &accepted);
                blends += 1;
            }
            if err > err_prev {
                history.relax_cap_hit = true;
            }
        }
        let objective = if blends == 0 {
            minimizer.objective
        } else {
            functional.objective(&accepted)
        };

        history.errors.push(err);
        history.blends.push(blends);
        history.objectives.push(objective);
        history.elapsed.push(if cfg.record_time {
            clock.elapsed().as_secs_f64()
        } else {
            0.0
        });

        if err <= cfg.tol_outer {
            history.converged = true;
            result = Some(State {
                u,
                alpha: minimizer.alpha,
                step,
            });
            break;
        }
        err_prev = err;
        result = Some(State {
            u,
            alpha: minimizer.alpha,
            step,
        });
        alpha_prev = accepted;
    }
    let state = result.expect("max_outer >= 1 guarantees one iteration");
    if !history.converged {
        log::warn!(
            "step {step}: outer loop stopped after {} iterations with error {:.3e}",
            history.iterations(),
            history.errors.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(StepOutcome { state, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::ElasticModuli;
    use crate::material::{DamageLaw, DamageModel};
    use crate::mesh::{build_mesh, MeshSizes, Rect};

    fn params(model: DamageModel) -> MaterialParams {
        MaterialParams::new(
            ElasticModuli::new(2.9e10, 0.3).unwrap(),
            DamageLaw::new(model, 1e3).unwrap(),
            1e6,
            0.02,
            1.0,
            1e-6,
        )
        .unwrap()
    }

    fn block() -> Mesh {
        build_mesh(&Rect::new(0.0, 0.1, 0.0, 0.2), &MeshSizes::uniform(0.02).unwrap(), None).unwrap()
    }

    #[test]
    fn unloaded_domain_is_a_fixed_point() {
        let m = block();
        let zero = vec![0.0; m.node_count()];
        for alg in [Algorithm::Alternate, Algorithm::Fast] {
            let cfg = SolverConfig {
                algorithm: alg,
                ..Default::default()
            };
            let out = solve_step(
                &m,
                &zero,
                &params(DamageModel::Model1),
                &BodyLoads::none(),
                &ElasticBoundary::caving(),
                &cfg,
                0,
            )
            .unwrap();
            assert_eq!(out.history.errors, vec![0.0]);
            assert!(out.history.converged);
            assert_eq!(out.state.alpha, zero);
            assert!(out.state.u.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn compressed_block_converges_within_bounds() {
        let m = block();
        let lower: Vec<f64> = m.nodes().iter().map(|p| if (p[1] - 2.0 * p[0]).abs() < 0.015 { 0.5 } else { 0.0 }).collect();
        for model in [DamageModel::Model1, DamageModel::Model2] {
            for alg in [Algorithm::Alternate, Algorithm::Fast] {
                let cfg = SolverConfig {
                    algorithm: alg,
                    ..Default::default()
                };
                let out = solve_step(
                    &m,
                    &lower,
                    &params(model),
                    &BodyLoads::none(),
                    &ElasticBoundary::compression(-2e-4),
                    &cfg,
                    1,
                )
                .unwrap();
                assert!(out.history.converged);
                assert!(out.state.alpha.iter().zip(&lower).all(|(a, l)| a >= l && *a <= 1.0));
                if alg == Algorithm::Fast {
                    assert_eq!(out.history.nonmonotone_steps(), 0);
                }
            }
        }
    }

    #[test]
    fn blend_arithmetic() {
        let c_l = 0.9;
        let blended: f64 = c_l * 0.2 + (1.0 - c_l) * 0.6;
        assert!((blended - 0.24).abs() < 1e-15);
    }
}
