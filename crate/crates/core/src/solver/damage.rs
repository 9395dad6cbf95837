//! Bound-constrained minimization of the damage functional.
//!
//! Projected Newton with an epsilon-active set: nodes close to a bound whose
//! gradient pushes outward take a diagonally scaled gradient step, the rest
//! take a Newton step on a convexified Hessian, and the combined direction is
//! searched along the projection arc with an Armijo test. A diagonally scaled
//! projected gradient step is the fallback when the Newton arc fails.

use crate::error::{check_len, Error, Result};
use crate::fem::DamageFunctional;
use crate::material::MaterialParams;
use crate::mesh::Mesh;
use crate::sparse::EnvelopeCholesky;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageSolverOptions {
    /// Sup-norm tolerance on the projected criterion residual (Pa).
    pub tol_kkt: f64,
    pub max_iter: usize,
}

impl Default for DamageSolverOptions {
    fn default() -> Self {
        DamageSolverOptions {
            tol_kkt: 1e-3,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamageSolution {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    /// Sup norm of the projected criterion residual at `alpha`.
    pub projected_gradient: f64,
    pub objective: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const MAX_EXPANSION: usize = 30;

/// Per-node feasible interval. Nodes whose lower bound reaches the law's
/// upper limit are pinned and never move.
struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn new(f: &DamageFunctional, lower: &[f64]) -> Self {
        let limit = f.params().law.upper_limit();
        Bounds {
            lower: lower.to_vec(),
            upper: lower.iter().map(|l| l.max(limit)).collect(),
        }
    }

    fn pinned(&self, i: usize) -> bool {
        self.lower[i] >= self.upper[i]
    }

    fn clamp(&self, i: usize, v: f64) -> f64 {
        v.clamp(self.lower[i], self.upper[i])
    }

    fn clamp_all(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, &v)| self.clamp(i, v)).collect()
    }
}

/// Residual with the components that point out of the feasible box removed;
/// it vanishes exactly at a KKT point of the box-constrained problem.
fn project_residual(residual: &[f64], alpha: &[f64], b: &Bounds) -> Vec<f64> {
    residual
        .iter()
        .zip(alpha)
        .enumerate()
        .map(|(i, (&r, &a))| {
            if b.pinned(i) {
                0.0
            } else if a <= b.lower[i] {
                r.min(0.0)
            } else if a >= b.upper[i] {
                r.max(0.0)
            } else {
                r
            }
        })
        .collect()
}

/// Sup norm of the projected criterion residual of `f` at `alpha`, net of
/// what one rounding step in each nodal value can change it by.
pub fn projected_residual(f: &DamageFunctional, alpha: &[f64], lower: &[f64]) -> f64 {
    let b = Bounds::new(f, lower);
    stationarity(f, alpha, &b, &free_gradient(f, alpha, &b))
}

/// Gradient with the entries of pinned nodes zeroed: those nodes never
/// move, and their derivatives may be unbounded.
fn free_gradient(f: &DamageFunctional, x: &[f64], b: &Bounds) -> Vec<f64> {
    let mut g = f.gradient(x);
    for (i, gi) in g.iter_mut().enumerate() {
        if b.pinned(i) {
            *gi = 0.0;
        }
    }
    g
}

/// Projected residual with each component reduced by its floating-point
/// resolution. Close to full damage a law with a steep barrier changes the
/// residual by more than any fixed tolerance between adjacent doubles; no
/// representable iterate does better there.
fn stationarity(f: &DamageFunctional, x: &[f64], b: &Bounds, g: &[f64]) -> f64 {
    let mass = f.mass();
    let q2 = 2.0 * f.params().gradient_coefficient();
    let k_diag = f.stiffness().diagonal();
    let curvature = f.local_curvature(x);
    project_residual(&residual_of(g, mass), x, b)
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.abs() == 0.0 {
                return 0.0;
            }
            let slope = (curvature[i].abs() + q2 * k_diag[i]) / mass[i];
            (r.abs() - slope * f64::EPSILON * x[i].abs()).max(0.0)
        })
        .fold(0.0, f64::max)
}

fn check_bounds(v: &[f64]) -> Result<()> {
    match v.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        Some(&value) => Err(Error::DamageDomain { value }),
        None => Ok(()),
    }
}

/// Minimize the damage functional at fixed `u` over `lower <= α <= 1`,
/// starting from the lower bound.
pub fn minimize_damage(
    mesh: &Mesh,
    u: &[f64],
    lower: &[f64],
    params: &MaterialParams,
    tol_kkt: f64,
) -> Result<Vec<f64>> {
    let f = DamageFunctional::new(mesh, u, params)?;
    let opts = DamageSolverOptions {
        tol_kkt,
        ..Default::default()
    };
    Ok(minimize_damage_from(&f, lower, lower, &opts)?.alpha)
}

/// Minimize from a warm start. The result never has a larger objective
/// than the lower bound itself: if the warm start ends in a worse local
/// minimum, the solve is repeated from the lower bound.
pub fn minimize_damage_from(
    f: &DamageFunctional,
    lower: &[f64],
    start: &[f64],
    opts: &DamageSolverOptions,
) -> Result<DamageSolution> {
    check_len("lower", lower.len(), f.dim())?;
    check_len("start", start.len(), f.dim())?;
    check_bounds(lower)?;
    let bounds = Bounds::new(f, lower);
    let warm = projected_newton(f, &bounds, &bounds.clamp_all(start), opts)?;
    if start == lower || warm.objective <= f.objective(lower) {
        return Ok(warm);
    }
    let cold = projected_newton(f, &bounds, lower, opts)?;
    Ok(if cold.objective < warm.objective { cold } else { warm })
}

fn projected_newton(
    f: &DamageFunctional,
    b: &Bounds,
    start: &[f64],
    opts: &DamageSolverOptions,
) -> Result<DamageSolution> {
    let n = f.dim();
    let mass = f.mass();
    let q2 = 2.0 * f.params().gradient_coefficient();
    let k_diag = f.stiffness().diagonal();
    let reg = 1e-8 * f.params().law.w11();
    let mut x = start.to_vec();
    let mut fx = f.objective(&x);
    let mut g = free_gradient(f, &x, b);
    let mut pg = stationarity(f, &x, b, &g);

    for iter in 0..opts.max_iter {
        if pg <= opts.tol_kkt {
            return Ok(DamageSolution {
                alpha: x,
                iterations: iter,
                projected_gradient: pg,
                objective: fx,
            });
        }
        // convexified curvature, positive by construction
        let mut curvature = f.local_curvature(&x);
        for (i, c) in curvature.iter_mut().enumerate() {
            if b.pinned(i) {
                *c = 0.0;
            }
        }
        let local: Vec<f64> = curvature
            .iter()
            .zip(mass)
            .map(|(h, m)| h.max(0.0) + reg * m)
            .collect();
        let hdiag: Vec<f64> = (0..n).map(|i| local[i] + q2 * k_diag[i]).collect();
        let width = (0..n)
            .map(|i| (x[i] - b.clamp(i, x[i] - g[i] / hdiag[i])).abs())
            .fold(0.0, f64::max);
        let eps = width.min(1e-3);
        let active: Vec<bool> = (0..n)
            .map(|i| {
                b.pinned(i)
                    || (x[i] - b.lower[i] <= eps && g[i] > 0.0)
                    || (b.upper[i] - x[i] <= eps && g[i] < 0.0)
            })
            .collect();

        let scaled: Vec<f64> = (0..n).map(|i| -g[i] / hdiag[i]).collect();
        let mut newton = scaled.clone();
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        if !free.is_empty() {
            // exact reduced Hessian when it is positive definite (quadratic
            // convergence near a minimizer), convexified otherwise
            let base = f.stiffness().principal_submatrix(&free).scaled(q2);
            let rhs: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
            let exact: Vec<f64> = free.iter().map(|&i| curvature[i]).collect();
            let convex: Vec<f64> = free.iter().map(|&i| local[i]).collect();
            let factor = |d: &[f64]| {
                let mut h = base.clone();
                h.add_diagonal(d);
                EnvelopeCholesky::factor(&h)
            };
            if let Ok(chol) = factor(&exact).or_else(|_| factor(&convex)) {
                for (k, v) in chol.solve(&rhs).into_iter().enumerate() {
                    newton[free[k]] = v;
                }
            }
        }

        log::trace!("damage iteration {iter}: projected residual {pg:.3e}, {} free nodes", free.len());
        let accepted = [newton, scaled].into_iter().find_map(|d| arc_search(f, b, &x, fx, &g, &d, pg));
        match accepted {
            Some((xn, fxn)) => {
                x = xn;
                fx = fxn;
                g = free_gradient(f, &x, b);
                pg = stationarity(f, &x, b, &g);
            }
            None => {
                return Err(Error::DamageSolve {
                    projected_gradient: pg,
                    iterations: iter,
                })
            }
        }
    }
    if pg <= opts.tol_kkt {
        Ok(DamageSolution {
            alpha: x,
            iterations: opts.max_iter,
            projected_gradient: pg,
            objective: fx,
        })
    } else {
        Err(Error::DamageSolve {
            projected_gradient: pg,
            iterations: opts.max_iter,
        })
    }
}

fn residual_of(g: &[f64], mass: &[f64]) -> Vec<f64> {
    g.iter().zip(mass).map(|(g, m)| g / m).collect()
}

/// Backtracking along `P(x + t d)`. Accepts on the Armijo condition, or on a
/// non-increasing objective that reduces the projected residual when the
/// decrease is below floating-point resolution.
fn arc_search(
    f: &DamageFunctional,
    b: &Bounds,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &[f64],
    pg: f64,
) -> Option<(Vec<f64>, f64)> {
    let trial = |t: f64| -> Vec<f64> { (0..x.len()).map(|i| b.clamp(i, x[i] + t * d[i])).collect() };
    let mut t = 1.0;
    for k in 0..MAX_BACKTRACK {
        let xn = trial(t);
        if xn != x {
            let change = f.difference(x, &xn);
            let slope: f64 = (0..x.len()).map(|i| g[i] * (xn[i] - x[i])).sum();
            if slope < 0.0 && change <= ARMIJO * slope {
                if k == 0 {
                    // in nonconvex regions the convexified model underestimates
                    // the step; extend it while the objective keeps falling
                    let (mut best, mut best_change) = (xn, change);
                    for _ in 0..MAX_EXPANSION {
                        t *= 2.0;
                        let xe = trial(t);
                        if xe == best {
                            break;
                        }
                        let ce = f.difference(x, &xe);
                        if ce >= best_change {
                            break;
                        }
                        best = xe;
                        best_change = ce;
                    }
                    return Some((best, fx + best_change));
                }
                return Some((xn, fx + change));
            }
            if change <= 0.0 && stationarity(f, &xn, b, &free_gradient(f, &xn, b)) < pg {
                return Some((xn, fx + change));
            }
        }
        t *= 0.5;
    }
    None
}
