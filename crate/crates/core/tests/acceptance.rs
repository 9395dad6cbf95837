//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line (written to
//! the process's stderr directly, so it shows even when output is captured)
//! and then asserts the verdict.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use caving::app::{gradcheck, preset, run_cli};
use caving::continuum::ElasticModuli;
use caving::fem::{assemble_elasticity, lateral_pressure, nodal_dissipation, BodyLoads, DamageFunctional, ElasticBoundary};
use caving::material::{DamageLaw, DamageModel, MaterialParams};
use caving::mesh::{build_mesh, transfer_damage, BoundaryTag, Mesh, MeshSizes, Rect};
use caving::solver::{check_kkt, minimize_damage, run_quasi_static, solve_linear, Algorithm, Evolution};

/// Serializes the criteria so each one's runtime is measured on its own.
static GATE: Mutex<()> = Mutex::new(());

fn report(id: u8, title: &str, pass: bool, detail: &str, seconds: f64, limit: Option<f64>) {
    let line = format!(
        "ACCEPTANCE {id} {title}: {} ({detail}; {seconds:.2} s{})\n",
        if pass { "PASS" } else { "FAIL" },
        limit.map_or(String::new(), |l| format!(", limit {l} s"))
    );
    let mut err = std::io::stderr().lock();
    let _ = err.write_all(line.as_bytes());
    let _ = err.flush();
}

/// Run `body` under the gate, print its verdict and fail the test on FAIL.
/// `body` returns the verdict, a one-line detail and the seconds of shared
/// runs it owns; those are charged to this criterion in place of whatever
/// part of them happened to be computed inside `body`.
fn criterion(id: u8, title: &str, limit: Option<f64>, body: impl FnOnce() -> (bool, String, Option<&'static Runs>)) {
    let _guard = GATE.lock().unwrap_or_else(|e| e.into_inner());
    let clock = Instant::now();
    let mut fills = 0.0;
    let (ok, detail, owned) = FILL_SECONDS.with(|f| {
        f.set(0.0);
        let r = body();
        fills = f.get();
        r
    });
    let seconds = clock.elapsed().as_secs_f64() - fills + owned.map_or(0.0, |r| r.seconds);
    let pass = ok && limit.map_or(true, |l| seconds < l);
    report(id, title, pass, &detail, seconds, limit);
    assert!(pass, "criterion {id} failed: {detail} ({seconds:.2} s)");
}

thread_local! {
    /// Seconds spent filling shared run caches on this thread.
    static FILL_SECONDS: std::cell::Cell<f64> = const { std::cell::Cell::new(0.0) };
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("caving").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap() + &String::from_utf8(err).unwrap())
}

/// A finished run together with what produced it.
struct Case {
    label: String,
    params: MaterialParams,
    tol_kkt: f64,
    algorithm: Algorithm,
    fixed_mesh: bool,
    run: Evolution,
}

fn run_preset(name: &str, algorithm: Algorithm, h: Option<f64>) -> Case {
    let mut s = preset(name).unwrap();
    s.solver.algorithm = algorithm;
    if let Some(h) = h {
        s.geometry.h_coarse = h;
        s.geometry.h_fine = h;
        s.geometry.refinement_band = h;
    }
    let program = s.program().unwrap();
    let cfg = s.solver_config();
    let run = run_quasi_static(&program, &cfg).unwrap_or_else(|f| panic!("{name} {algorithm}: {f}"));
    Case {
        label: format!("{name}/{algorithm}{}", h.map_or(String::new(), |h| format!("/h={h}"))),
        params: program.params,
        tol_kkt: cfg.tol_kkt,
        algorithm,
        fixed_mesh: s.loading.kind == caving::app::LoadingKind::Compression,
        run,
    }
}

/// A set of runs and the wall time it took to compute them.
struct Runs {
    cases: Vec<Case>,
    seconds: f64,
}

fn fill(cell: &'static OnceLock<Runs>, make: impl FnOnce() -> Vec<Case>) -> &'static Runs {
    cell.get_or_init(|| {
        let clock = Instant::now();
        let cases = make();
        let seconds = clock.elapsed().as_secs_f64();
        FILL_SECONDS.with(|f| f.set(f.get() + seconds));
        Runs { cases, seconds }
    })
}

/// Ten-step caving runs of every model with the relaxed algorithm.
fn caving_runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    fill(&RUNS, || (1..=4).map(|m| run_preset(&format!("caving-2d-model{m}"), Algorithm::Fast, None)).collect())
}

/// Compression specimen of every model at the preset resolution.
fn compression_runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    fill(&RUNS, || (1..=4).map(|m| run_preset(&format!("compression-2d-model{m}"), Algorithm::Fast, None)).collect())
}

/// Plain alternate minimization on a coarser compression specimen.
fn alternate_runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    fill(&RUNS, || {
        (1..=4)
            .map(|m| run_preset(&format!("compression-2d-model{m}"), Algorithm::Alternate, Some(0.004)))
            .collect()
    })
}

fn all_runs() -> Vec<&'static Case> {
    [caving_runs(), compression_runs(), alternate_runs()].into_iter().flat_map(|r| &r.cases).collect()
}

#[test]
fn criterion_1_hardening_classification() {
    criterion(1, "hardening classification", Some(1.0), || {
        let mut failures = Vec::new();
        let mut onset = f64::NAN;
        let mut run = |args: &[&str], check: &dyn Fn(&str) -> bool| {
            let (code, out) = cli(args);
            if code != 0 || !check(&out) {
                failures.push(format!("{args:?}"));
            }
            out
        };
        let both = |o: &str| o.contains("strain hardening: on [0,1)") && o.contains("stress softening: on [0,1)");
        run(&["hardening", "--model", "1"], &both);
        for p in ["1", "2", "4"] {
            run(&["hardening", "--model", "3", "--p", p], &both);
        }
        let out2 = run(&["hardening", "--model", "2", "--samples", "1000"], &|o: &str| {
            o.contains("stress softening: for alpha >= ")
        });
        if let Some(v) = out2.lines().find_map(|l| l.strip_prefix("stress softening: for alpha >= ")) {
            onset = v.trim().parse().unwrap_or(f64::NAN);
        }
        // one grid cell at 1000 samples
        let onset_ok = (onset - 0.25).abs() <= 1e-3 + 1e-12;
        (
            failures.is_empty() && onset_ok,
            format!("model 2 softening onset {onset:.4}; failing invocations {failures:?}"),
            None,
        )
    });
}

#[test]
fn criterion_2_derivative_consistency() {
    criterion(2, "derivative consistency", Some(30.0), || {
        let r = gradcheck(2024, 20).unwrap();
        (
            r.cases == 20 && r.max_nodes <= 60 && r.passed(1e-5, 1e-4),
            format!(
                "{} meshes up to {} nodes, gradient {:.2e} <= 1e-5, hessian {:.2e} <= 1e-4",
                r.cases, r.max_nodes, r.max_gradient_error, r.max_hessian_error
            ),
            None,
        )
    });
}

#[test]
fn criterion_3_analytic_column() {
    criterion(3, "analytic column", Some(10.0), || {
        let (width, height) = (50.0, 100.0);
        let bounds = Rect::new(0.0, width, -height, 0.0);
        let mesh = build_mesh(&bounds, &MeshSizes::uniform(width / 32.0).unwrap(), None).unwrap();
        let moduli = ElasticModuli::new(2.9e10, 0.3).unwrap();
        let params = MaterialParams::new(moduli, DamageLaw::new(DamageModel::Model1, 1e3).unwrap(), 1e6, 1.0, 1.0, 1e-6).unwrap();
        let loads = BodyLoads::new(2700.0, 9.81, 1e9).unwrap();
        let alpha = vec![0.0; mesh.node_count()];
        let sys = assemble_elasticity(&mesh, &alpha, &params, &loads, &ElasticBoundary::caving()).unwrap();
        let u = solve_linear(&sys, 1e-12).unwrap();
        // u_y' = rho g (y - H) / (lambda + 2 mu), u_y(bottom) = 0
        let stiff = moduli.lambda() + 2.0 * moduli.mu();
        let exact = |y: f64| loads.weight_density() / stiff * (0.5 * y * y - 0.5 * height * height);
        let mass = mesh.lumped_mass();
        let (mut num, mut den) = (0.0, 0.0);
        for (n, p) in mesh.nodes().iter().enumerate() {
            num += mass[n] * (u[2 * n + 1] - exact(p[1])).powi(2);
            den += mass[n] * exact(p[1]).powi(2);
        }
        let l2 = (num / den).sqrt();
        let coeff = moduli.lateral_pressure_coefficient();
        let y = -37.0;
        let traction_ratio = lateral_pressure(&params, &loads, y, 0.0) / (loads.weight_density() * y);
        let dev = (coeff - 3.0 / 7.0).abs().max((traction_ratio - 3.0 / 7.0).abs());
        let grid_ok = mesh.element_count() == 2 * 32 * 64;
        (
            grid_ok && l2 <= 0.01 && dev <= 1e-12,
            format!("32x64 grid {grid_ok}, relative L2 error {l2:.3e} <= 1e-2, |coefficient - 3/7| = {dev:.1e} <= 1e-12"),
            None,
        )
    });
}

fn node_key(p: [f64; 2]) -> (u64, u64) {
    (p[0].to_bits(), p[1].to_bits())
}

/// Bounds and the irreversibility chain of one run; returns a description
/// of the first violation.
fn irreversibility_violation(case: &Case) -> Option<String> {
    let steps = &case.run.steps;
    for (i, s) in steps.iter().enumerate() {
        let a = &s.state.alpha;
        if let Some(n) = (0..a.len()).find(|&n| !(a[n] >= s.lower[n] && a[n] <= 1.0 && s.lower[n] >= 0.0)) {
            return Some(format!("{} step {i} node {n}: alpha {} lower {}", case.label, a[n], s.lower[n]));
        }
        let Some(prev) = i.checked_sub(1).map(|j| &steps[j]) else { continue };
        if case.fixed_mesh {
            if s.lower != prev.state.alpha {
                return Some(format!("{} step {i}: bound differs from previous damage", case.label));
            }
            continue;
        }
        // the bound is the previous damage carried over, and it dominates
        // the previous bound carried over
        let carried = transfer_damage(&prev.mesh, &prev.state.alpha, &s.mesh).unwrap();
        let carried_lower = transfer_damage(&prev.mesh, &prev.lower, &s.mesh).unwrap();
        for n in 0..s.lower.len() {
            if (s.lower[n] - carried[n]).abs() > 1e-12 || s.lower[n] < carried_lower[n] - 1e-12 {
                return Some(format!("{} step {i} node {n}: bound {} carried {} carried bound {}", case.label, s.lower[n], carried[n], carried_lower[n]));
            }
        }
        // nodes kept by the remeshing never lose damage
        let old: HashMap<(u64, u64), f64> = prev.mesh.nodes().iter().map(|p| node_key(*p)).zip(prev.state.alpha.iter().copied()).collect();
        for (n, p) in s.mesh.nodes().iter().enumerate() {
            if let Some(&before) = old.get(&node_key(*p)) {
                if s.lower[n] < before - 1e-12 || s.state.alpha[n] < before - 1e-12 {
                    return Some(format!("{} step {i} node {n}: {before} decreased to {}", case.label, s.state.alpha[n]));
                }
            }
        }
    }
    None
}

#[test]
fn criterion_4_irreversibility_and_bounds() {
    criterion(4, "irreversibility and bounds", Some(300.0), || {
        let runs = caving_runs();
        let violation = runs.cases.iter().find_map(irreversibility_violation);
        let steps: usize = runs.cases.iter().map(|c| c.run.steps.len()).sum();
        let max_alpha: Vec<String> = runs.cases
            .iter()
            .map(|c| format!("{:.3}", c.run.steps.last().unwrap().state.alpha.iter().fold(0.0f64, |m, a| m.max(*a))))
            .collect();
        (
            violation.is_none() && runs.cases.iter().all(|c| c.run.steps.len() == 10),
            format!(
                "{} models, {steps} steps, final max alpha per model {max_alpha:?}; {}",
                runs.cases.len(),
                violation.unwrap_or_else(|| "no violation".into())
            ),
            Some(runs),
        )
    });
}

#[test]
fn criterion_5_kkt_certificate() {
    criterion(5, "KKT certificate", None, || {
        let mut checked = 0;
        let mut failures = Vec::new();
        let mut worst = (0.0f64, 0.0f64);
        let mut unconverged = 0;
        for case in all_runs() {
            if let Some(v) = irreversibility_violation(case) {
                failures.push(v);
            }
            for (s, h) in case.run.steps.iter().zip(&case.run.history.steps) {
                if !h.converged {
                    unconverged += 1;
                    continue;
                }
                let k = check_kkt(&s.mesh, &s.state.u, &s.state.alpha, &s.lower, &case.params, case.tol_kkt).unwrap();
                checked += 1;
                worst = (worst.0.max(k.worst_criterion), worst.1.max(k.worst_complementarity));
                if !k.passed() {
                    failures.push(format!("{} step {}: {k:?}", case.label, h.step));
                }
            }
        }
        (
            failures.is_empty() && checked > 0,
            format!(
                "{checked} converged steps checked ({unconverged} capped steps skipped), worst criterion deficit {:.2e}, worst complementarity {:.2e}; failures {failures:?}",
                worst.0, worst.1
            ),
            None,
        )
    });
}

#[test]
fn criterion_6_fast_monotonicity() {
    criterion(6, "FAST monotonicity", None, || {
        let fast: Vec<&Case> = all_runs().into_iter().filter(|c| c.algorithm == Algorithm::Fast).collect();
        let violations: usize = fast.iter().map(|c| c.run.history.nonmonotone_steps()).sum();
        let sequences: usize = fast.iter().map(|c| c.run.history.steps.len()).sum();
        let iterations: usize = fast.iter().map(|c| c.run.history.total_iterations()).sum();
        let capped = fast.iter().flat_map(|c| &c.run.history.steps).filter(|h| h.relax_cap_hit).count();
        (
            violations == 0,
            format!("{sequences} error sequences, {iterations} outer iterations, {violations} increases, {capped} steps at the blend cap"),
            None,
        )
    });
}

/// `(total iterations, nonmonotone steps)` from a history table.
fn history_totals(path: &std::path::Path) -> (usize, usize) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let mut rows = 0;
    let mut increases = 0;
    let mut last: Option<(usize, f64)> = None;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let step: usize = rec[0].parse().unwrap();
        let err: f64 = rec[2].parse().unwrap();
        if let Some((s, e)) = last {
            if s == step && err > e {
                increases += 1;
            }
        }
        last = Some((step, err));
        rows += 1;
    }
    (rows, increases)
}

#[test]
fn criterion_7_iteration_count_comparison() {
    criterion(7, "iteration-count comparison", Some(600.0), || {
        let dir = tempfile::tempdir().unwrap();
        let out_dir = dir.path().to_str().unwrap();
        let (code, out) = cli(&["compare", "--preset", "caving-2d-model2", "--output", out_dir]);
        let s = preset("caving-2d-model2").unwrap();
        let params_ok = s.material.w11 == 1e3 && s.solver.c_l == 0.9;
        if code != 0 {
            return (false, format!("compare exited with {code}: {out}"), None);
        }
        let (alt, alt_nonmono) = history_totals(&dir.path().join("history_alternate.csv"));
        let (fast, fast_nonmono) = history_totals(&dir.path().join("history_fast.csv"));
        let strict_needed = alt_nonmono > 0;
        let ok = params_ok && fast <= alt && (!strict_needed || fast < alt);
        (
            ok,
            format!(
                "ALTERNATE {alt} iterations ({alt_nonmono} nonmonotone), FAST {fast} iterations ({fast_nonmono} nonmonotone), speedup {:.2}",
                alt as f64 / fast as f64
            ),
            None,
        )
    });
}

/// Fraction of dissipated energy within `4 ell` of the seed segment at the
/// final time.
fn localization_ratio(case: &Case, seed: &caving::solver::SeedBand) -> f64 {
    let last = case.run.steps.last().unwrap();
    let d = nodal_dissipation(&last.mesh, &last.state.alpha, &case.params).unwrap();
    let radius = 4.0 * case.params.ell;
    let near: f64 = d.iter().zip(last.mesh.nodes()).filter(|(_, p)| seed.distance(**p) <= radius).map(|(v, _)| v).sum();
    near / d.iter().sum::<f64>()
}

#[test]
fn criterion_8_localization_contrast() {
    criterion(8, "localization contrast", Some(300.0), || {
        let runs = compression_runs();
        let seed = preset("compression-2d-model1").unwrap().program().unwrap().seeds[0];
        let same_mesh = runs.cases.iter().all(|c| c.run.steps[0].mesh == runs.cases[0].run.steps[0].mesh);
        let ratios: Vec<f64> = runs.cases.iter().map(|c| localization_ratio(c, &seed)).collect();
        let ok = same_mesh && [0, 2, 3].iter().all(|&i| ratios[i] > ratios[1]);
        (
            ok,
            format!(
                "ratios model 1..4 = {:.4}, {:.4}, {:.4}, {:.4} on one {}-node mesh",
                ratios[0],
                ratios[1],
                ratios[2],
                ratios[3],
                runs.cases[0].run.steps[0].mesh.node_count()
            ),
            Some(runs),
        )
    });
}

/// Coordinate descent where each nodal value is set to the best point of a
/// 2000-interval grid over a window around the incumbent; the window starts
/// as the whole feasible interval and shrinks by ten once a sweep moves no
/// value by more than a few grid cells.
fn grid_oracle(f: &DamageFunctional, lower: &[f64]) -> Vec<f64> {
    let mut x = lower.to_vec();
    let mut half = 1.0;
    for _ in 0..20_000 {
        let mut moved = 0.0f64;
        for i in 0..x.len() {
            let lo = (x[i] - half).max(lower[i]);
            let hi = (x[i] + half).min(1.0);
            let mut best = (f.objective(&x), x[i]);
            let mut y = x.clone();
            for k in 0..=2000 {
                y[i] = lo + (hi - lo) * k as f64 / 2000.0;
                let v = f.objective(&y);
                if v < best.0 {
                    best = (v, y[i]);
                }
            }
            moved = moved.max((best.1 - x[i]).abs());
            x[i] = best.1;
        }
        if moved <= 4.0 * half / 1000.0 {
            if half < 1e-9 {
                break;
            }
            half *= 0.1;
        }
    }
    x
}

#[test]
fn criterion_9_oracle_equivalence() {
    criterion(9, "oracle equivalence", Some(10.0), || {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mesh = Mesh::with_tagger(nodes.clone(), vec![[0, 1, 2]], 1.0, 1.0, |_| BoundaryTag::Lateral).unwrap();
        let u: Vec<f64> = nodes.iter().flat_map(|x| [1.5e-3 * x[1], -4e-4 * x[0]]).collect();
        let mut worst = 0.0f64;
        let mut instances = 0;
        let mut damaged = 0;
        for model in [DamageModel::Model1, DamageModel::Model2, DamageModel::Model3 { p: 4.0 }, DamageModel::Model4 { k: 2.0 }] {
            let params = MaterialParams::new(ElasticModuli::new(2.9e10, 0.3).unwrap(), DamageLaw::new(model, 1e3).unwrap(), 1e6, 0.3, 1.0, 1e-6).unwrap();
            let f = DamageFunctional::new(&mesh, &u, &params).unwrap();
            for lower in [[0.0, 0.0, 0.0], [0.3, 0.0, 0.1]] {
                let got = minimize_damage(&mesh, &u, &lower, &params, 1e-8).unwrap();
                let oracle = grid_oracle(&f, &lower);
                instances += 1;
                if got.iter().zip(&lower).any(|(a, l)| a > l) {
                    damaged += 1;
                }
                worst = got.iter().zip(&oracle).fold(worst, |m, (a, b)| m.max((a - b).abs()));
            }
        }
        (
            worst <= 1e-3 && damaged > 0,
            format!("{instances} instances ({damaged} with damage growth), max nodal deviation {worst:.2e} <= 1e-3"),
            None,
        )
    });
}
