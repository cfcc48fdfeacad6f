use std::f64::consts::PI;

use rand::Rng;

use super::generate::{generate_path, generate_periodic_path, generate_structure, random_hermitian_with_kernel, random_projection};
use super::{Check, Instance, InstanceResult, ScenarioConfig, Suite, Value};
use crate::error::{Error, Result};
use crate::glueing::{double, glueing_check_circle, glueing_check_interval, post_s9_identities, verify_s6, S6Discretization};
use crate::heat::{
    circle_supertrace, expansion_fit_s8, oracle_check, verify_s5, BoundaryKind, CutoffFunction, FdGrid, S8Input, SignReading, TGrid,
};
use crate::interval::verify_s7;
use crate::invariants::{xi_invariant, HalfInt};
use crate::linalg;
use crate::structure::{
    aps_projection, fredholm_pair_index, is_gamma_symmetric, is_wellposed, spectral_projection, HermitianOperator, OrthoProjection,
    SpectralWindow, Verdict,
};

type Outcome = (String, Vec<Check>);

pub(crate) fn run_instance(suite: Suite, config: &ScenarioConfig, mut inst: Instance) -> InstanceResult {
    let result = match suite {
        Suite::Structure => structure(config, &mut inst),
        Suite::S2 => s2(config, &mut inst),
        Suite::S5 => s5(config, &mut inst),
        Suite::S6 => s6(config, &mut inst),
        Suite::S7 => s7(config, &mut inst),
        Suite::S9 => s9(config, &mut inst),
        Suite::Ms => ms(config, &mut inst),
        Suite::S8 => s8(config, &mut inst),
        Suite::Identities => identities(config, &mut inst),
    };
    match result {
        Ok((label, checks)) => InstanceResult { id: inst.id, seed: inst.seed, label, checks, error: None },
        Err(e) => InstanceResult { id: inst.id, seed: inst.seed, label: String::new(), checks: Vec::new(), error: Some(e.to_string()) },
    }
}

fn dim(config: &ScenarioConfig) -> usize {
    config.dim().expect("validated config")
}

/// Half-dimension and kernel request for a signature-0 instance.
fn balanced(config: &ScenarioConfig, inst: &mut Instance) -> (usize, usize) {
    let m = inst.rng.random_range(1..=(dim(config) / 2).max(1));
    let k = inst.rng.random_range(0..=config.kernel_dim.min(m));
    (m, k)
}

fn structure(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let d = inst.rng.random_range(2.min(dim(config))..=dim(config));
    let dp = inst.rng.random_range(0..=d);
    let dm = d - dp;
    let k = inst.rng.random_range(0..=config.kernel_dim.min(dp.min(dm)));
    let s = generate_structure(inst.seed, dp, dm, k, dp == dm)?;
    let sig = s.kernel_signature()?;
    let ind = s.ind_a_plus();
    let planted = dp.abs_diff(dm) + 2 * k;
    let tol = config.tol("structure") * d as f64;
    Ok((
        format!("dims {dp}+{dm}, zeroed {k}"),
        vec![
            Check::small("max_residual", s.max_residual(), tol),
            Check::int("kernel_signature", sig, sig == -ind),
            Check::int("ind_a_plus", ind, (sig == 0) == (ind == 0)),
            Check::int("kernel_dim", s.spectral()?.kernel_dim() as i64, s.spectral()?.kernel_dim() == planted),
        ],
    ))
}

fn s2(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let tol = config.tol("aps");
    if inst.id % 6 == 5 {
        // Unequal gamma eigenspaces force a kernel with nonzero signature.
        let (dp, dm) = if inst.id == 5 {
            (1, 0)
        } else {
            let d = inst.rng.random_range(1..=dim(config));
            let dp = inst.rng.random_range(0..=d);
            if 2 * dp == d {
                (dp + 1, dp)
            } else {
                (dp, d - dp)
            }
        };
        let s = generate_structure(inst.seed, dp, dm, 0, false)?;
        let outcome = match aps_projection(&s) {
            Err(Error::NoGammaSymmetricProjection { signature }) => Check::int("obstruction_signature", signature, signature != 0),
            Err(e) => return Err(e),
            Ok(_) => Check::text("obstruction_signature", "projection returned", false),
        };
        return Ok((format!("dims {dp}+{dm}"), vec![outcome]));
    }
    let (m, k) = balanced(config, inst);
    let with_omega = inst.rng.random::<bool>();
    let s = generate_structure(inst.seed, m, m, k, with_omega)?;
    let p = aps_projection(&s)?;
    let spec = s.spectral()?;
    let pos = spectral_projection(&spec, &SpectralWindow::positive());
    let nonneg = spectral_projection(&spec, &SpectralWindow::nonnegative());
    let lower = linalg::min_eigenvalue(&(p.matrix() - pos.matrix()))?;
    let upper = linalg::min_eigenvalue(&(nonneg.matrix() - p.matrix()))?;
    let sym = is_gamma_symmetric(&p, &s)?;
    let wp = is_wellposed(&p, &s)?;
    Ok((
        format!("dims {m}+{m}, zeroed {k}, omega {with_omega}"),
        vec![
            Check::small("gamma_residual", sym.residual, tol),
            Check::real("min_eig(P - P>0)", lower, Some(tol), lower >= -tol),
            Check::real("min_eig(P>=0 - P)", upper, Some(tol), upper >= -tol),
            Check::flag("wellposed", wp.verdict == Verdict::WellPosed),
        ],
    ))
}

fn reading_name(r: SignReading) -> &'static str {
    match r {
        SignReading::Minus => "minus",
        SignReading::Plus => "plus",
        SignReading::Both => "both",
        SignReading::Neither => "neither",
    }
}

fn s5(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let (m, k) = balanced(config, inst);
    let s = generate_structure(inst.seed, m, m, k, true)?;
    let p = aps_projection(&s)?;
    let phi = CutoffFunction::smooth_bump(4.0, 6.0)?;
    let r = verify_s5(&s, &p, &phi, config.t_grid)?;
    let tol = config.tol("s5");
    let oracle = oracle_check(&s, &p, &phi, true, 0.5, &FdGrid::for_time(0.5, phi.support, None, 100))?;
    Ok((
        format!("dims {m}+{m}, zeroed {k}"),
        vec![
            Check::real("lim", r.lim, None, true),
            Check::real("lim_error", r.lim_error, None, true),
            Check::small("minus_residual", r.minus_residual, tol),
            Check::real("plus_residual", r.plus_residual, Some(tol), true),
            Check::text("reading", reading_name(r.verdict), r.verdict != SignReading::Neither),
            Check::small("closed_form_vs_fit", r.closed_form - r.lim, tol),
            Check::real("oracle_difference", oracle.exact - oracle.numeric.value, Some(oracle.numeric.error_estimate + oracle.exact_error), oracle.agrees),
        ],
    ))
}

fn s6(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let (m, k) = balanced(config, inst);
    let s = generate_structure(inst.seed, m, m, k, true)?;
    let d = double(&s)?;
    let p = d.lift(&aps_projection(&s)?)?;
    let x = config.x_grid.unwrap_or_default();
    let disc = S6Discretization { x_max: x.x_max, cells: x.cells, eigenvalues: 8 };
    let grid = config.theta_grid.unwrap_or_default().values();
    let r = verify_s6(&d, &p, &grid, &disc)?;
    let dt_max = grid.windows(2).fold(0.0f64, |a, w| a.max(w[1] - w[0]));
    Ok((
        format!("doubled dims {m}+{m}, zeroed {k}"),
        vec![
            Check::flag("all_wellposed", r.all_wellposed),
            Check::real("max_norm_ratio", r.max_norm_ratio, Some(2.0), r.norm_continuity_holds),
            Check::flag("pair_index_constant", r.pair_index_constant == Some(true)),
            Check::real("max_jump", r.max_jump, Some(r.lipschitz_estimate * dt_max), r.jumps_bounded),
            Check::real("lipschitz_estimate", r.lipschitz_estimate, None, true),
            Check::real("coarse_lipschitz", r.coarse_lipschitz, None, true),
            Check::int("degenerate_thetas", r.degenerate_thetas.len() as i64, true),
        ],
    ))
}

fn s7(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let n = inst.rng.random_range(1..=dim(config));
    let path = generate_path(inst.seed, n, 3, None)?;
    let rp = inst.rng.random_range(0..=n);
    let rq = inst.rng.random_range(0..=n);
    let p = random_projection(&mut inst.rng, n, rp);
    let q = random_projection(&mut inst.rng, n, rq);
    let r = verify_s7(&path, &p, &q, config.tol("propagator"), None)?;
    let it = config.tol("integral");
    Ok((
        format!("dim {n}, rank P {rp}, rank Q {rq}"),
        vec![
            Check::int("index", r.index, r.index == r.kernel_dim as i64 - r.cokernel_dim as i64),
            Check::real("sf", r.sf.to_f64(), None, r.sf_crossings.is_none_or(|c| c == r.sf)),
            Check::real("line2_residual", r.line2_residual, Some(0.0), r.line2_residual == 0.0),
            Check::real("line1_residual", r.line1_residual, Some(1e-6 + r.integral_error), r.line1_holds),
            Check::small("integral_term", r.integral_term, it),
            Check::real("integral_error", r.integral_error, None, true),
        ],
    ))
}

fn s9(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let n = inst.rng.random_range(1..=dim(config));
    let tol = config.tol("propagator");
    let rank = inst.rng.random_range(0..=n);
    let p = random_projection(&mut inst.rng, n, rank);
    if inst.id % 2 == 0 {
        let path = generate_periodic_path(inst.seed, n, 3)?;
        let cut = 0.1 + inst.rng.random::<f64>() * (2.0 * PI - 0.2);
        let r = glueing_check_circle(&path, &p, cut, tol)?;
        return Ok((
            format!("circle, dim {n}, rank P {rank}"),
            vec![
                Check::int("circle_index", r.whole.index, r.whole.index == 0),
                Check::int("arc_indices", r.left.index, r.left.index == -r.right.index),
                Check::int("residual", r.residual, r.holds()),
            ],
        ));
    }
    let path = generate_path(inst.seed, n, 3, None)?;
    let rq = inst.rng.random_range(0..=n);
    let q = random_projection(&mut inst.rng, n, rq);
    let rr = inst.rng.random_range(0..=n);
    let r_proj = random_projection(&mut inst.rng, n, rr);
    let cut = match inst.id % 8 {
        3 => 0.0,
        7 => 1.0,
        _ => inst.rng.random::<f64>(),
    };
    let r = glueing_check_interval(&path, &p, &q, cut, &r_proj, tol)?;
    Ok((format!("interval, dim {n}, cut {cut:.4}"), vec![Check::int("residual", r.residual, r.holds())]))
}

fn ms(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let (m, k) = balanced(config, inst);
    let s = generate_structure(inst.seed, m, m, k, true)?;
    let tol = config.tol("mckean_singer");
    let ts: Vec<f64> = (0..8).map(|i| 0.1 + 1.9 * i as f64 / 7.0).collect();
    let circumference = 2.0 * PI;
    // Modes so that the neglected tail is below 1e-13 already at the smallest time.
    let modes = ((2.0 * (2 * m) as f64 / 1e-13).ln() / ts[0]).sqrt().ceil() as usize;
    let values: Vec<f64> = ts.iter().map(|&t| circle_supertrace(&s, circumference, t, modes, 1e-12)).collect::<Result<_>>()?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        format!("dims {m}+{m}, zeroed {k}"),
        vec![Check::small("spread", hi - lo, tol), Check::real("supertrace", values[0], None, true)],
    ))
}

fn s8(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let phi = CutoffFunction::smooth_bump(4.0, 6.0)?;
    let log_tol = config.tol("log");
    if inst.id == 0 {
        let grid = TGrid::for_log_fit(0.0, phi.flat);
        let r = expansion_fit_s8(S8Input::Block { lambda: 0.0, kind: BoundaryKind::Dirichlet }, None, &phi, &grid, 6, true)?;
        let lead = phi.integral() / (4.0 * PI).sqrt();
        let constant = -phi.value_at_zero() / 4.0;
        return Ok((
            "Dirichlet block, lambda 0".into(),
            vec![
                Check::small("leading_rel_error", (r.fit.coeff(0, 0) - lead) / lead, config.tol("leading_rel")),
                Check::small("constant_rel_error", (r.fit.lim - constant) / constant, config.tol("constant_rel")),
                Check::real("low_order_log", r.low_order_log, Some(log_tol), true),
            ],
        ));
    }
    let (m, k) = balanced(config, inst);
    let s = generate_structure(inst.seed, m, m, k, false)?;
    let p = aps_projection(&s)?;
    let grid = TGrid::for_log_fit(linalg::hermitian_norm(s.a_matrix())?, phi.flat);
    let r = expansion_fit_s8(S8Input::Structure(&s), Some(&p), &phi, &grid, 6, true)?;
    Ok((
        format!("APS structure, dims {m}+{m}, zeroed {k}"),
        vec![
            Check::small("low_order_log", r.low_order_log, log_tol),
            Check::real("conditioning", r.fit.conditioning, None, true),
        ],
    ))
}

fn identities(config: &ScenarioConfig, inst: &mut Instance) -> Result<Outcome> {
    let n = inst.rng.random_range(1..=dim(config));
    let r1 = inst.rng.random_range(0..=n);
    let r2 = inst.rng.random_range(0..=n);
    let p1 = random_projection(&mut inst.rng, n, r1);
    let p2 = random_projection(&mut inst.rng, n, r2);
    let forward = fredholm_pair_index(&p1, &p2)?;
    let backward = fredholm_pair_index(&p2, &p1)?;
    let k = inst.rng.random_range(0..=n);
    let a = random_hermitian_with_kernel(&mut inst.rng, n, k)?;
    let xi_sum = xi_invariant(&a.neg())? + xi_invariant(&a)?;
    let rank = inst.rng.random_range(0..=n);
    let post = post_s9_identities(&a, &random_projection(&mut inst.rng, n, rank))?;
    Ok((
        format!("dim {n}, ranks {r1}/{r2}, kernel {k}"),
        vec![
            Check::int("pair_antisymmetry", forward + backward, forward == -backward),
            Check::int("pair_rank_difference", forward, forward == r1 as i64 - r2 as i64),
            Check::real("xi_sum", xi_sum.to_f64(), None, xi_sum == HalfInt::from_int(k as i64)),
            Check::flag("post_identities", post.holds()),
        ],
    ))
}

/// Diagonal `(A+, P+)` with eigenvalues in `{-1, 0, 1}` scaled by position, all projections, up to `max_dim`.
fn diagonal_sweep(max_dim: usize, mut f: impl FnMut(&HermitianOperator, &OrthoProjection) -> bool) -> (usize, usize) {
    let (mut total, mut failed) = (0, 0);
    for n in 1..=max_dim {
        for code in 0..3usize.pow(n as u32) {
            let vals: Vec<f64> = (0..n).map(|j| ((code / 3usize.pow(j as u32)) % 3) as f64 - 1.0).map(|v| v * (1.0 + 0.5 * n as f64)).collect();
            let a = HermitianOperator::from_real_diagonal(&vals);
            for mask in 0..(1usize << n) {
                let flags: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
                total += 1;
                if !f(&a, &OrthoProjection::diagonal(&flags)) {
                    failed += 1;
                }
            }
        }
    }
    (total, failed)
}

pub(crate) fn summary(suite: Suite, _config: &ScenarioConfig, instances: &[InstanceResult]) -> Vec<Check> {
    let passed = instances.iter().filter(|r| r.passed()).count();
    let mut out = vec![Check::int("instances_passed", passed as i64, passed == instances.len())];
    match suite {
        Suite::S5 => {
            let readings: Vec<&str> = instances
                .iter()
                .filter_map(|r| r.checks.iter().find(|c| c.name == "reading"))
                .filter_map(|c| match &c.value {
                    Value::Text(t) => Some(t.as_str()),
                    _ => None,
                })
                .collect();
            let all_minus = readings.iter().all(|r| matches!(*r, "minus" | "both"));
            let all_plus = readings.iter().all(|r| matches!(*r, "plus" | "both"));
            let common = match (all_minus, all_plus) {
                (true, true) => "both",
                (true, false) => "minus",
                (false, true) => "plus",
                (false, false) => "none",
            };
            out.push(Check::text("common_reading", common, readings.len() == instances.len() && (all_minus || all_plus)));
        }
        Suite::Identities => {
            let (total, failed) = diagonal_sweep(4, |a, p| post_s9_identities(a, p).is_ok_and(|r| r.holds()));
            out.push(Check::int("diagonal_post_identity_failures", failed as i64, failed == 0 && total > 0));
            let mut xi_failed = 0;
            for n in 1..=5usize {
                for code in 0..3usize.pow(n as u32) {
                    let vals: Vec<f64> = (0..n).map(|j| ((code / 3usize.pow(j as u32)) % 3) as f64 - 1.0).collect();
                    let a = HermitianOperator::from_real_diagonal(&vals);
                    let kernel = vals.iter().filter(|v| **v == 0.0).count() as i64;
                    let ok = xi_invariant(&a.neg()).and_then(|x| Ok(x + xi_invariant(&a)?)).is_ok_and(|s| s == HalfInt::from_int(kernel));
                    if !ok {
                        xi_failed += 1;
                    }
                }
            }
            out.push(Check::int("diagonal_xi_identity_failures", xi_failed, xi_failed == 0));
        }
        _ => {}
    }
    out
}
