//! Acceptance gate: every release-blocking criterion as one test with a
//! single pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bellman_lab::extremizers;
use bellman_lab::forms;
use bellman_lab::oracle::{self, BellmanQuery, ObjectiveSpec};
use bellman_lab::scalar::{Rational, Scalar};
use bellman_lab::tree::{StepFunction, TreeParams};

fn report(name: &str, failures: &[String], detail: String) {
    if failures.is_empty() {
        println!("[PASS] {}: {}", name, detail);
    } else {
        println!("[FAIL] {}: {}", name, failures.join("; "));
    }
    assert!(failures.is_empty(), "{}: {}", name, failures.join("; "));
}

#[test]
fn chain_values_match_exact_arithmetic() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cases = 0;
    for branching in [2u32, 3] {
        for m in 0u32..=6 {
            for q in [2u32, 3, 4] {
                for f in [Rational::from_int(1), Rational::ratio(3, 2)] {
                    let chain = extremizers::chain_function(branching, m, f.clone()).unwrap();
                    let computed = chain.maximal().integral_powu(q);
                    let closed =
                        forms::exact::bpq_chain_value(&f, branching, m, q).unwrap();
                    if computed != closed {
                        failures.push(format!(
                            "N={} m={} q={} f={:?}: {:?} != {:?}",
                            branching, m, q, f, computed, closed
                        ));
                    }
                    cases += 1;
                }
            }
        }
    }
    // Desk-scale anchor: N=2, m=1, q=3 sums to (8 + 1)/2.
    let chain = extremizers::chain_function(2, 1, Rational::from_int(1)).unwrap();
    if chain.maximal().integral_powu(3) != Rational::ratio(9, 2) {
        failures.push("desk anchor 9/2 missed".into());
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > 1.0 {
        failures.push(format!("runtime {:.2}s exceeds 1s", elapsed));
    }
    report(
        "chain values match exact arithmetic",
        &failures,
        format!("{} exact identities in {:.2}s", cases, elapsed),
    );
}

#[test]
fn piecewise_and_min_forms_agree() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut grid_checks = 0;
    for i in 0..10_000 {
        let branching = *[2u32, 3, 4].get(rng.gen_range(0..3)).unwrap();
        let p: f64 = rng.gen_range(1.0001..=4.0);
        let f = rng.gen_range(-2.0..1.6f64).exp();
        let ratio = rng.gen_range(0.0..50.0f64.ln()).exp();
        let big_f = f.powf(p) * ratio;
        let kappa = rng.gen_range(1e-6..=1.0f64);
        let piecewise = forms::dp_piecewise(big_f, f, kappa, branching, p).unwrap();
        let min_form = forms::dp_min_form(big_f, f, kappa, branching, p).unwrap();
        if (piecewise - min_form).abs() > 1e-9 * piecewise.abs().max(1.0) {
            failures.push(format!(
                "forms disagree at N={} p={} f={} F={} kappa={}",
                branching, p, f, big_f, kappa
            ));
            break;
        }
        // Independent check on a subsample: brute-force minimization of the
        // one-variable objective over its admissible interval.
        let u_hi = (big_f / f).powf(1.0 / (p - 1.0)).min(f / kappa);
        if i % 50 == 0 && u_hi <= 100.0 * f {
            let mut best = f64::INFINITY;
            for j in 0..=10_000 {
                let u = f + (u_hi - f) * j as f64 / 10_000.0;
                best = best.min(forms::g_of_u(u, big_f, f, kappa, branching, p).unwrap());
            }
            grid_checks += 1;
            if (best - min_form).abs() > 1e-6 * best.abs().max(1.0) {
                failures.push(format!(
                    "grid min {} vs min form {} at N={} p={} f={} F={} kappa={}",
                    best, min_form, branching, p, f, big_f, kappa
                ));
                break;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > 10.0 {
        failures.push(format!("runtime {:.2}s exceeds 10s", elapsed));
    }
    report(
        "piecewise and minimization forms agree",
        &failures,
        format!(
            "10000 random parameter draws, {} grid minimizations, {:.2}s",
            grid_checks, elapsed
        ),
    );
}

fn next_after(x: f64, up: bool) -> f64 {
    let bits = x.to_bits();
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}

#[test]
fn desk_value_and_branch_continuity() {
    let mut failures = Vec::new();
    let piecewise = forms::dp_piecewise(2.0, 1.0, 0.5, 2, 2.0).unwrap();
    let min_form = forms::dp_min_form(2.0, 1.0, 0.5, 2, 2.0).unwrap();
    if (piecewise - 1.875).abs() > 1e-12 || (min_form - 1.875).abs() > 1e-12 {
        failures.push(format!("desk value: piecewise={} min={}", piecewise, min_form));
    }
    // Branch boundaries for F=2, f=1, N=2, p=2 sit at 3/4 and 3/8.
    for boundary in [0.75, 0.375] {
        let at = forms::dp_piecewise(2.0, 1.0, boundary, 2, 2.0).unwrap();
        let below = forms::dp_piecewise(2.0, 1.0, next_after(boundary, false), 2, 2.0).unwrap();
        let above = forms::dp_piecewise(2.0, 1.0, next_after(boundary, true), 2, 2.0).unwrap();
        if (at - below).abs() > 1e-12 || (at - above).abs() > 1e-12 {
            failures.push(format!(
                "discontinuity at kappa={}: {} | {} | {}",
                boundary, below, at, above
            ));
        }
    }
    report(
        "desk value 15/8 and branch continuity",
        &failures,
        "both forms exact at kappa=1/2; boundaries 3/4 and 3/8 continuous".into(),
    );
}

#[test]
fn random_function_campaign_respects_lower_bounds() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut summaries = Vec::new();
    for (branching, depth, q) in [(2u32, 5u32, "3"), (2, 5, "4"), (3, 4, "3"), (3, 4, "4")] {
        let mut out = Vec::new();
        let code = bellman_lab::cli::run(
            [
                "bellctl", "verify", "--samples", "1000", "--seed", "9",
                "--N", &branching.to_string(), "--depth", &depth.to_string(),
                "--p", "2", "--q", q, "--tol", "1e-9",
                "--out", "/dev/null",
            ]
            .iter()
            .map(|s| s.to_string()),
            &mut out,
        );
        let text = String::from_utf8(out).unwrap();
        let min_slack: f64 = text
            .split("min_slack=")
            .nth(1)
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(f64::NEG_INFINITY);
        if code != 0 || min_slack < -1e-9 {
            failures.push(format!(
                "N={} depth={} q={}: exit {} min_slack {}",
                branching, depth, q, code, min_slack
            ));
        }
        summaries.push(format!("N={} q={} slack {:.1e}", branching, q, min_slack));
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > 60.0 {
        failures.push(format!("runtime {:.2}s exceeds 60s", elapsed));
    }
    report(
        "random campaigns respect every lower bound",
        &failures,
        format!("{} in {:.2}s", summaries.join(", "), elapsed),
    );
}

#[test]
fn weak_constant_matches_grid_supremum() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut small_case = 0;
    let mut large_case = 0;
    for _ in 0..100 {
        let branching = *[2u32, 3].get(rng.gen_range(0..2)).unwrap();
        let p: f64 = rng.gen_range(1.5..3.5);
        let q: f64 = p + rng.gen_range(0.2..3.0f64);
        let f = rng.gen_range(-1.0..1.0f64).exp();
        let ratio = rng.gen_range(0.0..50.0f64.ln()).exp();
        let big_f = f.powf(p) * ratio;
        if (q - 1.0) / (q - p) * f.powf(p) / big_f < 1.0 {
            small_case += 1;
        } else {
            large_case += 1;
        }
        let closed = forms::weak_lower(big_f, f, branching, p, q).unwrap();
        let mut grid_sup = 0.0f64;
        let points = 20_000;
        for j in 1..=points {
            let kappa = (1e-5f64.ln() * (1.0 - j as f64 / points as f64)).exp();
            let dp = forms::dp_piecewise(big_f, f, kappa, branching, p).unwrap();
            grid_sup = grid_sup.max((kappa.powf(-1.0 + p / q) * dp).powf(1.0 / p));
        }
        if (closed - grid_sup).abs() > 1e-6 * closed.abs().max(1.0) {
            failures.push(format!(
                "closed {} vs grid {} at N={} p={} q={} f={} F={}",
                closed, grid_sup, branching, p, q, f, big_f
            ));
            break;
        }
    }
    if small_case == 0 || large_case == 0 {
        failures.push(format!(
            "parameter sample did not cover both regimes ({} / {})",
            small_case, large_case
        ));
    }
    report(
        "weak-type constant matches the grid supremum",
        &failures,
        format!(
            "100 parameter draws, regimes {} below / {} above threshold",
            small_case, large_case
        ),
    );
}

#[test]
fn stopping_cells_satisfy_decomposition_identities() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = 2.0;
    for i in 0..1000 {
        let branching = *[2u32, 3].get(rng.gen_range(0..2)).unwrap();
        let depth = rng.gen_range(1..=4u32);
        let params = TreeParams::new(branching, depth).unwrap();
        let leaves: Vec<f64> = (0..params.leaf_count())
            .map(|_| rng.gen_range(-2.0..2.0f64).exp())
            .collect();
        let phi = StepFunction::new(params, leaves).unwrap();
        let f = phi.integral();
        let big_f = phi.integral_power(p);
        let u = f * (1.0 + rng.gen_range(0.0..3.0f64));
        let n = branching as f64;
        let d = phi.stopping_decomposition(u, p).unwrap();
        for cell in &d.cells {
            if !(cell.beta > u && cell.beta <= n * u + 1e-10 * u) {
                failures.push(format!("case {}: beta {} outside (u, Nu]", i, cell.beta));
            }
            let h = forms::h_convex_test(cell.beta / u, branching, p).unwrap();
            if h > 1e-12 {
                failures.push(format!("case {}: h({}) = {} > 0", i, cell.beta / u, h));
            }
        }
        let holder = d.kappa1.powf(p - 1.0) * d.p_integral - d.integral.powf(p);
        if holder < -1e-10 * (1.0 + d.p_integral) {
            failures.push(format!("case {}: Holder slack {}", i, holder));
        }
        let residual = u.powf(p - 1.0) * (f - d.integral) - (big_f - d.p_integral);
        if residual < -1e-10 * (1.0 + big_f) {
            failures.push(format!("case {}: residual slack {}", i, residual));
        }
        if failures.len() > 5 {
            break;
        }
    }
    report(
        "stopping cells satisfy the decomposition identities",
        &failures,
        "1000 random (function, threshold) instances".into(),
    );
}

#[test]
fn oracle_gap_closes_at_equality_configuration() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let query = BellmanQuery {
        branching: 2,
        p: 2.0,
        q: Some(3.0),
        big_f: 2.0,
        f: 1.0,
        kappa: None,
        level: None,
    };
    let spec = ObjectiveSpec::StrongQ { p: 2.0, q: 3.0 };
    let results = oracle::sandwich(&query, &spec, &[1, 2, 3, 4], &[21, 22], 3000).unwrap();
    let gaps: Vec<f64> = results.iter().map(|r| r.gap).collect();
    if !gaps.iter().any(|g| g.abs() <= 1e-9) {
        failures.push(format!("no depth reached gap 1e-9: {:?}", gaps));
    }
    for r in &results {
        if r.upper < r.lower - 1e-9 * r.lower {
            failures.push(format!("upper {} dipped below lower {}", r.upper, r.lower));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > 30.0 {
        failures.push(format!("runtime {:.2}s exceeds 30s", elapsed));
    }
    report(
        "oracle sandwich closes at the equality configuration",
        &failures,
        format!("gaps {:?} in {:.2}s", gaps, elapsed),
    );
}

#[test]
fn concentration_excess_decays_with_depth() {
    let mut failures = Vec::new();
    let (p, q, f, big_f) = (2.0, 1.5, 1.0, 2.0);
    let mut excesses = Vec::new();
    for m in 1u32..=8 {
        let (phi, _) = extremizers::concentrated_function(2, m, f, big_f, p, m + 4).unwrap();
        let excess = phi.maximal().integral_power(q) - f.powf(q);
        excesses.push(excess);
    }
    for pair in excesses.windows(2) {
        if pair[1] >= pair[0] {
            failures.push(format!("excess not strictly decreasing: {:?}", excesses));
            break;
        }
    }
    if excesses[7] >= 0.5 * excesses[1] {
        failures.push(format!(
            "m=8 excess {} not below half of m=2 excess {}",
            excesses[7], excesses[1]
        ));
    }
    report(
        "concentration excess decays with depth",
        &failures,
        format!(
            "excess trajectory {:?}",
            excesses.iter().map(|e| (e * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn top_integral_construction_approaches_bound() {
    let mut failures = Vec::new();
    let (big_f, f, kappa, branching, p) = (2.0, 1.0, 0.5, 2u32, 2.0);
    let target = forms::dp_piecewise(big_f, f, kappa, branching, p).unwrap();
    let mut achieved = Vec::new();
    let mut gaps = Vec::new();
    for depth in [2u32, 4, 6, 8] {
        let (_, rep) =
            extremizers::dp_near_extremizer(big_f, f, kappa, branching, p, depth).unwrap();
        achieved.push(rep.achieved_value);
        gaps.push(rep.relative_gap);
    }
    for pair in achieved.windows(2) {
        if pair[1] > pair[0] + 1e-12 {
            failures.push(format!("achieved values increase: {:?}", achieved));
            break;
        }
    }
    for &a in &achieved {
        if a < target - 1e-12 {
            failures.push(format!("achieved {} fell below the bound {}", a, target));
        }
    }
    if gaps[3] > gaps[0] {
        failures.push(format!("gap at depth 8 ({}) exceeds depth 2 ({})", gaps[3], gaps[0]));
    }
    report(
        "top-integral construction approaches the bound",
        &failures,
        format!("achieved {:?} against target {}", achieved, target),
    );
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let run = |args: Vec<String>| -> (i32, String) {
        let mut out = Vec::new();
        let code = bellman_lab::cli::run(args, &mut out);
        (code, String::from_utf8(out).unwrap())
    };
    for (label, base_args) in [
        (
            "verify",
            vec![
                "bellctl", "verify", "--samples", "50", "--seed", "3", "--N", "2", "--depth",
                "4", "--p", "2", "--q", "3",
            ],
        ),
        (
            "oracle",
            vec![
                "bellctl", "oracle", "--N", "2", "--p", "2", "--q", "3", "--F", "1.7", "--f",
                "1", "--depth-list", "1,2,3", "--seed", "17",
            ],
        ),
    ] {
        let mut outputs = Vec::new();
        for i in 0..2 {
            let path = dir.path().join(format!("{}-{}.csv", label, i));
            let mut args: Vec<String> = base_args.iter().map(|s| s.to_string()).collect();
            args.push("--out".into());
            args.push(path.to_str().unwrap().into());
            let (code, stdout) = run(args);
            if code != 0 {
                failures.push(format!("{} run {} exited {}", label, i, code));
            }
            outputs.push((std::fs::read(&path).unwrap(), stdout));
        }
        if outputs[0] != outputs[1] {
            failures.push(format!("{} outputs differ between identical runs", label));
        }
    }
    report(
        "identical seeds give identical outputs",
        &failures,
        "verify and oracle runs byte-identical".into(),
    );
}
