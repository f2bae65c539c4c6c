//! Explicit extremal and near-extremal constructions: the chain function and
//! its analytic maximal profile, the concentrated two-moment function, the
//! composite near-extremizer for the D_p bound, and a bound-verification
//! harness used by the random campaigns.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::forms;
use crate::scalar::Scalar;
use crate::tree::{CellIndex, LayerCake, StepFunction, TreeParams};

/// Comparison of a construction against the closed-form bound it targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremizerReport {
    pub target_value: f64,
    pub achieved_value: f64,
    pub achieved_f: f64,
    #[serde(rename = "achieved_F")]
    pub achieved_big_f: f64,
    pub depth: u32,
    pub relative_gap: f64,
}

fn relative_gap(achieved: f64, target: f64) -> f64 {
    (achieved - target) / target.max(1e-300)
}

/// φ = f·N^m on the single all-zeros leaf cell, zero elsewhere; ∫φ = f and
/// ∫φ^p = N^{m(p−1)} f^p for every p.
pub fn chain_function<S: Scalar>(branching: u32, m: u32, f: S) -> Result<StepFunction<S>> {
    ensure(f > S::zero(), "f must be positive")?;
    let params = TreeParams::new(branching, m)?;
    let mut leaves = vec![S::zero(); params.leaf_count()];
    let scale = S::from_int(branching as i64).powu(m);
    leaves[0] = f * scale;
    StepFunction::new(params, leaves)
}

/// Analytic distribution of M_T applied to the chain function: value f·N^m on
/// measure N^{−m}, value f·N^s on measure (1−1/N)·N^{−s} for s = m−1,…,1, and
/// value f on the level-0 remainder of measure 1−1/N.
pub fn chain_profile<S: Scalar>(branching: u32, m: u32, f: S) -> Result<LayerCake<S>> {
    ensure(f > S::zero(), "f must be positive")?;
    ensure(branching >= 2, "branching factor must be at least 2")?;
    if m == 0 {
        return LayerCake::new(vec![(f, S::one())]);
    }
    let n = S::from_int(branching as i64);
    let co = (n.clone() - S::one()) / n.clone(); // 1 - 1/N
    let mut atoms = Vec::with_capacity(m as usize + 1);
    atoms.push((
        f.clone() * n.powu(m),
        S::ratio(1, (branching as i64).pow(m)),
    ));
    for s in (1..m).rev() {
        atoms.push((
            f.clone() * n.powu(s),
            co.clone() * S::ratio(1, (branching as i64).pow(s)),
        ));
    }
    atoms.push((f, co));
    LayerCake::new(atoms)
}

/// Two-moment function η = a·χ_C on a sub-collection C of deep leaves of the
/// all-zeros level-m cell, constant f outside that cell. The measure of C is
/// rounded to the nearest representable N-adic value; the mean is kept exact
/// and the achieved p-moment is reported.
pub fn concentrated_function(
    branching: u32,
    m: u32,
    f: f64,
    big_f: f64,
    p: f64,
    depth_extension: u32,
) -> Result<(StepFunction<f64>, ExtremizerReport)> {
    ensure(m >= 1, "m must be at least 1")?;
    ensure(f > 0.0 && p > 1.0, "requires f > 0 and p > 1")?;
    ensure(f.powf(p) <= big_f * (1.0 + 1e-12), "moment constraint violated: f^p > F")?;
    let depth = m + depth_extension;
    let params = TreeParams::new(branching, depth)?;
    let n = branching as f64;
    let cell_measure = n.powi(-(m as i32));
    let inner_p = big_f - f.powf(p) * (1.0 - cell_measure);
    let amplitude = (inner_p / (f * cell_measure)).powf(1.0 / (p - 1.0));
    let target_measure = f * cell_measure / amplitude;
    ensure(
        target_measure <= cell_measure * (1.0 + 1e-12),
        "target support exceeds the carrier cell",
    )?;
    let total = params.leaf_count() as f64;
    let inner_leaves = (branching as usize).pow(depth_extension);
    let k = ((target_measure * total).round() as usize).clamp(1, inner_leaves);
    // Re-solve the amplitude from the rounded support so the mean stays exact.
    let support = k as f64 / total;
    let amplitude = f * cell_measure / support;
    let mut leaves = vec![f; params.leaf_count()];
    for leaf in leaves.iter_mut().take(inner_leaves) {
        *leaf = 0.0;
    }
    for leaf in leaves.iter_mut().take(k) {
        *leaf = amplitude;
    }
    let phi = StepFunction::new(params, leaves)?;
    let achieved_big_f = phi.integral_power(p);
    let report = ExtremizerReport {
        target_value: big_f,
        achieved_value: achieved_big_f,
        achieved_f: phi.integral(),
        achieved_big_f,
        depth,
        relative_gap: relative_gap(achieved_big_f, big_f),
    };
    Ok((phi, report))
}

/// Maximal aligned cells tiling the leftmost `count` leaves at the given depth.
fn leftmost_cells(count: usize, params: &TreeParams) -> Vec<CellIndex> {
    let n = params.branching() as usize;
    let mut cells = Vec::new();
    let mut pos = 0usize;
    while pos < count {
        let mut width = n.pow(params.depth());
        // Largest aligned cell starting at pos that fits in the remainder.
        while width > 1 && (!pos.is_multiple_of(width) || pos + width > count) {
            width /= n;
        }
        let level = params.depth() - (width as f64).log(n as f64).round() as u32;
        let mut digits = Vec::with_capacity(level as usize);
        let mut idx = pos / width;
        for _ in 0..level {
            digits.push((idx % n) as u32);
            idx /= n;
        }
        digits.reverse();
        cells.push(CellIndex::new(digits));
        pos += width;
    }
    cells
}

/// Fill `slice` with a block of mean `u0` whose normalized p-moment ratio
/// G/u0^p approximates `target_ratio` from above: a mixture of scaled chains
/// of two consecutive depths, rounded toward concentration. `ratio_step` is
/// the per-level concentration factor N^(p−1).
fn fill_block(
    slice: &mut [f64],
    branching: u32,
    budget: u32,
    u0: f64,
    target_ratio: f64,
    ratio_step: f64,
) {
    let n = branching as usize;
    if target_ratio <= 1.0 + 1e-12 || budget == 0 {
        for v in slice.iter_mut() {
            *v = u0;
        }
        return;
    }
    let chain = |slice: &mut [f64], depth: u32| {
        let head = slice.len() / n.pow(depth);
        let value = u0 * (branching as f64).powi(depth as i32);
        for v in slice.iter_mut() {
            *v = 0.0;
        }
        for v in slice.iter_mut().take(head) {
            *v = value;
        }
    };
    let mut m1 = 0u32;
    while m1 < budget && ratio_step.powi(m1 as i32 + 1) <= target_ratio {
        m1 += 1;
    }
    if ratio_step.powi(m1 as i32) >= target_ratio || m1 == budget {
        // Either an exact power (single chain) or the budget is exhausted.
        chain(slice, m1);
        return;
    }
    let m2 = m1 + 1;
    let sub_count = n.pow(budget - m2);
    let lo = ratio_step.powi(m1 as i32);
    let hi = ratio_step.powi(m2 as i32);
    let theta = (hi - target_ratio) / (hi - lo);
    let shallow = (theta * sub_count as f64).floor() as usize; // round toward concentration
    let sub_len = slice.len() / sub_count;
    for (i, sub) in slice.chunks_mut(sub_len).enumerate() {
        chain(sub, if i < shallow { m1 } else { m2 });
    }
}

/// Composite near-extremizer: u₀ = u_star, scaled chain mixtures of
/// average u₀ on leftmost cells of total measure κ, a constant-u₀ plateau of
/// rounded measure (f−κu₀)/u₀ and a low constant absorbing the residual
/// mass. The mean is exact; rounding errs toward a larger p-moment so the
/// achieved top-κ integral stays at or above the closed-form target.
pub fn dp_near_extremizer(
    big_f: f64,
    f: f64,
    kappa: f64,
    branching: u32,
    p: f64,
    depth: u32,
) -> Result<(StepFunction<f64>, ExtremizerReport)> {
    ensure(f > 0.0 && p > 1.0, "requires f > 0 and p > 1")?;
    ensure(
        f.powf(p) <= big_f * (1.0 + 1e-12),
        "moment constraint violated: f^p > F",
    )?;
    ensure(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]")?;
    let params = TreeParams::new(branching, depth)?;
    let total = params.leaf_count();
    let scaled = kappa * total as f64;
    let k_leaves = scaled.round() as usize;
    ensure(
        (scaled - scaled.round()).abs() < 1e-9 && k_leaves >= 1,
        format!("kappa = {} is not N-adic at depth {}", kappa, depth),
    )?;
    let target = forms::dp_piecewise(big_f, f, kappa, branching, p)?;

    if big_f <= f.powf(p) * (1.0 + 1e-12) {
        let phi = StepFunction::constant(params, f)?;
        let achieved = phi.maximal().top_measure_integral(kappa, p)?;
        let report = ExtremizerReport {
            target_value: target,
            achieved_value: achieved,
            achieved_f: f,
            achieved_big_f: phi.integral_power(p),
            depth,
            relative_gap: relative_gap(achieved, target),
        };
        return Ok((phi, report));
    }

    let u0 = forms::u_star(big_f, f, kappa, branching, p)?;
    let plateau_measure = (f - kappa * u0) / u0;
    ensure(
        (-1e-12..=1.0 - kappa + 1e-12).contains(&plateau_measure),
        "plateau measure outside [0, 1-kappa]; inadmissible u",
    )?;

    let mut leaves = vec![0.0f64; total];

    // Complement side: plateau at u0 rounded down, residual mass spread at a
    // constant level that cannot create new maxima.
    let rest = total - k_leaves;
    let plateau_leaves = ((plateau_measure * total as f64).floor() as usize).min(rest);
    let residual_mass = f - kappa * u0 - u0 * plateau_leaves as f64 / total as f64;
    let low_leaves = rest - plateau_leaves;
    let low = if low_leaves > 0 {
        (residual_mass * total as f64 / low_leaves as f64).min(u0)
    } else {
        0.0
    };
    for v in leaves[k_leaves..k_leaves + plateau_leaves].iter_mut() {
        *v = u0;
    }
    for v in leaves[k_leaves + plateau_leaves..].iter_mut() {
        *v = low;
    }

    // Stopping-cell side: total p-mass F minus what the complement carries.
    let complement_p = u0.powf(p) * plateau_leaves as f64 / total as f64
        + low.powf(p) * low_leaves as f64 / total as f64;
    let block_target = big_f - complement_p;
    let normalized = block_target / kappa; // per-measure p-moment on the cells
    let target_ratio = (normalized / u0.powf(p)).max(1.0);

    let ratio_step = (branching as f64).powf(p - 1.0);
    for cell in leftmost_cells(k_leaves, &params) {
        let range = cell.leaf_range(&params)?;
        let budget = depth - cell.level();
        fill_block(&mut leaves[range], branching, budget, u0, target_ratio, ratio_step);
    }

    let phi = StepFunction::new(params, leaves)?;
    let achieved = phi.maximal().top_measure_integral(kappa, p)?;
    let report = ExtremizerReport {
        target_value: target,
        achieved_value: achieved,
        achieved_f: phi.integral(),
        achieved_big_f: phi.integral_power(p),
        depth,
        relative_gap: relative_gap(achieved, target),
    };
    Ok((phi, report))
}

/// One slack entry of a verification run: functional minus closed-form bound,
/// normalized by max(1, bound).
#[derive(Debug, Clone, Serialize)]
pub struct SlackEntry {
    pub check: String,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub mean: f64,
    pub p_moment: f64,
    pub min_slack: f64,
    pub checks: Vec<SlackEntry>,
}

/// Evaluate every closed-form lower bound for φ against the actual
/// functionals of M_Tφ and return the minimum normalized slack.
pub fn verify_bounds(
    phi: &StepFunction<f64>,
    p: f64,
    q: f64,
    kappa_grid: &[f64],
    l_grid: &[f64],
) -> Result<BoundsReport> {
    verify_bounds_with_offset(phi, p, q, kappa_grid, l_grid, 0.0)
}

/// Same as [`verify_bounds`] but adds `offset` to every closed-form target;
/// nonzero offsets exist for exercising the failure path of campaigns.
pub fn verify_bounds_with_offset(
    phi: &StepFunction<f64>,
    p: f64,
    q: f64,
    kappa_grid: &[f64],
    l_grid: &[f64],
    offset: f64,
) -> Result<BoundsReport> {
    ensure(q > p && p > 1.0, "requires q > p > 1")?;
    let branching = phi.params().branching();
    let mean = phi.integral();
    let p_moment = phi.integral_power(p);
    let mut checks = Vec::new();
    if mean == 0.0 {
        return Ok(BoundsReport {
            mean,
            p_moment,
            min_slack: 0.0,
            checks,
        });
    }
    let maximal = phi.maximal();
    let cake = maximal.distribution();
    let slack = |value: f64, bound: f64| (value - (bound + offset)) / bound.abs().max(1.0);

    for &kappa in kappa_grid {
        let value = cake.top_measure_integral(kappa, p)?;
        let bound = forms::dp_piecewise(p_moment, mean, kappa, branching, p)?;
        checks.push(SlackEntry {
            check: format!("dp kappa={}", kappa),
            slack: slack(value, bound),
        });
    }
    {
        let value = cake.integral_power(q);
        let bound = forms::bpq_lower(p_moment, mean, branching, p, q)?;
        checks.push(SlackEntry {
            check: format!("bpq q={}", q),
            slack: slack(value, bound),
        });
    }
    for &level in l_grid {
        let level = level.max(mean);
        let value = cake.clamp_below(level).integral_power(q);
        let bound = forms::blq_lower(p_moment, mean, level, branching, p, q)?;
        checks.push(SlackEntry {
            check: format!("blq L={}", level),
            slack: slack(value, bound),
        });
    }
    {
        let value = cake.weak_norm(p, q)?;
        let bound = forms::weak_lower(p_moment, mean, branching, p, q)?;
        checks.push(SlackEntry {
            check: "weak".into(),
            slack: slack(value, bound),
        });
    }
    let min_slack = checks
        .iter()
        .map(|c| c.slack)
        .fold(f64::INFINITY, f64::min);
    Ok(BoundsReport {
        mean,
        p_moment,
        min_slack,
        checks,
    })
}

impl BoundsReport {
    pub fn violation(&self, tol: f64) -> Option<&SlackEntry> {
        self.checks.iter().find(|c| c.slack < -tol)
    }
}
