//! Brute-force and local-search upper bounds on the Bellman infima over
//! depth-m step functions, bracketing the closed-form lower bounds from
//! above. The oracle never claims optimality: it reports the best feasible
//! value found together with the matching closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::extremizers;
use crate::forms;
use crate::tree::{StepFunction, TreeParams};

const MOMENT_TOL: f64 = 1e-10;

/// Query parameters shared by the closed forms and the oracle runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellmanQuery {
    #[serde(rename = "N")]
    pub branching: u32,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(rename = "F")]
    pub big_f: f64,
    pub f: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

impl BellmanQuery {
    pub fn validate(&self) -> Result<()> {
        ensure(self.branching >= 2, "branching factor must be at least 2")?;
        ensure(self.p > 1.0, "p must exceed 1")?;
        ensure(self.f > 0.0 && self.big_f > 0.0, "moments must be positive")?;
        ensure(
            self.f.powf(self.p) <= self.big_f * (1.0 + 1e-9),
            "moment constraint violated: f^p > F",
        )?;
        if let Some(kappa) = self.kappa {
            ensure(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]")?;
        }
        if let Some(level) = self.level {
            ensure(level >= self.f, "L must be at least f")?;
        }
        Ok(())
    }
}

/// The functional of M_Tφ that an oracle run minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// ∫ (M_Tφ)^q dμ.
    StrongQ { p: f64, q: f64 },
    /// sup over μ(E)=κ of ∫_E (M_Tφ)^p dμ.
    TopKappaP { p: f64, kappa: f64 },
    /// ∫ max(M_Tφ, L)^q dμ.
    MaxWithL { p: f64, q: f64, level: f64 },
}

impl ObjectiveSpec {
    pub fn p(&self) -> f64 {
        match *self {
            ObjectiveSpec::StrongQ { p, .. }
            | ObjectiveSpec::TopKappaP { p, .. }
            | ObjectiveSpec::MaxWithL { p, .. } => p,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ObjectiveSpec::StrongQ { .. } => "strong_q",
            ObjectiveSpec::TopKappaP { .. } => "top_kappa_p",
            ObjectiveSpec::MaxWithL { .. } => "max_with_L",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ObjectiveSpec::StrongQ { p, q } => {
                ensure(p > 1.0 && q > 0.0, "requires p > 1 and q > 0")
            }
            ObjectiveSpec::TopKappaP { p, kappa } => {
                ensure(p > 1.0, "p must exceed 1")?;
                ensure(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]")
            }
            ObjectiveSpec::MaxWithL { p, q, level } => {
                ensure(p > 1.0 && q > p, "requires q > p > 1")?;
                ensure(level > 0.0, "L must be positive")
            }
        }
    }
}

/// Evaluate the objective functional on φ.
pub fn evaluate_objective(phi: &StepFunction<f64>, spec: &ObjectiveSpec) -> Result<f64> {
    spec.validate()?;
    let cake = phi.maximal().distribution();
    match *spec {
        ObjectiveSpec::StrongQ { q, .. } => Ok(cake.integral_power(q)),
        ObjectiveSpec::TopKappaP { p, kappa } => cake.top_measure_integral(kappa, p),
        ObjectiveSpec::MaxWithL { q, level, .. } => Ok(cake.clamp_below(level).integral_power(q)),
    }
}

/// The closed-form lower bound paired with an objective.
pub fn lower_bound(spec: &ObjectiveSpec, big_f: f64, f: f64, branching: u32) -> Result<f64> {
    match *spec {
        ObjectiveSpec::StrongQ { p, q } => {
            if q >= p {
                forms::bpq_lower(big_f, f, branching, p, q)
            } else {
                forms::bq_less_p(f, q)
            }
        }
        ObjectiveSpec::TopKappaP { p, kappa } => {
            forms::dp_piecewise(big_f, f, kappa, branching, p)
        }
        ObjectiveSpec::MaxWithL { p, q, level } => {
            forms::blq_lower(big_f, f, level.max(f), branching, p, q)
        }
    }
}

/// Bracketing outcome: closed-form lower bound against the best feasible
/// value found, with the minimizing step function.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichResult {
    pub kind: &'static str,
    #[serde(rename = "N")]
    pub branching: u32,
    pub depth: u32,
    pub p: f64,
    pub q: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(rename = "L")]
    pub level: Option<f64>,
    #[serde(rename = "F")]
    pub big_f: f64,
    pub f: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub evaluations: u64,
    pub seed: u64,
    pub argmin: StepFunction<f64>,
}

impl SandwichResult {
    pub fn csv_header() -> &'static str {
        "kind,N,m,p,q,kappa,L,F,f,lower,upper,gap,evaluations,seed"
    }

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.branching,
            self.depth,
            self.p,
            opt(self.q),
            opt(self.kappa),
            opt(self.level),
            self.big_f,
            self.f,
            self.lower,
            self.upper,
            self.gap,
            self.evaluations,
            self.seed
        )
    }
}

fn spec_fields(spec: &ObjectiveSpec) -> (Option<f64>, Option<f64>, Option<f64>) {
    match *spec {
        ObjectiveSpec::StrongQ { q, .. } => (Some(q), None, None),
        ObjectiveSpec::TopKappaP { kappa, .. } => (None, Some(kappa), None),
        ObjectiveSpec::MaxWithL { q, level, .. } => (Some(q), None, Some(level)),
    }
}

fn fix_mean(values: &mut [f64], f: f64) {
    let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
    if mean > 0.0 {
        let scale = f / mean;
        for v in values.iter_mut() {
            *v *= scale;
        }
    } else {
        for v in values.iter_mut() {
            *v = f;
        }
    }
}

fn moment(values: &[f64], p: f64) -> f64 {
    values
        .iter()
        .map(|&v| if v == 0.0 { 0.0 } else { v.powf(p) })
        .sum::<f64>()
        / values.len() as f64
}

/// Map an arbitrary nonnegative leaf vector to one satisfying ∫φ = f and
/// ∫φ^p = F within tolerance, via mean rescaling alternated with a bisection
/// along the spread family φ_t = f + t(φ − f).
pub fn feasible_project(
    params: TreeParams,
    values: &[f64],
    f: f64,
    big_f: f64,
    p: f64,
) -> Result<StepFunction<f64>> {
    ensure(f > 0.0 && p > 1.0, "requires f > 0 and p > 1")?;
    ensure(
        f.powf(p) <= big_f * (1.0 + 1e-9),
        "moment constraint violated: f^p > F",
    )?;
    ensure(values.len() == params.leaf_count(), "leaf count mismatch")?;
    let tol = MOMENT_TOL * big_f.max(1.0) * 0.5;
    let mut v: Vec<f64> = values.iter().map(|&x| x.max(0.0)).collect();
    fix_mean(&mut v, f);

    let curve = |base: &[f64], t: f64| -> Vec<f64> {
        let mut w: Vec<f64> = base.iter().map(|&x| (f + t * (x - f)).max(0.0)).collect();
        fix_mean(&mut w, f);
        w
    };

    for _ in 0..64 {
        let current = moment(&v, p);
        if (current - big_f).abs() <= tol {
            return StepFunction::new(params, v);
        }
        let (mut lo, mut hi);
        if current > big_f {
            lo = 0.0;
            hi = 1.0;
        } else {
            lo = 1.0;
            hi = 2.0;
            let mut reached = false;
            for _ in 0..60 {
                if moment(&curve(&v, hi), p) >= big_f {
                    reached = true;
                    break;
                }
                lo = hi;
                hi *= 2.0;
            }
            if !reached {
                return Err(Error::ProjectionFailed);
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if moment(&curve(&v, mid), p) < big_f {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        v = curve(&v, hi);
    }
    let final_moment = moment(&v, p);
    let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
    if (final_moment - big_f).abs() <= tol && (mean - f).abs() <= tol {
        StepFunction::new(params, v)
    } else {
        Err(Error::ProjectionFailed)
    }
}

fn nonincreasing_partitions(total: u32, slots: usize) -> Vec<Vec<u32>> {
    fn recurse(remaining: u32, max_part: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 0 {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let cap = max_part.min(remaining);
        for part in (0..=cap).rev() {
            // Nonincreasing and still able to exhaust the remainder.
            if part as u64 * slots as u64 >= remaining as u64 {
                cur.push(part);
                recurse(remaining - part, part, slots - 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    recurse(total, total, slots, &mut Vec::new(), &mut out);
    out
}

/// Deterministic grid search over nonincreasing leaf vectors (the sibling
/// permutation representatives), projected onto the moment constraints.
pub fn exhaustive_search(
    branching: u32,
    depth: u32,
    f: f64,
    big_f: f64,
    p: f64,
    spec: &ObjectiveSpec,
    grid_resolution: u32,
) -> Result<SandwichResult> {
    let params = TreeParams::new(branching, depth)?;
    ensure(
        params.leaf_count() <= (branching as usize).pow(2),
        "exhaustive search is limited to two levels",
    )?;
    ensure(grid_resolution >= 16, "grid resolution must be at least 16")?;
    spec.validate()?;
    let lower = lower_bound(spec, big_f, f, branching)?;
    let mut best: Option<(f64, StepFunction<f64>)> = None;
    let mut evaluations = 0u64;
    for partition in nonincreasing_partitions(grid_resolution, params.leaf_count()) {
        let values: Vec<f64> = partition.iter().map(|&k| k as f64).collect();
        let Ok(phi) = feasible_project(params, &values, f, big_f, p) else {
            continue;
        };
        let value = evaluate_objective(&phi, spec)?;
        evaluations += 1;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, phi));
        }
    }
    let (upper, argmin) =
        best.ok_or_else(|| Error::Infeasible("no feasible grid point found".into()))?;
    let (q, kappa, level) = spec_fields(spec);
    Ok(SandwichResult {
        kind: spec.kind(),
        branching,
        depth,
        p,
        q,
        kappa,
        level,
        big_f,
        f,
        lower,
        upper,
        gap: (upper - lower) / lower.max(1e-12),
        evaluations,
        seed: 0,
    argmin,
    })
}

fn structured_starts(
    branching: u32,
    depth: u32,
    f: f64,
    big_f: f64,
    p: f64,
    spec: &ObjectiveSpec,
) -> Vec<Vec<f64>> {
    let mut starts = Vec::new();
    for chain_depth in 0..=depth {
        if let Ok(chain) = extremizers::chain_function(branching, chain_depth, f) {
            let lift = (branching as usize).pow(depth - chain_depth);
            let mut leaves = Vec::with_capacity((branching as usize).pow(depth));
            for &v in chain.leaves() {
                leaves.extend(std::iter::repeat_n(v, lift));
            }
            starts.push(leaves);
        }
    }
    if depth >= 1 {
        if let Ok((phi, _)) = extremizers::concentrated_function(branching, 1, f, big_f, p, depth - 1)
        {
            starts.push(phi.leaves().to_vec());
        }
    }
    if let ObjectiveSpec::TopKappaP { kappa, .. } = *spec {
        if let Ok((phi, _)) = extremizers::dp_near_extremizer(big_f, f, kappa, branching, p, depth) {
            starts.push(phi.leaves().to_vec());
        }
    }
    starts
}

/// Multi-start coordinate descent with re-projection after every move.
/// Starts are the structural constructions, the caller-provided extra points
/// and seeded random vectors; the result is deterministic given the seeds.
pub fn local_search(
    branching: u32,
    depth: u32,
    f: f64,
    big_f: f64,
    p: f64,
    spec: &ObjectiveSpec,
    seeds: &[u64],
    iteration_budget: u64,
    extra_starts: &[Vec<f64>],
) -> Result<SandwichResult> {
    let params = TreeParams::new(branching, depth)?;
    spec.validate()?;
    let lower = lower_bound(spec, big_f, f, branching)?;
    let n = params.leaf_count();

    let mut labeled: Vec<(u64, Vec<f64>)> = structured_starts(branching, depth, f, big_f, p, spec)
        .into_iter()
        .map(|s| (0u64, s))
        .collect();
    labeled.extend(extra_starts.iter().map(|s| (0u64, s.clone())));
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let leaves: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0_f64).exp()).collect();
        labeled.push((seed, leaves));
    }

    let mut evaluations = 0u64;
    let mut best: Option<(f64, StepFunction<f64>, u64)> = None;
    for (seed, start) in labeled {
        let Ok(mut phi) = feasible_project(params, &start, f, big_f, p) else {
            continue;
        };
        let mut value = evaluate_objective(&phi, spec)?;
        evaluations += 1;
        let mut step = 0.5;
        while step > 1e-7 && evaluations < iteration_budget {
            let mut improved = false;
            for i in 0..n {
                for dir in 0..2 {
                    let mut candidate = phi.leaves().to_vec();
                    if candidate[i] == 0.0 {
                        if dir == 1 {
                            continue;
                        }
                        candidate[i] = step * f;
                    } else if dir == 0 {
                        candidate[i] *= 1.0 + step;
                    } else {
                        candidate[i] /= 1.0 + step;
                    }
                    let Ok(next) = feasible_project(params, &candidate, f, big_f, p) else {
                        continue;
                    };
                    let next_value = evaluate_objective(&next, spec)?;
                    evaluations += 1;
                    if next_value < value - 1e-15 {
                        value = next_value;
                        phi = next;
                        improved = true;
                    }
                    if evaluations >= iteration_budget {
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            best = Some((value, phi, seed));
        }
    }
    let (upper, argmin, seed) =
        best.ok_or_else(|| Error::Infeasible("no start could be projected".into()))?;
    let (q, kappa, level) = spec_fields(spec);
    Ok(SandwichResult {
        kind: spec.kind(),
        branching,
        depth,
        p,
        q,
        kappa,
        level,
        big_f,
        f,
        lower,
        upper,
        gap: (upper - lower) / lower.max(1e-12),
        evaluations,
        seed,
        argmin,
    })
}

/// Run the oracle across a list of depths, carrying each argmin forward as a
/// start for the next depth so the gap sequence is nonincreasing.
pub fn sandwich(
    query: &BellmanQuery,
    spec: &ObjectiveSpec,
    depth_list: &[u32],
    seeds: &[u64],
    iteration_budget: u64,
) -> Result<Vec<SandwichResult>> {
    query.validate()?;
    spec.validate()?;
    let mut results: Vec<SandwichResult> = Vec::new();
    let mut carry: Option<(u32, Vec<f64>)> = None;
    for &depth in depth_list {
        let mut extra = Vec::new();
        if let Some((prev_depth, prev)) = &carry {
            if *prev_depth <= depth {
                let lift = (query.branching as usize).pow(depth - prev_depth);
                let mut leaves = Vec::with_capacity(prev.len() * lift);
                for &v in prev {
                    leaves.extend(std::iter::repeat_n(v, lift));
                }
                extra.push(leaves);
            }
        }
        let mut result = local_search(
            query.branching,
            depth,
            query.f,
            query.big_f,
            query.p,
            spec,
            seeds,
            iteration_budget,
            &extra,
        )?;
        if (query.branching as u64).pow(depth) <= (query.branching as u64).pow(2) {
            let grid = exhaustive_search(query.branching, depth, query.f, query.big_f, query.p, spec, 32)?;
            result.evaluations += grid.evaluations;
            if grid.upper < result.upper {
                result.upper = grid.upper;
                result.gap = grid.gap;
                result.argmin = grid.argmin;
                result.seed = grid.seed;
            }
        }
        carry = Some((depth, result.argmin.leaves().to_vec()));
        results.push(result);
    }
    Ok(results)
}
