//! Finite-depth model of an N-homogeneous tree-like family on a probability
//! space: step functions at leaf level, exact evaluation of the maximal
//! operator, distribution (layer-cake) bookkeeping, threshold selection and
//! the stopping-time decomposition.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ensure, Error, Result};
use crate::scalar::Scalar;

/// Hard cap on the number of leaves so addressing stays within `usize`.
const MAX_LEAVES: u64 = 1 << 26;

/// Branching factor N and depth m of the truncated tree. Every level-s cell
/// has measure N^(-s); there are N^m leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    branching: u32,
    depth: u32,
}

impl TreeParams {
    pub fn new(branching: u32, depth: u32) -> Result<Self> {
        ensure(branching >= 2, "branching factor must be at least 2")?;
        let mut count: u64 = 1;
        for _ in 0..depth {
            count = count.saturating_mul(branching as u64);
            ensure(count <= MAX_LEAVES, "tree too large")?;
        }
        Ok(TreeParams { branching, depth })
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        (self.branching as usize).pow(self.depth)
    }

    /// Measure of a single cell at the given level, as a scalar.
    pub fn cell_measure<S: Scalar>(&self, level: u32) -> S {
        S::ratio(1, (self.branching as i64).pow(level))
    }
}

/// Address of a tree cell by its digit path from the root; the empty path is
/// the whole space X.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    path: Vec<u32>,
}

impl CellIndex {
    pub fn root() -> Self {
        CellIndex { path: Vec::new() }
    }

    pub fn new(path: Vec<u32>) -> Self {
        CellIndex { path }
    }

    pub fn level(&self) -> u32 {
        self.path.len() as u32
    }

    pub fn path(&self) -> &[u32] {
        &self.path
    }

    pub fn child(&self, digit: u32) -> Self {
        let mut path = self.path.clone();
        path.push(digit);
        CellIndex { path }
    }

    pub fn validate(&self, params: &TreeParams) -> Result<()> {
        ensure(
            self.path.len() as u32 <= params.depth,
            format!("cell level {} exceeds depth {}", self.path.len(), params.depth),
        )?;
        if let Some(d) = self.path.iter().find(|&&d| d >= params.branching) {
            return Err(Error::InvalidCell(format!(
                "digit {} out of range for branching {}",
                d, params.branching
            )));
        }
        Ok(())
    }

    /// Half-open range of leaf indices descending from this cell.
    pub fn leaf_range(&self, params: &TreeParams) -> Result<std::ops::Range<usize>> {
        self.validate(params)?;
        let n = params.branching as usize;
        let mut start = 0usize;
        for &d in &self.path {
            start = start * n + d as usize;
        }
        let width = n.pow(params.depth - self.level());
        let start = start * width;
        Ok(start..start + width)
    }
}

/// Nonnegative T-step function given by its values on the N^m leaf cells.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<S> {
    params: TreeParams,
    leaves: Vec<S>,
}

impl<S: Scalar> StepFunction<S> {
    pub fn new(params: TreeParams, leaves: Vec<S>) -> Result<Self> {
        ensure(
            leaves.len() == params.leaf_count(),
            format!(
                "expected {} leaf values, got {}",
                params.leaf_count(),
                leaves.len()
            ),
        )?;
        for v in &leaves {
            ensure(
                v.is_valid() && *v >= S::zero(),
                "leaf values must be finite and nonnegative",
            )?;
        }
        Ok(StepFunction { params, leaves })
    }

    pub fn constant(params: TreeParams, value: S) -> Result<Self> {
        let n = params.leaf_count();
        Self::new(params, vec![value; n])
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn leaves(&self) -> &[S] {
        &self.leaves
    }

    fn leaf_measure(&self) -> S {
        self.params.cell_measure(self.params.depth)
    }

    /// ∫ φ dμ.
    pub fn integral(&self) -> S {
        let sum = self
            .leaves
            .iter()
            .fold(S::zero(), |acc, v| acc + v.clone());
        sum * self.leaf_measure()
    }

    /// Mean of φ over the given cell.
    pub fn average(&self, cell: &CellIndex) -> Result<S> {
        let range = cell.leaf_range(&self.params)?;
        let count = range.len() as i64;
        let sum = self.leaves[range]
            .iter()
            .fold(S::zero(), |acc, v| acc + v.clone());
        Ok(sum / S::from_int(count))
    }

    /// Conditional expectation onto level k, re-expressed at full depth.
    pub fn condexp(&self, level: u32) -> Result<Self> {
        ensure(
            level <= self.params.depth,
            format!("level {} out of range 0..={}", level, self.params.depth),
        )?;
        let block = (self.params.branching as usize).pow(self.params.depth - level);
        let mut leaves = Vec::with_capacity(self.leaves.len());
        for chunk in self.leaves.chunks(block) {
            let sum = chunk.iter().fold(S::zero(), |acc, v| acc + v.clone());
            let avg = sum / S::from_int(block as i64);
            leaves.extend(std::iter::repeat_n(avg, block));
        }
        Ok(StepFunction {
            params: self.params,
            leaves,
        })
    }

    /// Averages of φ over every cell, level by level (index 0 is the root).
    fn level_averages(&self) -> Vec<Vec<S>> {
        let n = self.params.branching as usize;
        let m = self.params.depth as usize;
        let mut levels: Vec<Vec<S>> = vec![Vec::new(); m + 1];
        levels[m] = self.leaves.clone();
        for k in (0..m).rev() {
            let next = &levels[k + 1];
            let mut cur = Vec::with_capacity(next.len() / n);
            for chunk in next.chunks(n) {
                let sum = chunk.iter().fold(S::zero(), |acc, v| acc + v.clone());
                cur.push(sum / S::from_int(n as i64));
            }
            levels[k] = cur;
        }
        levels
    }

    /// The localized maximal operator: leaf i of the result is the maximum of
    /// the averages of φ over all ancestors of leaf i, the leaf included.
    pub fn maximal(&self) -> Self {
        let n = self.params.branching as usize;
        let levels = self.level_averages();
        let mut running = vec![levels[0][0].clone()];
        for level in levels.iter().skip(1) {
            let mut next = Vec::with_capacity(level.len());
            for (i, avg) in level.iter().enumerate() {
                let parent = &running[i / n];
                let v = if *avg > *parent {
                    avg.clone()
                } else {
                    parent.clone()
                };
                next.push(v);
            }
            running = next;
        }
        StepFunction {
            params: self.params,
            leaves: running,
        }
    }

    /// ∫ φ^e dμ for an integer exponent (exact in rational mode).
    pub fn integral_powu(&self, e: u32) -> S {
        let sum = self
            .leaves
            .iter()
            .fold(S::zero(), |acc, v| acc + v.powu(e));
        sum * self.leaf_measure()
    }

    /// Canonical descending (value, measure) distribution of φ.
    pub fn distribution(&self) -> LayerCake<S> {
        let mut sorted = self.leaves.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("leaf values are comparable"));
        let unit = self.leaf_measure();
        let mut atoms: Vec<(S, S)> = Vec::new();
        for v in sorted {
            match atoms.last_mut() {
                Some((value, measure)) if *value == v => {
                    *measure = measure.clone() + unit.clone();
                }
                _ => atoms.push((v, unit.clone())),
            }
        }
        LayerCake { atoms }
    }

    /// Permute the N children of a cell (subtrees included). Every functional
    /// of this module is invariant under such relabelings.
    pub fn permute_siblings(&self, cell: &CellIndex, perm: &[u32]) -> Result<Self> {
        let n = self.params.branching as usize;
        ensure(perm.len() == n, "permutation must cover all children")?;
        let mut seen = vec![false; n];
        for &d in perm {
            ensure((d as usize) < n && !seen[d as usize], "not a permutation")?;
            seen[d as usize] = true;
        }
        ensure(
            cell.level() < self.params.depth,
            "cell has no child subtrees to permute",
        )?;
        let range = cell.leaf_range(&self.params)?;
        let width = range.len() / n;
        let mut leaves = self.leaves.clone();
        for (slot, &src) in perm.iter().enumerate() {
            let from = range.start + src as usize * width;
            let to = range.start + slot * width;
            leaves[to..to + width].clone_from_slice(&self.leaves[from..from + width]);
        }
        Ok(StepFunction {
            params: self.params,
            leaves,
        })
    }
}

impl StepFunction<f64> {
    /// ∫ φ^s dμ for a real exponent s > 0 (0^s := 0).
    pub fn integral_power(&self, s: f64) -> f64 {
        let sum: f64 = self
            .leaves
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { v.powf(s) })
            .sum();
        sum * self.leaf_measure()
    }

    /// sup over measurable E with μ(E)=κ of ∫_E φ^s dμ.
    pub fn top_measure_integral(&self, kappa: f64, s: f64) -> Result<f64> {
        self.distribution().top_measure_integral(kappa, s)
    }

    /// The κ-quantile threshold of M_Tφ: the smallest
    /// atom value u with μ({Mφ > u}) ≤ κ ≤ μ({Mφ ≥ u}).
    pub fn select_threshold(&self, kappa: f64) -> Result<f64> {
        ensure(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]")?;
        let cake = self.maximal().distribution();
        let mut cum = 0.0;
        for (value, measure) in &cake.atoms {
            cum += measure;
            if kappa <= cum + 1e-15 {
                return Ok(*value);
            }
        }
        // Reachable only through accumulated rounding; the last atom closes X.
        Ok(cake.atoms.last().expect("nonempty cake").0)
    }

    /// Maximal (shallowest-first) disjoint cells with average > u, together
    /// with the per-cell data λ_j, β_j, α_j and the aggregates κ₁, A, B.
    pub fn stopping_decomposition(&self, u: f64, p: f64) -> Result<MaximalDecomposition> {
        let f = self.integral();
        ensure(
            u >= f,
            format!("threshold {} below the mean {}; root would qualify", u, f),
        )?;
        let pw: Vec<f64> = self
            .leaves
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { v.powf(p) })
            .collect();
        let unit = self.leaf_measure();
        let mut cells = Vec::new();
        let mut stack = vec![CellIndex::root()];
        while let Some(cell) = stack.pop() {
            let range = cell.leaf_range(&self.params)?;
            let sum: f64 = self.leaves[range.clone()].iter().sum();
            let lambda = range.len() as f64 * unit;
            let beta = sum * unit / lambda;
            if beta > u {
                let alpha: f64 = pw[range].iter().sum::<f64>() * unit;
                cells.push(StoppingCell {
                    index: cell,
                    lambda,
                    beta,
                    alpha,
                });
            } else if cell.level() < self.params.depth {
                // Digit order; reversed so the stack pops children left first.
                for d in (0..self.params.branching).rev() {
                    stack.push(cell.child(d));
                }
            }
        }
        cells.sort_by(|a, b| a.index.path().cmp(b.index.path()));
        let kappa1 = cells.iter().map(|c| c.lambda).sum();
        let p_integral = cells.iter().map(|c| c.alpha).sum();
        let integral = cells.iter().map(|c| c.lambda * c.beta).sum();
        Ok(MaximalDecomposition {
            threshold: u,
            cells,
            kappa1,
            p_integral,
            integral,
        })
    }

    /// sup over κ in (0,1] of κ^(−1/p+1/q) (∫ top-κ φ^p)^(1/p), exact for
    /// step functions via segment breakpoints plus interior optima.
    pub fn weak_norm(&self, p: f64, q: f64) -> Result<f64> {
        ensure(p > 1.0 && q > p, "weak norm requires q > p > 1")?;
        self.distribution().weak_norm(p, q)
    }

    pub fn to_csv_row(&self) -> String {
        let mut fields = vec![
            self.params.branching.to_string(),
            self.params.depth.to_string(),
        ];
        fields.extend(self.leaves.iter().map(|v| v.to_string()));
        fields.join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let mut it = row.trim().split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| Error::Domain("malformed step-function CSV row".into()))
        };
        let branching = parse(it.next())? as u32;
        let depth = parse(it.next())? as u32;
        let leaves = it
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::Domain("malformed step-function CSV row".into()))
            })
            .collect::<Result<Vec<f64>>>()?;
        StepFunction::new(TreeParams::new(branching, depth)?, leaves)
    }
}

#[derive(Serialize, Deserialize)]
struct StepFunctionRepr {
    #[serde(rename = "N")]
    branching: u32,
    depth: u32,
    leaves: Vec<f64>,
}

impl Serialize for StepFunction<f64> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        StepFunctionRepr {
            branching: self.params.branching,
            depth: self.params.depth,
            leaves: self.leaves.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StepFunction<f64> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = StepFunctionRepr::deserialize(deserializer)?;
        let params = TreeParams::new(repr.branching, repr.depth).map_err(serde::de::Error::custom)?;
        StepFunction::new(params, repr.leaves).map_err(serde::de::Error::custom)
    }
}

/// Descending (value, measure) distribution; measures sum to the measure of
/// the underlying set (1 for a full step function).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCake<S> {
    atoms: Vec<(S, S)>,
}

impl<S: Scalar> LayerCake<S> {
    pub fn new(atoms: Vec<(S, S)>) -> Result<Self> {
        for w in atoms.windows(2) {
            ensure(w[0].0 > w[1].0, "atom values must be strictly descending")?;
        }
        for (_, m) in &atoms {
            ensure(*m > S::zero(), "atom measures must be positive")?;
        }
        Ok(LayerCake { atoms })
    }

    pub fn atoms(&self) -> &[(S, S)] {
        &self.atoms
    }

    pub fn total_measure(&self) -> S {
        self.atoms
            .iter()
            .fold(S::zero(), |acc, (_, m)| acc + m.clone())
    }

    /// Σ measure · value^e (exact in rational mode).
    pub fn integral_powu(&self, e: u32) -> S {
        self.atoms
            .iter()
            .fold(S::zero(), |acc, (v, m)| acc + v.powu(e) * m.clone())
    }
}

impl LayerCake<f64> {
    pub fn integral_power(&self, s: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(v, m)| if v == 0.0 { 0.0 } else { v.powf(s) * m })
            .sum()
    }

    /// Take full atoms from the top plus a fractional share of the threshold
    /// atom until measure κ is filled.
    pub fn top_measure_integral(&self, kappa: f64, s: f64) -> Result<f64> {
        ensure(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]")?;
        let mut remaining = kappa;
        let mut total = 0.0;
        for &(v, m) in &self.atoms {
            let take = m.min(remaining);
            if v > 0.0 {
                total += v.powf(s) * take;
            }
            remaining -= take;
            if remaining <= 1e-15 {
                break;
            }
        }
        Ok(total)
    }

    /// Values at or above L are kept; everything below is lifted to L.
    pub fn clamp_below(&self, floor: f64) -> LayerCake<f64> {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for &(v, m) in &self.atoms {
            let v = v.max(floor);
            match atoms.last_mut() {
                Some((value, measure)) if *value == v => *measure += m,
                _ => atoms.push((v, m)),
            }
        }
        LayerCake { atoms }
    }

    pub(crate) fn weak_norm(&self, p: f64, q: f64) -> Result<f64> {
        let e = -1.0 / p + 1.0 / q;
        let objective = |kappa: f64, top_p: f64| -> f64 {
            if kappa <= 0.0 || top_p <= 0.0 {
                0.0
            } else {
                kappa.powf(e) * top_p.powf(1.0 / p)
            }
        };
        let mut best: f64 = 0.0;
        let mut cum_before = 0.0;
        let mut sum_before = 0.0;
        for &(v, m) in &self.atoms {
            let vp = if v == 0.0 { 0.0 } else { v.powf(p) };
            let cum = cum_before + m;
            let sum = sum_before + m * vp;
            best = best.max(objective(cum, sum));
            // Interior stationary point of κ^e (S + (κ−c) v^p)^{1/p} on the
            // linear segment over this atom.
            if vp > 0.0 {
                let kappa_star = -e * (sum_before - cum_before * vp) / (vp * (e + 1.0 / p));
                if kappa_star > cum_before && kappa_star < cum {
                    let t = sum_before + (kappa_star - cum_before) * vp;
                    best = best.max(objective(kappa_star, t));
                }
            }
            cum_before = cum;
            sum_before = sum;
        }
        Ok(best)
    }
}

impl Serialize for LayerCake<f64> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        self.atoms.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LayerCake<f64> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let atoms = Vec::<(f64, f64)>::deserialize(deserializer)?;
        LayerCake::new(atoms).map_err(serde::de::Error::custom)
    }
}

/// One maximal stopping cell: measure λ_j, average β_j and p-integral α_j.
#[derive(Debug, Clone)]
pub struct StoppingCell {
    pub index: CellIndex,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
}

/// Stopping-time data at threshold u: the union of `cells` is {M_Tφ > u}.
#[derive(Debug, Clone)]
pub struct MaximalDecomposition {
    pub threshold: f64,
    pub cells: Vec<StoppingCell>,
    /// κ₁ = Σ λ_j = μ({M_Tφ > u}).
    pub kappa1: f64,
    /// A = Σ α_j = ∫_{{Mφ>u}} φ^p.
    pub p_integral: f64,
    /// B = Σ λ_j β_j = ∫_{{Mφ>u}} φ.
    pub integral: f64,
}
