//! Closed-form evaluators for the Bellman-type quantities attached to the
//! localized maximal operator: the sharp L^p lower bound, the three-branch
//! D_p function and its min form, weak-L^q and strong-L^q lower bounds, and
//! the auxiliary convex test function from the stopping-time argument.

use crate::error::{ensure, Result};

/// (N^s − 1)/(N^s − N); always > 1 for s > 1.
pub fn ratio_const(branching: u32, s: f64) -> Result<f64> {
    ensure(branching >= 2, "branching factor must be at least 2")?;
    ensure(s > 1.0, "exponent must exceed 1")?;
    let n = branching as f64;
    Ok((n.powf(s) - 1.0) / (n.powf(s) - n))
}

/// c(N,p) = ((p−1)/p)·(N^p−1)/(N^p−N); strictly inside (0,1).
pub fn c_np(branching: u32, p: f64) -> Result<f64> {
    Ok((p - 1.0) / p * ratio_const(branching, p)?)
}

fn check_moments(big_f: f64, f: f64, p: f64) -> Result<f64> {
    ensure(f > 0.0 && big_f > 0.0, "moments must be positive")?;
    ensure(p > 1.0, "p must exceed 1")?;
    let fp = f.powf(p);
    ensure(
        fp <= big_f * (1.0 + 1e-9) + 1e-12,
        format!("moment constraint violated: f^p = {} > F = {}", fp, big_f),
    )?;
    Ok((big_f - fp).max(0.0))
}

/// Sharp lower bound for ∫(Mφ)^p with ∫φ = f, ∫φ^p = F:
/// f^p + (N^p−1)/(N^p−N)·(F − f^p).
pub fn lp_lower(big_f: f64, f: f64, branching: u32, p: f64) -> Result<f64> {
    let excess = check_moments(big_f, f, p)?;
    Ok(f.powf(p) + ratio_const(branching, p)? * excess)
}

/// g(u) = κu^p + (N^p−1)/(N^p−N)·(F − u^(p−1) f).
pub fn g_of_u(u: f64, big_f: f64, f: f64, kappa: f64, branching: u32, p: f64) -> Result<f64> {
    ensure(u > 0.0, "u must be positive")?;
    Ok(kappa * u.powf(p) + ratio_const(branching, p)? * (big_f - u.powf(p - 1.0) * f))
}

/// Minimizer of g over the admissible interval
/// [f, min((F/f)^{1/(p−1)}, f/κ)].
pub fn u_star(big_f: f64, f: f64, kappa: f64, branching: u32, p: f64) -> Result<f64> {
    check_moments(big_f, f, p)?;
    ensure(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]")?;
    let c = c_np(branching, p)?;
    if kappa >= c {
        Ok(f)
    } else if kappa >= c * (f.powf(p) / big_f).powf(1.0 / (p - 1.0)) {
        Ok(c * f / kappa)
    } else {
        Ok((big_f / f).powf(1.0 / (p - 1.0)))
    }
}

/// D_p(F,f,κ) as the minimization form: g evaluated at its minimizer.
pub fn dp_min_form(big_f: f64, f: f64, kappa: f64, branching: u32, p: f64) -> Result<f64> {
    let u = u_star(big_f, f, kappa, branching, p)?;
    g_of_u(u, big_f, f, kappa, branching, p)
}

/// D_p(F,f,κ) via the explicit three-branch formula. Boundary κ evaluates
/// the middle branch; the adjacent branches agree there.
pub fn dp_piecewise(big_f: f64, f: f64, kappa: f64, branching: u32, p: f64) -> Result<f64> {
    let excess = check_moments(big_f, f, p)?;
    ensure(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0,1]")?;
    let r = ratio_const(branching, p)?;
    let c = c_np(branching, p)?;
    let fp = f.powf(p);
    if kappa > c {
        Ok(kappa * fp + r * excess)
    } else if kappa < c * (fp / big_f).powf(1.0 / (p - 1.0)) {
        Ok(kappa * (big_f / f).powf(p / (p - 1.0)))
    } else {
        Ok(r * (big_f - c.powf(p - 1.0) * fp / (p * kappa.powf(p - 1.0))))
    }
}

/// Interior maximizer κ₀ of κ^{−1+p/q} D_p(F,f,κ), present only when
/// (q−1)/(q−p)·f^p/F < 1.
pub fn kappa0(big_f: f64, f: f64, branching: u32, p: f64, q: f64) -> Result<Option<f64>> {
    check_moments(big_f, f, p)?;
    ensure(q > p, "q must exceed p")?;
    let ratio = (q - 1.0) / (q - p) * f.powf(p) / big_f;
    if ratio < 1.0 {
        Ok(Some(c_np(branching, p)? * ratio.powf(1.0 / (p - 1.0))))
    } else {
        Ok(None)
    }
}

/// Lower bound for the equivalent weak-L^q norm of Mφ, obtained as the exact
/// maximum of (κ^{−1+p/q} D_p(F,f,κ))^{1/p} over the candidate κ values
/// (branch boundaries, the interior maximizer κ₀ when present, and κ = 1).
pub fn weak_lower(big_f: f64, f: f64, branching: u32, p: f64, q: f64) -> Result<f64> {
    check_moments(big_f, f, p)?;
    ensure(q > p && p > 1.0, "requires q > p > 1")?;
    let c = c_np(branching, p)?;
    let lo = c * (f.powf(p) / big_f).powf(1.0 / (p - 1.0));
    let mut candidates = vec![1.0, c, lo];
    if let Some(k0) = kappa0(big_f, f, branching, p, q)? {
        candidates.push(k0.clamp(lo, c));
    }
    let mut best: f64 = 0.0;
    for kappa in candidates {
        let d = dp_piecewise(big_f, f, kappa, branching, p)?;
        best = best.max((kappa.powf(-1.0 + p / q) * d).powf(1.0 / p));
    }
    Ok(best)
}

/// Strong-L^q lower bound (q ≥ p; q = p reproduces the L^p bound):
/// f^q + (N^q−1)/(N^q−N)·(F^{(q−1)/(p−1)}/f^{(q−p)/(p−1)} − f^q).
pub fn bpq_lower(big_f: f64, f: f64, branching: u32, p: f64, q: f64) -> Result<f64> {
    check_moments(big_f, f, p)?;
    ensure(q >= p && p > 1.0, "requires q >= p > 1")?;
    let fq = f.powf(q);
    let pivot = big_f.powf((q - 1.0) / (p - 1.0)) / f.powf((q - p) / (p - 1.0));
    Ok(fq + ratio_const(branching, q)? * (pivot - fq))
}

/// Value attained by the depth-m chain function:
/// f^q·[1 + (N^q−1)/(N^q−N)·(N^{m(q−1)} − 1)].
pub fn bpq_chain_value(f: f64, branching: u32, m: u32, p: f64, q: f64) -> Result<f64> {
    ensure(f > 0.0, "f must be positive")?;
    ensure(q >= p && p > 1.0, "requires q >= p > 1")?;
    let n = branching as f64;
    Ok(f.powf(q) * (1.0 + ratio_const(branching, q)? * (n.powf(m as f64 * (q - 1.0)) - 1.0)))
}

/// Lower bound for ∫ max(Mφ, L)^q:
/// L^q + (N^q−1)/(N^q−N)·(F^{(q−1)/(p−1)}/f^{(q−p)/(p−1)} − L^{q−1}f)^+.
pub fn blq_lower(big_f: f64, f: f64, level: f64, branching: u32, p: f64, q: f64) -> Result<f64> {
    check_moments(big_f, f, p)?;
    ensure(level >= f, "L must be at least f")?;
    ensure(q > p && p > 1.0, "requires q > p > 1")?;
    let pivot = big_f.powf((q - 1.0) / (p - 1.0)) / f.powf((q - p) / (p - 1.0));
    let plus = (pivot - level.powf(q - 1.0) * f).max(0.0);
    Ok(level.powf(q) + ratio_const(branching, q)? * plus)
}

/// For q < p the infimum collapses to the constant-function value f^q.
pub fn bq_less_p(f: f64, q: f64) -> Result<f64> {
    ensure(f > 0.0, "f must be positive")?;
    Ok(f.powf(q))
}

/// h(t) = 1 − (N^s−1)/(N^s−N)·t + (N−1)/(N^s−N)·t^s; vanishes at t = 1 and
/// t = N and is nonpositive between them.
pub fn h_convex_test(t: f64, branching: u32, s: f64) -> Result<f64> {
    ensure(t > 0.0, "t must be positive")?;
    let n = branching as f64;
    let r = ratio_const(branching, s)?;
    Ok(1.0 - r * t + (n - 1.0) / (n.powf(s) - n) * t.powf(s))
}

/// Exact rational counterparts for the equality-case identities. Exponents
/// are restricted to integers; real exponents live in the float evaluators.
pub mod exact {
    use crate::error::{ensure, Error, Result};
    use crate::scalar::{nth_root_exact, Rational, Scalar};

    pub fn ratio_const(branching: u32, s: u32) -> Result<Rational> {
        ensure(branching >= 2, "branching factor must be at least 2")?;
        ensure(s > 1, "exponent must exceed 1")?;
        let n = Rational::from_int(branching as i64);
        let ns = n.powu(s);
        Ok((ns.clone() - Rational::from_int(1)) / (ns - n))
    }

    pub fn lp_lower(big_f: &Rational, f: &Rational, branching: u32, p: u32) -> Result<Rational> {
        let fp = f.powu(p);
        ensure(fp <= *big_f, "moment constraint violated: f^p > F")?;
        Ok(fp.clone() + ratio_const(branching, p)? * (big_f.clone() - fp))
    }

    pub fn bpq_chain_value(f: &Rational, branching: u32, m: u32, q: u32) -> Result<Rational> {
        ensure(q > 1, "q must exceed 1")?;
        let n = Rational::from_int(branching as i64);
        let growth = n.powu(m * (q - 1)) - Rational::from_int(1);
        Ok(f.powu(q) * (Rational::from_int(1) + ratio_const(branching, q)? * growth))
    }

    /// Exact strong-L^q lower bound; requires (F/f^p)^{1/(p−1)} to be an
    /// exact rational, which covers the chain configurations.
    pub fn bpq_lower(
        big_f: &Rational,
        f: &Rational,
        branching: u32,
        p: u32,
        q: u32,
    ) -> Result<Rational> {
        ensure(q >= p && p > 1, "requires q >= p > 1")?;
        let fp = f.powu(p);
        ensure(fp <= *big_f, "moment constraint violated: f^p > F")?;
        let root = nth_root_exact(&(big_f.clone() / fp), p - 1).ok_or_else(|| {
            Error::Domain("(F/f^p)^{1/(p-1)} is not an exact rational".into())
        })?;
        let fq = f.powu(q);
        let pivot = fq.clone() * root.powu(q - 1);
        Ok(fq.clone() + ratio_const(branching, q)? * (pivot - fq))
    }
}
