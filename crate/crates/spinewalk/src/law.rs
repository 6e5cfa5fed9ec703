//! Offspring distributions on ℕ: pmf access, seeded sampling, step Laplace
//! transforms, the tilting root ξ with `E[exp(-ξ(D-1))] = 1`, and the
//! tilted ("conditioned to die out") law.
//!
//! Laws with unbounded support are frozen at construction into a prefix
//! pmf/cdf table truncated where the analytic tail mass drops below
//! `TAIL_EPS`; draws beyond the table use an exact power-tail rejection
//! sampler, so sampling carries no truncation bias.

use crate::rng::Stream;
use crate::walk::HeightTracker;
use serde::Serialize;
use thiserror::Error;

const TAIL_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("law has offspring mean {mean} <= 1; no positive tilting root exists")]
    SubcriticalLaw { mean: f64 },
    #[error("step Laplace transform never exceeds 1 on (0, {limit}]; root not bracketable")]
    NonBracketable { limit: f64 },
    #[error("tilted law normalization drifted: |sum - 1| = {drift:e}")]
    NormalizationDrift { drift: f64 },
    #[error("invalid law parameter: {0}")]
    BadParameter(String),
    #[error("cannot parse law spec '{0}'")]
    Parse(String),
}

/// Heavy-tail descriptor: `P(D=k) ~ c k^{-(alpha+2)}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailSpec {
    pub c: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
enum Kind {
    Binary { p: f64 },
    Geometric { mean: f64 },
    /// `P(D=k) = c k^{-(alpha+2)}` for `k > kmin`, remaining mass at `kmin`.
    PowerLaw { c: f64, alpha: f64, kmin: u64, atom: f64 },
    /// Binomial thinning of `base`: keep each of D half-edges w.p. `keep`.
    Percolated { base: Box<OffspringLaw>, keep: f64 },
    /// `P̂(D=k) = exp(-xi (k-1)) P(D=k)`.
    Tilted { base: Box<OffspringLaw>, xi: f64 },
}

/// Frozen sampling table; `tail_mass` is the analytic mass beyond it.
#[derive(Clone, Debug)]
struct Table {
    cdf: Vec<f64>,
    tail_mass: f64,
    /// Exponent `s` of the tail pmf `∝ k^{-s}` for the rejection sampler.
    tail_exponent: f64,
}

#[derive(Clone, Debug)]
pub struct OffspringLaw {
    kind: Kind,
    table: Option<Table>,
    mean: f64,
    second_moment: f64,
    tail: Option<TailSpec>,
}

/// `Σ_{k >= from} k^{-s}` by direct summation plus an Euler–Maclaurin tail.
pub fn power_tail_sum(s: f64, from: u64) -> f64 {
    let cut = from.max(100_000);
    let mut acc = 0.0;
    // sum smallest terms first
    for k in (from..cut).rev() {
        acc += (k as f64).powf(-s);
    }
    let x = cut as f64;
    acc + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + s * x.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0) / 720.0
}

fn table_from_pmf(pmf: impl Iterator<Item = f64>, tail_mass: f64, tail_exponent: f64) -> Table {
    let mut cdf = Vec::new();
    let mut acc = 0.0;
    for p in pmf {
        acc += p;
        cdf.push(acc);
    }
    Table { cdf, tail_mass, tail_exponent }
}

impl OffspringLaw {
    pub fn binary(p: f64) -> Result<Self, LawError> {
        if !(0.0..1.0).contains(&p) {
            return Err(LawError::BadParameter(format!("binary needs p in [0,1), got {p}")));
        }
        let table = table_from_pmf([p, 0.0, 1.0 - p].into_iter(), 0.0, 0.0);
        Ok(OffspringLaw {
            kind: Kind::Binary { p },
            table: Some(table),
            mean: 2.0 * (1.0 - p),
            second_moment: 4.0 * (1.0 - p),
            tail: None,
        })
    }

    /// Geometric on {0,1,...} with the given mean m: `P(D=k) = (1/(1+m))(m/(1+m))^k`.
    pub fn geometric(mean: f64) -> Result<Self, LawError> {
        if mean <= 0.0 {
            return Err(LawError::BadParameter(format!("geometric needs mean > 0, got {mean}")));
        }
        let q = mean / (1.0 + mean);
        let mut pmf = Vec::new();
        let mut mass = 1.0 - q;
        while mass > TAIL_EPS * (1.0 - q) || pmf.len() < 4 {
            pmf.push(mass);
            mass *= q;
            if pmf.len() > 4096 {
                break;
            }
        }
        let tail: f64 = q.powi(pmf.len() as i32);
        let table = table_from_pmf(pmf.into_iter(), tail, 0.0);
        Ok(OffspringLaw {
            kind: Kind::Geometric { mean },
            table: Some(table),
            mean,
            second_moment: mean * (1.0 + 2.0 * mean),
            tail: None,
        })
    }

    /// Power law with exact tail constant: `P(D=k) = c k^{-(alpha+2)}` for
    /// `k > kmin` and the remaining mass as an atom at `kmin`.
    pub fn power_law(c: f64, alpha: f64, kmin: u64) -> Result<Self, LawError> {
        if !(1.0 < alpha && alpha < 2.0) {
            return Err(LawError::BadParameter(format!("power_law needs alpha in (1,2), got {alpha}")));
        }
        if kmin < 1 {
            return Err(LawError::BadParameter("power_law needs kmin >= 1".into()));
        }
        if c <= 0.0 {
            return Err(LawError::BadParameter(format!("power_law needs c > 0, got {c}")));
        }
        let s = alpha + 2.0;
        let tail_total = c * power_tail_sum(s, kmin + 1);
        if tail_total > 1.0 {
            return Err(LawError::BadParameter(format!(
                "power_law tail mass {tail_total:.6} exceeds 1; reduce c or raise kmin"
            )));
        }
        let atom = 1.0 - tail_total;
        // freeze the table where the remaining tail drops below TAIL_EPS
        let mut kmax = kmin + 64;
        while c * power_tail_sum(s, kmax + 1) > TAIL_EPS {
            kmax *= 2;
        }
        let pmf = (0..=kmax).map(|k| {
            if k < kmin {
                0.0
            } else if k == kmin {
                atom
            } else {
                c * (k as f64).powf(-s)
            }
        });
        let tail_mass = c * power_tail_sum(s, kmax + 1);
        let table = table_from_pmf(pmf, tail_mass, s);
        let mean = kmin as f64 * atom + c * power_tail_sum(s - 1.0, kmin + 1);
        let second = (kmin as f64).powi(2) * atom + c * power_tail_sum(s - 2.0, kmin + 1);
        Ok(OffspringLaw {
            kind: Kind::PowerLaw { c, alpha, kmin, atom },
            table: Some(table),
            mean,
            second_moment: second,
            tail: Some(TailSpec { c, alpha }),
        })
    }

    /// Keep each of the D half-edges independently with probability `keep`.
    pub fn percolated(base: OffspringLaw, keep: f64) -> Result<Self, LawError> {
        if !(0.0 < keep && keep <= 1.0) {
            return Err(LawError::BadParameter(format!("percolation keep probability {keep} outside (0,1]")));
        }
        let mean = keep * base.mean;
        let second = keep * keep * (base.second_moment - base.mean) + keep * base.mean;
        let tail = base.tail.map(|t| TailSpec { c: t.c * keep.powf(t.alpha + 1.0), alpha: t.alpha });
        Ok(OffspringLaw {
            kind: Kind::Percolated { base: Box::new(base), keep },
            table: None,
            mean,
            second_moment: second,
            tail,
        })
    }

    /// Parse `family:args` law specs: `binary:0.25`, `geometric:2`,
    /// `power_law:8.89,1.5,5`, `percolated:c,alpha,kmin,lambda,n`.
    pub fn parse(spec: &str) -> Result<Self, LawError> {
        let (name, rest) = spec.split_once(':').ok_or_else(|| LawError::Parse(spec.into()))?;
        let args: Vec<&str> = rest.split(',').map(str::trim).collect();
        let f = |i: usize| -> Result<f64, LawError> {
            args.get(i)
                .and_then(|a| a.parse::<f64>().ok())
                .ok_or_else(|| LawError::Parse(spec.into()))
        };
        match name.trim() {
            "binary" if args.len() == 1 => Self::binary(f(0)?),
            "geometric" if args.len() == 1 => Self::geometric(f(0)?),
            "power_law" if args.len() == 3 => Self::power_law(f(0)?, f(1)?, f(2)? as u64),
            "percolated" if args.len() == 5 => {
                let base = Self::power_law(f(0)?, f(1)?, f(2)? as u64)?;
                let lambda = f(3)?;
                let n = f(4)? as u64;
                let keep = percolation_keep(&base, lambda, n)?;
                Self::percolated(base, keep)
            }
            _ => Err(LawError::Parse(spec.into())),
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn tail_spec(&self) -> Option<TailSpec> {
        self.tail
    }

    /// Exact pmf at k (independent of the frozen table).
    pub fn pmf(&self, k: u64) -> f64 {
        match &self.kind {
            Kind::Binary { p } => match k {
                0 => *p,
                2 => 1.0 - p,
                _ => 0.0,
            },
            Kind::Geometric { mean } => {
                let q = mean / (1.0 + mean);
                (1.0 - q) * q.powf(k as f64)
            }
            Kind::PowerLaw { c, alpha, kmin, atom } => {
                if k < *kmin {
                    0.0
                } else if k == *kmin {
                    *atom
                } else {
                    c * (k as f64).powf(-(alpha + 2.0))
                }
            }
            Kind::Percolated { base, keep } => {
                // P(B=k) = sum_d P(D=d) C(d,k) keep^k (1-keep)^{d-k}
                let lk = keep.ln();
                let lq = if *keep < 1.0 { (1.0 - keep).ln() } else { f64::NEG_INFINITY };
                let mut acc = 0.0;
                let mut stale = 0u32;
                for d in k.max(1)..=4_000_000 {
                    let pd = base.pmf(d);
                    if pd > 0.0 {
                        let lw = if d == k {
                            k as f64 * lk
                        } else {
                            log_choose(d, k) + k as f64 * lk + (d - k) as f64 * lq
                        };
                        let term = pd * lw.exp();
                        acc += term;
                        stale = if term < 1e-17 * acc.max(1e-300) { stale + 1 } else { 0 };
                    } else {
                        stale += 1;
                    }
                    if stale > 64 && base_tail_bound(base, d) < 1e-16 {
                        break;
                    }
                }
                acc
            }
            Kind::Tilted { base, xi } => (-xi * (k as f64 - 1.0)).exp() * base.pmf(k),
        }
    }

    /// `E[exp(-theta (D - 1))]`, the step Laplace transform.
    pub fn laplace_step(&self, theta: f64) -> f64 {
        match &self.kind {
            Kind::Binary { p } => p * theta.exp() + (1.0 - p) * (-theta).exp(),
            Kind::Geometric { mean } => {
                // E[u^D]/u with u = e^{-theta}: 1/(u((1+m) - m u))
                let u = (-theta).exp();
                1.0 / (u * ((1.0 + mean) - mean * u))
            }
            Kind::PowerLaw { c, alpha, kmin, atom } => {
                let s = alpha + 2.0;
                let mut acc = atom * (-theta * (*kmin as f64 - 1.0)).exp();
                let kmax = self.table.as_ref().map_or(*kmin + 1_000_000, |t| t.cdf.len() as u64 - 1);
                for k in (kmin + 1)..=kmax {
                    let term = c * (k as f64).powf(-s) * (-theta * (k as f64 - 1.0)).exp();
                    acc += term;
                    if term < 1e-18 * acc && theta > 0.0 {
                        break;
                    }
                }
                if theta == 0.0 {
                    acc += self.table.as_ref().map_or(0.0, |t| t.tail_mass);
                }
                acc
            }
            Kind::Percolated { base, keep } => {
                // E[e^{-theta(B-1)}] = e^{theta} E[(1-keep+keep e^{-theta})^D]
                let u = 1.0 - keep + keep * (-theta).exp();
                theta.exp() * base.generating(u)
            }
            Kind::Tilted { base, xi } => base.laplace_step(theta + xi),
        }
    }

    /// `E[u^D]` for u in [0, 1].
    pub fn generating(&self, u: f64) -> f64 {
        assert!(u >= 0.0 && u <= 1.0 + 1e-12, "generating function argument {u}");
        if u >= 1.0 {
            return 1.0;
        }
        match &self.kind {
            Kind::Binary { p } => p + (1.0 - p) * u * u,
            Kind::Geometric { mean } => {
                let q = mean / (1.0 + mean);
                (1.0 - q) / (1.0 - q * u)
            }
            Kind::PowerLaw { c, alpha, kmin, atom } => {
                let s = alpha + 2.0;
                let lu = u.ln();
                let mut acc = atom * (*kmin as f64 * lu).exp();
                let mut k = kmin + 1;
                loop {
                    let term = c * (k as f64).powf(-s) * (k as f64 * lu).exp();
                    acc += term;
                    k += 1;
                    if term < 1e-18 * acc.max(1e-300) || k > 20_000_000 {
                        break;
                    }
                }
                acc
            }
            Kind::Percolated { base, keep } => base.generating(1.0 - keep + keep * u),
            Kind::Tilted { .. } => {
                // tilted tables are short and exhaustive
                let table = self.table.as_ref().expect("tilted laws are tabled");
                let mut acc = 0.0;
                let mut prev = 0.0;
                let mut pow = 1.0;
                for &cum in table.cdf.iter() {
                    acc += (cum - prev) * pow;
                    prev = cum;
                    pow *= u;
                }
                acc
            }
        }
    }

    /// Seeded draw of D.
    pub fn sample(&self, stream: &mut Stream) -> u64 {
        match &self.kind {
            Kind::Percolated { base, keep } => {
                let d = base.sample(stream);
                stream.binomial(d, *keep)
            }
            Kind::Geometric { mean } => stream.geometric(1.0 / (1.0 + mean)),
            _ => {
                let table = self.table.as_ref().expect("tabled law");
                let covered = *table.cdf.last().unwrap();
                let u = stream.next_f64() * (covered + table.tail_mass);
                if u < covered {
                    table.cdf.partition_point(|&c| c <= u) as u64
                } else {
                    sample_power_tail(stream, table.tail_exponent, table.cdf.len() as u64)
                }
            }
        }
    }
}

fn log_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

fn base_tail_bound(base: &OffspringLaw, from: u64) -> f64 {
    match base.tail {
        Some(t) => t.c * (from as f64).powf(-(t.alpha + 1.0)) / (t.alpha + 1.0),
        None => base.pmf(from),
    }
}

/// Exact draw from `pmf ∝ k^{-s}` on `{k0, k0+1, ...}` by rejection from a
/// continuous Pareto proposal. The ratio `k^{-s} / ∫_k^{k+1} y^{-s} dy` is
/// decreasing in k, so the bound at k0 dominates.
fn sample_power_tail(stream: &mut Stream, s: f64, k0: u64) -> u64 {
    let x0 = k0 as f64;
    let ratio = |k: f64| -> f64 { k.powf(-s) / (k.powf(1.0 - s) - (k + 1.0).powf(1.0 - s)) };
    let bound = ratio(x0);
    loop {
        let u = stream.next_open01();
        let y = x0 * u.powf(-1.0 / (s - 1.0));
        if y >= 4.0e18 {
            continue;
        }
        let k = y.floor();
        if stream.next_f64() * bound <= ratio(k) {
            return k as u64;
        }
    }
}

/// Critical-window percolation probability for a heavy-tailed base law:
/// `p(lambda, n) = (1 + lambda n^{-(alpha-1)/(alpha+1)}) / (rho/mu - 1)`.
pub fn percolation_keep(base: &OffspringLaw, lambda: f64, n: u64) -> Result<f64, LawError> {
    let tail = base
        .tail_spec()
        .ok_or_else(|| LawError::BadParameter("percolation needs a heavy-tailed base law".into()))?;
    let mu = base.mean();
    let rho = base.second_moment();
    if rho <= 2.0 * mu {
        return Err(LawError::BadParameter(format!(
            "base law has rho = {rho:.6} <= 2 mu = {:.6}; not supercritical enough to percolate",
            2.0 * mu
        )));
    }
    let eps = (n as f64).powf(-(tail.alpha - 1.0) / (tail.alpha + 1.0));
    let p = (1.0 + lambda * eps) / (rho / mu - 1.0);
    if !(0.0 < p && p <= 1.0) {
        return Err(LawError::BadParameter(format!(
            "percolation probability {p:.6} outside (0,1] (lambda={lambda}, n={n})"
        )));
    }
    Ok(p)
}

/// The unique positive root of `E[exp(-xi (D-1))] = 1`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TiltRoot {
    xi: f64,
}

impl TiltRoot {
    pub fn xi(&self) -> f64 {
        self.xi
    }
}

pub fn find_xi(law: &OffspringLaw) -> Result<TiltRoot, LawError> {
    if law.mean() <= 1.0 {
        return Err(LawError::SubcriticalLaw { mean: law.mean() });
    }
    let f = |theta: f64| law.laplace_step(theta) - 1.0;
    // bracket: f(0) = 0, f dips negative, and recrosses iff P(D=0) > 0
    let mut hi = 1.0;
    let limit = 720.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        if hi > limit {
            return Err(LawError::NonBracketable { limit });
        }
    }
    let mut lo = 0.0;
    // keep lo on the negative side but away from the trivial root at 0
    let mut probe = hi / 2.0;
    while probe > 1e-300 {
        if f(probe) < 0.0 {
            lo = probe;
            break;
        }
        probe /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let xi = 0.5 * (lo + hi);
    let resid = (law.laplace_step(xi) - 1.0).abs();
    if resid > 1e-12 {
        return Err(LawError::NonBracketable { limit: resid });
    }
    Ok(TiltRoot { xi })
}

/// Probability that a single tree of the forest is finite: `exp(-xi)`.
pub fn extinction_probability(root: &TiltRoot) -> f64 {
    (-root.xi).exp()
}

/// The tilted law `P̂(D=k) = exp(-xi (k-1)) P(D=k)`; subcritical.
pub fn tilt(law: &OffspringLaw, root: &TiltRoot) -> Result<OffspringLaw, LawError> {
    let xi = root.xi;
    // geometric weight kills any admissible tail: freeze a finite table
    let mut pmf = Vec::new();
    let mut k = 0u64;
    let mut total = 0.0;
    let kcap = 4_000_000u64;
    loop {
        let w = (-xi * (k as f64 - 1.0)).exp() * law.pmf(k);
        pmf.push(w);
        total += w;
        k += 1;
        let remaining_bound = (-xi * (k as f64 - 1.0)).exp() * tail_mass_from(law, k);
        if remaining_bound < 1e-16 && k >= 4 {
            total += remaining_bound;
            break;
        }
        if k > kcap {
            break;
        }
    }
    let drift = (total - 1.0).abs();
    if drift > 1e-10 {
        return Err(LawError::NormalizationDrift { drift });
    }
    let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let second: f64 = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
    let table = table_from_pmf(pmf.into_iter(), 0.0, 0.0);
    Ok(OffspringLaw {
        kind: Kind::Tilted { base: Box::new(law.clone()), xi },
        table: Some(table),
        mean,
        second_moment: second,
        tail: None,
    })
}

/// Upper bound on `P(D >= from)`; used to terminate weighted-table builds.
pub(crate) fn tail_mass_from(law: &OffspringLaw, from: u64) -> f64 {
    match &law.kind {
        Kind::Binary { .. } => {
            if from <= 2 {
                1.0
            } else {
                0.0
            }
        }
        Kind::Geometric { mean } => (mean / (1.0 + mean)).powf(from as f64),
        Kind::PowerLaw { c, alpha, kmin, .. } => {
            if from <= *kmin {
                1.0
            } else {
                c * power_tail_sum(alpha + 2.0, from)
            }
        }
        _ => 1.0,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TreeCaps {
    pub max_vertices: u64,
    pub max_generation: u64,
}

impl Default for TreeCaps {
    fn default() -> Self {
        TreeCaps { max_vertices: 1_000_000, max_generation: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TreeOutcome {
    Finite { size: u64 },
    /// Hit a cap before the walk returned to -1; `level` is the walk value
    /// at censoring, so `exp(-xi (level + 1))` bounds the probability the
    /// tree was actually finite.
    Censored { visited: u64, level: i64 },
}

/// Run one Galton–Watson tree through its Łukasiewicz walk.
pub fn sample_tree_finite(law: &OffspringLaw, stream: &mut Stream, caps: TreeCaps) -> TreeOutcome {
    let mut s: i64 = 0;
    let mut visited: u64 = 0;
    let mut tracker = HeightTracker::new();
    tracker.push(0);
    loop {
        if visited >= caps.max_vertices {
            return TreeOutcome::Censored { visited, level: s };
        }
        let d = law.sample(stream) as i64;
        s += d - 1;
        visited += 1;
        tracker.push(s);
        if s < 0 {
            return TreeOutcome::Finite { size: visited };
        }
        if tracker.height() > caps.max_generation {
            return TreeOutcome::Censored { visited, level: s };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    const LN3: f64 = 1.0986122886681098;
    const LN2: f64 = core::f64::consts::LN_2;

    #[test]
    fn xi_closed_forms() {
        let b = OffspringLaw::binary(0.25).unwrap();
        let xi = find_xi(&b).unwrap().xi();
        assert!((xi - LN3).abs() <= 1e-10, "xi={xi}");
        let g = OffspringLaw::geometric(2.0).unwrap();
        let xi = find_xi(&g).unwrap().xi();
        assert!((xi - LN2).abs() <= 1e-10, "xi={xi}");
    }

    #[test]
    fn critical_law_errors() {
        // P(D=1) = 1 via geometric-free construction: use binary with p=0.5 (mean 1)
        let b = OffspringLaw::binary(0.5).unwrap();
        assert!(matches!(find_xi(&b), Err(LawError::SubcriticalLaw { .. })));
    }

    #[test]
    fn no_root_without_zero_offspring() {
        // D >= 5 a.s.: supercritical but walk never steps down
        let p = OffspringLaw::power_law(8.892179, 1.5, 5).unwrap();
        assert!(p.mean() > 1.0);
        assert!(matches!(find_xi(&p), Err(LawError::NonBracketable { .. })));
    }

    #[test]
    fn tilt_binary_and_geometric() {
        let b = OffspringLaw::binary(0.25).unwrap();
        let root = find_xi(&b).unwrap();
        assert!((extinction_probability(&root) - 1.0 / 3.0).abs() < 1e-12);
        let tb = tilt(&b, &root).unwrap();
        assert!((tb.pmf(0) - 0.75).abs() < 1e-12);
        assert!((tb.pmf(2) - 0.25).abs() < 1e-12);
        assert!((tb.mean() - 0.5).abs() < 1e-10); // tilted mean step = -1/2

        let g = OffspringLaw::geometric(2.0).unwrap();
        let root = find_xi(&g).unwrap();
        assert!((extinction_probability(&root) - 0.5).abs() < 1e-12);
        let tg = tilt(&g, &root).unwrap();
        // P̂(k) = (2/3)(1/3)^k
        for k in 0..10u64 {
            let expect = (2.0 / 3.0) * (1.0f64 / 3.0).powi(k as i32);
            assert!((tg.pmf(k) - expect).abs() < 1e-12, "k={k}");
        }
        assert!((tg.mean() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn tilted_law_is_subcritical_fixed_point() {
        for law in [OffspringLaw::binary(0.25).unwrap(), OffspringLaw::geometric(2.0).unwrap()] {
            let root = find_xi(&law).unwrap();
            let tilted = tilt(&law, &root).unwrap();
            assert!(tilted.mean() < 1.0);
            assert!(matches!(find_xi(&tilted), Err(LawError::SubcriticalLaw { .. })));
        }
    }

    #[test]
    fn tilting_involution_recovers_pmf() {
        for law in [
            OffspringLaw::binary(0.25).unwrap(),
            OffspringLaw::binary(0.4).unwrap(),
            OffspringLaw::geometric(2.0).unwrap(),
            OffspringLaw::geometric(3.5).unwrap(),
        ] {
            let root = find_xi(&law).unwrap();
            let tilted = tilt(&law, &root).unwrap();
            for k in 0..60u64 {
                let back = (root.xi() * (k as f64 - 1.0)).exp() * tilted.pmf(k);
                assert!(
                    (back - law.pmf(k)).abs() < 1e-10,
                    "k={k}: {back} vs {}",
                    law.pmf(k)
                );
            }
        }
    }

    #[test]
    fn laplace_step_at_zero_is_one() {
        for law in [
            OffspringLaw::binary(0.25).unwrap(),
            OffspringLaw::geometric(2.0).unwrap(),
            OffspringLaw::power_law(8.892179, 1.5, 5).unwrap(),
        ] {
            assert!((law.laplace_step(0.0) - 1.0).abs() < 1e-9, "{:?}", law.tail);
        }
    }

    #[test]
    fn power_law_moments_and_pmf_sum() {
        let law = OffspringLaw::power_law(8.892179, 1.5, 5).unwrap();
        let total: f64 = (0..200_000).map(|k| law.pmf(k)).sum::<f64>()
            + 8.892179 * power_tail_sum(3.5, 200_000);
        assert!((total - 1.0).abs() < 1e-10, "total={total}");
        // moments against direct series
        let mu: f64 = (0..2_000_000).map(|k| k as f64 * law.pmf(k)).sum();
        assert!((mu - law.mean()).abs() < 1e-6, "{mu} vs {}", law.mean());
        assert!(law.second_moment() > 2.0 * law.mean());
    }

    #[test]
    fn sampler_mean_converges() {
        let mut s = SeedTree::root(3).child("law-mean").stream();
        for law in [
            OffspringLaw::binary(0.25).unwrap(),
            OffspringLaw::geometric(2.0).unwrap(),
            OffspringLaw::power_law(8.892179, 1.5, 5).unwrap(),
        ] {
            let n = 100_000;
            let mean: f64 = (0..n).map(|_| law.sample(&mut s) as f64).sum::<f64>() / n as f64;
            let sd = ((law.second_moment() - law.mean().powi(2)).max(0.0) / n as f64).sqrt();
            assert!(
                (mean - law.mean()).abs() < 3.0 * sd + 1e-9,
                "mean {mean} vs {} (sd {sd})",
                law.mean()
            );
        }
    }

    #[test]
    fn percolated_laplace_identity() {
        // E[e^{-theta B}] = E[exp(D ln(1-p+pe^{-theta}))], Monte Carlo vs base series
        let base = OffspringLaw::power_law(8.892179, 1.5, 5).unwrap();
        let keep = percolation_keep(&base, 0.0, 100_000).unwrap();
        let law = OffspringLaw::percolated(base.clone(), keep).unwrap();
        let theta: f64 = 1.0;
        let closed = base.generating(1.0 - keep + keep * (-theta).exp());
        let mut s = SeedTree::root(5).child("perc").stream();
        let n = 200_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let v = (-theta * law.sample(&mut s) as f64).exp();
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / n as f64;
        let sd = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - closed).abs() < 3.0 * sd, "{mean} vs {closed} (se {sd})");
    }

    #[test]
    fn tree_sampler_degenerate_cases() {
        // P(D=0)=1: always a single vertex
        let law = OffspringLaw::binary(1.0 - 1e-15).unwrap();
        let mut s = SeedTree::root(1).child("tree").stream();
        for _ in 0..50 {
            assert_eq!(
                sample_tree_finite(&law, &mut s, TreeCaps::default()),
                TreeOutcome::Finite { size: 1 }
            );
        }
        // zero cap: censored
        let caps = TreeCaps { max_vertices: 0, max_generation: 10 };
        assert!(matches!(
            sample_tree_finite(&law, &mut s, caps),
            TreeOutcome::Censored { .. }
        ));
    }

    #[test]
    fn parse_specs() {
        assert!(OffspringLaw::parse("binary:0.25").is_ok());
        assert!(OffspringLaw::parse("geometric:2").is_ok());
        assert!(OffspringLaw::parse("power_law:8.89,1.5,5").is_ok());
        assert!(OffspringLaw::parse("percolated:8.89,1.5,5,0.0,100000").is_ok());
        assert!(OffspringLaw::parse("zipf:2").is_err());
        assert!(OffspringLaw::parse("binary").is_err());
    }
}
