//! Monte Carlo primitives: empirical distributions, the two-sample
//! Kolmogorov–Smirnov test, empirical Laplace transforms, and the
//! rescaling conventions of the critical window.

use crate::walk::{HeightSeq, Path};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("path has {got} values but index {need} is required")]
    HorizonTooShort { got: usize, need: usize },
    #[error("invalid scaling: {0}")]
    BadScaling(String),
}

/// Sorted sample set.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalDist {
    samples: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).expect("samples must not be NaN"));
        EmpiricalDist { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn median(&self) -> f64 {
        let n = self.samples.len();
        assert!(n > 0);
        if n % 2 == 1 {
            self.samples[n / 2]
        } else {
            0.5 * (self.samples[n / 2 - 1] + self.samples[n / 2])
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Classical two-sample KS statistic with the asymptotic p-value
/// (Stephens' effective-size correction). Ties are handled by evaluating
/// both empirical CDFs on the merged support.
pub fn ks_two_sample(a: &EmpiricalDist, b: &EmpiricalDist) -> Result<KsResult, HarnessError> {
    let need = 20;
    if a.len() < need || b.len() < need {
        return Err(HarnessError::TooFewSamples { got: a.len().min(b.len()), need });
    }
    let xs = a.samples();
    let ys = b.samples();
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        let fa = i as f64 / xs.len() as f64;
        let fb = j as f64 / ys.len() as f64;
        d = d.max((fa - fb).abs());
    }
    let ne = (xs.len() as f64 * ys.len() as f64) / (xs.len() + ys.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult { statistic: d, p_value: ks_q(lambda) })
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{j−1} exp(−2 j² λ²)`.
fn ks_q(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Mean of `exp(-θ X)` with its standard error.
pub fn empirical_laplace(dist: &EmpiricalDist, theta: f64) -> (f64, f64) {
    assert!(theta >= 0.0);
    let n = dist.len();
    assert!(n > 0);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for &x in dist.samples() {
        let v = (-theta * x).exp();
        sum += v;
        sum2 += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Rescaling conventions: `space_scale · S(⌊t · time_scale⌋)` and
/// `height_scale · H(⌊t · time_scale⌋)`.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingSpec {
    pub n: u64,
    pub space_scale: f64,
    pub time_scale: f64,
    pub height_scale: f64,
    pub t_grid: Vec<f64>,
}

impl ScalingSpec {
    /// Critical-window scaling: space `n^{-1/(α+1)}`, time `n^{α/(α+1)}`,
    /// height `n^{-(α-1)/(α+1)}`.
    pub fn critical_window(n: u64, alpha: f64, t_grid: Vec<f64>) -> Result<Self, HarnessError> {
        if !(1.0 < alpha && alpha < 2.0) {
            return Err(HarnessError::BadScaling(format!("alpha {alpha} outside (1,2)")));
        }
        let nf = n as f64;
        let spec = ScalingSpec {
            n,
            space_scale: nf.powf(-1.0 / (alpha + 1.0)),
            time_scale: nf.powf(alpha / (alpha + 1.0)),
            height_scale: nf.powf(-(alpha - 1.0) / (alpha + 1.0)),
            t_grid,
        };
        for &t in &spec.t_grid {
            if spec.index_at(t) < 1 {
                return Err(HarnessError::BadScaling(format!(
                    "t = {t} gives walk index 0 at n = {n}"
                )));
            }
        }
        Ok(spec)
    }

    /// Galton–Watson forest scaling: space `n^{-1}`, time `n γ_n`,
    /// height `γ_n^{-1}`.
    pub fn forest(n: u64, gamma_n: f64, t_grid: Vec<f64>) -> Result<Self, HarnessError> {
        if gamma_n <= 0.0 {
            return Err(HarnessError::BadScaling(format!("gamma_n = {gamma_n} must be positive")));
        }
        Ok(ScalingSpec {
            n,
            space_scale: 1.0 / n as f64,
            time_scale: n as f64 * gamma_n,
            height_scale: 1.0 / gamma_n,
            t_grid,
        })
    }

    pub fn index_at(&self, t: f64) -> usize {
        (t * self.time_scale) as usize
    }
}

pub fn rescale_path_at(path: &Path, spec: &ScalingSpec, t: f64) -> Result<f64, HarnessError> {
    let idx = spec.index_at(t);
    if path.values().len() <= idx {
        return Err(HarnessError::HorizonTooShort { got: path.values().len(), need: idx });
    }
    Ok(spec.space_scale * path.values()[idx] as f64)
}

pub fn rescale_height_at(h: &HeightSeq, spec: &ScalingSpec, t: f64) -> Result<f64, HarnessError> {
    let idx = spec.index_at(t);
    if h.len() <= idx {
        return Err(HarnessError::HorizonTooShort { got: h.len(), need: idx });
    }
    Ok(spec.height_scale * h.as_slice()[idx] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = EmpiricalDist::new((0..100).map(|i| i as f64).collect());
        let b = EmpiricalDist::new((0..100).map(|i| i as f64).collect());
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let c = EmpiricalDist::new((0..100).map(|i| 1000.0 + i as f64).collect());
        let r = ks_two_sample(&a, &c).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ks_too_few_samples() {
        let a = EmpiricalDist::new(vec![1.0; 10]);
        let b = EmpiricalDist::new(vec![1.0; 100]);
        assert!(matches!(
            ks_two_sample(&a, &b),
            Err(HarnessError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn ks_p_value_calibration() {
        // two same-law continuous samples: p should be roughly uniform
        let seed = SeedTree::root(21).child("ks-cal");
        let reps = 100;
        let n = 10_000;
        let mut below = 0;
        for rep in 0..reps {
            let mut st = seed.index(rep).stream();
            let a = EmpiricalDist::new((0..n).map(|_| st.next_f64()).collect());
            let b = EmpiricalDist::new((0..n).map(|_| st.next_f64()).collect());
            if ks_two_sample(&a, &b).unwrap().p_value < 0.05 {
                below += 1;
            }
        }
        let frac = below as f64 / reps as f64;
        assert!((0.01..=0.12).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn laplace_trivials() {
        let d = EmpiricalDist::new(vec![0.0; 50]);
        assert_eq!(empirical_laplace(&d, 0.0), (1.0, 0.0));
        assert_eq!(empirical_laplace(&d, 3.0), (1.0, 0.0));
        let one = EmpiricalDist::new(vec![1.0; 50]);
        let (m, s) = empirical_laplace(&one, 1.0);
        assert!((m - (-1.0f64).exp()).abs() < 1e-15);
        assert!(s < 1e-15);
    }

    #[test]
    fn scaling_indices() {
        let spec = ScalingSpec::critical_window(10_000, 1.5, vec![1.0]).unwrap();
        assert_eq!(spec.index_at(1.0), 251);
        assert_eq!(spec.index_at(0.0), 0);
        // linearity of the rescaled value in space_scale
        let p = crate::walk::Path::from_values((0..=300).map(|i| i as i64).collect()).unwrap();
        let v = rescale_path_at(&p, &spec, 1.0).unwrap();
        assert!((v - spec.space_scale * 251.0).abs() < 1e-12);
        let mut spec2 = spec.clone();
        spec2.space_scale *= 2.0;
        assert!((rescale_path_at(&p, &spec2, 1.0).unwrap() - 2.0 * v).abs() < 1e-12);
        // too-short horizon errors
        let short = crate::walk::Path::from_values(vec![0, 1]).unwrap();
        assert!(matches!(
            rescale_path_at(&short, &spec, 1.0),
            Err(HarnessError::HorizonTooShort { .. })
        ));
        // t too small for the grid is rejected at construction
        assert!(ScalingSpec::critical_window(4, 1.5, vec![0.05]).is_err());
    }
}
