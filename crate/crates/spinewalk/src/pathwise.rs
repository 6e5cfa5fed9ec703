//! Pathwise construction of `(S, S − S̲̲, H)` for a supercritical walk.
//!
//! The walk is assembled from independent ingredients: a tilted
//! (subcritical) walk `Ŝ` supplying the finite trees, a geometric count `G`
//! of finite trees explored before the infinite one, and i.i.d. spine pairs
//! `(Bᵢ, Nᵢ)` giving, for the i-th vertex on the leftmost infinite spine,
//! the number of finite subtrees hanging to its left and its total number
//! of children. Writing `Q(l) = G + Σᵢ≤ₗ Nᵢ`, `D(l) = G + Σᵢ≤ₗ Bᵢ`,
//! `Î(j) = min_{m≤j} Ŝ(m)`, and `F(k)` for the number of spine vertices
//! among the first `k` visited vertices,
//!
//! ```text
//! S(k)         = -G + Ŝ(k - F(k)) + Q(F(k)) - F(k)
//! (S - S̲̲)(k) =      Ŝ(k - F(k)) + D(F(k))
//! H(k)         = F(k)                  if vertex k is on the spine
//!              = Ĥ(k - F(k)) + F(k)    otherwise
//! ```
//!
//! `F` satisfies `F(0) = 0` and increments exactly when the tilted walk has
//! completed `D(F(k-1))` trees by off-spine time `k-1-F(k-1)`, i.e. when
//! `-Î(k-1-F(k-1)) ≥ D(F(k-1))`. The index conventions are pinned by the
//! law-equality oracle (`sample_direct`) and the exact identity
//! `h == height_process(s)`, not by prose.

use crate::law::{self, extinction_probability, find_xi, tilt, LawError, OffspringLaw, TiltRoot};
use crate::rng::{SeedTree, Stream};
use crate::walk::{height_process, HeightSeq, Path};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathwiseError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("construction needs {needed} tilted-walk steps but the cap is {cap}")]
    HorizonOverflow { needed: u64, cap: u64 },
}

/// Per-spine-vertex pair: `older_brothers` mortal subtrees precede the
/// first immortal child among `children` total children.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpinePair {
    pub older_brothers: u64,
    pub children: u64,
}

/// The jointly constructed processes, all over one horizon.
#[derive(Clone, Debug, Serialize)]
pub struct PathwiseBundle {
    /// Number of finite trees explored before the infinite one.
    pub finite_trees: u64,
    pub pairs: Vec<SpinePair>,
    pub s: Path,
    pub s_minus_ffinf: Path,
    pub h: HeightSeq,
    /// `F(k)` for `k = 0..=horizon`.
    pub f: Vec<u64>,
    /// `Q(l)`, `D(l)` for `l = 0..=pairs.len()`.
    pub q: Vec<i64>,
    pub d: Vec<i64>,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildCaps {
    pub max_tilted_steps: u64,
}

impl Default for BuildCaps {
    fn default() -> Self {
        BuildCaps { max_tilted_steps: u64::MAX }
    }
}

/// Frozen ingredients for repeated builds under one law.
pub struct PathwiseSampler {
    root: TiltRoot,
    tilted: OffspringLaw,
    /// cdf of the spine-vertex child count N: P(N=k) ∝ (1 − e^{-kξ}) P(D=k).
    n_cdf: Vec<f64>,
}

impl PathwiseSampler {
    pub fn new(law: &OffspringLaw) -> Result<Self, PathwiseError> {
        let root = find_xi(law)?;
        let tilted = tilt(law, &root)?;
        let xi = root.xi();
        let norm = 1.0 - (-xi).exp();
        let mut n_cdf = Vec::new();
        let mut acc = 0.0;
        let mut k = 0u64;
        loop {
            let w = (1.0 - (-xi * k as f64).exp()) * law.pmf(k) / norm;
            acc += w;
            n_cdf.push(acc);
            k += 1;
            if k > 2 && law::tail_mass_from(law, k) / norm < 1e-15 {
                break;
            }
            if k > 8_000_000 {
                break;
            }
        }
        Ok(PathwiseSampler { root, tilted, n_cdf })
    }

    pub fn root(&self) -> &TiltRoot {
        &self.root
    }

    pub fn tilted_law(&self) -> &OffspringLaw {
        &self.tilted
    }

    /// Number of finite trees before the first infinite one:
    /// `P(G=k) = e^{-kξ}(1 - e^{-ξ})`.
    pub fn sample_tree_count(&self, stream: &mut Stream) -> u64 {
        stream.geometric(1.0 - extinction_probability(&self.root))
    }

    /// One spine pair: N from its marginal, then B | N = l as a geometric
    /// with success `e^{-ξ}` truncated to `{0, ..., l-1}`.
    pub fn sample_spine_pair(&self, stream: &mut Stream) -> SpinePair {
        let u = stream.next_f64() * self.n_cdf.last().unwrap().min(1.0);
        let n = (self.n_cdf.partition_point(|&c| c <= u) as u64).max(1);
        let xi = self.root.xi();
        let cap = 1.0 - (-xi * n as f64).exp();
        let v = stream.next_f64() * cap;
        let b = ((-(1.0 - v).ln()) / xi).floor() as u64;
        SpinePair { older_brothers: b.min(n - 1), children: n }
    }

    /// Build the bundle over `horizon` steps using named substreams of
    /// `seed` (`"tilted-walk"`, `"tree-count"`, `"pairs"`).
    pub fn build(
        &self,
        horizon: usize,
        seed: &SeedTree,
        caps: BuildCaps,
    ) -> Result<PathwiseBundle, PathwiseError> {
        assert!(horizon >= 1, "horizon must be >= 1");
        if horizon as u64 > caps.max_tilted_steps {
            return Err(PathwiseError::HorizonOverflow {
                needed: horizon as u64,
                cap: caps.max_tilted_steps,
            });
        }
        let mut walk_stream = seed.child("tilted-walk").stream();
        let mut count_stream = seed.child("tree-count").stream();
        let mut pair_stream = seed.child("pairs").stream();

        let g = self.sample_tree_count(&mut count_stream) as i64;

        // tilted walk, running infimum, heights
        let mut hat_s = Vec::with_capacity(horizon + 1);
        let mut hat_i = Vec::with_capacity(horizon + 1);
        hat_s.push(0i64);
        hat_i.push(0i64);
        for _ in 0..horizon {
            let step = self.tilted.sample(&mut walk_stream) as i64 - 1;
            let v = hat_s.last().unwrap() + step;
            hat_s.push(v);
            hat_i.push((*hat_i.last().unwrap()).min(v));
        }
        let hat_path = Path::from_values(hat_s).expect("tilted walk is skip-free");
        let hat_h = height_process(&hat_path);

        // spine pairs drawn on demand, with Q and D cumulative
        let mut pairs: Vec<SpinePair> = Vec::new();
        let mut q = vec![g];
        let mut d = vec![g];

        // F recurrence
        let mut f = Vec::with_capacity(horizon + 1);
        f.push(0u64);
        for k in 1..=horizon {
            let l = f[k - 1] as usize;
            while pairs.len() < l {
                let pair = self.sample_spine_pair(&mut pair_stream);
                q.push(q.last().unwrap() + pair.children as i64);
                d.push(d.last().unwrap() + pair.older_brothers as i64);
                pairs.push(pair);
            }
            let j = k - 1 - l;
            let next = if -hat_i[j] >= d[l] { l as u64 + 1 } else { l as u64 };
            f.push(next);
        }
        while pairs.len() < f[horizon] as usize {
            let pair = self.sample_spine_pair(&mut pair_stream);
            q.push(q.last().unwrap() + pair.children as i64);
            d.push(d.last().unwrap() + pair.older_brothers as i64);
            pairs.push(pair);
        }

        // assemble S, S - future infimum, H
        let hat_vals = hat_path.values();
        let mut s_vals = Vec::with_capacity(horizon + 1);
        let mut smff_vals = Vec::with_capacity(horizon + 1);
        for k in 0..=horizon {
            let l = f[k] as usize;
            let hat = hat_vals[k - l];
            s_vals.push(-g + hat + q[l] - l as i64);
            smff_vals.push(hat + d[l]);
        }
        let mut h = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let l = f[k];
            if f[k + 1] > l {
                h.push(l);
            } else {
                h.push(hat_h.as_slice()[k - l as usize] + l);
            }
        }

        let s = Path::from_values(s_vals).expect("constructed walk is skip-free");
        let s_minus_ffinf = Path::from_values(smff_vals).expect("nonnegative part is skip-free");
        Ok(PathwiseBundle {
            finite_trees: g as u64,
            pairs,
            s,
            s_minus_ffinf,
            h: HeightSeq(h),
            f,
            q,
            d,
        })
    }
}

/// Convenience wrapper: derive the ingredients and build once.
pub fn build_pathwise(
    law: &OffspringLaw,
    horizon: usize,
    seed: &SeedTree,
) -> Result<PathwiseBundle, PathwiseError> {
    PathwiseSampler::new(law)?.build(horizon, seed, BuildCaps::default())
}

/// Direct sampler of the supercritical walk: i.i.d. steps `D − 1` and the
/// height process via the walk encoding. The law oracle for [`build_pathwise`].
pub fn sample_direct(law: &OffspringLaw, horizon: usize, stream: &mut Stream) -> (Path, HeightSeq) {
    let steps: Vec<i64> = (0..horizon).map(|_| law.sample(stream) as i64 - 1).collect();
    let path = Path::from_steps(&steps).expect("offspring steps are >= -1");
    let h = height_process(&path);
    (path, h)
}

/// CSV dump `k,s,s_minus_ffinf,h,f` (height column empty on the last row).
pub fn bundle_csv(b: &PathwiseBundle) -> String {
    let mut out = String::from("k,s,s_minus_ffinf,h,f\n");
    let v = b.s.values();
    let w = b.s_minus_ffinf.values();
    for k in 0..v.len() {
        let h = if k < b.h.len() { b.h.as_slice()[k].to_string() } else { String::new() };
        out.push_str(&format!("{k},{},{},{h},{}\n", v[k], w[k], b.f[k]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::height_process;

    fn binary() -> OffspringLaw {
        OffspringLaw::binary(0.25).unwrap()
    }

    fn geometric() -> OffspringLaw {
        OffspringLaw::geometric(2.0).unwrap()
    }

    #[test]
    fn tree_count_law() {
        let sampler = PathwiseSampler::new(&binary()).unwrap();
        let mut st = SeedTree::root(11).child("g").stream();
        let n = 100_000;
        let (mut c0, mut c1, mut sum) = (0u64, 0u64, 0u64);
        for _ in 0..n {
            let g = sampler.sample_tree_count(&mut st);
            sum += g;
            match g {
                0 => c0 += 1,
                1 => c1 += 1,
                _ => {}
            }
        }
        let nf = n as f64;
        let se = |p: f64| (p * (1.0 - p) / nf).sqrt();
        assert!((c0 as f64 / nf - 2.0 / 3.0).abs() < 3.0 * se(2.0 / 3.0));
        assert!((c1 as f64 / nf - 2.0 / 9.0).abs() < 3.0 * se(2.0 / 9.0));
        // mean e^{-xi}/(1-e^{-xi}) = 1/2
        let mean = sum as f64 / nf;
        let var = (1.0 / 3.0) / (2.0f64 / 3.0).powi(2);
        assert!((mean - 0.5).abs() < 3.0 * (var / nf).sqrt());
    }

    #[test]
    fn spine_pair_law_binary() {
        let sampler = PathwiseSampler::new(&binary()).unwrap();
        let mut st = SeedTree::root(12).child("pairs").stream();
        let n = 100_000;
        let (mut c0, mut c1) = (0u64, 0u64);
        for _ in 0..n {
            let p = sampler.sample_spine_pair(&mut st);
            assert!(p.older_brothers < p.children, "support violated: {p:?}");
            assert_eq!(p.children, 2, "binary spine vertices always have 2 children");
            if p.older_brothers == 0 {
                c0 += 1;
            } else {
                c1 += 1;
            }
        }
        let nf = n as f64;
        let se = |p: f64| (p * (1.0 - p) / nf).sqrt();
        assert!((c0 as f64 / nf - 0.75).abs() < 3.0 * se(0.75));
        assert!((c1 as f64 / nf - 0.25).abs() < 3.0 * se(0.25));
    }

    #[test]
    fn spine_pair_marginal_geometric() {
        // P(N=1) = P(D=1) = 2/9 for the mean-2 geometric (xi = ln 2)
        let sampler = PathwiseSampler::new(&geometric()).unwrap();
        let mut st = SeedTree::root(13).child("pairs").stream();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sampler.sample_spine_pair(&mut st).children == 1)
            .count();
        let p = 2.0 / 9.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn spine_pair_joint_law_cellwise() {
        // P(B=k, N=l) = e^{-k xi} P(D=l) for k < l; all cells with >= 25 expected hits
        let law = geometric();
        let sampler = PathwiseSampler::new(&law).unwrap();
        let xi = sampler.root().xi();
        let mut st = SeedTree::root(14).child("pairs").stream();
        let n = 100_000usize;
        let mut counts = std::collections::HashMap::<(u64, u64), u64>::new();
        for _ in 0..n {
            let p = sampler.sample_spine_pair(&mut st);
            *counts.entry((p.older_brothers, p.children)).or_default() += 1;
        }
        let mut checked = 0;
        for l in 1..12u64 {
            for k in 0..l {
                let expect = (-(k as f64) * xi).exp() * law.pmf(l) * n as f64;
                if expect < 25.0 {
                    continue;
                }
                let got = *counts.get(&(k, l)).unwrap_or(&0) as f64;
                let sd = (expect * (1.0 - expect / n as f64)).sqrt();
                assert!(
                    (got - expect).abs() < 3.0 * sd,
                    "cell (B={k}, N={l}): got {got}, expect {expect:.1}"
                );
                checked += 1;
            }
        }
        assert!(checked > 10, "too few cells checked: {checked}");
    }

    #[test]
    fn bundle_invariants_many_seeds() {
        for law in [binary(), geometric()] {
            let sampler = PathwiseSampler::new(&law).unwrap();
            let root_seed = SeedTree::root(77).child("bundles");
            for rep in 0..200u64 {
                let b = sampler
                    .build(150, &root_seed.index(rep), BuildCaps::default())
                    .unwrap();
                assert_eq!(b.s.values()[0], 0);
                assert_eq!(b.h.as_slice()[0], 0);
                // exact Eq-consistency of the assembled height process
                assert_eq!(b.h, height_process(&b.s), "rep {rep}");
                assert_eq!(b.h, height_process(&b.s_minus_ffinf), "rep {rep}");
                assert!(b.s_minus_ffinf.values().iter().all(|&v| v >= 0));
                for k in 1..b.f.len() {
                    assert!(b.f[k] >= b.f[k - 1]);
                    assert!(b.f[k] - b.f[k - 1] <= 1);
                    assert!((k as u64 - b.f[k]) >= (k as u64 - 1 - b.f[k - 1]));
                }
                for l in 1..b.q.len() {
                    assert!(b.q[l] - b.d[l] >= l as i64);
                }
                // windowed future-infimum agreement up to the last spine visit
                let v = b.s.values();
                let w = b.s_minus_ffinf.values();
                if let Some(jstar) = (0..w.len()).rev().find(|&j| w[j] == 0) {
                    let mut min = i64::MAX;
                    let mut window = vec![0i64; v.len()];
                    for j in (0..v.len()).rev() {
                        min = min.min(v[j]);
                        window[j] = min;
                    }
                    for k in 0..=jstar {
                        assert_eq!(w[k], v[k] - window[k], "rep {rep} k {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn horizon_cap_errors() {
        let sampler = PathwiseSampler::new(&binary()).unwrap();
        let err = sampler
            .build(100, &SeedTree::root(1), BuildCaps { max_tilted_steps: 10 })
            .unwrap_err();
        assert!(matches!(err, PathwiseError::HorizonOverflow { needed: 100, cap: 10 }));
    }

    #[test]
    fn direct_sampler_deterministic_law() {
        // P(D=2)=1: S(k) = k and h(k) = k
        let law = OffspringLaw::binary(0.0).unwrap();
        let mut st = SeedTree::root(2).child("direct").stream();
        let (path, h) = sample_direct(&law, 50, &mut st);
        for k in 0..=50usize {
            assert_eq!(path.values()[k], k as i64);
        }
        for k in 0..50usize {
            assert_eq!(h.as_slice()[k], k as u64);
        }
    }

    #[test]
    fn direct_sampler_lln() {
        let law = binary();
        let mut st = SeedTree::root(3).child("direct").stream();
        let horizon = 400;
        let reps = 2000;
        let mut sum = 0.0;
        for _ in 0..reps {
            let (path, _) = sample_direct(&law, horizon, &mut st);
            sum += *path.values().last().unwrap() as f64 / horizon as f64;
        }
        let mean = sum / reps as f64;
        let step_var = law.second_moment() - law.mean().powi(2);
        let se = (step_var / (horizon * reps) as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * se, "mean {mean}");
    }
}
