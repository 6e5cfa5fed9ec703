use spinewalk::config_model::explore_prefix;
use spinewalk::experiments::BaseLaw;
use spinewalk::harness::{ks_two_sample, EmpiricalDist, ScalingSpec};
use spinewalk::rng::SeedTree;
use spinewalk::walk::height_process;
use rayon::prelude::*;

fn run(base: &BaseLaw, t: f64, reps: u64, seed0: u64, explo: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for seed in 0..5u64 {
        let mut dists = Vec::new();
        for n in [10_000u64, 40_000] {
            let model = base.model(1.0, n).unwrap();
            let spec = ScalingSpec::critical_window(n, 1.5, vec![t]).unwrap();
            let m = spec.index_at(t);
            let sd = SeedTree::root(seed0 + seed).child("hs").index(n);
            let samples: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let rs = sd.index(r);
                    let h = if explo {
                        let degrees = model.sample_degrees(&mut rs.child("degrees").stream());
                        let path = explore_prefix(&degrees, &mut rs.child("pairing").stream(), m + 1);
                        height_process(&path)
                    } else {
                        let mut st = rs.child("walk").stream();
                        let steps: Vec<i64> = (0..m).map(|_| model.sample_child_z(&mut st) as i64 - 2).collect();
                        height_process(&spinewalk::walk::Path::from_steps(&steps).unwrap())
                    };
                    let idx = (m.min(h.len())).saturating_sub(1);
                    spec.height_scale * h.as_slice()[idx] as f64
                })
                .collect();
            dists.push(EmpiricalDist::new(samples));
        }
        out.push(ks_two_sample(&dists[0], &dists[1]).unwrap().statistic);
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

fn main() {
    let tuned = BaseLaw { c: 8.892179, alpha: 1.5, kmin: 5 };
    let zeta = BaseLaw { c: 7.890551, alpha: 1.5, kmin: 2 };
    for (name, base) in [("tuned", &tuned), ("zeta", &zeta)] {
        for t in [1.0, 2.0, 4.0] {
            let iid = run(base, t, 4000, 700, false);
            let exp = run(base, t, 4000, 800, true);
            println!("{name} t={t}: iid median={:.4} {:?} | explo median={:.4}", iid[2], &iid[..], exp[2]);
        }
    }
}
