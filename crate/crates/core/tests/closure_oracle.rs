use dunnett_ctp::closure::{run_closure, ClosureOptions, Procedure};
use dunnett_ctp::contrasts::{dunnett_contrasts, grand_mean_contrasts, Subset};
use dunnett_ctp::design::{fit_one_way, Dataset, ModelFit};
use dunnett_ctp::marginal::{anova_f, mct_maxtest, two_sample_t, ElementaryMode, FDenominator, Sidedness, TwoSampleDf};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_fit(k: usize, seed: u64) -> ModelFit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..=k)
        .map(|g| {
            let n = 3 + (seed as usize + 2 * g) % 5;
            let shift = if g % 2 == 1 { 0.8 } else { 0.0 };
            let d = Normal::new(shift, 1.0).unwrap();
            (0..n).map(|_| d.sample(&mut rng)).collect()
        })
        .collect();
    fit_one_way(&Dataset::from_samples(&samples).unwrap()).unwrap()
}

/// Adjusted p-values recomputed by enumerating bitmasks directly.
fn brute_force_adjusted(result: &dunnett_ctp::closure::ClosureResult) -> Vec<f64> {
    let k = result.k();
    (1..=k)
        .map(|i| {
            (1u32..(1 << k))
                .filter(|b| b & (1 << (i - 1)) != 0)
                .map(|b| result.node(Subset::from_bits(b)).expect("node present").local_p)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

#[test]
fn adjusted_equals_superset_maximum() {
    for k in 1..=5 {
        for rep in 0..3u64 {
            let fit = random_fit(k, 10 * k as u64 + rep);
            for side in [Sidedness::TwoSided, Sidedness::Greater] {
                let opts = ClosureOptions { side, ..Default::default() };
                for p in [Procedure::CtpDu, Procedure::CtpF, Procedure::CtpGm] {
                    let r = run_closure(&fit, p, &opts, 99).unwrap();
                    assert_eq!(r.nodes.len(), (1 << k) - 1);
                    assert_eq!(r.adjusted, brute_force_adjusted(&r), "{p:?} k={k}");
                }
            }
        }
    }
}

#[test]
fn node_p_values_match_direct_tests() {
    let fit = random_fit(4, 3);
    let g = fit.groups();
    let opts = ClosureOptions::default();
    let side = opts.side;
    for p in [Procedure::CtpDu, Procedure::CtpF, Procedure::CtpGm] {
        let r = run_closure(&fit, p, &opts, 5).unwrap();
        for node in &r.nodes {
            let s = node.subset;
            let direct = match p {
                Procedure::CtpDu if s.len() == 1 => two_sample_t(s.max_index(), &fit, side, TwoSampleDf::PooledFull).unwrap(),
                Procedure::CtpDu => mct_maxtest(&dunnett_contrasts(g, s).unwrap(), &fit, side, &opts.mvt, 12345).unwrap(),
                Procedure::CtpGm => mct_maxtest(&grand_mean_contrasts(g, s).unwrap(), &fit, side, &opts.mvt, 12345).unwrap(),
                _ => anova_f(s, &fit, ElementaryMode::PairwiseFullDf, FDenominator::SubsetRefit, side).unwrap(),
            };
            // Different integration seeds: agreement up to the error bounds.
            let tol = node.test.mvt_error + direct.mvt_error + 1e-12;
            assert!((node.local_p - direct.p).abs() <= tol, "{p:?} {:?}: {} vs {}", s.indices(), node.local_p, direct.p);
        }
    }
}

#[test]
fn rejections_are_coherent() {
    for seed in 0..8u64 {
        let fit = random_fit(4, seed);
        for p in [Procedure::CtpDu, Procedure::CtpF, Procedure::CtpGm] {
            let r = run_closure(&fit, p, &ClosureOptions::default(), seed).unwrap();
            for alpha in [0.01, 0.05, 0.1] {
                for i in r.rejected(alpha) {
                    for node in r.nodes.iter().filter(|n| n.subset.contains(i)) {
                        assert!(node.local_p < alpha, "{p:?}: H{i} rejected but node {:?} has p {}", node.subset.indices(), node.local_p);
                    }
                }
            }
            for (i, &a) in r.adjusted.iter().enumerate() {
                let elementary = r.node(Subset::singleton(i + 1)).unwrap().local_p;
                assert!(a >= elementary);
            }
        }
    }
}

#[test]
fn single_step_shares_the_global_node() {
    for seed in 0..4u64 {
        let fit = random_fit(3, 40 + seed);
        for side in [Sidedness::TwoSided, Sidedness::Less] {
            let opts = ClosureOptions { side, ..Default::default() };
            let single = run_closure(&fit, Procedure::Dunnett, &opts, seed).unwrap();
            let closed = run_closure(&fit, Procedure::CtpDu, &opts, seed).unwrap();
            let min = single.adjusted.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(min, closed.node(Subset::full(3)).unwrap().local_p);
            for (a, b) in single.adjusted.iter().zip(&closed.adjusted) {
                assert!(b >= &min);
                assert!(a >= &min);
            }
        }
    }
}
