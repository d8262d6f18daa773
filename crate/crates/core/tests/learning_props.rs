use proptest::prelude::*;
use ramdp::learning::{lui_update, map_point_estimate, pac_intervals, pac_radius, LuiTransitionState, Strength};
use ramdp::model::Interval;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// Random prior intervals around a random distribution, so the box always
/// contains one, with random strengths.
fn prior_strategy() -> impl Strategy<Value = Vec<LuiTransitionState>> {
    (2usize..=6).prop_flat_map(|m| {
        (
            prop::collection::vec((0.01f64..1.0, 0.0f64..=1.0, 0.0f64..=1.0), m),
            1u64..20,
            0u64..20,
        )
            .prop_map(|(raw, lo, extra)| {
                let strength = Strength::new(lo, lo + extra);
                let total: f64 = raw.iter().map(|r| r.0).sum();
                raw.into_iter()
                    .map(|(w, a, b)| {
                        let p = w / total;
                        LuiTransitionState {
                            interval: Interval::new((p * a).max(1e-6), p + b * (1.0 - p)),
                            strength,
                        }
                    })
                    .collect()
            })
    })
}

fn counts_strategy(m: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..50, m).prop_filter("at least one sample", |k| k.iter().sum::<u64>() > 0)
}

fn sums(xs: &[LuiTransitionState]) -> (f64, f64) {
    (
        xs.iter().map(|x| x.interval.lower).sum(),
        xs.iter().map(|x| x.interval.upper).sum(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn lui_posterior_is_closed(
        (priors, k) in prior_strategy().prop_flat_map(|p| { let m = p.len(); (Just(p), counts_strategy(m)) })
    ) {
        let n: u64 = k.iter().sum();
        let post = lui_update(&priors, n, &k, None).unwrap();
        for p in &post {
            prop_assert!(p.interval.lower > 0.0);
            prop_assert!(p.interval.lower <= p.interval.upper + TOL);
            prop_assert!(p.interval.upper <= 1.0 + TOL);
        }
        let (lo, hi) = sums(&priors);
        let (lo2, hi2) = sums(&post);
        prop_assert!(lo2 <= 1.0 + TOL && hi2 >= 1.0 - TOL);
        let freq = |i: usize| k[i] as f64 / n as f64;
        let lower_agrees = (0..k.len()).all(|i| freq(i) >= priors[i].interval.lower);
        let upper_agrees = (0..k.len()).all(|i| freq(i) <= priors[i].interval.upper);
        if lower_agrees && upper_agrees {
            prop_assert!(lo - TOL <= lo2 && hi2 <= hi + TOL);
        }
        let upper_conflicts = (0..k.len()).filter(|&i| freq(i) > priors[i].interval.upper).count();
        prop_assert!(upper_conflicts < k.len());
    }

    #[test]
    fn split_batches_stay_valid(
        (priors, k, split) in prior_strategy().prop_flat_map(|p| {
            let m = p.len();
            (Just(p), counts_strategy(m), prop::collection::vec(0.0f64..=1.0, m))
        })
    ) {
        let n: u64 = k.iter().sum();
        let once = lui_update(&priors, n, &k, None).unwrap();
        let first: Vec<u64> = k.iter().zip(&split).map(|(&x, &f)| (x as f64 * f).floor() as u64).collect();
        let second: Vec<u64> = k.iter().zip(&first).map(|(a, b)| a - b).collect();
        let mut twice = priors.clone();
        for batch in [first, second] {
            let nb: u64 = batch.iter().sum();
            if nb > 0 {
                twice = lui_update(&twice, nb, &batch, None).unwrap();
            }
        }
        for post in [once, twice] {
            let (lo, hi) = sums(&post);
            prop_assert!(lo <= 1.0 + TOL && hi >= 1.0 - TOL);
            prop_assert!(post.iter().all(|p| 0.0 < p.interval.lower && p.interval.lower <= p.interval.upper + TOL));
        }
    }

    #[test]
    fn capped_strengths_respect_the_cap(
        (priors, k) in prior_strategy().prop_flat_map(|p| { let m = p.len(); (Just(p), counts_strategy(m)) })
    ) {
        let cap = Strength::new(3, 7);
        let n: u64 = k.iter().sum();
        let post = lui_update(&priors, n, &k, Some(cap)).unwrap();
        for p in &post {
            prop_assert!(p.strength.lo <= cap.lo && p.strength.hi <= cap.hi);
        }
    }

    #[test]
    fn map_estimate_is_a_distribution(alphas in prop::collection::vec(1.0f64..20.0, 2..6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts: Vec<u64> = alphas.iter().map(|_| rng.gen_range(0..30)).collect();
        let p = map_point_estimate(&alphas, &counts).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

fn lui_prior(m: usize) -> Vec<LuiTransitionState> {
    vec![
        LuiTransitionState {
            interval: Interval::new(1e-4, 1.0 - 1e-4),
            strength: Strength::new(5, 10),
        };
        m
    ]
}

/// Feeds i.i.d. samples in doubling batches (1, 1, 2, 4, ...) until `total`.
fn lui_after(truth: &[f64], total: u64, rng: &mut ChaCha8Rng) -> Vec<LuiTransitionState> {
    let dist = WeightedIndex::new(truth).unwrap();
    let mut state = lui_prior(truth.len());
    let mut seen = 0;
    while seen < total {
        let n = seen.max(1).min(total - seen);
        let mut k = vec![0u64; truth.len()];
        for _ in 0..n {
            k[dist.sample(rng)] += 1;
        }
        state = lui_update(&state, n, &k, None).unwrap();
        seen += n;
    }
    state
}

#[test]
fn lui_converges_to_the_truth() {
    let truth = [0.3, 0.7];
    let mut narrow = 0;
    let mut contained = 0;
    let mut near = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let post = lui_after(&truth, 100_000, &mut rng);
        if post.iter().all(|p| p.interval.width() < 0.02) {
            narrow += 1;
        }
        if post.iter().zip(truth).all(|(p, t)| p.interval.contains(t)) {
            contained += 1;
        }
        if post
            .iter()
            .zip(truth)
            .all(|(p, t)| (p.interval.lower - t).abs() < 0.01 && (p.interval.upper - t).abs() < 0.01)
        {
            near += 1;
        }
    }
    assert_eq!(narrow, 100);
    assert!(near >= 95);
    // Widths shrink like 1/N while sampling noise shrinks like 1/sqrt(N), so
    // the narrow posterior usually sits just beside the truth.
    assert!(contained < 95, "{contained}");
}

#[test]
fn pac_intervals_cover_at_the_nominal_rate() {
    let truth = [0.2, 0.5, 0.3];
    let gamma_p = 0.01 / truth.len() as f64;
    let dist = WeightedIndex::new(truth).unwrap();
    let mut escapes = 0;
    let runs = 1000;
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 200;
        let mut k = [0u64; 3];
        for _ in 0..n {
            k[dist.sample(&mut rng)] += 1;
        }
        let est = map_point_estimate(&[10.0; 3], &k).unwrap();
        let iv = pac_intervals(&est, n, gamma_p, 1e-4);
        if iv.iter().zip(truth).any(|(i, t)| !i.contains(t)) {
            escapes += 1;
        }
    }
    assert!(pac_radius(200, gamma_p) > 0.1);
    assert!(escapes as f64 / runs as f64 <= 0.02, "{escapes}");
}
