use dcop::stats::{kruskal_wallis, ks_normality, posthoc_bonferroni, Dominance, SampleGroup, ALPHA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

fn groups_from(rng: &mut ChaCha8Rng, shifts: &[f64], n: usize) -> Vec<SampleGroup> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    shifts
        .iter()
        .enumerate()
        .map(|(i, &shift)| SampleGroup::new(format!("g{i}"), (0..n).map(|_| normal.sample(rng) + shift).collect()))
        .collect()
}

#[test]
fn reference_example_matches() {
    let groups = [SampleGroup::new("a", vec![1.0, 2.0, 3.0]), SampleGroup::new("b", vec![4.0, 5.0, 6.0])];
    let kw = kruskal_wallis(&groups).unwrap();
    // H = 12 / (n (n + 1)) * sum R_i^2 / n_i - 3 (n + 1) with rank sums 6 and 15.
    let h = 12.0 / (6.0 * 7.0) * (36.0 / 3.0 + 225.0 / 3.0) - 3.0 * 7.0;
    assert!((kw.h - h).abs() < 1e-12);
    assert!((kw.h - 3.857).abs() < 1e-3);
    // One degree of freedom: the chi-square tail equals the two-sided normal tail at sqrt(H).
    let p = statrs::function::erf::erfc((h / 2.0).sqrt());
    assert!((kw.p - p).abs() < 1e-9, "{} vs {p}", kw.p);
    assert!((kw.p - 0.0495).abs() < 1e-3);
}

#[test]
fn null_rejection_rate_is_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let reps = 4000;
    let rejected = (0..reps)
        .filter(|_| kruskal_wallis(&groups_from(&mut rng, &[0.0; 4], 30)).unwrap().p < ALPHA)
        .count();
    let rate = rejected as f64 / reps as f64;
    assert!((rate - 0.05).abs() <= 0.02, "rate {rate}");
}

#[test]
fn shifted_group_is_detected_and_ranked() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let groups = groups_from(&mut rng, &[0.0, 0.0, 0.0, 2.0], 30);
    let cmp = posthoc_bonferroni(&groups, true).unwrap();
    assert!(cmp.omnibus.p < ALPHA);
    for i in 0..3 {
        assert_eq!(cmp.dominance[3][i], Dominance::DominatedBy);
        assert_eq!(cmp.dominance[i][3], Dominance::Outperforms);
    }
    assert_eq!(cmp.dominated_by(3).len(), 0);
    assert_eq!(cmp.dominators_of(3), vec![0, 1, 2]);
}

#[test]
fn posthoc_family_error_is_controlled_under_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let reps = 1000;
    let any_claim = (0..reps)
        .filter(|_| {
            let cmp = posthoc_bonferroni(&groups_from(&mut rng, &[0.0; 4], 30), true).unwrap();
            cmp.dominance.iter().flatten().any(|d| *d != Dominance::NoDifference)
        })
        .count();
    assert!((any_claim as f64 / reps as f64) <= 0.07, "{any_claim} of {reps}");
}

#[test]
fn normality_accepts_normal_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(3.0, 2.0).unwrap();
    let reps = 300;
    let accepted = (0..reps)
        .filter(|_| {
            let sample: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng)).collect();
            ks_normality(&sample).p > 0.05
        })
        .count();
    assert!(accepted as f64 >= 0.9 * reps as f64, "{accepted} of {reps}");
}

#[test]
fn normality_rejects_uniform_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let uniform = Uniform::new(0.0, 1.0);
    let reps = 300;
    let rejected = (0..reps)
        .filter(|_| {
            let sample: Vec<f64> = (0..200).map(|_| uniform.sample(&mut rng)).collect();
            ks_normality(&sample).p < 0.05
        })
        .count();
    assert!(rejected as f64 >= 0.9 * reps as f64, "{rejected} of {reps}");
}

#[test]
fn ks_distance_is_scale_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sample: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let scaled: Vec<f64> = sample.iter().map(|v| 5.0 * v - 2.0).collect();
    let (a, b) = (ks_normality(&sample), ks_normality(&scaled));
    assert!((a.d - b.d).abs() < 1e-12 && (a.p - b.p).abs() < 1e-12);
}
