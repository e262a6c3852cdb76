//! Two-sample Kolmogorov–Smirnov distance, its permutation null, and
//! binomial proportions.

use rand::seq::SliceRandom;
use rangewalk::rng::substream;

/// `sup_x |F_a(x) - F_b(x)|` over the empirical distribution functions.
/// Empty samples give 0.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Step past every copy of the smaller value in both samples before comparing.
        let x = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < a.len() && a[i].total_cmp(&x).is_le() {
            i += 1;
        }
        while j < b.len() && b[j].total_cmp(&x).is_le() {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `q`-quantile of the KS distance under random relabelling of the pooled
/// sample, from `permutations` shuffles of a seeded stream.
pub fn ks_permutation_quantile(a: &[f64], b: &[f64], permutations: usize, q: f64, seed: u64) -> f64 {
    if a.is_empty() || b.is_empty() || permutations == 0 {
        return f64::NAN;
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut rng = substream(seed, "ks-permutation", 0);
    let mut null: Vec<f64> = (0..permutations)
        .map(|_| {
            pooled.shuffle(&mut rng);
            let (x, y) = pooled.split_at(a.len());
            ks_distance(x, y)
        })
        .collect();
    null.sort_by(f64::total_cmp);
    let rank = ((q * permutations as f64).ceil() as usize).clamp(1, permutations);
    null[rank - 1]
}

/// Fraction of successes with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub total: u64,
}

impl Proportion {
    pub fn new(successes: u64, total: u64) -> Self {
        Proportion { successes, total }
    }

    pub fn estimate(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.successes as f64 / self.total as f64
        }
    }

    pub fn se(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.total as f64).sqrt()
    }
}

/// `a <= b` up to `z` combined standard errors.
pub fn not_above(a: &Proportion, b: &Proportion, z: f64) -> bool {
    a.estimate() <= b.estimate() + z * (a.se().powi(2) + b.se().powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_fixed_values() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_distance(&a, &a), 0.0);
        assert_eq!(ks_distance(&a, &[10.0, 11.0]), 1.0);
        // F_a jumps at 1, 2, 3; F_b at 2.5 and 4: largest gap 2/3 at x in [2, 2.5).
        assert!((ks_distance(&a, &[2.5, 4.0]) - 2.0 / 3.0).abs() < 1e-15);
        // Ties across samples are stepped over together.
        assert!((ks_distance(&[1.0, 2.0, 2.0, 3.0], &[2.0, 2.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn permutation_quantile_is_reproducible_and_sensible() {
        let a: Vec<f64> = (0..200).map(|i| (i as f64 * 0.618).fract()).collect();
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.414).fract()).collect();
        let q1 = ks_permutation_quantile(&a, &b, 500, 0.99, 3);
        let q2 = ks_permutation_quantile(&a, &b, 500, 0.99, 3);
        assert_eq!(q1, q2);
        // Asymptotic 99% point: 1.63 sqrt(2 / 200).
        assert!((q1 - 0.163).abs() < 0.04, "{q1}");
    }

    #[test]
    fn proportions() {
        let p = Proportion::new(30, 100);
        assert_eq!(p.estimate(), 0.3);
        assert!((p.se() - (0.21f64 / 100.0).sqrt()).abs() < 1e-15);
        assert!(not_above(&Proportion::new(31, 100), &p, 2.0));
        assert!(!not_above(&Proportion::new(60, 100), &p, 2.0));
        assert!(Proportion::new(0, 0).estimate().is_nan());
    }
}
