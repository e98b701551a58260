//! Sieves, prime counting estimates, Möbius weights and prime gaps.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature;

/// Strictly increasing sequence of positive integers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct IntegerSequence(Vec<u64>);

impl IntegerSequence {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.first().is_some_and(|&v| v == 0) {
            return Err(invalid("sequence values must be >= 1"));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "sequence must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: u64) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    /// First `count` elements (or all of them if shorter).
    pub fn take(&self, count: usize) -> Self {
        Self(self.0.iter().copied().take(count).collect())
    }
}

impl TryFrom<Vec<u64>> for IntegerSequence {
    type Error = crate::Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IntegerSequence> for Vec<u64> {
    fn from(s: IntegerSequence) -> Self {
        s.0
    }
}

/// Sieve of Eratosthenes: all primes `<= limit`.
pub fn sieve_primes(limit: u64) -> IntegerSequence {
    if limit < 2 {
        return IntegerSequence::default();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut i = 2;
    while i * i <= n {
        if !composite[i] {
            for j in (i * i..=n).step_by(i) {
                composite[j] = true;
            }
        }
        i += 1;
    }
    IntegerSequence(
        (2..=n)
            .filter(|&k| !composite[k])
            .map(|k| k as u64)
            .collect(),
    )
}

/// Lucky-number sieve: all lucky numbers `<= limit`.
///
/// Elimination is by position among the survivors, with the step taken from
/// the survivor values themselves (every 2nd, then every 3rd, every 7th, ...).
pub fn sieve_lucky(limit: u64) -> IntegerSequence {
    lucky_with_stages(limit, |_, _| {})
}

/// Lucky sieve that reports the survivor list after every stage.
pub(crate) fn lucky_with_stages(limit: u64, mut on_stage: impl FnMut(usize, &[u64])) -> IntegerSequence {
    if limit < 1 {
        return IntegerSequence::default();
    }
    // Stage 0 removes every second number.
    let mut survivors: Vec<u64> = (1..=limit).step_by(2).collect();
    on_stage(0, &survivors);
    let mut stage = 1;
    while stage < survivors.len() {
        let step = survivors[stage] as usize;
        if step > survivors.len() {
            break;
        }
        let mut pos = 0usize;
        survivors.retain(|_| {
            pos += 1;
            !pos.is_multiple_of(step)
        });
        on_stage(stage, &survivors);
        stage += 1;
    }
    IntegerSequence(survivors)
}

/// Grow the sieve limit until `count` values are available.
fn first_n(count: usize, sieve: impl Fn(u64) -> IntegerSequence) -> IntegerSequence {
    let mut limit = 16u64.max(2 * count as u64);
    loop {
        let s = sieve(limit);
        if s.len() >= count {
            return s.take(count);
        }
        limit *= 2;
    }
}

pub fn first_primes(count: usize) -> IntegerSequence {
    first_n(count, sieve_primes)
}

pub fn first_lucky(count: usize) -> IntegerSequence {
    first_n(count, sieve_lucky)
}

/// Möbius function by trial division.
pub fn moebius(n: u64) -> Result<i8> {
    if n == 0 {
        return Err(invalid("moebius(0) is undefined"));
    }
    let mut n = n;
    let mut sign = 1i8;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return Ok(0);
            }
            sign = -sign;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        sign = -sign;
    }
    Ok(sign)
}

/// `li(x) = ∫_2^x dt / ln t`.
pub fn log_integral(x: f64) -> f64 {
    if x == 2.0 {
        return 0.0;
    }
    quadrature::adaptive(&|t: f64| 1.0 / t.ln(), 2.0, x, 1e-12)
}

/// Riemann's `R(x) = Σ μ(n)/n · li(x^{1/n})`, summed from `n = 1` and
/// stopped at `terms` or once `x^{1/n} < 2`. Returns the value and the number
/// of terms used.
pub fn riemann_r(x: f64, terms: usize) -> (f64, usize) {
    let mut sum = 0.0;
    let mut used = 0;
    for n in 1..=terms as u64 {
        let root = x.powf(1.0 / n as f64);
        if root < 2.0 {
            break;
        }
        used += 1;
        let mu = moebius(n).expect("n >= 1");
        if mu != 0 {
            sum += mu as f64 / n as f64 * log_integral(root);
        }
    }
    (sum, used)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingEstimates {
    pub x: f64,
    pub exact: u64,
    pub gauss: f64,
    pub li: f64,
    pub riemann_r: f64,
    pub terms_used: usize,
}

pub fn counting_estimates(x: f64, terms: usize) -> Result<CountingEstimates> {
    if !(x > 2.0) || !x.is_finite() {
        return Err(invalid(format!("counting estimates need x > 2, got {x}")));
    }
    if terms == 0 {
        return Err(invalid("at least one Riemann term is required"));
    }
    let exact = sieve_primes(x.floor() as u64).len() as u64;
    let (riemann_r, terms_used) = riemann_r(x, terms);
    Ok(CountingEstimates {
        x,
        exact,
        gauss: x / x.ln(),
        li: log_integral(x),
        riemann_r,
        terms_used,
    })
}

/// `g(p_n) = p_{n+1} - p_n - 1` for each consecutive pair.
pub fn prime_gaps(seq: &IntegerSequence) -> Result<Vec<u64>> {
    if seq.len() < 2 {
        return Err(invalid("gaps need at least two elements"));
    }
    Ok(seq.values().windows(2).map(|w| w[1] - w[0] - 1).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBoundReport {
    pub holds: bool,
    /// Index assigned to the first element of the sequence.
    pub index_base: usize,
    /// Index (in the same base) of the first element with `e_n > A n²`.
    pub first_violation: Option<usize>,
}

/// Checks `e_n <= A n²` with `n` counted from 1.
pub fn check_growth_bound(seq: &IntegerSequence, a: f64) -> Result<GrowthBoundReport> {
    if !(a > 0.0) {
        return Err(invalid(format!("growth constant must be positive, got {a}")));
    }
    let first_violation = seq
        .values()
        .iter()
        .enumerate()
        .map(|(i, &e)| (i + 1, e))
        .find(|&(n, e)| e as f64 > a * (n * n) as f64)
        .map(|(n, _)| n);
    Ok(GrowthBoundReport {
        holds: first_violation.is_none(),
        index_base: 1,
        first_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_is_prime(n: u64) -> bool {
        n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }

    #[test]
    fn primes_up_to_ten() {
        assert_eq!(sieve_primes(10).values(), &[2, 3, 5, 7]);
        assert!(sieve_primes(1).is_empty());
        assert!(sieve_primes(0).is_empty());
    }

    #[test]
    fn first_fifteen_primes() {
        assert_eq!(
            sieve_primes(47).values(),
            &[2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]
        );
        assert_eq!(first_primes(15), sieve_primes(47));
    }

    #[test]
    fn sieve_agrees_with_trial_division() {
        let s = sieve_primes(2000);
        let brute: Vec<u64> = (0..=2000).filter(|&n| trial_is_prime(n)).collect();
        assert_eq!(s.values(), brute.as_slice());
    }

    #[test]
    fn lucky_numbers() {
        assert_eq!(first_lucky(10).values(), &[1, 3, 7, 9, 13, 15, 21, 25, 31, 33]);
        assert_eq!(sieve_lucky(2).values(), &[1]);
        assert_eq!(sieve_lucky(25).values(), &[1, 3, 7, 9, 13, 15, 21, 25]);
        assert_eq!(
            first_lucky(20).values(),
            &[1, 3, 7, 9, 13, 15, 21, 25, 31, 33, 37, 43, 49, 51, 63, 67, 69, 73, 75, 79]
        );
    }

    #[test]
    fn lucky_survivor_is_fixed_after_its_stage() {
        let mut stages: Vec<Vec<u64>> = Vec::new();
        let final_seq = lucky_with_stages(500, |_, s| stages.push(s.to_vec()));
        for (k, s) in stages.iter().enumerate() {
            if let Some(&v) = s.get(k + 1) {
                assert!(final_seq.contains(v), "value {v} fixed at stage {k} was removed later");
            }
        }
    }

    #[test]
    fn moebius_values() {
        assert_eq!(moebius(1).unwrap(), 1);
        assert_eq!(moebius(12).unwrap(), 0);
        assert_eq!(moebius(30).unwrap(), -1);
        assert_eq!(moebius(7).unwrap(), -1);
        assert_eq!(moebius(6).unwrap(), 1);
        assert!(moebius(0).is_err());
    }

    #[test]
    fn moebius_multiplicative_on_coprime_pairs() {
        for a in 1..=100u64 {
            for b in 1..=100u64 {
                if gcd(a, b) == 1 {
                    assert_eq!(moebius(a * b).unwrap(), moebius(a).unwrap() * moebius(b).unwrap());
                }
            }
        }
    }

    #[test]
    fn counting_estimates_exact_counts() {
        assert_eq!(counting_estimates(10.0, 5).unwrap().exact, 4);
        let e = counting_estimates(1000.0, 25).unwrap();
        assert_eq!(e.exact, 168);
        assert!((e.riemann_r - 168.0).abs() < 1.0, "R(1000) = {}", e.riemann_r);
        // x^{1/10} < 2 for x = 1000
        assert_eq!(e.terms_used, 9);
        assert!(counting_estimates(2.0, 5).is_err());
        assert!(counting_estimates(1.5, 5).is_err());
    }

    #[test]
    fn counting_estimates_match_extended_precision_values() {
        // 30-digit quadrature and series values.
        let cases = [
            (100.0, 29.080_977_803_962_14, 25.641_834_386_261_77),
            (1000.0, 176.564_494_210_034_73, 168.344_625_431_338_33),
            (10000.0, 1245.092052119271, 1226.9299790685718),
        ];
        for (x, li, r) in cases {
            let e = counting_estimates(x, 25).unwrap();
            assert!((e.li - li).abs() < 1e-9, "li({x}) = {}", e.li);
            assert!((e.riemann_r - r).abs() < 1e-9, "R({x}) = {}", e.riemann_r);
        }
    }

    #[test]
    fn riemann_beats_li() {
        for x in [100.0, 1000.0, 10000.0] {
            let e = counting_estimates(x, 100).unwrap();
            let exact = e.exact as f64;
            assert!((e.riemann_r - exact).abs() <= (e.li - exact).abs());
        }
    }

    #[test]
    fn estimates_positive_above_two() {
        for x in [2.5, 3.0, 17.3, 250.0] {
            let e = counting_estimates(x, 10).unwrap();
            assert!(e.gauss > 0.0 && e.li > 0.0 && e.riemann_r > 0.0, "{e:?}");
        }
    }

    #[test]
    fn gaps() {
        let g = |v: Vec<u64>| prime_gaps(&IntegerSequence::new(v).unwrap()).unwrap();
        assert_eq!(g(vec![7, 11]), vec![3]);
        assert_eq!(g(vec![17, 19]), vec![1]);
        assert_eq!(g(vec![23, 29]), vec![5]);
        assert!(prime_gaps(&IntegerSequence::new(vec![5]).unwrap()).is_err());
    }

    #[test]
    fn growth_bound() {
        assert!(check_growth_bound(&IntegerSequence::default(), 1.0).unwrap().holds);
        assert!(check_growth_bound(&first_primes(100), 3.0).unwrap().holds);
        let r = check_growth_bound(&IntegerSequence::new(vec![1, 100]).unwrap(), 1.0).unwrap();
        assert!(!r.holds);
        assert_eq!(r.first_violation, Some(2));
        assert_eq!(r.index_base, 1);
        assert!(check_growth_bound(&IntegerSequence::default(), 0.0).is_err());
    }

    #[test]
    fn growth_bound_matches_direct_scan() {
        let p = first_primes(100);
        let direct = p.values().iter().enumerate().all(|(i, &e)| e as f64 <= 3.0 * ((i + 1) * (i + 1)) as f64);
        assert!(direct);
    }

    #[test]
    fn invalid_sequences_rejected() {
        assert!(IntegerSequence::new(vec![0, 1]).is_err());
        assert!(IntegerSequence::new(vec![3, 3]).is_err());
        assert!(IntegerSequence::new(vec![5, 2]).is_err());
    }

    proptest! {
        #[test]
        fn count_matches_sieve(x in 2.01f64..5000.0) {
            let e = counting_estimates(x, 25).unwrap();
            prop_assert_eq!(e.exact as usize, sieve_primes(x.floor() as u64).len());
        }

        #[test]
        fn gaps_reconstruct_sequence(limit in 3u64..3000) {
            let p = sieve_primes(limit);
            prop_assume!(p.len() >= 2);
            let g = prime_gaps(&p).unwrap();
            let mut rebuilt = vec![p.values()[0]];
            for gap in g {
                let last = *rebuilt.last().unwrap();
                rebuilt.push(last + gap + 1);
            }
            prop_assert_eq!(rebuilt.as_slice(), p.values());
        }
    }
}
