/// Probability that an adversary with `limit` attempts per slice guesses at
/// least one of `num_slices` random `width`-bit slices:
/// `1 - (1 - limit * 2^-width)^num_slices`.
pub fn guess_success_probability(num_slices: usize, width: u32, limit: u32) -> f64 {
    let p = f64::from(limit) * 2f64.powi(-(width as i32));
    if p >= 1.0 {
        return if num_slices == 0 { 0.0 } else { 1.0 };
    }
    // expm1/ln1p keep precision when p is tiny
    -(num_slices as f64 * (-p).ln_1p()).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Each slice is a fresh secret; the guesser tries `limit` distinct values.
    fn monte_carlo(num_slices: usize, width: u32, limit: u32, trials: u64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = 1u64 << width;
        let mut hits = 0u64;
        for _ in 0..trials {
            let mut any = false;
            for _ in 0..num_slices {
                let secret = rng.random_range(0..space);
                let start = rng.random_range(0..space);
                // `limit` consecutive values mod 2^w are distinct
                any |= (secret + space - start) % space < u64::from(limit);
            }
            hits += any as u64;
        }
        hits as f64 / trials as f64
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(guess_success_probability(1, 1, 1), 0.5);
        let p = guess_success_probability(12, 20, 3);
        assert!((p - 3.433e-5).abs() < 5e-8, "{p}");
        let p = guess_success_probability(12, 13, 3);
        assert!((p - 4.386e-3).abs() < 5e-6, "{p}");
        assert_eq!(guess_success_probability(4, 1, 2), 1.0);
    }

    #[test]
    fn matches_monte_carlo() {
        let trials = 200_000;
        for (n, w, l) in [(12, 13, 3), (3, 6, 2), (13, 8, 3)] {
            let expected = guess_success_probability(n, w, l);
            let got = monte_carlo(n, w, l, trials, 11);
            let se = (expected * (1.0 - expected) / trials as f64).sqrt();
            assert!(
                (got - expected).abs() < 3.0 * se,
                "({n},{w},{l}): {got} vs {expected}"
            );
        }
    }
}
