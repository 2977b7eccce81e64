//! Backscatter training sequences: the +/-1 reflection-coefficient pattern
//! the tag applies to the ambient signal, one value per chip.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// i.i.d. equiprobable chips.
    Pn,
    /// Equal +1/-1 chips inside every ambient-symbol window.
    Balanced,
    WalshHadamard,
    /// Maximal-length LFSR sequence.
    MSequence,
    /// Caller-supplied chips.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence {
    chips: Vec<i8>,
    tc: f64,
    kind: SequenceKind,
}

impl TrainingSequence {
    pub fn new(chips: Vec<i8>, tc: f64, kind: SequenceKind) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::invalid(
                "chips",
                "sequence must contain at least one chip",
            ));
        }
        if let Some(bad) = chips.iter().find(|&&c| c != 1 && c != -1) {
            return Err(Error::invalid(
                "chips",
                format!("chip value {bad} is not +1 or -1"),
            ));
        }
        if !(tc.is_finite() && tc > 0.0) {
            return Err(Error::invalid("tc", format!("must be > 0, got {tc}")));
        }
        Ok(TrainingSequence { chips, tc, kind })
    }

    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn tc(&self) -> f64 {
        self.tc
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    /// Same chips, negating the one at `index` (fault injection).
    pub fn with_flipped_chip(&self, index: usize) -> Self {
        let mut chips = self.chips.clone();
        chips[index] = -chips[index];
        TrainingSequence {
            chips,
            tc: self.tc,
            kind: SequenceKind::Custom,
        }
    }

    /// Sum of each consecutive window of `window` chips.
    pub(crate) fn window_sums(&self, window: usize) -> impl Iterator<Item = i64> + '_ {
        self.chips
            .chunks(window)
            .map(|w| w.iter().map(|&c| c as i64).sum())
    }

    /// Chips as a CSV row of `1`/`-1`.
    pub fn to_csv_row(&self) -> String {
        let mut row = self
            .chips
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        row.push('\n');
        row
    }
}

/// Fresh i.i.d. equiprobable +/-1 chips.
pub fn gen_pn<R: Rng + ?Sized>(nc: usize, tc: f64, rng: &mut R) -> Result<TrainingSequence> {
    let chips = (0..nc)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    TrainingSequence::new(chips, tc, SequenceKind::Pn)
}

/// How the +1 and -1 chips are laid out inside each symbol window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BalancedPattern {
    /// `+1` for the first half of the window, `-1` for the second.
    #[default]
    ContiguousHalves,
    /// Sign flips on every chip, so the switching rate grows with the chip
    /// count. Only this layout keeps the residual small when the real symbol
    /// duration differs from the designed one.
    Alternating,
}

/// `ns` repetitions of `+1` for the first half of a symbol and `-1` for the
/// second half, `chips_per_symbol` chips per symbol.
pub fn gen_balanced(ns: usize, chips_per_symbol: usize, tc: f64) -> Result<TrainingSequence> {
    gen_balanced_pattern(ns, chips_per_symbol, tc, BalancedPattern::ContiguousHalves)
}

pub fn gen_balanced_pattern(
    ns: usize,
    chips_per_symbol: usize,
    tc: f64,
    pattern: BalancedPattern,
) -> Result<TrainingSequence> {
    if ns == 0 {
        return Err(Error::invalid("ns", "must be >= 1"));
    }
    if chips_per_symbol < 2 || !chips_per_symbol.is_multiple_of(2) {
        return Err(Error::DesignCriterion(format!(
            "chips per symbol must be even and >= 2, got {chips_per_symbol}"
        )));
    }
    let chips = match pattern {
        BalancedPattern::ContiguousHalves => {
            let half = chips_per_symbol / 2;
            let window = std::iter::repeat_n(1i8, half).chain(std::iter::repeat_n(-1i8, half));
            std::iter::repeat_n(window, ns).flatten().collect()
        }
        BalancedPattern::Alternating => (0..ns * chips_per_symbol)
            .map(|n| if n % 2 == 0 { 1 } else { -1 })
            .collect(),
    };
    TrainingSequence::new(chips, tc, SequenceKind::Balanced)
}

/// Row `row` of the Sylvester Hadamard matrix of size `order`.
pub fn walsh_hadamard_row(order: usize, row: usize, tc: f64) -> Result<TrainingSequence> {
    if order < 2 || !order.is_power_of_two() {
        return Err(Error::invalid(
            "order",
            format!("must be a power of two >= 2, got {order}"),
        ));
    }
    if row >= order {
        return Err(Error::invalid(
            "row",
            format!("{row} out of range for order {order}"),
        ));
    }
    let chips = (0..order)
        .map(|col| {
            if (row & col).count_ones().is_multiple_of(2) {
                1
            } else {
                -1
            }
        })
        .collect();
    TrainingSequence::new(chips, tc, SequenceKind::WalshHadamard)
}

/// True iff every window of `nc / ns` chips sums to zero.
pub fn is_balanced(seq: &TrainingSequence, ns: usize) -> Result<bool> {
    let nc = seq.len();
    if ns == 0 || !nc.is_multiple_of(ns) {
        return Err(Error::InvalidWindow { ns, nc });
    }
    let mut sums = seq.window_sums(nc / ns);
    Ok(sums.all(|s| s == 0))
}

// Feedback taps (1-based stage numbers) of primitive polynomials.
const PRIMITIVE_TAPS: [&[u32]; 15] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 6, 4, 1],
    &[13, 4, 3, 1],
    &[14, 5, 3, 1],
    &[15, 14],
    &[16, 15, 13, 4],
];

/// `nc` chips of the maximal-length sequence of a `degree`-stage Fibonacci
/// LFSR (period `2^degree - 1`), starting from the all-ones state. Bit 0 maps
/// to `+1`, bit 1 to `-1`.
pub fn gen_msequence(degree: u32, nc: usize, tc: f64) -> Result<TrainingSequence> {
    if !(2..=16).contains(&degree) {
        return Err(Error::invalid(
            "degree",
            format!("supported degrees are 2..=16, got {degree}"),
        ));
    }
    let taps = PRIMITIVE_TAPS[(degree - 2) as usize];
    let mask = (1u32 << degree) - 1;
    let mut state = mask;
    let chips = (0..nc)
        .map(|_| {
            let out = state & 1;
            let fb = taps
                .iter()
                .fold(0, |acc, &t| acc ^ (state >> (degree - t)) & 1);
            state = ((state >> 1) | (fb << (degree - 1))) & mask;
            if out == 0 {
                1
            } else {
                -1
            }
        })
        .collect();
    TrainingSequence::new(chips, tc, SequenceKind::MSequence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TC: f64 = 500e-9;

    #[test]
    fn balanced_examples() {
        assert_eq!(gen_balanced(1, 2, TC).unwrap().chips(), &[1, -1]);
        assert_eq!(gen_balanced(2, 2, TC).unwrap().chips(), &[1, -1, 1, -1]);
        assert_eq!(gen_balanced(1, 4, TC).unwrap().chips(), &[1, 1, -1, -1]);
        assert!(matches!(
            gen_balanced(3, 3, TC),
            Err(Error::DesignCriterion(_))
        ));
        assert!(matches!(
            gen_balanced(3, 0, TC),
            Err(Error::DesignCriterion(_))
        ));
        let alt = gen_balanced_pattern(1, 4, TC, BalancedPattern::Alternating).unwrap();
        assert_eq!(alt.chips(), &[1, -1, 1, -1]);
        assert!(gen_balanced_pattern(2, 5, TC, BalancedPattern::Alternating).is_err());
    }

    #[test]
    fn hadamard_examples() {
        assert_eq!(walsh_hadamard_row(2, 1, TC).unwrap().chips(), &[1, -1]);
        let r0 = walsh_hadamard_row(4, 0, TC).unwrap();
        assert_eq!(r0.chips(), &[1, 1, 1, 1]);
        assert!(!is_balanced(&r0, 1).unwrap());
        let r2 = walsh_hadamard_row(4, 2, TC).unwrap();
        assert_eq!(r2.chips(), &[1, 1, -1, -1]);
        assert!(is_balanced(&r2, 1).unwrap());
        assert!(walsh_hadamard_row(6, 1, TC).is_err());
        assert!(walsh_hadamard_row(4, 4, TC).is_err());
    }

    #[test]
    fn is_balanced_examples() {
        let alt = TrainingSequence::new(vec![1, -1, 1, -1], TC, SequenceKind::Custom).unwrap();
        let halves = TrainingSequence::new(vec![1, 1, -1, -1], TC, SequenceKind::Custom).unwrap();
        assert!(is_balanced(&alt, 2).unwrap());
        assert!(!is_balanced(&halves, 2).unwrap());
        assert!(is_balanced(&halves, 1).unwrap());
        assert_eq!(
            is_balanced(&halves, 3).unwrap_err(),
            Error::InvalidWindow { ns: 3, nc: 4 }
        );
    }

    #[test]
    fn rejects_bad_chips() {
        assert!(TrainingSequence::new(vec![1, 0], TC, SequenceKind::Custom).is_err());
        assert!(TrainingSequence::new(vec![], TC, SequenceKind::Custom).is_err());
        assert!(TrainingSequence::new(vec![1], 0.0, SequenceKind::Custom).is_err());
    }

    #[test]
    fn pn_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut sum, mut n) = (0i64, 0usize);
        for _ in 0..2_000 {
            let s = gen_pn(400, TC, &mut rng).unwrap();
            sum += s.chips().iter().map(|&c| c as i64).sum::<i64>();
            n += s.len();
        }
        assert!((sum as f64 / n as f64).abs() < 0.02);
    }

    #[test]
    fn pn_balanced_fraction() {
        // enumeration of all 16 four-chip sequences: C(4,2) = 6 are balanced
        let exact = (0u32..16).filter(|b| b.count_ones() == 2).count() as f64 / 16.0;
        assert_eq!(exact, 0.375);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|_| is_balanced(&gen_pn(4, TC, &mut rng).unwrap(), 1).unwrap())
            .count();
        assert!((hits as f64 / trials as f64 - exact).abs() < 0.02);
    }

    #[test]
    fn pn_reproducible() {
        let a = gen_pn(64, TC, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_pn(64, TC, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hadamard_rows_orthogonal_and_zero_sum() {
        for order in [2usize, 4, 8, 16, 32, 64] {
            let rows: Vec<_> = (0..order)
                .map(|r| walsh_hadamard_row(order, r, TC).unwrap())
                .collect();
            for (i, a) in rows.iter().enumerate() {
                let sum: i64 = a.chips().iter().map(|&c| c as i64).sum();
                assert_eq!(sum, if i == 0 { order as i64 } else { 0 });
                for b in &rows[i + 1..] {
                    let dot: i64 = a
                        .chips()
                        .iter()
                        .zip(b.chips())
                        .map(|(&x, &y)| (x * y) as i64)
                        .sum();
                    assert_eq!(dot, 0);
                }
            }
        }
    }

    #[test]
    fn hadamard_top_row_windows() {
        // row `order/2` is +1 for the first half and -1 for the second, so it
        // is balanced with one window, and row 1 alternates, so balanced for
        // any window count dividing order/2.
        for order in [2usize, 4, 8, 16, 32, 64] {
            assert!(is_balanced(&walsh_hadamard_row(order, order / 2, TC).unwrap(), 1).unwrap());
            let alt = walsh_hadamard_row(order, 1, TC).unwrap();
            let mut ns = 1;
            while ns <= order / 2 {
                assert!(is_balanced(&alt, ns).unwrap());
                ns *= 2;
            }
        }
    }

    #[test]
    fn msequence_period_and_balance() {
        for degree in 2..=12u32 {
            let period = (1usize << degree) - 1;
            let s = gen_msequence(degree, 2 * period, TC).unwrap();
            let chips = s.chips();
            assert_eq!(&chips[..period], &chips[period..]);
            let minus = chips[..period].iter().filter(|&&c| c == -1).count();
            assert_eq!(minus, 1 << (degree - 1), "degree {degree}");
            // no shorter period
            for p in 1..period {
                if period.is_multiple_of(p) {
                    assert!(
                        (0..period).any(|i| chips[i] != chips[i + p]),
                        "degree {degree} has period {p}"
                    );
                }
            }
        }
        assert!(gen_msequence(1, 4, TC).is_err());
    }

    proptest! {
        #[test]
        fn generated_balanced_is_balanced(ns in 1usize..40, half in 1usize..20) {
            for pattern in [BalancedPattern::ContiguousHalves, BalancedPattern::Alternating] {
                let s = gen_balanced_pattern(ns, 2 * half, TC, pattern).unwrap();
                prop_assert_eq!(s.len(), ns * 2 * half);
                prop_assert!(is_balanced(&s, ns).unwrap());
            }
        }
    }
}
