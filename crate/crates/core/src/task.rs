//! Boolean tasks in positive-polarity Reed-Muller form.
//!
//! An N-bit Boolean function is the XOR of the monomials `x_{i1}·x_{i2}·…`
//! whose coefficient is set. Monomial `k` multiplies the input bits named by
//! the set bits of `k`, so it fires on input `x` exactly when `k` is a
//! submask of `x`. The same index `k` names the gate `G_k` of the reversible
//! circuit, which is controlled on those same input bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Largest supported input width. `2^N` coefficients are stored densely.
pub const MAX_BITS: u32 = 24;

fn check_bits(n_bits: u32) -> Result<()> {
    if n_bits == 0 || n_bits > MAX_BITS {
        return Err(invalid_arg(format!(
            "n_bits must be in 1..={MAX_BITS}, got {n_bits}"
        )));
    }
    Ok(())
}

/// Number of inputs (and gates) for an `n_bits`-wide function.
#[inline]
pub fn dimension(n_bits: u32) -> usize {
    1usize << n_bits
}

/// An input word `x = x_N … x_2 x_1`, bit `i-1` of `value` holding `x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputWord {
    n_bits: u32,
    value: usize,
}

impl InputWord {
    pub fn new(n_bits: u32, value: usize) -> Result<Self> {
        check_bits(n_bits)?;
        if value >= dimension(n_bits) {
            return Err(invalid_arg(format!(
                "input {value} does not fit in {n_bits} bits"
            )));
        }
        Ok(Self { n_bits, value })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn value(&self) -> usize {
        self.value
    }

    /// Every input word of the given width, in ascending order.
    pub fn all(n_bits: u32) -> impl Iterator<Item = InputWord> {
        (0..dimension(n_bits)).map(move |value| InputWord { n_bits, value })
    }
}

/// Ascending iterator over the submasks of a mask, starting at 0.
#[derive(Debug, Clone)]
pub struct Submasks {
    mask: usize,
    next: Option<usize>,
}

impl Submasks {
    pub fn new(mask: usize) -> Self {
        Self {
            mask,
            next: Some(0),
        }
    }
}

impl Iterator for Submasks {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let cur = self.next?;
        // Adding one to (cur | !mask) carries through the unset positions,
        // which yields the next larger submask.
        let succ = (cur | !self.mask).wrapping_add(1) & self.mask;
        self.next = if succ == 0 { None } else { Some(succ) };
        Some(cur)
    }
}

/// Indices of the gates activated by `x`, ascending. Always contains 0.
pub fn active_set(x: InputWord) -> Vec<usize> {
    Submasks::new(x.value).collect()
}

/// A deterministic N-bit Boolean function given by its Reed-Muller
/// coefficients `a_0 … a_{2^N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TaskRepr", into = "TaskRepr")]
pub struct BooleanTask {
    n_bits: u32,
    coefficients: Vec<bool>,
}

impl BooleanTask {
    pub fn new(n_bits: u32, coefficients: Vec<bool>) -> Result<Self> {
        check_bits(n_bits)?;
        if coefficients.len() != dimension(n_bits) {
            return Err(invalid_arg(format!(
                "expected {} coefficients for {n_bits} bits, got {}",
                dimension(n_bits),
                coefficients.len()
            )));
        }
        Ok(Self {
            n_bits,
            coefficients,
        })
    }

    /// The constant-zero function, all coefficients cleared.
    pub fn constant_zero(n_bits: u32) -> Result<Self> {
        check_bits(n_bits)?;
        Ok(Self {
            n_bits,
            coefficients: vec![false; dimension(n_bits)],
        })
    }

    /// Builds a task from 0/1 integers, e.g. `&[1, 1]` for `x ↦ x ⊕ 1`.
    pub fn from_bits(n_bits: u32, bits: &[u8]) -> Result<Self> {
        let coefficients = bits
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(invalid_arg(format!("coefficient {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_bits, coefficients)
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[bool] {
        &self.coefficients
    }

    /// Output bit for `x`, without the width check.
    #[inline]
    pub(crate) fn output(&self, x: usize) -> bool {
        Submasks::new(x).fold(false, |acc, k| acc ^ self.coefficients[k])
    }

    /// Truth table, indexed by input value.
    pub fn truth_table(&self) -> Vec<bool> {
        (0..self.dimension()).map(|x| self.output(x)).collect()
    }

    /// Parses `0x…` (hex) or `0b…` (binary) coefficient strings. The string
    /// is an integer whose bit `k` is `a_k`.
    pub fn parse(n_bits: u32, s: &str) -> Result<Self> {
        check_bits(n_bits)?;
        let dim = dimension(n_bits);
        let s = s.trim();
        let (digits, radix_bits) = if let Some(rest) = s.strip_prefix("0x").or(s.strip_prefix("0X")) {
            (rest, 4u32)
        } else if let Some(rest) = s.strip_prefix("0b").or(s.strip_prefix("0B")) {
            (rest, 1u32)
        } else {
            return Err(invalid_arg(format!(
                "coefficient string {s:?} needs a 0x or 0b prefix"
            )));
        };
        let digits: Vec<char> = digits.chars().filter(|&c| c != '_').collect();
        if digits.is_empty() {
            return Err(invalid_arg("empty coefficient string"));
        }
        let mut coefficients = vec![false; dim];
        for (pos, c) in digits.iter().rev().enumerate() {
            let d = c
                .to_digit(1 << radix_bits)
                .ok_or_else(|| invalid_arg(format!("bad digit {c:?} in {s:?}")))?;
            for b in 0..radix_bits {
                if d >> b & 1 == 1 {
                    let k = pos * radix_bits as usize + b as usize;
                    if k >= dim {
                        return Err(invalid_arg(format!(
                            "{s:?} sets coefficient {k}, beyond {dim} for {n_bits} bits"
                        )));
                    }
                    coefficients[k] = true;
                }
            }
        }
        Ok(Self {
            n_bits,
            coefficients,
        })
    }

    fn encode(&self, radix_bits: usize) -> String {
        let n_digits = self.dimension().div_ceil(radix_bits);
        (0..n_digits)
            .rev()
            .map(|d| {
                let v = (0..radix_bits).fold(0u32, |acc, b| {
                    let k = d * radix_bits + b;
                    acc | ((k < self.dimension() && self.coefficients[k]) as u32) << b
                });
                std::char::from_digit(v, 1 << radix_bits).unwrap()
            })
            .collect()
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", self.encode(4))
    }

    pub fn to_binary(&self) -> String {
        format!("0b{}", self.encode(1))
    }
}

impl fmt::Display for BooleanTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.n_bits, self.to_hex())
    }
}

/// Evaluates `f(x) = ⊕_k a_k ∏_{i∈C_k} x_i`.
pub fn eval_boolean(task: &BooleanTask, x: InputWord) -> Result<bool> {
    if task.n_bits != x.n_bits {
        return Err(invalid_arg(format!(
            "task has {} bits but input has {}",
            task.n_bits, x.n_bits
        )));
    }
    Ok(task.output(x.value))
}

#[derive(Serialize, Deserialize)]
struct TaskRepr {
    n_bits: u32,
    coefficients: String,
}

impl TryFrom<TaskRepr> for BooleanTask {
    type Error = Error;

    fn try_from(r: TaskRepr) -> Result<Self> {
        BooleanTask::parse(r.n_bits, &r.coefficients)
    }
}

impl From<BooleanTask> for TaskRepr {
    fn from(t: BooleanTask) -> Self {
        TaskRepr {
            n_bits: t.n_bits,
            coefficients: t.to_hex(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn word(n: u32, v: usize) -> InputWord {
        InputWord::new(n, v).unwrap()
    }

    // Term-by-term evaluation of the Reed-Muller polynomial: for every k,
    // multiply the input bits x_i for i in C_k.
    fn polynomial_oracle(task: &BooleanTask, x: usize) -> bool {
        let mut acc = 0u8;
        for (k, &a) in task.coefficients().iter().enumerate() {
            let mut term = a as u8;
            for i in 0..task.n_bits() {
                if k >> i & 1 == 1 {
                    term &= (x >> i & 1) as u8;
                }
            }
            acc ^= term;
        }
        acc == 1
    }

    #[test]
    fn table_one_functions() {
        let f1 = BooleanTask::from_bits(1, &[0, 0]).unwrap();
        assert!(!eval_boolean(&f1, word(1, 1)).unwrap());
        let f4 = BooleanTask::from_bits(1, &[1, 1]).unwrap();
        assert!(!eval_boolean(&f4, word(1, 1)).unwrap());
        assert!(eval_boolean(&f4, word(1, 0)).unwrap());
        let f2 = BooleanTask::from_bits(1, &[1, 0]).unwrap();
        assert_eq!(f2.truth_table(), vec![true, true]);
        let f3 = BooleanTask::from_bits(1, &[0, 1]).unwrap();
        assert_eq!(f3.truth_table(), vec![false, true]);
    }

    #[test]
    fn two_bit_and() {
        let and = BooleanTask::from_bits(2, &[0, 0, 0, 1]).unwrap();
        assert_eq!(and.truth_table(), vec![false, false, false, true]);
        assert!(eval_boolean(&and, word(2, 3)).unwrap());
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let t = BooleanTask::constant_zero(2).unwrap();
        assert!(matches!(
            eval_boolean(&t, word(3, 1)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(InputWord::new(2, 4).is_err());
        assert!(BooleanTask::new(2, vec![false; 3]).is_err());
        assert!(BooleanTask::from_bits(1, &[0, 2]).is_err());
    }

    #[test]
    fn active_sets() {
        assert_eq!(active_set(word(2, 0)), vec![0]);
        assert_eq!(active_set(word(2, 2)), vec![0, 2]);
        assert_eq!(active_set(word(3, 5)), vec![0, 1, 4, 5]);
        assert_eq!(active_set(word(3, 7)), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn active_set_sizes_and_parity_balance() {
        for n in 1..=10u32 {
            for x in InputWord::all(n) {
                let set = active_set(x);
                assert_eq!(set.len(), 1 << x.value().count_ones());
                assert!(set.windows(2).all(|w| w[0] < w[1]));
                if x.value() != 0 {
                    assert_eq!(set.len() % 2, 0);
                    let even = set.iter().filter(|k| k.count_ones() % 2 == 0).count();
                    assert_eq!(2 * even, set.len());
                }
            }
        }
    }

    #[test]
    fn encodings() {
        let and = BooleanTask::from_bits(2, &[0, 0, 0, 1]).unwrap();
        assert_eq!(and.to_hex(), "0x8");
        assert_eq!(and.to_binary(), "0b1000");
        assert_eq!(BooleanTask::parse(2, "0b1000").unwrap(), and);
        assert_eq!(BooleanTask::parse(2, "0x8").unwrap(), and);
        assert!(BooleanTask::parse(2, "0x10").is_err());
        assert!(BooleanTask::parse(2, "8").is_err());
        assert!(BooleanTask::parse(2, "0xg").is_err());
        let json = serde_json::to_string(&and).unwrap();
        assert_eq!(json, r#"{"n_bits":2,"coefficients":"0x8"}"#);
        let back: BooleanTask = serde_json::from_str(&json).unwrap();
        assert_eq!(back, and);
    }

    proptest! {
        #[test]
        fn eval_matches_polynomial(n in 1u32..=4, seed in any::<u64>()) {
            let dim = dimension(n);
            let bits: Vec<bool> = (0..dim).map(|k| (seed >> (k % 64)) & 1 == 1).collect();
            let task = BooleanTask::new(n, bits).unwrap();
            for x in InputWord::all(n) {
                prop_assert_eq!(eval_boolean(&task, x).unwrap(), polynomial_oracle(&task, x.value()));
            }
        }

        #[test]
        fn zero_task_is_zero(n in 1u32..=8) {
            let t = BooleanTask::constant_zero(n).unwrap();
            prop_assert!(t.truth_table().iter().all(|&b| !b));
        }

        #[test]
        fn string_roundtrip(n in 1u32..=7, seed in any::<u128>()) {
            let dim = dimension(n);
            let bits: Vec<bool> = (0..dim).map(|k| (seed >> (k % 128)) & 1 == 1).collect();
            let task = BooleanTask::new(n, bits).unwrap();
            prop_assert_eq!(BooleanTask::parse(n, &task.to_hex()).unwrap(), task.clone());
            prop_assert_eq!(BooleanTask::parse(n, &task.to_binary()).unwrap(), task);
        }
    }
}
