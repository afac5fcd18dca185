//! Fixed-length bit strings with 1-based positions.
//!
//! Position 1 is the most significant bit of the packed integer, so
//! [`BitString::value`] is also the computational-basis index of `|x⟩` when
//! position `k` labels qubit `k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Longest string the packed representation supports.
pub const MAX_LEN: usize = 63;

/// Default cap on `n` for the exhaustive enumerations (about 10⁶ pairs).
pub const DEFAULT_EXHAUSTIVE_THRESHOLD: usize = 10;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: u64,
    len: usize,
}

impl BitString {
    /// The all-zero string of length `len`.
    pub fn zeros(len: usize) -> Result<Self> {
        check_len(len)?;
        Ok(Self { bits: 0, len })
    }

    /// Builds the string whose packed value (position 1 most significant) is `value`.
    pub fn from_value(value: u64, len: usize) -> Result<Self> {
        check_len(len)?;
        if value >> len != 0 {
            return Err(LabError::InvalidArgument(format!("value {value} does not fit in {len} bits")));
        }
        Ok(Self { bits: value, len })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_len(bits.len())?;
        let mut out = Self { bits: 0, len: bits.len() };
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => out.bits |= out.mask(i + 1),
                _ => return Err(LabError::InvalidArgument(format!("bit value {b} is not 0 or 1"))),
            }
        }
        Ok(out)
    }

    /// `1_k`: one in position `k`, zero elsewhere.
    pub fn unit(k: usize, len: usize) -> Result<Self> {
        let mut out = Self::zeros(len)?;
        out.set(k, true)?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self) -> u64 {
        self.bits
    }

    #[inline]
    fn mask(&self, k: usize) -> u64 {
        1u64 << (self.len - k)
    }

    /// Bit at 1-based position `k`.
    pub fn get(&self, k: usize) -> Result<bool> {
        if k == 0 || k > self.len {
            return Err(LabError::IndexOutOfRange { index: k, len: self.len });
        }
        Ok(self.bits & self.mask(k) != 0)
    }

    /// Unchecked variant of [`get`](Self::get) for hot loops; `k` must be in range.
    #[inline]
    pub fn bit(&self, k: usize) -> bool {
        debug_assert!(k >= 1 && k <= self.len);
        self.bits & self.mask(k) != 0
    }

    pub fn set(&mut self, k: usize, on: bool) -> Result<()> {
        if k == 0 || k > self.len {
            return Err(LabError::IndexOutOfRange { index: k, len: self.len });
        }
        if on {
            self.bits |= self.mask(k);
        } else {
            self.bits &= !self.mask(k);
        }
        Ok(())
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (1..=self.len).map(|k| self.bit(k) as u8).collect()
    }

    /// Hamming weight `|x|`.
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    fn require_even(&self) -> Result<usize> {
        if !self.len.is_multiple_of(2) {
            return Err(LabError::OddLength(self.len));
        }
        Ok(self.len / 2)
    }

    /// `x_a`: the first half of `x`, zero elsewhere.
    pub fn half_a(&self) -> Result<Self> {
        let half = self.require_even()?;
        let high = ((1u64 << half) - 1) << half;
        Ok(Self { bits: self.bits & high, len: self.len })
    }

    /// `x_b`: the second half of `x`, zero elsewhere.
    pub fn half_b(&self) -> Result<Self> {
        let half = self.require_even()?;
        Ok(Self { bits: self.bits & ((1u64 << half) - 1), len: self.len })
    }

    /// `Rx`: exchanges the two halves.
    pub fn swap_halves(&self) -> Result<Self> {
        let half = self.require_even()?;
        let low = (1u64 << half) - 1;
        let bits = ((self.bits & low) << half) | (self.bits >> half);
        Ok(Self { bits, len: self.len })
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        self.same_len(other)?;
        Ok(Self { bits: self.bits ^ other.bits, len: self.len })
    }

    /// Integer dot product `Σ_k x_k y_k`.
    pub fn dot(&self, other: &Self) -> Result<u32> {
        self.same_len(other)?;
        Ok((self.bits & other.bits).count_ones())
    }

    /// Dot product reduced mod 2.
    pub fn dot_mod2(&self, other: &Self) -> Result<u8> {
        Ok((self.dot(other)? & 1) as u8)
    }

    fn same_len(&self, other: &Self) -> Result<()> {
        if self.len != other.len {
            return Err(LabError::LengthMismatch { expected: self.len, found: other.len });
        }
        Ok(())
    }

    /// All `2^len` strings in increasing packed order.
    pub fn all(len: usize) -> Result<impl Iterator<Item = BitString> + Clone> {
        check_len(len)?;
        Ok((0..1u64 << len).map(move |bits| BitString { bits, len }))
    }
}

fn check_len(len: usize) -> Result<()> {
    if len > MAX_LEN {
        return Err(LabError::InvalidArgument(format!("bit strings longer than {MAX_LEN} are not supported")));
    }
    Ok(())
}

/// Rejects `n` above `threshold` before an exhaustive enumeration.
pub fn guard_exhaustive(n: usize, threshold: usize) -> Result<()> {
    if n > threshold {
        return Err(LabError::ThresholdExceeded { n, threshold });
    }
    Ok(())
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 1..=self.len {
            f.write_str(if self.bit(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(LabError::Parse(format!("'{c}' is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()?;
        BitString::from_bits(&bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
