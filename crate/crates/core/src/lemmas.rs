//! Exhaustive string-sum identities, computed in exact rational arithmetic.

use num_rational::Ratio;

use crate::bitstring::{guard_exhaustive, BitString};
use crate::error::{LabError, Result};

pub type Rational = Ratio<i64>;

/// `(1/2ⁿ) Σ_s s·t` by enumeration over all `s`. Equals `|t|/2`.
pub fn stringsum_avg_dot(t: &BitString, threshold: usize) -> Result<Rational> {
    let n = t.len();
    guard_exhaustive(n, threshold)?;
    let mut total = 0i64;
    for s in BitString::all(n)? {
        total += i64::from(s.dot(t)?);
    }
    Ok(Rational::new(total, 1i64 << n))
}

/// `(1/2^{2n}) Σ_{s,t} s·t` by enumeration. Equals `n/4`.
pub fn stringsum_double_avg(n: usize, threshold: usize) -> Result<Rational> {
    guard_exhaustive(n, threshold)?;
    let mut total = 0i64;
    for s in BitString::all(n)? {
        for t in BitString::all(n)? {
            total += i64::from(s.dot(&t)?);
        }
    }
    Ok(Rational::new(total, 1i64 << (2 * n)))
}

/// `(1/2ⁿ) Σ_s (−1)^{s·t}` by enumeration. Equals `δ_{t,0}`.
pub fn stringsum_parity(t: &BitString, threshold: usize) -> Result<Rational> {
    let n = t.len();
    guard_exhaustive(n, threshold)?;
    let mut total = 0i64;
    for s in BitString::all(n)? {
        total += if s.dot_mod2(t)? == 0 { 1 } else { -1 };
    }
    Ok(Rational::new(total, 1i64 << n))
}

fn r_decomposition_sides(s: &BitString, u: &BitString) -> Result<(u8, u8)> {
    let x = s.xor(u)?;
    let lhs = x.swap_halves()?.dot_mod2(s)? ^ x.half_a()?.swap_halves()?.dot_mod2(&x.half_b()?)?;
    let rhs = s.half_b()?.swap_halves()?.dot_mod2(&s.half_a()?)? ^ u.half_a()?.swap_halves()?.dot_mod2(&u.half_b()?)?;
    Ok((lhs, rhs))
}

/// Checks, for every pair `(s, u)` of `n`-bit strings,
/// `(R(s⊕u)·s) ⊕ (R(s⊕u)_a·(s⊕u)_b) = (Rs_b·s_a) ⊕ (Ru_a·u_b)`, where
/// `Rx_a` means `R` applied to `x_a`.
pub fn check_r_decomposition(n: usize, threshold: usize) -> Result<bool> {
    if !n.is_multiple_of(2) {
        return Err(LabError::OddLength(n));
    }
    guard_exhaustive(n, threshold)?;
    for s in BitString::all(n)? {
        for u in BitString::all(n)? {
            let (lhs, rhs) = r_decomposition_sides(&s, &u)?;
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
