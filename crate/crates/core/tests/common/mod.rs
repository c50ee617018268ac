//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

/// Exact rational value of a finite double.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite weight")
}

/// `∏ ws` as an exact rational.
pub fn rational_product(ws: &[f64]) -> BigRational {
    ws.iter().fold(BigRational::one(), |acc, w| acc * rational(*w))
}

/// `ln |n|` for a nonzero big integer, from its leading 64 bits.
fn ln_big(n: &BigInt) -> f64 {
    let n = n.abs();
    let bits = n.bits();
    let shift = bits.saturating_sub(64);
    let top: BigInt = &n >> shift;
    top.to_f64().expect("fits").ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln r` for a positive rational.
pub fn ln_rational(r: &BigRational) -> f64 {
    ln_big(r.numer()) - ln_big(r.denom())
}

/// `T^n M ⊆ M` for a forward shift by one and `M` = residues `R` mod `p`,
/// decided by walking one period.
pub fn residue_invariance_oracle(p: u64, residues: &BTreeSet<u64>, n: u64) -> bool {
    (0..p).filter(|r| residues.contains(r)).all(|r| residues.contains(&((r + n) % p)))
}

/// Weight at `j ≥ 0` of the block sequence with block `k` of length `4^k`
/// taking value `values[(k + phase) % 2]`.
pub fn block_weight(j: u64, values: [f64; 2], phase: usize) -> f64 {
    let mut start = 0u64;
    let mut len = 1u64;
    let mut k = 0usize;
    while j >= start + len {
        start += len;
        len *= 4;
        k += 1;
    }
    values[(k + phase) % 2]
}

/// Log base 2 of a power-of-two double.
pub fn log2_exact(x: f64) -> i64 {
    let l = x.log2();
    assert_eq!(l, l.round(), "{x} is not a power of two");
    l as i64
}
