//! Positive weight sequences `{w_n}` indexed by ℤ.
//!
//! Each generator can report the runs of equal weights covering an index
//! range, which is what lets products over millions of weights be formed in
//! `O(runs)` rather than `O(length)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logdomain::CompensatedSum;
use crate::space::{binary_exponent, pow2};

/// Block lengths `base^k`, `k = 0, 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthRule {
    base: u64,
}

impl LengthRule {
    pub fn power(base: u64) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidWeights(format!("block length base must be at least 2, got {base}")));
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// First index of block `k`: `(base^k − 1)/(base − 1)`, saturating.
    pub fn block_start(&self, k: u32) -> u128 {
        let b = self.base as u128;
        match b.checked_pow(k) {
            Some(p) => (p - 1) / (b - 1),
            None => u128::MAX,
        }
    }

    /// Block containing the nonnegative index `i`, with its `[start, end)`.
    fn locate(&self, i: u128) -> (u32, u128, u128) {
        let mut k = 0u32;
        loop {
            let start = self.block_start(k);
            let end = self.block_start(k + 1);
            if i < end || end == u128::MAX {
                return (k, start, end);
            }
            k += 1;
        }
    }
}

impl fmt::Display for LengthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^k", self.base)
    }
}

impl Serialize for LengthRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LengthRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let base = s
            .strip_suffix("^k")
            .and_then(|b| b.trim().parse::<u64>().ok())
            .ok_or_else(|| serde::de::Error::custom(format!("length rule must look like \"4^k\", got {s:?}")))?;
        LengthRule::power(base).map_err(serde::de::Error::custom)
    }
}

/// How a block sequence is continued to negative indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeRule {
    /// `w_{−1−i} = 1 / w_i`
    #[default]
    ReciprocalMirror,
    /// `w_{−1−i} = w_i`
    Mirror,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSequence {
    Constant {
        c: f64,
    },
    /// `pos` for `i ≥ 0`, `neg` for `i < 0`.
    Piecewise {
        pos: f64,
        neg: f64,
    },
    /// Nonnegative indices are cut into consecutive blocks of lengths
    /// `base^k`; block `k` carries `values[(k + phase) mod len]`.
    Blocks {
        length_rule: LengthRule,
        values: Vec<f64>,
        #[serde(default)]
        phase: usize,
        #[serde(default)]
        negative: NegativeRule,
    },
    /// `window[i − start]` inside the window, `default` elsewhere.
    Table {
        window: Vec<f64>,
        default: f64,
        #[serde(default)]
        start: i64,
    },
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWeights(format!("weights must be finite and positive, got {w}")))
    }
}

impl WeightSequence {
    pub fn constant(c: f64) -> Result<Self> {
        let s = WeightSequence::Constant { c };
        s.validate()?;
        Ok(s)
    }

    pub fn piecewise(pos: f64, neg: f64) -> Result<Self> {
        let s = WeightSequence::Piecewise { pos, neg };
        s.validate()?;
        Ok(s)
    }

    pub fn blocks(base: u64, values: Vec<f64>, phase: usize, negative: NegativeRule) -> Result<Self> {
        let s = WeightSequence::Blocks { length_rule: LengthRule::power(base)?, values, phase, negative };
        s.validate()?;
        Ok(s)
    }

    pub fn table(start: i64, window: Vec<f64>, default: f64) -> Result<Self> {
        let s = WeightSequence::Table { window, default, start };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSequence::Constant { c } => check_weight(*c),
            WeightSequence::Piecewise { pos, neg } => check_weight(*pos).and(check_weight(*neg)),
            WeightSequence::Blocks { values, .. } => {
                if values.is_empty() {
                    return Err(Error::InvalidWeights("block values must be nonempty".into()));
                }
                values.iter().try_for_each(|v| check_weight(*v))
            }
            WeightSequence::Table { window, default, start } => {
                if start.checked_add(window.len() as i64).is_none() {
                    return Err(Error::InvalidWeights("table window overflows the index range".into()));
                }
                check_weight(*default)?;
                window.iter().try_for_each(|v| check_weight(*v))
            }
        }
    }

    fn block_value(&self, k: u32) -> f64 {
        match self {
            WeightSequence::Blocks { values, phase, .. } => values[(k as usize + phase) % values.len()],
            _ => unreachable!(),
        }
    }

    /// `w_i`
    pub fn weight(&self, i: i64) -> f64 {
        match self {
            WeightSequence::Constant { c } => *c,
            WeightSequence::Piecewise { pos, neg } => {
                if i >= 0 {
                    *pos
                } else {
                    *neg
                }
            }
            WeightSequence::Blocks { length_rule, negative, .. } => {
                if i >= 0 {
                    self.block_value(length_rule.locate(i as u128).0)
                } else {
                    let mirrored = self.block_value(length_rule.locate((-1 - i) as u128).0);
                    match negative {
                        NegativeRule::ReciprocalMirror => 1.0 / mirrored,
                        NegativeRule::Mirror => mirrored,
                    }
                }
            }
            WeightSequence::Table { window, default, start } => {
                let offset = i as i128 - *start as i128;
                if offset >= 0 && (offset as usize) < window.len() {
                    window[offset as usize]
                } else {
                    *default
                }
            }
        }
    }

    /// Calls `f(value, count)` for runs of equal weights that together cover
    /// `w_start, …, w_{start+len−1}` (in no particular order). Reciprocal
    /// runs are reported as `(value, count, reciprocal = true)`.
    fn for_each_run(&self, start: i64, len: u64, mut f: impl FnMut(f64, u64, bool)) {
        if len == 0 {
            return;
        }
        let lo = start as i128;
        let hi = lo + len as i128; // exclusive
        match self {
            WeightSequence::Constant { c } => f(*c, len, false),
            WeightSequence::Piecewise { pos, neg } => {
                let neg_count = (hi.min(0) - lo).max(0) as u64;
                let pos_count = len - neg_count;
                if neg_count > 0 {
                    f(*neg, neg_count, false);
                }
                if pos_count > 0 {
                    f(*pos, pos_count, false);
                }
            }
            WeightSequence::Blocks { length_rule, negative, .. } => {
                let nonneg_runs = |a: u128, b: u128, reciprocal: bool, f: &mut dyn FnMut(f64, u64, bool)| {
                    // Runs over [a, b) on the nonnegative half.
                    let mut i = a;
                    while i < b {
                        let (k, _, end) = length_rule.locate(i);
                        let stop = end.min(b);
                        f(self.block_value(k), (stop - i) as u64, reciprocal);
                        i = stop;
                    }
                };
                if hi > 0 {
                    nonneg_runs(lo.max(0) as u128, hi as u128, false, &mut f);
                }
                if lo < 0 {
                    // Indices i ∈ [lo, min(hi, 0)) mirror to −1−i ∈ [−min(hi,0), −lo).
                    let a = (-(hi.min(0))) as u128;
                    let b = (-lo) as u128;
                    nonneg_runs(a, b, *negative == NegativeRule::ReciprocalMirror, &mut f);
                }
            }
            WeightSequence::Table { window, default, start: wstart } => {
                let ws = *wstart as i128;
                let we = ws + window.len() as i128;
                let inner_lo = lo.max(ws);
                let inner_hi = hi.min(we);
                let inside = (inner_hi - inner_lo).max(0);
                for off in 0..inside {
                    f(window[(inner_lo - ws + off) as usize], 1, false);
                }
                let outside = len as i128 - inside;
                if outside > 0 {
                    f(*default, outside as u64, false);
                }
            }
        }
    }

    /// `ln ∏_{j=start}^{start+len−1} w_j`, compensated.
    pub fn log_product(&self, start: i64, len: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        self.for_each_run(start, len, |value, count, reciprocal| {
            let term = count as f64 * value.ln();
            acc.add(if reciprocal { -term } else { term });
        });
        acc.value()
    }

    /// `∏_{j=start}^{start+len−1} w_j` as a scaled float. Exact whenever the
    /// weights are powers of two.
    pub fn product(&self, start: i64, len: u64) -> ScaledFloat {
        let mut acc = ScaledFloat::ONE;
        self.for_each_run(start, len, |value, count, reciprocal| {
            let base = if reciprocal { ScaledFloat::from_f64(value).recip() } else { ScaledFloat::from_f64(value) };
            acc = acc.mul(base.powu(count));
        });
        acc
    }

    /// `sup_n w_n`
    pub fn sup(&self) -> f64 {
        self.extremes().1
    }

    /// `inf_n w_n`
    pub fn inf(&self) -> f64 {
        self.extremes().0
    }

    fn extremes(&self) -> (f64, f64) {
        let fold = |vals: &mut dyn Iterator<Item = f64>| {
            vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        match self {
            WeightSequence::Constant { c } => (*c, *c),
            WeightSequence::Piecewise { pos, neg } => (pos.min(*neg), pos.max(*neg)),
            WeightSequence::Blocks { values, negative, .. } => match negative {
                NegativeRule::Mirror => fold(&mut values.iter().copied()),
                NegativeRule::ReciprocalMirror => fold(&mut values.iter().flat_map(|v| [*v, 1.0 / v])),
            },
            WeightSequence::Table { window, default, .. } => {
                fold(&mut window.iter().copied().chain(std::iter::once(*default)))
            }
        }
    }
}

/// A float carried as `mantissa · 2^exponent` so that long products neither
/// overflow nor underflow. Multiplication by the power-of-two scale is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledFloat {
    mantissa: f64,
    exponent: i64,
}

impl ScaledFloat {
    pub const ONE: ScaledFloat = ScaledFloat { mantissa: 1.0, exponent: 0 };

    pub fn from_f64(x: f64) -> Self {
        ScaledFloat { mantissa: x, exponent: 0 }.normalized()
    }

    /// `mantissa · 2^exponent`
    pub fn new(mantissa: f64, exponent: i64) -> Self {
        ScaledFloat { mantissa, exponent }.normalized()
    }

    /// The same value with `|mantissa| ∈ [1, 2)` (or zero).
    fn canonical(self) -> (f64, i64) {
        if self.mantissa == 0.0 || !self.mantissa.is_finite() {
            return (self.mantissa, 0);
        }
        let e = binary_exponent(self.mantissa) as i64;
        (self.mantissa * pow2(-e), self.exponent + e)
    }

    fn normalized(self) -> Self {
        let m = self.mantissa;
        if m == 0.0 || !m.is_finite() {
            return self;
        }
        let a = m.abs();
        if (2f64.powi(-256)..=2f64.powi(256)).contains(&a) {
            return self;
        }
        let e = a.log2().floor() as i64;
        ScaledFloat { mantissa: m * pow2(-e), exponent: self.exponent + e }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Self) -> Self {
        ScaledFloat { mantissa: self.mantissa * other.mantissa, exponent: self.exponent + other.exponent }.normalized()
    }

    pub fn recip(self) -> Self {
        ScaledFloat { mantissa: 1.0 / self.mantissa, exponent: -self.exponent }.normalized()
    }

    pub fn powu(self, mut n: u64) -> Self {
        let mut base = self;
        let mut acc = ScaledFloat::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            n >>= 1;
        }
        acc
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    /// `mantissa · 2^exponent`, saturating to 0 or ±∞.
    pub fn to_f64(self) -> f64 {
        // Two steps so that a subnormal result is rounded only once.
        let half = self.exponent / 2;
        self.mantissa * pow2(half) * pow2(self.exponent - half)
    }

    pub fn ln(self) -> f64 {
        let (m, e) = self.canonical();
        m.ln() + e as f64 * std::f64::consts::LN_2
    }
}

impl PartialOrd for ScaledFloat {
    /// Exact comparison of nonnegative values.
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        let (a, b) = (self.canonical(), other.canonical());
        match (a.0 == 0.0, b.0 == 0.0) {
            (true, true) => Some(std::cmp::Ordering::Equal),
            (true, false) => Some(std::cmp::Ordering::Less),
            (false, true) => Some(std::cmp::Ordering::Greater),
            _ => Some(a.1.cmp(&b.1).then(a.0.partial_cmp(&b.0)?)),
        }
    }
}
