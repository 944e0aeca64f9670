//! Maximal-length PN sequence generation.
//!
//! Registers follow the Fibonacci convention: stage 1 receives the XOR of the
//! tapped stages and the output chip is read from the highest-index stage.
//! Bits map to bipolar chips as `1 -> +1`, `0 -> -1`.
//!
//! Two generators are provided. [`generate_msequence`] clocks the register
//! one state per chip. [`generate_leapforward`] emits several chips per clock
//! from a precomputed GF(2) transition, the way an FPGA feeding a
//! time-interleaved DAC produces a chip stream faster than its fabric clock.
//! Both produce the same sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SounderError};
use crate::scalar::Real;

/// Register length, feedback taps and initial fill of an LFSR.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LfsrSpec {
    order: u32,
    taps: Vec<u32>,
    seed: u64,
}

impl LfsrSpec {
    pub const MAX_ORDER: u32 = 32;

    /// `taps` are 1-indexed stage numbers; `seed` holds stage `i` in bit `i - 1`.
    pub fn new(order: u32, taps: &[u32], seed: u64) -> Result<Self> {
        if !(2..=Self::MAX_ORDER).contains(&order) {
            return Err(SounderError::InvalidLfsr(format!(
                "order {order} outside 2..={}",
                Self::MAX_ORDER
            )));
        }
        let mut taps = taps.to_vec();
        taps.sort_unstable();
        taps.dedup();
        if let Some(&t) = taps.iter().find(|&&t| t == 0 || t > order) {
            return Err(SounderError::InvalidLfsr(format!("tap {t} outside 1..={order}")));
        }
        if !taps.contains(&order) {
            return Err(SounderError::InvalidLfsr(format!(
                "taps must include the last stage {order}"
            )));
        }
        let mask = state_mask(order);
        if seed & mask == 0 || seed & !mask != 0 {
            return Err(SounderError::InvalidLfsr(format!(
                "seed {seed:#x} must be a non-zero {order}-bit value"
            )));
        }
        Ok(Self { order, taps, seed })
    }

    pub fn with_ones_seed(order: u32, taps: &[u32]) -> Result<Self> {
        Self::new(order, taps, state_mask(order.min(Self::MAX_ORDER)))
    }

    /// 11-stage register with taps 11 and 9, all-ones fill (2047 chips).
    pub fn prbs11() -> Self {
        Self::with_ones_seed(11, &[11, 9]).expect("valid preset")
    }

    /// 7-stage register with taps 7 and 6 (127 chips), used by desk-scale runs.
    pub fn prbs7() -> Self {
        Self::with_ones_seed(7, &[7, 6]).expect("valid preset")
    }

    /// 3-stage register with taps 3 and 2 (7 chips).
    pub fn prbs3() -> Self {
        Self::with_ones_seed(3, &[3, 2]).expect("valid preset")
    }

    pub fn presets() -> [Self; 3] {
        [Self::prbs3(), Self::prbs7(), Self::prbs11()]
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn taps(&self) -> &[u32] {
        &self.taps
    }

    pub fn seed(&self) -> LfsrState {
        LfsrState(self.seed)
    }

    /// `2^order - 1`.
    pub fn maximal_period(&self) -> u64 {
        (1u64 << self.order) - 1
    }

    fn tap_mask(&self) -> u64 {
        self.taps.iter().fold(0, |m, &t| m | 1 << (t - 1))
    }
}

fn state_mask(order: u32) -> u64 {
    (1u64 << order) - 1
}

/// Register contents; stage `i` lives in bit `i - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LfsrState(pub u64);

impl LfsrState {
    pub fn bit(self, stage: u32) -> u8 {
        ((self.0 >> (stage - 1)) & 1) as u8
    }
}

#[inline]
fn parity(x: u64) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Clocks the register once. Returns the output bit (highest stage, read
/// before the shift) and the next state.
pub fn lfsr_step(state: LfsrState, spec: &LfsrSpec) -> Result<(u8, LfsrState)> {
    let mask = state_mask(spec.order);
    if state.0 & mask == 0 {
        return Err(SounderError::DegenerateState);
    }
    let s = state.0 & mask;
    let out = ((s >> (spec.order - 1)) & 1) as u8;
    let fb = parity(s & spec.tap_mask()) as u64;
    Ok((out, LfsrState(((s << 1) | fb) & mask)))
}

/// One period of a bipolar PN code together with the register that made it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChipSequence {
    chips: Vec<i8>,
    spec: LfsrSpec,
}

impl ChipSequence {
    pub fn from_bits(bits: &[u8], spec: LfsrSpec) -> Self {
        let chips = bits.iter().map(|&b| if b != 0 { 1 } else { -1 }).collect();
        Self { chips, spec }
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

    pub fn spec(&self) -> &LfsrSpec {
        &self.spec
    }

    pub fn bits(&self) -> Vec<u8> {
        self.chips.iter().map(|&c| u8::from(c > 0)).collect()
    }

    pub fn count_plus(&self) -> usize {
        self.chips.iter().filter(|&&c| c > 0).count()
    }

    /// Chip `k` as a scalar, indexed cyclically.
    #[inline]
    pub fn chip<T: Real>(&self, k: usize) -> T {
        if self.chips[k % self.chips.len()] > 0 {
            T::one()
        } else {
            -T::one()
        }
    }
}

/// Serially clocks one full period of the register.
///
/// Fails with [`SounderError::NonPrimitive`] if the register revisits its seed
/// before `2^order - 1` steps.
pub fn generate_msequence(spec: &LfsrSpec) -> Result<ChipSequence> {
    let n = spec.maximal_period();
    let seed = spec.seed();
    let mut state = seed;
    let mut bits = Vec::with_capacity(n as usize);
    for step in 1..=n {
        let (bit, next) = lfsr_step(state, spec)?;
        bits.push(bit);
        state = next;
        if state == seed && step < n {
            return Err(SounderError::NonPrimitive {
                order: spec.order,
                taps: spec.taps.clone(),
                period: step,
                expected: n,
            });
        }
    }
    if state != seed {
        // never returned: can only happen with a non-invertible feedback,
        // which the "tap order always included" rule rules out.
        return Err(SounderError::NonPrimitive {
            order: spec.order,
            taps: spec.taps.clone(),
            period: 0,
            expected: n,
        });
    }
    Ok(ChipSequence::from_bits(&bits, spec.clone()))
}

/// GF(2) square matrix; `rows[r]` is the mask of input bits feeding output bit `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Gf2Matrix {
    rows: Vec<u64>,
}

impl Gf2Matrix {
    fn identity(n: u32) -> Self {
        Self {
            rows: (0..n).map(|r| 1u64 << r).collect(),
        }
    }

    /// Single-step transition of a Fibonacci LFSR.
    fn lfsr_transition(spec: &LfsrSpec) -> Self {
        let mut rows = Vec::with_capacity(spec.order as usize);
        rows.push(spec.tap_mask());
        for r in 1..spec.order {
            rows.push(1u64 << (r - 1));
        }
        Self { rows }
    }

    /// `self * other`: apply `other` first, then `self`.
    fn mul(&self, other: &Self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|&row| {
                let mut acc = 0u64;
                let mut bits = row;
                while bits != 0 {
                    let k = bits.trailing_zeros() as usize;
                    acc ^= other.rows[k];
                    bits &= bits - 1;
                }
                acc
            })
            .collect();
        Self { rows }
    }

    fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::identity(self.rows.len() as u32);
        while e > 0 {
            if e & 1 == 1 {
                acc = base.mul(&acc);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    fn apply(&self, v: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (r, &row)| acc | (parity(row & v) as u64) << r)
    }
}

/// Leap-forward generation: each clock yields `chips_per_cycle` chips computed
/// directly from the current state, then the state jumps ahead by the same
/// number of steps.
pub fn generate_leapforward(spec: &LfsrSpec, chips_per_cycle: usize) -> Result<ChipSequence> {
    if chips_per_cycle == 0 {
        return Err(SounderError::InvalidParameter(
            "chips_per_cycle must be at least 1".into(),
        ));
    }
    let step = Gf2Matrix::lfsr_transition(spec);
    let out_stage = (spec.order - 1) as usize;

    // Output taps for each position inside a cycle: row `order` of step^j.
    let mut output_rows = Vec::with_capacity(chips_per_cycle);
    let mut power = Gf2Matrix::identity(spec.order);
    for _ in 0..chips_per_cycle {
        output_rows.push(power.rows[out_stage]);
        power = step.mul(&power);
    }
    let leap = step.pow(chips_per_cycle as u64);

    let n = spec.maximal_period() as usize;
    let mut bits = Vec::with_capacity(n);
    let mut state = spec.seed().0;
    while bits.len() < n {
        for &row in output_rows.iter().take(n - bits.len()) {
            bits.push(parity(row & state));
        }
        state = leap.apply(state);
    }
    Ok(ChipSequence::from_bits(&bits, spec.clone()))
}

/// `sum_k c[k] * c[(k + lag) mod N]`; `lag` is taken modulo the length.
pub fn periodic_autocorrelation<T: Real>(seq: &ChipSequence, lag: usize) -> T {
    let n = seq.len();
    let c = seq.chips();
    let sum: i64 = (0..n).map(|k| (c[k] as i64) * (c[(k + lag) % n] as i64)).sum();
    T::from_i64(sum).expect("correlation fits scalar")
}
