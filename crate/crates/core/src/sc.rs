//! Successive cancellation decoding over the polar factor graph.
//!
//! The decoder accumulates the LLR path metric
//! `M = sum over frozen i of min(0, (1 - 2 u_i) y_i)` at layer 0. After each
//! half of every node the metric accumulated over all bits decoded so far is
//! compared with a caller-supplied threshold and the run aborts below it.
//! For the min-sum kernel this frozen-side metric equals
//! [`codeword_metric`] of the decoded codeword.

use std::ops::AddAssign;

use crate::error::{Error, Result};
use crate::rmcodes::CodeSpec;

/// Metric reported for aborted decodes. Compares below every finite metric.
pub const ABORTED_METRIC: f64 = f64::NEG_INFINITY;

/// Exact check-node kernel `ln((e^(x+y) + 1) / (e^x + e^y))`.
///
/// Evaluated as `sign(x) sign(y) min(|x|,|y|) + ln(1+e^-|x+y|) - ln(1+e^-|x-y|)`,
/// which does not overflow for any finite input.
pub fn f_minus_exact(x: f64, y: f64) -> f64 {
    f_minus_minsum(x, y) + (-(x + y).abs()).exp().ln_1p() - (-(x - y).abs()).exp().ln_1p()
}

/// Min-sum check-node kernel `sign(x) sign(y) min(|x|, |y|)` with
/// `sign(0) = +1`.
#[inline]
pub fn f_minus_minsum(x: f64, y: f64) -> f64 {
    let mag = x.abs().min(y.abs());
    if (x < 0.0) != (y < 0.0) {
        -mag
    } else {
        mag
    }
}

/// Variable-node kernel `(1 - 2u) x + y`.
#[inline]
pub fn f_plus(x: f64, y: f64, u: u8) -> f64 {
    if u == 0 {
        y + x
    } else {
        y - x
    }
}

/// Check-node kernel used by a decoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Kernel {
    /// Min-sum approximation. The path metric identity relies on it.
    #[default]
    MinSum,
    /// Exact log-domain kernel. The frozen-side metric is then no longer
    /// guaranteed to equal the codeword-side metric.
    Exact,
}

impl Kernel {
    #[inline]
    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::MinSum => f_minus_minsum(x, y),
            Kernel::Exact => f_minus_exact(x, y),
        }
    }
}

/// Kernel invocation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub f_plus: u64,
    pub f_minus: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.f_plus + self.f_minus
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.f_plus += rhs.f_plus;
        self.f_minus += rhs.f_minus;
    }
}

/// Result of one SC decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    /// Decoded codeword `u^m`. Unspecified when `aborted`.
    pub codeword: Vec<u8>,
    /// Decoded layer-0 bits `u^0`. Unspecified when `aborted`.
    pub layer0: Vec<u8>,
    /// Path metric, or [`ABORTED_METRIC`].
    pub metric: f64,
    pub ops: OpCounts,
    pub aborted: bool,
}

/// `sum_i min(0, (1 - 2 c_i) y_i)`.
pub fn codeword_metric(codeword: &[u8], llrs: &[f64]) -> Result<f64> {
    if codeword.len() != llrs.len() {
        return Err(Error::arg(format!(
            "codeword length {} does not match {} LLRs",
            codeword.len(),
            llrs.len()
        )));
    }
    Ok(codeword
        .iter()
        .zip(llrs)
        .map(|(&c, &y)| if c == 0 { y.min(0.0) } else { (-y).min(0.0) })
        .sum())
}

pub(crate) fn check_llrs(llrs: &[f64], n: usize) -> Result<()> {
    if llrs.len() != n {
        return Err(Error::arg(format!("expected {n} LLRs, got {}", llrs.len())));
    }
    if let Some(i) = llrs.iter().position(|y| !y.is_finite()) {
        return Err(Error::arg(format!("LLR {i} is not finite")));
    }
    Ok(())
}

/// Reusable SC decoder with per-layer scratch buffers.
///
/// Layer `l` occupies `[2^l, 2^(l+1))` of the LLR and bit buffers, so the
/// channel sits at `[n, 2n)` and the leaf at index 1.
#[derive(Debug, Clone)]
pub struct ScDecoder {
    m: u32,
    frozen: Vec<bool>,
    kernel: Kernel,
    llr: Vec<f64>,
    bits: Vec<u8>,
    layer0: Vec<u8>,
    leaf_metric: Vec<f64>,
    running: f64,
    ops: OpCounts,
}

impl ScDecoder {
    pub fn new(spec: &CodeSpec) -> Self {
        Self::with_kernel(spec, Kernel::MinSum)
    }

    pub fn with_kernel(spec: &CodeSpec, kernel: Kernel) -> Self {
        let n = spec.n();
        Self {
            m: spec.m(),
            frozen: spec.frozen_mask().to_vec(),
            kernel,
            llr: vec![0.0; 2 * n],
            bits: vec![0; 2 * n],
            layer0: vec![0; n],
            leaf_metric: vec![0.0; n],
            running: 0.0,
            ops: OpCounts::default(),
        }
    }

    pub fn n(&self) -> usize {
        1 << self.m
    }

    /// Decodes and returns the metric, or `None` if the run aborted because a
    /// partial metric fell below `threshold`. Results stay in the scratch
    /// buffers until the next call.
    pub fn run(&mut self, llrs: &[f64], threshold: f64) -> Result<Option<f64>> {
        check_llrs(llrs, self.n())?;
        if threshold.is_nan() || threshold > 0.0 {
            return Err(Error::arg(format!(
                "metric threshold must lie in [-inf, 0], got {threshold}"
            )));
        }
        Ok(self.run_unchecked(llrs, threshold))
    }

    pub(crate) fn run_unchecked(&mut self, llrs: &[f64], threshold: f64) -> Option<f64> {
        let n = self.n();
        self.ops = OpCounts::default();
        self.running = 0.0;
        self.llr[n..].copy_from_slice(llrs);
        let metric = self.node(self.m, 0, threshold);
        if metric == ABORTED_METRIC && threshold > ABORTED_METRIC {
            None
        } else {
            Some(metric)
        }
    }

    /// Decodes into a freshly allocated outcome.
    pub fn decode(&mut self, llrs: &[f64], threshold: f64) -> Result<DecodeOutcome> {
        let metric = self.run(llrs, threshold)?;
        Ok(self.outcome(metric))
    }

    pub(crate) fn outcome(&self, metric: Option<f64>) -> DecodeOutcome {
        DecodeOutcome {
            codeword: self.codeword().to_vec(),
            layer0: self.layer0.clone(),
            metric: metric.unwrap_or(ABORTED_METRIC),
            ops: self.ops,
            aborted: metric.is_none(),
        }
    }

    /// Codeword bits of the last completed run.
    pub fn codeword(&self) -> &[u8] {
        &self.bits[self.n()..]
    }

    /// Layer-0 bits of the last completed run.
    pub fn layer0(&self) -> &[u8] {
        &self.layer0
    }

    /// Metric increment contributed by each layer-0 position in the last
    /// run (zero for information bits). Positions after an abort are stale.
    pub fn leaf_metrics(&self) -> &[f64] {
        &self.leaf_metric
    }

    pub fn ops(&self) -> OpCounts {
        self.ops
    }

    fn node(&mut self, layer: u32, g: usize, threshold: f64) -> f64 {
        if layer == 0 {
            let y = self.llr[1];
            let (bit, metric) = if self.frozen[g] {
                (0, y.min(0.0))
            } else if y <= 0.0 {
                (1, 0.0)
            } else {
                (0, 0.0)
            };
            self.bits[1] = bit;
            self.layer0[g] = bit;
            self.leaf_metric[g] = metric;
            self.running += metric;
            return metric;
        }

        let half = 1usize << (layer - 1);
        let kernel = self.kernel;
        {
            let (low, high) = self.llr.split_at_mut(2 * half);
            let child = &mut low[half..];
            let (a, b) = high[..2 * half].split_at(half);
            for ((c, &x), &y) in child.iter_mut().zip(a).zip(b) {
                *c = kernel.apply(x, y);
            }
        }
        self.ops.f_minus += half as u64;

        let left = self.node(layer - 1, 2 * g, threshold);
        if self.running < threshold {
            return ABORTED_METRIC;
        }

        {
            let (llr_low, llr_high) = self.llr.split_at_mut(2 * half);
            let child_llr = &mut llr_low[half..];
            let (a, b) = llr_high[..2 * half].split_at(half);
            let (bits_low, bits_high) = self.bits.split_at_mut(2 * half);
            let child_bits = &bits_low[half..];
            let own = &mut bits_high[..half];
            for i in 0..half {
                own[i] = child_bits[i];
                child_llr[i] = f_plus(a[i], b[i], child_bits[i]);
            }
        }
        self.ops.f_plus += half as u64;

        let right = self.node(layer - 1, 2 * g + 1, threshold);
        let metric = left + right;
        if self.running < threshold {
            return ABORTED_METRIC;
        }

        let (bits_low, bits_high) = self.bits.split_at_mut(2 * half);
        let child_bits = &bits_low[half..];
        let (own_lo, own_hi) = bits_high[..2 * half].split_at_mut(half);
        for (lo, &b) in own_lo.iter_mut().zip(&child_bits[..half]) {
            *lo ^= b;
        }
        own_hi.copy_from_slice(&child_bits[..half]);
        metric
    }
}

/// One-shot SC decode of a full codeword.
pub fn sc_decode(spec: &CodeSpec, llrs: &[f64], threshold: f64) -> Result<DecodeOutcome> {
    ScDecoder::new(spec).decode(llrs, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmcodes::{encode, rm_code};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain recursive decoder with freshly allocated vectors at every
    /// level. `prefix` is the metric of all leaves decoded before this
    /// subtree; the abort compares the running total with the threshold.
    fn reference_sc(
        y: &[f64],
        u0: &mut [u8],
        frozen: &[bool],
        g: usize,
        prefix: f64,
        threshold: f64,
        ops: &mut OpCounts,
    ) -> (f64, Vec<u8>) {
        let len = y.len();
        let mut u = vec![0u8; len];
        if len == 1 {
            if frozen[g] {
                u0[g] = 0;
                return (y[0].min(0.0), u);
            }
            let b = u8::from(y[0] <= 0.0);
            u0[g] = b;
            u[0] = b;
            return (0.0, u);
        }
        let h = len / 2;
        let mut child: Vec<f64> = (0..h).map(|i| f_minus_minsum(y[i], y[i + h])).collect();
        ops.f_minus += h as u64;
        let (mut metric, left) = reference_sc(&child, u0, frozen, 2 * g, prefix, threshold, ops);
        if prefix + metric < threshold {
            return (ABORTED_METRIC, u);
        }
        for i in 0..h {
            u[i] = left[i];
            child[i] = f_plus(y[i], y[i + h], left[i]);
        }
        ops.f_plus += h as u64;
        let (right_metric, right) = reference_sc(
            &child,
            u0,
            frozen,
            2 * g + 1,
            prefix + metric,
            threshold,
            ops,
        );
        metric += right_metric;
        if prefix + metric < threshold {
            return (ABORTED_METRIC, u);
        }
        for (a, &b) in u[..h].iter_mut().zip(&right) {
            *a ^= b;
        }
        u[h..].copy_from_slice(&right);
        (metric, u)
    }

    fn random_spec(rng: &mut impl Rng, m: u32) -> CodeSpec {
        let frozen = (0..1usize << m).filter(|_| rng.random_bool(0.5)).collect();
        CodeSpec::new(m, frozen).unwrap()
    }

    fn random_llrs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()
    }

    #[test]
    fn kernel_examples() {
        for y in [-3.0, 0.0, 2.5, 700.0] {
            assert_eq!(f_minus_exact(0.0, y), 0.0);
        }
        assert!((f_minus_exact(5.0, 3.0) - 2.873_407_395_329_923).abs() < 1e-12);
        assert!((f_minus_exact(-2.0, 7.0) + 1.993_408_053_700_605).abs() < 1e-12);
        assert!((f_minus_exact(0.3, -0.4) + 0.058_789_388_811_887).abs() < 1e-12);
        assert!((f_minus_exact(30.0, -29.0) + 28.686_738_312_481_777).abs() < 1e-12);
        assert_eq!(f_minus_exact(5.0, 3.0), f_minus_exact(3.0, 5.0));
        assert!(f_minus_exact(700.0, -650.0).is_finite());

        assert_eq!(f_minus_minsum(5.0, 3.0), 3.0);
        assert_eq!(f_minus_minsum(2.0, -3.0), -2.0);
        assert_eq!(f_minus_minsum(-4.0, -1.0), 1.0);
        assert_eq!(f_minus_minsum(0.0, -1.0), -0.0);

        assert_eq!(f_plus(2.0, 3.0, 0), 5.0);
        assert_eq!(f_plus(2.0, 3.0, 1), 1.0);
        assert_eq!(f_plus(1.75, -1.75, 0), 0.0);
    }

    #[test]
    fn kernels_agree_in_sign_and_dominance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let x = rng.random_range(-20.0..20.0);
            let y = rng.random_range(-20.0..20.0);
            let exact = f_minus_exact(x, y);
            let approx = f_minus_minsum(x, y);
            assert_eq!(exact < 0.0, approx < 0.0, "x={x} y={y}");
            assert!(exact.abs() <= approx.abs() + 1e-15, "x={x} y={y}");
        }
    }

    #[test]
    fn two_bit_trace() {
        let spec = CodeSpec::new(1, vec![0, 1]).unwrap();
        let out = sc_decode(&spec, &[-1.0, 2.0], f64::NEG_INFINITY).unwrap();
        assert_eq!(out.metric, -1.0);
        assert_eq!(out.codeword, vec![0, 0]);
        assert!(!out.aborted);

        let out = sc_decode(&spec, &[-1.0, 2.0], -0.5).unwrap();
        assert!(out.aborted);
        assert_eq!(out.metric, ABORTED_METRIC);
        // abort after the first half: one f_minus, no f_plus
        assert_eq!(
            out.ops,
            OpCounts {
                f_plus: 0,
                f_minus: 1
            }
        );
    }

    #[test]
    fn abort_uses_the_running_metric() {
        // leaf 0 adds -2 and leaf 2 adds -1: the right subtree alone stays
        // above -2.5 but the running total does not
        let spec = CodeSpec::new(2, vec![0, 1, 2, 3]).unwrap();
        let llrs = [2.0, 3.0, -3.0, 3.0];
        let full = sc_decode(&spec, &llrs, f64::NEG_INFINITY).unwrap();
        assert_eq!(full.metric, -3.0);
        assert_eq!(
            full.ops,
            OpCounts {
                f_plus: 4,
                f_minus: 4
            }
        );
        let cut = sc_decode(&spec, &llrs, -2.5).unwrap();
        assert!(cut.aborted);
        assert_eq!(
            cut.ops,
            OpCounts {
                f_plus: 3,
                f_minus: 4
            }
        );
    }

    #[test]
    fn zero_llr_decodes_to_one() {
        // n = 1 is below the CodeSpec minimum, so check the tie rule on a
        // single information leaf of a larger code: llr 0 everywhere.
        let spec = CodeSpec::new(1, vec![]).unwrap();
        let out = sc_decode(&spec, &[0.0, 0.0], f64::NEG_INFINITY).unwrap();
        assert_eq!(out.layer0, vec![1, 1]);
        assert_eq!(out.metric, 0.0);
        assert_eq!(out.codeword, vec![0, 1]);
    }

    #[test]
    fn positive_llrs_decode_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 1..=8 {
            let spec = random_spec(&mut rng, m);
            let llrs: Vec<f64> = (0..spec.n())
                .map(|_| rng.random_range(0.01..10.0))
                .collect();
            let out = sc_decode(&spec, &llrs, f64::NEG_INFINITY).unwrap();
            assert!(out.codeword.iter().all(|&b| b == 0));
            assert_eq!(out.metric, 0.0);
        }
    }

    #[test]
    fn codeword_metric_examples() {
        assert_eq!(codeword_metric(&[0, 0, 0], &[1.0, 2.0, 0.5]).unwrap(), 0.0);
        assert_eq!(codeword_metric(&[1], &[2.0]).unwrap(), -2.0);
        assert!(codeword_metric(&[1, 0], &[2.0]).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = rm_code(3, 1).unwrap();
        let mut dec = ScDecoder::new(&spec);
        assert!(dec.run(&[0.0; 4], f64::NEG_INFINITY).is_err());
        let mut llrs = vec![1.0; 8];
        llrs[2] = f64::NAN;
        assert!(dec.run(&llrs, f64::NEG_INFINITY).is_err());
        llrs[2] = f64::INFINITY;
        assert!(dec.run(&llrs, f64::NEG_INFINITY).is_err());
        assert!(dec.run(&[1.0; 8], 0.5).is_err());
    }

    #[test]
    fn full_decode_op_count() {
        for m in 1..=10u32 {
            let spec = rm_code(m, m / 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            let llrs = random_llrs(&mut rng, spec.n());
            let out = sc_decode(&spec, &llrs, f64::NEG_INFINITY).unwrap();
            let per_kernel = (spec.n() as u64 / 2) * m as u64;
            assert_eq!(
                out.ops,
                OpCounts {
                    f_plus: per_kernel,
                    f_minus: per_kernel
                }
            );
        }
    }

    #[test]
    fn matches_literal_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..2000 {
            let m = 1 + (trial % 7) as u32;
            let spec = random_spec(&mut rng, m);
            let llrs = random_llrs(&mut rng, spec.n());
            let threshold = if trial % 3 == 0 {
                f64::NEG_INFINITY
            } else {
                rng.random_range(-30.0..0.0)
            };
            let mut u0 = vec![0u8; spec.n()];
            let mut ops = OpCounts::default();
            let (metric, codeword) = reference_sc(
                &llrs,
                &mut u0,
                spec.frozen_mask(),
                0,
                0.0,
                threshold,
                &mut ops,
            );
            let out = sc_decode(&spec, &llrs, threshold).unwrap();
            assert_eq!(out.ops, ops);
            assert_eq!(out.metric, metric);
            assert_eq!(out.aborted, metric == ABORTED_METRIC);
            if !out.aborted {
                assert_eq!(out.codeword, codeword);
                assert_eq!(out.layer0, u0);
            }
        }
    }

    proptest! {
        #[test]
        fn metric_conservation(seed in any::<u64>(), m in 1u32..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, m);
            let llrs = random_llrs(&mut rng, spec.n());
            let out = sc_decode(&spec, &llrs, f64::NEG_INFINITY).unwrap();
            let cw = codeword_metric(&out.codeword, &llrs).unwrap();
            prop_assert!((out.metric - cw).abs() < 1e-9);
            prop_assert!(out.metric <= 0.0);
            prop_assert_eq!(encode(&spec, &out.layer0).unwrap(), out.codeword);
        }

        #[test]
        fn partial_metric_is_nonincreasing(seed in any::<u64>(), m in 1u32..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, m);
            let llrs = random_llrs(&mut rng, spec.n());
            let mut dec = ScDecoder::new(&spec);
            let metric = dec.run(&llrs, f64::NEG_INFINITY).unwrap().unwrap();
            let mut running = 0.0;
            for &inc in dec.leaf_metrics() {
                let next = running + inc;
                prop_assert!(next <= running);
                running = next;
            }
            prop_assert!((running - metric).abs() < 1e-9);
        }

        #[test]
        fn abort_is_sound(seed in any::<u64>(), m in 1u32..=8, t in -40.0f64..0.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = random_spec(&mut rng, m);
            let llrs = random_llrs(&mut rng, spec.n());
            let free = sc_decode(&spec, &llrs, f64::NEG_INFINITY).unwrap();
            let bounded = sc_decode(&spec, &llrs, t).unwrap();
            if free.metric >= t {
                prop_assert!(!bounded.aborted);
                prop_assert_eq!(&bounded.codeword, &free.codeword);
                prop_assert_eq!(&bounded.layer0, &free.layer0);
                prop_assert_eq!(bounded.metric, free.metric);
            } else {
                prop_assert!(bounded.aborted);
                prop_assert!(bounded.ops.total() <= free.ops.total());
            }
        }
    }
}
