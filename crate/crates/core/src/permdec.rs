//! Permutation decoding: SC decoding of `L` permuted copies of the channel
//! LLRs, keeping the candidate with the largest path metric.
//!
//! Only the `m!` permutations of factor-graph layers are used. Such a
//! permutation reorders the binary digits of every bit index, which keeps
//! Hamming weights and therefore maps the frozen set of an RM code onto
//! itself.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rmcodes::CodeSpec;
use crate::sc::{check_llrs, OpCounts, ScDecoder};

/// Slack applied when a completed metric is reused as an abort bound.
///
/// The same codeword reached through different permutations accumulates its
/// metric in a different order, so the floating-point sums can differ in the
/// last bits. Without slack such a duplicate would be cut by its own best
/// metric and never counted for repetition handling.
fn bound_slack(metric: f64) -> f64 {
    1e-9 * metric.abs().max(1.0)
}

/// Maps bit index `i` to the index whose digit `layer_map[j]` equals digit
/// `j` of `i`.
pub fn bit_permutation(layer_map: &[usize], m: u32) -> Result<Vec<usize>> {
    let m = m as usize;
    if layer_map.len() != m {
        return Err(Error::arg(format!(
            "layer map has {} entries, expected {m}",
            layer_map.len()
        )));
    }
    let mut seen = vec![false; m];
    for &t in layer_map {
        if t >= m || seen[t] {
            return Err(Error::arg(format!(
                "{layer_map:?} is not a permutation of 0..{m}"
            )));
        }
        seen[t] = true;
    }
    Ok((0..1usize << m)
        .map(|i| {
            layer_map
                .iter()
                .enumerate()
                .fold(0, |acc, (j, &t)| acc | (((i >> j) & 1) << t))
        })
        .collect())
}

/// A permutation of factor-graph layers together with the bit-index
/// permutation it induces.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerPermutation {
    layer_map: Vec<usize>,
    bit_map: Vec<usize>,
    inverse: Vec<usize>,
}

impl LayerPermutation {
    pub fn new(layer_map: Vec<usize>) -> Result<Self> {
        let m = u32::try_from(layer_map.len()).map_err(|_| Error::arg("layer map too long"))?;
        let bit_map = bit_permutation(&layer_map, m)?;
        let mut inverse = vec![0; bit_map.len()];
        for (i, &j) in bit_map.iter().enumerate() {
            inverse[j] = i;
        }
        Ok(Self {
            layer_map,
            bit_map,
            inverse,
        })
    }

    pub fn identity(m: u32) -> Self {
        Self::new((0..m as usize).collect()).expect("identity is a permutation")
    }

    pub fn m(&self) -> u32 {
        self.layer_map.len() as u32
    }

    pub fn layer_map(&self) -> &[usize] {
        &self.layer_map
    }

    pub fn bit_map(&self) -> &[usize] {
        &self.bit_map
    }

    pub fn inverse_bit_map(&self) -> &[usize] {
        &self.inverse
    }

    pub fn is_identity(&self) -> bool {
        self.layer_map.iter().enumerate().all(|(j, &t)| j == t)
    }

    /// `dst[bit_map[i]] = src[i]`.
    pub fn permute_into<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (&j, &v) in self.bit_map.iter().zip(src) {
            dst[j] = v;
        }
    }

    /// `dst[i] = src[bit_map[i]]`, the inverse of [`Self::permute_into`].
    pub fn depermute_into<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (d, &j) in dst.iter_mut().zip(&self.bit_map) {
            *d = src[j];
        }
    }

    pub fn permute<T: Copy + Default>(&self, src: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); src.len()];
        self.permute_into(src, &mut out);
        out
    }

    pub fn depermute<T: Copy + Default>(&self, src: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); src.len()];
        self.depermute_into(src, &mut out);
        out
    }

    /// True when the frozen set of `spec` is mapped onto itself.
    pub fn preserves_frozen_set(&self, spec: &CodeSpec) -> bool {
        spec.m() == self.m()
            && spec
                .frozen()
                .iter()
                .all(|&i| spec.is_frozen(self.bit_map[i]))
    }
}

/// Permutations drawn for one decoder run.
#[derive(Debug, Clone)]
pub struct PermutationSample {
    pub perms: Vec<LayerPermutation>,
    /// Set when more permutations were requested than `m!` exist, so some
    /// appear more than once.
    pub with_replacement: bool,
}

fn factorial(m: u32) -> u128 {
    (1..=m as u128).fold(1u128, |acc, k| acc.saturating_mul(k))
}

fn all_layer_maps(m: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                prefix.push(t);
                go(prefix, used, out);
                prefix.pop();
                used[t] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(m), &mut vec![false; m], &mut out);
    out
}

/// Identity first, then `count - 1` further layer permutations drawn
/// uniformly. Draws are distinct while `count <= m!`; beyond that every
/// permutation is used once and the remainder is drawn with replacement.
pub fn sample_permutations<R: Rng + ?Sized>(
    m: u32,
    count: usize,
    rng: &mut R,
) -> Result<PermutationSample> {
    if count == 0 {
        return Err(Error::arg("at least one permutation is required"));
    }
    let total = factorial(m);
    let mut maps: Vec<Vec<usize>> = vec![(0..m as usize).collect()];
    let mut with_replacement = false;

    if count as u128 <= total && total > 4 * count as u128 {
        let mut seen = std::collections::HashSet::new();
        seen.insert(maps[0].clone());
        while maps.len() < count {
            let mut candidate: Vec<usize> = (0..m as usize).collect();
            candidate.shuffle(rng);
            if seen.insert(candidate.clone()) {
                maps.push(candidate);
            }
        }
    } else {
        let mut rest: Vec<Vec<usize>> = all_layer_maps(m as usize)
            .into_iter()
            .filter(|p| p.iter().enumerate().any(|(j, &t)| j != t))
            .collect();
        rest.shuffle(rng);
        let take = rest.len().min(count - 1);
        maps.extend(rest.drain(..take));
        while maps.len() < count {
            with_replacement = true;
            let mut candidate: Vec<usize> = (0..m as usize).collect();
            candidate.shuffle(rng);
            maps.push(candidate);
        }
    }

    let perms = maps
        .into_iter()
        .map(LayerPermutation::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(PermutationSample {
        perms,
        with_replacement,
    })
}

/// Early termination policies applied on top of the metric threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EarlyTermination {
    /// Abort a branch once its partial metric drops below the best
    /// completed metric.
    pub branch_bound: bool,
    /// Stop once the same codeword has been produced this many times and
    /// holds the best metric.
    pub repetition: Option<usize>,
}

impl EarlyTermination {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_none(&self) -> bool {
        !self.branch_bound && self.repetition.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Every permutation was tried.
    Exhausted,
    /// Repetition handling fired.
    Repetition,
    /// Every permutation was tried and none beat the initial threshold.
    ThresholdFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermStats {
    /// Kernel counters of each branch that was started, in order.
    pub branch_ops: Vec<OpCounts>,
    pub ops: OpCounts,
    pub branches_run: usize,
    pub branches_aborted: usize,
    /// Distinct codewords among completed branches.
    pub distinct_candidates: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermDecodeResult {
    /// Codeword estimate in the original (unpermuted) bit order.
    pub codeword: Vec<u8>,
    /// Layer-0 bits in the original bit order; re-encodes to `codeword`.
    pub layer0: Vec<u8>,
    /// Best metric, or the initial threshold when nothing was decoded.
    pub metric: f64,
    pub decoded: bool,
    pub stats: PermStats,
}

/// Reusable permutation decoder for one code.
#[derive(Debug, Clone)]
pub struct PermDecoder {
    spec: CodeSpec,
    sc: ScDecoder,
    permuted: Vec<f64>,
}

impl PermDecoder {
    pub fn new(spec: &CodeSpec) -> Self {
        Self {
            spec: spec.clone(),
            sc: ScDecoder::new(spec),
            permuted: vec![0.0; spec.n()],
        }
    }

    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    fn validate(&self, llrs: &[f64], perms: &[LayerPermutation], threshold: f64) -> Result<()> {
        check_llrs(llrs, self.spec.n())?;
        if threshold.is_nan() || threshold > 0.0 {
            return Err(Error::arg(format!(
                "metric threshold must lie in [-inf, 0], got {threshold}"
            )));
        }
        if perms.is_empty() {
            return Err(Error::arg("permutation list is empty"));
        }
        if let Some(p) = perms.iter().find(|p| !p.preserves_frozen_set(&self.spec)) {
            return Err(Error::config(format!(
                "frozen set is not invariant under layer permutation {:?}",
                p.layer_map()
            )));
        }
        Ok(())
    }

    /// Runs the branches sequentially in list order.
    pub fn decode(
        &mut self,
        llrs: &[f64],
        perms: &[LayerPermutation],
        threshold: f64,
        et: EarlyTermination,
    ) -> Result<PermDecodeResult> {
        self.validate(llrs, perms, threshold)?;
        if et.repetition == Some(0) {
            return Err(Error::arg("repetition count must be at least 1"));
        }
        let n = self.spec.n();
        let mut best_metric = threshold;
        let mut best: Option<(Vec<u8>, Vec<u8>)> = None;
        let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut branch_ops = Vec::with_capacity(perms.len());
        let mut ops = OpCounts::default();
        let mut aborted = 0;
        let mut stop_reason = StopReason::Exhausted;

        for perm in perms {
            let bound = if et.branch_bound && best.is_some() {
                threshold.max(best_metric - bound_slack(best_metric))
            } else {
                threshold
            };
            perm.permute_into(llrs, &mut self.permuted);
            let result = self.sc.run_unchecked(&self.permuted, bound);
            let branch = self.sc.ops();
            branch_ops.push(branch);
            ops += branch;
            let Some(metric) = result else {
                aborted += 1;
                continue;
            };

            let mut codeword = vec![0u8; n];
            perm.depermute_into(self.sc.codeword(), &mut codeword);
            if metric > best_metric {
                let mut layer0 = vec![0u8; n];
                perm.depermute_into(self.sc.layer0(), &mut layer0);
                best_metric = metric;
                best = Some((codeword.clone(), layer0));
            }
            let holds_best = best.as_ref().is_some_and(|(cw, _)| *cw == codeword);
            let count = seen.entry(codeword).or_insert(0);
            *count += 1;
            if holds_best && et.repetition.is_some_and(|limit| *count >= limit) {
                stop_reason = StopReason::Repetition;
                break;
            }
        }

        let branches_run = branch_ops.len();
        let decoded = best.is_some();
        if !decoded {
            stop_reason = StopReason::ThresholdFailure;
        }
        let (codeword, layer0) = best.unwrap_or_else(|| (vec![0; n], vec![0; n]));
        Ok(PermDecodeResult {
            codeword,
            layer0,
            metric: best_metric,
            decoded,
            stats: PermStats {
                branch_ops,
                ops,
                branches_run,
                branches_aborted: aborted,
                distinct_candidates: seen.len(),
                stop_reason,
            },
        })
    }
}

/// Sequential permutation decoding.
pub fn perm_decode(
    spec: &CodeSpec,
    llrs: &[f64],
    perms: &[LayerPermutation],
    threshold: f64,
    et: EarlyTermination,
) -> Result<PermDecodeResult> {
    PermDecoder::new(spec).decode(llrs, perms, threshold, et)
}

/// Runs all branches independently in parallel and keeps the best metric,
/// lowest permutation index on ties. Only the metric threshold can be used
/// here; branch-and-bound and repetition handling need sequential order.
pub fn perm_decode_parallel(
    spec: &CodeSpec,
    llrs: &[f64],
    perms: &[LayerPermutation],
    threshold: f64,
    et: EarlyTermination,
) -> Result<PermDecodeResult> {
    if !et.is_none() {
        return Err(Error::config(
            "parallel decoding supports only the metric threshold",
        ));
    }
    let probe = PermDecoder::new(spec);
    probe.validate(llrs, perms, threshold)?;
    let n = spec.n();

    type Branch = (OpCounts, Option<(f64, Vec<u8>, Vec<u8>)>);
    let branches: Vec<Branch> = perms
        .par_iter()
        .map_init(
            || (ScDecoder::new(spec), vec![0.0; n]),
            |(sc, buf), perm| {
                perm.permute_into(llrs, buf);
                let result = sc.run_unchecked(buf, threshold);
                let candidate = result.map(|metric| {
                    (
                        metric,
                        perm.depermute(sc.codeword()),
                        perm.depermute(sc.layer0()),
                    )
                });
                (sc.ops(), candidate)
            },
        )
        .collect();

    let mut ops = OpCounts::default();
    let mut branch_ops = Vec::with_capacity(branches.len());
    let mut aborted = 0;
    let mut best_metric = threshold;
    let mut best: Option<(Vec<u8>, Vec<u8>)> = None;
    let mut seen = std::collections::HashSet::new();
    for (branch, candidate) in branches {
        ops += branch;
        branch_ops.push(branch);
        match candidate {
            None => aborted += 1,
            Some((metric, codeword, layer0)) => {
                if metric > best_metric {
                    best_metric = metric;
                    best = Some((codeword.clone(), layer0));
                }
                seen.insert(codeword);
            }
        }
    }
    let decoded = best.is_some();
    let (codeword, layer0) = best.unwrap_or_else(|| (vec![0; n], vec![0; n]));
    Ok(PermDecodeResult {
        codeword,
        layer0,
        metric: best_metric,
        decoded,
        stats: PermStats {
            branches_run: branch_ops.len(),
            branch_ops,
            ops,
            branches_aborted: aborted,
            distinct_candidates: seen.len(),
            stop_reason: if decoded {
                StopReason::Exhausted
            } else {
                StopReason::ThresholdFailure
            },
        },
    })
}
