//! LLR-based successive cancellation list decoding.
//!
//! Paths share per-layer LLR and bit arrays through reference counts and
//! copy them only when they are about to be written. Path metrics use the
//! same `min(0, (1 - 2u) y)` penalty as the SC decoder, so the metric of the
//! winning path equals [`crate::codeword_metric`] of its codeword.

use crate::error::{Error, Result};
use crate::rmcodes::{polar_transform, CodeSpec};
use crate::sc::{check_llrs, f_minus_minsum, f_plus, OpCounts};

#[derive(Debug, Clone, PartialEq)]
pub struct SclOutcome {
    pub codeword: Vec<u8>,
    pub layer0: Vec<u8>,
    pub metric: f64,
    pub ops: OpCounts,
}

#[derive(Debug, Clone)]
struct Path {
    slots: Vec<usize>,
    metric: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    rank: usize,
    bit: u8,
    metric: f64,
}

/// Reusable list decoder for one code and list size.
#[derive(Debug, Clone)]
pub struct SclDecoder {
    m: usize,
    list: usize,
    frozen: Vec<bool>,
    llr: Vec<Vec<f64>>,
    bits: Vec<Vec<u8>>,
    refs: Vec<Vec<u32>>,
    free: Vec<Vec<usize>>,
    paths: Vec<Path>,
    free_paths: Vec<usize>,
    active: Vec<usize>,
    candidates: Vec<Candidate>,
    ops: OpCounts,
}

impl SclDecoder {
    pub fn new(spec: &CodeSpec, list: usize) -> Result<Self> {
        if list == 0 {
            return Err(Error::arg("list size must be at least 1"));
        }
        let m = spec.m() as usize;
        Ok(Self {
            m,
            list,
            frozen: spec.frozen_mask().to_vec(),
            llr: (0..=m).map(|l| vec![0.0; list << l]).collect(),
            bits: (0..=m).map(|l| vec![0; list << l]).collect(),
            refs: vec![vec![0; list]; m + 1],
            free: vec![Vec::with_capacity(list); m + 1],
            paths: vec![
                Path {
                    slots: vec![0; m + 1],
                    metric: 0.0,
                };
                list
            ],
            free_paths: Vec::with_capacity(list),
            active: Vec::with_capacity(list),
            candidates: Vec::with_capacity(2 * list),
            ops: OpCounts::default(),
        })
    }

    pub fn list_size(&self) -> usize {
        self.list
    }

    pub fn decode(&mut self, llrs: &[f64]) -> Result<SclOutcome> {
        let n = 1usize << self.m;
        check_llrs(llrs, n)?;
        self.reset();
        let root = self.active[0];
        let slot = self.paths[root].slots[self.m];
        self.llr[self.m][slot * n..(slot + 1) * n].copy_from_slice(llrs);
        self.node(self.m, 0);

        let mut winner = self.active[0];
        for &p in &self.active[1..] {
            if self.paths[p].metric > self.paths[winner].metric {
                winner = p;
            }
        }
        let slot = self.paths[winner].slots[self.m];
        let codeword = self.bits[self.m][slot * n..(slot + 1) * n].to_vec();
        let mut layer0 = codeword.clone();
        polar_transform(&mut layer0);
        Ok(SclOutcome {
            codeword,
            layer0,
            metric: self.paths[winner].metric,
            ops: self.ops,
        })
    }

    fn reset(&mut self) {
        self.ops = OpCounts::default();
        for layer in 0..=self.m {
            self.refs[layer].iter_mut().for_each(|r| *r = 0);
            self.free[layer].clear();
            self.free[layer].extend((1..self.list).rev());
            self.refs[layer][0] = 1;
        }
        self.free_paths.clear();
        self.free_paths.extend((1..self.list).rev());
        self.active.clear();
        self.active.push(0);
        let root = &mut self.paths[0];
        root.slots.iter_mut().for_each(|s| *s = 0);
        root.metric = 0.0;
    }

    /// Slot of `path` at `layer` that is safe to write, copying the shared
    /// contents first when `copy` is set.
    fn writable(&mut self, path: usize, layer: usize, copy: bool) -> usize {
        let slot = self.paths[path].slots[layer];
        if self.refs[layer][slot] == 1 {
            return slot;
        }
        let fresh = self.free[layer].pop().expect("slot pool exhausted");
        self.refs[layer][fresh] = 1;
        self.refs[layer][slot] -= 1;
        if copy {
            let len = 1usize << layer;
            self.llr[layer].copy_within(slot * len..(slot + 1) * len, fresh * len);
            self.bits[layer].copy_within(slot * len..(slot + 1) * len, fresh * len);
        }
        self.paths[path].slots[layer] = fresh;
        fresh
    }

    fn kill(&mut self, path: usize) {
        for layer in 0..=self.m {
            let slot = self.paths[path].slots[layer];
            self.refs[layer][slot] -= 1;
            if self.refs[layer][slot] == 0 {
                self.free[layer].push(slot);
            }
        }
        self.free_paths.push(path);
    }

    fn clone_path(&mut self, path: usize) -> usize {
        let id = self.free_paths.pop().expect("path pool exhausted");
        for layer in 0..=self.m {
            let slot = self.paths[path].slots[layer];
            self.refs[layer][slot] += 1;
            self.paths[id].slots[layer] = slot;
        }
        self.paths[id].metric = self.paths[path].metric;
        id
    }

    fn node(&mut self, layer: usize, g: usize) {
        if layer == 0 {
            self.leaf(g);
            return;
        }
        let half = 1usize << (layer - 1);
        let width = 2 * half;

        for idx in 0..self.active.len() {
            let p = self.active[idx];
            let parent = self.paths[p].slots[layer];
            let child = self.writable(p, layer - 1, false);
            let (low, high) = self.llr.split_at_mut(layer);
            let src = &high[0][parent * width..(parent + 1) * width];
            let dst = &mut low[layer - 1][child * half..(child + 1) * half];
            for i in 0..half {
                dst[i] = f_minus_minsum(src[i], src[i + half]);
            }
            self.ops.f_minus += half as u64;
        }

        self.node(layer - 1, 2 * g);

        for idx in 0..self.active.len() {
            let p = self.active[idx];
            let parent = self.writable(p, layer, true);
            let child = self.writable(p, layer - 1, true);
            let (llr_low, llr_high) = self.llr.split_at_mut(layer);
            let src = &llr_high[0][parent * width..(parent + 1) * width];
            let dst = &mut llr_low[layer - 1][child * half..(child + 1) * half];
            let (bits_low, bits_high) = self.bits.split_at_mut(layer);
            let child_bits = &bits_low[layer - 1][child * half..(child + 1) * half];
            let own = &mut bits_high[0][parent * width..parent * width + half];
            for i in 0..half {
                own[i] = child_bits[i];
                dst[i] = f_plus(src[i], src[i + half], child_bits[i]);
            }
            self.ops.f_plus += half as u64;
        }

        self.node(layer - 1, 2 * g + 1);

        for idx in 0..self.active.len() {
            let p = self.active[idx];
            let parent = self.writable(p, layer, true);
            let child = self.paths[p].slots[layer - 1];
            let (bits_low, bits_high) = self.bits.split_at_mut(layer);
            let child_bits = &bits_low[layer - 1][child * half..(child + 1) * half];
            let (own_lo, own_hi) =
                bits_high[0][parent * width..(parent + 1) * width].split_at_mut(half);
            for (lo, &b) in own_lo.iter_mut().zip(&child_bits[..half]) {
                *lo ^= b;
            }
            own_hi.copy_from_slice(&child_bits[..half]);
        }
    }

    fn set_leaf(&mut self, path: usize, bit: u8, metric: f64) {
        let slot = self.writable(path, 0, false);
        self.bits[0][slot] = bit;
        self.paths[path].metric = metric;
    }

    fn leaf(&mut self, g: usize) {
        if self.frozen[g] {
            for idx in 0..self.active.len() {
                let p = self.active[idx];
                let y = self.llr[0][self.paths[p].slots[0]];
                let metric = self.paths[p].metric + y.min(0.0);
                self.set_leaf(p, 0, metric);
            }
            return;
        }

        // Each path proposes its hard decision first, then the flipped bit.
        self.candidates.clear();
        for (idx, &p) in self.active.iter().enumerate() {
            let y = self.llr[0][self.paths[p].slots[0]];
            let hard = u8::from(y <= 0.0);
            let metric = self.paths[p].metric;
            self.candidates.push(Candidate {
                rank: 2 * idx,
                bit: hard,
                metric,
            });
            self.candidates.push(Candidate {
                rank: 2 * idx + 1,
                bit: 1 - hard,
                metric: metric - y.abs(),
            });
        }
        if self.candidates.len() > self.list {
            self.candidates.sort_by(|a, b| {
                b.metric
                    .partial_cmp(&a.metric)
                    .expect("finite metrics")
                    .then(a.rank.cmp(&b.rank))
            });
            self.candidates.truncate(self.list);
            self.candidates.sort_by_key(|c| c.rank);
        }

        let old = std::mem::take(&mut self.active);
        let mut keep: Vec<Vec<Candidate>> = vec![Vec::new(); old.len()];
        for c in &self.candidates {
            keep[c.rank / 2].push(*c);
        }
        for (idx, &p) in old.iter().enumerate() {
            if keep[idx].is_empty() {
                self.kill(p);
            }
        }
        let mut next = Vec::with_capacity(self.list);
        for (idx, &p) in old.iter().enumerate() {
            match keep[idx].as_slice() {
                [] => {}
                [only] => {
                    self.set_leaf(p, only.bit, only.metric);
                    next.push(p);
                }
                [first, second] => {
                    let q = self.clone_path(p);
                    self.set_leaf(p, first.bit, first.metric);
                    self.set_leaf(q, second.bit, second.metric);
                    next.push(p);
                    next.push(q);
                }
                _ => unreachable!("a path proposes at most two children"),
            }
        }
        self.active = next;
    }
}

/// One-shot list decode; returns the surviving path with the largest metric.
pub fn scl_decode(spec: &CodeSpec, llrs: &[f64], list: usize) -> Result<SclOutcome> {
    SclDecoder::new(spec, list)?.decode(llrs)
}
