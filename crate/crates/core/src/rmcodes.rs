//! Reed-Muller codes as polar codes.
//!
//! Bit index `i` has binary digits `(b_{m-1} .. b_0)`, `b_0` least
//! significant. Encoding layer `l` combines positions `i` and `i + 2^l`,
//! i.e. it acts on digit `b_l`.

use crate::error::{Error, Result};

/// Largest exponent accepted by [`generator_matrix`].
pub const MAX_GENERATOR_M: u32 = 16;

/// Largest exponent accepted by [`CodeSpec`].
pub const MAX_CODE_M: u32 = 24;

/// Identity of a code instance: length `2^m` and its frozen index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSpec {
    m: u32,
    frozen: Vec<usize>,
    frozen_mask: Vec<bool>,
    rm_order: Option<u32>,
}

impl CodeSpec {
    /// Builds a polar code from an arbitrary frozen set. The set must be
    /// strictly increasing and every index below `2^m`.
    pub fn new(m: u32, frozen: Vec<usize>) -> Result<Self> {
        if m == 0 || m > MAX_CODE_M {
            return Err(Error::arg(format!(
                "code exponent m must be in 1..={MAX_CODE_M}, got {m}"
            )));
        }
        let n = 1usize << m;
        if frozen.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("frozen indices must be strictly increasing"));
        }
        if let Some(&last) = frozen.last() {
            if last >= n {
                return Err(Error::arg(format!(
                    "frozen index {last} out of range for n = {n}"
                )));
            }
        }
        let mut frozen_mask = vec![false; n];
        for &i in &frozen {
            frozen_mask[i] = true;
        }
        Ok(Self {
            m,
            frozen,
            frozen_mask,
            rm_order: None,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> usize {
        1 << self.m
    }

    /// Code dimension `n - |F|`.
    pub fn k(&self) -> usize {
        self.n() - self.frozen.len()
    }

    /// RM order `r` when the code was built by [`rm_code`].
    pub fn rm_order(&self) -> Option<u32> {
        self.rm_order
    }

    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen_mask
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen_mask[i]
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    /// Non-frozen indices in increasing order.
    pub fn info_positions(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.frozen_mask[i]).collect()
    }
}

/// `RM(r, m)`: index `i` is frozen iff `popcount(i) < m - r`, equivalently
/// row `i` of the generator matrix has weight below `2^(m-r)`.
pub fn rm_code(m: u32, r: u32) -> Result<CodeSpec> {
    if r > m {
        return Err(Error::arg(format!("RM order r = {r} exceeds m = {m}")));
    }
    if m == 0 || m > MAX_CODE_M {
        return Err(Error::arg(format!(
            "code exponent m must be in 1..={MAX_CODE_M}, got {m}"
        )));
    }
    let frozen = (0..1usize << m)
        .filter(|i| i.count_ones() < m - r)
        .collect();
    let mut spec = CodeSpec::new(m, frozen)?;
    spec.rm_order = Some(r);
    Ok(spec)
}

/// The `m`-fold Kronecker power of `[[1,0],[1,1]]`. Only meant as a
/// reference for small `m`; encoding never materialises it.
pub fn generator_matrix(m: u32) -> Result<Vec<Vec<u8>>> {
    if m > MAX_GENERATOR_M {
        return Err(Error::Capacity(format!(
            "generator matrix for m = {m} exceeds the limit m <= {MAX_GENERATOR_M}"
        )));
    }
    let n = 1usize << m;
    // A_m[i][j] = 1 iff the digits of j are a subset of the digits of i.
    Ok((0..n)
        .map(|i| (0..n).map(|j| u8::from(j & !i == 0)).collect())
        .collect())
}

/// In-place `u <- u * A_m` over GF(2) by `m` butterfly layers. Since
/// `A_m * A_m = I`, the same routine maps codewords back to layer-0 bits.
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in bits.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half <<= 1;
    }
}

/// Encodes layer-0 bits `u0` into a codeword.
pub fn encode(spec: &CodeSpec, u0: &[u8]) -> Result<Vec<u8>> {
    if u0.len() != spec.n() {
        return Err(Error::arg(format!(
            "input length {} does not match n = {}",
            u0.len(),
            spec.n()
        )));
    }
    if let Some(&i) = spec.frozen().iter().find(|&&i| u0[i] != 0) {
        return Err(Error::arg(format!(
            "frozen position {i} carries a nonzero bit"
        )));
    }
    if let Some(i) = u0.iter().position(|&b| b > 1) {
        return Err(Error::arg(format!("position {i} is not a bit")));
    }
    let mut out = u0.to_vec();
    polar_transform(&mut out);
    Ok(out)
}

/// Places information bits on the non-frozen positions in increasing index
/// order; frozen positions are zero.
pub fn scatter_info(spec: &CodeSpec, info: &[u8]) -> Result<Vec<u8>> {
    if info.len() != spec.k() {
        return Err(Error::arg(format!(
            "expected {} information bits, got {}",
            spec.k(),
            info.len()
        )));
    }
    let mut u0 = vec![0u8; spec.n()];
    for (pos, &bit) in spec.info_positions().into_iter().zip(info) {
        u0[pos] = bit;
    }
    Ok(u0)
}

/// Inverse of [`scatter_info`]: reads the non-frozen positions of `u0`.
pub fn gather_info(spec: &CodeSpec, u0: &[u8]) -> Vec<u8> {
    spec.info_positions().into_iter().map(|i| u0[i]).collect()
}
