//! Reed-Muller codes viewed as polar codes, decoded by running several
//! successive cancellation (SC) decoders over permuted factor graphs and
//! keeping the candidate with the best path metric.
//!
//! The crate is organised bottom-up:
//!
//! * [`rmcodes`]: frozen-set construction and factor-graph encoding.
//! * [`sc`]: LLR kernels and the thresholded SC decoder.
//! * [`permdec`]: layer permutations and the permutation decoder with
//!   branch-and-bound, SNR-threshold and repetition early termination.
//! * [`threshold`]: metric thresholds for the all-zero codeword over a
//!   BI-AWGN channel (CLT approximation and exact mixed-distribution
//!   convolution).
//! * [`scl`]: a successive cancellation list decoder used as a baseline.
//! * [`sim`]: channel model, Monte Carlo BLER / gain experiments and CSV
//!   output.

pub mod error;
pub mod permdec;
pub mod rmcodes;
pub mod sc;
pub mod scl;
pub mod sim;
pub mod threshold;

pub use error::{Error, Result};
pub use permdec::{
    bit_permutation, perm_decode, perm_decode_parallel, sample_permutations, EarlyTermination,
    LayerPermutation, PermDecodeResult, PermDecoder, PermutationSample, StopReason,
};
pub use rmcodes::{encode, generator_matrix, rm_code, scatter_info, CodeSpec};
pub use sc::{
    codeword_metric, f_minus_exact, f_minus_minsum, f_plus, sc_decode, DecodeOutcome, Kernel,
    OpCounts, ScDecoder,
};
pub use scl::{scl_decode, SclDecoder, SclOutcome};
pub use sim::{
    awgn_llrs, run_bler, run_gain_sweep, snr_to_sigma2, DecoderKind, EtFlags, SimConfig, SimRecord,
    Simulation, SnrConvention, StoppingRule,
};
pub use threshold::{
    clt_threshold, precise_threshold, truncated_base, truncated_moments, ChannelNoise,
    MixedDistribution, Quantile,
};
