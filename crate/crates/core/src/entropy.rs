//! Min-entropy measurements for the associated value function.
//!
//! MQV and SM2 feed ephemeral points through avf(P) = 2^l + (P.x mod 2^l)
//! instead of a hash, so the natural question is how much entropy that map
//! preserves. This module samples points, applies avf, avf' or a reference
//! SHA-256 of the uncompressed point encoding, and runs two estimators over
//! the resulting fixed-width bitstrings:
//!
//! - the per-bit min-entropy method: for every bit position the empirical
//!   majority probability p_max gives H_i = -log2(p_max), and the figure for
//!   the set is the sum over positions;
//! - a context-tree-weighting compression ratio: binary CTW with
//!   Krichevsky-Trofimov node estimators, weighted in the log domain, whose
//!   coding length divided by the raw bit count approaches 100% exactly when
//!   the stream is incompressible.
//!
//! avf outputs are serialized as (l+1)-bit big-endian strings, so the 2^l
//! term contributes a constant leading 1 and the estimate for a healthy
//! curve sits one bit below the estimate for the reference hash at the same
//! width. The fixed-LSB mock group collapses the avf estimate to zero while
//! the hash of the same points stays near full width, which separates a
//! broken point representation from broken sampling.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::group::{AvfPolicy, Group, GroupError, Scalar};

/// Sample count used by the measurement gates.
pub const DEFAULT_SAMPLES: usize = 16384;
/// Context depth used by the measurement gates.
pub const DEFAULT_DEPTH: u32 = 16;

const MAX_DEPTH: u32 = 24;

/// Which function of the sampled points a set holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionTag {
    Avf,
    AvfPrime,
    ReferenceHash,
}

impl FunctionTag {
    pub const ALL: [FunctionTag; 3] =
        [FunctionTag::Avf, FunctionTag::AvfPrime, FunctionTag::ReferenceHash];

    pub fn name(self) -> &'static str {
        match self {
            FunctionTag::Avf => "avf",
            FunctionTag::AvfPrime => "avf'",
            FunctionTag::ReferenceHash => "reference-hash",
        }
    }
}

impl fmt::Display for FunctionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Error)]
#[error("unknown function {0:?}; expected avf, avf' or reference-hash")]
pub struct UnknownFunction(pub String);

impl FromStr for FunctionTag {
    type Err = UnknownFunction;

    fn from_str(s: &str) -> Result<FunctionTag, UnknownFunction> {
        match s {
            "avf" => Ok(FunctionTag::Avf),
            "avf'" | "avf-prime" => Ok(FunctionTag::AvfPrime),
            "reference-hash" => Ok(FunctionTag::ReferenceHash),
            other => Err(UnknownFunction(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("sample set has zero bit width")]
    ZeroWidth,
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("context depth {depth} needs at least {need} bits of data, got {got}")]
    InsufficientData { depth: u32, need: u64, got: u64 },
    #[error("context depth {0} exceeds the supported maximum {MAX_DEPTH}")]
    DepthTooLarge(u32),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Fixed-width bitstrings produced by one function over one curve's points.
///
/// Bits are stored sample-major, one entry per bit, most significant first
/// within a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    curve: String,
    function: FunctionTag,
    width: usize,
    n: usize,
    seed: u64,
    bits: Vec<u8>,
}

impl SampleSet {
    /// Samples `n` points and applies the tagged function. avf and avf' use
    /// the scheme's own truncation width l and serialize as l+1 bits; the
    /// reference hash is truncated to the same width as avf so the two
    /// estimates are comparable.
    pub fn from_group(
        group: &Group,
        function: FunctionTag,
        n: usize,
        seed: u64,
    ) -> Result<SampleSet, EntropyError> {
        let policy = match function {
            FunctionTag::AvfPrime => AvfPolicy::Sm2,
            FunctionTag::Avf | FunctionTag::ReferenceHash => AvfPolicy::Mqv,
        };
        let width = usize::try_from(policy.truncation_bits(group.order()) + 1)
            .expect("supported curve widths fit usize");
        let mut bits = Vec::with_capacity(n * width);
        for point in group.sample_points(seed, n) {
            match function {
                FunctionTag::Avf | FunctionTag::AvfPrime => {
                    let value = group.avf(&point, policy)?;
                    push_scalar_bits(&mut bits, &value, width);
                }
                FunctionTag::ReferenceHash => {
                    let digest = Sha256::digest(group.encode(&point)?);
                    push_digest_bits(&mut bits, &digest, width);
                }
            }
        }
        Ok(SampleSet { curve: group.name().to_string(), function, width, n, seed, bits })
    }

    /// Builds a set from raw integer samples, for synthetic inputs.
    pub fn from_values(
        curve: &str,
        function: FunctionTag,
        width: usize,
        values: &[u64],
        seed: u64,
    ) -> SampleSet {
        assert!(width <= 64, "synthetic samples are at most 64 bits wide");
        let mut bits = Vec::with_capacity(values.len() * width);
        for &value in values {
            for i in (0..width).rev() {
                bits.push(((value >> i) & 1) as u8);
            }
        }
        SampleSet {
            curve: curve.to_string(),
            function,
            width,
            n: values.len(),
            seed,
            bits,
        }
    }

    pub fn curve(&self) -> &str {
        &self.curve
    }

    pub fn function(&self) -> FunctionTag {
        self.function
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bit(&self, sample: usize, position: usize) -> u8 {
        self.bits[sample * self.width + position]
    }

    /// Copy of the set with the `k` least significant bit positions of every
    /// sample forced to zero, for estimator sanity checks.
    pub fn pin_lsbs(&self, k: usize) -> SampleSet {
        assert!(k <= self.width, "cannot pin more bits than the width");
        let mut pinned = self.clone();
        for sample in 0..self.n {
            let row = sample * self.width;
            for bit in &mut pinned.bits[row + self.width - k..row + self.width] {
                *bit = 0;
            }
        }
        pinned
    }
}

fn push_scalar_bits(bits: &mut Vec<u8>, value: &Scalar, width: usize) {
    let bytes = value.to_bytes(width.div_ceil(8));
    let total = bytes.len() * 8;
    for i in total - width..total {
        bits.push((bytes[i / 8] >> (7 - i % 8)) & 1);
    }
}

fn push_digest_bits(bits: &mut Vec<u8>, digest: &[u8], width: usize) {
    debug_assert!(width <= digest.len() * 8);
    for i in 0..width {
        bits.push((digest[i / 8] >> (7 - i % 8)) & 1);
    }
}

/// Per-bit min-entropy summed over positions: for each bit position the
/// majority probability p_max over the samples contributes -log2(p_max).
pub fn nist_min_entropy(set: &SampleSet) -> Result<f64, EntropyError> {
    nist_prefix(set, set.n)
}

fn nist_prefix(set: &SampleSet, upto: usize) -> Result<f64, EntropyError> {
    if set.width == 0 {
        return Err(EntropyError::ZeroWidth);
    }
    if upto < 2 {
        return Err(EntropyError::TooFewSamples(upto));
    }
    let mut total = 0.0;
    for position in 0..set.width {
        let ones: usize =
            (0..upto).filter(|&sample| set.bit(sample, position) == 1).count();
        let p_max = ones.max(upto - ones) as f64 / upto as f64;
        total -= p_max.log2();
    }
    Ok(total)
}

/// Running totals every `stride` samples, as CSV with a `samples,h_total`
/// header. A final row for the full set is appended when n is not a stride
/// multiple.
pub fn running_nist_csv(set: &SampleSet, stride: usize) -> Result<String, EntropyError> {
    assert!(stride >= 2, "stride must cover at least two samples");
    let mut out = String::from("samples,h_total\n");
    let mut counts: Vec<usize> = (1..=set.n / stride).map(|i| i * stride).collect();
    if set.n % stride != 0 {
        counts.push(set.n);
    }
    for upto in counts {
        out.push_str(&format!("{},{:.4}\n", upto, nist_prefix(set, upto)?));
    }
    Ok(out)
}

struct CtwNode {
    zeros: u64,
    ones: u64,
    log_pe: f64,
    log_pw: f64,
}

impl CtwNode {
    fn new() -> CtwNode {
        CtwNode { zeros: 0, ones: 0, log_pe: 0.0, log_pw: 0.0 }
    }
}

fn log2_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + ((lo - hi).exp2() + 1.0).log2()
}

/// Context-tree-weighting coding length of the concatenated sample bits,
/// as a percentage of the raw bit count.
///
/// Binary tree of the given depth; every node runs a Krichevsky-Trofimov
/// estimator ((count + 1/2) / (total + 1)) and internal nodes weight
/// Pw = Pe/2 + (Pw0 Pw1)/2, all in the log domain. The initial context is
/// all zeroes. Streams close to uniform land a ratio slightly above 100%
/// (the estimator's bookkeeping overhead); redundant streams compress far
/// below it.
pub fn ctw_ratio(set: &SampleSet, depth: u32) -> Result<f64, EntropyError> {
    if depth > MAX_DEPTH {
        return Err(EntropyError::DepthTooLarge(depth));
    }
    if set.width == 0 {
        return Err(EntropyError::ZeroWidth);
    }
    let stream = &set.bits;
    let need = 1u64 << depth;
    if (stream.len() as u64) < need {
        return Err(EntropyError::InsufficientData {
            depth,
            need,
            got: stream.len() as u64,
        });
    }

    let key = |level: u32, prefix: u64| ((level as u64) << 32) | prefix;
    let mut nodes: HashMap<u64, CtwNode> = HashMap::new();
    let history_mask = (1u64 << depth) - 1;
    let mut history: u64 = 0;

    for &bit in stream {
        for level in (0..=depth).rev() {
            let prefix = history & ((1u64 << level) - 1);
            let child_weight = (level < depth).then(|| {
                let low = key(level + 1, prefix);
                let high = key(level + 1, prefix | (1u64 << level));
                let lw0 = nodes.get(&low).map_or(0.0, |n| n.log_pw);
                let lw1 = nodes.get(&high).map_or(0.0, |n| n.log_pw);
                lw0 + lw1
            });
            let node = nodes.entry(key(level, prefix)).or_insert_with(CtwNode::new);
            let total = node.zeros + node.ones;
            let count = if bit == 1 { node.ones } else { node.zeros };
            node.log_pe += ((count as f64 + 0.5) / (total as f64 + 1.0)).log2();
            if bit == 1 {
                node.ones += 1;
            } else {
                node.zeros += 1;
            }
            node.log_pw = match child_weight {
                None => node.log_pe,
                Some(children) => log2_add(node.log_pe, children) - 1.0,
            };
        }
        history = ((history << 1) | bit as u64) & history_mask;
    }

    let root = nodes.get(&key(0, 0)).expect("root exists after a nonempty stream");
    let coding_len = -root.log_pw;
    Ok(coding_len / stream.len() as f64 * 100.0)
}

/// One curve × function measurement: both estimators plus the parameters
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub curve: String,
    pub function: String,
    pub n: usize,
    pub width: usize,
    pub seed: u64,
    pub depth: u32,
    pub nist_bits: f64,
    pub ctw_ratio_percent: f64,
}

/// Runs both estimators for each requested function over one curve.
pub fn run_curve_report(
    group: &Group,
    functions: &[FunctionTag],
    n: usize,
    seed: u64,
    depth: u32,
) -> Result<Vec<EntropyReport>, EntropyError> {
    functions
        .iter()
        .map(|&function| {
            let set = SampleSet::from_group(group, function, n, seed)?;
            Ok(EntropyReport {
                curve: group.name().to_string(),
                function: function.name().to_string(),
                n,
                width: set.width(),
                seed,
                depth,
                nist_bits: nist_min_entropy(&set)?,
                ctw_ratio_percent: ctw_ratio(&set, depth)?,
            })
        })
        .collect()
}

/// CSV with one row per curve × function × estimator.
pub fn reports_to_csv(reports: &[EntropyReport]) -> String {
    let mut out = String::from("curve,function,estimator,value,n,width,seed,depth\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},nist-min-entropy,{:.4},{},{},{},{}\n",
            r.curve, r.function, r.nist_bits, r.n, r.width, r.seed, r.depth
        ));
        out.push_str(&format!(
            "{},{},ctw-ratio-percent,{:.4},{},{},{},{}\n",
            r.curve, r.function, r.ctw_ratio_percent, r.n, r.width, r.seed, r.depth
        ));
    }
    out
}

pub fn reports_to_json(reports: &[EntropyReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}
