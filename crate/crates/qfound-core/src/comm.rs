//! Fingerprinting states built from classical codes: sign-vector states over
//! the code length, pairwise-overlap checks, anti-distinguishability of all
//! triples, and the resulting pigeonhole lower bound on how many messages a
//! classical simulation needs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_core::RngCore;

use crate::dense::PureState;
use crate::dims::Dims;
use crate::error::{CoreError, Result};
use crate::ontology::anti_distinguishable_triple;
use crate::random::rng_from_seed;

/// Attempts before random code generation gives up.
const GENERATION_BUDGET: usize = 5000;
/// Largest message width accepted for exhaustive pairwise verification.
const MAX_MESSAGE_BITS: usize = 8;

/// Classical code: all `2^n` messages of `n` bits mapped to distinct words
/// of `m` bits.
#[derive(Clone, Debug)]
pub struct Codebook {
    n: usize,
    m: usize,
    words: Vec<String>,
}

impl Codebook {
    pub fn new(n: usize, m: usize, words: Vec<String>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(CoreError::InvalidParameter {
                detail: "message and word lengths must be positive".to_string(),
            });
        }
        if n > MAX_MESSAGE_BITS {
            return Err(CoreError::InvalidParameter {
                detail: format!("exhaustive verification caps n at {MAX_MESSAGE_BITS}, got {n}"),
            });
        }
        if words.len() != 1usize << n {
            return Err(CoreError::InvalidParameter {
                detail: format!("a {n}-bit code needs {} words, got {}", 1usize << n, words.len()),
            });
        }
        for w in &words {
            if w.len() != m || !w.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(CoreError::InvalidParameter {
                    detail: format!("word '{w}' is not a {m}-bit string"),
                });
            }
        }
        let mut sorted = words.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != words.len() {
            return Err(CoreError::InvalidParameter {
                detail: "code words repeat".to_string(),
            });
        }
        Ok(Self { n, m, words })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Hamming distance between two equal-length bit strings.
pub fn hamming_distance(a: &str, b: &str) -> usize {
    a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count()
}

/// Sign-vector states of one codebook: state `x` has amplitude
/// `(-1)^{word_x[alpha]} / sqrt(m)` on basis vector `alpha`.
#[derive(Clone, Debug)]
pub struct FingerprintSet {
    pub states: Vec<PureState>,
    pub source_code: Codebook,
}

impl FingerprintSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Squared overlap `|<F_x|F_y>|^2`, clamped into [0, 1] against
    /// floating-point spill.
    pub fn squared_overlap(&self, x: usize, y: usize) -> f64 {
        self.states[x].inner(&self.states[y]).norm_sqr().clamp(0.0, 1.0)
    }
}

/// Builds the fingerprint states of a codebook. The inner product of states
/// `x` and `y` is `1 - 2 d(x, y) / m` with `d` the Hamming distance.
pub fn fingerprint_states(code: &Codebook) -> Result<FingerprintSet> {
    let m = code.m();
    let dims = Dims::single("F", m);
    let scale = 1.0 / libm::sqrt(m as f64);
    let states = code
        .words()
        .iter()
        .map(|w| {
            let amps: Vec<Complex64> = w
                .bytes()
                .map(|b| Complex64::new(if b == b'1' { -scale } else { scale }, 0.0))
                .collect();
            PureState::new(dims.clone(), amps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FingerprintSet {
        states,
        source_code: code.clone(),
    })
}

/// Which unordered triples fail the anti-distinguishability criterion.
#[derive(Clone, Debug)]
pub struct TripleReport {
    pub all_pass: bool,
    pub checked: usize,
    pub failing: Vec<[usize; 3]>,
}

/// Checks every unordered triple of fingerprint states: the three pairwise
/// squared overlaps must satisfy the anti-distinguishability criterion.
pub fn verify_triples(fs: &FingerprintSet) -> Result<TripleReport> {
    let n = fs.len();
    if n < 3 {
        return Err(CoreError::InvalidParameter {
            detail: format!("triple verification needs at least 3 states, got {n}"),
        });
    }
    let mut failing = Vec::new();
    let mut checked = 0usize;
    for x in 0..n {
        for y in x + 1..n {
            for z in y + 1..n {
                checked += 1;
                let a = fs.squared_overlap(x, y);
                let b = fs.squared_overlap(y, z);
                let c = fs.squared_overlap(x, z);
                if !anti_distinguishable_triple(a, b, c)? {
                    failing.push([x, y, z]);
                }
            }
        }
    }
    Ok(TripleReport {
        all_pass: failing.is_empty(),
        checked,
        failing,
    })
}

/// Message lower bound for a classical simulation of the fingerprint set:
/// each message can serve at most two states, so `ceil(N/2)` messages and
/// `ceil(log2(ceil(N/2)))` bits are needed. Requires every triple to be
/// anti-distinguishable (vacuous below three states).
pub fn fc_lower_bound(fs: &FingerprintSet) -> Result<(usize, usize)> {
    let n = fs.len();
    if n == 0 {
        return Err(CoreError::InvalidParameter {
            detail: "message bound needs at least one state".to_string(),
        });
    }
    if n >= 3 {
        let report = verify_triples(fs)?;
        if !report.all_pass {
            return Err(CoreError::TriplesNotAntiDistinguishable {
                detail: format!(
                    "{} of {} triples fail, first {:?}",
                    report.failing.len(),
                    report.checked,
                    report.failing[0]
                ),
            });
        }
    }
    let min_messages = n.div_ceil(2);
    let min_bits = (usize::BITS - (min_messages - 1).leading_zeros()) as usize;
    Ok((min_messages, min_bits))
}

/// A message carrying three states, with the reason that cannot happen.
#[derive(Clone, Debug)]
pub struct PigeonholeViolation {
    pub message: usize,
    pub triple: [usize; 3],
    pub explanation: String,
}

/// Looks for a message assigned three or more states. For such a triple the
/// receiver's one response distribution over the triple's anti-distinguishing
/// measurement would need probability zero on all three outcomes at once,
/// which normalization forbids.
pub fn fc_pigeonhole_witness(
    fs: &FingerprintSet,
    assignment: &[usize],
) -> Result<Option<PigeonholeViolation>> {
    if assignment.len() != fs.len() {
        return Err(CoreError::DimensionMismatch {
            context: format!(
                "assignment covers {} states but the set has {}",
                assignment.len(),
                fs.len()
            ),
        });
    }
    let mut by_message: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (state, &message) in assignment.iter().enumerate() {
        by_message.entry(message).or_default().push(state);
    }
    for (message, states) in by_message {
        if states.len() >= 3 {
            let triple = [states[0], states[1], states[2]];
            let explanation = format!(
                "message {message} serves states {triple:?}; their anti-distinguishing \
                 measurement must never report the prepared state, so the receiver's single \
                 response distribution needs probability 0 on each of the three outcomes, \
                 contradicting normalization"
            );
            return Ok(Some(PigeonholeViolation {
                message,
                triple,
                explanation,
            }));
        }
    }
    Ok(None)
}

/// Randomly searches for a codebook whose pairwise Hamming distances lie
/// strictly inside `(min_distance_frac * m, max_distance_frac * m)`, with
/// exhaustive verification of every pair.
pub fn random_code(
    n: usize,
    m: usize,
    min_distance_frac: f64,
    max_distance_frac: f64,
    seed: u64,
) -> Result<Codebook> {
    if n == 0 || n > MAX_MESSAGE_BITS || m == 0 {
        return Err(CoreError::InvalidParameter {
            detail: format!("code parameters n = {n}, m = {m} out of range (n in 1..={MAX_MESSAGE_BITS})"),
        });
    }
    if !(min_distance_frac >= 0.0
        && min_distance_frac < max_distance_frac
        && max_distance_frac <= 1.0)
    {
        return Err(CoreError::InvalidParameter {
            detail: format!(
                "distance window ({min_distance_frac}, {max_distance_frac}) must satisfy \
                 0 <= min < max <= 1"
            ),
        });
    }
    let count = 1usize << n;
    let lo = min_distance_frac * m as f64;
    let hi = max_distance_frac * m as f64;
    let mut rng = rng_from_seed(seed);
    for _ in 0..GENERATION_BUDGET {
        let words: Vec<String> = (0..count)
            .map(|_| {
                (0..m)
                    .map(|_| if rng.next_u64() & 1 == 1 { '1' } else { '0' })
                    .collect()
            })
            .collect();
        let ok = (0..count).all(|x| {
            (x + 1..count).all(|y| {
                let d = hamming_distance(&words[x], &words[y]) as f64;
                d > lo && d < hi
            })
        });
        if ok {
            return Codebook::new(n, m, words);
        }
    }
    Err(CoreError::GenerationBudgetExceeded {
        attempts: GENERATION_BUDGET as u64,
    })
}
