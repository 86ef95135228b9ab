//! Plaintext semantics of the eight circuits.
//!
//! These functions are the single source of truth for what each circuit
//! computes. The encrypted domain evaluates them on hidden payloads; the
//! plaintext protocol steps (claiming a round, verifying a proposal) call
//! them directly, which is what makes an encrypted voucher and a plaintext
//! claim meet on identical bytes.
//!
//! Word arithmetic is modulo `2^beta_x`. Keyed primitives are counter-mode
//! SHA-256 with domain separation; their gate counts are charged by the cost
//! model, not measured here.

use sha2::{Digest, Sha256};

fn word_mask(beta_x: u32) -> u64 {
    if beta_x >= 64 {
        u64::MAX
    } else {
        (1u64 << beta_x) - 1
    }
}

/// Strict comparison of one word against an array of bounds: `out[i] = x < bounds[i]`.
///
/// Bounds are u128 because a scaled election window legitimately reaches
/// `delta = 2^64` at full width. Output bits are 0/1 words.
pub fn cmp_lt(x: u64, bounds: &[u128]) -> Vec<u64> {
    bounds
        .iter()
        .map(|&b| u64::from((x as u128) < b))
        .collect()
}

/// Difference chain `[b_0, b_1 - b_0, .., b_{n-1} - b_{n-2}]` modulo `2^beta_x`.
///
/// On a monotone 0/1 input this isolates the first 1; an all-zero input stays
/// all-zero. Non-monotone inputs wrap like any other word arithmetic; the
/// protocol never produces them.
pub fn first_one(bits: &[u64], beta_x: u32) -> Vec<u64> {
    let mask = word_mask(beta_x);
    let mut out = Vec::with_capacity(bits.len());
    let mut prev = 0u64;
    for &b in bits {
        out.push(b.wrapping_sub(prev) & mask);
        prev = b;
    }
    out
}

/// Dot product `sum(values[i] * sel[i])` modulo `2^beta_x`.
///
/// With a one-hot selector this picks one element; the circuit itself is
/// total and does no one-hotness check.
pub fn select(values: &[u64], sel: &[u64], beta_x: u32) -> u64 {
    let mask = word_mask(beta_x);
    debug_assert_eq!(values.len(), sel.len());
    let mut acc = 0u64;
    for (&v, &s) in values.iter().zip(sel) {
        acc = acc.wrapping_add(v.wrapping_mul(s)) & mask;
    }
    acc
}

const PRF_DOMAIN: &[u8] = b"sortition/prf/v1";
const HASH_DOMAIN: &[u8] = b"sortition/hash/v1";

fn expand(domain: &[u8], seed_parts: &[&[u8]], out_bits: u32) -> Vec<u8> {
    debug_assert!(out_bits % 8 == 0);
    let out_len = (out_bits / 8) as usize;
    let mut out = Vec::with_capacity(out_len);
    let mut counter = 0u32;
    while out.len() < out_len {
        let mut h = Sha256::new();
        h.update(domain);
        for part in seed_parts {
            h.update(part);
        }
        h.update(counter.to_be_bytes());
        let block = h.finalize();
        let take = usize::min(out_len - out.len(), block.len());
        out.extend_from_slice(&block[..take]);
        counter += 1;
    }
    out
}

/// Keyed pseudorandom stream for a (key word, input word) pair, truncated to
/// `out_bits`. Both the word-domain draw and the full-width proof are
/// prefixes of the same stream.
pub fn prf_bytes(key: u64, input: u64, out_bits: u32) -> Vec<u8> {
    expand(
        PRF_DOMAIN,
        &[&key.to_be_bytes(), &input.to_be_bytes()],
        out_bits,
    )
}

/// Pseudorandom draw in `[0, 2^beta_x)`: the first `beta_x` bits of the PRF stream.
pub fn prf_word(key: u64, input: u64, beta_x: u32) -> u64 {
    let bytes = prf_bytes(key, input, 64);
    let full = u64::from_be_bytes(bytes[..8].try_into().unwrap());
    if beta_x >= 64 {
        full
    } else {
        full >> (64 - beta_x)
    }
}

/// Round proof: the PRF stream truncated to `lambda` bits.
pub fn prf_proof(key: u64, input: u64, lambda: u32) -> Vec<u8> {
    prf_bytes(key, input, lambda)
}

/// `lambda`-bit digest of a byte string.
pub fn hash_bytes(data: &[u8], lambda: u32) -> Vec<u8> {
    expand(HASH_DOMAIN, &[data], lambda)
}

/// Voucher digest `H(proof || index)` where the leader index is appended as a
/// fixed 16-bit big-endian suffix. `index_word` is the 1-based leader index
/// exactly as the selection circuit produces it.
pub fn voucher_digest(proof: &[u8], index_word: u64, lambda: u32) -> Vec<u8> {
    let mut data = Vec::with_capacity(proof.len() + 2);
    data.extend_from_slice(proof);
    data.extend_from_slice(&(index_word as u16).to_be_bytes());
    hash_bytes(&data, lambda)
}

/// Rescale a draw from `[0, 2^beta_x)` to `[0, m)`: `floor(x * m / 2^beta_x)`,
/// i.e. a widening multiply that drops the `beta_x` low bits.
pub fn scale(x: u64, m: u64, beta_x: u32) -> u64 {
    ((x as u128 * m as u128) >> beta_x) as u64
}

/// Masked subtraction `out[i] = xs[i] - y * mask[i]` modulo `2^beta_x`.
pub fn sub_masked(y: u64, xs: &[u64], mask_bits: &[u64], beta_x: u32) -> Vec<u64> {
    let mask = word_mask(beta_x);
    debug_assert_eq!(xs.len(), mask_bits.len());
    xs.iter()
        .zip(mask_bits)
        .map(|(&x, &b)| x.wrapping_sub(y.wrapping_mul(b)) & mask)
        .collect()
}
