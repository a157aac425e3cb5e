//! Exact second-order Reed-Muller sequence algebra.
//!
//! A codeword of length `2^m` is identified by a symmetric binary `m x m`
//! matrix `P` and a binary vector `b` of length `m`; sample `j` (0-based) is
//!
//! ```text
//! c[j] = i^(2*b.a + a^T P a  mod 4),   a = binary_expansion(j, m)
//! ```
//!
//! so every sample is one of `{1, -1, i, -i}` and the whole synthesis is
//! integer arithmetic.
//!
//! Bit-order convention (normative for the whole workspace): the *last*
//! entry of a binary expansion is the least significant bit of the index,
//! so `binary_expansion(2*j + 1, s)` stacks `binary_expansion(j, s-1)` on
//! top of a trailing 1. Everything downstream (Walsh frequencies, slot
//! indices, payload serialization) uses this one convention.

use num_complex::Complex64;

use crate::error::Error;

/// `i^e` for integer `e`, exact.
#[inline]
pub fn quarter_root(e: u32) -> Complex64 {
    match e & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// The unit factor `(-1)^b * i^beta` attached to a Walsh modulation.
#[inline]
pub fn polarity_unit(b: u8, beta: u8) -> Complex64 {
    quarter_root(2 * u32::from(b) + u32::from(beta))
}

/// `s`-bit binary expansion of `j`, most significant bit first.
pub fn binary_expansion(j: u64, s: usize) -> Result<Vec<u8>, Error> {
    let limit = 1u64
        .checked_shl(s as u32)
        .ok_or(Error::IndexOutOfRange { value: j, limit: u64::MAX })?;
    if j >= limit {
        return Err(Error::IndexOutOfRange { value: j, limit });
    }
    Ok((0..s).map(|k| ((j >> (s - 1 - k)) & 1) as u8).collect())
}

/// Inverse of [`binary_expansion`]: reads a bit vector as an index.
pub fn bits_to_index(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &bit| (acc << 1) | u64::from(bit))
}

fn check_bit(value: u8) -> Result<(), Error> {
    if value > 1 {
        return Err(Error::NotABit { value });
    }
    Ok(())
}

/// The matrix-vector pair `(P, b)` identifying one Reed-Muller codeword.
///
/// `P` is symmetric with `{0,1}` entries and `b` is a `{0,1}` vector, so the
/// pair carries `m(m+3)/2` independent bits: the upper triangle of `P`
/// (diagonal included) plus `b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RmPair {
    m: usize,
    /// Row-major `m x m` entries.
    p: Vec<u8>,
    b: Vec<u8>,
}

impl RmPair {
    /// Number of payload bits a pair of size `m` carries.
    pub fn bit_count(m: usize) -> usize {
        m * (m + 3) / 2
    }

    /// The all-zero pair.
    pub fn zero(m: usize) -> Self {
        RmPair { m, p: vec![0; m * m], b: vec![0; m] }
    }

    /// Build from row-major `P` entries and `b`, validating symmetry and
    /// binariness.
    pub fn from_parts(m: usize, p: Vec<u8>, b: Vec<u8>) -> Result<Self, Error> {
        if p.len() != m * m {
            return Err(Error::LengthMismatch { expected: m * m, got: p.len() });
        }
        if b.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: b.len() });
        }
        for &x in p.iter().chain(b.iter()) {
            check_bit(x)?;
        }
        for r in 0..m {
            for c in (r + 1)..m {
                if p[r * m + c] != p[c * m + r] {
                    return Err(Error::AsymmetricMatrix);
                }
            }
        }
        Ok(RmPair { m, p, b })
    }

    /// Deserialize from the canonical bit layout: row-major upper triangle of
    /// `P` (diagonal included) followed by `b`.
    pub fn from_bits(m: usize, bits: &[u8]) -> Result<Self, Error> {
        let expected = Self::bit_count(m);
        if bits.len() != expected {
            return Err(Error::LengthMismatch { expected, got: bits.len() });
        }
        for &x in bits {
            check_bit(x)?;
        }
        let mut p = vec![0u8; m * m];
        let mut at = 0;
        for r in 0..m {
            for c in r..m {
                p[r * m + c] = bits[at];
                p[c * m + r] = bits[at];
                at += 1;
            }
        }
        let b = bits[at..].to_vec();
        Ok(RmPair { m, p, b })
    }

    /// Serialize to the canonical bit layout (inverse of [`from_bits`]).
    pub fn to_bits(&self) -> Vec<u8> {
        let mut bits = Vec::with_capacity(Self::bit_count(self.m));
        for r in 0..self.m {
            for c in r..self.m {
                bits.push(self.p[r * self.m + c]);
            }
        }
        bits.extend_from_slice(&self.b);
        bits
    }

    /// Uniformly random pair.
    pub fn random<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let bits: Vec<u8> =
            (0..Self::bit_count(m)).map(|_| u8::from(rng.random::<bool>())).collect();
        Self::from_bits(m, &bits).expect("generated bits are valid")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Entry `P[r][c]`.
    pub fn p(&self, r: usize, c: usize) -> u8 {
        self.p[r * self.m + c]
    }

    /// Entry `b[k]`.
    pub fn b(&self, k: usize) -> u8 {
        self.b[k]
    }

    /// Copy with `P[r][c]` (and its mirror) set to `value`.
    pub fn with_p_entry(&self, r: usize, c: usize, value: u8) -> Self {
        let mut out = self.clone();
        out.p[r * self.m + c] = value;
        out.p[c * self.m + r] = value;
        out
    }

    /// The leading `s x s` block of `P` together with the first `s` entries
    /// of `b`.
    pub fn leading(&self, s: usize) -> Result<Self, Error> {
        if s == 0 || s > self.m {
            return Err(Error::SubOrderOutOfRange { s, m: self.m });
        }
        let mut p = vec![0u8; s * s];
        for r in 0..s {
            for c in 0..s {
                p[r * s + c] = self.p[r * self.m + c];
            }
        }
        Ok(RmPair { m: s, p, b: self.b[..s].to_vec() })
    }
}

/// One step of the recursive block decomposition of a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubPair {
    /// The `(s-1)`-sized pair `(P^{s-1}, b^{s-1})`.
    pub inner: RmPair,
    /// Off-diagonal column of the `s x s` block: `alpha[k] = P[k][s-1]`.
    pub alpha: Vec<u8>,
    /// `b[s-1]`.
    pub b_s: u8,
    /// Diagonal entry `P[s-1][s-1]`.
    pub beta_s: u8,
}

/// Split the leading `s x s` block of a pair into its `(s-1)` block, the
/// off-diagonal column `alpha`, and the scalars `(b_s, beta_s)`.
pub fn sub_pair(pair: &RmPair, s: usize) -> Result<SubPair, Error> {
    if s < 2 || s > pair.m() {
        return Err(Error::SubOrderOutOfRange { s, m: pair.m() });
    }
    let inner = pair.leading(s - 1)?;
    let alpha = (0..s - 1).map(|k| pair.p(k, s - 1)).collect();
    Ok(SubPair { inner, alpha, b_s: pair.b(s - 1), beta_s: pair.p(s - 1, s - 1) })
}

/// A length-`2^m` Reed-Muller sequence; every sample is a 4th root of unity.
#[derive(Debug, Clone, PartialEq)]
pub struct RmSequence {
    m: usize,
    samples: Vec<Complex64>,
}

impl RmSequence {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
}

/// Synthesize the Reed-Muller sequence of a pair.
///
/// The exponent is accumulated as an integer mod 4; no floating point enters
/// until the final root-of-unity lookup. Cost is `O(m * 2^m)` using bit-mask
/// dot products.
pub fn rm_sequence(pair: &RmPair) -> RmSequence {
    let m = pair.m();
    let n = 1usize << m;
    // Mask-space aligns bit i of an index with vector component m-1-i, so the
    // index itself serves as the expansion's mask.
    let mut b_mask = 0u64;
    let row_masks: Vec<u64> = (0..m)
        .map(|i| {
            let r = m - 1 - i;
            b_mask |= u64::from(pair.b(r)) << i;
            (0..m).fold(0u64, |row, j| row | (u64::from(pair.p(r, m - 1 - j)) << j))
        })
        .collect();
    let samples = (0..n as u64)
        .map(|j| {
            let mut exponent = 2 * (b_mask & j).count_ones();
            let mut rest = j;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                exponent += (row_masks[i] & j).count_ones();
                rest &= rest - 1;
            }
            quarter_root(exponent)
        })
        .collect();
    RmSequence { m, samples }
}

/// The modulation sequence linking a pair's order-`s` sequence to its
/// order-`s-1` subsequence: `v[j] = (-1)^b_s * i^beta_s * (-1)^(alpha . a_j)`,
/// a Walsh sequence of frequency `alpha` scaled by a unit factor.
pub fn walsh_modulation(alpha: &[u8], b_s: u8, beta_s: u8) -> Result<Vec<Complex64>, Error> {
    check_bit(b_s)?;
    check_bit(beta_s)?;
    for &a in alpha {
        check_bit(a)?;
    }
    let unit = polarity_unit(b_s, beta_s);
    let alpha_mask = bits_to_index(alpha);
    let n = 1usize << alpha.len();
    Ok((0..n as u64)
        .map(|j| {
            // Index j doubles as the LSB-aligned mask of a_j.
            if (alpha_mask & j).count_ones() & 1 == 0 {
                unit
            } else {
                -unit
            }
        })
        .collect())
}

/// Walsh-Hadamard spectrum of a length-`2^s` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshSpectrum {
    s: usize,
    coefficients: Vec<Complex64>,
}

impl WalshSpectrum {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Frequency vector of coefficient `l`.
    pub fn frequency(&self, l: usize) -> Vec<u8> {
        binary_expansion(l as u64, self.s).expect("index within spectrum")
    }
}

/// In-place fast Walsh-Hadamard transform: `x[l] <- sum_j (-1)^(a_l . a_j) x[j]`.
///
/// Plain butterfly passes, `O(s * 2^s)`; the caller owns the buffer so the
/// decoder's inner loop never allocates. Applying the transform twice
/// multiplies the input by `2^s`.
pub fn fwht_in_place(x: &mut [Complex64]) -> Result<(), Error> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo { len: n });
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for j in 0..h {
                let u = lo[j];
                let v = hi[j];
                lo[j] = u + v;
                hi[j] = u - v;
            }
        }
        h <<= 1;
    }
    Ok(())
}

/// Allocating wrapper around [`fwht_in_place`].
pub fn fwht(x: &[Complex64]) -> Result<WalshSpectrum, Error> {
    let mut coefficients = x.to_vec();
    fwht_in_place(&mut coefficients)?;
    Ok(WalshSpectrum { s: coefficients.len().trailing_zeros() as usize, coefficients })
}
