//! Circular convolution and wrap-around Hankel matrices.
//!
//! Conventions:
//! - `x ⊛ h` is periodic convolution, `(x ⊛ h)[t] = Σ_k x[(t-k) mod n] h[k]`,
//!   with period `n` equal to the longer operand; the shorter one is
//!   zero-padded.
//! - `flip(v)[k] = v[(-k) mod n]`.
//! - `hankel(x, r)[i][j] = x[(i+j) mod n]`, so `hankel(x, r)·ψ = x ⊛ flip(ψ)`.
//!   [`correlate`] is that product; [`convolve`] is `x ⊛ ψ`.
//!
//! Filters are stored untransposed everywhere; callers pick [`correlate`] or
//! [`convolve`] explicitly.

use std::ops::Deref;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// A finite, non-empty periodic signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVec(Vec<f64>);

impl SignalVec {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Dimension(
                "signal must have at least one sample".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal"));
        }
        Ok(Self(data))
    }

    pub fn period(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SignalVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An `r`-tap filter, `r ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTap(Vec<f64>);

impl FilterTap {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Dimension("filter must have at least one tap".into()));
        }
        if taps.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("filter"));
        }
        Ok(Self(taps))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Deref for FilterTap {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Wrap-around Hankel matrix `H_r^n(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMat {
    entries: Matrix,
    source: Vec<f64>,
}

impl HankelMat {
    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    /// The zero-padded generator, of length `n`.
    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn into_matrix(self) -> Matrix {
        self.entries
    }
}

/// Zero-pad `v` to length `n`. Panics if `v` is longer than `n`.
pub fn zero_pad(v: &[f64], n: usize) -> Vec<f64> {
    assert!(v.len() <= n, "cannot pad length {} to {}", v.len(), n);
    let mut out = vec![0.0; n];
    out[..v.len()].copy_from_slice(v);
    out
}

pub fn flip(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|k| v[(n - k) % n]).collect()
}

/// `H_r^n(x)` with the period taken from `x`.
pub fn hankel(x: &[f64], r: usize) -> Result<HankelMat> {
    hankel_with_period(x, x.len(), r)
}

/// `H_r^n(x)` for a generator of length ≤ `n`, zero-padded to period `n`.
pub fn hankel_with_period(x: &[f64], n: usize, r: usize) -> Result<HankelMat> {
    if x.len() > n {
        return Err(Error::Dimension(format!(
            "generator length {} exceeds period {}",
            x.len(),
            n
        )));
    }
    if r == 0 || r > n {
        return Err(Error::Dimension(format!(
            "hankel column count r = {r} must satisfy 1 <= r <= n = {n}"
        )));
    }
    let source = zero_pad(x, n);
    let entries = Matrix::from_fn(n, r, |i, j| source[(i + j) % n]);
    Ok(HankelMat { entries, source })
}

/// Periodic convolution `x ⊛ h`, evaluated as `H_n^n(x)·flip(h)`.
pub fn circ_conv(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len().max(h.len());
    if n == 0 {
        return Vec::new();
    }
    let hx = hankel_with_period(x, n, n).expect("period is the longer length");
    let h_flipped = flip(&zero_pad(h, n));
    (0..n)
        .map(|i| (0..n).map(|j| hx.entries[(i, j)] * h_flipped[j]).sum())
        .collect()
}

/// `x ⊛ ψ`; alias of [`circ_conv`] named for the decoder-side usage.
pub fn convolve(x: &[f64], psi: &[f64]) -> Vec<f64> {
    circ_conv(x, psi)
}

/// `H_r^n(x)·ψ = x ⊛ flip(ψ)`; the encoder-side usage.
pub fn correlate(x: &[f64], psi: &[f64]) -> Vec<f64> {
    let n = x.len();
    let r = psi.len();
    assert!(
        r >= 1 && r <= n,
        "filter length {r} must not exceed period {n}"
    );
    (0..n)
        .map(|i| (0..r).map(|j| x[(i + j) % n] * psi[j]).sum())
        .collect()
}

/// A `q_in × q_out × r` filter tensor.
///
/// `tap(c, o)` is the filter linking input channel `c` to output channel `o`.
/// For an encoder layer this is `ψ_{o,c}`; for a decoder layer `ψ̃_{c,o}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTensor {
    q_in: usize,
    q_out: usize,
    r: usize,
    data: Vec<f64>,
}

impl FilterTensor {
    pub fn zeros(q_in: usize, q_out: usize, r: usize) -> Self {
        Self {
            q_in,
            q_out,
            r,
            data: vec![0.0; q_in * q_out * r],
        }
    }

    pub fn from_fn(
        q_in: usize,
        q_out: usize,
        r: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(q_in, q_out, r);
        for c in 0..q_in {
            for o in 0..q_out {
                for a in 0..r {
                    t.data[(c * q_out + o) * r + a] = f(c, o, a);
                }
            }
        }
        t
    }

    /// Build from the `r·q_in × q_out` filter matrix (row `c·r + a`, column `o`).
    pub fn from_filter_matrix(m: &Matrix, q_in: usize, r: usize) -> Result<Self> {
        if m.nrows() != r * q_in {
            return Err(Error::Dimension(format!(
                "filter matrix has {} rows, expected r*q_in = {}",
                m.nrows(),
                r * q_in
            )));
        }
        Ok(Self::from_fn(q_in, m.ncols(), r, |c, o, a| {
            m[(c * r + a, o)]
        }))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.q_in, self.q_out, self.r)
    }

    pub fn q_in(&self) -> usize {
        self.q_in
    }

    pub fn q_out(&self) -> usize {
        self.q_out
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn tap(&self, c: usize, o: usize) -> &[f64] {
        let start = (c * self.q_out + o) * self.r;
        &self.data[start..start + self.r]
    }

    pub fn tap_mut(&mut self, c: usize, o: usize) -> &mut [f64] {
        let start = (c * self.q_out + o) * self.r;
        &mut self.data[start..start + self.r]
    }

    /// Flat parameter view, ordered `(c, o, a)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The `r·q_in × q_out` filter matrix `Ψ` (row `c·r + a`, column `o`).
    pub fn filter_matrix(&self) -> Matrix {
        Matrix::from_fn(self.r * self.q_in, self.q_out, |row, o| {
            let (c, a) = (row / self.r, row % self.r);
            self.tap(c, o)[a]
        })
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }
}

/// MIMO convolution: `y_o = Σ_c z_c ⊛ flip(ψ_{o,c})`, with `ψ_{o,c} = psi.tap(c, o)`.
pub fn mimo_conv(z: &[Vec<f64>], psi: &FilterTensor) -> Result<Vec<Vec<f64>>> {
    if z.len() != psi.q_in() {
        return Err(Error::Dimension(format!(
            "{} input channels but filter tensor expects {}",
            z.len(),
            psi.q_in()
        )));
    }
    let n = z.first().map_or(0, Vec::len);
    if z.iter().any(|ch| ch.len() != n) {
        return Err(Error::Dimension(
            "input channels must share one period".into(),
        ));
    }
    if psi.r() > n {
        return Err(Error::Dimension(format!(
            "filter length {} exceeds period {}",
            psi.r(),
            n
        )));
    }
    Ok((0..psi.q_out())
        .map(|o| {
            let mut acc = vec![0.0; n];
            for (c, zc) in z.iter().enumerate() {
                for (slot, v) in acc.iter_mut().zip(correlate(zc, psi.tap(c, o))) {
                    *slot += v;
                }
            }
            acc
        })
        .collect())
}

/// Extended Hankel matrix `[H_r^n(z_1) ⋯ H_r^n(z_p)]`.
pub fn extended_hankel(z: &[Vec<f64>], r: usize) -> Result<Matrix> {
    let n = z.first().map_or(0, Vec::len);
    let mut out = Matrix::zeros(n, r * z.len());
    for (c, zc) in z.iter().enumerate() {
        if zc.len() != n {
            return Err(Error::Dimension(
                "input channels must share one period".into(),
            ));
        }
        let h = hankel(zc, r)?;
        out.view_mut((0, c * r), (n, r)).copy_from(h.entries());
    }
    Ok(out)
}

/// `[φ_1 ⊛ ψ ⋯ φ_m ⊛ ψ]` for the columns `φ_i` of `phi`.
pub fn conv_with_frame(phi: &Matrix, psi: &[f64]) -> Matrix {
    let m_in = phi.nrows();
    assert!(
        psi.len() <= m_in,
        "filter length {} exceeds period {}",
        psi.len(),
        m_in
    );
    let mut out = Matrix::zeros(m_in, phi.ncols());
    for (i, col) in phi.column_iter().enumerate() {
        let column: Vec<f64> = col.iter().copied().collect();
        let conv = circ_conv(&column, psi);
        out.column_mut(i).copy_from_slice(&conv);
    }
    out
}

/// `I_m ⊛ v`: the circulant matrix whose action is `u ↦ u ⊛ v`.
pub fn identity_conv(m: usize, v: &[f64]) -> Matrix {
    conv_with_frame(&Matrix::identity(m, m), v)
}

/// `|uᵀ·H(f)·v − ⟨f, u ⊛ v⟩|` with `H(f)` of width `len(v)`.
pub fn hankel_inner_identity_gap(f: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != f.len() {
        return Err(Error::Dimension(format!(
            "u has length {} but f has period {}",
            u.len(),
            f.len()
        )));
    }
    let h = hankel(f, v.len())?;
    let hv: Vec<f64> = (0..f.len())
        .map(|i| (0..v.len()).map(|j| h.entries[(i, j)] * v[j]).sum())
        .collect();
    let lhs: f64 = u.iter().zip(&hv).map(|(a, b)| a * b).sum();
    let rhs: f64 = f.iter().zip(circ_conv(u, v)).map(|(a, b)| a * b).sum();
    Ok((lhs - rhs).abs())
}

pub fn hankel_inner_identity_check(f: &[f64], u: &[f64], v: &[f64], tol: f64) -> Result<bool> {
    Ok(hankel_inner_identity_gap(f, u, v)? <= tol)
}
