//! Small dense real matrices and the projective action on the upper half-plane.
//!
//! Two representations share the [`SquareMatrix`] interface: [`Mat2`] is a
//! `Copy` 2×2 with closed-form norm, QR and determinant, and [`MatD`] is a
//! heap-backed d×d (d ≤ 16) used for the general cocycle families. The norm
//! used throughout is the spectral norm (largest singular value).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 16;

/// Row-major 2×2 real matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub const fn diag(x: f64, y: f64) -> Self {
        Mat2::new(x, 0.0, 0.0, y)
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    #[inline]
    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular { context: "Mat2::inverse" });
        }
        Ok(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    /// Row vector times matrix: `v · M`.
    #[inline]
    pub fn apply_row(&self, v: [f64; 2]) -> [f64; 2] {
        [v[0] * self.a + v[1] * self.c, v[0] * self.b + v[1] * self.d]
    }

    #[inline]
    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    /// Largest and smallest singular values, in that order.
    #[inline]
    pub fn singular_values(&self) -> (f64, f64) {
        let big = self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs());
        if big == 0.0 || !big.is_finite() {
            return (big, 0.0);
        }
        let m = self.scale(1.0 / big);
        let s = m.frobenius_sq();
        let det = m.det().abs();
        // (S − 2|det|)(S + 2|det|) avoids the cancellation in S² − 4det².
        let disc = ((s - 2.0 * det).max(0.0) * (s + 2.0 * det)).sqrt();
        let top = ((s + disc) * 0.5).sqrt();
        let bottom = if top > 0.0 { det / top } else { 0.0 };
        (top * big, bottom * big)
    }

    #[inline]
    pub fn spectral_norm(&self) -> f64 {
        self.singular_values().0
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Divide by `sqrt|det|`, giving `|det| = 1`.
    pub fn normalized_det(&self) -> Result<Mat2> {
        let det = self.det().abs();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular { context: "Mat2::normalized_det" });
        }
        Ok(self.scale(1.0 / det.sqrt()))
    }

    /// Eigenvalues when real, in descending order of modulus.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let tr = self.trace();
        let det = self.det();
        let disc = tr * tr - 4.0 * det;
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        // Stable quadratic roots.
        let big = if tr >= 0.0 { 0.5 * (tr + root) } else { 0.5 * (tr - root) };
        let small = if big != 0.0 { det / big } else { 0.0 };
        Some((big, small))
    }

    /// Spectral radius (modulus of the largest eigenvalue).
    pub fn spectral_radius(&self) -> f64 {
        match self.real_eigenvalues() {
            Some((big, _)) => big.abs(),
            None => self.det().abs().sqrt(),
        }
    }

    /// QR factorization with nonnegative diagonal of R.
    ///
    /// `r22` is taken from `|det| / r11` rather than from the Gram-Schmidt
    /// residual so that nearly parallel columns do not lose precision.
    pub fn qr_positive(&self) -> (Mat2, Mat2) {
        let r11 = self.a.hypot(self.c);
        if r11 == 0.0 {
            // First column vanishes: Q = I up to the second column direction.
            let r22 = self.b.hypot(self.d);
            if r22 == 0.0 {
                return (Mat2::IDENTITY, Mat2::new(0.0, 0.0, 0.0, 0.0));
            }
            let (u0, u1) = (self.b / r22, self.d / r22);
            // q1 ⟂ q2 with det Q = 1.
            let q = Mat2::new(u1, u0, -u0, u1);
            let r12 = 0.0;
            return (q, Mat2::new(0.0, r12, 0.0, r22));
        }
        let (q0, q1) = (self.a / r11, self.c / r11);
        let r12 = q0 * self.b + q1 * self.d;
        let det = self.det();
        let r22 = det.abs() / r11;
        let sign = if det < 0.0 { -1.0 } else { 1.0 };
        let q = Mat2::new(q0, -sign * q1, q1, sign * q0);
        (q, Mat2::new(r11, r12, 0.0, r22))
    }
}

/// Heap-backed square matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatD {
    dim: usize,
    data: Vec<f64>,
}

impl MatD {
    pub fn zeros(dim: usize) -> Self {
        MatD { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = MatD::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(crate::error::invalid(format!("matrix dimension {dim} out of range 1..={MAX_DIM}")));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: r.len() });
            }
            data.extend_from_slice(r);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "MatD::from_rows" });
        }
        Ok(MatD { dim, data })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = MatD::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = x;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.dim + j] = x;
    }

    pub fn transpose(&self) -> MatD {
        let n = self.dim;
        let mut t = MatD::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    pub fn mul_unchecked(&self, o: &MatD) -> MatD {
        let n = self.dim;
        let mut out = MatD::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.data[i * n + k];
                if x == 0.0 {
                    continue;
                }
                let row = &o.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &y) in dst.iter_mut().zip(row) {
                    *d += x * y;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> MatD {
        MatD { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest singular value via Jacobi eigenvalues of MᵀM.
    pub fn spectral_norm(&self) -> f64 {
        if self.dim == 2 {
            return self.to_mat2().spectral_norm();
        }
        let gram = self.transpose().mul_unchecked(self);
        symmetric_eigenvalues(&gram).into_iter().fold(0.0_f64, f64::max).max(0.0).sqrt()
    }

    /// |det| from the R factor of a QR decomposition.
    pub fn abs_det(&self) -> f64 {
        let (_, r) = self.qr_positive();
        (0..self.dim).map(|i| r.get(i, i)).product()
    }

    /// Householder QR with the sign of each R row flipped to make diag(R) ≥ 0.
    pub fn qr_positive(&self) -> (MatD, MatD) {
        let n = self.dim;
        let mut r = self.clone();
        let mut q = MatD::identity(n);
        for k in 0..n.saturating_sub(1) {
            let norm: f64 = (k..n).map(|i| r.get(i, k).powi(2)).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if r.get(k, k) > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (k..n).map(|i| r.get(i, k)).collect();
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            // R ← H R, Q ← Q H with H = I − 2vvᵀ/‖v‖².
            for j in 0..n {
                let dot: f64 = (k..n).map(|i| v[i - k] * r.get(i, j)).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..n {
                    let val = r.get(i, j) - f * v[i - k];
                    r.set(i, j, val);
                }
            }
            for i in 0..n {
                let dot: f64 = (k..n).map(|j| q.get(i, j) * v[j - k]).sum();
                let f = 2.0 * dot / vnorm2;
                for j in k..n {
                    let val = q.get(i, j) - f * v[j - k];
                    q.set(i, j, val);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                r.set(i, j, 0.0);
            }
            if r.get(i, i) < 0.0 {
                for j in 0..n {
                    let x = r.get(i, j);
                    r.set(i, j, -x);
                    let y = q.get(j, i);
                    q.set(j, i, -y);
                }
            }
        }
        (q, r)
    }

    pub fn to_mat2(&self) -> Mat2 {
        debug_assert_eq!(self.dim, 2);
        Mat2::new(self.data[0], self.data[1], self.data[2], self.data[3])
    }

    pub fn max_abs_diff(&self, o: &MatD) -> f64 {
        self.data.iter().zip(&o.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

impl From<Mat2> for MatD {
    fn from(m: Mat2) -> Self {
        MatD { dim: 2, data: vec![m.a, m.b, m.c, m.d] }
    }
}

/// Cyclic Jacobi sweeps on a symmetric matrix.
fn symmetric_eigenvalues(s: &MatD) -> Vec<f64> {
    let n = s.dim();
    let mut a = s.clone();
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        let scale: f64 = (0..n).map(|i| a.get(i, i).powi(2)).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - sn * akq);
                    a.set(k, q, sn * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - sn * aqk);
                    a.set(q, k, sn * apk + c * aqk);
                }
            }
        }
    }
    (0..n).map(|i| a.get(i, i)).collect()
}

/// Matrix product with a dimension check.
pub fn mat_mul(a: &MatD, b: &MatD) -> Result<MatD> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(a.mul_unchecked(b))
}

pub fn qr_positive(m: &MatD) -> (MatD, MatD) {
    if m.dim() == 2 {
        let (q, r) = m.to_mat2().qr_positive();
        return (q.into(), r.into());
    }
    m.qr_positive()
}

pub fn operator_norm(m: &MatD) -> f64 {
    m.spectral_norm()
}

/// Which norm a product tracker renormalizes by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Spectral,
    Frobenius,
}

/// Operations the exponent estimators need from a matrix type.
pub trait SquareMatrix: Clone + Send + Sync {
    fn dim(&self) -> usize;
    fn identity_of(dim: usize) -> Self;
    fn matmul(&self, rhs: &Self) -> Self;
    fn scaled(&self, s: f64) -> Self;
    fn norm(&self, kind: NormKind) -> f64;
    fn abs_det(&self) -> f64;
    fn all_finite(&self) -> bool;
    /// QR with nonnegative diagonal; returns `(Q, diag(R))`.
    fn qr_diag(&self) -> (Self, Vec<f64>);
}

impl SquareMatrix for Mat2 {
    fn dim(&self) -> usize {
        2
    }
    fn identity_of(_dim: usize) -> Self {
        Mat2::IDENTITY
    }
    #[inline]
    fn matmul(&self, rhs: &Self) -> Self {
        self.mul(rhs)
    }
    #[inline]
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    #[inline]
    fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Spectral => self.spectral_norm(),
            NormKind::Frobenius => self.frobenius_sq().sqrt(),
        }
    }
    fn abs_det(&self) -> f64 {
        self.det().abs()
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    #[inline]
    fn qr_diag(&self) -> (Self, Vec<f64>) {
        let (q, r) = self.qr_positive();
        (q, vec![r.a, r.d])
    }
}

impl SquareMatrix for MatD {
    fn dim(&self) -> usize {
        self.dim
    }
    fn identity_of(dim: usize) -> Self {
        MatD::identity(dim)
    }
    fn matmul(&self, rhs: &Self) -> Self {
        self.mul_unchecked(rhs)
    }
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Spectral => self.spectral_norm(),
            NormKind::Frobenius => self.frobenius(),
        }
    }
    fn abs_det(&self) -> f64 {
        MatD::abs_det(self)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn qr_diag(&self) -> (Self, Vec<f64>) {
        let (q, r) = qr_positive(self);
        let diag = (0..self.dim).map(|i| r.get(i, i)).collect();
        (q, diag)
    }
}

/// A point of the open upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    re: f64,
    im: f64,
}

impl HalfPlanePoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::BoundaryPoint { im });
        }
        Ok(HalfPlanePoint { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn distance_to(&self, o: &HalfPlanePoint) -> f64 {
        (self.re - o.re).hypot(self.im - o.im)
    }
}

/// Möbius action for `det > 0`, anti-Möbius `z ↦ (a z̄ + b)/(c z̄ + d)` for `det < 0`.
///
/// With this rule `apply(m1, apply(m2, z)) == apply(m1·m2, z)` for any signs
/// of the determinants, since conjugation commutes with real matrices.
pub fn projective_apply(m: &Mat2, z: HalfPlanePoint) -> Result<HalfPlanePoint> {
    let det = m.det();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Singular { context: "projective_apply" });
    }
    let (x, y) = if det > 0.0 { (z.re, z.im) } else { (z.re, -z.im) };
    // (a w + b) / (c w + d) with w = x + iy.
    let (nr, ni) = (m.a * x + m.b, m.a * y);
    let (dr, di) = (m.c * x + m.d, m.c * y);
    let den = dr * dr + di * di;
    let re = (nr * dr + ni * di) / den;
    // Im part equals det·Im(w)/|cw+d|², computed directly to keep its sign exact.
    let im = det * y / den;
    HalfPlanePoint::new(re, im)
}
