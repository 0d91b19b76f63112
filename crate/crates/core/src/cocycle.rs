//! The cocycle families and overflow-safe products along an orbit.
//!
//! Products use the left-multiplication convention
//! `A⁽ⁿ⁾(ω) = A(fⁿ⁻¹ω) ⋯ A(fω) A(ω)`: each new generator multiplies the
//! running product from the left.

use std::f64::consts::TAU;
use std::sync::LazyLock;

use serde::Serialize;

use crate::dynamics::{BasePoint, BernoulliDriver, OrbitDriver, RotationDriver, ToralDriver, ToralMap};
use crate::error::{invalid, Error, Result};
use crate::matrix::{Mat2, MatD, NormKind, SquareMatrix};

/// Default potential coupling: `2 cos(2πx)` is the critical almost Mathieu case.
pub const CRITICAL_COUPLING: f64 = 2.0;

/// The projective matrices of the six barycentric children, in label order.
///
/// Index `j` holds the generator for label `j + 1`:
/// `[B, B·P₁, B·P₂, B·P₃, B·P₄, B·P₅]` with
/// `B = (1/√6)[[2,2],[0,3]]`, `P₁ = [[1,0],[1,−1]]`, `P₂ = [[0,1],[1,0]]`,
/// `P₃ = [[−1,1],[0,1]]`, and the two 3-cycles `P₄ = P₂·P₃`, `P₅ = P₃·P₂`.
/// Every entry is normalized to `|det| = 1`.
pub fn barycentric_generators() -> [Mat2; 6] {
    *BARYCENTRIC
}

static BARYCENTRIC: LazyLock<[Mat2; 6]> = LazyLock::new(|| {
    let s = 6f64.sqrt();
    let b = Mat2::new(2.0 / s, 2.0 / s, 0.0, 3.0 / s);
    let perms = symmetric_group_elements();
    let mut out = [Mat2::IDENTITY; 6];
    out[0] = b.normalized_det().expect("B is invertible");
    for (k, p) in perms.iter().enumerate() {
        out[k + 1] = b.mul(p).normalized_det().expect("B·P is invertible");
    }
    out
});

/// `P₁ … P₅`: the nontrivial elements of S₃ acting on marked triangles.
///
/// `P₁, P₂, P₃` relabel `(a, b, c)` as `(c, b, a)`, `(a, c, b)`, `(b, a, c)`;
/// `P₄ = P₂P₃` and `P₅ = P₃P₂` are the cyclic relabelings `(b, c, a)` and
/// `(c, a, b)`.
pub fn symmetric_group_elements() -> [Mat2; 5] {
    let p1 = Mat2::new(1.0, 0.0, 1.0, -1.0);
    let p2 = Mat2::new(0.0, 1.0, 1.0, 0.0);
    let p3 = Mat2::new(-1.0, 1.0, 0.0, 1.0);
    [p1, p2, p3, p2.mul(&p3), p3.mul(&p2)]
}

/// Closed set of cocycle families.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CocycleSpec {
    Constant { matrix: MatD },
    RandomProduct { matrices: Vec<MatD>, probs: Vec<f64> },
    Barycentric,
    Schrodinger { energy: f64, coupling: f64, alpha: f64 },
    ToralDerivative { epsilon: f64 },
}

impl CocycleSpec {
    pub fn constant(matrix: MatD) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::NonFinite { context: "constant cocycle" });
        }
        Ok(CocycleSpec::Constant { matrix })
    }

    pub fn constant2(m: Mat2) -> Self {
        CocycleSpec::Constant { matrix: m.into() }
    }

    /// Random product with i.i.d. symbols of law `probs`; every matrix must
    /// be invertible and share one dimension.
    pub fn random_product(matrices: Vec<MatD>, probs: Vec<f64>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(invalid("random product needs at least one matrix"));
        };
        let dim = first.dim();
        if probs.len() != matrices.len() {
            return Err(invalid("one probability per matrix is required"));
        }
        for m in &matrices {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: m.dim() });
            }
            if !m.is_finite() {
                return Err(Error::NonFinite { context: "random product" });
            }
            let det = m.abs_det();
            if !(det > 1e-300) {
                return Err(Error::Singular { context: "random product generator" });
            }
        }
        // Validates the probability vector the same way the driver will.
        if matrices.len() >= 2 {
            BernoulliDriver::new(&probs, 0)?;
        } else if (probs[0] - 1.0).abs() > 1e-12 {
            return Err(invalid("single-matrix product needs probability 1"));
        }
        Ok(CocycleSpec::RandomProduct { matrices, probs })
    }

    pub fn random_uniform2(ms: &[Mat2]) -> Result<Self> {
        let k = ms.len();
        CocycleSpec::random_product(ms.iter().map(|&m| m.into()).collect(), vec![1.0 / k as f64; k])
    }

    pub fn schrodinger(energy: f64, alpha: f64) -> Self {
        CocycleSpec::Schrodinger { energy, coupling: CRITICAL_COUPLING, alpha }
    }

    pub fn dim(&self) -> usize {
        match self {
            CocycleSpec::Constant { matrix } => matrix.dim(),
            CocycleSpec::RandomProduct { matrices, .. } => matrices[0].dim(),
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CocycleSpec::Constant { .. } => "constant",
            CocycleSpec::RandomProduct { .. } => "random",
            CocycleSpec::Barycentric => "barycentric",
            CocycleSpec::Schrodinger { .. } => "schrodinger",
            CocycleSpec::ToralDerivative { .. } => "toral",
        }
    }

    /// True when the generator does not depend on the base point.
    pub fn has_constant_generator(&self) -> bool {
        match self {
            CocycleSpec::Constant { .. } => true,
            CocycleSpec::ToralDerivative { epsilon } => *epsilon == 0.0,
            CocycleSpec::RandomProduct { matrices, .. } => matrices.len() == 1,
            _ => false,
        }
    }

    /// All generators have `|det| = 1` (within 1e-12).
    pub fn is_unimodular(&self) -> bool {
        let ok = |m: &MatD| (m.abs_det() - 1.0).abs() <= 1e-12;
        match self {
            CocycleSpec::Constant { matrix } => ok(matrix),
            CocycleSpec::RandomProduct { matrices, .. } => matrices.iter().all(ok),
            _ => true,
        }
    }

    /// The base system this cocycle lives over.
    ///
    /// Random products and the barycentric family use a Bernoulli stream
    /// seeded by `seed`; the Schrödinger family uses the rotation by `alpha`
    /// from phase 0; the toral family starts at a seeded uniform point.
    pub fn default_driver(&self, seed: u64) -> Result<OrbitDriver> {
        Ok(match self {
            CocycleSpec::Constant { .. } => OrbitDriver::Fixed,
            CocycleSpec::RandomProduct { probs, .. } => {
                if probs.len() == 1 {
                    OrbitDriver::Fixed
                } else {
                    OrbitDriver::Bernoulli(BernoulliDriver::new(probs, seed)?)
                }
            }
            CocycleSpec::Barycentric => OrbitDriver::Bernoulli(BernoulliDriver::uniform(6, seed)?),
            CocycleSpec::Schrodinger { alpha, .. } => OrbitDriver::Rotation(RotationDriver::new(*alpha, 0.0)?),
            CocycleSpec::ToralDerivative { epsilon } => {
                OrbitDriver::Toral(ToralDriver::seeded(ToralMap::Perturbed { epsilon: *epsilon }, seed))
            }
        })
    }

    /// The generator matrix at a base point.
    pub fn generator(&self, bp: &BasePoint) -> Result<MatD> {
        match self {
            CocycleSpec::Constant { matrix } => Ok(matrix.clone()),
            CocycleSpec::RandomProduct { matrices, .. } => match *bp {
                BasePoint::Symbol(s) if (1..=matrices.len()).contains(&s) => Ok(matrices[s - 1].clone()),
                BasePoint::Symbol(s) => Err(invalid(format!("symbol {s} out of range"))),
                _ => Err(mismatch("symbol", bp)),
            },
            _ => Ok(self.kernel2()?.eval(bp)?.into()),
        }
    }

    /// Specialized evaluator for 2×2 families.
    pub(crate) fn kernel2(&self) -> Result<Kernel2> {
        Ok(match self {
            CocycleSpec::Constant { matrix } if matrix.dim() == 2 => Kernel2::Constant(matrix.to_mat2()),
            CocycleSpec::RandomProduct { matrices, .. } if matrices[0].dim() == 2 => {
                if matrices.len() == 1 {
                    Kernel2::Constant(matrices[0].to_mat2())
                } else {
                    Kernel2::Table(matrices.iter().map(MatD::to_mat2).collect())
                }
            }
            CocycleSpec::Barycentric => Kernel2::Table(barycentric_generators().to_vec()),
            CocycleSpec::Schrodinger { energy, coupling, .. } => {
                Kernel2::Schrodinger { energy: *energy, coupling: *coupling }
            }
            CocycleSpec::ToralDerivative { epsilon } => Kernel2::Toral { epsilon: *epsilon },
            _ => return Err(Error::DimensionMismatch { left: 2, right: self.dim() }),
        })
    }

    pub(crate) fn kernel_d(&self) -> KernelD {
        match self {
            CocycleSpec::Constant { matrix } => KernelD::Constant(matrix.clone()),
            CocycleSpec::RandomProduct { matrices, .. } => KernelD::Table(matrices.clone()),
            other => KernelD::Wrapped(other.kernel2().expect("2×2 family")),
        }
    }
}

fn mismatch(expected: &'static str, bp: &BasePoint) -> Error {
    Error::BasePointMismatch { expected, got: bp.kind() }
}

/// `[[E − λ cos 2πx, −1], [1, 0]]`.
#[inline]
pub fn schrodinger_matrix(energy: f64, coupling: f64, x: f64) -> Mat2 {
    Mat2::new(energy - coupling * (TAU * x).cos(), -1.0, 1.0, 0.0)
}

/// Derivative of `(x, y) ↦ (2x + y + ε sin 2π(x+y), x + y)`.
#[inline]
pub fn toral_derivative(epsilon: f64, x: f64, y: f64) -> Mat2 {
    let c = TAU * epsilon * (TAU * (x + y)).cos();
    Mat2::new(2.0 + c, 1.0 + c, 1.0, 1.0)
}

#[derive(Clone, Debug)]
pub(crate) enum Kernel2 {
    Constant(Mat2),
    Table(Vec<Mat2>),
    Schrodinger { energy: f64, coupling: f64 },
    Toral { epsilon: f64 },
}

impl Kernel2 {
    #[inline]
    pub(crate) fn eval(&self, bp: &BasePoint) -> Result<Mat2> {
        match (self, *bp) {
            (Kernel2::Constant(m), _) => Ok(*m),
            (Kernel2::Table(t), BasePoint::Symbol(s)) => {
                t.get(s.wrapping_sub(1)).copied().ok_or_else(|| invalid(format!("symbol {s} out of range")))
            }
            (Kernel2::Table(_), _) => Err(mismatch("symbol", bp)),
            (Kernel2::Schrodinger { energy, coupling }, BasePoint::Phase(x)) => {
                Ok(schrodinger_matrix(*energy, *coupling, x))
            }
            (Kernel2::Schrodinger { .. }, _) => Err(mismatch("phase", bp)),
            (Kernel2::Toral { epsilon }, BasePoint::Torus(x, y)) => Ok(toral_derivative(*epsilon, x, y)),
            (Kernel2::Toral { .. }, _) => Err(mismatch("torus", bp)),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum KernelD {
    Constant(MatD),
    Table(Vec<MatD>),
    Wrapped(Kernel2),
}

impl KernelD {
    pub(crate) fn eval(&self, bp: &BasePoint) -> Result<MatD> {
        match (self, *bp) {
            (KernelD::Constant(m), _) => Ok(m.clone()),
            (KernelD::Table(t), BasePoint::Symbol(s)) => {
                t.get(s.wrapping_sub(1)).cloned().ok_or_else(|| invalid(format!("symbol {s} out of range")))
            }
            (KernelD::Table(_), _) => Err(mismatch("symbol", bp)),
            (KernelD::Wrapped(k), _) => Ok(k.eval(bp)?.into()),
        }
    }
}

/// Running product `A⁽ⁿ⁾` stored as `exp(log_scale) · current` with
/// `‖current‖ = 1` after every step.
#[derive(Clone, Debug)]
pub struct ProductState<M: SquareMatrix> {
    step: u64,
    current: M,
    log_scale: f64,
    log_abs_det: f64,
    norm: NormKind,
}

impl<M: SquareMatrix> ProductState<M> {
    pub fn new(dim: usize) -> Self {
        ProductState::with_norm(dim, NormKind::Spectral)
    }

    pub fn with_norm(dim: usize, norm: NormKind) -> Self {
        ProductState { step: 0, current: M::identity_of(dim), log_scale: 0.0, log_abs_det: 0.0, norm }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn current(&self) -> &M {
        &self.current
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `log ‖A⁽ⁿ⁾‖` in the tracker's norm.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.current.norm(self.norm).ln()
    }

    /// Σ log|det g| over the generators applied so far.
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// `current ← g · current`, then renormalize.
    pub fn advance(&mut self, g: &M) -> Result<()> {
        if g.dim() != self.current.dim() {
            return Err(Error::DimensionMismatch { left: self.current.dim(), right: g.dim() });
        }
        if !g.all_finite() {
            return Err(Error::NonFinite { context: "cocycle generator" });
        }
        let product = g.matmul(&self.current);
        let n = product.norm(self.norm);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NonFinite { context: "product renormalization" });
        }
        self.current = product.scaled(1.0 / n);
        self.log_scale += n.ln();
        self.log_abs_det += g.abs_det().ln();
        self.step += 1;
        Ok(())
    }
}

impl ProductState<Mat2> {
    /// `log ‖v · A⁽ⁿ⁾‖` for a row vector `v`.
    pub fn log_row_norm(&self, v: [f64; 2]) -> f64 {
        let w = self.current.apply_row(v);
        self.log_scale + w[0].hypot(w[1]).ln()
    }
}

/// `log ‖v₀ · A⁽ⁿ⁾(ω)‖` for the barycentric cocycle along `symbols` (1-based).
///
/// The product is the cocycle product (newest generator on the left), so the
/// full matrix is tracked and the row vector is applied at the end.
pub fn row_vector_growth<I>(symbols: I, v0: [f64; 2]) -> Result<f64>
where
    I: IntoIterator<Item = usize>,
{
    if v0 == [0.0, 0.0] {
        return Err(invalid("row vector must be nonzero"));
    }
    let gens = barycentric_generators();
    let mut state = ProductState::<Mat2>::new(2);
    for s in symbols {
        let g = gens.get(s.wrapping_sub(1)).ok_or_else(|| invalid(format!("symbol {s} out of range")))?;
        state.advance(g)?;
    }
    Ok(state.log_row_norm(v0))
}

/// `log ‖v₀ · A_{ω₁} A_{ω₂} ⋯ A_{ωₙ}‖`: a single running row vector, i.e. the
/// product taken in the opposite order to the cocycle.
pub fn row_vector_growth_reversed<I>(symbols: I, v0: [f64; 2]) -> Result<f64>
where
    I: IntoIterator<Item = usize>,
{
    let norm0 = v0[0].hypot(v0[1]);
    if norm0 == 0.0 {
        return Err(invalid("row vector must be nonzero"));
    }
    let gens = barycentric_generators();
    let mut v = [v0[0] / norm0, v0[1] / norm0];
    let mut log = norm0.ln();
    for s in symbols {
        let g = gens.get(s.wrapping_sub(1)).ok_or_else(|| invalid(format!("symbol {s} out of range")))?;
        let w = g.apply_row(v);
        let n = w[0].hypot(w[1]);
        v = [w[0] / n, w[1] / n];
        log += n.ln();
    }
    Ok(log)
}
