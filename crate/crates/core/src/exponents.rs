//! Lyapunov exponent estimators.
//!
//! [`top_exponent`] follows `(1/n) log ‖A⁽ⁿ⁾‖` through a renormalized
//! product; [`spectrum_qr`] carries an orthonormal frame through the cocycle
//! and averages `log R_ii` (Benettin-style QR deflation). Both record a
//! Cesàro trace at 100 checkpoints and a batch-means standard error over the
//! 100 batches between them. Cocycles whose generator does not depend on the
//! base point report zero standard error.

use serde::Serialize;

use crate::cocycle::{CocycleSpec, ProductState};
use crate::dynamics::{derive_seed, BernoulliDriver, OrbitDriver, ToralMap};
use crate::error::{invalid, Error, Result};
use crate::matrix::{Mat2, MatD, NormKind, SquareMatrix};

pub const MIN_STEPS: u64 = 1_000;
pub const BATCHES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentReport {
    /// Distinct exponents, descending.
    pub exponents: Vec<f64>,
    /// Multiplicity of each exponent. A top-only report has `[1]`.
    pub multiplicities: Vec<usize>,
    pub steps: u64,
    pub stderr: Vec<f64>,
    /// Running estimate of the top exponent at each checkpoint.
    pub trace: Vec<f64>,
}

impl ExponentReport {
    pub fn top(&self) -> f64 {
        self.exponents[0]
    }

    pub fn top_stderr(&self) -> f64 {
        self.stderr[0]
    }

    /// `Σ dᵢ χᵢ`; zero for cocycles with `|det| = 1`.
    pub fn weighted_sum(&self) -> f64 {
        self.exponents.iter().zip(&self.multiplicities).map(|(x, &d)| x * d as f64).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn checkpoints(n: u64) -> Vec<u64> {
    (1..=BATCHES as u64).map(|k| k * n / BATCHES as u64).collect()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Batch-means stderr of a cumulative series sampled at the checkpoints.
fn batch_stderr(cumulative: &[f64], marks: &[u64]) -> f64 {
    let mut prev_v = 0.0;
    let mut prev_t = 0u64;
    let mut rates = Vec::with_capacity(marks.len());
    for (&v, &t) in cumulative.iter().zip(marks) {
        rates.push((v - prev_v) / (t - prev_t) as f64);
        prev_v = v;
        prev_t = t;
    }
    mean_and_stderr(&rates).1
}

fn check_steps(n: u64) -> Result<()> {
    if n < MIN_STEPS {
        return Err(invalid(format!("need at least {MIN_STEPS} steps, got {n}")));
    }
    Ok(())
}

fn run_top<M, F>(n: u64, dim: usize, norm: NormKind, deterministic: bool, mut next: F) -> Result<ExponentReport>
where
    M: SquareMatrix,
    F: FnMut() -> Result<M>,
{
    let marks = checkpoints(n);
    let mut state = ProductState::<M>::with_norm(dim, norm);
    let mut cumulative = Vec::with_capacity(BATCHES);
    let mut k = 0;
    for step in 1..=n {
        let g = next()?;
        state.advance(&g)?;
        if step == marks[k] {
            cumulative.push(state.log_norm());
            k += 1;
        }
    }
    let chi = state.log_norm() / n as f64;
    let trace = cumulative.iter().zip(&marks).map(|(v, &t)| v / t as f64).collect();
    let se = if deterministic { 0.0 } else { batch_stderr(&cumulative, &marks) };
    Ok(ExponentReport { exponents: vec![chi], multiplicities: vec![1], steps: n, stderr: vec![se], trace })
}

/// Top exponent `(1/n) log ‖A⁽ⁿ⁾‖` in the spectral norm.
pub fn top_exponent(spec: &CocycleSpec, driver: &mut OrbitDriver, n: u64) -> Result<ExponentReport> {
    top_exponent_with_norm(spec, driver, n, NormKind::Spectral)
}

pub fn top_exponent_with_norm(
    spec: &CocycleSpec,
    driver: &mut OrbitDriver,
    n: u64,
    norm: NormKind,
) -> Result<ExponentReport> {
    check_steps(n)?;
    let det = spec.has_constant_generator();
    if spec.dim() == 2 {
        let kernel = spec.kernel2()?;
        run_top::<Mat2, _>(n, 2, norm, det, || kernel.eval(&driver.next_point()))
    } else {
        let kernel = spec.kernel_d();
        run_top::<MatD, _>(n, spec.dim(), norm, det, || kernel.eval(&driver.next_point()))
    }
}

fn run_qr<M, F>(n: u64, dim: usize, deterministic: bool, mut next: F) -> Result<ExponentReport>
where
    M: SquareMatrix,
    F: FnMut() -> Result<M>,
{
    let marks = checkpoints(n);
    let mut frame = M::identity_of(dim);
    let mut sums = vec![0.0; dim];
    let mut cumulative: Vec<Vec<f64>> = vec![Vec::with_capacity(BATCHES); dim];
    let mut k = 0;
    for step in 1..=n {
        let g = next()?;
        let (q, diag) = g.matmul(&frame).qr_diag();
        for (i, r) in diag.iter().enumerate() {
            if !(*r > 0.0) || !r.is_finite() {
                return Err(Error::RankCollapse { step, index: i });
            }
            sums[i] += r.ln();
        }
        frame = q;
        if step == marks[k] {
            for i in 0..dim {
                cumulative[i].push(sums[i]);
            }
            k += 1;
        }
    }
    let raw: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let ses: Vec<f64> =
        if deterministic { vec![0.0; dim] } else { cumulative.iter().map(|c| batch_stderr(c, &marks)).collect() };
    let trace = cumulative[0].iter().zip(&marks).map(|(v, &t)| v / t as f64).collect();
    let (exponents, multiplicities, stderr) = merge_spectrum(&raw, &ses, n);
    Ok(ExponentReport { exponents, multiplicities, steps: n, stderr, trace })
}

/// Sort descending and merge exponents closer than `5/√n`.
pub fn merge_spectrum(raw: &[f64], ses: &[f64], n: u64) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..raw.len()).collect();
    idx.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let tol = 5.0 / (n as f64).sqrt();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if raw[*g.last().unwrap()] - raw[i] <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut values = Vec::new();
    let mut mults = Vec::new();
    let mut errs = Vec::new();
    for g in groups {
        values.push(g.iter().map(|&i| raw[i]).sum::<f64>() / g.len() as f64);
        mults.push(g.len());
        errs.push(g.iter().map(|&i| ses[i]).fold(0.0, f64::max));
    }
    (values, mults, errs)
}

/// Full spectrum by QR reorthonormalization, with multiplicities.
pub fn spectrum_qr(spec: &CocycleSpec, driver: &mut OrbitDriver, n: u64) -> Result<ExponentReport> {
    check_steps(n)?;
    let det = spec.has_constant_generator();
    if spec.dim() == 2 {
        let kernel = spec.kernel2()?;
        run_qr::<Mat2, _>(n, 2, det, || kernel.eval(&driver.next_point()))
    } else {
        let kernel = spec.kernel_d();
        run_qr::<MatD, _>(n, spec.dim(), det, || kernel.eval(&driver.next_point()))
    }
}

fn torus_distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    let d = |a: f64, b: f64| {
        let t = (a - b).rem_euclid(1.0);
        t.min(1.0 - t)
    };
    d(p.0, q.0).max(d(p.1, q.1))
}

/// Exponent of the periodic measure on `cycle`:
/// `(1/q) log ρ(D_{x_q} ⋯ D_{x_1})` along the orbit of `cycle[0]`.
///
/// The points may be listed in any order; the orbit of the first point must
/// stay within 1e-9 of the set and visit every point exactly once.
pub fn periodic_orbit_exponent(spec: &CocycleSpec, cycle: &[(f64, f64)]) -> Result<f64> {
    let CocycleSpec::ToralDerivative { epsilon } = *spec else {
        return Err(invalid("periodic orbit exponents need the toral derivative cocycle"));
    };
    if cycle.is_empty() {
        return Err(invalid("empty cycle"));
    }
    let map = ToralMap::Perturbed { epsilon };
    let kernel = spec.kernel2()?;
    let q = cycle.len();
    let mut visited = vec![false; q];
    let mut p = cycle[0];
    let mut product = Mat2::IDENTITY;
    for step in 0..q {
        let nearest = (0..q).map(|j| (j, torus_distance(p, cycle[j]))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if nearest.1 > 1e-9 || visited[nearest.0] {
            return Err(Error::NonInvariantCycle { index: step, distance: nearest.1 });
        }
        visited[nearest.0] = true;
        let g = kernel.eval(&crate::dynamics::BasePoint::Torus(p.0, p.1))?;
        product = g.mul(&product);
        p = map.apply(p);
    }
    let back = torus_distance(p, cycle[0]);
    if back > 1e-9 {
        return Err(Error::NonInvariantCycle { index: q, distance: back });
    }
    Ok(product.spectral_radius().ln() / q as f64)
}

/// Options for [`furstenberg_check`].
#[derive(Clone, Copy, Debug)]
pub struct FurstenbergOptions {
    /// Length of the random words and of the χ⁺ run.
    pub steps: u64,
    /// Maximum word length for the invariant-line search.
    pub depth: usize,
    pub seed: u64,
    /// Requested half-width of the χ⁺ confidence interval.
    pub tolerance: f64,
}

impl Default for FurstenbergOptions {
    fn default() -> Self {
        FurstenbergOptions { steps: 100_000, depth: 3, seed: 1, tolerance: 0.005 }
    }
}

/// Noncompactness threshold on `max log ‖word‖`.
pub const NONCOMPACT_THRESHOLD: f64 = std::f64::consts::LN_10;
pub const LINE_TOLERANCE: f64 = 1e-8;
const RANDOM_WORDS: u64 = 8;
const MAX_SEARCH_WORDS: usize = 20_000;

#[derive(Clone, Debug, Serialize)]
pub struct FurstenbergVerdict {
    pub noncompact: bool,
    /// Largest `log ‖word‖` seen along the random words.
    pub norm_growth: f64,
    pub no_invariant_lines: bool,
    /// Smallest invariance residual over candidate line sets (radians);
    /// infinite when no candidate direction exists.
    pub line_residual: f64,
    pub candidate_directions: usize,
    pub chi_plus: f64,
    pub chi_plus_stderr: f64,
    pub ci_half_width: f64,
    pub converged: bool,
}

impl FurstenbergVerdict {
    pub fn hypotheses_hold(&self) -> bool {
        self.noncompact && self.no_invariant_lines
    }
}

fn line_angle(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0]).rem_euclid(std::f64::consts::PI)
}

fn line_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

fn image_angle(m: &Mat2, theta: f64) -> f64 {
    line_angle(m.apply([theta.cos(), theta.sin()]))
}

/// Real eigendirections of `m`, or none for scalar matrices and elliptic words.
fn eigen_directions(m: &Mat2) -> Vec<f64> {
    let scale = m.frobenius_sq().sqrt();
    if m.b.abs() <= 1e-12 * scale && m.c.abs() <= 1e-12 * scale && (m.a - m.d).abs() <= 1e-12 * scale {
        return Vec::new();
    }
    let Some((l1, l2)) = m.real_eigenvalues() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for l in [l1, l2] {
        let v1 = [m.b, l - m.a];
        let v2 = [l - m.d, m.c];
        let n1 = v1[0].hypot(v1[1]);
        let n2 = v2[0].hypot(v2[1]);
        let v = if n1 >= n2 { v1 } else { v2 };
        if v[0].hypot(v[1]) > 0.0 {
            out.push(line_angle(v));
        }
    }
    out
}

fn words_up_to(gens: &[Mat2], depth: usize) -> Vec<Mat2> {
    let mut all = Vec::new();
    let mut layer = vec![Mat2::IDENTITY];
    for _ in 0..depth {
        if all.len() + layer.len() * gens.len() > MAX_SEARCH_WORDS {
            break;
        }
        layer = layer.iter().flat_map(|w| gens.iter().map(move |g| g.mul(w))).collect();
        all.extend_from_slice(&layer);
    }
    all
}

/// Invariance residual of a set of lines under all generators.
fn set_residual(gens: &[Mat2], set: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for g in gens {
        for &l in set {
            let img = image_angle(g, l);
            let best = set.iter().map(|&m| line_distance(img, m)).fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
    }
    worst
}

/// Numerical evidence for the two hypotheses of Furstenberg's positivity
/// theorem (noncompact group, no invariant set of one or two lines), plus
/// an estimate of the top exponent χ⁺ of the i.i.d. product with law `p`.
///
/// Any finite invariant set of at most two lines is fixed by every squared
/// word, so its lines are eigendirections of words; the search therefore
/// only tests sets drawn from the eigendirections of words up to `depth`.
pub fn furstenberg_check(matrices: &[Mat2], p: &[f64], opts: FurstenbergOptions) -> Result<FurstenbergVerdict> {
    if matrices.is_empty() || matrices.len() != p.len() {
        return Err(invalid("need one probability per matrix"));
    }
    for m in matrices {
        if (m.det().abs() - 1.0).abs() > 1e-8 {
            return Err(invalid(format!("matrix {m:?} is not normalized to |det| = 1")));
        }
    }
    let spec = CocycleSpec::random_product(matrices.iter().map(|&m| m.into()).collect(), p.to_vec())?;

    // (a) norm growth along random words.
    let mut norm_growth: f64 = 0.0;
    for w in 0..RANDOM_WORDS {
        let mut driver = spec.default_driver(derive_seed(opts.seed, w))?;
        let kernel = spec.kernel2()?;
        let mut state = ProductState::<Mat2>::new(2);
        for _ in 0..opts.steps {
            state.advance(&kernel.eval(&driver.next_point())?)?;
            norm_growth = norm_growth.max(state.log_norm());
        }
    }

    // (b) invariant line sets among eigendirections of short words.
    let mut dirs: Vec<f64> = words_up_to(matrices, opts.depth).iter().flat_map(eigen_directions).collect();
    dirs.sort_by(f64::total_cmp);
    dirs.dedup_by(|a, b| line_distance(*a, *b) <= 1e-10);
    let mut best = f64::INFINITY;
    for i in 0..dirs.len() {
        best = best.min(set_residual(matrices, &[dirs[i]]));
        for j in (i + 1)..dirs.len() {
            if best <= LINE_TOLERANCE {
                break;
            }
            best = best.min(set_residual(matrices, &[dirs[i], dirs[j]]));
        }
        if best <= LINE_TOLERANCE {
            break;
        }
    }

    // (c) χ⁺.
    let steps = opts.steps.max(MIN_STEPS);
    let mut driver = spec.default_driver(opts.seed)?;
    let report = top_exponent(&spec, &mut driver, steps)?;
    let half = 1.96 * report.top_stderr();
    Ok(FurstenbergVerdict {
        noncompact: norm_growth > NONCOMPACT_THRESHOLD,
        norm_growth,
        no_invariant_lines: best > LINE_TOLERANCE,
        line_residual: best,
        candidate_directions: dirs.len(),
        chi_plus: report.top(),
        chi_plus_stderr: report.top_stderr(),
        ci_half_width: half,
        converged: half <= opts.tolerance,
    })
}

/// One named cocycle from the built-in SL(2) / PGL(2) catalogue.
#[derive(Clone, Debug)]
pub struct BuiltinSpec {
    pub name: &'static str,
    pub spec: CocycleSpec,
}

pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;

/// The built-in 2×2 cocycles with `|det| = 1`.
pub fn builtin_sl2_specs() -> Vec<BuiltinSpec> {
    let pos = [Mat2::new(2.0, 1.0, 1.0, 1.0), Mat2::new(1.0, 1.0, 1.0, 2.0)];
    vec![
        BuiltinSpec { name: "constant-cat", spec: CocycleSpec::constant2(Mat2::new(2.0, 1.0, 1.0, 1.0)) },
        BuiltinSpec { name: "constant-diag3", spec: CocycleSpec::constant2(Mat2::diag(3.0, 1.0 / 3.0)) },
        BuiltinSpec { name: "constant-rotation", spec: CocycleSpec::constant2(Mat2::rotation(0.7)) },
        BuiltinSpec { name: "random-positive", spec: CocycleSpec::random_uniform2(&pos).expect("valid") },
        BuiltinSpec {
            name: "random-rotations",
            spec: CocycleSpec::random_uniform2(&[Mat2::rotation(1.0), Mat2::rotation(2f64.sqrt())]).expect("valid"),
        },
        BuiltinSpec { name: "barycentric", spec: CocycleSpec::Barycentric },
        BuiltinSpec { name: "schrodinger-critical-e0", spec: CocycleSpec::schrodinger(0.0, GOLDEN_MEAN) },
        BuiltinSpec { name: "schrodinger-critical-e5", spec: CocycleSpec::schrodinger(5.0, GOLDEN_MEAN) },
        BuiltinSpec {
            name: "schrodinger-supercritical-e0",
            spec: CocycleSpec::Schrodinger { energy: 0.0, coupling: 3.0, alpha: GOLDEN_MEAN },
        },
        BuiltinSpec { name: "toral-eps0", spec: CocycleSpec::ToralDerivative { epsilon: 0.0 } },
        BuiltinSpec { name: "toral-eps0.05", spec: CocycleSpec::ToralDerivative { epsilon: 0.05 } },
    ]
}

/// Convenience: QR spectrum and top exponent of a spec on its default driver.
pub fn estimate_pair(spec: &CocycleSpec, seed: u64, n: u64) -> Result<(ExponentReport, ExponentReport)> {
    let top = top_exponent(spec, &mut spec.default_driver(seed)?, n)?;
    let qr = spectrum_qr(spec, &mut spec.default_driver(seed)?, n)?;
    Ok((top, qr))
}

/// Bernoulli helper for callers that hold raw matrices.
pub fn random_product_driver(p: &[f64], seed: u64) -> Result<OrbitDriver> {
    Ok(OrbitDriver::Bernoulli(BernoulliDriver::new(p, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ToralDriver, ToralMap};

    const LOG_CAT: f64 = 0.962_423_650_119_206_9;

    #[test]
    fn constant_diagonal_top_exponent() {
        let spec = CocycleSpec::constant2(Mat2::diag(3.0, 1.0 / 3.0));
        let r = top_exponent(&spec, &mut OrbitDriver::Fixed, 1000).unwrap();
        assert!((r.top() - 3f64.ln()).abs() < 1e-10);
        assert_eq!(r.stderr, vec![0.0]);
        assert_eq!(r.trace.len(), BATCHES);
    }

    #[test]
    fn identity_top_exponent_is_zero() {
        let spec = CocycleSpec::constant2(Mat2::IDENTITY);
        let r = top_exponent(&spec, &mut OrbitDriver::Fixed, 1000).unwrap();
        assert_eq!(r.top(), 0.0);
    }

    #[test]
    fn toral_eps0_top_exponent() {
        let spec = CocycleSpec::ToralDerivative { epsilon: 0.0 };
        let r = top_exponent(&spec, &mut spec.default_driver(3).unwrap(), 1000).unwrap();
        assert!((r.top() - LOG_CAT).abs() < 1e-8, "{}", r.top());
    }

    #[test]
    fn too_few_steps_rejected() {
        let spec = CocycleSpec::constant2(Mat2::IDENTITY);
        assert!(top_exponent(&spec, &mut OrbitDriver::Fixed, 999).is_err());
    }

    #[test]
    fn diagonal_spectrum() {
        let spec = CocycleSpec::constant2(Mat2::diag(2.0, 0.5));
        let r = spectrum_qr(&spec, &mut OrbitDriver::Fixed, 1000).unwrap();
        assert_eq!(r.multiplicities, vec![1, 1]);
        assert!((r.exponents[0] - 2f64.ln()).abs() < 1e-12);
        assert!((r.exponents[1] + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn three_dim_spectrum_with_multiplicity() {
        let spec = CocycleSpec::constant(MatD::from_diag(&[2.0, 2.0, 0.25])).unwrap();
        let r = spectrum_qr(&spec, &mut OrbitDriver::Fixed, 1000).unwrap();
        assert_eq!(r.multiplicities, vec![2, 1]);
        assert!((r.exponents[0] - 2f64.ln()).abs() < 1e-12);
        assert!((r.weighted_sum() - (4f64.ln() + 0.25f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn sl2_spectra_sum_to_zero() {
        for b in builtin_sl2_specs() {
            let r = spectrum_qr(&b.spec, &mut b.spec.default_driver(5).unwrap(), 20_000).unwrap();
            assert!(r.weighted_sum().abs() < 1e-6, "{}: {:?}", b.name, r.exponents);
            assert_eq!(r.multiplicities.iter().sum::<usize>(), 2);
        }
    }

    #[test]
    fn rank_collapse_reported() {
        let spec = CocycleSpec::Constant { matrix: Mat2::new(1.0, 1.0, 1.0, 1.0).into() };
        assert!(matches!(spectrum_qr(&spec, &mut OrbitDriver::Fixed, 1000), Err(Error::RankCollapse { .. })));
    }

    #[test]
    fn spectral_and_frobenius_agree() {
        let spec = CocycleSpec::Barycentric;
        let n = 100_000;
        let a = top_exponent_with_norm(&spec, &mut spec.default_driver(1).unwrap(), n, NormKind::Spectral).unwrap();
        let b = top_exponent_with_norm(&spec, &mut spec.default_driver(1).unwrap(), n, NormKind::Frobenius).unwrap();
        assert!((a.top() - b.top()).abs() <= 1e-4);
        assert!((a.top() - b.top()).abs() <= 2f64.sqrt().ln() * 2.0 / n as f64 + 1e-12);
    }

    #[test]
    fn periodic_orbit_examples() {
        let fixed = [(0.0, 0.0)];
        let cycle = [(0.5, 0.5), (0.0, 0.5), (0.5, 0.0)];
        let s0 = CocycleSpec::ToralDerivative { epsilon: 0.0 };
        assert!((periodic_orbit_exponent(&s0, &fixed).unwrap() - LOG_CAT).abs() < 1e-12);
        assert!((periodic_orbit_exponent(&s0, &cycle).unwrap() - LOG_CAT).abs() < 1e-12);

        // Frozen from an independent numpy eigenvalue computation of
        // D(0,0) and D(0,½)·D(½,0)·D(½,½) at ε = 0.05.
        let s = CocycleSpec::ToralDerivative { epsilon: 0.05 };
        let a = periodic_orbit_exponent(&s, &fixed).unwrap();
        let b = periodic_orbit_exponent(&s, &cycle).unwrap();
        assert!((a - 1.091_389_470_145_339).abs() < 1e-12, "{a}");
        assert!((b - 0.906_124_732_281_336).abs() < 1e-12, "{b}");
        assert!((a - b).abs() > 1e-9);
    }

    #[test]
    fn non_invariant_cycle_rejected() {
        let s = CocycleSpec::ToralDerivative { epsilon: 0.05 };
        assert!(matches!(periodic_orbit_exponent(&s, &[(0.1, 0.2), (0.3, 0.4)]), Err(Error::NonInvariantCycle { .. })));
        assert!(periodic_orbit_exponent(&CocycleSpec::Barycentric, &[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn furstenberg_rotations_compact() {
        let gens = [Mat2::rotation(1.0), Mat2::rotation(2f64.sqrt())];
        let opts = FurstenbergOptions { steps: 20_000, ..Default::default() };
        let v = furstenberg_check(&gens, &[0.5, 0.5], opts).unwrap();
        assert!(!v.noncompact);
        assert!(v.chi_plus.abs() < 1e-6);
        assert_eq!(v.candidate_directions, 0);
    }

    #[test]
    fn furstenberg_single_hyperbolic_has_invariant_lines() {
        // Two copies of the cat matrix: a one-matrix group.
        let cat = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let opts = FurstenbergOptions { steps: 5_000, ..Default::default() };
        let v = furstenberg_check(&[cat, cat], &[0.5, 0.5], opts).unwrap();
        assert!(v.noncompact);
        assert!(!v.no_invariant_lines);
        assert!(v.chi_plus > 0.9);
        // The eigenlines: slopes (√5 − 1)/2 and −(√5 + 1)/2.
        let u = (0.5 * (5f64.sqrt() - 1.0)).atan();
        assert!(set_residual(&[cat], &[u]) < 1e-12);
    }

    #[test]
    fn furstenberg_rejects_unnormalized() {
        assert!(furstenberg_check(&[Mat2::diag(2.0, 2.0)], &[1.0], FurstenbergOptions::default()).is_err());
    }

    #[test]
    fn toral_driver_from_fixed_start() {
        let spec = CocycleSpec::ToralDerivative { epsilon: 0.0 };
        let mut d = OrbitDriver::Toral(ToralDriver::new(ToralMap::Perturbed { epsilon: 0.0 }, (0.0, 0.0)));
        let r = top_exponent(&spec, &mut d, 1000).unwrap();
        assert!((r.top() - LOG_CAT).abs() < 1e-8);
    }
}
