//! Random barycentric subdivision, computed twice: once with explicit plane
//! geometry and once through the six-matrix cocycle acting on marked
//! triangle shapes in the upper half-plane.
//!
//! # Labeling
//!
//! A marked triangle `(a, b, c)` has shape `z = (c − a)/(b − a)` (conjugated
//! into the upper half-plane if needed). Its child with label `j` is the
//! marked triangle `(v, m, g)` where `g` is the centroid and:
//!
//! | label | generator | child            |
//! |-------|-----------|------------------|
//! | 1     | B         | (a, mid(ab), g)  |
//! | 2     | B·P₁      | (c, mid(cb), g)  |
//! | 3     | B·P₂      | (a, mid(ac), g)  |
//! | 4     | B·P₃      | (b, mid(ba), g)  |
//! | 5     | B·P₄      | (b, mid(bc), g)  |
//! | 6     | B·P₅      | (c, mid(ca), g)  |
//!
//! With this table the shape of child `j` is the projective image of the
//! parent's shape under generator `j` of [`barycentric_generators`]. Going
//! around the centroid the labels read 1, 4, 5, 2, 6, 3.
//!
//! # Chart height
//!
//! `Im z = 2·area/|ab|²` is the "chart height" of a marked triangle. Starting
//! from the right isosceles triangle `(0,0), (1,0), (0,1)` (shape `i`), the
//! chart height after the symbols `ω₁ … ωₙ` equals `‖(0,1)·A⁽ⁿ⁾(ω)‖⁻²`
//! exactly. The aspect ratio `area/L²` differs from it by the factor
//! `|ab|²/(2L²)`, which grows subexponentially and so leaves the rate alone.

use std::io::Write;

use serde::Serialize;

use crate::cocycle::{barycentric_generators, ProductState};
use crate::dynamics::BernoulliDriver;
use crate::error::{invalid, Error, Result};
use crate::exponents::BATCHES;
use crate::matrix::{HalfPlanePoint, Mat2};

pub type Point = [f64; 2];

pub const EQUILATERAL_ASPECT: f64 = 0.433_012_701_892_219_3;

fn sub(p: Point, q: Point) -> Point {
    [p[0] - q[0], p[1] - q[1]]
}

fn mid(p: Point, q: Point) -> Point {
    [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
}

fn centroid(p: Point, q: Point, r: Point) -> Point {
    [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
}

fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn cross(u: Point, v: Point) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

/// Vertex index and midpoint endpoints for each label (0-based vertices).
const CHILD_TABLE: [(usize, usize); 6] = [(0, 1), (2, 1), (0, 2), (1, 0), (1, 2), (2, 0)];

/// A marked triangle in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Triangle {
    pub a: Point,
    pub b: Point,
    pub c: Point,
}

impl Triangle {
    pub fn new(a: Point, b: Point, c: Point) -> Result<Self> {
        let t = Triangle { a, b, c };
        let diam = t.longest_side();
        let area = t.signed_area().abs();
        if !(area > 1e-300 * diam * diam) || !area.is_finite() {
            return Err(Error::DegenerateTriangle { aspect: if diam > 0.0 { area / (diam * diam) } else { 0.0 } });
        }
        Ok(t)
    }

    pub fn equilateral() -> Self {
        Triangle { a: [0.0, 0.0], b: [1.0, 0.0], c: [0.5, 3f64.sqrt() / 2.0] }
    }

    /// Shape `i` in the half-plane chart.
    pub fn right_isosceles() -> Self {
        Triangle { a: [0.0, 0.0], b: [1.0, 0.0], c: [0.0, 1.0] }
    }

    pub fn vertices(&self) -> [Point; 3] {
        [self.a, self.b, self.c]
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * cross(sub(self.b, self.a), sub(self.c, self.a))
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn longest_side(&self) -> f64 {
        dist(self.a, self.b).max(dist(self.b, self.c)).max(dist(self.c, self.a))
    }

    /// `2·area/|ab|²`, the imaginary part of the chart point.
    pub fn chart_height(&self) -> f64 {
        let ab = dist(self.a, self.b);
        2.0 * self.area() / (ab * ab)
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Triangle {
        Triangle { a: f(self.a), b: f(self.b), c: f(self.c) }
    }
}

/// `area(T) / L(T)²` with `L` the longest side.
pub fn aspect_ratio(t: &Triangle) -> f64 {
    let l = t.longest_side();
    t.area() / (l * l)
}

/// The child of `t` with the given label (1…6); see the module table.
pub fn subdivide(t: &Triangle, label: usize) -> Result<Triangle> {
    if !(1..=6).contains(&label) {
        return Err(invalid(format!("label {label} not in 1..=6")));
    }
    let v = t.vertices();
    let (i, j) = CHILD_TABLE[label - 1];
    let child = Triangle { a: v[i], b: mid(v[i], v[j]), c: centroid(v[0], v[1], v[2]) };
    Triangle::new(child.a, child.b, child.c)
}

/// Similarity class of a marked triangle: `a ↦ 0`, `b ↦ 1`, `c ↦ z`, folded
/// into the upper half-plane by conjugation for clockwise triangles.
pub fn triangle_to_halfplane(t: &Triangle) -> Result<HalfPlanePoint> {
    let u = sub(t.b, t.a);
    let w = sub(t.c, t.a);
    let den = u[0] * u[0] + u[1] * u[1];
    if den == 0.0 {
        return Err(Error::DegenerateTriangle { aspect: 0.0 });
    }
    // w / u as complex numbers.
    let re = (w[0] * u[0] + w[1] * u[1]) / den;
    let im = cross(u, w) / den;
    if im == 0.0 || !im.is_finite() {
        return Err(Error::DegenerateTriangle { aspect: 0.0 });
    }
    HalfPlanePoint::new(re, im.abs())
}

/// A triangle held in a similarity-normalized frame: its longest side runs
/// from `(0,0)` to `(1,0)` and the third vertex sits at height `h > 0`.
///
/// Children are built from averages of the vertices, so vertex heights stay
/// nonnegative multiples of `h` and keep full relative precision; the
/// child's own height is taken from `area(child) = area(parent)/6`. The log
/// aspect ratio is carried separately so needle-like triangles far below
/// the double-precision range are still followed exactly.
#[derive(Clone, Copy, Debug)]
pub struct NormalizedTriangle {
    /// Vertices in marking order `(a, b, c)`.
    verts: [Point; 3],
    /// Height of the off-base vertex (may underflow to 0 for needles).
    height: f64,
    log_aspect: f64,
}

impl NormalizedTriangle {
    pub fn from_triangle(t: &Triangle) -> Result<Self> {
        let v = t.vertices();
        let l = t.longest_side();
        let area = t.area();
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { aspect: 0.0 });
        }
        let log_aspect = (area / (l * l)).ln();
        Ok(Self::place(v, 2.0 * area / (l * l), log_aspect))
    }

    /// Put the longest side of `v` on `[0,1]×{0}`; `height` is the already
    /// normalized height of the remaining vertex.
    fn place(v: [Point; 3], height: f64, log_aspect: f64) -> Self {
        let sides = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
        let (p, q, r) = *sides.iter().max_by(|x, y| dist(v[x.0], v[x.1]).total_cmp(&dist(v[y.0], v[y.1]))).unwrap();
        let d = sub(v[q], v[p]);
        let l2 = d[0] * d[0] + d[1] * d[1];
        let e = sub(v[r], v[p]);
        let x = (e[0] * d[0] + e[1] * d[1]) / l2;
        let mut verts = [[0.0; 2]; 3];
        verts[p] = [0.0, 0.0];
        verts[q] = [1.0, 0.0];
        verts[r] = [x, height];
        NormalizedTriangle { verts, height, log_aspect }
    }

    pub fn log_aspect(&self) -> f64 {
        self.log_aspect
    }

    /// `log(2·area/|ab|²)` in marking order.
    pub fn log_chart_height(&self) -> f64 {
        let ab = dist(self.verts[0], self.verts[1]);
        // area = aspect (longest side is 1).
        std::f64::consts::LN_2 + self.log_aspect - 2.0 * ab.ln()
    }

    pub fn to_triangle(&self) -> Triangle {
        Triangle { a: self.verts[0], b: self.verts[1], c: self.verts[2] }
    }

    /// Child with `label`; returns the increment of the log aspect ratio.
    pub fn subdivide(&mut self, label: usize) -> Result<f64> {
        if !(1..=6).contains(&label) {
            return Err(invalid(format!("label {label} not in 1..=6")));
        }
        let v = self.verts;
        let (i, j) = CHILD_TABLE[label - 1];
        let child = [v[i], mid(v[i], v[j]), centroid(v[0], v[1], v[2])];
        let longest = dist(child[0], child[1]).max(dist(child[1], child[2])).max(dist(child[2], child[0]));
        if !(longest > 0.0) || !longest.is_finite() {
            return Err(Error::DegenerateTriangle { aspect: self.log_aspect.exp() });
        }
        let step = -(6f64.ln()) - 2.0 * longest.ln();
        // Parent area h/2, child area h/12, rescaled by 1/ℓ²: new height h/(6ℓ²).
        let height = self.height / (6.0 * longest * longest);
        let scaled = child.map(|p| [p[0] / longest, p[1] / longest]);
        *self = Self::place(scaled, height, self.log_aspect + step);
        if !self.verts.iter().flatten().all(|x| x.is_finite()) {
            return Err(Error::DegenerateTriangle { aspect: self.log_aspect.exp() });
        }
        Ok(step)
    }
}

/// A random subdivision path with its symbol sequence and log-aspect trace.
#[derive(Clone, Debug)]
pub struct SubdivisionPath {
    seed: Triangle,
    symbols: Vec<u8>,
    current: NormalizedTriangle,
    log_aspect_trace: Vec<f64>,
}

impl SubdivisionPath {
    pub fn new(seed: Triangle) -> Result<Self> {
        let current = NormalizedTriangle::from_triangle(&seed)?;
        Ok(SubdivisionPath { seed, symbols: Vec::new(), current, log_aspect_trace: vec![current.log_aspect()] })
    }

    pub fn push(&mut self, label: usize) -> Result<()> {
        self.current.subdivide(label)?;
        self.symbols.push(label as u8);
        self.log_aspect_trace.push(self.current.log_aspect());
        Ok(())
    }

    pub fn seed(&self) -> &Triangle {
        &self.seed
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn current(&self) -> &NormalizedTriangle {
        &self.current
    }

    pub fn log_aspect_trace(&self) -> &[f64] {
        &self.log_aspect_trace
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarycentricEstimate {
    pub chi: f64,
    pub stderr: f64,
    pub steps: u64,
}

fn batch_estimate(increments_total: f64, batch_sums: &[(f64, u64)], n: u64) -> BarycentricEstimate {
    let chi = if n == 0 { 0.0 } else { increments_total / n as f64 };
    let rates: Vec<f64> = batch_sums.iter().filter(|(_, len)| *len > 0).map(|(s, len)| s / *len as f64).collect();
    let stderr = if rates.len() >= 2 {
        let m = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / m;
        (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    BarycentricEstimate { chi, stderr, steps: n }
}

fn batch_of(step: u64, n: u64) -> usize {
    // step in 0..n → batch in 0..BATCHES
    ((step as u128 * BATCHES as u128) / n.max(1) as u128) as usize
}

/// `−(1/2n) log(αₙ/α₀)` from explicit geometry along a uniform die stream.
pub fn chi_geometric(seed: &Triangle, n: u64, rng_seed: u64) -> Result<BarycentricEstimate> {
    let mut driver = BernoulliDriver::uniform(6, rng_seed)?;
    let mut tri = NormalizedTriangle::from_triangle(seed)?;
    let mut batches = vec![(0.0, 0u64); BATCHES];
    let mut total = 0.0;
    for step in 0..n {
        let inc = -0.5 * tri.subdivide(driver.next_symbol())?;
        total += inc;
        let b = &mut batches[batch_of(step, n)];
        b.0 += inc;
        b.1 += 1;
    }
    Ok(batch_estimate(total, &batches, n))
}

/// `(1/n) log ‖(0,1)·A⁽ⁿ⁾(ω)‖` along the same die stream.
pub fn chi_cocycle(n: u64, rng_seed: u64) -> Result<BarycentricEstimate> {
    let gens = barycentric_generators();
    let mut driver = BernoulliDriver::uniform(6, rng_seed)?;
    let mut state = ProductState::<Mat2>::new(2);
    let mut batches = vec![(0.0, 0u64); BATCHES];
    let mut prev = 0.0;
    for step in 0..n {
        state.advance(&gens[driver.next_symbol() - 1])?;
        let now = state.log_row_norm([0.0, 1.0]);
        let b = &mut batches[batch_of(step, n)];
        b.0 += now - prev;
        b.1 += 1;
        prev = now;
    }
    Ok(batch_estimate(prev, &batches, n))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarycentricRun {
    pub geometric: BarycentricEstimate,
    pub cocycle: BarycentricEstimate,
    pub difference: f64,
}

/// Both estimators on the same symbol stream; runs them as two parallel tasks.
pub fn run_barycentric(seed: &Triangle, n: u64, rng_seed: u64) -> Result<BarycentricRun> {
    let (g, c) = rayon::join(|| chi_geometric(seed, n, rng_seed), || chi_cocycle(n, rng_seed));
    let (geometric, cocycle) = (g?, c?);
    Ok(BarycentricRun { geometric, cocycle, difference: geometric.chi - cocycle.chi })
}

/// Chart heights of the path prefixes, computed geometrically and via the
/// cocycle: `(2·area/|ab|², ‖(0,1)·A⁽ᵏ⁾‖⁻²)` for `k = 0…len`, in log form.
pub fn pathwise_chart_heights(symbols: &[usize]) -> Result<Vec<(f64, f64)>> {
    let gens = barycentric_generators();
    let mut tri = NormalizedTriangle::from_triangle(&Triangle::right_isosceles())?;
    let mut state = ProductState::<Mat2>::new(2);
    let mut out = vec![(tri.log_chart_height(), -2.0 * state.log_row_norm([0.0, 1.0]))];
    for &s in symbols {
        tri.subdivide(s)?;
        let g = gens.get(s.wrapping_sub(1)).ok_or_else(|| invalid(format!("label {s}")))?;
        state.advance(g)?;
        out.push((tri.log_chart_height(), -2.0 * state.log_row_norm([0.0, 1.0])));
    }
    Ok(out)
}

/// Follow the child with the largest aspect ratio for `len` steps and return
/// the smallest aspect ratio met along the way.
pub fn fattest_path_min_aspect(seed: &Triangle, len: usize) -> Result<f64> {
    let mut t = *seed;
    let mut min = aspect_ratio(&t);
    for _ in 0..len {
        let mut best: Option<Triangle> = None;
        for label in 1..=6 {
            let c = subdivide(&t, label)?;
            if best.is_none_or(|b| aspect_ratio(&c) > aspect_ratio(&b)) {
                best = Some(c);
            }
        }
        let c = best.unwrap();
        // Rescale so the path never drifts toward underflow.
        let l = c.longest_side();
        t = c.map(|p| [(p[0] - c.a[0]) / l, (p[1] - c.a[1]) / l]);
        min = min.min(aspect_ratio(&t));
    }
    Ok(min)
}

/// CSV `step,log_aspect_ratio` every `every` steps (and at the end).
pub fn write_trace_csv<W: Write>(out: &mut W, seed: &Triangle, n: u64, rng_seed: u64, every: u64) -> Result<()> {
    let every = every.max(1);
    let mut driver = BernoulliDriver::uniform(6, rng_seed)?;
    let mut tri = NormalizedTriangle::from_triangle(seed)?;
    writeln!(out, "step,log_aspect_ratio")?;
    writeln!(out, "0,{}", tri.log_aspect())?;
    for step in 1..=n {
        tri.subdivide(driver.next_symbol())?;
        if step % every == 0 || step == n {
            writeln!(out, "{step},{}", tri.log_aspect())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::projective_apply;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent numpy simulation of the same process, 3 × 2·10⁶ steps.
    const CHI_REFERENCE: f64 = 0.0772;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn equilateral_children_have_sixth_area() {
        let t = Triangle::equilateral();
        for label in 1..=6 {
            let c = subdivide(&t, label).unwrap();
            assert!(close(c.area(), t.area() / 6.0, 1e-15));
        }
    }

    #[test]
    fn first_child_of_right_isosceles() {
        let c = subdivide(&Triangle::right_isosceles(), 1).unwrap();
        assert_eq!(c.a, [0.0, 0.0]);
        assert_eq!(c.b, [0.5, 0.0]);
        assert!(close(c.c[0], 1.0 / 3.0, 1e-15) && close(c.c[1], 1.0 / 3.0, 1e-15));
    }

    /// Point-in-triangle by signed areas, strictly inside.
    fn strictly_inside(t: &Triangle, p: Point) -> bool {
        let s1 = cross(sub(t.b, t.a), sub(p, t.a));
        let s2 = cross(sub(t.c, t.b), sub(p, t.b));
        let s3 = cross(sub(t.a, t.c), sub(p, t.c));
        (s1 > 1e-12 && s2 > 1e-12 && s3 > 1e-12) || (s1 < -1e-12 && s2 < -1e-12 && s3 < -1e-12)
    }

    #[test]
    fn children_tile_the_parent() {
        let t = Triangle::new([0.1, -0.3], [2.0, 0.4], [0.7, 1.9]).unwrap();
        let kids: Vec<Triangle> = (1..=6).map(|l| subdivide(&t, l).unwrap()).collect();
        let total: f64 = kids.iter().map(Triangle::area).sum();
        assert!(close(total, t.area(), 1e-12));
        // Centroid of each child lies inside it and in no other child.
        for (i, k) in kids.iter().enumerate() {
            let g = centroid(k.a, k.b, k.c);
            assert!(strictly_inside(k, g));
            assert!(strictly_inside(&t, g));
            for (j, other) in kids.iter().enumerate() {
                if i != j {
                    assert!(!strictly_inside(other, g));
                }
            }
        }
    }

    #[test]
    fn aspect_ratio_examples() {
        assert!(close(aspect_ratio(&Triangle::equilateral()), EQUILATERAL_ASPECT, 1e-15));
        assert!(close(aspect_ratio(&Triangle::right_isosceles()), 0.25, 1e-15));
        let t = Triangle::new([0.0, 0.0], [3.0, 0.5], [1.0, 2.0]).unwrap();
        let t2 = t.map(|p| [2.0 * p[0], 2.0 * p[1]]);
        assert!(close(aspect_ratio(&t), aspect_ratio(&t2), 1e-15));
    }

    #[test]
    fn aspect_ratio_bounded_by_equilateral() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let v: Vec<Point> = (0..3).map(|_| [rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0]).collect();
            if let Ok(t) = Triangle::new(v[0], v[1], v[2]) {
                let a = aspect_ratio(&t);
                assert!(a > 0.0 && a <= EQUILATERAL_ASPECT + 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_triangles_rejected() {
        assert!(Triangle::new([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]).is_err());
        assert!(Triangle::new([0.0, 0.0], [0.0, 0.0], [0.0, 0.0]).is_err());
        assert!(subdivide(&Triangle::equilateral(), 7).is_err());
        assert!(subdivide(&Triangle::equilateral(), 0).is_err());
    }

    #[test]
    fn chart_examples() {
        let z = triangle_to_halfplane(&Triangle::equilateral()).unwrap();
        assert!(close(z.re(), 0.5, 1e-15) && close(z.im(), 3f64.sqrt() / 2.0, 1e-15));
        let z = triangle_to_halfplane(&Triangle::right_isosceles()).unwrap();
        assert!(close(z.re(), 0.0, 1e-15) && close(z.im(), 1.0, 1e-15));

        let t = Triangle::new([0.3, 0.1], [1.7, -0.4], [0.9, 1.3]).unwrap();
        let z0 = triangle_to_halfplane(&t).unwrap();
        let (s, c) = 0.83f64.sin_cos();
        let moved = t.map(|p| [3.5 * (c * p[0] - s * p[1]) - 2.0, 3.5 * (s * p[0] + c * p[1]) + 7.0]);
        let reflected = t.map(|p| [p[0], -p[1]]);
        for u in [moved, reflected] {
            let z1 = triangle_to_halfplane(&u).unwrap();
            assert!(z0.distance_to(&z1) < 1e-12);
        }
    }

    #[test]
    fn chart_equivariance_pins_the_labeling() {
        let gens = barycentric_generators();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seeds = vec![Triangle::equilateral(), Triangle::right_isosceles()];
        for _ in 0..50 {
            let v: Vec<Point> = (0..3).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            if let Ok(t) = Triangle::new(v[0], v[1], v[2]) {
                seeds.push(t);
            }
        }
        for t in &seeds {
            let z = triangle_to_halfplane(t).unwrap();
            for j in 1..=6 {
                let lhs = triangle_to_halfplane(&subdivide(t, j).unwrap()).unwrap();
                let rhs = projective_apply(&gens[j - 1], z).unwrap();
                assert!(lhs.distance_to(&rhs) < 1e-9 * (1.0 + rhs.re().abs() + rhs.im()), "label {j}");
            }
        }
    }

    #[test]
    fn projective_action_is_a_homomorphism_on_generators() {
        let gens = barycentric_generators();
        let z = HalfPlanePoint::new(0.3, 0.8).unwrap();
        for g in &gens {
            for h in &gens {
                let two_step = projective_apply(g, projective_apply(h, z).unwrap()).unwrap();
                let once = projective_apply(&g.mul(h), z).unwrap();
                assert!(two_step.distance_to(&once) < 1e-10);
            }
        }
    }

    #[test]
    fn normalized_frame_tracks_plain_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut plain = Triangle::new([0.2, 0.1], [1.3, 0.0], [0.4, 0.9]).unwrap();
        let mut norm = NormalizedTriangle::from_triangle(&plain).unwrap();
        for _ in 0..15 {
            let label = rng.gen_range(1..=6);
            plain = subdivide(&plain, label).unwrap();
            norm.subdivide(label).unwrap();
            let want = aspect_ratio(&plain).ln();
            assert!(close(norm.log_aspect(), want, 1e-9), "{} vs {}", norm.log_aspect(), want);
            let want_h = plain.chart_height().ln();
            assert!(close(norm.log_chart_height(), want_h, 1e-9));
            let z1 = triangle_to_halfplane(&plain).unwrap();
            let z2 = triangle_to_halfplane(&norm.to_triangle()).unwrap();
            assert!(z1.distance_to(&z2) < 1e-9 * (1.0 + z1.re().abs()));
        }
    }

    #[test]
    fn pathwise_identity_short_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let symbols: Vec<usize> = (0..20).map(|_| rng.gen_range(1..=6)).collect();
            for (geo, coc) in pathwise_chart_heights(&symbols).unwrap() {
                // Relative 1e-9 on the heights = absolute 1e-9 on their logs.
                assert!(close(geo, coc, 1e-9), "{geo} vs {coc}");
            }
        }
    }

    #[test]
    fn one_step_values() {
        // Label-1 child of the right isosceles triangle has shape B(i) = 2/3 + 2i/3.
        let h = pathwise_chart_heights(&[1]).unwrap();
        assert!(close(h[1].0, (2.0f64 / 3.0).ln(), 1e-14));
        assert!(close(h[1].1, (2.0f64 / 3.0).ln(), 1e-14));
        // Geometric χ after one step: aspect 1/4 → 1/3.
        let mut path = SubdivisionPath::new(Triangle::right_isosceles()).unwrap();
        path.push(1).unwrap();
        let chi1 = -0.5 * (path.log_aspect_trace()[1] - path.log_aspect_trace()[0]);
        assert!(close(chi1, -0.5 * (4.0f64 / 3.0).ln(), 1e-14));
    }

    #[test]
    fn chi_cocycle_zero_steps() {
        assert_eq!(chi_cocycle(0, 1).unwrap().chi, 0.0);
    }

    #[test]
    fn estimators_agree_pathwise() {
        let n = 200_000;
        let run = run_barycentric(&Triangle::right_isosceles(), n, 9).unwrap();
        // Differ only by the factor 2L²/|ab|² at both ends.
        assert!(run.difference.abs() < 50.0 / n as f64, "{run:?}");
        assert!(close(run.cocycle.chi, CHI_REFERENCE, 0.005));
    }

    #[test]
    fn seed_triangle_does_not_matter() {
        let n = 1_000_000;
        let a = chi_geometric(&Triangle::equilateral(), n, 5).unwrap();
        let b = chi_geometric(&Triangle::new([0.0, 0.0], [1.0, 0.0], [0.9, 0.05]).unwrap(), n, 5).unwrap();
        assert!(close(a.chi, CHI_REFERENCE, 0.003));
        let comb = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
        assert!((a.chi - b.chi).abs() <= 2.0 * comb, "{a:?} {b:?}");
    }

    #[test]
    fn fattest_path_keeps_aspect_bounded() {
        let min = fattest_path_min_aspect(&Triangle::equilateral(), 20).unwrap();
        assert!(min >= 0.05, "{min}");
    }

    #[test]
    fn label_one_forever_degenerates() {
        // B(z) = 2(z+1)/3 pushes every shape to the boundary point 2.
        let mut path = SubdivisionPath::new(Triangle::equilateral()).unwrap();
        for _ in 0..20 {
            path.push(1).unwrap();
        }
        assert!(path.log_aspect_trace().last().unwrap().exp() < 0.01);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &Triangle::equilateral(), 100, 1, 10).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "step,log_aspect_ratio");
        assert_eq!(lines.len(), 12);
        assert!(lines[11].starts_with("100,"));
    }
}
