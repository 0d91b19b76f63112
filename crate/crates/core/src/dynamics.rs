//! Base dynamics: circle rotations, Bernoulli shifts and toral maps as
//! seedable orbit generators, plus Birkhoff averaging.
//!
//! Random symbols come from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64`; the stream is identical on every platform.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// `frac(x0 + n·alpha)` without accumulating error: the rounding residual of
/// the product is recovered with an FMA and added back after reduction.
#[inline]
pub fn rotation_phase(x0: f64, alpha: f64, n: u64) -> f64 {
    let nf = n as f64;
    let prod = nf * alpha;
    let err = nf.mul_add(alpha, -prod);
    let base = frac(prod);
    frac(frac(base + x0) + err)
}

/// A point of the base space fed to a cocycle generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BasePoint {
    /// The base is irrelevant (constant cocycle).
    Trivial,
    /// Phase on the circle `[0, 1)`.
    Phase(f64),
    /// Symbol in `1..=k`.
    Symbol(usize),
    /// Point of the 2-torus.
    Torus(f64, f64),
}

impl BasePoint {
    pub fn kind(&self) -> &'static str {
        match self {
            BasePoint::Trivial => "trivial",
            BasePoint::Phase(_) => "phase",
            BasePoint::Symbol(_) => "symbol",
            BasePoint::Torus(..) => "torus",
        }
    }
}

/// Circle rotation `x ↦ x + α (mod 1)`.
#[derive(Clone, Debug)]
pub struct RotationDriver {
    alpha: f64,
    x0: f64,
    step: u64,
}

impl RotationDriver {
    pub fn new(alpha: f64, x0: f64) -> Result<Self> {
        if !alpha.is_finite() || !x0.is_finite() {
            return Err(invalid("rotation parameters must be finite"));
        }
        Ok(RotationDriver { alpha: frac(alpha), x0: frac(x0), step: 0 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phase(&self) -> f64 {
        rotation_phase(self.x0, self.alpha, self.step)
    }

    /// Returns the current phase and advances by one rotation.
    pub fn step(&mut self) -> f64 {
        let x = self.phase();
        self.step += 1;
        x
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

/// Bernoulli shift: i.i.d. symbols in `1..=k` with law `p`.
#[derive(Clone, Debug)]
pub struct BernoulliDriver {
    cumulative: Vec<f64>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl BernoulliDriver {
    pub fn new(p: &[f64], seed: u64) -> Result<Self> {
        if p.len() < 2 {
            return Err(invalid("Bernoulli alphabet needs at least 2 symbols"));
        }
        if p.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(invalid("Bernoulli probabilities must lie in (0, 1)"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("Bernoulli probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = p
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Ok(BernoulliDriver { cumulative, seed, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn uniform(k: usize, seed: u64) -> Result<Self> {
        BernoulliDriver::new(&vec![1.0 / k as f64; k], seed)
    }

    pub fn alphabet(&self) -> usize {
        self.cumulative.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next symbol, 1-based.
    #[inline]
    pub fn next_symbol(&mut self) -> usize {
        let u: f64 = self.rng.gen();
        let k = self.cumulative.len();
        // The last symbol absorbs any rounding slack in the cumulative sums.
        self.cumulative[..k - 1].iter().position(|&c| u < c).unwrap_or(k - 1) + 1
    }
}

/// The map driving a [`ToralDriver`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ToralMap {
    /// Integer matrix with determinant 1.
    Linear([[i64; 2]; 2]),
    /// `(x, y) ↦ (2x + y + ε sin(2π(x + y)), x + y)`.
    Perturbed { epsilon: f64 },
}

impl ToralMap {
    pub const CAT: [[i64; 2]; 2] = [[2, 1], [1, 1]];

    pub fn linear(m: [[i64; 2]; 2]) -> Result<Self> {
        if m[0][0] * m[1][1] - m[0][1] * m[1][0] != 1 {
            return Err(invalid("toral automorphism must have determinant 1"));
        }
        Ok(ToralMap::Linear(m))
    }

    #[inline]
    pub fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        match *self {
            ToralMap::Linear(m) => {
                (frac(m[0][0] as f64 * x + m[0][1] as f64 * y), frac(m[1][0] as f64 * x + m[1][1] as f64 * y))
            }
            ToralMap::Perturbed { epsilon } => {
                let s = x + y;
                (frac(2.0 * x + y + epsilon * (TAU * s).sin()), frac(s))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToralDriver {
    map: ToralMap,
    point: (f64, f64),
}

impl ToralDriver {
    pub fn new(map: ToralMap, point: (f64, f64)) -> Self {
        ToralDriver { map, point: (frac(point.0), frac(point.1)) }
    }

    /// Start point drawn uniformly from the torus with the given seed.
    pub fn seeded(map: ToralMap, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = (rng.gen::<f64>(), rng.gen::<f64>());
        ToralDriver::new(map, p)
    }

    pub fn point(&self) -> (f64, f64) {
        self.point
    }

    pub fn map(&self) -> ToralMap {
        self.map
    }

    /// Returns the current point and applies the map.
    pub fn step(&mut self) -> (f64, f64) {
        let p = self.point;
        self.point = self.map.apply(p);
        p
    }
}

/// Any base system; cloning yields an independent copy of the state.
#[derive(Clone, Debug)]
pub enum OrbitDriver {
    Fixed,
    Rotation(RotationDriver),
    Bernoulli(BernoulliDriver),
    Toral(ToralDriver),
}

impl OrbitDriver {
    #[inline]
    pub fn next_point(&mut self) -> BasePoint {
        match self {
            OrbitDriver::Fixed => BasePoint::Trivial,
            OrbitDriver::Rotation(d) => BasePoint::Phase(d.step()),
            OrbitDriver::Bernoulli(d) => BasePoint::Symbol(d.next_symbol()),
            OrbitDriver::Toral(d) => {
                let (x, y) = d.step();
                BasePoint::Torus(x, y)
            }
        }
    }
}

impl Iterator for OrbitDriver {
    type Item = BasePoint;
    fn next(&mut self) -> Option<BasePoint> {
        Some(self.next_point())
    }
}

/// `(1/n) Σ observable` over the first `n` orbit points.
pub fn birkhoff_average<F>(driver: &mut OrbitDriver, observable: F, n: u64) -> Result<f64>
where
    F: Fn(&BasePoint) -> f64,
{
    if n == 0 {
        return Err(invalid("Birkhoff average needs n ≥ 1"));
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for _ in 0..n {
        // Kahan summation keeps 10⁶-term averages at the 1e-16 level.
        let y = observable(&driver.next_point()) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok(sum / n as f64)
}

/// Splitmix64 finalizer; derives per-task seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    #[test]
    fn rotation_examples() {
        let mut d = RotationDriver::new(0.0, 0.3).unwrap();
        assert!((0..10).all(|_| d.step() == 0.3));

        let mut d = RotationDriver::new(0.5, 0.0).unwrap();
        let orbit: Vec<f64> = (0..4).map(|_| d.step()).collect();
        assert_eq!(orbit, vec![0.0, 0.5, 0.0, 0.5]);

        let mut d = RotationDriver::new(GOLDEN, 0.0).unwrap();
        let first: Vec<f64> = (0..3).map(|_| d.step()).collect();
        assert_eq!(first[0], 0.0);
        assert!((first[1] - 0.618_033_988_7).abs() < 1e-10);
        assert!((first[2] - 0.236_067_977_5).abs() < 1e-10);
    }

    /// Exact `frac(x0 + n·alpha)` for dyadic doubles via 128-bit integers.
    fn exact_phase(x0: f64, alpha: f64, n: u64) -> f64 {
        const SHIFT: u32 = 60;
        let scale = (1u128 << SHIFT) as f64;
        let a = (alpha * scale) as u128;
        let x = (x0 * scale) as u128;
        assert_eq!(a as f64, alpha * scale, "alpha must be representable at 2^-60");
        let mask = (1u128 << SHIFT) - 1;
        let total = (a.wrapping_mul(n as u128) + x) & mask;
        total as f64 / scale
    }

    #[test]
    fn rotation_phase_does_not_drift() {
        let alpha = GOLDEN;
        let x0 = 0.125;
        for &n in &[1u64, 7, 1_000, 123_456_789, 99_999_999, 100_000_000] {
            let got = rotation_phase(x0, alpha, n);
            let want = exact_phase(x0, alpha, n);
            let diff = (got - want).abs().min(1.0 - (got - want).abs());
            assert!(diff <= 1e-9, "n = {n}: {got} vs {want}");
        }
    }

    #[test]
    fn bernoulli_near_degenerate_law() {
        let mut d = BernoulliDriver::new(&[1.0 - 1e-9, 1e-9], 3).unwrap();
        let n = 1_000_000;
        let ones = (0..n).filter(|_| d.next_symbol() == 1).count();
        assert!(ones as f64 / n as f64 >= 1.0 - 1e-6);
    }

    #[test]
    fn bernoulli_uniform_frequencies() {
        let mut d = BernoulliDriver::uniform(6, 11).unwrap();
        let n = 1_000_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            counts[d.next_symbol() - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.005);
        }
    }

    #[test]
    fn bernoulli_is_deterministic_per_seed() {
        let mut a = BernoulliDriver::uniform(6, 42).unwrap();
        let mut b = BernoulliDriver::uniform(6, 42).unwrap();
        let mut c = BernoulliDriver::uniform(6, 43).unwrap();
        let sa: Vec<usize> = (0..10_000).map(|_| a.next_symbol()).collect();
        let sb: Vec<usize> = (0..10_000).map(|_| b.next_symbol()).collect();
        let sc: Vec<usize> = (0..10_000).map(|_| c.next_symbol()).collect();
        assert_eq!(sa, sb);
        assert_ne!(sa, sc);
    }

    #[test]
    fn bernoulli_rejects_bad_vectors() {
        assert!(BernoulliDriver::new(&[1.0, 0.0], 0).is_err());
        assert!(BernoulliDriver::new(&[1.0], 0).is_err());
        assert!(BernoulliDriver::new(&[0.5, 0.6], 0).is_err());
    }

    #[test]
    fn toral_examples() {
        let mut d = ToralDriver::new(ToralMap::Perturbed { epsilon: 0.0 }, (0.0, 0.0));
        assert!((0..5).all(|_| d.step() == (0.0, 0.0)));

        let mut d = ToralDriver::new(ToralMap::linear(ToralMap::CAT).unwrap(), (0.25, 0.5));
        assert_eq!(d.step(), (0.25, 0.5));
        assert_eq!(d.point(), (0.0, 0.75));
    }

    fn torus_dist(p: (f64, f64), q: (f64, f64)) -> f64 {
        let d = |a: f64, b: f64| {
            let t = (a - b).abs();
            t.min(1.0 - t)
        };
        d(p.0, q.0).max(d(p.1, q.1))
    }

    #[test]
    fn three_cycle_is_invariant_under_perturbation() {
        let map = ToralMap::Perturbed { epsilon: 0.05 };
        let cycle = [(0.5, 0.5), (0.0, 0.5), (0.5, 0.0)];
        for &p in &cycle {
            let img = map.apply(p);
            let best = cycle.iter().map(|&q| torus_dist(img, q)).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "{p:?} ↦ {img:?}");
        }
    }

    #[test]
    fn linear_step_twice_equals_squared_matrix() {
        let cat = ToralMap::linear(ToralMap::CAT).unwrap();
        let sq = ToralMap::Linear([[5, 3], [3, 2]]);
        let perturbed_zero = ToralMap::Perturbed { epsilon: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = (rng.gen::<f64>(), rng.gen::<f64>());
            let twice = cat.apply(cat.apply(p));
            assert!(torus_dist(twice, sq.apply(p)) < 1e-12);
            assert!(torus_dist(perturbed_zero.apply(p), cat.apply(p)) < 1e-12);
        }
    }

    #[test]
    fn birkhoff_examples() {
        let mut d = OrbitDriver::Rotation(RotationDriver::new(GOLDEN, 0.2).unwrap());
        assert_eq!(birkhoff_average(&mut d, |_| 1.0, 1000).unwrap(), 1.0);

        let cos = |p: &BasePoint| match p {
            BasePoint::Phase(x) => (TAU * x).cos(),
            _ => unreachable!(),
        };
        let mut d = OrbitDriver::Rotation(RotationDriver::new(GOLDEN, 0.0).unwrap());
        assert!(birkhoff_average(&mut d, cos, 1_000_000).unwrap().abs() <= 1e-3);

        let mut d = OrbitDriver::Rotation(RotationDriver::new(0.0, 0.0).unwrap());
        assert_eq!(birkhoff_average(&mut d, cos, 1000).unwrap(), 1.0);

        assert!(birkhoff_average(&mut d, cos, 0).is_err());
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
