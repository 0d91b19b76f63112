//! Hofstadter butterfly rasters, slice measures, and PGM output.
//!
//! Pixel `(i, j)` of a `W × H` raster sits at energy
//! `E_i = E_min + i·(E_max − E_min)/(W − 1)` and frequency `α_j = j/(H − 1)`;
//! row `j` is written as line `j` of the image, so `α = 0` is the top line.
//! In Farey mode each row is classified at the fraction `p/q` (`q ≤ q_max`)
//! nearest to `α_j`, by the trace oracle; in irrational mode it is classified
//! at `α_j` itself by the growth test.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::CRITICAL_COUPLING;
use crate::error::{invalid, Result};
use crate::hyperbolicity::{
    energy_grid, slice_verdicts, Frequency, PixelVerdict, SliceMethod, SliceOptions, DEFAULT_N_MAX, DEFAULT_PHASES,
    DEFAULT_THETA,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowMode {
    Farey,
    Irrational,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ButterflyConfig {
    pub width: usize,
    pub height: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub q_max: u64,
    pub mode: RowMode,
    pub slice: SliceOptions,
}

impl Default for ButterflyConfig {
    fn default() -> Self {
        ButterflyConfig {
            width: 512,
            height: 512,
            e_min: -4.0,
            e_max: 4.0,
            q_max: 30,
            mode: RowMode::Farey,
            slice: SliceOptions {
                coupling: CRITICAL_COUPLING,
                n_max: DEFAULT_N_MAX,
                theta: DEFAULT_THETA,
                phases: DEFAULT_PHASES,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RowInfo {
    /// Nominal `α_j = j/(H − 1)`.
    pub alpha: f64,
    /// Frequency actually classified.
    pub frequency: Frequency,
    pub method: SliceMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ButterflyRaster {
    pub e_min: f64,
    pub e_max: f64,
    pub width: usize,
    pub height: usize,
    pub rows: Vec<RowInfo>,
    /// Row-major, `height` rows of `width` verdicts.
    #[serde(skip)]
    pub pixels: Vec<PixelVerdict>,
}

impl ButterflyRaster {
    pub fn row(&self, j: usize) -> &[PixelVerdict] {
        &self.pixels[j * self.width..(j + 1) * self.width]
    }

    pub fn get(&self, i: usize, j: usize) -> PixelVerdict {
        self.pixels[j * self.width + i]
    }

    pub fn energies(&self) -> Vec<f64> {
        energy_grid(self.e_min, self.e_max, self.width)
    }

    /// Fraction of pixels equal to their mirror image under `E → −E`.
    pub fn energy_symmetry(&self) -> f64 {
        let w = self.width;
        let same = (0..self.height)
            .flat_map(|j| (0..w).map(move |i| (i, j)))
            .filter(|&(i, j)| self.get(i, j) == self.get(w - 1 - i, j))
            .count();
        same as f64 / self.pixels.len().max(1) as f64
    }

    /// Fraction of pixels equal to their mirror image under `α → 1 − α`.
    pub fn frequency_symmetry(&self) -> f64 {
        let h = self.height;
        let same = (0..h)
            .flat_map(|j| (0..self.width).map(move |i| (i, j)))
            .filter(|&(i, j)| self.get(i, j) == self.get(i, h - 1 - j))
            .count();
        same as f64 / self.pixels.len().max(1) as f64
    }

    pub fn count(&self, v: PixelVerdict) -> usize {
        self.pixels.iter().filter(|&&p| p == v).count()
    }
}

/// Reduced fractions in `[0, 1]` with denominator at most `q_max`, ascending.
pub fn farey_sequence(q_max: u64) -> Vec<(u64, u64)> {
    if q_max == 0 {
        return Vec::new();
    }
    // Standard next-term recurrence.
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, q_max);
    let mut out = vec![(a, b)];
    while c <= q_max {
        let k = (q_max + b) / d;
        (a, b, c, d) = (c, d, k * c - a, k * d - b);
        out.push((a, b));
    }
    out
}

/// The fraction of `farey` nearest to `j/n` (exact integer comparison).
/// Ties go to the smaller denominator, then to the fraction nearer 1/2.
pub fn nearest_fraction(j: u64, n: u64, farey: &[(u64, u64)]) -> (u64, u64) {
    let n = n.max(1);
    // |j/n − p/q| = |jq − pn| / (nq); compare cross-multiplied.
    let key = |&(p, q): &(u64, u64)| {
        let num = (j as i128 * q as i128 - p as i128 * n as i128).unsigned_abs();
        (num, q as u128)
    };
    let pos = farey.partition_point(|&(p, q)| (p as u128) * (n as u128) < (j as u128) * (q as u128));
    let mut best: Option<(u64, u64)> = None;
    for &cand in farey.iter().skip(pos.saturating_sub(1)).take(2) {
        best = Some(match best {
            None => cand,
            Some(cur) => {
                let (n1, d1) = key(&cur);
                let (n2, d2) = key(&cand);
                let lhs = n2 * d1;
                let rhs = n1 * d2;
                if lhs < rhs {
                    cand
                } else if lhs > rhs {
                    cur
                } else {
                    let centre = |(p, q): (u64, u64)| (2 * p as i128 - q as i128).unsigned_abs();
                    let ord = (cand.1, centre(cand) * cur.1 as u128).cmp(&(cur.1, centre(cur) * cand.1 as u128));
                    if ord.is_lt() {
                        cand
                    } else {
                        cur
                    }
                }
            }
        });
    }
    best.expect("Farey sequence is nonempty")
}

fn row_frequencies(cfg: &ButterflyConfig) -> Result<Vec<RowInfo>> {
    let h = cfg.height;
    let n = (h.max(2) - 1) as u64;
    let farey = farey_sequence(cfg.q_max);
    (0..h)
        .map(|j| {
            let alpha = if h == 1 { 0.0 } else { j as f64 / n as f64 };
            Ok(match cfg.mode {
                RowMode::Farey => {
                    let (p, q) = nearest_fraction(j as u64, n, &farey);
                    RowInfo { alpha, frequency: Frequency::rational(p, q)?, method: SliceMethod::Oracle }
                }
                RowMode::Irrational => {
                    RowInfo { alpha, frequency: Frequency::real(alpha)?, method: SliceMethod::Growth }
                }
            })
        })
        .collect()
}

fn validate(cfg: &ButterflyConfig) -> Result<()> {
    if cfg.width == 0 || cfg.height == 0 {
        return Err(invalid("raster dimensions must be positive"));
    }
    if !(cfg.e_min < cfg.e_max) || !cfg.e_min.is_finite() || !cfg.e_max.is_finite() {
        return Err(invalid(format!("bad energy range [{}, {}]", cfg.e_min, cfg.e_max)));
    }
    if cfg.mode == RowMode::Farey && cfg.q_max == 0 {
        return Err(invalid("q_max must be at least 1"));
    }
    Ok(())
}

/// Classify every pixel. Rows sharing a frequency are computed once; the
/// result does not depend on the thread count.
pub fn scan_butterfly(cfg: &ButterflyConfig) -> Result<ButterflyRaster> {
    validate(cfg)?;
    let rows = row_frequencies(cfg)?;
    let energies = energy_grid(cfg.e_min, cfg.e_max, cfg.width);
    let mut distinct: BTreeMap<String, (Frequency, SliceMethod)> = BTreeMap::new();
    for r in &rows {
        distinct.entry(format!("{:?}", r.frequency)).or_insert((r.frequency, r.method));
    }
    let keys: Vec<(&String, &(Frequency, SliceMethod))> = distinct.iter().collect();
    let computed: Vec<Vec<PixelVerdict>> =
        keys.par_iter().map(|(_, (f, m))| slice_verdicts(*f, &energies, *m, &cfg.slice)).collect::<Result<_>>()?;
    let cache: BTreeMap<&String, &Vec<PixelVerdict>> = keys.iter().map(|(k, _)| *k).zip(computed.iter()).collect();
    let mut pixels = Vec::with_capacity(cfg.width * cfg.height);
    for r in &rows {
        pixels.extend_from_slice(cache[&format!("{:?}", r.frequency)]);
    }
    Ok(ButterflyRaster { e_min: cfg.e_min, e_max: cfg.e_max, width: cfg.width, height: cfg.height, rows, pixels })
}

fn grey(v: PixelVerdict) -> u8 {
    match v {
        PixelVerdict::In => 0,
        PixelVerdict::Out => 255,
        PixelVerdict::Inconclusive => 128,
    }
}

/// Binary PGM bytes; each `comments` entry becomes a `# ` line after the magic number.
pub fn encode_pgm(raster: &ButterflyRaster, comments: &[String]) -> Vec<u8> {
    let mut out = b"P5\n".to_vec();
    for c in comments {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", raster.width, raster.height).as_bytes());
    out.extend(raster.pixels.iter().map(|&v| grey(v)));
    out
}

pub fn render_pgm(raster: &ButterflyRaster, path: &Path, comments: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode_pgm(raster, comments))?;
    f.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureEntry {
    pub grid: usize,
    pub n_max: usize,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub frequency: Frequency,
    pub coupling: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub entries: Vec<MeasureEntry>,
    /// Each measure is at most the previous one plus one grid cell.
    pub nonincreasing: bool,
}

/// Midpoints of `grid` equal cells covering `[lo, hi]`.
pub fn cell_centres(lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    let de = (hi - lo) / grid as f64;
    (0..grid).map(|i| lo + (i as f64 + 0.5) * de).collect()
}

/// Lebesgue measure of the growth-test spectrum on `[e_min, e_max]` at each
/// `(grid, n_max)` resolution: in-spectrum cells times the cell width.
pub fn measure_slice(
    frequency: Frequency,
    e_min: f64,
    e_max: f64,
    resolutions: &[(usize, usize)],
    opts: &SliceOptions,
) -> Result<MeasureReport> {
    if !(e_min < e_max) {
        return Err(invalid("empty energy window"));
    }
    let mut entries = Vec::with_capacity(resolutions.len());
    for &(grid, n_max) in resolutions {
        if grid == 0 {
            return Err(invalid("measure grid must be positive"));
        }
        let energies = cell_centres(e_min, e_max, grid);
        let o = SliceOptions { n_max, ..*opts };
        let verdicts = slice_verdicts(frequency, &energies, SliceMethod::Growth, &o)?;
        let cell = (e_max - e_min) / grid as f64;
        let measure = verdicts.iter().filter(|v| v.in_spectrum()).count() as f64 * cell;
        entries.push(MeasureEntry { grid, n_max, measure });
    }
    let nonincreasing = entries.windows(2).all(|w| {
        let slack = (e_max - e_min) / w[0].grid.min(w[1].grid) as f64;
        w[1].measure <= w[0].measure + slack
    });
    Ok(MeasureReport { frequency, coupling: opts.coupling, e_min, e_max, entries, nonincreasing })
}
