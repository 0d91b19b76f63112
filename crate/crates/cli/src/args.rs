//! Value types shared by flags and config files. Each one prints back in a
//! form its parser accepts, so echoed configs can be replayed.

use std::fmt;
use std::str::FromStr;

use cocycle_lab::exponents::GOLDEN_MEAN;
use cocycle_lab::hyperbolicity::Frequency;

/// A frequency: `p/q`, `golden`, or a decimal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Alpha {
    Ratio(u64, u64),
    Golden,
    Real(f64),
}

impl Alpha {
    pub fn frequency(self) -> Result<Frequency, cocycle_lab::Error> {
        match self {
            Alpha::Ratio(p, q) => Frequency::rational(p, q),
            Alpha::Golden => Frequency::real(GOLDEN_MEAN),
            Alpha::Real(a) => Frequency::real(a),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Alpha::Ratio(p, q) => p as f64 / q as f64,
            Alpha::Golden => GOLDEN_MEAN,
            Alpha::Real(a) => a,
        }
    }
}

impl FromStr for Alpha {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "golden" {
            return Ok(Alpha::Golden);
        }
        if let Some((p, q)) = s.split_once('/') {
            let p = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let q = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            return Ok(Alpha::Ratio(p, q));
        }
        let a: f64 = s.parse().map_err(|_| format!("expected p/q, `golden` or a number, got {s:?}"))?;
        if !a.is_finite() {
            return Err("frequency must be finite".into());
        }
        Ok(Alpha::Real(a))
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Ratio(p, q) => write!(f, "{p}/{q}"),
            Alpha::Golden => f.write_str("golden"),
            Alpha::Real(a) => write!(f, "{a}"),
        }
    }
}

/// Comma-separated reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Reals(pub Vec<f64>);

impl FromStr for Reals {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Reals)
    }
}

impl fmt::Display for Reals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Semicolon-separated matrices, each a row-major list of `d²` reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrices(pub Vec<Reals>);

impl FromStr for Matrices {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let ms = s.split(';').map(Reals::from_str).collect::<Result<Vec<_>, _>>()?;
        for m in &ms {
            let d = (m.0.len() as f64).sqrt().round() as usize;
            if d == 0 || d * d != m.0.len() {
                return Err(format!("a matrix needs d² entries, got {}", m.0.len()));
            }
        }
        Ok(Matrices(ms))
    }
}

impl fmt::Display for Matrices {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(Reals::to_string).collect();
        f.write_str(&parts.join(";"))
    }
}

/// Comma-separated `grid:n_max` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolutions(pub Vec<(usize, usize)>);

impl FromStr for Resolutions {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|pair| {
                let (g, n) = pair.split_once(':').ok_or_else(|| format!("expected grid:n_max, got {pair:?}"))?;
                let g = g.trim().parse().map_err(|_| format!("bad grid {g:?}"))?;
                let n = n.trim().parse().map_err(|_| format!("bad n_max {n:?}"))?;
                Ok((g, n))
            })
            .collect::<Result<Vec<_>, String>>()
            .map(Resolutions)
    }
}

impl fmt::Display for Resolutions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(g, n)| format!("{g}:{n}")).collect();
        f.write_str(&parts.join(","))
    }
}
