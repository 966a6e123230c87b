//! Value distributions on `[0, 1]`: finitely many atoms plus continuous pieces.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use super::quadrature;
use crate::{Error, Result};

const MASS_TOLERANCE: f64 = 1e-9;
const GRID_CHECK_POINTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Shape of a continuous piece.
#[derive(Clone, Copy)]
pub enum Shape {
    /// Density `constant + inverse_square / v²`.
    Density { constant: f64, inverse_square: f64 },
    /// Continuous mass known only through its CDF. `fraction` maps a point of
    /// the piece to the share of the piece's mass at or below it.
    CdfOnly {
        mass: f64,
        fraction: fn(f64, f64, f64) -> f64,
    },
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Density {
                constant,
                inverse_square,
            } => f
                .debug_struct("Density")
                .field("constant", constant)
                .field("inverse_square", inverse_square)
                .finish(),
            Shape::CdfOnly { mass, .. } => f.debug_struct("CdfOnly").field("mass", mass).finish(),
        }
    }
}

/// A continuous piece on `[lo, hi)` (the last piece also covers `hi`).
#[derive(Clone, Copy, Debug)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub shape: Shape,
}

impl Piece {
    pub fn constant(lo: f64, hi: f64, density: f64) -> Self {
        Piece {
            lo,
            hi,
            shape: Shape::Density {
                constant: density,
                inverse_square: 0.0,
            },
        }
    }

    pub fn inverse_square(lo: f64, hi: f64, constant: f64, inverse_square: f64) -> Self {
        Piece {
            lo,
            hi,
            shape: Shape::Density {
                constant,
                inverse_square,
            },
        }
    }

    /// Mass of the piece on `[lo, x]`, with `x` clamped into the piece.
    pub fn mass_to(&self, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        match self.shape {
            Shape::Density {
                constant,
                inverse_square,
            } => {
                let mut m = constant * (x - self.lo);
                if inverse_square != 0.0 {
                    m += inverse_square * (1.0 / self.lo - 1.0 / x);
                }
                m
            }
            Shape::CdfOnly { mass, fraction } => mass * fraction(self.lo, self.hi, x),
        }
    }

    pub fn mass(&self) -> f64 {
        self.mass_to(self.hi)
    }

    pub fn density_at(&self, v: f64) -> Option<f64> {
        match self.shape {
            Shape::Density {
                constant,
                inverse_square: 0.0,
            } => Some(constant),
            Shape::Density {
                constant,
                inverse_square,
            } => Some(constant + inverse_square / (v * v)),
            Shape::CdfOnly { .. } => None,
        }
    }

    /// Smallest `x` in the piece with `mass_to(x) ≥ target`.
    fn invert(&self, target: f64) -> f64 {
        if let Shape::Density {
            constant,
            inverse_square,
        } = self.shape
        {
            if inverse_square == 0.0 && constant > 0.0 {
                return (self.lo + target / constant).clamp(self.lo, self.hi);
            }
            if constant == 0.0 && inverse_square > 0.0 {
                let inv = 1.0 / self.lo - target / inverse_square;
                if inv > 0.0 {
                    return (1.0 / inv).clamp(self.lo, self.hi);
                }
                return self.hi;
            }
        }
        let (mut lo, mut hi) = (self.lo, self.hi);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.mass_to(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Uniform within-piece CDF, usable with [`Shape::CdfOnly`].
pub fn linear_fraction(lo: f64, hi: f64, x: f64) -> f64 {
    (x - lo) / (hi - lo)
}

#[derive(Clone, Copy, Debug)]
enum Component {
    Atom(usize),
    Piece(usize),
}

/// Distribution of the latent value `v` on `[0, 1]`.
///
/// Sampling is by inverse CDF: components are ordered by location, with an
/// atom placed before a continuous piece starting at the same point.
#[derive(Clone, Debug)]
pub struct ValueDistribution {
    atoms: Vec<Atom>,
    pieces: Vec<Piece>,
    cdf_lipschitz: Option<f64>,
    table: Vec<(f64, Component)>,
}

impl ValueDistribution {
    /// Build and validate. `cdf_lipschitz` is the CDF_LIP class tag.
    pub fn new(atoms: Vec<Atom>, pieces: Vec<Piece>, cdf_lipschitz: Option<f64>) -> Result<Self> {
        let dist = Self::new_unchecked(atoms, pieces, cdf_lipschitz);
        let issues = dist.validate();
        if issues.is_empty() {
            Ok(dist)
        } else {
            Err(Error::InvalidInstance(issues.join("; ")))
        }
    }

    /// Build without validation (fault injection and tests).
    pub fn new_unchecked(
        mut atoms: Vec<Atom>,
        pieces: Vec<Piece>,
        cdf_lipschitz: Option<f64>,
    ) -> Self {
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        let mut pieces: Vec<Piece> = pieces.into_iter().filter(|p| p.hi > p.lo).collect();
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));

        let mut order: Vec<(f64, u8, Component)> = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.location, 0, Component::Atom(i)))
            .chain(
                pieces
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.lo, 1, Component::Piece(i))),
            )
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut cum = 0.0;
        let table = order
            .into_iter()
            .map(|(_, _, c)| {
                cum += match c {
                    Component::Atom(i) => atoms[i].mass,
                    Component::Piece(i) => pieces[i].mass(),
                };
                (cum, c)
            })
            .collect();
        ValueDistribution {
            atoms,
            pieces,
            cdf_lipschitz,
            table,
        }
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::out_of_range(
                "uniform support",
                format!("[{lo}, {hi}]"),
            ));
        }
        let d = 1.0 / (hi - lo);
        Self::new(vec![], vec![Piece::constant(lo, hi, d)], Some(d))
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&at) {
            return Err(Error::out_of_range("point mass location", at.to_string()));
        }
        Self::new(
            vec![Atom {
                location: at,
                mass: 1.0,
            }],
            vec![],
            None,
        )
    }

    /// Continuous distribution with a piecewise-linear CDF through `knots`
    /// `(x, F(x))`, starting at `(x0, 0)` and ending at `(x_n, 1)`.
    pub fn piecewise_linear_cdf(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::out_of_range(
                "piecewise-linear knots",
                "need at least two",
            ));
        }
        let mut pieces = Vec::with_capacity(knots.len() - 1);
        let mut lip: f64 = 0.0;
        for pair in knots.windows(2) {
            let ((x0, f0), (x1, f1)) = (pair[0], pair[1]);
            if x1 <= x0 || f1 < f0 {
                return Err(Error::out_of_range(
                    "piecewise-linear knots",
                    format!("({x0},{f0}) -> ({x1},{f1})"),
                ));
            }
            let slope = (f1 - f0) / (x1 - x0);
            lip = lip.max(slope);
            pieces.push(Piece::constant(x0, x1, slope));
        }
        Self::new(vec![], pieces, Some(lip))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn cdf_lipschitz(&self) -> Option<f64> {
        self.cdf_lipschitz
    }

    /// `P(v ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location <= x)
            .map(|a| a.mass)
            .sum();
        let cont: f64 = self
            .pieces
            .iter()
            .filter(|p| p.lo < x)
            .map(|p| p.mass_to(x))
            .sum();
        atoms + cont
    }

    /// `P(v < x)`.
    pub fn prob_below(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location < x)
            .map(|a| a.mass)
            .sum();
        let cont: f64 = self
            .pieces
            .iter()
            .filter(|p| p.lo < x)
            .map(|p| p.mass_to(x))
            .sum();
        atoms + cont
    }

    /// Density of the continuous part at `v`; `None` if a piece covering `v`
    /// has no density.
    pub fn density(&self, v: f64) -> Option<f64> {
        let last = self.pieces.len().checked_sub(1);
        let mut total = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let inside = v >= p.lo && (v < p.hi || (Some(i) == last && v <= p.hi));
            if inside {
                total += p.density_at(v)?;
            }
        }
        Some(total)
    }

    pub fn total_mass(&self) -> f64 {
        self.table.last().map_or(0.0, |t| t.0)
    }

    /// All piece endpoints and atom locations, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.location)
            .chain(self.pieces.iter().flat_map(|p| [p.lo, p.hi]))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen::<f64>() * self.total_mass();
        let idx = self
            .table
            .partition_point(|(cum, _)| *cum <= u)
            .min(self.table.len() - 1);
        let before = if idx == 0 { 0.0 } else { self.table[idx - 1].0 };
        match self.table[idx].1 {
            Component::Atom(i) => self.atoms[i].location,
            Component::Piece(i) => self.pieces[i].invert(u - before),
        }
    }

    /// Structural problems with this distribution; empty when valid.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for a in &self.atoms {
            if !(0.0..=1.0).contains(&a.location) {
                issues.push(format!("atom at {} outside [0, 1]", a.location));
            }
            if a.mass < 0.0 {
                issues.push(format!(
                    "atom at {} has negative mass {}",
                    a.location, a.mass
                ));
            }
        }
        for p in &self.pieces {
            if p.lo < 0.0 || p.hi > 1.0 {
                issues.push(format!("piece [{}, {}] outside [0, 1]", p.lo, p.hi));
            }
            if p.density_at(p.lo).is_some() {
                let min = (0..=64)
                    .map(|k| p.lo + (p.hi - p.lo) * k as f64 / 64.0)
                    .filter_map(|v| p.density_at(v))
                    .fold(f64::INFINITY, f64::min);
                if min < -1e-12 {
                    issues.push(format!("negative density {min} on [{}, {}]", p.lo, p.hi));
                }
            } else if p.mass() < 0.0 {
                issues.push(format!("negative mass on [{}, {}]", p.lo, p.hi));
            }
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            issues.push(format!("total mass {total} != 1"));
        }
        let mut prev = 0.0;
        for k in 0..=GRID_CHECK_POINTS {
            let x = k as f64 / GRID_CHECK_POINTS as f64;
            let f = self.cdf(x);
            if f < prev - 1e-12 {
                issues.push(format!("cdf decreases at {x}"));
                break;
            }
            prev = f;
        }
        if let Some(lip) = self.cdf_lipschitz {
            if !self.atoms.is_empty() {
                issues.push("CDF_LIP distribution has atoms".to_string());
            }
            let mut prev = self.cdf(0.0);
            for k in 1..=GRID_CHECK_POINTS {
                let x = k as f64 / GRID_CHECK_POINTS as f64;
                let f = self.cdf(x);
                if f - prev > lip / GRID_CHECK_POINTS as f64 + 1e-12 {
                    issues.push(format!("cdf not {lip}-Lipschitz near {x}"));
                    break;
                }
                prev = f;
            }
        }
        issues
    }

    /// `∫ density` over the continuous part, by quadrature (independent of
    /// the closed-form piece masses).
    pub fn integrated_density(&self) -> Result<f64> {
        let mut total = 0.0;
        for p in &self.pieces {
            if p.density_at(p.lo).is_none() {
                return Err(Error::MissingDensity {
                    lo: p.lo,
                    hi: p.hi,
                    mass: p.mass(),
                });
            }
            total +=
                quadrature::adaptive_simpson(|v| p.density_at(v).unwrap_or(0.0), p.lo, p.hi, 1e-13);
        }
        Ok(total)
    }
}
