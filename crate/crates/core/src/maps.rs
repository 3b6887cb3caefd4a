//! Local circle maps with declared Lipschitz data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circle::{circle_dist, reduce, Circle};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid map specification: {0}")]
    InvalidSpec(String),
    #[error("local map has no single-valued inverse")]
    NotInvertible,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapKind<S> {
    /// `x -> 2x mod 1`.
    Doubling,
    /// `x -> a x + b mod 1`; continuous on the circle only for integer `a`.
    AffineMod1 { slope: S, offset: S },
    /// Degree-`d` circle map, linear between sorted `breakpoints`.
    ///
    /// Segment `i` runs from `breakpoints[i]` to the next breakpoint (the last
    /// one wraps to `breakpoints[0] + 1`) with slope `slopes[i]`; `start` is the
    /// image of `breakpoints[0]`.
    PiecewiseLinear {
        breakpoints: Vec<S>,
        slopes: Vec<S>,
        start: S,
    },
    /// `x -> x + angle mod 1`.
    Rotation { angle: S },
}

/// A local map together with its declared expansion constants.
///
/// `lambda_lower <= rho(Tx, Ty) / rho(x, y) <= lambda_upper` is claimed for all
/// pairs with `rho(x, y) <= sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMap<S> {
    pub kind: MapKind<S>,
    pub lambda_lower: S,
    pub lambda_upper: S,
    pub sigma: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzReport {
    pub max_observed_ratio: f64,
    pub min_observed_ratio: f64,
    pub samples: usize,
}

const LIPSCHITZ_TOL: f64 = 1e-9;

impl<S: Scalar> LocalMap<S> {
    pub fn doubling() -> Self {
        LocalMap {
            kind: MapKind::Doubling,
            lambda_lower: S::from_i64(2),
            lambda_upper: S::from_i64(2),
            sigma: S::ratio(1, 4),
        }
    }

    pub fn rotation(angle: S) -> Self {
        LocalMap {
            kind: MapKind::Rotation {
                angle: reduce(angle),
            },
            lambda_lower: S::one(),
            lambda_upper: S::one(),
            sigma: S::half(),
        }
    }

    pub fn affine(slope: S, offset: S) -> Self {
        let a = slope.abs();
        LocalMap {
            kind: MapKind::AffineMod1 { slope, offset },
            lambda_lower: a.clone(),
            lambda_upper: a.clone(),
            sigma: S::half() / max_s(a, S::one()),
        }
    }

    pub fn piecewise(breakpoints: Vec<S>, slopes: Vec<S>, start: S) -> Result<Self, MapError> {
        let lower = slopes
            .iter()
            .map(|s| s.abs())
            .reduce(min_s)
            .ok_or_else(|| MapError::InvalidSpec("piecewise map needs a segment".into()))?;
        let upper = slopes.iter().map(|s| s.abs()).reduce(max_s).unwrap();
        let map = LocalMap {
            kind: MapKind::PiecewiseLinear {
                breakpoints,
                slopes,
                start,
            },
            lambda_lower: lower,
            sigma: S::half() / max_s(upper.clone(), S::one()),
            lambda_upper: upper,
        };
        map.validate()?;
        Ok(map)
    }

    /// Degree-one homeomorphism fixing `v`, linear with slope `slope` on the arc
    /// of length `arc` centred at `v` and with one compensating slope elsewhere.
    pub fn linear_near_fixed_point(v: S, slope: S, arc: S) -> Result<Self, MapError> {
        if !(arc > S::zero() && arc < S::one()) {
            return Err(MapError::InvalidSpec(
                "arc length must lie in (0, 1)".into(),
            ));
        }
        let half_arc = arc.clone() / S::from_i64(2);
        let lo = v.clone() - half_arc.clone();
        let hi = v.clone() + half_arc.clone();
        let compensating = (S::one() - slope.clone() * arc.clone()) / (S::one() - arc);
        if compensating <= S::zero() {
            return Err(MapError::InvalidSpec(
                "slope too large for a degree-one map".into(),
            ));
        }
        let image_lo = v.clone() - slope.clone() * half_arc.clone() - lo.floor();
        let image_hi = v + slope.clone() * half_arc - hi.floor();
        let (b_lo, b_hi) = (reduce(lo), reduce(hi));
        if b_lo < b_hi {
            LocalMap::piecewise(vec![b_lo, b_hi], vec![slope, compensating], image_lo)
        } else {
            // the arc straddles 0
            LocalMap::piecewise(vec![b_hi, b_lo], vec![compensating, slope], image_hi)
        }
    }

    pub fn with_constants(mut self, lambda_lower: S, lambda_upper: S, sigma: S) -> Self {
        self.lambda_lower = lambda_lower;
        self.lambda_upper = lambda_upper;
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |m: &str| Err(MapError::InvalidSpec(m.into()));
        if !(self.lambda_lower > S::zero()) || self.lambda_upper < self.lambda_lower {
            return bad("declared constants must satisfy upper >= lower > 0");
        }
        if !(self.sigma > S::zero()) {
            return bad("sigma must be positive");
        }
        match &self.kind {
            MapKind::Doubling | MapKind::Rotation { .. } | MapKind::AffineMod1 { .. } => Ok(()),
            MapKind::PiecewiseLinear {
                breakpoints,
                slopes,
                ..
            } => {
                if breakpoints.is_empty() || breakpoints.len() != slopes.len() {
                    return bad("breakpoints and slopes must be non-empty and of equal length");
                }
                if breakpoints.iter().any(|b| *b < S::zero() || *b >= S::one()) {
                    return bad("breakpoints must lie in [0, 1)");
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("breakpoints must be strictly increasing");
                }
                let rise = self.piecewise_knots().last().cloned().unwrap()
                    - self.piecewise_knots()[0].clone();
                let gap = (rise.clone() - rise.floor()).to_f64();
                if gap.min(1.0 - gap) > 1e-9 {
                    return bad("piecewise map is not continuous on the circle");
                }
                Ok(())
            }
        }
    }

    /// Lifted images of the breakpoints, with the wrap-around knot appended.
    fn piecewise_knots(&self) -> Vec<S> {
        let MapKind::PiecewiseLinear {
            breakpoints,
            slopes,
            start,
        } = &self.kind
        else {
            return Vec::new();
        };
        let mut knots = Vec::with_capacity(breakpoints.len() + 1);
        knots.push(start.clone());
        for i in 0..breakpoints.len() {
            let next = breakpoints
                .get(i + 1)
                .cloned()
                .unwrap_or_else(|| breakpoints[0].clone() + S::one());
            let prev = knots[i].clone();
            knots.push(prev + slopes[i].clone() * (next - breakpoints[i].clone()));
        }
        knots
    }

    pub fn apply(&self, x: &Circle<S>) -> Circle<S> {
        let x = x.value().clone();
        match &self.kind {
            MapKind::Doubling => Circle::new(x.clone() + x),
            MapKind::AffineMod1 { slope, offset } => {
                Circle::new(slope.clone() * x + offset.clone())
            }
            MapKind::Rotation { angle } => Circle::new(x + angle.clone()),
            MapKind::PiecewiseLinear {
                breakpoints,
                slopes,
                ..
            } => {
                let b0 = breakpoints[0].clone();
                let y = if x < b0 { x + S::one() } else { x };
                let seg = breakpoints
                    .iter()
                    .rposition(|b| *b <= y)
                    .unwrap_or(breakpoints.len() - 1);
                let knots = self.piecewise_knots();
                Circle::new(
                    knots[seg].clone() + slopes[seg].clone() * (y - breakpoints[seg].clone()),
                )
            }
        }
    }

    /// Single-valued inverse, when the map is a circle homeomorphism.
    pub fn inverse(&self, x: &Circle<S>) -> Result<Circle<S>, MapError> {
        let x = x.value().clone();
        match &self.kind {
            MapKind::Doubling => Err(MapError::NotInvertible),
            MapKind::Rotation { angle } => Ok(Circle::new(x - angle.clone())),
            MapKind::AffineMod1 { slope, offset } => {
                if slope.abs() == S::one() {
                    Ok(Circle::new((x - offset.clone()) / slope.clone()))
                } else {
                    Err(MapError::NotInvertible)
                }
            }
            MapKind::PiecewiseLinear {
                breakpoints,
                slopes,
                ..
            } => {
                let knots = self.piecewise_knots();
                let rise = knots[knots.len() - 1].clone() - knots[0].clone();
                if slopes.iter().any(|s| *s <= S::zero()) || (rise - S::one()).abs().to_f64() > 1e-9
                {
                    return Err(MapError::NotInvertible);
                }
                let v0 = knots[0].clone();
                let mut y = x - v0.floor();
                if y < v0 {
                    y = y + S::one();
                }
                if y >= v0.clone() + S::one() {
                    y = y - S::one();
                }
                let seg = knots[..breakpoints.len()]
                    .iter()
                    .rposition(|k| *k <= y)
                    .unwrap_or(0);
                Ok(Circle::new(
                    breakpoints[seg].clone() + (y - knots[seg].clone()) / slopes[seg].clone(),
                ))
            }
        }
    }

    /// Checks the declared constants on sampled pairs anywhere on the circle.
    pub fn verify_lipschitz(&self, n_samples: usize) -> Result<LipschitzReport, MapError> {
        self.verify_lipschitz_on(n_samples, None)
    }

    /// Checks the declared constants on pairs at most `sigma` apart, drawn from
    /// the arc `[lo, hi]` when a region is given.
    pub fn verify_lipschitz_on(
        &self,
        n_samples: usize,
        region: Option<(f64, f64)>,
    ) -> Result<LipschitzReport, MapError> {
        if n_samples < 2 {
            return Err(MapError::InvalidSpec("need at least two samples".into()));
        }
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a5c);
        let sigma = self.sigma.to_f64().min(0.5);
        let (lower, upper) = (self.lambda_lower.to_f64(), self.lambda_upper.to_f64());
        let mut max_ratio = f64::NEG_INFINITY;
        let mut min_ratio = f64::INFINITY;
        for _ in 0..n_samples {
            let (x, y) = match region {
                None => {
                    let x: f64 = rng.gen();
                    let d = rng.gen_range(sigma * 1e-3..=sigma);
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (x, x + sign * d)
                }
                Some((lo, hi)) => {
                    let x = rng.gen_range(lo..=hi);
                    let reach = sigma.min(hi - lo);
                    let y = rng.gen_range((x - reach).max(lo)..=(x + reach).min(hi));
                    (x, y)
                }
            };
            let (cx, cy) = (Circle::new(S::from_f64(x)), Circle::new(S::from_f64(y)));
            let before = circle_dist(&cx, &cy).to_f64();
            if before == 0.0 || before > sigma {
                continue;
            }
            let after = circle_dist(&self.apply(&cx), &self.apply(&cy)).to_f64();
            if after > upper * before + LIPSCHITZ_TOL || after < lower * before - LIPSCHITZ_TOL {
                return Err(MapError::InvalidSpec(format!(
                    "declared constants violated at ({x}, {y}): ratio {}",
                    after / before
                )));
            }
            let ratio = after / before;
            max_ratio = max_ratio.max(ratio);
            min_ratio = min_ratio.min(ratio);
        }
        Ok(LipschitzReport {
            max_observed_ratio: max_ratio,
            min_observed_ratio: min_ratio,
            samples: n_samples,
        })
    }

    /// Returns true if `T^period(x) == x` within `tol`.
    pub fn returns_after(&self, x: &Circle<S>, period: usize, tol: f64) -> bool {
        let mut y = x.clone();
        for _ in 0..period {
            y = self.apply(&y);
        }
        circle_dist(&y, x).to_f64() <= tol
    }
}

fn min_s<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

fn max_s<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}
