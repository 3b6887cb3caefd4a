//! The unit circle `[0, 1)` with the shortest-arc metric.

use std::fmt;

use crate::scalar::Scalar;

/// A point of the circle, always reduced into `[0, 1)`.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Circle<S>(S);

impl<S: Scalar> Circle<S> {
    pub fn new(value: S) -> Self {
        Circle(reduce(value))
    }

    pub fn zero() -> Self {
        Circle(S::zero())
    }

    pub fn value(&self) -> &S {
        &self.0
    }

    pub fn into_inner(self) -> S {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    /// Translation by `delta` (any real), reduced mod 1.
    pub fn shifted(&self, delta: &S) -> Self {
        Circle::new(self.0.clone() + delta.clone())
    }

    pub fn dist(&self, other: &Self) -> S {
        circle_dist(self, other)
    }
}

impl<S: fmt::Debug> fmt::Debug for Circle<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Circle({:?})", self.0)
    }
}

impl<S: fmt::Display> fmt::Display for Circle<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Reduces a real number into `[0, 1)`.
///
/// Floating results within `S::wrap_snap()` of 1 snap to 0 so rounding can
/// never produce the excluded endpoint.
pub fn reduce<S: Scalar>(value: S) -> S {
    let r = value.clone() - value.floor();
    match S::wrap_snap() {
        Some(eps) if r >= S::one() - eps.clone() => S::zero(),
        _ if r >= S::one() || r < S::zero() => S::zero(),
        _ => r,
    }
}

/// Signed displacement from `from` to `to` along the shorter arc, in `[-1/2, 1/2)`.
pub fn signed_offset<S: Scalar>(from: &S, to: &S) -> S {
    let half = S::half();
    reduce(to.clone() - from.clone() + half.clone()) - half
}

/// Tent fold of a displacement: identity on `[-1/4, 1/4]`, reflected beyond,
/// so that the result is continuous and 1-Lipschitz on the circle and vanishes
/// at the antipode.
pub fn fold_offset<S: Scalar>(offset: S) -> S {
    let quarter = S::ratio(1, 4);
    let half = S::half();
    if offset.abs() <= quarter {
        offset
    } else if offset > S::zero() {
        half - offset
    } else {
        -half - offset
    }
}

/// Length of the shortest arc between two points, in `[0, 1/2]`.
pub fn circle_dist<S: Scalar>(x: &Circle<S>, y: &Circle<S>) -> S {
    let d = (x.0.clone() - y.0.clone()).abs();
    let other = S::one() - d.clone();
    if other < d {
        other
    } else {
        d
    }
}
