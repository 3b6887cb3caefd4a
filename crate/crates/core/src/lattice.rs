//! Lattice geometry: sites, finite boxes with their boundary shell, and states.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::circle::{circle_dist, Circle};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("box has no interior sites")]
    EmptyBox,
    #[error("box has an empty boundary shell")]
    EmptyShell,
    #[error("site {0} is both interior and boundary")]
    Overlap(Site),
    #[error("sites of mixed dimension ({0} and {1})")]
    MixedDimension(Site, Site),
    #[error("site {0} is not part of the lattice layout")]
    UnknownSite(Site),
    #[error("cannot parse site `{0}`")]
    Parse(String),
}

/// A lattice site in one or two dimensions.
///
/// Ordering is lexicographic on coordinates, which fixes every iteration order
/// in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    D1(i64),
    D2(i64, i64),
}

impl Site {
    pub fn dim(&self) -> usize {
        match self {
            Site::D1(_) => 1,
            Site::D2(..) => 2,
        }
    }

    pub fn coords(&self) -> Vec<i64> {
        match *self {
            Site::D1(i) => vec![i],
            Site::D2(i, j) => vec![i, j],
        }
    }

    /// Translate by an offset of the same dimension.
    pub fn offset(&self, by: &Site) -> Site {
        match (*self, *by) {
            (Site::D1(i), Site::D1(d)) => Site::D1(i + d),
            (Site::D2(i, j), Site::D2(di, dj)) => Site::D2(i + di, j + dj),
            _ => panic!("offset dimension mismatch: {self} + {by}"),
        }
    }

    /// Chebyshev distance; `None` across dimensions.
    pub fn lattice_distance(&self, other: &Site) -> Option<u64> {
        match (*self, *other) {
            (Site::D1(a), Site::D1(b)) => Some(a.abs_diff(b)),
            (Site::D2(a, b), Site::D2(c, d)) => Some(a.abs_diff(c).max(b.abs_diff(d))),
            _ => None,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::D1(i) => write!(f, "{i}"),
            Site::D2(i, j) => write!(f, "{i}:{j}"),
        }
    }
}

impl FromStr for Site {
    type Err = LatticeError;

    /// `"3"` or `"1:2"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |p: &str| {
            p.trim()
                .parse::<i64>()
                .map_err(|_| LatticeError::Parse(s.into()))
        };
        match s.split_once(':') {
            None => Ok(Site::D1(parse(s)?)),
            Some((a, b)) => Ok(Site::D2(parse(a)?, parse(b)?)),
        }
    }
}

/// Serialized as its display form, so it can key JSON maps.
impl Serialize for Site {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Sites `1..=n` of a one-dimensional chain.
pub fn chain_sites(n: usize) -> Vec<Site> {
    (1..=n as i64).map(Site::D1).collect()
}

/// Sites `(0..width) x (0..height)`.
pub fn rect_sites(width: usize, height: usize) -> Vec<Site> {
    let mut out = Vec::with_capacity(width * height);
    for x in 0..width as i64 {
        for y in 0..height as i64 {
            out.push(Site::D2(x, y));
        }
    }
    out
}

/// Axis-aligned extent of a rectangular box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rect {
    pub origin: Site,
    pub extent: Site,
}

impl Rect {
    /// Maps any site into the rectangle by periodic wraparound.
    pub fn wrap(&self, site: &Site) -> Site {
        match (*site, self.origin, self.extent) {
            (Site::D1(i), Site::D1(o), Site::D1(n)) => Site::D1(o + (i - o).rem_euclid(n)),
            (Site::D2(i, j), Site::D2(ox, oy), Site::D2(w, h)) => {
                Site::D2(ox + (i - ox).rem_euclid(w), oy + (j - oy).rem_euclid(h))
            }
            _ => panic!("wrap dimension mismatch"),
        }
    }
}

/// A finite box together with the shell of outside sites that feed it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxSpec {
    sites: Vec<Site>,
    boundary: Vec<Site>,
    rect: Option<Rect>,
}

impl BoxSpec {
    pub fn new(
        sites: impl IntoIterator<Item = Site>,
        boundary: impl IntoIterator<Item = Site>,
    ) -> Result<Self, LatticeError> {
        let sites: BTreeSet<Site> = sites.into_iter().collect();
        let boundary: BTreeSet<Site> = boundary.into_iter().collect();
        let first = *sites.iter().next().ok_or(LatticeError::EmptyBox)?;
        if boundary.is_empty() {
            return Err(LatticeError::EmptyShell);
        }
        for s in sites.iter().chain(boundary.iter()) {
            if s.dim() != first.dim() {
                return Err(LatticeError::MixedDimension(first, *s));
            }
        }
        if let Some(s) = sites.intersection(&boundary).next() {
            return Err(LatticeError::Overlap(*s));
        }
        let rect = detect_rect(&sites);
        Ok(BoxSpec {
            sites: sites.into_iter().collect(),
            boundary: boundary.into_iter().collect(),
            rect,
        })
    }

    /// Box whose shell is every `site + offset` that falls outside `sites`.
    pub fn with_offsets(
        sites: impl IntoIterator<Item = Site>,
        offsets: &[Site],
    ) -> Result<Self, LatticeError> {
        let sites: BTreeSet<Site> = sites.into_iter().collect();
        let shell: BTreeSet<Site> = sites
            .iter()
            .flat_map(|s| offsets.iter().map(move |o| s.offset(o)))
            .filter(|s| !sites.contains(s))
            .collect();
        BoxSpec::new(sites, shell)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }

    pub fn rect(&self) -> Option<&Rect> {
        self.rect.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.sites[0].dim()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.sites.binary_search(site).is_ok()
    }

    pub fn in_shell(&self, site: &Site) -> bool {
        self.boundary.binary_search(site).is_ok()
    }

    pub fn layout(&self) -> Arc<Layout> {
        Arc::new(Layout::new(self.sites.clone(), self.boundary.clone()))
    }
}

fn detect_rect(sites: &BTreeSet<Site>) -> Option<Rect> {
    let first = *sites.iter().next()?;
    match first {
        Site::D1(_) => {
            let lo = sites
                .iter()
                .next()
                .and_then(|s| s.coords().first().copied())?;
            let hi = sites
                .iter()
                .next_back()
                .and_then(|s| s.coords().first().copied())?;
            (hi - lo + 1 == sites.len() as i64).then(|| Rect {
                origin: Site::D1(lo),
                extent: Site::D1(hi - lo + 1),
            })
        }
        Site::D2(..) => {
            let xs = sites.iter().map(|s| s.coords()[0]);
            let ys = sites.iter().map(|s| s.coords()[1]);
            let (x0, x1) = (xs.clone().min()?, xs.max()?);
            let (y0, y1) = (ys.clone().min()?, ys.max()?);
            let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
            (w * h == sites.len() as i64).then(|| Rect {
                origin: Site::D2(x0, y0),
                extent: Site::D2(w, h),
            })
        }
    }
}

/// Dense indexing of interior sites followed by boundary sites.
#[derive(Debug, PartialEq, Eq)]
pub struct Layout {
    sites: Vec<Site>,
    n_interior: usize,
    index: HashMap<Site, usize>,
}

impl Layout {
    pub fn new(interior: Vec<Site>, boundary: Vec<Site>) -> Self {
        let n_interior = interior.len();
        let sites: Vec<Site> = interior.into_iter().chain(boundary).collect();
        let index = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Layout {
            sites,
            n_interior,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn interior(&self) -> &[Site] {
        &self.sites[..self.n_interior]
    }

    pub fn boundary(&self) -> &[Site] {
        &self.sites[self.n_interior..]
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.index.get(site).copied()
    }
}

/// Assignment of circle points to every site of a layout.
///
/// Cloning copies the values; the layout itself is shared and immutable.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeState<S> {
    layout: Arc<Layout>,
    values: Vec<Circle<S>>,
}

impl<S: Scalar> LatticeState<S> {
    pub fn filled(layout: Arc<Layout>, value: Circle<S>) -> Self {
        let values = vec![value; layout.len()];
        LatticeState { layout, values }
    }

    pub fn from_fn(layout: Arc<Layout>, mut f: impl FnMut(&Site) -> Circle<S>) -> Self {
        let values = layout.sites().iter().map(&mut f).collect();
        LatticeState { layout, values }
    }

    /// `values` must follow the layout order (interior first).
    pub fn from_values(layout: Arc<Layout>, values: Vec<Circle<S>>) -> Self {
        assert_eq!(
            layout.len(),
            values.len(),
            "state length does not match layout"
        );
        LatticeState { layout, values }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn values(&self) -> &[Circle<S>] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Circle<S>] {
        &mut self.values
    }

    pub fn interior_values(&self) -> &[Circle<S>] {
        &self.values[..self.layout.n_interior()]
    }

    pub fn boundary_values(&self) -> &[Circle<S>] {
        &self.values[self.layout.n_interior()..]
    }

    pub fn get(&self, site: &Site) -> Option<&Circle<S>> {
        self.layout.index_of(site).map(|i| &self.values[i])
    }

    pub fn set(&mut self, site: &Site, value: Circle<S>) -> Result<(), LatticeError> {
        let i = self
            .layout
            .index_of(site)
            .ok_or(LatticeError::UnknownSite(*site))?;
        self.values[i] = value;
        Ok(())
    }

    /// Largest arc distance between the interiors of two states on the same layout.
    pub fn interior_sup_distance(&self, other: &Self) -> S {
        self.interior_values()
            .iter()
            .zip(other.interior_values())
            .map(|(a, b)| circle_dist(a, b))
            .fold(S::zero(), |m, d| if d > m { d } else { m })
    }

    /// Interior values as `f64`, in layout order.
    pub fn interior_f64(&self) -> Vec<f64> {
        self.interior_values().iter().map(Circle::to_f64).collect()
    }
}
