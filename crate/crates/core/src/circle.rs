//! Geometry of the two-edge oriented circle graph and finitely atomic
//! probability measures on it.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of frequencies in the test family of [`measure_distance`].
pub const TEST_FREQUENCIES: usize = 16;

/// The graph: vertices at angle 0 and angle `l`, the positive edge is the arc `(0, l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams<T> {
    l: T,
}

impl<T: Scalar> GraphParams<T> {
    pub fn new(l: T) -> Result<Self> {
        if !(l > T::zero() && l <= T::PI()) {
            return Err(Error::InvalidParameter(format!(
                "vertex angle l = {l} must lie in (0, pi]"
            )));
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> T {
        self.l
    }

    /// True when the second vertex is antipodal to the first.
    pub fn is_antipodal(&self) -> bool {
        self.l == T::PI()
    }

    pub fn vertex_one(&self) -> CirclePoint<T> {
        CirclePoint::new(T::zero())
    }

    pub fn vertex_l(&self) -> CirclePoint<T> {
        CirclePoint::new(self.l)
    }

    /// Returns the vertex within `tol` of `z`, if any.
    pub fn nearby_vertex(&self, z: CirclePoint<T>, tol: T) -> Option<CirclePoint<T>> {
        if z.distance(self.vertex_one()) <= tol {
            Some(self.vertex_one())
        } else if z.distance(self.vertex_l()) <= tol {
            Some(self.vertex_l())
        } else {
            None
        }
    }
}

/// Orientation of an edge, or branch of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value<T: Scalar>(self) -> T {
        match self {
            Sign::Plus => T::one(),
            Sign::Minus => -T::one(),
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// A point `e^{i theta}` with `theta` kept in `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CirclePoint<T> {
    theta: T,
}

impl<T: Scalar> CirclePoint<T> {
    pub fn new(theta: T) -> Self {
        debug_assert!(theta.is_finite(), "angle must be finite");
        let two_pi = T::tau();
        let mut r = theta % two_pi;
        if r < T::zero() {
            r += two_pi;
        }
        if r >= two_pi || r == T::zero() {
            r = T::zero();
        }
        Self { theta: r }
    }

    pub fn theta(self) -> T {
        self.theta
    }

    pub fn rotate(self, delta: T) -> Self {
        Self::new(self.theta + delta)
    }

    /// Shortest arc length between the two points.
    pub fn distance(self, other: Self) -> T {
        let d = (self.theta - other.theta).abs();
        d.min(T::tau() - d)
    }

    pub fn cos(self) -> T {
        self.theta.cos()
    }

    pub fn sin(self) -> T {
        self.theta.sin()
    }
}

/// Orientation of the edge carrying `z`: `+1` on the closed arc `[0, l]`.
pub fn epsilon<T: Scalar>(z: CirclePoint<T>, g: &GraphParams<T>) -> Sign {
    if z.theta() <= g.l() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub point: CirclePoint<T>,
    pub weight: T,
}

/// Finitely supported probability measure in canonical form: atoms sorted by
/// angle, pairwise farther apart than the merge tolerance, no zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<T> {
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> AtomicMeasure<T> {
    pub fn dirac(z: CirclePoint<T>) -> Self {
        Self {
            atoms: vec![Atom {
                point: z,
                weight: T::one(),
            }],
        }
    }

    /// `w * delta_a + (1 - w) * delta_b`.
    pub fn two_point(a: CirclePoint<T>, b: CirclePoint<T>, w: T) -> Self {
        Self::canonical(vec![
            Atom {
                point: a,
                weight: w,
            },
            Atom {
                point: b,
                weight: T::one() - w,
            },
        ])
    }

    /// Builds a canonical measure, rejecting negative weights and total mass away from 1.
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let mut mass = T::zero();
        for a in &atoms {
            if !(a.weight >= T::zero()) || !a.point.theta().is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "atom weight {} at angle {} is not a nonnegative finite number",
                    a.weight,
                    a.point.theta()
                )));
            }
            mass += a.weight;
        }
        if (mass - T::one()).abs() > T::mass_tol() {
            return Err(Error::MassNormalization { mass: mass.as_f64() });
        }
        Ok(Self::canonical(atoms))
    }

    fn canonical(mut atoms: Vec<Atom<T>>) -> Self {
        atoms.retain(|a| a.weight > T::zero());
        atoms.sort_by(|a, b| {
            a.point
                .theta()
                .partial_cmp(&b.point.theta())
                .unwrap_or(Ordering::Equal)
        });
        let tol = T::merge_tol();
        let mut clusters: Vec<Vec<Atom<T>>> = Vec::new();
        for atom in atoms {
            match clusters.last_mut() {
                Some(c) if atom.point.theta() - c[0].point.theta() <= tol => c.push(atom),
                _ => clusters.push(vec![atom]),
            }
        }
        if clusters.len() > 1 {
            let first = clusters[0][0].point;
            let last = clusters[clusters.len() - 1][0].point;
            if first.distance(last) <= tol {
                let tail = clusters.pop().unwrap_or_default();
                clusters[0].extend(tail);
            }
        }
        let mut merged: Vec<Atom<T>> = clusters.into_iter().map(merge_cluster).collect();
        merged.sort_by(|a, b| {
            a.point
                .theta()
                .partial_cmp(&b.point.theta())
                .unwrap_or(Ordering::Equal)
        });
        Self { atoms: merged }
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    /// Number of atoms, i.e. the cardinality of the support.
    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn total_mass(&self) -> T {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn integrate(&self, f: impl Fn(CirclePoint<T>) -> T) -> T {
        self.atoms.iter().map(|a| a.weight * f(a.point)).sum()
    }

    /// Weight of the atom within the merge tolerance of `z` (zero if none).
    pub fn weight_at(&self, z: CirclePoint<T>) -> T {
        self.atoms
            .iter()
            .filter(|a| a.point.distance(z) <= T::merge_tol())
            .map(|a| a.weight)
            .sum()
    }

    pub fn contains(&self, z: CirclePoint<T>) -> bool {
        self.weight_at(z) > T::zero()
    }

    /// The single atom when the measure is a Dirac mass.
    pub fn as_dirac(&self) -> Option<CirclePoint<T>> {
        match self.atoms.as_slice() {
            [a] => Some(a.point),
            _ => None,
        }
    }
}

fn merge_cluster<T: Scalar>(cluster: Vec<Atom<T>>) -> Atom<T> {
    let mut rep = cluster[0];
    let mut weight = T::zero();
    for a in &cluster {
        weight += a.weight;
        if a.weight > rep.weight {
            rep = *a;
        }
    }
    Atom {
        point: rep.point,
        weight,
    }
}

/// Value of the `n`-th test function (1-based): `1, cos t, sin t, cos 2t, sin 2t, ...`.
pub fn test_function<T: Scalar>(n: usize, z: CirclePoint<T>) -> T {
    debug_assert!(n >= 1);
    if n == 1 {
        return T::one();
    }
    let k = T::from_usize(n / 2);
    if n.is_multiple_of(2) {
        (k * z.theta()).cos()
    } else {
        (k * z.theta()).sin()
    }
}

/// Weighted squared-difference distance over the trigonometric test family.
pub fn measure_distance<T: Scalar>(mu: &AtomicMeasure<T>, nu: &AtomicMeasure<T>) -> T {
    let mut sum = T::zero();
    let mut weight = T::one();
    for n in 1..=(2 * TEST_FREQUENCIES + 1) {
        weight *= T::lit(0.5);
        let diff = mu.integrate(|z| test_function(n, z)) - nu.integrate(|z| test_function(n, z));
        sum += weight * diff * diff;
    }
    sum.sqrt()
}

/// Pushes `mu` through a kernel: `sum_i w_i * kernel(x_i)`.
pub fn pushforward<T, F>(mu: &AtomicMeasure<T>, mut kernel: F) -> Result<AtomicMeasure<T>>
where
    T: Scalar,
    F: FnMut(CirclePoint<T>) -> Result<AtomicMeasure<T>>,
{
    let mut out = Vec::new();
    for atom in mu.atoms() {
        let image = kernel(atom.point)?;
        let mass = image.total_mass();
        if (mass - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::MassNormalization { mass: mass.as_f64() });
        }
        out.extend(image.atoms().iter().map(|a| Atom {
            point: a.point,
            weight: atom.weight * a.weight,
        }));
    }
    Ok(AtomicMeasure::canonical(out))
}
