//! Splitting randomness attached to running extrema of the driver.
//!
//! A decoration is a pair `(epsilon, u)`: `u` is the mass the kernel sends to
//! the positive branch, `epsilon` the branch the map follows, with
//! `P(epsilon = +1 | u) = u`. Every draw is a pure function of the store seed
//! and the extremum key, so queries may arrive in any order.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::circle::Sign;
use crate::error::{Error, Result};
use crate::path::{BrownianPath, GridTime, PathPoint};
use crate::scalar::Scalar;
use crate::seed;

const EPSILON_LABEL: u64 = 0x4550_5349;

/// Law of the split weight `u` on `[0, 1]`; every variant has mean 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitLaw {
    DiracHalf,
    Coalescing,
    Uniform,
    /// Symmetric Beta(a, a).
    Beta(f64),
    /// Equal atoms at `u` and `1 - u`.
    TwoAtom(f64),
}

impl SplitLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SplitLaw::DiracHalf => 0.5,
            SplitLaw::Coalescing => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            }
            SplitLaw::Uniform => rng.random::<f64>(),
            SplitLaw::Beta(a) => Beta::new(a, a)
                .expect("shape validated at construction")
                .sample(rng),
            SplitLaw::TwoAtom(u) => {
                if rng.random::<bool>() {
                    u
                } else {
                    1.0 - u
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        0.5
    }

    pub fn is_dirac_half(&self) -> bool {
        matches!(self, SplitLaw::DiracHalf) || matches!(self, SplitLaw::TwoAtom(u) if *u == 0.5)
    }

    /// True when `u` can be exactly 0 or 1, which lets a split degenerate.
    pub fn has_endpoint_atoms(&self) -> bool {
        match *self {
            SplitLaw::Coalescing => true,
            SplitLaw::TwoAtom(u) => u == 0.0 || u == 1.0,
            _ => false,
        }
    }
}

impl fmt::Display for SplitLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitLaw::DiracHalf => write!(f, "dirac:0.5"),
            SplitLaw::Coalescing => write!(f, "coalescing"),
            SplitLaw::Uniform => write!(f, "uniform"),
            SplitLaw::Beta(a) => write!(f, "beta:{a}"),
            SplitLaw::TwoAtom(u) => write!(f, "two-atom:{u}"),
        }
    }
}

impl FromStr for SplitLaw {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let bad = |reason: String| Error::InvalidLaw {
            spec: spec.to_string(),
            reason,
        };
        let number = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("`{s}` is not a finite number")))
        };
        let trimmed = spec.trim();
        let (kind, arg) = match trimmed.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a)),
            None => (trimmed, None),
        };
        match (kind, arg) {
            ("dirac", Some(a)) => {
                let x = number(a)?;
                if x != 0.5 {
                    return Err(bad(format!("mean {x} differs from 1/2")));
                }
                Ok(SplitLaw::DiracHalf)
            }
            ("dirac-half", None) => Ok(SplitLaw::DiracHalf),
            ("coalescing", None) => Ok(SplitLaw::Coalescing),
            ("uniform", None) => Ok(SplitLaw::Uniform),
            ("beta", Some(a)) => {
                let (a, b) = match a.split_once(',') {
                    Some((x, y)) => (number(x)?, number(y)?),
                    None => {
                        let x = number(a)?;
                        (x, x)
                    }
                };
                if a <= 0.0 || b <= 0.0 {
                    return Err(bad("beta shapes must be positive".into()));
                }
                if a != b {
                    return Err(bad(format!("mean {} differs from 1/2", a / (a + b))));
                }
                Ok(SplitLaw::Beta(a))
            }
            ("two-atom", Some(a)) => {
                let u = number(a)?;
                if !(0.0..=1.0).contains(&u) {
                    return Err(bad(format!("atom {u} outside [0, 1]")));
                }
                Ok(SplitLaw::TwoAtom(u))
            }
            _ => Err(bad(
                "expected dirac:0.5, coalescing, uniform, beta:<a> or two-atom:<u>".into(),
            )),
        }
    }
}

/// Location of a running extremum: a grid index, or a crossing point inside
/// a grid segment identified by its segment and exact level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtremumKey {
    Grid(usize),
    Interior { segment: usize, level: u64 },
}

impl ExtremumKey {
    pub fn of<T: Scalar>(p: &PathPoint<T>) -> Self {
        if p.on_grid {
            ExtremumKey::Grid(p.index)
        } else {
            ExtremumKey::Interior {
                segment: p.index,
                level: p.value.as_f64().to_bits(),
            }
        }
    }

    fn labels(&self) -> [u64; 3] {
        match *self {
            ExtremumKey::Grid(j) => [1, j as u64, 0],
            ExtremumKey::Interior { segment, level } => [2, segment as u64, level],
        }
    }
}

/// Grid index of the earliest arg-min (`Plus`) or arg-max (`Minus`) of `W` over `[s, t]`.
pub fn extremum_key<T: Scalar>(
    path: &BrownianPath<T>,
    s: GridTime,
    t: GridTime,
    side: Sign,
) -> ExtremumKey {
    let (a, b) = (path.point(s), path.point(t));
    let p = match side {
        Sign::Plus => path.window_min(&a, &b),
        Sign::Minus => path.window_max(&a, &b),
    };
    ExtremumKey::of(&p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoration<T> {
    pub epsilon: Sign,
    pub u: T,
}

/// Memoized decorations of one side of one realization.
#[derive(Debug, Clone)]
pub struct DecorationStore<T> {
    side: Sign,
    law: SplitLaw,
    seed: u64,
    generation: u64,
    table: RefCell<HashMap<ExtremumKey, Decoration<T>>>,
}

impl<T: Scalar> DecorationStore<T> {
    pub fn new(side: Sign, law: SplitLaw, seed: u64) -> Self {
        Self {
            side,
            law,
            seed,
            generation: 0,
            table: RefCell::new(HashMap::new()),
        }
    }

    pub fn side(&self) -> Sign {
        self.side
    }

    pub fn law(&self) -> SplitLaw {
        self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of keys drawn so far.
    pub fn len(&self) -> usize {
        self.table.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn draw_u(&self, key: &ExtremumKey) -> f64 {
        let mut rng = seed::rng(seed::derive(self.seed, &key.labels()));
        self.law.sample(&mut rng)
    }

    fn draw_epsilon(&self, key: &ExtremumKey, u: f64) -> Sign {
        let labels = key.labels();
        let mut rng = seed::rng(seed::derive(
            self.seed,
            &[labels[0], labels[1], labels[2], EPSILON_LABEL, self.generation],
        ));
        if rng.random::<f64>() < u {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn get(&self, key: ExtremumKey) -> Decoration<T> {
        if let Some(d) = self.table.borrow().get(&key) {
            return *d;
        }
        let u = self.draw_u(&key);
        let d = Decoration {
            epsilon: self.draw_epsilon(&key, u),
            u: T::lit(u),
        };
        self.table.borrow_mut().insert(key, d);
        d
    }

    /// Copy with every `u` kept and every `epsilon` redrawn as Bernoulli(`u`),
    /// independently of all previous generations.
    pub fn resample_epsilons(&self) -> Self {
        let mut next = Self {
            side: self.side,
            law: self.law,
            seed: self.seed,
            generation: self.generation + 1,
            table: RefCell::new(HashMap::new()),
        };
        let table: HashMap<_, _> = self
            .table
            .borrow()
            .iter()
            .map(|(k, d)| {
                let eps = next.draw_epsilon(k, d.u.as_f64());
                (*k, Decoration { epsilon: eps, u: d.u })
            })
            .collect();
        next.table = RefCell::new(table);
        next
    }

    /// Forces `u` at `key` (the epsilon is drawn as usual from it).
    pub fn pin(&self, key: ExtremumKey, u: T) {
        let eps = self.draw_epsilon(&key, u.as_f64());
        self.table
            .borrow_mut()
            .insert(key, Decoration { epsilon: eps, u });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::sample_path;

    #[test]
    fn law_specs_parse_and_reject_bad_means() {
        assert_eq!("dirac:0.5".parse::<SplitLaw>().unwrap(), SplitLaw::DiracHalf);
        assert_eq!("coalescing".parse::<SplitLaw>().unwrap(), SplitLaw::Coalescing);
        assert_eq!("uniform".parse::<SplitLaw>().unwrap(), SplitLaw::Uniform);
        assert_eq!("beta:2.0".parse::<SplitLaw>().unwrap(), SplitLaw::Beta(2.0));
        assert_eq!("beta:3,3".parse::<SplitLaw>().unwrap(), SplitLaw::Beta(3.0));
        assert_eq!(
            "two-atom:0.25".parse::<SplitLaw>().unwrap(),
            SplitLaw::TwoAtom(0.25)
        );
        for bad in ["dirac:0.3", "beta:1,2", "beta:-1", "two-atom:1.5", "gauss", "uniform:2", ""] {
            assert!(bad.parse::<SplitLaw>().is_err(), "{bad} accepted");
        }
        for law in [SplitLaw::DiracHalf, SplitLaw::Beta(2.5), SplitLaw::TwoAtom(0.1)] {
            assert_eq!(law.to_string().parse::<SplitLaw>().unwrap(), law);
        }
    }

    #[test]
    fn keys_follow_earliest_extremum() {
        let p = BrownianPath::from_values(0.1, vec![0.0, -1.0, 0.5, -1.0, -0.2]).unwrap();
        let (s, t) = (GridTime(0), GridTime(4));
        assert_eq!(extremum_key(&p, GridTime(2), GridTime(2), Sign::Plus), ExtremumKey::Grid(2));
        assert_eq!(extremum_key(&p, s, t, Sign::Plus), ExtremumKey::Grid(1));
        assert_eq!(extremum_key(&p, GridTime(1), GridTime(3), Sign::Plus), ExtremumKey::Grid(1));
        assert_eq!(extremum_key(&p, GridTime(2), t, Sign::Plus), ExtremumKey::Grid(3));
        assert_eq!(extremum_key(&p, GridTime(1), t, Sign::Minus), ExtremumKey::Grid(2));
        let down = BrownianPath::from_values(0.1, vec![0.0, -0.1, -0.3]).unwrap();
        assert_eq!(extremum_key(&down, s, GridTime(2), Sign::Plus), ExtremumKey::Grid(2));
    }

    #[test]
    fn same_key_returns_same_pair_regardless_of_order() {
        let a = DecorationStore::<f64>::new(Sign::Plus, SplitLaw::Uniform, 9);
        let b = DecorationStore::<f64>::new(Sign::Plus, SplitLaw::Uniform, 9);
        let keys = [ExtremumKey::Grid(3), ExtremumKey::Grid(8), ExtremumKey::Interior { segment: 4, level: 7 }];
        let first: Vec<_> = keys.iter().map(|k| a.get(*k)).collect();
        let reversed: Vec<_> = keys.iter().rev().map(|k| b.get(*k)).collect();
        assert_eq!(first, reversed.into_iter().rev().collect::<Vec<_>>());
        assert_eq!(a.get(keys[0]), first[0]);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn dirac_half_has_fair_epsilon() {
        let s = DecorationStore::<f64>::new(Sign::Minus, SplitLaw::DiracHalf, 1);
        let n = 10_000;
        let mut plus = 0;
        for j in 0..n {
            let d = s.get(ExtremumKey::Grid(j));
            assert_eq!(d.u, 0.5);
            plus += usize::from(d.epsilon == Sign::Plus);
        }
        let freq = plus as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.015, "{freq}");
    }

    #[test]
    fn coalescing_ties_epsilon_to_u() {
        let s = DecorationStore::<f64>::new(Sign::Plus, SplitLaw::Coalescing, 2);
        let n = 10_000;
        let mut total = 0.0;
        for j in 0..n {
            let d = s.get(ExtremumKey::Grid(j));
            assert!(d.u == 0.0 || d.u == 1.0);
            assert_eq!(d.epsilon.value::<f64>(), 2.0 * d.u - 1.0);
            total += d.u;
        }
        assert!((total / n as f64 - 0.5).abs() < 0.015);
    }

    #[test]
    fn resampling_keeps_u_and_respects_degenerate_weights() {
        let s = DecorationStore::<f64>::new(Sign::Plus, SplitLaw::Uniform, 3);
        let (one, zero, half) = (ExtremumKey::Grid(1), ExtremumKey::Grid(2), ExtremumKey::Grid(3));
        s.pin(one, 1.0);
        s.pin(zero, 0.0);
        s.pin(half, 0.5);
        let mut store = s.clone();
        let mut plus = 0;
        let n = 10_000;
        for _ in 0..n {
            store = store.resample_epsilons();
            assert_eq!(store.get(one).epsilon, Sign::Plus);
            assert_eq!(store.get(zero).epsilon, Sign::Minus);
            assert_eq!(store.get(half).u, 0.5);
            plus += usize::from(store.get(half).epsilon == Sign::Plus);
        }
        assert!((plus as f64 / n as f64 - 0.5).abs() < 0.015);
    }

    #[test]
    fn consistency_over_random_windows() {
        let p = sample_path(0.01, 2.0, 77).unwrap();
        let store = DecorationStore::<f64>::new(Sign::Plus, SplitLaw::Beta(2.0), 5);
        let mut seen: HashMap<usize, Decoration<f64>> = HashMap::new();
        let mut rng = seed::rng(8);
        for _ in 0..500 {
            let s = rng.random_range(0..200);
            let t = rng.random_range(s..=200);
            let key = extremum_key(&p, GridTime(s), GridTime(t), Sign::Plus);
            let ExtremumKey::Grid(j) = key else { unreachable!() };
            let d = store.get(key);
            if let Some(prev) = seen.insert(j, d) {
                assert_eq!(prev, d);
            }
        }
    }
}
