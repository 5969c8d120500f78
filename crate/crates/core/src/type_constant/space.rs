use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TypeConstantError;

/// Finite-dimensional target space `X`: the scalars, or `ℓ^q` of dimension `m`
/// with `q ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    Scalar,
    Sequence { dim: usize, q: f64 },
}

impl Space {
    pub fn sequence(dim: usize, q: f64) -> Result<Self, TypeConstantError> {
        if dim == 0 || q.is_nan() || q < 1.0 {
            return Err(TypeConstantError::InvalidSpace(format!("l{q}:{dim}")));
        }
        Ok(Space::Sequence { dim, q })
    }

    pub fn l1(dim: usize) -> Self {
        Space::Sequence { dim, q: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Space::Scalar => 1,
            Space::Sequence { dim, .. } => *dim,
        }
    }

    fn q(&self) -> f64 {
        match self {
            Space::Scalar => 2.0,
            Space::Sequence { q, .. } => *q,
        }
    }

    fn dual_q(&self) -> f64 {
        conjugate(self.q())
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        lq_norm(v, self.q())
    }

    /// Norm of `X* = ℓ^{q'}`.
    pub fn dual_norm(&self, z: &[f64]) -> f64 {
        lq_norm(z, self.dual_q())
    }

    /// Writes into `out` a functional `φ ∈ X*` with `‖φ‖ ≤ 1` and `⟨φ, v⟩ = ‖v‖`.
    pub fn norming_functional(&self, v: &[f64], out: &mut [f64]) {
        norming(v, self.q(), out)
    }

    /// Writes into `out` a vector `ψ ∈ X` with `‖ψ‖ ≤ 1` and `⟨z, ψ⟩ = ‖z‖_{X*}`.
    pub fn norming_vector(&self, z: &[f64], out: &mut [f64]) {
        norming(z, self.dual_q(), out)
    }
}

fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

fn lq_norm(v: &[f64], q: f64) -> f64 {
    if v.len() == 1 {
        return v[0].abs();
    }
    if q.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else if q == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if q == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Norming element of the dual of `ℓ^q` at `v`. For `q = 1` zero coordinates
/// get `0`; for `q = ∞` the smallest index attaining the maximum is chosen.
fn norming(v: &[f64], q: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    if v.len() == 1 {
        out[0] = sign(v[0]);
        return;
    }
    if q == 1.0 {
        for (o, x) in out.iter_mut().zip(v) {
            *o = sign(*x);
        }
    } else if q.is_infinite() {
        let mut best = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[best].abs() {
                best = j;
            }
        }
        out[best] = sign(v[best]);
    } else {
        let norm = lq_norm(v, q);
        if norm == 0.0 {
            return;
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o = sign(*x) * (x.abs() / norm).powf(q - 1.0);
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::Scalar => write!(f, "scalar"),
            Space::Sequence { dim, q } if q.is_infinite() => write!(f, "linf:{dim}"),
            Space::Sequence { dim, q } => write!(f, "l{q}:{dim}"),
        }
    }
}

/// `scalar`, `l1:7`, `l2:3`, `l1.5:4`, `linf:4`.
impl FromStr for Space {
    type Err = TypeConstantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "scalar" {
            return Ok(Space::Scalar);
        }
        let bad = || TypeConstantError::InvalidSpace(s.to_string());
        let rest = s.strip_prefix('l').ok_or_else(bad)?;
        let (q, dim) = rest.split_once(':').ok_or_else(bad)?;
        let q = if q == "inf" {
            f64::INFINITY
        } else {
            q.parse::<f64>().map_err(|_| bad())?
        };
        let dim = dim.parse::<usize>().map_err(|_| bad())?;
        Space::sequence(dim, q)
    }
}

impl Serialize for Space {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Space {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spaces() -> Vec<Space> {
        vec![
            Space::Scalar,
            Space::l1(4),
            Space::sequence(4, 2.0).unwrap(),
            Space::sequence(4, 1.5).unwrap(),
            Space::sequence(4, f64::INFINITY).unwrap(),
        ]
    }

    #[test]
    fn parse_display_round_trip() {
        for s in spaces() {
            assert_eq!(s.to_string().parse::<Space>().unwrap(), s);
        }
        assert_eq!("l1:7".parse::<Space>().unwrap(), Space::l1(7));
        assert!("l0.5:3".parse::<Space>().is_err());
        assert!("l2:0".parse::<Space>().is_err());
        assert!("banach".parse::<Space>().is_err());
    }

    #[test]
    fn tie_breaking_picks_smallest_index() {
        let linf = Space::sequence(3, f64::INFINITY).unwrap();
        let mut out = [0.0; 3];
        linf.norming_functional(&[-2.0, 2.0, 1.0], &mut out);
        assert_eq!(out, [-1.0, 0.0, 0.0]);
        Space::l1(3).norming_vector(&[1.0, -3.0, 3.0], &mut out);
        assert_eq!(out, [0.0, -1.0, 0.0]);
    }

    fn vec4() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 4)
    }

    proptest! {
        #[test]
        fn norm_axioms(a in vec4(), b in vec4(), t in -5.0f64..5.0) {
            for s in spaces() {
                let (a, b) = (&a[..s.dim()], &b[..s.dim()]);
                let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                prop_assert!(s.norm(&sum) <= s.norm(a) + s.norm(b) + 1e-9);
                let scaled: Vec<f64> = a.iter().map(|x| t * x).collect();
                prop_assert!((s.norm(&scaled) - t.abs() * s.norm(a)).abs() <= 1e-9 * (1.0 + s.norm(a)));
            }
        }

        #[test]
        fn norming_elements_attain_the_norm(v in vec4()) {
            for s in spaces() {
                let v = &v[..s.dim()];
                let mut phi = vec![0.0; s.dim()];
                s.norming_functional(v, &mut phi);
                let pairing: f64 = phi.iter().zip(v).map(|(a, b)| a * b).sum();
                prop_assert!((pairing - s.norm(v)).abs() <= 1e-9 * (1.0 + s.norm(v)));
                prop_assert!(s.dual_norm(&phi) <= 1.0 + 1e-9);

                let mut psi = vec![0.0; s.dim()];
                s.norming_vector(v, &mut psi);
                let pairing: f64 = psi.iter().zip(v).map(|(a, b)| a * b).sum();
                prop_assert!((pairing - s.dual_norm(v)).abs() <= 1e-9 * (1.0 + s.dual_norm(v)));
                prop_assert!(s.norm(&psi) <= 1.0 + 1e-9);
            }
        }
    }
}
