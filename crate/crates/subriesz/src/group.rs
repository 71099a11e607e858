//! The two concrete stratified groups used throughout the crate: Euclidean
//! space ℝᵈ and the first Heisenberg group H¹, described as data (group law,
//! dilations, homogeneous norm, horizontal vector fields).
//!
//! H¹ uses coordinates (x, y, u) with u central, the symmetric group law
//! (x,y,u)·(x',y',u') = (x+x', y+y', u+u'+(xy'-yx')/2), dilation exponents
//! (1,1,2), and the gauge norm ((x²+y²)² + 16u²)^(1/4). With this convention
//! the inverse is coordinatewise negation and Haar measure is Lebesgue
//! measure in coordinates.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Maximum number of coordinates supported by [`Point`].
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawTag {
    Euclidean,
    Heisenberg1,
}

/// A concrete stratified group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDescriptor {
    law_tag: LawTag,
    topological_dimension: usize,
    dilation_exponents: [u32; MAX_DIM],
    homogeneous_dimension: u32,
    horizontal_count: usize,
}

/// A point in coordinates (exponential chart).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(coords.len() <= MAX_DIM, "point dimension exceeds MAX_DIM");
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Point::new(&vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.coords()[i]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }
}

impl GroupDescriptor {
    /// Abelian group ℝᵈ; every coordinate is horizontal.
    pub fn euclidean(d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::invalid(format!(
                "euclidean dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        let mut exps = [0u32; MAX_DIM];
        exps[..d].fill(1);
        Ok(GroupDescriptor {
            law_tag: LawTag::Euclidean,
            topological_dimension: d,
            dilation_exponents: exps,
            homogeneous_dimension: d as u32,
            horizontal_count: d,
        })
    }

    /// The first Heisenberg group, topological dimension 3, Q = 4.
    pub fn heisenberg1() -> Self {
        GroupDescriptor {
            law_tag: LawTag::Heisenberg1,
            topological_dimension: 3,
            dilation_exponents: [1, 1, 2, 0],
            homogeneous_dimension: 4,
            horizontal_count: 2,
        }
    }

    /// Parse a CLI tag: `euclidean:d` or `heisenberg1`.
    pub fn from_tag(tag: &str) -> Result<Self> {
        if tag == "heisenberg1" {
            return Ok(Self::heisenberg1());
        }
        if let Some(d) = tag.strip_prefix("euclidean:") {
            let d: usize = d
                .parse()
                .map_err(|_| Error::invalid(format!("bad euclidean dimension in tag {tag:?}")))?;
            return Self::euclidean(d);
        }
        Err(Error::invalid(format!(
            "unknown group tag {tag:?} (expected \"euclidean:d\" or \"heisenberg1\")"
        )))
    }

    pub fn tag(&self) -> String {
        match self.law_tag {
            LawTag::Euclidean => format!("euclidean:{}", self.topological_dimension),
            LawTag::Heisenberg1 => "heisenberg1".into(),
        }
    }

    pub fn law_tag(&self) -> LawTag {
        self.law_tag
    }

    pub fn topological_dimension(&self) -> usize {
        self.topological_dimension
    }

    /// Q, the trace of the dilation generator.
    pub fn homogeneous_dimension(&self) -> f64 {
        self.homogeneous_dimension as f64
    }

    /// Number of first-stratum (horizontal) fields.
    pub fn horizontal_count(&self) -> usize {
        self.horizontal_count
    }

    pub fn dilation_exponents(&self) -> &[u32] {
        &self.dilation_exponents[..self.topological_dimension]
    }

    fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.topological_dimension {
            return Err(Error::DimensionMismatch {
                expected: self.topological_dimension,
                got: p.dim(),
            });
        }
        Ok(())
    }

    /// Group product p·q.
    pub fn multiply(&self, p: &Point, q: &Point) -> Result<Point> {
        self.check_dim(p)?;
        self.check_dim(q)?;
        Ok(self.multiply_unchecked(p, q))
    }

    pub fn multiply_unchecked(&self, p: &Point, q: &Point) -> Point {
        match self.law_tag {
            LawTag::Euclidean => {
                let mut c = [0.0; MAX_DIM];
                for i in 0..self.topological_dimension {
                    c[i] = p.coords[i] + q.coords[i];
                }
                Point {
                    coords: c,
                    dim: self.topological_dimension,
                }
            }
            LawTag::Heisenberg1 => {
                let (x, y, u) = (p.coords[0], p.coords[1], p.coords[2]);
                let (x2, y2, u2) = (q.coords[0], q.coords[1], q.coords[2]);
                Point {
                    coords: [x + x2, y + y2, u + u2 + 0.5 * (x * y2 - y * x2), 0.0],
                    dim: 3,
                }
            }
        }
    }

    /// Group inverse; equals coordinatewise negation for both laws.
    pub fn inverse(&self, p: &Point) -> Result<Point> {
        self.check_dim(p)?;
        let mut c = [0.0; MAX_DIM];
        for i in 0..p.dim() {
            c[i] = -p.coords[i];
        }
        Ok(Point {
            coords: c,
            dim: p.dim(),
        })
    }

    /// Anisotropic dilation δ_r: coordinate i scaled by r^(exponent i).
    pub fn dilate(&self, r: f64, p: &Point) -> Result<Point> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("dilation factor must be > 0, got {r}")));
        }
        self.check_dim(p)?;
        let mut c = [0.0; MAX_DIM];
        for i in 0..p.dim() {
            c[i] = p.coords[i] * r.powi(self.dilation_exponents[i] as i32);
        }
        Ok(Point {
            coords: c,
            dim: p.dim(),
        })
    }

    /// Homogeneous (gauge) norm: |p| on ℝᵈ, the Korányi gauge on H¹.
    pub fn homogeneous_norm(&self, p: &Point) -> Result<f64> {
        self.check_dim(p)?;
        Ok(self.homogeneous_norm_unchecked(p))
    }

    pub fn homogeneous_norm_unchecked(&self, p: &Point) -> f64 {
        match self.law_tag {
            LawTag::Euclidean => p
                .coords()
                .iter()
                .map(|c| c * c)
                .sum::<f64>()
                .sqrt(),
            LawTag::Heisenberg1 => {
                let s = p.coords[0] * p.coords[0] + p.coords[1] * p.coords[1];
                let u = p.coords[2];
                (s * s + 16.0 * u * u).powf(0.25)
            }
        }
    }

    /// Coefficients of the horizontal field X_j at p in the coordinate frame.
    ///
    /// Euclidean: X_j = ∂_j. Heisenberg: X₁ = ∂_x - (y/2)∂_u,
    /// X₂ = ∂_y + (x/2)∂_u.
    pub fn horizontal_coefficients(&self, j: usize, p: &Point) -> Result<[f64; MAX_DIM]> {
        if j >= self.horizontal_count {
            return Err(Error::invalid(format!(
                "horizontal field index {j} out of range (n = {})",
                self.horizontal_count
            )));
        }
        self.check_dim(p)?;
        let mut v = [0.0; MAX_DIM];
        match self.law_tag {
            LawTag::Euclidean => v[j] = 1.0,
            LawTag::Heisenberg1 => {
                if j == 0 {
                    v[0] = 1.0;
                    v[2] = -0.5 * p.coords[1];
                } else {
                    v[1] = 1.0;
                    v[2] = 0.5 * p.coords[0];
                }
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn h1() -> GroupDescriptor {
        GroupDescriptor::heisenberg1()
    }

    #[test]
    fn heisenberg_law_hand_example() {
        let g = h1();
        let p = g
            .multiply(&Point::new(&[1.0, 0.0, 0.0]), &Point::new(&[0.0, 1.0, 0.0]))
            .unwrap();
        assert_eq!(p.coords(), &[1.0, 1.0, 0.5]);
    }

    #[test]
    fn identity_and_inverse() {
        let g = h1();
        let p = Point::new(&[1.0, 2.0, 3.0]);
        let id = Point::zero(3);
        assert_eq!(g.multiply(&p, &id).unwrap(), p);
        assert_eq!(g.inverse(&p).unwrap().coords(), &[-1.0, -2.0, -3.0]);
        assert_eq!(g.inverse(&id).unwrap(), id);
    }

    #[test]
    fn dilation_hand_example() {
        let g = h1();
        let p = g.dilate(2.0, &Point::new(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(p.coords(), &[2.0, 2.0, 4.0]);
        let q = g.dilate(1.0, &Point::new(&[0.3, -0.4, 0.9])).unwrap();
        assert_eq!(q.coords(), &[0.3, -0.4, 0.9]);
    }

    #[test]
    fn gauge_norm_values() {
        let g = h1();
        assert_relative_eq!(
            g.homogeneous_norm(&Point::new(&[0.0, 0.0, 1.0])).unwrap(),
            2.0
        );
        assert_eq!(g.homogeneous_norm(&Point::zero(3)).unwrap(), 0.0);
        let e = GroupDescriptor::euclidean(2).unwrap();
        assert_relative_eq!(
            e.homogeneous_norm(&Point::new(&[3.0, 4.0])).unwrap(),
            5.0
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = h1();
        let bad = Point::new(&[1.0, 2.0]);
        assert!(g.multiply(&bad, &bad).is_err());
        assert!(g.homogeneous_norm(&bad).is_err());
        assert!(g.dilate(-1.0, &Point::zero(3)).is_err());
    }

    #[test]
    fn tag_round_trip() {
        for tag in ["euclidean:2", "euclidean:3", "heisenberg1"] {
            assert_eq!(GroupDescriptor::from_tag(tag).unwrap().tag(), tag);
        }
        assert!(GroupDescriptor::from_tag("lie:5").is_err());
    }

    #[test]
    fn homogeneous_dimensions() {
        assert_eq!(h1().homogeneous_dimension(), 4.0);
        assert_eq!(
            GroupDescriptor::euclidean(3).unwrap().homogeneous_dimension(),
            3.0
        );
    }

    fn arb_point() -> impl Strategy<Value = Point> {
        prop::array::uniform3(-5.0f64..5.0).prop_map(|c| Point::new(&c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn associativity(p in arb_point(), q in arb_point(), r in arb_point()) {
            let g = h1();
            let lhs = g.multiply(&g.multiply(&p, &q).unwrap(), &r).unwrap();
            let rhs = g.multiply(&p, &g.multiply(&q, &r).unwrap()).unwrap();
            for i in 0..3 {
                prop_assert!((lhs.coord(i) - rhs.coord(i)).abs() <= 1e-12);
            }
        }

        #[test]
        fn inverse_cancels(p in arb_point()) {
            let g = h1();
            let prod = g.multiply(&p, &g.inverse(&p).unwrap()).unwrap();
            for i in 0..3 {
                prop_assert!(prod.coord(i).abs() <= 1e-12);
            }
        }

        #[test]
        fn dilations_compose(p in arb_point(), r in 0.1f64..4.0, s in 0.1f64..4.0) {
            let g = h1();
            let lhs = g.dilate(r, &g.dilate(s, &p).unwrap()).unwrap();
            let rhs = g.dilate(r * s, &p).unwrap();
            for i in 0..3 {
                prop_assert!((lhs.coord(i) - rhs.coord(i)).abs() <= 1e-12 * (1.0 + rhs.coord(i).abs()));
            }
        }

        #[test]
        fn gauge_is_homogeneous_and_symmetric(p in arb_point(), r in 0.1f64..8.0) {
            let g = h1();
            let n = g.homogeneous_norm(&p).unwrap();
            let nd = g.homogeneous_norm(&g.dilate(r, &p).unwrap()).unwrap();
            prop_assert!((nd - r * n).abs() <= 1e-12 * (1.0 + r * n));
            let ni = g.homogeneous_norm(&g.inverse(&p).unwrap()).unwrap();
            prop_assert!((ni - n).abs() <= 1e-12 * (1.0 + n));
        }
    }
}
