use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rectangle `[x0, x1] x [y0, y1]` sampled by an `nx x ny` node grid.
///
/// Node `(i, j)` sits at `(x0 + i h_x, y0 + j h_y)`; arrays over the grid are
/// stored row by row with index `j * nx + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub struct GridDomain {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    nx: usize,
    ny: usize,
}

#[derive(Serialize, Deserialize)]
struct DomainSpec {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    nx: usize,
    ny: usize,
}

impl TryFrom<DomainSpec> for GridDomain {
    type Error = Error;
    fn try_from(s: DomainSpec) -> Result<Self> {
        GridDomain::new(s.x0, s.y0, s.x1, s.y1, s.nx, s.ny)
    }
}

impl From<GridDomain> for DomainSpec {
    fn from(d: GridDomain) -> Self {
        DomainSpec {
            x0: d.x0,
            y0: d.y0,
            x1: d.x1,
            y1: d.y1,
            nx: d.nx,
            ny: d.ny,
        }
    }
}

impl GridDomain {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) || !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidDomain(format!(
                "rectangle [{x0}, {x1}] x [{y0}, {y1}] is empty or not finite"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 nodes per side, got {nx} x {ny}"
            )));
        }
        Ok(GridDomain {
            x0,
            y0,
            x1,
            y1,
            nx,
            ny,
        })
    }

    /// The square `[-half, half]^2` with `n` nodes per side.
    pub fn centered_square(half: f64, n: usize) -> Result<Self> {
        GridDomain::new(-half, -half, half, half, n, n)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        GridDomain::new(0.0, 0.0, 1.0, 1.0, n, n)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        // the last node is pinned to the far corner to avoid rounding drift
        let x = if i + 1 == self.nx {
            self.x1
        } else {
            self.x0 + i as f64 * self.hx()
        };
        let y = if j + 1 == self.ny {
            self.y1
        } else {
            self.y0 + j as f64 * self.hy()
        };
        [x, y]
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |k| {
            let (i, j) = self.coords(k);
            self.node(i, j)
        })
    }

    fn slack(&self) -> f64 {
        1e-12 * (self.x1 - self.x0).abs().max((self.y1 - self.y0).abs()).max(1.0)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let s = self.slack();
        p[0] >= self.x0 - s && p[0] <= self.x1 + s && p[1] >= self.y0 - s && p[1] <= self.y1 + s
    }

    /// Whether the closed disk `B(c, r)` lies in the rectangle.
    pub fn contains_disk(&self, c: [f64; 2], r: f64) -> bool {
        let s = self.slack();
        c[0] - r >= self.x0 - s
            && c[0] + r <= self.x1 + s
            && c[1] - r >= self.y0 - s
            && c[1] + r <= self.y1 + s
    }

    /// Cell containing `p` and the local coordinates `(s, t)` in `[0, 1]^2`.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        if !self.contains(p) {
            return None;
        }
        let fx = ((p[0] - self.x0) / self.hx()).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p[1] - self.y0) / self.hy()).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Dual-cell area of a node: `h_x h_y`, halved per side on the boundary.
    pub fn dual_area(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.nx { 0.5 } else { 1.0 };
        let wy = if j == 0 || j + 1 == self.ny { 0.5 } else { 1.0 };
        wx * wy * self.hx() * self.hy()
    }

    /// The same rectangle at a different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Self> {
        GridDomain::new(self.x0, self.y0, self.x1, self.y1, nx, ny)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_nodes() {
        let d = GridDomain::new(-1.0, 0.0, 1.0, 2.0, 5, 3).unwrap();
        assert_eq!(d.hx(), 0.5);
        assert_eq!(d.hy(), 1.0);
        assert_eq!(d.node(4, 2), [1.0, 2.0]);
        assert_eq!(d.node(1, 1), [-0.5, 1.0]);
        assert_eq!(d.coords(d.index(3, 2)), (3, 2));
    }

    #[test]
    fn rejects_degenerate_rectangles() {
        assert!(GridDomain::new(0.0, 0.0, 0.0, 1.0, 4, 4).is_err());
        assert!(GridDomain::new(0.0, 0.0, 1.0, 1.0, 1, 4).is_err());
        assert!(GridDomain::new(0.0, 0.0, f64::NAN, 1.0, 4, 4).is_err());
    }

    #[test]
    fn locate_handles_far_edge() {
        let d = GridDomain::unit_square(5).unwrap();
        assert_eq!(d.locate([1.0, 1.0]), Some((3, 3, 1.0, 1.0)));
        let (i, j, s, t) = d.locate([0.3, 0.6]).unwrap();
        assert_eq!((i, j), (1, 2));
        assert!((s - 0.2).abs() < 1e-12 && (t - 0.4).abs() < 1e-12);
        assert!(d.locate([1.1, 0.5]).is_none());
    }

    #[test]
    fn dual_areas_sum_to_rectangle() {
        let d = GridDomain::new(0.0, 0.0, 2.0, 1.0, 9, 5).unwrap();
        let total: f64 = (0..d.len())
            .map(|k| {
                let (i, j) = d.coords(k);
                d.dual_area(i, j)
            })
            .sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn serde_validates() {
        let d: GridDomain =
            serde_json::from_str(r#"{"x0":0,"y0":0,"x1":1,"y1":1,"nx":3,"ny":3}"#).unwrap();
        assert_eq!(d.nx(), 3);
        assert!(serde_json::from_str::<GridDomain>(r#"{"x0":1,"y0":0,"x1":0,"y1":1,"nx":3,"ny":3}"#).is_err());
    }
}
