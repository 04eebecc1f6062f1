use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle. Constructed through [`Rect::new`], which orders
/// the corners, so `x0 <= x1` and `y0 <= y1` always hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(xa: f64, ya: f64, xb: f64, yb: f64) -> Self {
        Self {
            x0: xa.min(xb),
            y0: ya.min(yb),
            x1: xa.max(xb),
            y1: ya.max(yb),
        }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed containment.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

/// Interior facet between two fine cells `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub a: usize,
    pub b: usize,
    /// Facet length `|E_ab|`.
    pub length: f64,
    /// Distance between the two cell centers.
    pub distance: f64,
}

/// Uniform quadrilateral grid. Cells are numbered row-major, `id = j * nx + i`
/// with `i` along x.
#[derive(Debug, Clone, PartialEq)]
pub struct FineGrid {
    nx: usize,
    ny: usize,
    domain: Rect,
    hx: f64,
    hy: f64,
    facets: Vec<Facet>,
}

impl FineGrid {
    pub fn new(nx: usize, ny: usize, domain: Rect) -> Result<Self, GeometryError> {
        if nx == 0 || ny == 0 {
            return Err(GeometryError::InvalidConfig(format!(
                "cell counts must be positive, got {nx} x {ny}"
            )));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0)
            || !domain.width().is_finite()
            || !domain.height().is_finite()
        {
            return Err(GeometryError::InvalidConfig(format!(
                "degenerate domain rectangle {domain:?}"
            )));
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let mut facets = Vec::with_capacity((nx - 1) * ny + nx * (ny - 1));
        for j in 0..ny {
            for i in 0..nx {
                let id = j * nx + i;
                if i + 1 < nx {
                    facets.push(Facet { a: id, b: id + 1, length: hy, distance: hx });
                }
                if j + 1 < ny {
                    facets.push(Facet { a: id, b: id + nx, length: hx, distance: hy });
                }
            }
        }
        Ok(Self { nx, ny, domain, hx, hy, facets })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell_id(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_ij(&self, id: usize) -> (usize, usize) {
        (id % self.nx, id / self.nx)
    }

    pub fn cell_center(&self, id: usize) -> Point {
        let (i, j) = self.cell_ij(id);
        Point::new(
            self.domain.x0 + (i as f64 + 0.5) * self.hx,
            self.domain.y0 + (j as f64 + 0.5) * self.hy,
        )
    }

    pub fn cell_rect(&self, id: usize) -> Rect {
        let (i, j) = self.cell_ij(id);
        let x0 = self.domain.x0 + i as f64 * self.hx;
        let y0 = self.domain.y0 + j as f64 * self.hy;
        Rect::new(x0, y0, x0 + self.hx, y0 + self.hy)
    }

    /// Cell containing `p`; points on the domain boundary or on a grid line
    /// go to the cell on the upper/right side, clamped into the grid.
    pub fn locate(&self, p: Point) -> usize {
        let fi = ((p.x - self.domain.x0) / self.hx).floor();
        let fj = ((p.y - self.domain.y0) / self.hy).floor();
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = (fj.max(0.0) as usize).min(self.ny - 1);
        self.cell_id(i, j)
    }

    /// x coordinate of vertical grid line `k` (`0..=nx`).
    pub fn x_line(&self, k: usize) -> f64 {
        if k == self.nx {
            self.domain.x1
        } else {
            self.domain.x0 + k as f64 * self.hx
        }
    }

    pub fn y_line(&self, k: usize) -> f64 {
        if k == self.ny {
            self.domain.y1
        } else {
            self.domain.y0 + k as f64 * self.hy
        }
    }
}
