//! Waveguide domains, the straightening map and its metric.
//!
//! The tube is generated by translating a planar cross-section `S` along the
//! broken line `x -> (x, 0, beta*|x|)`, keeping `S` parallel to the `(e2, e3)`
//! plane. Points are plain `[f64; 3]` triples in length units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Slope of the reference curve.
///
/// `beta = 0` is only representable through [`ShearParam::straight`], which
/// marks the value as the straight-tube reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearParam {
    beta: f64,
    straight: bool,
}

impl ShearParam {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "shear beta must be a positive finite number, got {beta}"
            )));
        }
        Ok(Self {
            beta,
            straight: false,
        })
    }

    /// The flagged `beta = 0` straight tube.
    pub fn straight() -> Self {
        Self {
            beta: 0.0,
            straight: true,
        }
    }

    pub fn value(&self) -> f64 {
        self.beta
    }

    pub fn is_straight(&self) -> bool {
        self.straight
    }

    /// `1 + beta^2`, the transverse stiffness weight of the straightened form.
    pub fn stretch(&self) -> f64 {
        1.0 + self.beta * self.beta
    }
}

/// Axis-aligned rectangle `(a,b) x (c,d)` in the `(y1, y2)` cross-section plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Rect {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let r = Self { a, b, c, d };
        r.validate()?;
        Ok(r)
    }

    pub fn unit_square() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite());
        if !finite || !(self.a < self.b) || !(self.c < self.d) {
            return Err(Error::Degenerate(format!(
                "rectangle needs a < b and c < d, got ({}, {}) x ({}, {})",
                self.a, self.b, self.c, self.d
            )));
        }
        Ok(())
    }

    /// Extent `b - a` along `y1`.
    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Extent `d - c` along `y2`.
    pub fn height(&self) -> f64 {
        self.d - self.c
    }

    /// Aspect ratio `R = (d - c) / (b - a)`.
    pub fn aspect_ratio(&self) -> f64 {
        self.height() / self.width()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, y1: f64, y2: f64) -> bool {
        self.a < y1 && y1 < self.b && self.c < y2 && y2 < self.d
    }
}

/// Cell-centred indicator grid. Cell `(row, col)` covers
/// `[x0 + col*h, x0 + (col+1)*h] x [y0 + row*h, y0 + (row+1)*h]`; row 0 is the
/// bottom row (smallest `y2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    pub cell: f64,
    pub origin: [f64; 2],
    inside: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, cell: f64, origin: [f64; 2], inside: Vec<bool>) -> Result<Self> {
        let m = Self {
            rows,
            cols,
            cell,
            origin,
            inside,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a mask by sampling `shape` at cell centres.
    pub fn from_fn(rows: usize, cols: usize, cell: f64, origin: [f64; 2], shape: impl Fn(f64, f64) -> bool) -> Result<Self> {
        let mut inside = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let y1 = origin[0] + (c as f64 + 0.5) * cell;
                let y2 = origin[1] + (r as f64 + 0.5) * cell;
                inside.push(shape(y1, y2));
            }
        }
        Self::new(rows, cols, cell, origin, inside)
    }

    /// Unit square with the upper-right quadrant removed, on `4n x 4n` cells.
    pub fn l_shape(n: usize) -> Result<Self> {
        let cells = 4 * n.max(1);
        let h = 1.0 / cells as f64;
        Self::from_fn(cells, cells, h, [0.0, 0.0], |y1, y2| !(y1 > 0.5 && y2 > 0.5))
    }

    /// Parses the plain-text mask format: a `cell <size>` header line, an
    /// optional `origin <y1> <y2>` line, then one line per row from top to
    /// bottom with `1`/`#`/`X` for inside cells and `0`/`.` for outside ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cell = None;
        let mut origin = [0.0, 0.0];
        let mut lines: Vec<Vec<bool>> = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("cell") {
                let v: f64 = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::MaskParse(format!("bad cell size '{rest}'")))?;
                cell = Some(v);
                continue;
            }
            if let Some(rest) = line.strip_prefix("origin") {
                let vals: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::MaskParse(format!("bad origin '{rest}'")))?;
                if vals.len() != 2 {
                    return Err(Error::MaskParse("origin needs two numbers".into()));
                }
                origin = [vals[0], vals[1]];
                continue;
            }
            let row = line
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '1' | '#' | 'X' | 'x' => Ok(true),
                    '0' | '.' => Ok(false),
                    other => Err(Error::MaskParse(format!("unexpected character '{other}'"))),
                })
                .collect::<Result<Vec<bool>>>()?;
            lines.push(row);
        }
        let cell = cell.ok_or_else(|| Error::MaskParse("missing 'cell <size>' header".into()))?;
        let rows = lines.len();
        let cols = lines.first().map_or(0, Vec::len);
        if lines.iter().any(|r| r.len() != cols) {
            return Err(Error::MaskParse("ragged rows".into()));
        }
        // text is top-to-bottom, storage is bottom-to-top
        let inside = lines.into_iter().rev().flatten().collect();
        Self::new(rows, cols, cell, origin, inside)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 3 || self.cols < 3 {
            return Err(Error::Degenerate(format!(
                "mask must have at least 3x3 cells, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.inside.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: self.inside.len(),
            });
        }
        if !(self.cell.is_finite() && self.cell > 0.0) {
            return Err(Error::Degenerate(format!("mask cell size must be positive, got {}", self.cell)));
        }
        if !self.inside.iter().any(|&b| b) {
            return Err(Error::Degenerate("mask has no inside cells".into()));
        }
        Ok(())
    }

    pub fn cell_inside(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            return false;
        }
        self.inside[row as usize * self.cols + col as usize]
    }

    /// Bounding box of the cell grid.
    pub fn bounding_rect(&self) -> Rect {
        Rect {
            a: self.origin[0],
            b: self.origin[0] + self.cols as f64 * self.cell,
            c: self.origin[1],
            d: self.origin[1] + self.rows as f64 * self.cell,
        }
    }

    /// True when `(y1, y2)` lies in the open union of inside cells. Points on
    /// cell edges count as inside only if every adjacent cell is inside.
    pub fn contains(&self, y1: f64, y2: f64) -> bool {
        let u = (y1 - self.origin[0]) / self.cell;
        let v = (y2 - self.origin[1]) / self.cell;
        let tol = 1e-9;
        let cols = candidate_cells(u, tol);
        let rows = candidate_cells(v, tol);
        rows.iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .all(|(r, c)| self.cell_inside(r, c))
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }
}

fn candidate_cells(u: f64, tol: f64) -> Vec<isize> {
    let nearest = u.round();
    if (u - nearest).abs() < tol {
        vec![nearest as isize - 1, nearest as isize]
    } else {
        vec![u.floor() as isize]
    }
}

/// Cross-section description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossSectionSpec {
    Rectangle(Rect),
    Mask(Mask),
}

impl CrossSectionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Rectangle(r) => r.validate(),
            Self::Mask(m) => m.validate(),
        }
    }

    pub fn as_rect(&self) -> Option<&Rect> {
        match self {
            Self::Rectangle(r) => Some(r),
            Self::Mask(_) => None,
        }
    }

    pub fn bounding_rect(&self) -> Rect {
        match self {
            Self::Rectangle(r) => *r,
            Self::Mask(m) => m.bounding_rect(),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.bounding_rect().diameter()
    }

    pub fn contains(&self, y1: f64, y2: f64) -> bool {
        match self {
            Self::Rectangle(r) => r.contains(y1, y2),
            Self::Mask(m) => m.contains(y1, y2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    pub beta: ShearParam,
    pub section: CrossSectionSpec,
}

impl WaveguideSpec {
    pub fn new(beta: ShearParam, section: CrossSectionSpec) -> Result<Self> {
        section.validate()?;
        Ok(Self { beta, section })
    }

    pub fn rectangle(beta: f64, rect: Rect) -> Result<Self> {
        Self::new(ShearParam::new(beta)?, CrossSectionSpec::Rectangle(rect))
    }
}

/// Image of `(x, y1, y2)` under the map onto the tube.
pub fn map_point(beta: ShearParam, p: Point3) -> Point3 {
    let [x, y1, y2] = p;
    [x, y1, beta.value() * x.abs() + y2]
}

/// Tube membership for rectangular sections.
pub fn contains(spec: &WaveguideSpec, q: Point3) -> Result<bool> {
    let rect = spec.section.as_rect().ok_or_else(|| {
        Error::UnsupportedSection("membership of mask tubes is decided on the assembly grid".into())
    })?;
    let [s, t, z] = q;
    let lift = spec.beta.value() * s.abs();
    Ok(rect.a < t && t < rect.b && lift + rect.c < z && z < lift + rect.d)
}

/// Metric tensor induced by the straightening map on the half tube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor(pub [[f64; 3]; 3]);

impl MetricTensor {
    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Leading principal minors, all positive for a positive definite tensor.
    pub fn leading_minors(&self) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0],
            m[0][0] * m[1][1] - m[0][1] * m[1][0],
            self.determinant(),
        ]
    }

    pub fn is_symmetric(&self) -> bool {
        let m = &self.0;
        (0..3).all(|i| (0..3).all(|j| m[i][j] == m[j][i]))
    }
}

pub fn metric(beta: ShearParam) -> Result<MetricTensor> {
    if beta.is_straight() || beta.value() <= 0.0 {
        return Err(Error::InvalidParameter("metric requires beta > 0".into()));
    }
    let b = beta.value();
    Ok(MetricTensor([[1.0 + b * b, 0.0, b], [0.0, 1.0, 0.0], [b, 0.0, 1.0]]))
}

/// Boundary condition carried by a face of an auxiliary region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceCondition {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub name: String,
    pub description: String,
    pub condition: FaceCondition,
}

/// Triangular prism `{ -A < x < 0, 0 < y1 < b-a, 0 < y2 < x + A }` with
/// `A = (d - c)/sqrt(2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrismRegion {
    pub half_width: f64,
    pub depth: f64,
    pub faces: Vec<Face>,
}

impl PrismRegion {
    pub fn contains(&self, x: f64, y1: f64, y2: f64) -> bool {
        let a = self.half_width;
        -a < x && x < 0.0 && 0.0 < y1 && y1 < self.depth && 0.0 < y2 && y2 < x + a
    }

    /// Height of the slanted face above `y2 = 0` at abscissa `x`.
    pub fn slant(&self, x: f64) -> f64 {
        x + self.half_width
    }
}

pub fn prism_region(rect: &Rect) -> Result<PrismRegion> {
    rect.validate()?;
    let a = rect.height() / std::f64::consts::SQRT_2;
    let depth = rect.width();
    let faces = vec![
        Face {
            name: "T1".into(),
            description: format!("y1 = {depth}, -A < x < 0, 0 < y2 < x + A"),
            condition: FaceCondition::Dirichlet,
        },
        Face {
            name: "T2".into(),
            description: "y1 = 0, -A < x < 0, 0 < y2 < x + A".into(),
            condition: FaceCondition::Dirichlet,
        },
        Face {
            name: "T3".into(),
            description: "y2 = 0, -A < x < 0".into(),
            condition: FaceCondition::Dirichlet,
        },
        Face {
            name: "T4".into(),
            description: "x = 0, 0 < y2 < A".into(),
            condition: FaceCondition::Neumann,
        },
        Face {
            name: "slant".into(),
            description: format!("y2 = x + {a}"),
            condition: FaceCondition::Neumann,
        },
    ];
    Ok(PrismRegion {
        half_width: a,
        depth,
        faces,
    })
}
