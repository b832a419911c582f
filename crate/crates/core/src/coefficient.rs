//! Permeability rasters, synthetic high-contrast generators and source terms.
//!
//! Raster text format: the first non-comment line holds `nx ny`, followed by
//! `ny` lines of `nx` reals each, bottom row first. Lines starting with `#`
//! are ignored.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::CoefficientField;
use crate::mesh::FineMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RasterField {
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the bottom row.
    pub values: Vec<f64>,
}

impl RasterField {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput("raster dimensions must be positive".into()));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidInput(format!(
                "raster {nx}x{ny} needs {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("raster values must be finite".into()));
        }
        Ok(RasterField { nx, ny, values })
    }

    pub fn uniform(nx: usize, ny: usize, value: f64) -> Result<Self> {
        Self::new(nx, ny, vec![value; nx * ny])
    }

    /// Parses the text format without a sign check.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut values = Vec::new();
        let mut rows = 0usize;
        let mut last_line = 0usize;
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            last_line = line_no;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match header {
                None => {
                    let dims: Vec<usize> = tokens
                        .iter()
                        .map(|t| t.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Parse { line: line_no, msg: format!("malformed header {line:?}, expected `nx ny`") })?;
                    if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
                        return Err(Error::Parse { line: line_no, msg: format!("malformed header {line:?}, expected two positive integers") });
                    }
                    header = Some((dims[0], dims[1]));
                }
                Some((nx, ny)) => {
                    if rows == ny {
                        return Err(Error::Parse { line: line_no, msg: format!("extra data after {ny} rows") });
                    }
                    if tokens.len() != nx {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("row {} has {} values, expected {nx}", rows + 1, tokens.len()),
                        });
                    }
                    for t in tokens {
                        let v: f64 = t
                            .parse()
                            .map_err(|_| Error::Parse { line: line_no, msg: format!("not a number: {t:?}") })?;
                        if !v.is_finite() {
                            return Err(Error::Parse { line: line_no, msg: format!("non-finite value {t:?}") });
                        }
                        values.push(v);
                    }
                    rows += 1;
                }
            }
        }
        let (nx, ny) = header.ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        if rows < ny {
            return Err(Error::Parse {
                line: last_line + 1,
                msg: format!("expected {ny} rows, found {rows} ({} values short)", (ny - rows) * nx),
            });
        }
        Ok(RasterField { nx, ny, values })
    }

    /// Parses and requires strictly positive values.
    pub fn parse_positive(text: &str) -> Result<Self> {
        let field = Self::parse(text)?;
        if let Some(k) = field.values.iter().position(|&v| v <= 0.0) {
            // map the value index back to its line
            let row = k / field.nx;
            let line = data_line_number(text, row);
            return Err(Error::Parse { line, msg: format!("nonpositive value {}", field.values[k]) });
        }
        Ok(field)
    }

    /// Text form; values use the shortest representation that parses back
    /// to the same bits.
    pub fn format(&self) -> String {
        let mut s = format!("{} {}\n", self.nx, self.ny);
        for row in self.values.chunks(self.nx) {
            let mut first = true;
            for v in row {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v:?}");
            }
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.format())?;
        Ok(())
    }

    pub fn alpha0(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn alpha1(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contrast(&self) -> f64 {
        self.alpha1() / self.alpha0()
    }

    /// Cell values on the mesh, replicating each raster pixel over a block
    /// when the raster is coarser.
    pub fn to_cell_values(&self, mesh: &FineMesh) -> Result<Vec<f64>> {
        if mesh.n_x() % self.nx != 0 || mesh.n_y() % self.ny != 0 {
            return Err(Error::InvalidInput(format!(
                "raster {}x{} does not divide the mesh {}x{}",
                self.nx,
                self.ny,
                mesh.n_x(),
                mesh.n_y()
            )));
        }
        let bx = mesh.n_x() / self.nx;
        let by = mesh.n_y() / self.ny;
        Ok((0..mesh.num_cells())
            .map(|c| {
                let (i, j) = mesh.cell_ij(c);
                self.values[(j / by) * self.nx + i / bx]
            })
            .collect())
    }

    pub fn to_coefficient(&self, mesh: &FineMesh) -> Result<CoefficientField> {
        CoefficientField::new(mesh, self.to_cell_values(mesh)?)
    }
}

fn data_line_number(text: &str, row: usize) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .nth(row + 1)
        .map(|(k, _)| k + 1)
        .unwrap_or(0)
}

/// Reads a permeability raster; values must be positive.
pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterField> {
    RasterField::parse_positive(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Meandering high-permeability channels running from left to right.
    Channels,
    /// Randomly placed high-permeability blocks.
    Inclusions,
    Checkerboard,
}

impl std::str::FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "channels" => Ok(Pattern::Channels),
            "inclusions" => Ok(Pattern::Inclusions),
            "checkerboard" => Ok(Pattern::Checkerboard),
            _ => Err(Error::InvalidInput(format!("unknown pattern {s:?}"))),
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pattern::Channels => "channels",
            Pattern::Inclusions => "inclusions",
            Pattern::Checkerboard => "checkerboard",
        })
    }
}

/// Binary field with background 1 and high value `contrast`.
pub fn generate_highcontrast(
    nx: usize,
    ny: usize,
    pattern: Pattern,
    contrast: f64,
    seed: u64,
) -> Result<RasterField> {
    if !(contrast >= 1.0 && contrast.is_finite()) {
        return Err(Error::InvalidInput(format!("contrast must be at least 1, got {contrast}")));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("raster dimensions must be positive".into()));
    }
    let mut high = vec![false; nx * ny];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match pattern {
        Pattern::Checkerboard => {
            for j in 0..ny {
                for i in 0..nx {
                    high[j * nx + i] = (i + j) % 2 == 1;
                }
            }
        }
        Pattern::Channels => {
            let width = 2.min(ny);
            let count = (ny / 10).max(1);
            for k in 0..count {
                // start spread over the height, then a bounded random walk
                let band = ny as f64 / count as f64;
                let mut y = ((k as f64 + 0.5) * band) as i64;
                for i in 0..nx {
                    let top = (ny - width) as i64;
                    y = y.clamp(0, top);
                    for dy in 0..width {
                        high[(y as usize + dy) * nx + i] = true;
                    }
                    y += rng.random_range(-1..=1);
                }
            }
        }
        Pattern::Inclusions => {
            let count = ((nx * ny) / 40).max(1);
            for _ in 0..count {
                let w = rng.random_range(1..=3usize).min(nx);
                let h = rng.random_range(1..=3usize).min(ny);
                let i0 = rng.random_range(0..=nx - w);
                let j0 = rng.random_range(0..=ny - h);
                for j in j0..j0 + h {
                    for i in i0..i0 + w {
                        high[j * nx + i] = true;
                    }
                }
            }
        }
    }
    if contrast > 1.0 && nx * ny > 1 {
        // both levels must be present for the contrast to be attained
        if high.iter().all(|&h| h) {
            high[0] = false;
        }
        if high.iter().all(|&h| !h) {
            high[0] = true;
        }
    }
    let values = high.into_iter().map(|h| if h { contrast } else { 1.0 }).collect();
    RasterField::new(nx, ny, values)
}

/// Right-hand side `f` of `div u = -f`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceField {
    /// `2 pi^2 cos(pi x) cos(pi y)`.
    Example1,
    /// `+100` near the origin, `-100` near `(1, 1)`.
    Wells,
    Zero,
    Raster(RasterField),
}

impl SourceField {
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            SourceField::Example1 => Some(2.0 * PI * PI * (PI * x).cos() * (PI * y).cos()),
            SourceField::Wells => Some(if x < 0.1 && y < 0.1 {
                100.0
            } else if x > 0.9 && y > 0.9 {
                -100.0
            } else {
                0.0
            }),
            SourceField::Zero => Some(0.0),
            SourceField::Raster(_) => None,
        }
    }

    /// Cell values by the midpoint rule.
    pub fn cell_values(&self, mesh: &FineMesh) -> Result<Vec<f64>> {
        match self {
            SourceField::Raster(r) => r.to_cell_values(mesh),
            _ => Ok((0..mesh.num_cells())
                .map(|c| {
                    let (x, y) = mesh.cell_centroid(c);
                    self.eval(x, y).expect("analytic source")
                })
                .collect()),
        }
    }
}
