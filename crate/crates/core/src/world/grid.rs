use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Binary occupancy grid. Cell `(0, 0)` has its lower-left corner at
/// `origin`; `ix` grows along +x and `iy` along +y.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: (f64, f64),
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, origin: (f64, f64)) -> Result<Self> {
        Self::from_cells(
            width,
            height,
            resolution,
            origin,
            vec![false; width * height],
        )
    }

    /// `cells` is row-major with `iy = 0` first.
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        cells: Vec<bool>,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        if cells.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "grid of {width}x{height} needs {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(OccupancyGrid {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.width + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, occupied: bool) {
        self.cells[iy * self.width + ix] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.contains(&true)
    }

    /// Cell containing the point, if it lies on the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin.0) / self.resolution).floor();
        let fy = ((y - self.origin.1) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.0 + (ix as f64 + 0.5) * self.resolution,
            self.origin.1 + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Points off the grid are free.
    pub fn occupied_at(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).is_some_and(|(ix, iy)| self.get(ix, iy))
    }

    /// True when a disc of radius `r` touches any occupied cell square.
    pub fn disc_hits_occupied(&self, x: f64, y: f64, r: f64) -> bool {
        let res = self.resolution;
        let lo_x = (((x - r - self.origin.0) / res).floor()).max(0.0) as usize;
        let lo_y = (((y - r - self.origin.1) / res).floor()).max(0.0) as usize;
        let hi_x = ((x + r - self.origin.0) / res).floor();
        let hi_y = ((y + r - self.origin.1) / res).floor();
        if hi_x < 0.0 || hi_y < 0.0 {
            return false;
        }
        let hi_x = (hi_x as usize).min(self.width.saturating_sub(1));
        let hi_y = (hi_y as usize).min(self.height.saturating_sub(1));
        if self.width == 0 || self.height == 0 || lo_x > hi_x || lo_y > hi_y {
            return false;
        }
        for iy in lo_y..=hi_y {
            let y0 = self.origin.1 + iy as f64 * res;
            let dy = (y0 - y).max(0.0).max(y - (y0 + res));
            for ix in lo_x..=hi_x {
                if !self.get(ix, iy) {
                    continue;
                }
                let x0 = self.origin.0 + ix as f64 * res;
                let dx = (x0 - x).max(0.0).max(x - (x0 + res));
                if dx * dx + dy * dy <= r * r {
                    return true;
                }
            }
        }
        false
    }

    /// Parses the text format: a `width height resolution` header, then
    /// `height` rows of `width` characters from `{0, 1}`, top row first.
    /// `#` starts a comment; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, f64)> = None;
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::GridParse {
                line: line_no,
                message,
            };
            let Some((width, height, _)) = header else {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(format!(
                        "expected header `width height resolution`, got {line:?}"
                    )));
                }
                let w = parts[0]
                    .parse::<usize>()
                    .map_err(|e| err(format!("bad width {:?}: {e}", parts[0])))?;
                let h = parts[1]
                    .parse::<usize>()
                    .map_err(|e| err(format!("bad height {:?}: {e}", parts[1])))?;
                let r = parts[2]
                    .parse::<f64>()
                    .map_err(|e| err(format!("bad resolution {:?}: {e}", parts[2])))?;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(err(format!("resolution must be positive, got {r}")));
                }
                header = Some((w, h, r));
                continue;
            };
            if rows.len() == height {
                return Err(err(format!("more than {height} rows")));
            }
            let row: Vec<bool> = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(err(format!("invalid character {other:?}"))),
                })
                .collect::<Result<_>>()?;
            if row.len() != width {
                return Err(err(format!(
                    "row has {} cells but the header says width {width}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        let (width, height, resolution) = header.ok_or(Error::GridParse {
            line: text.lines().count().max(1),
            message: "missing header".into(),
        })?;
        if rows.len() != height {
            return Err(Error::GridParse {
                line: text.lines().count().max(1),
                message: format!("expected {height} rows, found {}", rows.len()),
            });
        }
        let cells = rows.into_iter().rev().flatten().collect();
        Self::from_cells(width, height, resolution, (0.0, 0.0), cells)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.width, self.height, self.resolution);
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                s.push(if self.get(ix, iy) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_small_free_grid() {
        let g = OccupancyGrid::parse("2 2 0.5\n00\n00\n").unwrap();
        assert_eq!((g.width, g.height), (2, 2));
        assert!(g.is_empty());
        assert_eq!(g.resolution, 0.5);
    }

    #[test]
    fn top_row_comes_first() {
        let g = OccupancyGrid::parse("# map\n3 2 1.0\n100 # top\n\n001\n").unwrap();
        assert!(g.get(0, 1));
        assert!(g.get(2, 0));
        assert_eq!(g.occupied_count(), 2);
        assert!(g.occupied_at(0.5, 1.5));
        assert!(!g.occupied_at(0.5, 0.5));
        assert!(!g.occupied_at(-0.5, 0.5));
    }

    #[test]
    fn row_width_mismatch_names_the_line() {
        let err = OccupancyGrid::parse("3 2 1.0\n000\n00\n").unwrap_err();
        match err {
            Error::GridParse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_characters_and_counts() {
        assert!(matches!(
            OccupancyGrid::parse("2 1 1.0\n0x\n"),
            Err(Error::GridParse { line: 2, .. })
        ));
        assert!(OccupancyGrid::parse("2 2 1.0\n00\n").is_err());
        assert!(OccupancyGrid::parse("2 1 1.0\n00\n00\n").is_err());
        assert!(OccupancyGrid::parse("2 1 -1\n00\n").is_err());
        assert!(OccupancyGrid::parse("").is_err());
    }

    #[test]
    fn disc_test_matches_geometry() {
        let mut g = OccupancyGrid::new(10, 10, 0.1, (0.0, 0.0)).unwrap();
        g.set(5, 5, true); // square [0.5, 0.6]^2
        assert!(g.disc_hits_occupied(0.55, 0.55, 0.01));
        assert!(g.disc_hits_occupied(0.3, 0.55, 0.2));
        assert!(!g.disc_hits_occupied(0.3, 0.55, 0.19));
        // corner distance from (0.4, 0.4) to (0.5, 0.5) is 0.1414
        assert!(!g.disc_hits_occupied(0.4, 0.4, 0.14));
        assert!(g.disc_hits_occupied(0.4, 0.4, 0.1415));
        assert!(!g.disc_hits_occupied(-5.0, -5.0, 1.0));
        assert!(!g.disc_hits_occupied(50.0, 50.0, 1.0));
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            w in 1usize..12,
            h in 1usize..12,
            bits in prop::collection::vec(any::<bool>(), 144),
            res in 0.01f64..2.0,
        ) {
            let g = OccupancyGrid::from_cells(w, h, res, (0.0, 0.0), bits[..w * h].to_vec()).unwrap();
            let back = OccupancyGrid::parse(&g.to_text()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
