//! Discretized reachable level sets.
//!
//! Level `t` holds the lattice cells first reached after exactly `t` steps
//! from the initial state. Cells claimed by an earlier level are never
//! repeated, so the levels are pairwise disjoint. The lattice is anchored so
//! that the initial state sits at the center of cell `(0, 0, 0)`.

use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::dynamics::{step, wrap_angle, ControlInput, State, VehicleParams};
use crate::error::{Error, Result};
use crate::policy::ActionSet;

/// Heading weight (m/rad) of the mixed state distance.
pub const HEADING_WEIGHT: f64 = 1.0;

const MAGIC: [u8; 4] = *b"CULS";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub dx: f64,
    pub dy: f64,
    pub dpsi: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            dx: 0.05,
            dy: 0.05,
            dpsi: 4.5f64.to_radians(),
        }
    }
}

impl Resolution {
    pub fn new(dx: f64, dy: f64, dpsi: f64) -> Result<Self> {
        let r = Resolution { dx, dy, dpsi };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dx > 0.0 && self.dy > 0.0 && self.dpsi > 0.0 && self.dpsi <= TAU {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "resolution components must be positive (dpsi <= 2pi): {self:?}"
            )))
        }
    }

    /// Size of the circular heading axis.
    pub fn heading_bins(&self) -> i32 {
        ((TAU / self.dpsi).round() as i32).max(1)
    }

    /// Length of one cell diagonal under the mixed state distance.
    pub fn diagonal(&self, heading_weight: f64) -> f64 {
        (self.dx * self.dx + self.dy * self.dy + (heading_weight * self.dpsi).powi(2)).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub ix: i32,
    pub iy: i32,
    pub ipsi: i32,
}

impl CellKey {
    pub const fn new(ix: i32, iy: i32, ipsi: i32) -> Self {
        CellKey { ix, iy, ipsi }
    }
}

/// Floor-divides `s - origin` by the resolution; the heading axis wraps.
pub fn discretize(s: &State, r: &Resolution, origin: &State) -> CellKey {
    let ix = ((s.x - origin.x) / r.dx).floor() as i32;
    let iy = ((s.y - origin.y) / r.dy).floor() as i32;
    let turn = (s.psi - origin.psi).rem_euclid(TAU);
    let ipsi = ((turn / r.dpsi).floor() as i32).rem_euclid(r.heading_bins());
    CellKey { ix, iy, ipsi }
}

/// Weighted state distance with wrapped heading difference.
pub fn state_distance(a: &State, b: &State, heading_weight: f64) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dh = heading_weight * wrap_angle(a.psi - b.psi);
    (dx * dx + dy * dy + dh * dh).sqrt()
}

/// Cell lattice: a resolution plus the corner of cell `(0, 0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub resolution: Resolution,
    pub origin: State,
}

impl Lattice {
    /// Lattice whose cell `(0, 0, 0)` is centered on `x0`.
    pub fn centered_on(x0: &State, resolution: Resolution) -> Self {
        Lattice {
            resolution,
            origin: State {
                x: x0.x - 0.5 * resolution.dx,
                y: x0.y - 0.5 * resolution.dy,
                psi: x0.psi - 0.5 * resolution.dpsi,
            },
        }
    }

    pub fn key(&self, s: &State) -> CellKey {
        discretize(s, &self.resolution, &self.origin)
    }

    pub fn center(&self, key: CellKey) -> State {
        let r = &self.resolution;
        State::new(
            self.origin.x + (key.ix as f64 + 0.5) * r.dx,
            self.origin.y + (key.iy as f64 + 0.5) * r.dy,
            self.origin.psi + (key.ipsi as f64 + 0.5) * r.dpsi,
        )
    }
}

/// Which parent cell and action first produced a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub parent: usize,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub key: CellKey,
    pub center: State,
    /// `None` for the root cell and for cells loaded from disk.
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct LevelSet {
    pub t: usize,
    cells: Vec<Cell>,
    lattice: Lattice,
    index: HashMap<CellKey, usize>,
    /// Dense cell-index lattice over the bounding box of the level; a
    /// lattice cell holds at most one level cell.
    grid: Vec<u32>,
    lo: (i32, i32),
    dims: (i32, i32, i32),
}

const EMPTY: u32 = u32::MAX;

impl LevelSet {
    /// Builds the spatial index. Cells are sorted by key.
    fn new(t: usize, mut cells: Vec<Cell>, lattice: Lattice) -> Self {
        cells.sort_by_key(|c| c.key);
        let mut index = HashMap::with_capacity(cells.len());
        let (mut x0, mut x1, mut y0, mut y1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for (i, c) in cells.iter().enumerate() {
            index.insert(c.key, i);
            x0 = x0.min(c.key.ix);
            x1 = x1.max(c.key.ix);
            y0 = y0.min(c.key.iy);
            y1 = y1.max(c.key.iy);
        }
        let bins = lattice.resolution.heading_bins();
        let dims = if cells.is_empty() {
            (0, 0, bins)
        } else {
            (x1 - x0 + 1, y1 - y0 + 1, bins)
        };
        let mut grid = vec![EMPTY; (dims.0 * dims.1 * dims.2) as usize];
        for (i, c) in cells.iter().enumerate() {
            let g = ((c.key.ix - x0) * dims.1 + (c.key.iy - y0)) * dims.2 + c.key.ipsi;
            grid[g as usize] = i as u32;
        }
        LevelSet {
            t,
            cells,
            lattice,
            index,
            grid,
            lo: (x0, y0),
            dims,
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn position(&self, key: &CellKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn contains(&self, key: &CellKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn centers(&self) -> impl Iterator<Item = &State> {
        self.cells.iter().map(|c| &c.center)
    }

    /// The `k` cells whose centers are closest to `s` under
    /// [`state_distance`]. Ties are broken by ascending cell key.
    ///
    /// Searches Chebyshev shells of lattice cells around the query cell
    /// until no unvisited cell can beat the current `k`-th distance.
    pub fn nearest_cells(&self, s: &State, k: usize, heading_weight: f64) -> Vec<Neighbor> {
        if self.cells.is_empty() || k == 0 {
            return Vec::new();
        }
        let k = k.min(self.cells.len());
        let r = &self.lattice.resolution;
        let (nx, ny, np) = self.dims;
        // the last heading bin is narrower when dpsi does not divide 2pi
        let even_bins = (np as f64 * r.dpsi - TAU).abs() < 1e-9;
        let step = r.dx.min(r.dy).min(heading_weight * r.dpsi);
        if !(step > 0.0) || !even_bins || k * 4 > self.cells.len() {
            return self.scan(s, k, heading_weight);
        }
        let q = self.lattice.key(s);
        let (qx, qy) = (q.ix - self.lo.0, q.iy - self.lo.1);
        // heading offsets covering every bin once
        let (pa, pb) = ((np - 1) / 2, np - 1 - (np - 1) / 2);
        let gap = |v: i32, n: i32| if v < 0 { -v } else { (v - n + 1).max(0) };
        let first = gap(qx, nx).max(gap(qy, ny));
        let last = [qx, nx - 1 - qx, qy, ny - 1 - qy, pb]
            .into_iter()
            .map(i32::abs)
            .max()
            .unwrap_or(0)
            .max(first);

        let mut found: Vec<Neighbor> = Vec::new();
        for ring in first..=last {
            let (xa, xb) = ((qx - ring).max(0), (qx + ring).min(nx - 1));
            let (ya, yb) = ((qy - ring).max(0), (qy + ring).min(ny - 1));
            let (da, db) = (-ring.min(pa), ring.min(pb));
            for ix in xa..=xb {
                let ex = (ix - qx).abs();
                for iy in ya..=yb {
                    let exy = ex.max((iy - qy).abs());
                    let row = ((ix * ny + iy) * np) as usize;
                    for d in da..=db {
                        if exy.max(d.abs()) != ring {
                            continue;
                        }
                        let id = self.grid[row + (q.ipsi + d).rem_euclid(np) as usize];
                        if id != EMPTY {
                            let i = id as usize;
                            found.push(Neighbor {
                                index: i,
                                distance: state_distance(s, &self.cells[i].center, heading_weight),
                            });
                        }
                    }
                }
            }
            if found.len() >= k {
                self.sort_neighbors(&mut found);
                found.truncate(k);
                // every center in ring+1 is at least (ring + 0.5) cells away
                if found[k - 1].distance < (ring as f64 + 0.5) * step {
                    return found;
                }
            }
        }
        self.sort_neighbors(&mut found);
        found.truncate(k);
        found
    }

    fn scan(&self, s: &State, k: usize, heading_weight: f64) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = self
            .cells
            .iter()
            .enumerate()
            .map(|(index, c)| Neighbor {
                index,
                distance: state_distance(s, &c.center, heading_weight),
            })
            .collect();
        self.sort_neighbors(&mut all);
        all.truncate(k);
        all
    }

    fn sort_neighbors(&self, v: &mut [Neighbor]) {
        // cells are key-sorted, so index order is key order
        v.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(a.index.cmp(&b.index))
        });
    }
}

/// Equal probability for every cell of a nonempty level.
pub fn uniform_cell_probability(level: &LevelSet) -> Vec<f64> {
    let n = level.len();
    vec![1.0 / n as f64; n]
}

#[derive(Clone, Debug)]
pub struct LevelSetStack {
    levels: Vec<LevelSet>,
    lattice: Lattice,
}

impl LevelSetStack {
    pub fn levels(&self) -> &[LevelSet] {
        &self.levels
    }

    pub fn level(&self, t: usize) -> Result<&LevelSet> {
        self.levels.get(t).ok_or(Error::LevelOutOfRange {
            step: t,
            levels: self.levels.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn resolution(&self) -> Resolution {
        self.lattice.resolution
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// The state the stack was grown from.
    pub fn root(&self) -> State {
        self.lattice.center(CellKey::new(0, 0, 0))
    }

    pub fn total_cells(&self) -> usize {
        self.levels.iter().map(LevelSet::len).sum()
    }

    /// The first `n` levels. Growth is breadth-first, so this equals a
    /// stack built with `n - 1` steps.
    pub fn prefix(&self, n: usize) -> LevelSetStack {
        LevelSetStack {
            levels: self.levels[..n.min(self.levels.len())].to_vec(),
            lattice: self.lattice,
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut enc = Encoder::new(w);
        enc.bytes(&MAGIC)?;
        enc.u32(VERSION)?;
        let r = self.lattice.resolution;
        enc.f64s([r.dx, r.dy, r.dpsi].iter())?;
        let o = self.lattice.origin;
        enc.f64s([o.x, o.y, o.psi].iter())?;
        enc.u32(self.levels.len() as u32)?;
        for level in &self.levels {
            enc.u32(level.len() as u32)?;
            for c in &level.cells {
                enc.i32(c.key.ix)?;
                enc.i32(c.key.iy)?;
                enc.i32(c.key.ipsi)?;
                enc.f64s([c.center.x, c.center.y, c.center.psi].iter())?;
            }
        }
        enc.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut dec = Decoder::new(r, "level-set file");
        dec.magic(MAGIC)?;
        dec.version(VERSION)?;
        let res = dec.f64s(3, "resolution")?;
        let resolution =
            Resolution::new(res[0], res[1], res[2]).map_err(|e| Error::Malformed(e.to_string()))?;
        let o = dec.f64s(3, "origin")?;
        let lattice = Lattice {
            resolution,
            origin: State {
                x: o[0],
                y: o[1],
                psi: o[2],
            },
        };
        let n_levels = dec.u32("level count")? as usize;
        let mut levels = Vec::with_capacity(n_levels);
        for t in 0..n_levels {
            let n = dec.u32("cell count")? as usize;
            let mut cells = Vec::with_capacity(n.min(1 << 20));
            for _ in 0..n {
                let key = CellKey::new(dec.i32("ix")?, dec.i32("iy")?, dec.i32("ipsi")?);
                let c = dec.f64s(3, "cell center")?;
                cells.push(Cell {
                    key,
                    center: State {
                        x: c[0],
                        y: c[1],
                        psi: c[2],
                    },
                    provenance: None,
                });
            }
            let level = LevelSet::new(t, cells, lattice);
            if level.index.len() != level.len() {
                return Err(Error::Malformed(format!(
                    "duplicate cell keys in level {t}"
                )));
            }
            levels.push(level);
        }
        dec.end()?;
        Ok(LevelSetStack { levels, lattice })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f))
    }
}

/// Grows `n_steps` disjoint level sets from `x0` by applying every action
/// to every cell center of the current level.
pub fn build_level_sets(
    x0: &State,
    actions: &ActionSet,
    p: &VehicleParams,
    r: Resolution,
    n_steps: usize,
) -> Result<LevelSetStack> {
    if n_steps < 1 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    r.validate()?;
    p.validate()?;
    let lattice = Lattice::centered_on(x0, r);
    let root = CellKey::new(0, 0, 0);
    let mut claimed: HashSet<CellKey> = HashSet::from([root]);
    let mut levels = vec![LevelSet::new(
        0,
        vec![Cell {
            key: root,
            center: lattice.center(root),
            provenance: None,
        }],
        lattice,
    )];

    for t in 1..=n_steps {
        let prev = &levels[t - 1];
        let mut cells = Vec::new();
        for (parent, cell) in prev.cells.iter().enumerate() {
            for (action, &delta) in actions.deltas().iter().enumerate() {
                let next = step(&cell.center, ControlInput::new(delta), p);
                let key = lattice.key(&next);
                if claimed.insert(key) {
                    cells.push(Cell {
                        key,
                        center: lattice.center(key),
                        provenance: Some(Provenance { parent, action }),
                    });
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyLevel { step: t });
        }
        levels.push(LevelSet::new(t, cells, lattice));
    }
    Ok(LevelSetStack { levels, lattice })
}
