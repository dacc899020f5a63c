//! Hexagonal subcell tessellation of the macrocell.
//!
//! Cells use axial coordinates `(q, r)` with the base station at the origin.
//! Centers are laid out pointy-top so that the direction cycle
//! `E, NE, NW, W, SW, SE` matches the geometry; adjacent centers are exactly
//! `d_r = sqrt(3) * r` apart.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("ring count must be at least 1")]
    NoRings,
    #[error("subcell radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("reuse factor {0} has no hexagonal cluster shift (i^2 + ij + j^2)")]
    BadReuse(u32),
    #[error("subcell index {0} out of range")]
    BadIndex(usize),
    #[error("source and destination are the same subcell ({0})")]
    SameCell(usize),
    #[error("destination set is empty")]
    NoDestination,
}

/// Axial hex coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Axial {
    pub q: i32,
    pub r: i32,
}

impl Axial {
    pub const ORIGIN: Axial = Axial { q: 0, r: 0 };

    pub fn new(q: i32, r: i32) -> Self {
        Self { q, r }
    }

    /// Hex (step) distance from the origin.
    pub fn length(self) -> u32 {
        ((self.q.abs() + self.r.abs() + (self.q + self.r).abs()) / 2) as u32
    }

    pub fn step(self, dir: Direction) -> Axial {
        let (dq, dr) = dir.offset();
        Axial::new(self.q + dq, self.r + dr)
    }

    /// Center in units of the subcell radius.
    fn unit_center(self) -> (f64, f64) {
        let q = self.q as f64;
        let r = self.r as f64;
        (3f64.sqrt() * (q + r / 2.0), 1.5 * r)
    }
}

/// Fixed neighbor direction cycle. The discriminant is the tie-break rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    E = 0,
    NE = 1,
    NW = 2,
    W = 3,
    SW = 4,
    SE = 5,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::E,
        Direction::NE,
        Direction::NW,
        Direction::W,
        Direction::SW,
        Direction::SE,
    ];

    pub fn offset(self) -> (i32, i32) {
        match self {
            Direction::E => (1, 0),
            Direction::NE => (1, -1),
            Direction::NW => (0, -1),
            Direction::W => (-1, 0),
            Direction::SW => (-1, 1),
            Direction::SE => (0, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The rhombic cluster shift `(i, j)` with `i^2 + ij + j^2 = K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReuseCluster {
    pub size: u32,
    pub shift: (i32, i32),
}

impl ReuseCluster {
    pub fn new(size: u32) -> Result<Self, GridError> {
        cluster_shift(size)
            .map(|shift| ReuseCluster { size, shift })
            .ok_or(GridError::BadReuse(size))
    }

    /// Coset key of a cell modulo the co-slot lattice.
    fn coset(&self, c: Axial) -> (i64, i64) {
        let (i, j) = (self.shift.0 as i64, self.shift.1 as i64);
        let k = self.size as i64;
        let (q, r) = (c.q as i64, c.r as i64);
        let a = (i + j) * q + j * r;
        let b = -j * q + i * r;
        (a.rem_euclid(k), b.rem_euclid(k))
    }
}

/// Smallest `(i, j)` (with `i >= j >= 0`, `i >= 1`) such that `i^2 + ij + j^2 = k`.
pub fn cluster_shift(k: u32) -> Option<(i32, i32)> {
    if k == 0 {
        return None;
    }
    let k = k as i64;
    let mut i = 1i64;
    while i * i <= k {
        for j in 0..=i {
            if i * i + i * j + j * j == k {
                return Some((i as i32, j as i32));
            }
        }
        i += 1;
    }
    None
}

/// Assign a color in `1..=K` to every coordinate, stable across grid sizes.
///
/// Colors are numbered by first appearance of each coset along a spiral walk
/// from the origin, so the BS cell always gets color 1.
struct Palette {
    cluster: ReuseCluster,
    colors: HashMap<(i64, i64), u8>,
}

impl Palette {
    fn new(cluster: ReuseCluster) -> Self {
        let mut colors = HashMap::new();
        let reach = cluster.size.max(1);
        'outer: for ring in 0..=reach {
            for c in ring_coords(ring) {
                let key = cluster.coset(c);
                let next = colors.len() as u8 + 1;
                colors.entry(key).or_insert(next);
                if colors.len() == cluster.size as usize {
                    break 'outer;
                }
            }
        }
        debug_assert_eq!(colors.len(), cluster.size as usize);
        Palette { cluster, colors }
    }

    fn color(&self, c: Axial) -> u8 {
        self.colors[&self.cluster.coset(c)]
    }
}

/// Coordinates of ring `h` in walk order; ring 0 is the origin alone.
pub fn ring_coords(h: u32) -> Vec<Axial> {
    if h == 0 {
        return vec![Axial::ORIGIN];
    }
    let h = h as i32;
    let (dq, dr) = Direction::SW.offset();
    let mut c = Axial::new(dq * h, dr * h);
    let mut out = Vec::with_capacity(6 * h as usize);
    for dir in Direction::ALL {
        for _ in 0..h {
            out.push(c);
            c = c.step(dir);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subcell {
    pub coord: Axial,
    pub ring: u32,
    /// 0 for the BS cell, then 1-based in ring order.
    pub index: usize,
    /// Slot color in `1..=K`.
    pub color: u8,
    /// Center in meters.
    pub center: (f64, f64),
}

/// Immutable tessellation: BS cell plus `3H(H+1)` subcells.
#[derive(Debug, Clone)]
pub struct Grid {
    rings: u32,
    radius: f64,
    cluster: ReuseCluster,
    cells: Vec<Subcell>,
    lookup: HashMap<Axial, usize>,
    adjacency: Vec<[Option<usize>; 6]>,
}

impl Grid {
    /// Build a grid of `rings` rings around the BS cell with subcell radius
    /// `radius` (meters) and reuse factor `reuse`.
    pub fn build(rings: u32, radius: f64, reuse: u32) -> Result<Self, GridError> {
        if rings == 0 {
            return Err(GridError::NoRings);
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GridError::BadRadius(radius));
        }
        let cluster = ReuseCluster::new(reuse)?;
        let palette = Palette::new(cluster);

        let mut cells = Vec::with_capacity(1 + 3 * (rings * (rings + 1)) as usize);
        for h in 0..=rings {
            for coord in ring_coords(h) {
                let (ux, uy) = coord.unit_center();
                cells.push(Subcell {
                    coord,
                    ring: h,
                    index: cells.len(),
                    color: palette.color(coord),
                    center: (ux * radius, uy * radius),
                });
            }
        }
        let lookup: HashMap<Axial, usize> = cells.iter().map(|c| (c.coord, c.index)).collect();
        let adjacency = cells
            .iter()
            .map(|c| {
                let mut slots = [None; 6];
                for dir in Direction::ALL {
                    slots[dir.index()] = lookup.get(&c.coord.step(dir)).copied();
                }
                slots
            })
            .collect();

        Ok(Grid {
            rings,
            radius,
            cluster,
            cells,
            lookup,
            adjacency,
        })
    }

    pub fn rings(&self) -> u32 {
        self.rings
    }

    pub fn subcell_radius(&self) -> f64 {
        self.radius
    }

    pub fn reuse(&self) -> u32 {
        self.cluster.size
    }

    pub fn cluster(&self) -> ReuseCluster {
        self.cluster
    }

    /// Distance between adjacent subcell centers.
    pub fn relay_distance(&self) -> f64 {
        3f64.sqrt() * self.radius
    }

    /// Radius of the smallest disc around the BS that covers every subcell.
    /// Documentary only; the tessellation is driven by `rings` and `radius`.
    pub fn macrocell_radius(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.center.0.hypot(c.center.1))
            .fold(0.0, f64::max)
            + self.radius
    }

    /// Number of non-center subcells, `3H(H+1)`.
    pub fn subcell_count(&self) -> usize {
        self.cells.len() - 1
    }

    /// All cells including the BS cell at index 0.
    pub fn cells(&self) -> &[Subcell] {
        &self.cells
    }

    pub fn cell(&self, m: usize) -> Result<&Subcell, GridError> {
        self.cells.get(m).ok_or(GridError::BadIndex(m))
    }

    pub fn index_of(&self, coord: Axial) -> Option<usize> {
        self.lookup.get(&coord).copied()
    }

    /// Subcell indices `1..=N` (sources; the BS cell is excluded).
    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        1..self.cells.len()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.cells[a].center;
        let (bx, by) = self.cells[b].center;
        (ax - bx).hypot(ay - by)
    }

    /// Neighbor slots indexed by direction; `None` past the boundary.
    pub fn neighbor_slots(&self, m: usize) -> Result<&[Option<usize>; 6], GridError> {
        self.adjacency.get(m).ok_or(GridError::BadIndex(m))
    }

    /// Existing neighbors of `m` in direction-cycle order.
    pub fn neighbors(&self, m: usize) -> Result<Vec<usize>, GridError> {
        Ok(self.neighbor_slots(m)?.iter().flatten().copied().collect())
    }

    /// Existing neighbors of `m` ordered by relay priority towards `dest`.
    pub fn relay_priority(&self, m: usize, dest: usize) -> Result<Vec<usize>, GridError> {
        self.cell(dest)?;
        if m == dest {
            return Err(GridError::SameCell(m));
        }
        self.relay_priority_towards(m, &[dest])
    }

    /// Relay priority towards the nearest member of `targets`: neighbors
    /// sorted by center distance to the closest target, ties by direction.
    pub fn relay_priority_towards(
        &self,
        m: usize,
        targets: &[usize],
    ) -> Result<Vec<usize>, GridError> {
        if targets.is_empty() {
            return Err(GridError::NoDestination);
        }
        for &t in targets {
            self.cell(t)?;
        }
        let slots = self.neighbor_slots(m)?;
        let mut ranked: Vec<(f64, usize, usize)> = slots
            .iter()
            .enumerate()
            .filter_map(|(dir, n)| n.map(|n| (dir, n)))
            .map(|(dir, n)| {
                let d = targets
                    .iter()
                    .map(|&t| self.distance(n, t))
                    .fold(f64::INFINITY, f64::min);
                (d, dir, n)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(ranked.into_iter().map(|(_, _, n)| n).collect())
    }

    /// Slot color of every cell (index 0 is the BS cell).
    pub fn reuse_coloring(&self) -> Vec<u8> {
        self.cells.iter().map(|c| c.color).collect()
    }

    /// Members of color class `k` among the non-center subcells.
    pub fn color_class(&self, k: u8) -> Vec<usize> {
        self.sources().filter(|&m| self.cells[m].color == k).collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hex grid H={} r={}m K={} N={}",
            self.rings,
            self.radius,
            self.cluster.size,
            self.subcell_count()
        )
    }
}

/// Recolor a grid under another reuse factor without rebuilding geometry.
pub fn reuse_coloring(grid: &Grid, reuse: u32) -> Result<Vec<u8>, GridError> {
    let palette = Palette::new(ReuseCluster::new(reuse)?);
    Ok(grid.cells().iter().map(|c| palette.color(c.coord)).collect())
}

/// The set of cells that terminate a route. All members collapse into the
/// single absorbing destination state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DestinationSet {
    cells: Vec<usize>,
    member: Vec<bool>,
}

impl DestinationSet {
    pub fn new(grid: &Grid, cells: impl IntoIterator<Item = usize>) -> Result<Self, GridError> {
        let mut member = vec![false; grid.cells().len()];
        let mut list = Vec::new();
        for c in cells {
            grid.cell(c)?;
            if !member[c] {
                member[c] = true;
                list.push(c);
            }
        }
        if list.is_empty() {
            return Err(GridError::NoDestination);
        }
        list.sort_unstable();
        Ok(Self {
            cells: list,
            member,
        })
    }

    pub fn base_station(grid: &Grid) -> Self {
        Self::new(grid, [0]).expect("BS cell always exists")
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn contains(&self, m: usize) -> bool {
        self.member.get(m).copied().unwrap_or(false)
    }
}
