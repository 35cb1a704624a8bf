use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Layers, Position};

/// Cell codes of the map file grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellCode {
    Free,
    Landing,
    NoFlyZone,
    Obstacle,
}

impl CellCode {
    pub fn parse(code: &str) -> Option<Self> {
        match code {
            "." => Some(CellCode::Free),
            "L" => Some(CellCode::Landing),
            "N" => Some(CellCode::NoFlyZone),
            "#" => Some(CellCode::Obstacle),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CellCode::Free => ".",
            CellCode::Landing => "L",
            CellCode::NoFlyZone => "N",
            CellCode::Obstacle => "#",
        }
    }
}

/// On-disk map representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub name: String,
    pub size: usize,
    pub cell_size_m: f64,
    pub grid: Vec<Vec<String>>,
}

/// Static environment: start/landing zones, the union of no-fly zones and
/// obstacles, and obstacles alone.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    name: String,
    size: usize,
    cell_size_m: f64,
    landing: Vec<bool>,
    blocked: Vec<bool>,
    obstacle: Vec<bool>,
}

impl EnvironmentMap {
    pub fn from_codes(name: impl Into<String>, cell_size_m: f64, grid: &[Vec<CellCode>]) -> Result<Self> {
        let size = grid.len();
        if size == 0 {
            return Err(Error::InvalidMap("empty grid".into()));
        }
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(Error::InvalidMap(format!("cell size {cell_size_m} must be positive")));
        }
        let mut landing = vec![false; size * size];
        let mut blocked = vec![false; size * size];
        let mut obstacle = vec![false; size * size];
        for (r, row) in grid.iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidMap(format!(
                    "grid is not square: row {r} has {} cells, expected {size}",
                    row.len()
                )));
            }
            for (c, code) in row.iter().enumerate() {
                let i = r * size + c;
                match code {
                    CellCode::Free => {}
                    CellCode::Landing => landing[i] = true,
                    CellCode::NoFlyZone => blocked[i] = true,
                    CellCode::Obstacle => {
                        blocked[i] = true;
                        obstacle[i] = true;
                    }
                }
            }
        }
        if !landing.iter().any(|&l| l) {
            return Err(Error::InvalidMap("map has no start/landing cell".into()));
        }
        Ok(Self {
            name: name.into(),
            size,
            cell_size_m,
            landing,
            blocked,
            obstacle,
        })
    }

    /// Parses rows of single-character codes, e.g. `["L..", ".#.", "..N"]`.
    pub fn from_rows(name: impl Into<String>, cell_size_m: f64, rows: &[&str]) -> Result<Self> {
        let grid = rows
            .iter()
            .map(|row| {
                row.chars()
                    .map(|ch| {
                        CellCode::parse(ch.encode_utf8(&mut [0; 4]))
                            .ok_or_else(|| Error::InvalidMap(format!("unknown cell code {ch:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_codes(name, cell_size_m, &grid)
    }

    pub fn from_map_file(file: &MapFile) -> Result<Self> {
        if file.grid.len() != file.size {
            return Err(Error::InvalidMap(format!(
                "grid is not square: {} rows, declared size {}",
                file.grid.len(),
                file.size
            )));
        }
        let grid = file
            .grid
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(|(c, code)| {
                        CellCode::parse(code).ok_or_else(|| {
                            Error::InvalidMap(format!("unknown cell code {code:?} at ({r}, {c})"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_codes(file.name.clone(), file.cell_size_m, &grid)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| Error::json("map file", e))?;
        Self::from_map_file(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: MapFile =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_map_file(&file)
    }

    pub fn to_map_file(&self) -> MapFile {
        let grid = (0..self.size)
            .map(|r| {
                (0..self.size)
                    .map(|c| self.code(Position::new(r, c)).as_str().to_string())
                    .collect()
            })
            .collect();
        MapFile {
            name: self.name.clone(),
            size: self.size,
            cell_size_m: self.cell_size_m,
            grid,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    #[inline]
    fn idx(&self, p: Position) -> usize {
        p.row * self.size + p.col
    }

    pub fn contains(&self, p: Position) -> bool {
        p.row < self.size && p.col < self.size
    }

    #[inline]
    pub fn is_landing(&self, p: Position) -> bool {
        self.landing[self.idx(p)]
    }

    /// No-fly zone or obstacle (map layer 2).
    #[inline]
    pub fn is_blocked(&self, p: Position) -> bool {
        self.blocked[self.idx(p)]
    }

    #[inline]
    pub fn is_obstacle(&self, p: Position) -> bool {
        self.obstacle[self.idx(p)]
    }

    pub fn code(&self, p: Position) -> CellCode {
        if self.is_obstacle(p) {
            CellCode::Obstacle
        } else if self.is_blocked(p) {
            CellCode::NoFlyZone
        } else if self.is_landing(p) {
            CellCode::Landing
        } else {
            CellCode::Free
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Position> + '_ {
        let size = self.size;
        (0..size * size).map(move |i| Position::new(i / size, i % size))
    }

    pub fn landing_cells(&self) -> Vec<Position> {
        self.cells().filter(|&p| self.is_landing(p)).collect()
    }

    /// The three boolean layers as a real stack: landing, NFZ ∪ obstacle,
    /// obstacle.
    pub fn to_layers(&self) -> Layers {
        let n = self.size * self.size;
        let mut data = Vec::with_capacity(3 * n);
        for layer in [&self.landing, &self.blocked, &self.obstacle] {
            data.extend(layer.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
        Layers::from_vec(3, self.size, data).expect("layer sizes are consistent")
    }

    pub fn count_landing(&self) -> usize {
        self.landing.iter().filter(|&&b| b).count()
    }

    pub fn count_blocked(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    pub fn count_obstacles(&self) -> usize {
        self.obstacle.iter().filter(|&&b| b).count()
    }
}
