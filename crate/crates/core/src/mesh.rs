//! Mesh coordinates and directions.
//!
//! `x` grows to the east, `y` grows to the north. Crossbars are linearized
//! row-major: index = `y * width + x`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
}

impl Coord {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Coord) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn step(self, dir: Direction) -> Coord {
        match dir {
            Direction::North => Coord::new(self.x, self.y + 1),
            Direction::South => Coord::new(self.x, self.y - 1),
            Direction::East => Coord::new(self.x + 1, self.y),
            Direction::West => Coord::new(self.x - 1, self.y),
        }
    }
}

impl std::fmt::Display for Coord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Inter-router hop direction. Declaration order is the "First" selection order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    West,
    East,
    North,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::West,
        Direction::East,
        Direction::North,
        Direction::South,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Direction::North | Direction::South)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh {
    pub width: u32,
    pub height: u32,
}

impl Mesh {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn len(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Coord) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn coord(&self, index: usize) -> Coord {
        let i = index as u32;
        Coord::new(i % self.width, i / self.width)
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.len()).map(|i| self.coord(i))
    }

    pub fn neighbor(&self, c: Coord, dir: Direction) -> Option<Coord> {
        let ok = match dir {
            Direction::North => c.y + 1 < self.height,
            Direction::South => c.y > 0,
            Direction::East => c.x + 1 < self.width,
            Direction::West => c.x > 0,
        };
        ok.then(|| c.step(dir))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_roundtrip() {
        let m = Mesh::new(3, 2);
        for i in 0..m.len() {
            assert_eq!(m.index(m.coord(i)), i);
        }
        assert_eq!(m.coord(4), Coord::new(1, 1));
    }

    #[test]
    fn neighbors_respect_edges() {
        let m = Mesh::new(2, 2);
        assert_eq!(m.neighbor(Coord::new(0, 0), Direction::West), None);
        assert_eq!(m.neighbor(Coord::new(0, 0), Direction::North), Some(Coord::new(0, 1)));
        assert_eq!(m.neighbor(Coord::new(1, 1), Direction::East), None);
    }
}
