//! Minimal routing functions for 2D meshes.
//!
//! Every function returns a non-empty set of *productive* directions (each
//! one reduces the distance to the destination), ordered W, E, N, S.

use crate::config::RoutingAlgo;
use crate::mesh::{Coord, Direction};

/// Productive directions from `cur` toward `dst`, in W, E, N, S order.
pub fn productive(cur: Coord, dst: Coord) -> Vec<Direction> {
    let mut out = Vec::with_capacity(2);
    if dst.x < cur.x {
        out.push(Direction::West);
    }
    if dst.x > cur.x {
        out.push(Direction::East);
    }
    if dst.y > cur.y {
        out.push(Direction::North);
    }
    if dst.y < cur.y {
        out.push(Direction::South);
    }
    out
}

fn vertical(cur: Coord, dst: Coord) -> Option<Direction> {
    match dst.y.cmp(&cur.y) {
        std::cmp::Ordering::Greater => Some(Direction::North),
        std::cmp::Ordering::Less => Some(Direction::South),
        std::cmp::Ordering::Equal => None,
    }
}

fn xy(cur: Coord, dst: Coord) -> Direction {
    if dst.x > cur.x {
        Direction::East
    } else if dst.x < cur.x {
        Direction::West
    } else if dst.y > cur.y {
        Direction::North
    } else {
        Direction::South
    }
}

/// Odd-even turn model: no east-to-vertical turn in even columns and no
/// vertical-to-west turn in odd columns (columns 0-indexed). `src` is the
/// packet's source, where no turn has happened yet.
fn odd_even(src: Coord, cur: Coord, dst: Coord) -> Vec<Direction> {
    let mut out = Vec::with_capacity(2);
    let odd = |x: u32| x % 2 == 1;
    if dst.x == cur.x {
        out.extend(vertical(cur, dst));
    } else if dst.x > cur.x {
        match vertical(cur, dst) {
            None => out.push(Direction::East),
            Some(v) => {
                if odd(dst.x) || dst.x - cur.x != 1 {
                    out.push(Direction::East);
                }
                if odd(cur.x) || cur.x == src.x {
                    out.push(v);
                }
            }
        }
    } else {
        out.push(Direction::West);
        if !odd(cur.x) {
            out.extend(vertical(cur, dst));
        }
    }
    out
}

/// Admissible next hops for a packet from `src` currently at `cur` (≠ `dst`).
///
/// `congested` only matters for DyAD: when false it routes deterministically
/// (the XY choice whenever the odd-even model allows it, otherwise the first
/// odd-even direction); when true it offers the full odd-even set.
pub fn admissible_dirs(algo: RoutingAlgo, src: Coord, cur: Coord, dst: Coord, congested: bool) -> Vec<Direction> {
    debug_assert_ne!(cur, dst, "routing query at destination");
    match algo {
        RoutingAlgo::XY => vec![xy(cur, dst)],
        RoutingAlgo::WestFirst => {
            if dst.x < cur.x {
                vec![Direction::West]
            } else {
                productive(cur, dst)
            }
        }
        RoutingAlgo::NorthLast => {
            let mut p = productive(cur, dst);
            if p.len() > 1 {
                p.retain(|&d| d != Direction::North);
            }
            p
        }
        RoutingAlgo::OddEven => odd_even(src, cur, dst),
        RoutingAlgo::DyAD => {
            let oe = odd_even(src, cur, dst);
            if congested {
                oe
            } else {
                let pref = xy(cur, dst);
                vec![if oe.contains(&pref) { pref } else { oe[0] }]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const fn c(x: u32, y: u32) -> Coord {
        Coord::new(x, y)
    }

    #[test]
    fn xy_goes_horizontal_first() {
        assert_eq!(admissible_dirs(RoutingAlgo::XY, c(0, 0), c(0, 0), c(2, 2), false), vec![Direction::East]);
        assert_eq!(admissible_dirs(RoutingAlgo::XY, c(0, 0), c(2, 0), c(2, 2), false), vec![Direction::North]);
    }

    #[test]
    fn west_first_takes_west_alone() {
        assert_eq!(
            admissible_dirs(RoutingAlgo::WestFirst, c(2, 0), c(2, 0), c(0, 1), false),
            vec![Direction::West]
        );
        assert_eq!(
            admissible_dirs(RoutingAlgo::WestFirst, c(0, 0), c(0, 0), c(2, 1), false),
            vec![Direction::East, Direction::North]
        );
    }

    #[test]
    fn north_last_defers_north() {
        assert_eq!(
            admissible_dirs(RoutingAlgo::NorthLast, c(0, 0), c(0, 0), c(2, 2), false),
            vec![Direction::East]
        );
        assert_eq!(
            admissible_dirs(RoutingAlgo::NorthLast, c(0, 0), c(2, 0), c(2, 2), false),
            vec![Direction::North]
        );
    }

    #[test]
    fn odd_even_blocks_vertical_in_even_column_after_east() {
        // arrived at even column 2 moving east, destination needs N and further E
        let d = admissible_dirs(RoutingAlgo::OddEven, c(0, 0), c(2, 0), c(4, 3), false);
        assert_eq!(d, vec![Direction::East]);
        // odd column may turn
        let d = admissible_dirs(RoutingAlgo::OddEven, c(0, 0), c(1, 0), c(4, 3), false);
        assert_eq!(d, vec![Direction::East, Direction::North]);
    }
}
