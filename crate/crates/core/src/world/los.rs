//! Grid line of sight and the camera field of view.
//!
//! Rays run between cell centers. A ray is blocked by every obstacle cell
//! it touches, including cells it only grazes at a corner; the two endpoint
//! cells never block.

use crate::grid::Position;

use super::map::EnvironmentMap;

/// The camera sees a `(2 * FOV_RADIUS + 1)` square around the UAV.
pub const FOV_RADIUS: usize = 2;

/// All cells touched by the segment between the centers of `from` and `to`,
/// endpoints included, in walk order.
pub fn supercover_cells(from: Position, to: Position) -> Vec<Position> {
    let (r0, c0) = (from.row as i64, from.col as i64);
    let (r1, c1) = (to.row as i64, to.col as i64);
    let (nr, nc) = ((r1 - r0).abs(), (c1 - c0).abs());
    let (sr, sc) = ((r1 - r0).signum(), (c1 - c0).signum());

    let mut cells = Vec::with_capacity((nr + nc + 1) as usize);
    let (mut r, mut c) = (r0, c0);
    cells.push(from);
    let (mut ir, mut ic) = (0, 0);
    let at = |r: i64, c: i64| Position::new(r as usize, c as usize);
    while ir < nr || ic < nc {
        // Compare the parameters at which the ray crosses the next column
        // edge, (0.5 + ic) / nc, and the next row edge, (0.5 + ir) / nr.
        let decision = (1 + 2 * ic) * nr - (1 + 2 * ir) * nc;
        if decision == 0 {
            // Exactly through a corner: both side cells are touched.
            cells.push(at(r, c + sc));
            cells.push(at(r + sr, c));
            r += sr;
            c += sc;
            ir += 1;
            ic += 1;
        } else if decision < 0 {
            c += sc;
            ic += 1;
        } else {
            r += sr;
            ir += 1;
        }
        cells.push(at(r, c));
    }
    cells
}

/// True iff no obstacle cell lies strictly between `a` and `b` on the ray.
pub fn line_of_sight(env: &EnvironmentMap, a: Position, b: Position) -> bool {
    if a == b {
        return true;
    }
    supercover_cells(a, b)
        .into_iter()
        .filter(|&p| p != a && p != b)
        .all(|p| !env.is_obstacle(p))
}

/// Field of view at `position`: cells in the 5x5 square that are on the map,
/// not obstacles, and visible from the UAV cell. Row-major `size * size`.
pub fn field_of_view(env: &EnvironmentMap, position: Position) -> Vec<bool> {
    let size = env.size();
    let mut view = vec![false; size * size];
    let r = FOV_RADIUS as i64;
    for dr in -r..=r {
        for dc in -r..=r {
            let Some(cell) = position.offset(dr, dc, size) else {
                continue;
            };
            if !env.is_obstacle(cell) && line_of_sight(env, position, cell) {
                view[cell.row * size + cell.col] = true;
            }
        }
    }
    view
}
