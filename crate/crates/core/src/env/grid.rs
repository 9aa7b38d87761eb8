use std::collections::VecDeque;

/// A rectangular grid of unit cells. Cell `(row, col)` spans
/// `x in [col, col + 1]`, `y in [row, row + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    walls: Vec<bool>,
    pub start: (usize, usize),
    /// Half-extent of the agent's collision box.
    pub agent_radius: f64,
    pub success_radius: f64,
}

pub(crate) const UNREACHABLE: u32 = u32::MAX;

impl GridLayout {
    /// Builds a layout from rows of `#` (wall) and `.` (free) characters.
    pub fn from_ascii(rows: &[&str], start: (usize, usize)) -> Self {
        let cols = rows[0].len();
        let mut walls = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged maze row");
            walls.extend(r.chars().map(|c| c == '#'));
        }
        let layout = Self {
            rows: rows.len(),
            cols,
            walls,
            start,
            agent_radius: 0.1,
            success_radius: 0.5,
        };
        assert!(layout.is_free(start.0 as i64, start.1 as i64));
        layout
    }

    pub fn width(&self) -> f64 {
        self.cols as f64
    }

    pub fn height(&self) -> f64 {
        self.rows as f64
    }

    pub fn is_free(&self, row: i64, col: i64) -> bool {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            return false;
        }
        !self.walls[row as usize * self.cols + col as usize]
    }

    pub fn center(cell: (usize, usize)) -> [f64; 2] {
        [cell.1 as f64 + 0.5, cell.0 as f64 + 0.5]
    }

    /// Cell containing a point.
    pub fn cell_of(&self, p: [f64; 2]) -> (i64, i64) {
        (p[1].floor() as i64, p[0].floor() as i64)
    }

    /// Breadth-first step distances from `from` to every cell; walls are [`UNREACHABLE`].
    pub(crate) fn bfs(&self, from: (usize, usize)) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.rows * self.cols];
        let mut queue = VecDeque::new();
        dist[from.0 * self.cols + from.1] = 0;
        queue.push_back(from);
        while let Some((r, c)) = queue.pop_front() {
            let d = dist[r * self.cols + c];
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if self.is_free(nr, nc) {
                    let idx = nr as usize * self.cols + nc as usize;
                    if dist[idx] == UNREACHABLE {
                        dist[idx] = d + 1;
                        queue.push_back((nr as usize, nc as usize));
                    }
                }
            }
        }
        dist
    }

    /// Free cells whose path distance from the start lies in `[lo, hi]`, in row-major order.
    pub fn admissible_goals(&self, lo: f64, hi: f64) -> Vec<(usize, usize)> {
        let dist = self.bfs(self.start);
        let mut cells = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let d = dist[r * self.cols + c];
                if d != UNREACHABLE && (d as f64) >= lo && (d as f64) <= hi {
                    cells.push((r, c));
                }
            }
        }
        cells
    }

    /// Largest path distance from the start to any reachable cell.
    pub fn max_goal_distance(&self) -> u32 {
        self.bfs(self.start)
            .into_iter()
            .filter(|&d| d != UNREACHABLE)
            .max()
            .unwrap_or(0)
    }

    /// Shortest-path distance through the corridors from `p` to the center of the goal cell.
    ///
    /// Inside the goal cell this is the straight-line distance; elsewhere it is the distance
    /// to the center of the best neighbouring cell on a shortest route plus that cell's
    /// step distance. `goal_dist` is the BFS field rooted at the goal cell.
    pub(crate) fn path_distance(&self, p: [f64; 2], goal: (usize, usize), goal_dist: &[u32]) -> f64 {
        let g = Self::center(goal);
        let (r, c) = self.cell_of(p);
        let euclid = ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt();
        if !self.is_free(r, c) {
            return euclid;
        }
        let here = goal_dist[r as usize * self.cols + c as usize];
        if here == 0 || here == UNREACHABLE {
            return euclid;
        }
        let mut best = f64::INFINITY;
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if !self.is_free(nr, nc) {
                continue;
            }
            let d = goal_dist[nr as usize * self.cols + nc as usize];
            if d < here {
                let n = Self::center((nr as usize, nc as usize));
                let to_n = ((p[0] - n[0]).powi(2) + (p[1] - n[1]).powi(2)).sqrt();
                best = best.min(to_n + d as f64);
            }
        }
        if best.is_finite() {
            best
        } else {
            euclid
        }
    }

    /// Moves the agent box by `delta` one axis at a time, stopping flush against walls.
    /// Returns per-axis flags telling whether that axis was blocked.
    pub(crate) fn slide(&self, pos: &mut [f64; 2], delta: [f64; 2]) -> [bool; 2] {
        let mut blocked = [false; 2];
        for axis in 0..2 {
            if delta[axis] == 0.0 {
                continue;
            }
            let mut next = *pos;
            next[axis] += delta[axis];
            if let Some(limit) = self.first_blocking(&next, axis, delta[axis] > 0.0) {
                next[axis] = limit;
                blocked[axis] = true;
            }
            *pos = next;
        }
        blocked
    }

    /// If the box at `p` overlaps a wall, the coordinate along `axis` that puts it flush.
    fn first_blocking(&self, p: &[f64; 2], axis: usize, positive: bool) -> Option<f64> {
        const EPS: f64 = 1e-9;
        let rho = self.agent_radius;
        let (x0, x1) = ((p[0] - rho + EPS).floor() as i64, (p[0] + rho - EPS).floor() as i64);
        let (y0, y1) = ((p[1] - rho + EPS).floor() as i64, (p[1] + rho - EPS).floor() as i64);
        let mut limit: Option<f64> = None;
        for row in y0..=y1 {
            for col in x0..=x1 {
                if self.is_free(row, col) {
                    continue;
                }
                let edge = if axis == 0 { col } else { row } as f64;
                let candidate = if positive { edge - rho } else { edge + 1.0 + rho };
                limit = Some(match limit {
                    None => candidate,
                    Some(l) if positive => l.min(candidate),
                    Some(l) => l.max(candidate),
                });
            }
        }
        limit
    }
}
