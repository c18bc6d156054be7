//! Exact incremental grid traversal (Amanatides & Woo) shared by the sensor,
//! the belief-space ray caster and the line rasterizer.

/// One cell visited by a ray, with the ray parameter at which it was entered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CellVisit {
    pub x: i64,
    pub y: i64,
    pub t_enter: f64,
}

/// Iterator over every grid cell intersected by the segment
/// `origin + t * dir`, `t ∈ [0, max_t)`, clipped to a `width × height` grid.
/// Coordinates are in cell units; `dir` must be a unit vector.
pub(crate) struct Traversal {
    x: i64,
    y: i64,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    t: f64,
    max_t: f64,
    width: i64,
    height: i64,
    done: bool,
}

impl Traversal {
    pub fn new(origin: (f64, f64), dir: (f64, f64), max_t: f64, width: usize, height: usize) -> Self {
        let (ox, oy) = origin;
        let (dx, dy) = dir;
        let x = ox.floor() as i64;
        let y = oy.floor() as i64;
        let axis = |o: f64, d: f64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, (o.floor() + 1.0 - o) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (o - o.floor()) / -d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, t_max_x, t_delta_x) = axis(ox, dx);
        let (step_y, t_max_y, t_delta_y) = axis(oy, dy);
        let width = width as i64;
        let height = height as i64;
        let done = x < 0 || y < 0 || x >= width || y >= height || max_t <= 0.0;
        Self {
            x,
            y,
            step_x,
            step_y,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            t: 0.0,
            max_t,
            width,
            height,
            done,
        }
    }

    /// The cell the ray enters right after the most recently yielded one,
    /// ignoring the range limit. `None` when it lies outside the grid.
    pub fn peek_next_cell(&self) -> Option<(i64, i64)> {
        let (x, y) = (self.x, self.y);
        (x >= 0 && y >= 0 && x < self.width && y < self.height).then_some((x, y))
    }
}

impl Iterator for Traversal {
    type Item = CellVisit;

    fn next(&mut self) -> Option<CellVisit> {
        if self.done {
            return None;
        }
        let visit = CellVisit {
            x: self.x,
            y: self.y,
            t_enter: self.t,
        };
        if self.t_max_x < self.t_max_y {
            self.x += self.step_x;
            self.t = self.t_max_x;
            self.t_max_x += self.t_delta_x;
        } else {
            self.y += self.step_y;
            self.t = self.t_max_y;
            self.t_max_y += self.t_delta_y;
        }
        if self.t >= self.max_t
            || self.x < 0
            || self.y < 0
            || self.x >= self.width
            || self.y >= self.height
        {
            self.done = true;
        }
        Some(visit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_ray_visits_consecutive_cells() {
        let cells: Vec<_> = Traversal::new((0.5, 0.5), (1.0, 0.0), 3.2, 10, 10)
            .map(|c| (c.x, c.y))
            .collect();
        assert_eq!(cells, vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
    }

    #[test]
    fn ray_stops_at_grid_boundary() {
        let n = Traversal::new((1.5, 1.5), (-1.0, 0.0), 100.0, 4, 4).count();
        assert_eq!(n, 2);
    }

    #[test]
    fn steps_are_four_connected() {
        let d = (0.6f64, 0.8f64);
        let cells: Vec<_> = Traversal::new((2.3, 1.7), d, 9.0, 20, 20).collect();
        for w in cells.windows(2) {
            assert_eq!((w[0].x - w[1].x).abs() + (w[0].y - w[1].y).abs(), 1);
            assert!(w[1].t_enter >= w[0].t_enter);
        }
    }
}
