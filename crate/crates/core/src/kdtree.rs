use nalgebra::Point3;

/// Static 3-d tree for exact nearest-neighbor queries.
///
/// Built once over a point set; queries are read-only and safe to run
/// concurrently. Splits cycle through the axes at the median, so the layout
/// is deterministic for a given input order.
pub struct KdTree3 {
    points: Vec<Point3<f64>>,
    /// Indices into `points`, arranged as an implicit median tree.
    order: Vec<u32>,
}

impl KdTree3 {
    pub fn build(points: &[Point3<f64>]) -> KdTree3 {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let pts = points.to_vec();
        if !order.is_empty() {
            build_recursive(&pts, &mut order, 0);
        }
        KdTree3 { points: pts, order }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the point nearest to `query`.
    pub fn nearest(&self, query: &Point3<f64>) -> Option<(usize, f64)> {
        if self.order.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.order.len(), 0, query, &mut best);
        Some(best)
    }

    fn search(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        query: &Point3<f64>,
        best: &mut (usize, f64),
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid] as usize;
        let p = &self.points[idx];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let delta = query[axis] - p[axis];
        let next_axis = (axis + 1) % 3;
        let (first, second) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(first.0, first.1, next_axis, query, best);
        if delta * delta < best.1 {
            self.search(second.0, second.1, next_axis, query, best);
        }
    }
}

fn build_recursive(points: &[Point3<f64>], order: &mut [u32], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let va = points[a as usize][axis];
        let vb = points[b as usize][axis];
        va.partial_cmp(&vb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let next = (axis + 1) % 3;
    let (left, rest) = order.split_at_mut(mid);
    build_recursive(points, left, next);
    build_recursive(points, &mut rest[1..], next);
}
