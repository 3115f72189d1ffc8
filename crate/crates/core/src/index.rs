//! Uniform-grid bucket index used for radius and nearest-point queries on samples.

use std::collections::HashMap;

type Cell = [i64; 3];

#[derive(Debug, Clone)]
pub(crate) struct GridIndex {
    dim: usize,
    cell: f64,
    buckets: HashMap<Cell, Vec<u32>>,
    points: Vec<[f64; 3]>,
    ids: Vec<usize>,
}

impl GridIndex {
    pub(crate) fn new(dim: usize, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite());
        GridIndex { dim, cell, buckets: HashMap::new(), points: Vec::new(), ids: Vec::new() }
    }

    /// Builds an index whose cell size is about `per_cell` points for the given cloud.
    pub(crate) fn build(dim: usize, pts: impl Iterator<Item = ([f64; 3], usize)>) -> Self {
        let items: Vec<_> = pts.collect();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (p, _) in &items {
            for a in 0..dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let n = items.len().max(1) as f64;
        let mut vol = 1.0;
        let mut ext = 0.0f64;
        for a in 0..dim {
            let e = (hi[a] - lo[a]).max(0.0);
            ext = ext.max(e);
            vol *= e.max(1e-12);
        }
        let mut cell = (2.0 * vol / n).powf(1.0 / dim as f64);
        if !(cell.is_finite() && cell > 0.0) || ext == 0.0 {
            cell = 1.0;
        }
        cell = cell.max(ext * 1e-6).max(1e-12);
        let mut idx = GridIndex::new(dim, cell);
        for (p, id) in items {
            idx.insert(p, id);
        }
        idx
    }

    fn key(&self, p: &[f64; 3]) -> Cell {
        let mut c = [0i64; 3];
        for a in 0..self.dim {
            c[a] = (p[a] / self.cell).floor() as i64;
        }
        c
    }

    pub(crate) fn insert(&mut self, p: [f64; 3], id: usize) {
        let k = self.key(&p);
        self.buckets.entry(k).or_default().push(self.points.len() as u32);
        self.points.push(p);
        self.ids.push(id);
    }

    fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let d0 = a[0] - b[0];
        let d1 = a[1] - b[1];
        let d2 = a[2] - b[2];
        d0 * d0 + d1 * d1 + d2 * d2
    }

    fn box_cells(&self, r: f64) -> f64 {
        let m = (r / self.cell).ceil() + 1.0;
        (2.0 * m + 1.0).powi(self.dim as i32)
    }

    /// Calls `f(id, squared distance)` for every indexed point within Euclidean distance `r` of `q`.
    /// Returning `false` from `f` stops the scan.
    pub(crate) fn visit_within(&self, q: &[f64; 3], r: f64, mut f: impl FnMut(usize, f64) -> bool) {
        let r2 = r * r;
        if self.box_cells(r) > self.buckets.len() as f64 {
            for (i, p) in self.points.iter().enumerate() {
                let d2 = Self::dist2(p, q);
                if d2 <= r2 && !f(self.ids[i], d2) {
                    return;
                }
            }
            return;
        }
        let c = self.key(q);
        let m = (r / self.cell).ceil() as i64 + 1;
        let span = |a: usize| if a < self.dim { (c[a] - m, c[a] + m) } else { (0, 0) };
        let (x0, x1) = span(0);
        let (y0, y1) = span(1);
        let (z0, z1) = span(2);
        for x in x0..=x1 {
            for y in y0..=y1 {
                for z in z0..=z1 {
                    if let Some(b) = self.buckets.get(&[x, y, z]) {
                        for &i in b {
                            let d2 = Self::dist2(&self.points[i as usize], q);
                            if d2 <= r2 && !f(self.ids[i as usize], d2) {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Nearest indexed point to `q` as `(id, squared distance)`; ties resolved towards the smaller id.
    pub(crate) fn nearest(&self, q: &[f64; 3]) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let c = self.key(q);
        let mut best: Option<(usize, f64)> = None;
        let consider = |id: usize, d2: f64, best: &mut Option<(usize, f64)>| match best {
            Some((bid, bd)) if d2 > *bd || (d2 == *bd && id >= *bid) => {}
            _ => *best = Some((id, d2)),
        };
        let mut ring: i64 = 0;
        loop {
            let shell = if ring == 0 { 1.0 } else { (2 * ring + 1) as f64 };
            if shell.powi(self.dim as i32) > 4.0 * self.buckets.len() as f64 {
                for (i, p) in self.points.iter().enumerate() {
                    consider(self.ids[i], Self::dist2(p, q), &mut best);
                }
                return best;
            }
            let span = |a: usize| if a < self.dim { (c[a] - ring, c[a] + ring) } else { (0, 0) };
            let (x0, x1) = span(0);
            let (y0, y1) = span(1);
            let (z0, z1) = span(2);
            for x in x0..=x1 {
                for y in y0..=y1 {
                    for z in z0..=z1 {
                        let on_shell = (x - c[0]).abs() == ring
                            || (self.dim > 1 && (y - c[1]).abs() == ring)
                            || (self.dim > 2 && (z - c[2]).abs() == ring);
                        if !on_shell {
                            continue;
                        }
                        if let Some(b) = self.buckets.get(&[x, y, z]) {
                            for &i in b {
                                let i = i as usize;
                                consider(self.ids[i], Self::dist2(&self.points[i], q), &mut best);
                            }
                        }
                    }
                }
            }
            if let Some((_, bd)) = best {
                let reach = ring as f64 * self.cell;
                if bd <= reach * reach {
                    return best;
                }
            }
            ring += 1;
        }
    }
}
