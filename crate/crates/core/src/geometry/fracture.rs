use std::collections::BTreeMap;

use super::{FineGrid, GeometryError, Point};

/// Relative shift (in units of the cell size) applied to a segment lying
/// exactly on a grid line.
pub const COLLINEAR_NUDGE: f64 = 1e-9;
/// Sub-intervals shorter than this fraction of `min(hx, hy)` are merged.
pub const MIN_CELL_FRACTION: f64 = 1e-12;
/// Endpoints closer than this are treated as touching.
pub const CONTACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { a: Point::new(x0, y0), b: Point::new(x1, y1) }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(&self.b)
    }

    pub fn at(&self, t: f64) -> Point {
        Point::new(
            self.a.x + t * (self.b.x - self.a.x),
            self.a.y + t * (self.b.y - self.a.y),
        )
    }

    fn direction(&self) -> (f64, f64) {
        (self.b.x - self.a.x, self.b.y - self.a.y)
    }

    /// Parameter of the point on the segment closest to `p`, clamped to `[0, 1]`.
    fn project(&self, p: Point) -> f64 {
        let (dx, dy) = self.direction();
        let len2 = dx * dx + dy * dy;
        (((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2).clamp(0.0, 1.0)
    }
}

/// A contact between two segments: parameters on each and the contact point.
#[derive(Debug, Clone, Copy)]
struct Contact {
    t: f64,
    u: f64,
    point: Point,
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn contact(p: &Segment, q: &Segment, tol: f64) -> Option<Contact> {
    let dp = p.direction();
    let dq = q.direction();
    let denom = cross(dp, dq);
    let lp = p.length();
    let lq = q.length();
    if denom.abs() > 1e-14 * lp * lq {
        let w = (q.a.x - p.a.x, q.a.y - p.a.y);
        let t = cross(w, dq) / denom;
        let u = cross(w, dp) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return Some(Contact { t, u, point: p.at(t) });
        }
    }
    // Near-misses at endpoints, T-junctions and collinear overlaps.
    let mut best: Option<(f64, Contact)> = None;
    let mut consider = |dist: f64, c: Contact| {
        if dist <= tol && best.map_or(true, |(d, _)| dist < d) {
            best = Some((dist, c));
        }
    };
    for (t, pt) in [(0.0, p.a), (1.0, p.b)] {
        let u = q.project(pt);
        consider(pt.distance(&q.at(u)), Contact { t, u, point: pt });
    }
    for (u, pt) in [(0.0, q.a), (1.0, q.b)] {
        let t = p.project(pt);
        consider(pt.distance(&p.at(t)), Contact { t, u, point: p.at(t) });
    }
    best.map(|(_, c)| c)
}

/// Fracture line segments together with their connected-network labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FractureGeometry {
    segments: Vec<Segment>,
    network_id: Vec<usize>,
    num_networks: usize,
}

impl FractureGeometry {
    pub fn empty() -> Self {
        Self { segments: Vec::new(), network_id: Vec::new(), num_networks: 0 }
    }

    /// Labels networks by connectivity. Labels are assigned in order of each
    /// network's first segment, so the labeling is deterministic.
    pub fn new(segments: Vec<Segment>) -> Result<Self, GeometryError> {
        for (k, s) in segments.iter().enumerate() {
            let coords = [s.a.x, s.a.y, s.b.x, s.b.y];
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(GeometryError::InvalidGeometry(format!(
                    "segment {k} has a non-finite coordinate"
                )));
            }
            if !(s.length() > 0.0) {
                return Err(GeometryError::InvalidGeometry(format!(
                    "segment {k} has zero length"
                )));
            }
        }
        let n = segments.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if contact(&segments[i], &segments[j], CONTACT_TOLERANCE).is_some() {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut label_of_root = BTreeMap::new();
        let mut network_id = Vec::with_capacity(n);
        for i in 0..n {
            let r = find(&mut parent, i);
            let next = label_of_root.len();
            network_id.push(*label_of_root.entry(r).or_insert(next));
        }
        Ok(Self { segments, network_id, num_networks: label_of_root.len() })
    }

    /// Parses one segment per line, `x0 y0 x1 y1`, whitespace separated.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut segments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| GeometryError::Parse {
                        line: lineno + 1,
                        message: format!("not a number: {tok:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            if values.len() != 4 {
                return Err(GeometryError::Parse {
                    line: lineno + 1,
                    message: format!("expected 4 values (x0 y0 x1 y1), found {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(GeometryError::Parse {
                    line: lineno + 1,
                    message: "non-finite coordinate".into(),
                });
            }
            segments.push(Segment::new(values[0], values[1], values[2], values[3]));
        }
        Self::new(segments)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            out.push_str(&format!("{:?} {:?} {:?} {:?}\n", s.a.x, s.a.y, s.b.x, s.b.y));
        }
        out
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn network_of(&self, segment: usize) -> usize {
        self.network_id[segment]
    }

    pub fn num_networks(&self) -> usize {
        self.num_networks
    }
}

/// One embedded fracture cell: the part of a segment inside a single fine cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FractureCell {
    pub segment: usize,
    pub t0: f64,
    pub t1: f64,
    pub length: f64,
    pub midpoint: Point,
    /// Fine cell containing the fracture cell.
    pub host: usize,
    pub network: usize,
}

/// Adjacency between fracture cells `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureLink {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractureMesh {
    cells: Vec<FractureCell>,
    links: Vec<FractureLink>,
    num_networks: usize,
}

impl FractureMesh {
    pub fn empty() -> Self {
        Self { cells: Vec::new(), links: Vec::new(), num_networks: 0 }
    }

    pub fn cells(&self) -> &[FractureCell] {
        &self.cells
    }

    pub fn links(&self) -> &[FractureLink] {
        &self.links
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_networks(&self) -> usize {
        self.num_networks
    }

    pub fn host(&self, l: usize) -> usize {
        self.cells[l].host
    }

    pub fn network_of(&self, l: usize) -> usize {
        self.cells[l].network
    }

    pub fn total_length(&self) -> f64 {
        self.cells.iter().map(|c| c.length).sum()
    }
}

/// Moves a segment lying on a grid line off the line, toward the interior.
fn nudge_collinear(grid: &FineGrid, s: Segment) -> Segment {
    let d = grid.domain();
    let mut s = s;
    let on_line = |v: f64, origin: f64, h: f64| {
        let r = (v - origin) / h;
        (r - r.round()).abs() <= 1e-12 * r.abs().max(1.0)
    };
    if s.a.y == s.b.y && on_line(s.a.y, d.y0, grid.hy()) {
        let dir = if (s.a.y - d.y1).abs() < 0.5 * grid.hy() { -1.0 } else { 1.0 };
        let shift = dir * COLLINEAR_NUDGE * grid.hy();
        s.a.y += shift;
        s.b.y += shift;
    }
    if s.a.x == s.b.x && on_line(s.a.x, d.x0, grid.hx()) {
        let dir = if (s.a.x - d.x1).abs() < 0.5 * grid.hx() { -1.0 } else { 1.0 };
        let shift = dir * COLLINEAR_NUDGE * grid.hx();
        s.a.x += shift;
        s.b.x += shift;
    }
    s
}

/// Parameters in `(0, 1)` where the segment crosses a grid line.
fn crossing_parameters(grid: &FineGrid, s: &Segment) -> Vec<f64> {
    let mut ts = vec![0.0, 1.0];
    let d = grid.domain();
    let (dx, dy) = (s.b.x - s.a.x, s.b.y - s.a.y);
    if dx != 0.0 {
        let (lo, hi) = (s.a.x.min(s.b.x), s.a.x.max(s.b.x));
        let k0 = ((lo - d.x0) / grid.hx()).floor().max(0.0) as usize;
        let k1 = (((hi - d.x0) / grid.hx()).ceil().max(0.0) as usize).min(grid.nx());
        for k in k0..=k1 {
            let x = grid.x_line(k);
            if x > lo && x < hi {
                ts.push((x - s.a.x) / dx);
            }
        }
    }
    if dy != 0.0 {
        let (lo, hi) = (s.a.y.min(s.b.y), s.a.y.max(s.b.y));
        let k0 = ((lo - d.y0) / grid.hy()).floor().max(0.0) as usize;
        let k1 = (((hi - d.y0) / grid.hy()).ceil().max(0.0) as usize).min(grid.ny());
        for k in k0..=k1 {
            let y = grid.y_line(k);
            if y > lo && y < hi {
                ts.push((y - s.a.y) / dy);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts
}

/// Drops breakpoints that would create sub-intervals shorter than `min_len`.
fn merge_short(ts: &[f64], seg_len: f64, min_len: f64) -> Vec<f64> {
    let mut kept = vec![0.0];
    for &t in &ts[1..ts.len() - 1] {
        if (t - kept[kept.len() - 1]) * seg_len >= min_len {
            kept.push(t);
        }
    }
    if kept.len() > 1 && (1.0 - kept[kept.len() - 1]) * seg_len < min_len {
        kept.pop();
    }
    kept.push(1.0);
    kept
}

/// Splits every segment at the grid lines it crosses, assigns host cells and
/// builds adjacency along segments and across touching segments.
pub fn mesh_fractures(grid: &FineGrid, geom: &FractureGeometry) -> Result<FractureMesh, GeometryError> {
    let d = grid.domain();
    let tol = 1e-12 * d.width().max(d.height());
    for (k, s) in geom.segments().iter().enumerate() {
        for p in [s.a, s.b] {
            if p.x < d.x0 - tol || p.x > d.x1 + tol || p.y < d.y0 - tol || p.y > d.y1 + tol {
                return Err(GeometryError::OutsideDomain { segment: k, x: p.x, y: p.y });
            }
        }
    }
    let min_len = MIN_CELL_FRACTION * grid.hx().min(grid.hy());
    let mut cells = Vec::new();
    let mut links: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut ranges = Vec::with_capacity(geom.segments().len());
    let nudged: Vec<Segment> = geom.segments().iter().map(|s| nudge_collinear(grid, *s)).collect();

    for (k, s) in nudged.iter().enumerate() {
        let len = s.length();
        let ts = merge_short(&crossing_parameters(grid, s), len, min_len);
        let start = cells.len();
        for w in ts.windows(2) {
            let mid = s.at(0.5 * (w[0] + w[1]));
            cells.push(FractureCell {
                segment: k,
                t0: w[0],
                t1: w[1],
                length: (w[1] - w[0]) * len,
                midpoint: mid,
                host: grid.locate(mid),
                network: geom.network_of(k),
            });
        }
        for l in start + 1..cells.len() {
            let dist = cells[l - 1].midpoint.distance(&cells[l].midpoint);
            links.insert((l - 1, l), dist);
        }
        ranges.push(start..cells.len());
    }

    let cell_at = |k: usize, t: f64| -> usize {
        let r = ranges[k].clone();
        let slice = &cells[r.clone()];
        let pos = slice.partition_point(|c| c.t1 < t);
        r.start + pos.min(slice.len() - 1)
    };
    for i in 0..nudged.len() {
        for j in (i + 1)..nudged.len() {
            if geom.network_of(i) != geom.network_of(j) {
                continue;
            }
            if let Some(c) = contact(&nudged[i], &nudged[j], CONTACT_TOLERANCE) {
                let (li, lj) = (cell_at(i, c.t), cell_at(j, c.u));
                let (ci, cj) = (&cells[li], &cells[lj]);
                // Path length through the contact point; bounded below so that
                // cells whose midpoints meet at the contact stay well-posed.
                let path = ci.midpoint.distance(&c.point) + c.point.distance(&cj.midpoint);
                let dist = path.max(0.5 * ci.length.min(cj.length));
                links.entry((li.min(lj), li.max(lj))).or_insert(dist);
            }
        }
    }

    let links = links
        .into_iter()
        .map(|((a, b), distance)| FractureLink { a, b, distance })
        .collect();
    Ok(FractureMesh { cells, links, num_networks: geom.num_networks() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn unit(n: usize) -> FineGrid {
        FineGrid::new(n, n, Rect::unit()).unwrap()
    }

    #[test]
    fn horizontal_segment_splits_at_every_column() {
        let g = unit(120);
        let geom = FractureGeometry::new(vec![Segment::new(0.0, 0.505, 1.0, 0.505)]).unwrap();
        let m = mesh_fractures(&g, &geom).unwrap();
        // Oracle: the segment crosses x = k/120 for k = 1..119.
        let expected: Vec<(f64, f64)> = (0..120).map(|k| (k as f64 / 120.0, (k + 1) as f64 / 120.0)).collect();
        assert_eq!(m.num_cells(), expected.len());
        for (c, (xa, xb)) in m.cells().iter().zip(&expected) {
            assert!((c.length - 1.0 / 120.0).abs() < 1e-14);
            assert!((c.midpoint.x - 0.5 * (xa + xb)).abs() < 1e-14);
            assert_eq!(g.cell_ij(c.host), ((c.midpoint.x * 120.0) as usize, 60));
        }
        assert_eq!(m.links().len(), 119);
    }

    #[test]
    fn segment_inside_one_cell() {
        let g = unit(10);
        let geom = FractureGeometry::new(vec![Segment::new(0.31, 0.42, 0.38, 0.47)]).unwrap();
        let m = mesh_fractures(&g, &geom).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.host(0), g.cell_id(3, 4));
        assert!(m.links().is_empty());
    }

    #[test]
    fn crossing_segments_share_network_and_link() {
        let segs = vec![
            Segment::new(0.1, 0.1, 0.9, 0.9),
            Segment::new(0.1, 0.9, 0.9, 0.1),
            Segment::new(0.05, 0.02, 0.2, 0.03),
        ];
        let geom = FractureGeometry::new(segs).unwrap();
        assert_eq!(geom.network_of(0), geom.network_of(1));
        assert_ne!(geom.network_of(0), geom.network_of(2));
        assert_eq!(geom.num_networks(), 2);
        let g = unit(8);
        let m = mesh_fractures(&g, &geom).unwrap();
        let cross = m.links().iter().filter(|l| m.cells()[l.a].segment != m.cells()[l.b].segment).count();
        assert_eq!(cross, 1);
        for l in m.links() {
            assert!(l.distance > 0.0);
            assert_eq!(m.network_of(l.a), m.network_of(l.b));
        }
    }

    #[test]
    fn touching_endpoints_within_tolerance_connect() {
        let segs = vec![Segment::new(0.1, 0.1, 0.5, 0.5), Segment::new(0.5 + 1e-10, 0.5, 0.9, 0.2)];
        let geom = FractureGeometry::new(segs).unwrap();
        assert_eq!(geom.num_networks(), 1);
        let segs = vec![Segment::new(0.1, 0.1, 0.5, 0.5), Segment::new(0.5 + 1e-6, 0.5, 0.9, 0.2)];
        assert_eq!(FractureGeometry::new(segs).unwrap().num_networks(), 2);
    }

    #[test]
    fn zero_length_segment_is_rejected() {
        let err = FractureGeometry::new(vec![Segment::new(0.3, 0.3, 0.3, 0.3)]).unwrap_err();
        assert!(matches!(err, GeometryError::InvalidGeometry(_)));
    }

    #[test]
    fn outside_segment_is_rejected() {
        let geom = FractureGeometry::new(vec![Segment::new(0.3, 0.3, 1.3, 0.3)]).unwrap();
        assert!(matches!(mesh_fractures(&unit(4), &geom), Err(GeometryError::OutsideDomain { .. })));
    }

    #[test]
    fn collinear_segment_is_nudged_not_rejected() {
        let g = unit(10);
        for y in [0.0, 0.5, 1.0] {
            let geom = FractureGeometry::new(vec![Segment::new(0.0, y, 1.0, y)]).unwrap();
            let m = mesh_fractures(&g, &geom).unwrap();
            assert_eq!(m.num_cells(), 10);
            let hosts: Vec<_> = m.cells().iter().map(|c| g.cell_ij(c.host).1).collect();
            let row = if y == 1.0 { 9 } else { (y * 10.0) as usize };
            assert!(hosts.iter().all(|&j| j == row), "y = {y}: {hosts:?}");
        }
        let geom = FractureGeometry::new(vec![Segment::new(0.3, 0.05, 0.3, 0.95)]).unwrap();
        let m = mesh_fractures(&g, &geom).unwrap();
        assert!(m.cells().iter().all(|c| g.cell_ij(c.host).0 == 3));
    }

    #[test]
    fn diagonal_through_vertices_has_no_slivers() {
        let g = unit(6);
        let geom = FractureGeometry::new(vec![Segment::new(0.0, 0.0, 1.0, 1.0)]).unwrap();
        let m = mesh_fractures(&g, &geom).unwrap();
        assert_eq!(m.num_cells(), 6);
        for (k, c) in m.cells().iter().enumerate() {
            assert_eq!(c.host, g.cell_id(k, k));
        }
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "# header\n0.1 0.2 0.3 0.4\n\n0.5 0.5 0.9 0.9 # trailing\n";
        let geom = FractureGeometry::parse(text).unwrap();
        assert_eq!(geom.segments().len(), 2);
        assert_eq!(FractureGeometry::parse(&geom.to_text()).unwrap(), geom);
        assert!(matches!(FractureGeometry::parse("0.1 0.2 0.3"), Err(GeometryError::Parse { line: 1, .. })));
        assert!(matches!(FractureGeometry::parse("\n0.1 x 0.3 0.4"), Err(GeometryError::Parse { line: 2, .. })));
        assert!(FractureGeometry::parse("0.1 0.2 NaN 0.4").is_err());
    }
}
