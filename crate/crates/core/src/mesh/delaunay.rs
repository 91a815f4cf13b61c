//! Constrained Delaunay kernel with Ruppert-style refinement.
//!
//! Pipeline: insert the boundary polyline vertices (Bowyer-Watson with a
//! super triangle), recover the boundary segments as constrained edges by
//! flipping, legalize, classify exterior triangles by flood fill, refine
//! (split encroached segments, insert circumcenters of bad triangles against
//! a graded size field), then smooth interior vertices. Everything runs in a
//! fixed order with no randomness.

use super::{circumcenter, circumradius, triangle_min_angle_deg, Mesh, MeshOptions};
use crate::error::MeshError;
use crate::geometry::PrefractalDomain;
use crate::point::{dist_sq_to_segment, Point2};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

const NONE: u32 = u32::MAX;

struct Kernel {
    pts: Vec<Point2>,
    tri: Vec<[u32; 3]>,
    adj: Vec<[u32; 3]>,
    alive: Vec<bool>,
    exterior: Vec<bool>,
    vert_tri: Vec<u32>,
    constraints: BTreeSet<(u32, u32)>,
    seg_parent: BTreeMap<(u32, u32), (u32, f64, f64)>,
    scale: f64,
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

impl Kernel {
    fn new(boundary: &[Point2]) -> Kernel {
        let mut lo = boundary[0];
        let mut hi = lo;
        for p in boundary {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let scale = (hi - lo).norm().max(1e-12);
        let center = (lo + hi) * 0.5;
        let r = scale * 8.0;
        // Super triangle fully containing the inflated bounding box.
        let s0 = center + Point2::new(0.0, 2.0 * r);
        let s1 = center + Point2::new(-2.0 * r, -r);
        let s2 = center + Point2::new(2.0 * r, -r);
        let mut pts = Vec::with_capacity(boundary.len() + 3);
        pts.push(s0);
        pts.push(s1);
        pts.push(s2);
        let tri = vec![[0u32, 1, 2]];
        Kernel {
            pts,
            tri,
            adj: vec![[NONE; 3]],
            alive: vec![true],
            exterior: vec![true],
            vert_tri: vec![0, 0, 0],
            constraints: BTreeSet::new(),
            seg_parent: BTreeMap::new(),
            scale,
        }
    }

    fn eps_area(&self) -> f64 {
        1e-13 * self.scale * self.scale
    }

    fn in_circle(&self, t: usize, p: Point2) -> bool {
        let [a, b, c] = self.tri_pts(t);
        let d0 = a - p;
        let d1 = b - p;
        let d2 = c - p;
        let t0 = d0.norm_sq() * d1.cross(d2);
        let t1 = d1.norm_sq() * d2.cross(d0);
        let t2 = d2.norm_sq() * d0.cross(d1);
        let det = t0 + t1 + t2;
        let thr = 1e-12 * (t0.abs() + t1.abs() + t2.abs());
        det > thr
    }

    fn tri_pts(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.tri[t];
        [
            self.pts[a as usize],
            self.pts[b as usize],
            self.pts[c as usize],
        ]
    }

    fn local_index(&self, t: usize, v: u32) -> usize {
        self.tri[t]
            .iter()
            .position(|&x| x == v)
            .expect("vertex in triangle")
    }

    /// Walk from `hint` to the triangle containing `p` (orientation >= -eps
    /// on all edges). Falls back to a linear scan if the walk stalls.
    fn locate(&self, p: Point2, hint: u32) -> u32 {
        let eps = self.eps_area();
        let mut t = if (hint as usize) < self.tri.len() && self.alive[hint as usize] {
            hint as usize
        } else {
            self.alive
                .iter()
                .position(|&a| a)
                .expect("no alive triangle")
        };
        let mut steps = 0usize;
        let max_steps = 4 * self.tri.len() + 64;
        'walk: loop {
            steps += 1;
            if steps > max_steps {
                break;
            }
            let [a, b, c] = self.tri_pts(t);
            let verts = [a, b, c];
            // Edge opposite local vertex i joins locals i+1, i+2.
            let mut worst: Option<(f64, usize)> = None;
            for i in 0..3 {
                let u = verts[(i + 1) % 3];
                let v = verts[(i + 2) % 3];
                let o = orient(u, v, p);
                if o < -eps {
                    match worst {
                        Some((w, _)) if w <= o => {}
                        _ => worst = Some((o, i)),
                    }
                }
            }
            match worst {
                None => return t as u32,
                Some((_, i)) => {
                    let nb = self.adj[t][i];
                    if nb == NONE {
                        break 'walk;
                    }
                    t = nb as usize;
                }
            }
        }
        // Deterministic fallback.
        for (t, &alive) in self.alive.iter().enumerate() {
            if !alive {
                continue;
            }
            let [a, b, c] = self.tri_pts(t);
            if orient(a, b, p) >= -eps && orient(b, c, p) >= -eps && orient(c, a, p) >= -eps {
                return t as u32;
            }
        }
        panic!("point location failed for ({}, {})", p.x, p.y);
    }

    /// Bowyer-Watson insertion. The cavity search never crosses constrained
    /// edges. Returns the new vertex index, or the index of an existing
    /// vertex when `p` coincides with one. Fails when the cavity degenerates
    /// numerically (arbitrarily sharp constrained corners).
    fn insert(&mut self, p: Point2, hint: u32) -> Result<u32, MeshError> {
        let t0 = self.locate(p, hint) as usize;
        let dedup_tol = 1e-12 * self.scale;
        for &v in &self.tri[t0] {
            if self.pts[v as usize].dist(p) <= dedup_tol {
                return Ok(v);
            }
        }
        // Grow the cavity.
        let mut cavity: BTreeSet<u32> = BTreeSet::new();
        cavity.insert(t0 as u32);
        let mut queue = VecDeque::from([t0 as u32]);
        while let Some(t) = queue.pop_front() {
            let t = t as usize;
            for i in 0..3 {
                let nb = self.adj[t][i];
                if nb == NONE || cavity.contains(&nb) {
                    continue;
                }
                let u = self.tri[t][(i + 1) % 3];
                let v = self.tri[t][(i + 2) % 3];
                if self.constraints.contains(&key(u, v)) {
                    continue;
                }
                if self.in_circle(nb as usize, p) {
                    cavity.insert(nb);
                    queue.push_back(nb);
                }
            }
        }
        // Coincidence with a vertex elsewhere in the cavity (symmetric
        // circumcenters land exactly on existing points): reuse it.
        for &t in &cavity {
            for &v in &self.tri[t as usize] {
                if self.pts[v as usize].dist(p) <= dedup_tol {
                    return Ok(v);
                }
            }
        }
        // Cavity boundary half-edges (u, v) with the cavity on the left,
        // plus the donor triangle and outside neighbor.
        let eps = self.eps_area();
        loop {
            let mut boundary: Vec<(u32, u32, u32, u32)> = Vec::new(); // (u, v, outside, donor)
            for &t in &cavity {
                let t = t as usize;
                for i in 0..3 {
                    let nb = self.adj[t][i];
                    if nb != NONE && cavity.contains(&nb) {
                        continue;
                    }
                    let u = self.tri[t][(i + 1) % 3];
                    let v = self.tri[t][(i + 2) % 3];
                    boundary.push((u, v, nb, t as u32));
                }
            }
            // Shrink the cavity if a fan triangle would be degenerate.
            let mut degenerate_donor: Option<u32> = None;
            for &(u, v, _, donor) in &boundary {
                if orient(self.pts[u as usize], self.pts[v as usize], p) <= eps
                    && donor != t0 as u32
                {
                    degenerate_donor = Some(donor);
                    break;
                }
            }
            match degenerate_donor {
                Some(d) => {
                    cavity.remove(&d);
                    continue;
                }
                None => {
                    if boundary.iter().any(|&(u, v, _, _)| {
                        orient(self.pts[u as usize], self.pts[v as usize], p) <= 0.0
                    }) {
                        return Err(MeshError::Conformity(format!(
                            "degenerate cavity while inserting ({}, {})",
                            p.x, p.y
                        )));
                    }
                    return Ok(self.fan(p, &boundary, &cavity));
                }
            }
        }
    }

    fn fan(&mut self, p: Point2, boundary: &[(u32, u32, u32, u32)], cavity: &BTreeSet<u32>) -> u32 {
        let w = self.pts.len() as u32;
        self.pts.push(p);
        self.vert_tri.push(NONE);
        for &t in cavity {
            self.alive[t as usize] = false;
        }
        let mut side_edges: BTreeMap<(u32, u32), (u32, usize)> = BTreeMap::new();
        let mut new_tris = Vec::with_capacity(boundary.len());
        for &(u, v, outside, donor) in boundary {
            let nt = self.tri.len() as u32;
            self.tri.push([u, v, w]);
            self.adj.push([NONE; 3]);
            self.alive.push(true);
            self.exterior.push(self.exterior[donor as usize]);
            new_tris.push(nt);
            // Edge opposite w (local 2) is (u, v): link to outside.
            self.adj[nt as usize][2] = outside;
            self.set_neighbor(outside, u, v, nt);
            // Side edges (v, w) opposite u (local 0) and (w, u) opposite v
            // (local 1) pair up with sibling fan triangles.
            for (slot, other) in [(0usize, v), (1usize, u)] {
                let k = key(other, w);
                match side_edges.remove(&k) {
                    Some((sib, sib_slot)) => {
                        self.adj[nt as usize][slot] = sib;
                        self.adj[sib as usize][sib_slot] = nt;
                    }
                    None => {
                        side_edges.insert(k, (nt, slot));
                    }
                }
            }
            self.vert_tri[u as usize] = nt;
            self.vert_tri[v as usize] = nt;
            self.vert_tri[w as usize] = nt;
        }
        debug_assert!(side_edges.is_empty(), "unpaired fan side edges");
        w
    }

    /// Iterates over alive triangles incident to `v` (full star; the super
    /// triangle keeps the hull closed so circulation never stalls).
    fn star(&self, v: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let start = self.vert_tri[v as usize];
        debug_assert!(start != NONE && self.alive[start as usize]);
        let mut t = start;
        loop {
            out.push(t);
            let lv = self.local_index(t as usize, v);
            // Rotate counterclockwise: cross the edge opposite local lv+1.
            let next = self.adj[t as usize][(lv + 1) % 3];
            debug_assert!(next != NONE, "open star around vertex {v}");
            if next == start || next == NONE {
                break;
            }
            t = next;
            if out.len() > self.tri.len() {
                panic!("circulation failure around vertex {v}");
            }
        }
        out
    }

    fn edge_triangles(&self, a: u32, b: u32) -> Option<(u32, u32)> {
        for t in self.star(a) {
            let tr = self.tri[t as usize];
            for i in 0..3 {
                let u = tr[(i + 1) % 3];
                let v = tr[(i + 2) % 3];
                if key(u, v) == key(a, b) {
                    return Some((t, self.adj[t as usize][i]));
                }
            }
        }
        None
    }

    /// Neighbor of `t` across its edge {a, b}.
    fn neighbor_across(&self, t: usize, a: u32, b: u32) -> u32 {
        for i in 0..3 {
            let p = self.tri[t][(i + 1) % 3];
            let q = self.tri[t][(i + 2) % 3];
            if key(p, q) == key(a, b) {
                return self.adj[t][i];
            }
        }
        panic!("edge ({a}, {b}) not in triangle {t}");
    }

    fn set_neighbor(&mut self, t: u32, a: u32, b: u32, nb: u32) {
        if t == NONE {
            return;
        }
        let t = t as usize;
        for i in 0..3 {
            let p = self.tri[t][(i + 1) % 3];
            let q = self.tri[t][(i + 2) % 3];
            if key(p, q) == key(a, b) {
                self.adj[t][i] = nb;
                return;
            }
        }
        panic!("edge ({a}, {b}) not in triangle {t}");
    }

    /// Flips the shared edge (u, v) of t1, t2 to the opposite diagonal.
    /// Caller guarantees flippability (strictly convex quad).
    fn flip(&mut self, t1: u32, t2: u32, shared: (u32, u32)) -> (u32, u32) {
        let (t1u, t2u) = (t1 as usize, t2 as usize);
        // Orient (u, v) so that t1 = [.., u, v, ..] counterclockwise.
        let lx = (0..3)
            .find(|&i| {
                let a = self.tri[t1u][(i + 1) % 3];
                let b = self.tri[t1u][(i + 2) % 3];
                key(a, b) == key(shared.0, shared.1)
            })
            .expect("shared edge in t1");
        let u = self.tri[t1u][(lx + 1) % 3];
        let v = self.tri[t1u][(lx + 2) % 3];
        let x = self.tri[t1u][lx];
        let y = self.tri[t2u]
            .iter()
            .copied()
            .find(|&w| w != u && w != v)
            .expect("apex of t2");
        let n_vx = self.neighbor_across(t1u, v, x);
        let n_xu = self.neighbor_across(t1u, x, u);
        let n_uy = self.neighbor_across(t2u, u, y);
        let n_yv = self.neighbor_across(t2u, y, v);
        // New triangles: t1 <- [u, y, x], t2 <- [v, x, y]; new edge (x, y).
        self.tri[t1u] = [u, y, x];
        self.tri[t2u] = [v, x, y];
        // t1 = [u, y, x]: opp u = (y, x) -> t2; opp y = (x, u) -> n_xu; opp x = (u, y) -> n_uy.
        self.adj[t1u] = [t2, n_xu, n_uy];
        // t2 = [v, x, y]: opp v = (x, y) -> t1; opp x = (y, v) -> n_yv; opp y = (v, x) -> n_vx.
        self.adj[t2u] = [t1, n_yv, n_vx];
        self.set_neighbor(n_uy, u, y, t1);
        self.set_neighbor(n_vx, v, x, t2);
        // n_xu stays adjacent to t1 and n_yv to t2; their back-pointers are
        // already correct, but the edges moved between triangles, so refresh.
        self.set_neighbor(n_xu, x, u, t1);
        self.set_neighbor(n_yv, y, v, t2);
        self.vert_tri[u as usize] = t1;
        self.vert_tri[y as usize] = t1;
        self.vert_tri[x as usize] = t1;
        self.vert_tri[v as usize] = t2;
        (t1, t2)
    }

    fn legalize_pass(&mut self) -> usize {
        let mut flips = 0;
        for t in 0..self.tri.len() {
            if !self.alive[t] {
                continue;
            }
            for i in 0..3 {
                let nb = self.adj[t][i];
                if nb == NONE || (nb as usize) < t {
                    continue;
                }
                let u = self.tri[t][(i + 1) % 3];
                let v = self.tri[t][(i + 2) % 3];
                if self.constraints.contains(&key(u, v)) {
                    continue;
                }
                let apex_nb = {
                    let o = nb as usize;
                    let slot = (0..3)
                        .find(|&j| {
                            let a = self.tri[o][(j + 1) % 3];
                            let b = self.tri[o][(j + 2) % 3];
                            key(a, b) == key(u, v)
                        })
                        .unwrap();
                    self.tri[o][slot]
                };
                if self.in_circle(t, self.pts[apex_nb as usize])
                    && self.flippable(t as u32, nb, (u, v))
                {
                    self.flip(t as u32, nb, (u, v));
                    flips += 1;
                }
            }
        }
        flips
    }

    fn flippable(&self, t1: u32, t2: u32, shared: (u32, u32)) -> bool {
        let (u, v) = shared;
        let x = self.tri[t1 as usize]
            .iter()
            .copied()
            .find(|&w| w != u && w != v)
            .unwrap();
        let y = self.tri[t2 as usize]
            .iter()
            .copied()
            .find(|&w| w != u && w != v)
            .unwrap();
        let eps = self.eps_area();
        let (pu, pv, px, py) = (
            self.pts[u as usize],
            self.pts[v as usize],
            self.pts[x as usize],
            self.pts[y as usize],
        );
        // Both new triangles (u, y, x) and (v, x, y) must be positively
        // oriented; this is the convex-quad test.
        orient(pu, py, px) > eps && orient(pv, px, py) > eps
    }

    fn edge_exists(&self, a: u32, b: u32) -> bool {
        self.star(a).iter().any(|&t| {
            let tr = self.tri[t as usize];
            tr.contains(&a) && tr.contains(&b)
        })
    }

    /// Recovers the input segment (a, b) as an edge by flipping away every
    /// crossing edge, then marks it constrained.
    fn enforce_constraint(&mut self, a: u32, b: u32) -> Result<(), MeshError> {
        if !self.edge_exists(a, b) {
            let pa = self.pts[a as usize];
            let pb = self.pts[b as usize];
            let eps = self.eps_area();
            let mut crossings: VecDeque<(u32, u32)> = VecDeque::new();
            // Entry triangle: the star triangle of `a` whose opposite edge
            // separates a from b.
            let mut cur = NONE;
            let (mut u, mut v) = (NONE, NONE);
            for t in self.star(a) {
                let la = self.local_index(t as usize, a);
                let cu = self.tri[t as usize][(la + 1) % 3];
                let cv = self.tri[t as usize][(la + 2) % 3];
                let su = orient(pa, pb, self.pts[cu as usize]);
                let sv = orient(pa, pb, self.pts[cv as usize]);
                if su > eps && sv < -eps {
                    cur = t;
                    u = cu;
                    v = cv;
                    break;
                }
            }
            if cur == NONE {
                return Err(MeshError::Conformity(format!(
                    "cannot start constraint walk {a}-{b}"
                )));
            }
            crossings.push_back((u, v));
            // March across crossed edges until the triangle containing b.
            let mut guard = 0usize;
            loop {
                guard += 1;
                if guard > self.tri.len() + 16 {
                    return Err(MeshError::Conformity(format!(
                        "constraint walk {a}-{b} did not terminate"
                    )));
                }
                let next = self.neighbor_across(cur as usize, u, v);
                if next == NONE {
                    return Err(MeshError::Conformity(format!(
                        "constraint walk {a}-{b} left the triangulation"
                    )));
                }
                let w = self.tri[next as usize]
                    .iter()
                    .copied()
                    .find(|&w| w != u && w != v)
                    .expect("apex across crossed edge");
                if w == b {
                    break;
                }
                let sw = orient(pa, pb, self.pts[w as usize]);
                if sw > eps {
                    u = w; // w on the left: next crossing joins w and v
                } else {
                    v = w;
                }
                crossings.push_back((u, v));
                cur = next;
            }
            // Flip the crossings away (Sloan); re-queue diagonals that still
            // cross the segment.
            let mut guard = 0usize;
            while let Some((cu, cv)) = crossings.pop_front() {
                guard += 1;
                if guard > 100_000 {
                    return Err(MeshError::Conformity(format!(
                        "constraint recovery {a}-{b} did not terminate"
                    )));
                }
                let Some((t1, t2)) = self.edge_triangles(cu, cv) else {
                    continue; // already flipped away
                };
                if t2 == NONE {
                    continue;
                }
                if !self.flippable(t1, t2, (cu, cv)) {
                    crossings.push_back((cu, cv));
                    continue;
                }
                let x = self.tri[t1 as usize]
                    .iter()
                    .copied()
                    .find(|&w| w != cu && w != cv)
                    .unwrap();
                let y = self.tri[t2 as usize]
                    .iter()
                    .copied()
                    .find(|&w| w != cu && w != cv)
                    .unwrap();
                self.flip(t1, t2, (cu, cv));
                if key(x, y) != key(a, b) && self.segment_crosses(pa, pb, x, y) {
                    crossings.push_back((x, y));
                }
            }
            if !self.edge_exists(a, b) {
                return Err(MeshError::Conformity(format!(
                    "constraint {a}-{b} could not be recovered"
                )));
            }
        }
        self.constraints.insert(key(a, b));
        Ok(())
    }

    fn segment_crosses(&self, pa: Point2, pb: Point2, u: u32, v: u32) -> bool {
        let pu = self.pts[u as usize];
        let pv = self.pts[v as usize];
        let eps = self.eps_area();
        let d1 = orient(pa, pb, pu);
        let d2 = orient(pa, pb, pv);
        let d3 = orient(pu, pv, pa);
        let d4 = orient(pu, pv, pb);
        ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
            && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
    }

    /// Marks every triangle reachable from the super vertices without
    /// crossing a constrained edge as exterior.
    fn classify_exterior(&mut self) {
        for e in self.exterior.iter_mut() {
            *e = false;
        }
        let mut queue: VecDeque<u32> = VecDeque::new();
        for (t, tr) in self.tri.iter().enumerate() {
            if self.alive[t] && tr.iter().any(|&v| v < 3) && !self.exterior[t] {
                self.exterior[t] = true;
                queue.push_back(t as u32);
            }
        }
        while let Some(t) = queue.pop_front() {
            let t = t as usize;
            for i in 0..3 {
                let nb = self.adj[t][i];
                if nb == NONE || self.exterior[nb as usize] || !self.alive[nb as usize] {
                    continue;
                }
                let u = self.tri[t][(i + 1) % 3];
                let v = self.tri[t][(i + 2) % 3];
                if self.constraints.contains(&key(u, v)) {
                    continue;
                }
                self.exterior[nb as usize] = true;
                queue.push_back(nb);
            }
        }
    }

    /// Splits the constrained edge (a, b) at its midpoint, keeping parent
    /// bookkeeping, and returns the new vertex.
    ///
    /// Parent records store, for the canonical key (lo, hi), the boundary
    /// parameters at lo and at hi (not necessarily sorted).
    fn split_segment(&mut self, a: u32, b: u32) -> Result<u32, MeshError> {
        let (lo, hi) = key(a, b);
        if self.pts[lo as usize].dist(self.pts[hi as usize]) < 1e-9 * self.scale {
            return Err(MeshError::Conformity(format!(
                "segment {lo}-{hi} too short to split further"
            )));
        }
        let parent = self.seg_parent.remove(&(lo, hi));
        self.constraints.remove(&(lo, hi));
        let mid = (self.pts[lo as usize] + self.pts[hi as usize]) * 0.5;
        let hint = self.vert_tri[lo as usize];
        let m = self.insert(mid, hint)?;
        self.constraints.insert(key(lo, m));
        self.constraints.insert(key(m, hi));
        if let Some((side, t_lo, t_hi)) = parent {
            let tm = 0.5 * (t_lo + t_hi);
            // m is a fresh vertex, so its index exceeds lo and hi: the
            // canonical keys are (lo, m) and (hi, m).
            self.seg_parent
                .insert((lo.min(m), lo.max(m)), (side, t_lo, tm));
            self.seg_parent
                .insert((hi.min(m), hi.max(m)), (side, t_hi, tm));
        }
        Ok(m)
    }

    fn segment_encroached(&self, a: u32, b: u32) -> bool {
        let pa = self.pts[a as usize];
        let pb = self.pts[b as usize];
        let mid = (pa + pb) * 0.5;
        let r = pa.dist(pb) * 0.5;
        let Some((t1, t2)) = self.edge_triangles(a, b) else {
            return false;
        };
        for t in [t1, t2] {
            if t == NONE || !self.alive[t as usize] {
                continue;
            }
            let w = self.tri[t as usize]
                .iter()
                .copied()
                .find(|&w| w != a && w != b)
                .unwrap();
            if self.pts[w as usize].dist(mid) < r * (1.0 - 1e-12) {
                return true;
            }
        }
        false
    }

    fn point_encroaches(&self, p: Point2, a: u32, b: u32) -> bool {
        let pa = self.pts[a as usize];
        let pb = self.pts[b as usize];
        let mid = (pa + pb) * 0.5;
        let r = pa.dist(pb) * 0.5;
        p.dist(mid) < r * (1.0 - 1e-12)
    }
}

/// Distance from `x` to the domain boundary together with the length of the
/// nearest boundary segment.
fn boundary_distance(domain: &PrefractalDomain, x: Point2) -> (f64, f64) {
    let m = domain.segment_count();
    let mut best = f64::INFINITY;
    let mut seg_len = 0.0;
    for i in 0..m {
        let (a, b) = domain.segment(i);
        let d = dist_sq_to_segment(x, a, b);
        if d < best {
            best = d;
            seg_len = a.dist(b);
        }
    }
    (best.sqrt(), seg_len)
}

pub(super) fn build(domain: &PrefractalDomain, opts: &MeshOptions) -> Result<Mesh, MeshError> {
    let boundary = &domain.boundary;
    let mut k = Kernel::new(boundary);
    // Insert boundary vertices in polyline order; offsets by the 3 super
    // vertices, so input vertex i gets index i + 3.
    let mut hint = 0u32;
    for p in boundary {
        let v = k.insert(*p, hint)?;
        hint = k.vert_tri[v as usize];
        debug_assert_eq!(v as usize, k.pts.len() - 1, "duplicate boundary vertex");
    }
    let n = boundary.len() as u32;
    for i in 0..n {
        let a = 3 + i;
        let b = 3 + (i + 1) % n;
        k.enforce_constraint(a, b)?;
        // Parent record carries the parameters at the canonical (lo, hi)
        // endpoints: a sits at parameter 0 of side i, b at parameter 1.
        let rec = if a < b { (i, 0.0, 1.0) } else { (i, 1.0, 0.0) };
        k.seg_parent.insert(key(a, b), rec);
    }
    // Legalize to a proper constrained Delaunay triangulation.
    for _ in 0..64 {
        if k.legalize_pass() == 0 {
            break;
        }
    }
    k.classify_exterior();
    refine(&mut k, domain, opts)?;
    smooth(&mut k, opts.smooth_passes);
    extract(&k, opts)
}

fn refine(k: &mut Kernel, domain: &PrefractalDomain, opts: &MeshOptions) -> Result<(), MeshError> {
    let floor_rad = opts.angle_floor_deg.to_radians();
    let quality_bad = |k: &Kernel, t: usize| -> bool {
        if !k.alive[t] || k.exterior[t] {
            return false;
        }
        let pts = k.tri_pts(t);
        let min_angle = triangle_min_angle_deg(pts).to_radians();
        if min_angle < floor_rad * (1.0 - 1e-9) {
            return true;
        }
        let r = circumradius(pts);
        if r > opts.h_max {
            return true;
        }
        let cc = (pts[0] + pts[1] + pts[2]) / 3.0;
        let (d, near_len) = boundary_distance(domain, cc);
        let size = (near_len + (opts.grading - 1.0) * d).min(opts.h_max);
        r > size
    };

    let mut inserted = 0usize;
    let mut seg_queue: VecDeque<(u32, u32)> = k.constraints.iter().copied().collect();
    let mut tri_queue: VecDeque<u32> = (0..k.tri.len() as u32).collect();
    let mut worst_angle = 180.0f64;

    while !seg_queue.is_empty() || !tri_queue.is_empty() {
        if inserted > opts.max_insertions {
            return Err(MeshError::QualityUnreachable {
                target_deg: opts.angle_floor_deg,
                got_deg: worst_angle,
                inserted,
            });
        }
        // Encroached segments take priority.
        if let Some((a, b)) = seg_queue.pop_front() {
            if !k.constraints.contains(&key(a, b)) || !k.segment_encroached(a, b) {
                continue;
            }
            let before = k.tri.len();
            let Ok(m) = k.split_segment(a, b) else {
                return Err(MeshError::QualityUnreachable {
                    target_deg: opts.angle_floor_deg,
                    got_deg: worst_angle,
                    inserted,
                });
            };
            inserted += 1;
            seg_queue.push_back(key(a, m));
            seg_queue.push_back(key(m, b));
            for t in before..k.tri.len() {
                tri_queue.push_back(t as u32);
                for i in 0..3 {
                    let u = k.tri[t][(i + 1) % 3];
                    let v = k.tri[t][(i + 2) % 3];
                    if k.constraints.contains(&key(u, v)) {
                        seg_queue.push_back(key(u, v));
                    }
                }
            }
            continue;
        }
        let Some(t) = tri_queue.pop_front() else {
            continue;
        };
        let t = t as usize;
        if !quality_bad(k, t) {
            continue;
        }
        worst_angle = worst_angle.min(triangle_min_angle_deg(k.tri_pts(t)));
        let cc = circumcenter(k.tri_pts(t));
        // Reject circumcenters that encroach constrained segments: split
        // those segments instead.
        let encroached: Vec<(u32, u32)> = k
            .constraints
            .iter()
            .copied()
            .filter(|&(a, b)| k.point_encroaches(cc, a, b))
            .collect();
        if !encroached.is_empty() {
            for (a, b) in encroached {
                let before = k.tri.len();
                let Ok(m) = k.split_segment(a, b) else {
                    return Err(MeshError::QualityUnreachable {
                        target_deg: opts.angle_floor_deg,
                        got_deg: worst_angle,
                        inserted,
                    });
                };
                inserted += 1;
                seg_queue.push_back(key(a, m));
                seg_queue.push_back(key(m, b));
                for nt in before..k.tri.len() {
                    tri_queue.push_back(nt as u32);
                }
            }
            tri_queue.push_back(t as u32);
            continue;
        }
        // Insert the circumcenter when it lands in the interior; otherwise
        // fall back to the longest-edge midpoint, which always lies in the
        // closed domain.
        let target = {
            let located = k.locate(cc, t as u32);
            if k.exterior[located as usize] {
                let p = k.tri_pts(t);
                let mut best = (0usize, 0.0f64);
                for i in 0..3 {
                    let len = p[(i + 1) % 3].dist(p[(i + 2) % 3]);
                    if len > best.1 {
                        best = (i, len);
                    }
                }
                (p[(best.0 + 1) % 3] + p[(best.0 + 2) % 3]) * 0.5
            } else {
                cc
            }
        };
        let before = k.tri.len();
        let hint = k.vert_tri[k.tri[t][0] as usize];
        if k.insert(target, hint).is_err() {
            return Err(MeshError::QualityUnreachable {
                target_deg: opts.angle_floor_deg,
                got_deg: worst_angle,
                inserted,
            });
        }
        inserted += 1;
        for nt in before..k.tri.len() {
            tri_queue.push_back(nt as u32);
            for i in 0..3 {
                let u = k.tri[nt][(i + 1) % 3];
                let v = k.tri[nt][(i + 2) % 3];
                if k.constraints.contains(&key(u, v)) {
                    seg_queue.push_back(key(u, v));
                }
            }
        }
        if quality_bad(k, t) {
            tri_queue.push_back(t as u32);
        }
    }
    Ok(())
}

/// Smart Laplacian smoothing: moves interior, non-constraint vertices to
/// their neighbor centroid when that does not lower the local minimum angle.
fn smooth(k: &mut Kernel, passes: usize) {
    let mut constrained: Vec<bool> = vec![false; k.pts.len()];
    for &(a, b) in &k.constraints {
        constrained[a as usize] = true;
        constrained[b as usize] = true;
    }
    for _ in 0..passes {
        for v in 3..k.pts.len() as u32 {
            if constrained[v as usize] {
                continue;
            }
            let star = k.star(v);
            if star.iter().any(|&t| k.exterior[t as usize]) {
                continue;
            }
            let mut ring: Vec<u32> = star
                .iter()
                .flat_map(|&t| k.tri[t as usize].iter().copied())
                .filter(|&w| w != v)
                .collect();
            ring.sort_unstable();
            ring.dedup();
            let centroid = ring
                .iter()
                .fold(Point2::new(0.0, 0.0), |acc, &w| acc + k.pts[w as usize])
                / ring.len() as f64;
            let quality = |k: &Kernel| -> f64 {
                star.iter()
                    .map(|&t| {
                        let p = k.tri_pts(t as usize);
                        if orient(p[0], p[1], p[2]) <= 0.0 {
                            -1.0
                        } else {
                            triangle_min_angle_deg(p)
                        }
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            let old_pos = k.pts[v as usize];
            let old_q = quality(k);
            k.pts[v as usize] = centroid;
            if quality(k) < old_q {
                k.pts[v as usize] = old_pos;
            }
        }
    }
}

fn extract(k: &Kernel, opts: &MeshOptions) -> Result<Mesh, MeshError> {
    let mut vmap: Vec<u32> = vec![NONE; k.pts.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for t in 0..k.tri.len() {
        if !k.alive[t] || k.exterior[t] {
            continue;
        }
        let mut mapped = [0u32; 3];
        for (slot, &v) in k.tri[t].iter().enumerate() {
            if vmap[v as usize] == NONE {
                vmap[v as usize] = vertices.len() as u32;
                vertices.push(k.pts[v as usize]);
            }
            mapped[slot] = vmap[v as usize];
        }
        triangles.push(mapped);
    }
    let mut boundary_edges: Vec<[u32; 2]> = Vec::with_capacity(k.constraints.len());
    let mut boundary_parents: Vec<(u32, f64, f64)> = Vec::with_capacity(k.constraints.len());
    for &(a, b) in &k.constraints {
        let (ma, mb) = (vmap[a as usize], vmap[b as usize]);
        if ma == NONE || mb == NONE {
            return Err(MeshError::Conformity(format!(
                "constrained edge {a}-{b} lost during extraction"
            )));
        }
        let &(side, t0, t1) = k
            .seg_parent
            .get(&(a, b))
            .ok_or_else(|| MeshError::Conformity(format!("missing parent for edge {a}-{b}")))?;
        boundary_edges.push([ma.min(mb), ma.max(mb)]);
        boundary_parents.push((side, t0.min(t1), t0.max(t1)));
    }
    let mut order: Vec<usize> = (0..boundary_edges.len()).collect();
    order.sort_by_key(|&i| boundary_edges[i]);
    let boundary_edges: Vec<[u32; 2]> = order.iter().map(|&i| boundary_edges[i]).collect();
    let boundary_parents: Vec<(u32, f64, f64)> =
        order.iter().map(|&i| boundary_parents[i]).collect();
    let mut boundary_nodes: Vec<u32> = boundary_edges.iter().flatten().copied().collect();
    boundary_nodes.sort_unstable();
    boundary_nodes.dedup();
    Ok(Mesh {
        vertices,
        triangles,
        boundary_nodes,
        boundary_edges,
        h_max: opts.h_max,
        boundary_parents: Some(boundary_parents),
    })
}
