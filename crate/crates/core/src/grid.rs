//! Shared evaluation grids and field evaluators for cross-mesh comparisons.
//!
//! Solutions on different pre-fractal levels live on different meshes; norms
//! between them are computed on a uniform Cartesian grid clipped to the
//! finest domain (extended fields of consecutive levels agree outside it, so
//! nothing is lost by the clip). Values interpolate linearly, gradients are
//! the piecewise-constant element gradients.

use crate::fem::ElementData;
use crate::field::ScalarField;
use crate::geometry::PrefractalDomain;
use crate::mesh::{Mesh, TriLocator};
use crate::point::Point2;

pub struct EvalGrid {
    pub origin: Point2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Points inside the clip domain, row-major order.
    pub points: Vec<Point2>,
    pub cell_area: f64,
}

impl EvalGrid {
    /// Uniform grid over the domain bounding box keeping the points inside
    /// the domain (even-odd rule, row-wise scanline).
    pub fn over_domain(domain: &PrefractalDomain, spacing: f64) -> EvalGrid {
        assert!(spacing > 0.0);
        let (lo, hi) = domain.bbox();
        let origin = Point2::new(lo.x - 0.5 * spacing, lo.y - 0.5 * spacing);
        let nx = (((hi.x - origin.x) / spacing).ceil() as usize) + 1;
        let ny = (((hi.y - origin.y) / spacing).ceil() as usize) + 1;
        let m = domain.boundary.len();
        let mut points = Vec::new();
        let mut xs: Vec<f64> = Vec::new();
        for j in 0..ny {
            let y = origin.y + j as f64 * spacing;
            xs.clear();
            for i in 0..m {
                let a = domain.boundary[i];
                let b = domain.boundary[(i + 1) % m];
                if (a.y > y) != (b.y > y) {
                    let t = (y - a.y) / (b.y - a.y);
                    xs.push(a.x + t * (b.x - a.x));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let i0 = ((pair[0] - origin.x) / spacing).ceil().max(0.0) as usize;
                let i1 = ((pair[1] - origin.x) / spacing).floor() as usize;
                for i in i0..=i1.min(nx - 1) {
                    let x = origin.x + i as f64 * spacing;
                    if x > pair[0] && x < pair[1] {
                        points.push(Point2::new(x, y));
                    }
                }
            }
        }
        EvalGrid {
            origin,
            spacing,
            nx,
            ny,
            points,
            cell_area: spacing * spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodal field on a mesh with point evaluation of values and gradients.
pub struct MeshField {
    pub mesh: std::sync::Arc<Mesh>,
    pub values: Vec<f64>,
    locator: TriLocator,
    gradients: Vec<Point2>,
}

impl MeshField {
    pub fn new(mesh: std::sync::Arc<Mesh>, values: Vec<f64>) -> MeshField {
        assert_eq!(values.len(), mesh.vertices.len());
        let locator = TriLocator::new(&mesh);
        let elements = ElementData::new(&mesh);
        let gradients = elements.gradients(&values, crate::par::ExecMode::Sequential);
        MeshField {
            mesh,
            values,
            locator,
            gradients,
        }
    }

    /// Linear interpolation and element gradient at `p`, or None outside the
    /// mesh (with a sliver tolerance for points on the boundary).
    pub fn eval(&self, p: Point2) -> Option<(f64, Point2)> {
        let (t, w) = self.locator.locate(&self.mesh, p, 1e-9)?;
        let [a, b, c] = self.mesh.triangles[t];
        let v = w[0] * self.values[a as usize]
            + w[1] * self.values[b as usize]
            + w[2] * self.values[c as usize];
        Some((v, self.gradients[t]))
    }
}

/// Level-n solution prolonged by the boundary datum outside its domain.
pub struct ExtendedField<'a> {
    pub inner: &'a MeshField,
    pub g: &'a dyn ScalarField,
    pub fd_step: f64,
}

impl<'a> ExtendedField<'a> {
    pub fn new(inner: &'a MeshField, g: &'a dyn ScalarField) -> Self {
        ExtendedField {
            inner,
            g,
            fd_step: 1e-6,
        }
    }

    pub fn eval(&self, p: Point2) -> (f64, Point2) {
        match self.inner.eval(p) {
            Some(v) => v,
            None => (self.g.eval(p), self.g.grad_fd(p, self.fd_step)),
        }
    }

    /// True when `p` falls outside the carrier mesh (so the value came from
    /// the boundary datum).
    pub fn is_extension_at(&self, p: Point2) -> bool {
        self.inner.eval(p).is_none()
    }
}

impl ScalarField for ExtendedField<'_> {
    fn eval(&self, x: Point2) -> f64 {
        ExtendedField::eval(self, x).0
    }
}

/// Discrete L^r and W^{1,r} surrogate distances between two extended fields
/// over a shared grid. Returns (value part, gradient part, combined).
pub fn grid_distance(
    a: &ExtendedField,
    b: &ExtendedField,
    grid: &EvalGrid,
    r: f64,
) -> (f64, f64, f64) {
    let mut val = 0.0;
    let mut grd = 0.0;
    for &p in &grid.points {
        let (va, ga) = a.eval(p);
        let (vb, gb) = b.eval(p);
        val += grid.cell_area * (va - vb).abs().powf(r);
        grd += grid.cell_area * (ga - gb).norm().powf(r);
    }
    (
        val.powf(1.0 / r),
        grd.powf(1.0 / r),
        (val + grd).powf(1.0 / r),
    )
}

/// Sup-norm distance over the grid.
pub fn grid_sup_distance(a: &ExtendedField, b: &ExtendedField, grid: &EvalGrid) -> f64 {
    grid.points
        .iter()
        .map(|&p| (a.eval(p).0 - b.eval(p).0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;
    use crate::geometry::{build_domain, regular_polygon, IfsParams};
    use crate::mesh::triangulate;

    #[test]
    fn grid_covers_square_area() {
        let ifs = IfsParams::new(3.0).unwrap();
        let domain = build_domain(&regular_polygon(4), 0, &ifs).unwrap();
        let grid = EvalGrid::over_domain(&domain, 0.01);
        let measured = grid.len() as f64 * grid.cell_area;
        assert!((measured - 1.0).abs() < 0.05, "got {measured}");
    }

    #[test]
    fn extension_returns_datum_outside() {
        let ifs = IfsParams::new(3.0).unwrap();
        let domain = build_domain(&regular_polygon(3), 1, &ifs).unwrap();
        let mesh = std::sync::Arc::new(triangulate(&domain, 0.2, 2.0).unwrap());
        let vals = vec![0.5; mesh.vertices.len()];
        let mf = MeshField::new(mesh, vals);
        let g = FnField(|x: Point2| 0.3 * x.x);
        let ext = ExtendedField::new(&mf, &g);
        let outside = Point2::new(-0.4, -0.4);
        assert!(ext.is_extension_at(outside));
        let (v, dg) = ext.eval(outside);
        assert_eq!(v, 0.3 * -0.4);
        assert!((dg.x - 0.3).abs() < 1e-9 && dg.y.abs() < 1e-9);
        let inside = Point2::new(0.5, 0.3);
        assert!(!ext.is_extension_at(inside));
        assert_eq!(ext.eval(inside).0, 0.5);
    }
}
