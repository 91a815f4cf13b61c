//! Piecewise-linear discretization of the double-obstacle (p,q) energy.
//!
//! The discrete energy of a nodal field v is
//!
//! ```text
//! E(v) = sum_T |T| [ (k^2+|grad v|_T^2)^(p/2) / p + (k^2+|grad v|_T^2)^(q/2) / q ]
//!        - sum_i l_i v_i
//! ```
//!
//! with constant element gradients and the load integrated by vertex
//! quadrature (`l = f_nodal .* lumped mass`), which keeps the analytic
//! nodal gradient of E exact. Obstacles are enforced as nodal box
//! constraints by the solver.
//!
//! Two assembly routes exist on purpose: `energy_gradient` (basis-function
//! scatter, used for solving) and `vi_form` (direct element-gradient
//! contraction, used to audit the variational inequality); tests pin their
//! agreement.

use crate::error::FemError;
use crate::field::ScalarField;
use crate::mesh::Mesh;
use crate::par::{indexed_accumulate, indexed_sum, ExecMode};
use crate::point::Point2;
use std::sync::Arc;

/// Exponents, parameter k, and the four data fields of one problem.
#[derive(Clone)]
pub struct ProblemInstance {
    pub p: f64,
    pub q: f64,
    pub k: f64,
    pub f: Arc<dyn ScalarField>,
    pub g: Arc<dyn ScalarField>,
    pub phi1: Arc<dyn ScalarField>,
    pub phi2: Arc<dyn ScalarField>,
    /// Lipschitz constant of g (user-supplied).
    pub lip_g: f64,
}

impl ProblemInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: f64,
        q: f64,
        k: f64,
        f: Arc<dyn ScalarField>,
        g: Arc<dyn ScalarField>,
        phi1: Arc<dyn ScalarField>,
        phi2: Arc<dyn ScalarField>,
        lip_g: f64,
    ) -> Result<Self, FemError> {
        if !p.is_finite() || !k.is_finite() || p <= q || q < 2.0 {
            return Err(FemError::BadExponents { p, q });
        }
        Ok(Self {
            p,
            q,
            k,
            f,
            g,
            phi1,
            phi2,
            lip_g,
        })
    }

    /// Same data with a different leading exponent (for sweeps and
    /// continuation).
    pub fn with_p(&self, p: f64) -> Result<Self, FemError> {
        let mut out = self.clone();
        if !p.is_finite() || p <= self.q {
            return Err(FemError::BadExponents { p, q: self.q });
        }
        out.p = p;
        Ok(out)
    }

    /// max(1, sqrt(L^2 + k^2)), the gradient bound of the limit problems.
    pub fn limit_bound(&self) -> f64 {
        (self.lip_g * self.lip_g + self.k * self.k).sqrt().max(1.0)
    }
}

/// Nodal values over a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.vertices.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Nodal interpolation of a field. Infinite values are legal (obstacle
/// sentinels); NaN is rejected with the offending node.
pub fn interpolate(field: &dyn ScalarField, mesh: &Mesh) -> Result<DiscreteField, FemError> {
    let mut values = Vec::with_capacity(mesh.vertices.len());
    for (i, &x) in mesh.vertices.iter().enumerate() {
        let v = field.eval(x);
        if v.is_nan() {
            return Err(FemError::NonFiniteField {
                node: i,
                x: x.x,
                y: x.y,
            });
        }
        values.push(v);
    }
    Ok(DiscreteField { values })
}

/// Precomputed element geometry: areas and P1 basis gradients.
pub struct ElementData {
    pub n_vertices: usize,
    pub tris: Vec<[u32; 3]>,
    pub area: Vec<f64>,
    pub grad_basis: Vec<[Point2; 3]>,
    pub total_area: f64,
}

impl ElementData {
    pub fn new(mesh: &Mesh) -> Self {
        let nt = mesh.triangles.len();
        let mut area = Vec::with_capacity(nt);
        let mut grad_basis = Vec::with_capacity(nt);
        let mut total = 0.0;
        for t in 0..nt {
            let [a, b, c] = mesh.triangle_points(t);
            let two_a = (b - a).cross(c - a);
            area.push(0.5 * two_a);
            total += 0.5 * two_a;
            grad_basis.push([
                (c - b).perp() / two_a,
                (a - c).perp() / two_a,
                (b - a).perp() / two_a,
            ]);
        }
        Self {
            n_vertices: mesh.vertices.len(),
            tris: mesh.triangles.clone(),
            area,
            grad_basis,
            total_area: total,
        }
    }

    pub fn n_triangles(&self) -> usize {
        self.tris.len()
    }

    /// Constant gradient of the linear interpolant on triangle t.
    pub fn gradient(&self, values: &[f64], t: usize) -> Point2 {
        let [a, b, c] = self.tris[t];
        let g = self.grad_basis[t];
        g[0] * values[a as usize] + g[1] * values[b as usize] + g[2] * values[c as usize]
    }

    pub fn gradients(&self, values: &[f64], mode: ExecMode) -> Vec<Point2> {
        crate::par::indexed_map(self.n_triangles(), mode, |t| self.gradient(values, t))
    }

    /// Lumped nodal mass: |T|/3 summed over incident triangles.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_vertices];
        for (t, tri) in self.tris.iter().enumerate() {
            let w = self.area[t] / 3.0;
            for &v in tri {
                m[v as usize] += w;
            }
        }
        m
    }

    pub fn max_gradient_norm(&self, values: &[f64]) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.gradient(values, t).norm())
            .fold(0.0, f64::max)
    }

    /// Discrete L^r norm of the piecewise-constant gradient.
    pub fn gradient_lr_norm(&self, values: &[f64], r: f64) -> f64 {
        let s: f64 = (0..self.n_triangles())
            .map(|t| self.area[t] * self.gradient(values, t).norm().powf(r))
            .sum();
        s.powf(1.0 / r)
    }
}

/// `s^e * 2^log2_scale` with the conventions needed at s = 0: exponent 0
/// gives the bare scale, any positive exponent gives 0.
#[inline]
fn pow_half(s: f64, e: f64, log2_scale: f64) -> f64 {
    if e == 0.0 {
        return log2_scale.exp2();
    }
    if s <= 0.0 {
        return 0.0;
    }
    (e * s.log2() + log2_scale).exp2()
}

/// Assembled energy/gradient evaluator for one (instance, mesh) pair.
pub struct EnergyModel {
    pub p: f64,
    pub q: f64,
    pub k2: f64,
    pub elements: ElementData,
    /// Nodal load vector (f at nodes times lumped mass).
    pub load: Vec<f64>,
    pub mode: ExecMode,
}

impl EnergyModel {
    pub fn new(instance: &ProblemInstance, mesh: &Mesh) -> Result<Self, FemError> {
        let elements = ElementData::new(mesh);
        let f_nodal = interpolate(instance.f.as_ref(), mesh)?;
        let mass = elements.lumped_mass();
        let load = f_nodal
            .values
            .iter()
            .zip(&mass)
            .map(|(f, m)| f * m)
            .collect();
        Ok(Self {
            p: instance.p,
            q: instance.q,
            k2: instance.k * instance.k,
            elements,
            load,
            mode: ExecMode::auto(),
        })
    }

    pub fn with_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    fn check_len(&self, values: &[f64]) -> Result<(), FemError> {
        if values.len() != self.elements.n_vertices {
            return Err(FemError::FieldSizeMismatch {
                got: values.len(),
                expect: self.elements.n_vertices,
            });
        }
        Ok(())
    }

    /// Energy scaled by 2^log2_scale; saturates to +inf instead of failing,
    /// which is what the line search wants.
    pub fn energy_scaled(&self, values: &[f64], log2_scale: f64) -> f64 {
        let el = &self.elements;
        let (p, q, k2) = (self.p, self.q, self.k2);
        let bulk = indexed_sum(el.n_triangles(), self.mode, |t| {
            let s = k2 + el.gradient(values, t).norm_sq();
            el.area[t]
                * (pow_half(s, 0.5 * p, log2_scale) / p + pow_half(s, 0.5 * q, log2_scale) / q)
        });
        let load: f64 = self
            .load
            .iter()
            .zip(values)
            .map(|(l, v)| l * v)
            .sum::<f64>()
            * log2_scale.exp2();
        bulk - load
    }

    /// Discrete energy. Out-of-range when the p-power overflows f64; the
    /// caller is expected to switch to the scaled formulation then.
    pub fn energy(&self, field: &DiscreteField) -> Result<f64, FemError> {
        self.check_len(&field.values)?;
        let e = self.energy_scaled(&field.values, 0.0);
        if e.is_finite() {
            Ok(e)
        } else {
            let (base, _) = self.max_base(&field.values);
            Err(FemError::EnergyOutOfRange {
                base,
                exponent: 0.5 * self.p,
            })
        }
    }

    /// Largest (k^2 + |grad|^2) over elements and its log2.
    pub fn max_base(&self, values: &[f64]) -> (f64, f64) {
        let el = &self.elements;
        let mut base = 0.0f64;
        for t in 0..el.n_triangles() {
            base = base.max(self.k2 + el.gradient(values, t).norm_sq());
        }
        let l2 = if base > 0.0 {
            base.log2()
        } else {
            f64::NEG_INFINITY
        };
        (base, l2)
    }

    /// Exact nodal gradient of the scaled energy.
    pub fn gradient_scaled(&self, values: &[f64], log2_scale: f64) -> Vec<f64> {
        let el = &self.elements;
        let (p, q, k2) = (self.p, self.q, self.k2);
        let mut grad = indexed_accumulate(el.n_triangles(), el.n_vertices, self.mode, |t, buf| {
            let g = el.gradient(values, t);
            let s = k2 + g.norm_sq();
            let w = el.area[t]
                * (pow_half(s, 0.5 * p - 1.0, log2_scale) + pow_half(s, 0.5 * q - 1.0, log2_scale));
            let basis = el.grad_basis[t];
            let [a, b, c] = el.tris[t];
            buf[a as usize] += w * g.dot(basis[0]);
            buf[b as usize] += w * g.dot(basis[1]);
            buf[c as usize] += w * g.dot(basis[2]);
        });
        let scale = log2_scale.exp2();
        for (gi, li) in grad.iter_mut().zip(&self.load) {
            *gi -= li * scale;
        }
        grad
    }

    /// Exact nodal gradient of the discrete energy.
    pub fn energy_gradient(&self, field: &DiscreteField) -> Result<Vec<f64>, FemError> {
        self.check_len(&field.values)?;
        let g = self.gradient_scaled(&field.values, 0.0);
        if g.iter().any(|x| !x.is_finite()) {
            let (base, _) = self.max_base(&field.values);
            return Err(FemError::EnergyOutOfRange {
                base,
                exponent: 0.5 * self.p - 1.0,
            });
        }
        Ok(g)
    }

    /// Variational-inequality form a_p(u, v-u) + a_q(u, v-u) - (f, v-u),
    /// assembled directly from element gradients. Independent of
    /// `energy_gradient` by construction; tests pin their agreement.
    pub fn vi_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let el = &self.elements;
        let (p, q, k2) = (self.p, self.q, self.k2);
        let bulk = indexed_sum(el.n_triangles(), self.mode, |t| {
            let gu = el.gradient(u, t);
            let [a, b, c] = el.tris[t];
            let basis = el.grad_basis[t];
            let gd = basis[0] * (v[a as usize] - u[a as usize])
                + basis[1] * (v[b as usize] - u[b as usize])
                + basis[2] * (v[c as usize] - u[c as usize]);
            let s = k2 + gu.norm_sq();
            el.area[t]
                * (pow_half(s, 0.5 * p - 1.0, 0.0) + pow_half(s, 0.5 * q - 1.0, 0.0))
                * gu.dot(gd)
        });
        let load: f64 = self
            .load
            .iter()
            .enumerate()
            .map(|(i, l)| l * (v[i] - u[i]))
            .sum();
        bulk - load
    }

    /// Penalized gradient-cap energy used by the capped limit solver:
    /// adds rho * sum_T |T| max(0, |grad|^2 - cap^2)^2 to the plain energy.
    pub fn penalty_energy(&self, values: &[f64], cap: f64, rho: f64) -> f64 {
        let el = &self.elements;
        let cap2 = cap * cap;
        let pen = indexed_sum(el.n_triangles(), self.mode, |t| {
            let ex = (el.gradient(values, t).norm_sq() - cap2).max(0.0);
            el.area[t] * ex * ex
        });
        self.energy_scaled(values, 0.0) + rho * pen
    }

    pub fn penalty_gradient(&self, values: &[f64], cap: f64, rho: f64) -> Vec<f64> {
        let el = &self.elements;
        let cap2 = cap * cap;
        let mut grad = self.gradient_scaled(values, 0.0);
        let pen = indexed_accumulate(el.n_triangles(), el.n_vertices, self.mode, |t, buf| {
            let g = el.gradient(values, t);
            let ex = (g.norm_sq() - cap2).max(0.0);
            if ex > 0.0 {
                let w = 4.0 * rho * el.area[t] * ex;
                let basis = el.grad_basis[t];
                let [a, b, c] = el.tris[t];
                buf[a as usize] += w * g.dot(basis[0]);
                buf[b as usize] += w * g.dot(basis[1]);
                buf[c as usize] += w * g.dot(basis[2]);
            }
        });
        for (gi, pi) in grad.iter_mut().zip(&pen) {
            *gi += pi;
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Constant, FnField};
    use crate::geometry::{build_domain, regular_polygon, IfsParams};
    use crate::mesh::triangulate;

    fn square_mesh(h: f64) -> Mesh {
        let ifs = IfsParams::new(3.0).unwrap();
        let domain = build_domain(&regular_polygon(4), 0, &ifs).unwrap();
        triangulate(&domain, h, 2.0).unwrap()
    }

    fn instance(p: f64, q: f64, k: f64) -> ProblemInstance {
        ProblemInstance::new(
            p,
            q,
            k,
            Arc::new(Constant(0.0)),
            Arc::new(FnField(|x: Point2| 0.3 * x.x)),
            Arc::new(Constant(f64::NEG_INFINITY)),
            Arc::new(Constant(f64::INFINITY)),
            0.3,
        )
        .unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(matches!(
            ProblemInstance::new(
                2.0,
                2.0,
                0.0,
                Arc::new(Constant(0.0)),
                Arc::new(Constant(0.0)),
                Arc::new(Constant(f64::NEG_INFINITY)),
                Arc::new(Constant(f64::INFINITY)),
                0.0
            ),
            Err(FemError::BadExponents { .. })
        ));
        assert!(instance(3.0, 2.0, 1.0).with_p(2.5).is_ok());
        assert!(instance(3.0, 2.0, 1.0).with_p(1.5).is_err());
    }

    #[test]
    fn element_gradients_exact() {
        let mesh = square_mesh(0.4);
        let el = ElementData::new(&mesh);
        let constant = DiscreteField::constant(&mesh, 3.25);
        let x1 = interpolate(&FnField(|x: Point2| x.x), &mesh).unwrap();
        for t in 0..el.n_triangles() {
            assert!(el.gradient(&constant.values, t).norm() < 1e-13);
            let g = el.gradient(&x1.values, t);
            assert!((g.x - 1.0).abs() < 1e-12 && g.y.abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_barycenter_differences() {
        // The interpolant is linear, so its gradient equals central
        // differences of the interpolant at the barycenter.
        let mesh = square_mesh(0.4);
        let el = ElementData::new(&mesh);
        let field = interpolate(
            &FnField(|x: Point2| (2.1 * x.x - 0.3 * x.y).sin() + 0.5 * x.y),
            &mesh,
        )
        .unwrap();
        let interp_at = |p: Point2, t: usize| -> f64 {
            let [a, b, c] = mesh.triangle_points(t);
            let area = crate::point::signed_area(a, b, c);
            let wa = crate::point::signed_area(p, b, c) / area;
            let wb = crate::point::signed_area(a, p, c) / area;
            let wc = 1.0 - wa - wb;
            let [ia, ib, ic] = mesh.triangles[t];
            wa * field.values[ia as usize]
                + wb * field.values[ib as usize]
                + wc * field.values[ic as usize]
        };
        let h = 1e-6;
        for t in 0..el.n_triangles() {
            let [a, b, c] = mesh.triangle_points(t);
            let bary = (a + b + c) / 3.0;
            let fd = Point2::new(
                (interp_at(bary + Point2::new(h, 0.0), t)
                    - interp_at(bary - Point2::new(h, 0.0), t))
                    / (2.0 * h),
                (interp_at(bary + Point2::new(0.0, h), t)
                    - interp_at(bary - Point2::new(0.0, h), t))
                    / (2.0 * h),
            );
            let g = el.gradient(&field.values, t);
            assert!((g - fd).norm() <= 1e-8);
        }
    }

    #[test]
    fn energy_closed_forms() {
        let mesh = square_mesh(0.3);
        // f = 0, k = 0, constant field: zero energy.
        let inst = instance(3.0, 2.0, 0.0);
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        let c = DiscreteField::constant(&mesh, 0.7);
        assert!(model.energy(&c).unwrap().abs() < 1e-14);
        // Affine field with |grad| = 1: area * ((k^2+1)^(p/2)/p + (k^2+1)^(q/2)/q).
        let inst = instance(3.5, 2.0, 0.8);
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        let v = interpolate(&FnField(|x: Point2| x.x), &mesh).unwrap();
        let area = model.elements.total_area;
        let s: f64 = 1.0 + 0.64;
        let expect = area * (s.powf(1.75) / 3.5 + s / 2.0);
        let got = model.energy(&v).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect.abs());
        // f = 1, field = 0, k = 0: zero.
        let inst = ProblemInstance::new(
            3.0,
            2.0,
            0.0,
            Arc::new(Constant(1.0)),
            Arc::new(Constant(0.0)),
            Arc::new(Constant(f64::NEG_INFINITY)),
            Arc::new(Constant(f64::INFINITY)),
            0.0,
        )
        .unwrap();
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        let zero = DiscreteField::constant(&mesh, 0.0);
        assert_eq!(model.energy(&zero).unwrap(), 0.0);
    }

    #[test]
    fn interior_gradient_vanishes_on_affine_fields() {
        let mesh = square_mesh(0.25);
        let inst = instance(3.5, 2.0, 0.5);
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        let v = interpolate(&FnField(|x: Point2| 0.4 * x.x - 0.2 * x.y + 1.0), &mesh).unwrap();
        let grad = model.energy_gradient(&v).unwrap();
        let boundary = mesh.is_boundary_mask();
        for (i, g) in grad.iter().enumerate() {
            if !boundary[i] {
                assert!(g.abs() <= 1e-10, "node {i}: residual {g}");
            }
        }
    }

    #[test]
    fn overflow_guard() {
        let mesh = square_mesh(0.4);
        let inst = instance(600.0, 2.0, 0.0);
        let model = EnergyModel::new(&inst, &mesh).unwrap();
        let huge = interpolate(&FnField(|x: Point2| 10.0 * x.x), &mesh).unwrap();
        assert!(matches!(
            model.energy(&huge),
            Err(FemError::EnergyOutOfRange { .. })
        ));
        // The scaled path stays finite.
        let (_, log2_base) = model.max_base(&huge.values);
        let shift = -(0.5 * 600.0 * log2_base);
        assert!(model.energy_scaled(&huge.values, shift).is_finite());
    }

    #[test]
    fn sentinel_interpolation() {
        let mesh = square_mesh(0.5);
        let lo = interpolate(&Constant(f64::NEG_INFINITY), &mesh).unwrap();
        assert!(lo.values.iter().all(|v| *v == f64::NEG_INFINITY));
        let bad = interpolate(&FnField(|_x: Point2| f64::NAN), &mesh);
        assert!(matches!(bad, Err(FemError::NonFiniteField { .. })));
    }

    #[test]
    fn square_corner_interpolation() {
        let mesh = square_mesh(0.9);
        let g = interpolate(&FnField(|x: Point2| x.x), &mesh).unwrap();
        // The four unit-square corners hold 0, 1, 1, 0.
        for (i, v) in mesh.vertices.iter().enumerate() {
            if (v.x.abs() < 1e-14 || (v.x - 1.0).abs() < 1e-14)
                && (v.y.abs() < 1e-14 || (v.y - 1.0).abs() < 1e-14)
            {
                assert_eq!(g.values[i], v.x);
            }
        }
    }
}
