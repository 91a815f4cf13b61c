//! Evaluable scalar fields over the plane.

use crate::expr::Expr;
use crate::point::Point2;

/// A scalar field evaluable anywhere; the common currency for loads,
/// boundary data and obstacles.
pub trait ScalarField: Send + Sync {
    fn eval(&self, x: Point2) -> f64;

    /// Central finite-difference gradient. Exact for affine fields up to
    /// rounding; good enough for the Lipschitz boundary data this crate uses.
    fn grad_fd(&self, x: Point2, h: f64) -> Point2 {
        let dx = (self.eval(Point2::new(x.x + h, x.y)) - self.eval(Point2::new(x.x - h, x.y)))
            / (2.0 * h);
        let dy = (self.eval(Point2::new(x.x, x.y + h)) - self.eval(Point2::new(x.x, x.y - h)))
            / (2.0 * h);
        Point2::new(dx, dy)
    }
}

impl ScalarField for Expr {
    fn eval(&self, x: Point2) -> f64 {
        Expr::eval(self, x.x, x.y)
    }
}

/// Constant field, handy for obstacles and sentinels.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn eval(&self, _x: Point2) -> f64 {
        self.0
    }
}

/// Closure-backed field for tests and programmatic instances.
pub struct FnField<F>(pub F);

impl<F: Fn(Point2) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn eval(&self, x: Point2) -> f64 {
        (self.0)(x)
    }
}

impl ScalarField for Box<dyn ScalarField> {
    fn eval(&self, x: Point2) -> f64 {
        self.as_ref().eval(x)
    }
}
