use nalgebra::DVector;

use crate::linalg::RMatrix;

/// Autonomous first-order vector field `x' = F(x)`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Central-difference Jacobian; implementors with closed forms override.
    fn jacobian(&self, x: &DVector<f64>) -> RMatrix {
        let n = self.dim();
        let mut j = RMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-6 * (1.0 + x[k].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (self.eval(&xp) - self.eval(&xm)) / (2.0 * h);
            j.set_column(k, &col);
        }
        j
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).eval(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> RMatrix {
        (**self).jacobian(x)
    }
}

impl<F: VectorField + ?Sized> VectorField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).eval(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> RMatrix {
        (**self).jacobian(x)
    }
}

/// A field given by closures, mostly for tests and examples.
pub struct FnField<F, J = fn(&DVector<f64>) -> RMatrix> {
    dim: usize,
    f: F,
    jac: Option<J>,
}

impl<F> FnField<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, jac: None }
    }
}

impl<F, J> FnField<F, J>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
    J: Fn(&DVector<f64>) -> RMatrix + Send + Sync,
{
    pub fn with_jacobian(dim: usize, f: F, jac: J) -> Self {
        Self { dim, f, jac: Some(jac) }
    }
}

impl<F, J> VectorField for FnField<F, J>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
    J: Fn(&DVector<f64>) -> RMatrix + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> RMatrix {
        match &self.jac {
            Some(j) => j(x),
            None => {
                let n = self.dim;
                let mut j = RMatrix::zeros(n, n);
                for k in 0..n {
                    let h = 1e-6 * (1.0 + x[k].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    j.set_column(k, &((self.eval(&xp) - self.eval(&xm)) / (2.0 * h)));
                }
                j
            }
        }
    }
}
