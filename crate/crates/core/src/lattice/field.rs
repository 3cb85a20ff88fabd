use std::fmt;
use std::sync::Arc;

use super::Point;

/// Exterior / initial datum g(x, t), with a constant far-field value used
/// beyond the truncation radius.
#[derive(Clone)]
pub struct Datum {
    f: Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>,
    far_value: f64,
}

impl fmt::Debug for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Datum")
            .field("far_value", &self.far_value)
            .finish_non_exhaustive()
    }
}

impl Datum {
    pub fn new<F>(f: F, far_value: f64) -> Self
    where
        F: Fn(Point, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            far_value,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c, c)
    }

    pub fn eval(&self, x: Point, t: f64) -> f64 {
        (self.f)(x, t)
    }

    pub fn far_value(&self) -> f64 {
        self.far_value
    }

    /// x ↦ g(x + shift, t + time_shift)/m.
    pub fn transformed(&self, m: f64, shift: Point, time_shift: f64) -> Self {
        let inner = self.f.clone();
        let far = self.far_value / m;
        if shift == [0.0, 0.0] && time_shift == 0.0 {
            return Self::new(move |x, t| inner(x, t) / m, far);
        }
        Self::new(
            move |x, t| inner([x[0] + shift[0], x[1] + shift[1]], t + time_shift) / m,
            far,
        )
    }
}

/// How a field is continued beyond the lattice box.
#[derive(Debug, Clone)]
pub enum ExteriorRule {
    Zero,
    Constant(f64),
    Datum { datum: Datum, t: f64 },
}

impl ExteriorRule {
    pub fn value(&self, x: Point) -> f64 {
        match self {
            ExteriorRule::Zero => 0.0,
            ExteriorRule::Constant(c) => *c,
            ExteriorRule::Datum { datum, t } => datum.eval(x, *t),
        }
    }

    pub fn far_value(&self) -> f64 {
        match self {
            ExteriorRule::Zero => 0.0,
            ExteriorRule::Constant(c) => *c,
            ExteriorRule::Datum { datum, .. } => datum.far_value(),
        }
    }
}

/// Nodal values on the lattice box plus the continuation rule beyond it.
#[derive(Debug, Clone)]
pub struct Field {
    pub values: Vec<f64>,
    pub exterior: ExteriorRule,
}

impl Field {
    pub fn new(values: Vec<f64>, exterior: ExteriorRule) -> Self {
        Self { values, exterior }
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Self {
            values: vec![c; len],
            exterior: ExteriorRule::Constant(c),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
