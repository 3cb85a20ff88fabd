use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Point;

/// Measurable coefficient k(x, y, t) of the nonlocal operator.
///
/// Implementations must be symmetric in (x, y) and satisfy Λ⁻¹ ≤ k ≤ Λ;
/// [`kernel_audit`] checks both by sampling.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn eval(&self, x: Point, y: Point, t: f64) -> f64;

    /// The ellipticity constant Λ ≥ 1.
    fn lambda(&self) -> f64;

    fn time_independent(&self) -> bool {
        true
    }
}

pub type KernelSpec = Arc<dyn Kernel>;

#[derive(Debug, Clone, Copy)]
pub struct ConstantKernel {
    pub value: f64,
    pub lambda: f64,
}

impl ConstantKernel {
    pub fn unit() -> Self {
        Self {
            value: 1.0,
            lambda: 1.0,
        }
    }
}

impl Kernel for ConstantKernel {
    fn eval(&self, _x: Point, _y: Point, _t: f64) -> f64 {
        self.value
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// k(x, y) = 1 + a·sin(Σ(xᵢ + yᵢ)), symmetric by construction.
#[derive(Debug, Clone, Copy)]
pub struct SinSumKernel {
    pub amplitude: f64,
    pub lambda: f64,
}

impl Kernel for SinSumKernel {
    fn eval(&self, x: Point, y: Point, _t: f64) -> f64 {
        // (x₀ + x₁) + (y₀ + y₁) is exactly symmetric under x ↔ y
        1.0 + self.amplitude * ((x[0] + x[1]) + (y[0] + y[1])).sin()
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Kernel given by an arbitrary closure; used for counterexamples and tests.
#[derive(Clone)]
pub struct FnKernel {
    pub f: Arc<dyn Fn(Point, Point, f64) -> f64 + Send + Sync>,
    pub lambda: f64,
    pub time_independent: bool,
}

impl fmt::Debug for FnKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnKernel")
            .field("lambda", &self.lambda)
            .finish_non_exhaustive()
    }
}

impl Kernel for FnKernel {
    fn eval(&self, x: Point, y: Point, t: f64) -> f64 {
        (self.f)(x, y, t)
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn time_independent(&self) -> bool {
        self.time_independent
    }
}

/// k̄(x, y, t) = factor·k(x + shift, y + shift, t + time_shift).
///
/// This is the kernel of the translated and normalized problem: with
/// factor = M^{p−2} the bounds become M^{p−2}Λ⁻¹ ≤ k̄ ≤ M^{p−2}Λ.
#[derive(Debug, Clone)]
pub struct TransformedKernel {
    pub inner: KernelSpec,
    pub factor: f64,
    pub shift: Point,
    pub time_shift: f64,
}

impl Kernel for TransformedKernel {
    fn eval(&self, x: Point, y: Point, t: f64) -> f64 {
        if self.shift == [0.0, 0.0] && self.time_shift == 0.0 {
            return self.factor * self.inner.eval(x, y, t);
        }
        let xs = [x[0] + self.shift[0], x[1] + self.shift[1]];
        let ys = [y[0] + self.shift[0], y[1] + self.shift[1]];
        self.factor * self.inner.eval(xs, ys, t + self.time_shift)
    }

    fn lambda(&self) -> f64 {
        // Bounds of the transformed kernel are [factor/Λ, factor·Λ].
        self.inner.lambda() * self.factor.max(1.0 / self.factor)
    }

    fn time_independent(&self) -> bool {
        self.inner.time_independent()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelAudit {
    pub samples: usize,
    pub max_symmetry_defect: f64,
    pub bound_violations: usize,
    pub min_value: f64,
    pub max_value: f64,
}

impl KernelAudit {
    pub fn passed(&self) -> bool {
        self.max_symmetry_defect == 0.0 && self.bound_violations == 0
    }
}

/// Samples random pairs in [−extent, extent]ⁿ × [0, t_max] and reports the
/// largest |k(x,y,t) − k(y,x,t)| and how many values leave [Λ⁻¹, Λ].
pub fn kernel_audit(
    kernel: &dyn Kernel,
    dim: usize,
    samples: usize,
    extent: f64,
    t_max: f64,
    seed: u64,
) -> KernelAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = kernel.lambda();
    let (lo, hi) = (1.0 / lambda, lambda);
    let mut audit = KernelAudit {
        samples,
        max_symmetry_defect: 0.0,
        bound_violations: 0,
        min_value: f64::INFINITY,
        max_value: f64::NEG_INFINITY,
    };
    let draw = |rng: &mut ChaCha8Rng| -> Point {
        let x = rng.gen_range(-extent..=extent);
        let y = if dim == 2 { rng.gen_range(-extent..=extent) } else { 0.0 };
        [x, y]
    };
    for _ in 0..samples {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let t = if t_max > 0.0 { rng.gen_range(0.0..=t_max) } else { 0.0 };
        let kxy = kernel.eval(x, y, t);
        let kyx = kernel.eval(y, x, t);
        audit.max_symmetry_defect = audit.max_symmetry_defect.max((kxy - kyx).abs());
        for v in [kxy, kyx] {
            audit.min_value = audit.min_value.min(v);
            audit.max_value = audit.max_value.max(v);
            if !(v >= lo && v <= hi) {
                audit.bound_violations += 1;
            }
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_kernel_passes() {
        let a = kernel_audit(&ConstantKernel::unit(), 1, 500, 5.0, 1.0, 7);
        assert!(a.passed());
        assert_eq!(a.min_value, 1.0);
    }

    #[test]
    fn sine_kernel_passes() {
        let k = SinSumKernel {
            amplitude: 0.5,
            lambda: 2.0,
        };
        let a = kernel_audit(&k, 2, 2000, 10.0, 1.0, 11);
        assert!(a.passed(), "{a:?}");
    }

    #[test]
    fn asymmetric_kernel_is_flagged() {
        let k = FnKernel {
            f: Arc::new(|x, _y, _t| x[0]),
            lambda: 1.0,
            time_independent: true,
        };
        let a = kernel_audit(&k, 1, 200, 3.0, 0.0, 3);
        assert!(a.max_symmetry_defect > 0.0);
        assert!(!a.passed());
    }

    #[test]
    fn normalized_kernel_bounds() {
        let inner: KernelSpec = Arc::new(ConstantKernel {
            value: 1.0,
            lambda: 1.5,
        });
        let k = TransformedKernel {
            inner,
            factor: 4.0,
            shift: [0.3, 0.0],
            time_shift: 0.0,
        };
        assert_eq!(k.eval([0.0; 2], [1.0, 0.0], 0.0), 4.0);
        let a = kernel_audit(&k, 1, 100, 1.0, 0.0, 1);
        assert!(a.passed());
    }
}
