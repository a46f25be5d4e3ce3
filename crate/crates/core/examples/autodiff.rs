//! Gradients from the scalar tape, checked against central differences.

use thermal_bayes::autodiff::{finite_difference, grad, Scalar};

// Same code runs on f64 and on tape variables.
fn rosenbrock<T: Scalar>(x: &[T]) -> T {
    let a = T::constant(1.0) - x[0];
    let b = x[1] - x[0] * x[0];
    a * a + b * b * 100.0
}

fn log_gamma_density<T: Scalar>(x: T, shape: f64, rate: f64) -> T {
    x.ln() * (shape - 1.0) - x * rate
}

fn main() {
    let x = [-1.2, 1.0];
    let g = grad(|v| rosenbrock(v), &x).unwrap();
    let fd = finite_difference(|v| rosenbrock(v), &x, 1e-5);
    println!("rosenbrock({x:?}) = {}", g.value);
    println!("  tape gradient   {:?}", g.gradient);
    println!("  finite diff     {fd:?}");

    let g = grad(|v| log_gamma_density(v[0], 3.0, 0.5), &[2.0]).unwrap();
    println!("d/dx log Gamma(x; 3, 0.5) at 2 = {} (analytic {})", g.gradient[0], 2.0 / 2.0 - 0.5);

    match grad(|v| v[0].ln(), &[-1.0]) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("ln(-1): {e}"),
    }
}
