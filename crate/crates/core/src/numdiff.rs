//! Central finite differences used as the fallback derivative path and as
//! test oracles for the analytic derivatives.

use crate::Matrix;

/// Step for coordinate value `xi`: `max(1e-6, 1e-8 * |xi|)`.
pub fn fd_step(xi: f64) -> f64 {
    (1e-8 * xi.abs()).max(1e-6)
}

/// Central-difference gradient of a scalar function.
pub fn central_gradient<F>(f: F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Jacobian of a gradient map by central differences, symmetrized.
pub fn hessian_from_gradient<G>(grad: G, x: &[f64]) -> Matrix
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut h = Matrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let step = fd_step(x[j]);
        probe[j] = x[j] + step;
        let up = grad(&probe);
        probe[j] = x[j] - step;
        let down = grad(&probe);
        probe[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    symmetrize(&mut h);
    h
}

/// Second differences of a scalar function with step `1e-4 * max(1, |x_i|)`.
///
/// Used when no gradient is available; the larger step keeps the roundoff
/// term (eps / h^2) comparable to the truncation term.
pub fn hessian_from_values<F>(f: F, x: &[f64]) -> Matrix
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let mut h = Matrix::zeros(n, n);
    let mut p = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        let hi = steps[i];
        p[i] = x[i] + hi;
        let up = f(&p);
        p[i] = x[i] - hi;
        let down = f(&p);
        p[i] = x[i];
        h[(i, i)] = (up - 2.0 * f0 + down) / (hi * hi);
        for j in (i + 1)..n {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `||a - b|| / max(||a||, ||b||, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = norm(a).max(norm(b)).max(floor);
    diff / scale
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
