use num_complex::Complex64;

use super::geometry::{Circle, ContourSpec};
use super::residue::signed_value;
use crate::{Error, Result};

/// Doubling stops once successive estimates agree to this relative level.
pub const DOUBLING_TOL: f64 = 1e-9;
/// Tolerated imaginary part, relative to the same scale.
pub const IMAG_TOL: f64 = 1e-9;
const MAX_NODES: usize = 1 << 22;

/// `(1/n) Σ f(z_k)(z_k − c)` over the nodes `k ≡ offset (mod stride)` of the
/// `n`-point rule, plus the largest `|f(z)(z − c)|` seen.
fn partial_sum<F: Fn(Complex64) -> Complex64>(c: &Circle, n: usize, offset: usize, stride: usize, f: &F) -> (Complex64, f64) {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut peak: f64 = 0.0;
    let center = Complex64::new(c.center, 0.0);
    for k in (offset..n).step_by(stride) {
        let z = c.node(k, n);
        let v = f(z) * (z - center);
        peak = peak.max(v.norm());
        acc += v;
    }
    (acc / n as f64, peak)
}

/// `∮ f(z) dz/(2πi)` over the contour by the trapezoid rule, doubling the
/// node count on every circle until two successive estimates agree to
/// `DOUBLING_TOL` relative to `max(|I|, 10⁻⁴·max|f(z)(z−c)|)`.
pub fn contour_integral<F: Fn(Complex64) -> Complex64>(spec: &ContourSpec, f: F) -> Result<Complex64> {
    Ok(contour_integral_with_peak(spec, f)?.0)
}

/// As [`contour_integral`], also returning the largest `|f(z)(z − c)|` on
/// the nodes, the scale of the rounding error in the sum.
pub fn contour_integral_with_peak<F: Fn(Complex64) -> Complex64>(spec: &ContourSpec, f: F) -> Result<(Complex64, f64)> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut top: f64 = 0.0;
    for c in &spec.circles {
        let mut n = spec.node_count;
        let (mut est, mut peak) = partial_sum(c, n, 0, 1, &f);
        loop {
            if 2 * n > MAX_NODES {
                return Err(Error::Quadrature(format!("no agreement after {n} nodes on circle at {}", c.center)));
            }
            let (odd, p) = partial_sum(c, 2 * n, 1, 2, &f);
            peak = peak.max(p);
            let next = 0.5 * est + odd;
            let scale = next.norm().max(1e-4 * peak);
            let change = (next - est).norm();
            est = next;
            n *= 2;
            if change <= DOUBLING_TOL * scale {
                break;
            }
        }
        total += est;
        top = top.max(peak);
    }
    Ok((total, top))
}

/// The integral coefficient by quadrature on `contour`, which must enclose
/// exactly the poles `±σ_i, i ∈ S`.
pub fn integral_coefficient_quadrature(
    indices: &[usize],
    sigma: &[f64],
    nu: u32,
    gamma: usize,
    contour: &ContourSpec,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Argument("index sequence is empty".into()));
    }
    let lam: Vec<f64> = indices.iter().map(|&i| signed_value(sigma, i)).collect();
    let zpow = nu as i32 - gamma as i32 - 1;
    let f = |z: Complex64| {
        lam.iter().fold(z.powi(zpow), |acc, &l| acc * l / (z - l))
    };
    let (v, peak) = contour_integral_with_peak(contour, f)?;
    let scale = v.re.abs().max(1e-4 * peak).max(1e-300);
    if v.im.abs() > IMAG_TOL * scale {
        return Err(Error::Quadrature(format!("imaginary part {:e} against real part {:e}", v.im, v.re)));
    }
    Ok(v.re)
}
