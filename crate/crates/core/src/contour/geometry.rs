use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::residue::signed_value;
use crate::{Error, Result};

pub const DEFAULT_NODE_COUNT: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: f64,
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.center).abs() < self.radius
    }

    /// Distance from the real point `x` to the circle.
    pub fn distance(&self, x: f64) -> f64 {
        ((x - self.center).abs() - self.radius).abs()
    }

    /// Node `k` of `n` equally spaced nodes.
    pub fn node(&self, k: usize, n: usize) -> Complex64 {
        let t = std::f64::consts::TAU * k as f64 / n as f64;
        Complex64::new(self.center, 0.0) + Complex64::from_polar(self.radius, t)
    }
}

/// Union of disjoint circles traversed counter-clockwise, with the number of
/// trapezoid nodes used on each circle before any doubling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub circles: Vec<Circle>,
    pub node_count: usize,
    /// Smallest distance from the contour to any enclosed or excluded point
    /// it was built against; 0 for hand-built contours.
    pub clearance: f64,
}

impl ContourSpec {
    pub fn from_circles(circles: Vec<Circle>, node_count: usize) -> Result<ContourSpec> {
        if circles.is_empty() {
            return Err(Error::Contour("no circles".into()));
        }
        if node_count < 4 {
            return Err(Error::Contour("need at least 4 nodes per circle".into()));
        }
        if circles.iter().any(|c| !(c.radius > 0.0 && c.radius.is_finite() && c.center.is_finite())) {
            return Err(Error::Contour("circle radius must be positive and finite".into()));
        }
        Ok(ContourSpec { circles, node_count, clearance: 0.0 })
    }

    /// One circle per maximal run of `enclose` points that has no `exclude`
    /// point between its ends. Each circle spans its run plus half the gap to
    /// the nearest excluded point; construction fails if the resulting
    /// clearance is below `min_clearance`.
    pub fn around(enclose: &[f64], exclude: &[f64], min_clearance: f64, node_count: usize) -> Result<ContourSpec> {
        if enclose.is_empty() {
            return Err(Error::Contour("nothing to enclose".into()));
        }
        let mut pts: Vec<(f64, bool)> = enclose
            .iter()
            .map(|&x| (x, true))
            .chain(exclude.iter().map(|&x| (x, false)))
            .collect();
        if pts.iter().any(|p| !p.0.is_finite()) {
            return Err(Error::Contour("non-finite point".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut circles = Vec::new();
        let mut i = 0;
        while i < pts.len() {
            if !pts[i].1 {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < pts.len() && pts[j + 1].1 {
                j += 1;
            }
            let (lo, hi) = (pts[i].0, pts[j].0);
            let left = if i > 0 { lo - pts[i - 1].0 } else { f64::INFINITY };
            let right = if j + 1 < pts.len() { pts[j + 1].0 - hi } else { f64::INFINITY };
            let gap = left.min(right);
            if !(gap > 0.0) {
                return Err(Error::Contour(format!("enclosed point {lo} coincides with an excluded point")));
            }
            let gap = if gap.is_finite() { gap } else { (hi - lo).max(hi.abs()).max(1.0) };
            circles.push(Circle { center: 0.5 * (lo + hi), radius: 0.5 * (hi - lo) + 0.5 * gap });
            i = j + 1;
        }
        let clearance = pts
            .iter()
            .flat_map(|p| circles.iter().map(move |c| c.distance(p.0)))
            .fold(f64::INFINITY, f64::min);
        for p in &pts {
            let inside = circles.iter().filter(|c| c.contains(p.0)).count();
            if inside != usize::from(p.1) {
                return Err(Error::Contour(format!("point {} is enclosed {inside} times", p.0)));
            }
        }
        if clearance < min_clearance {
            return Err(Error::Contour(format!("clearance {clearance:e} below required {min_clearance:e}")));
        }
        let mut spec = ContourSpec::from_circles(circles, node_count)?;
        spec.clearance = clearance;
        Ok(spec)
    }

    /// Contour around `±σ_i, i ∈ S` excluding `±σ_j, j ∉ S` and 0, with
    /// clearance at least a quarter of the separation of the two sets.
    pub fn for_spectrum(sigma: &[f64], s: &[usize], node_count: usize) -> Result<ContourSpec> {
        let (enclose, exclude) = split_signed(sigma, s);
        let sep = separation(&enclose, &exclude);
        ContourSpec::around(&enclose, &exclude, sep / 4.0, node_count)
    }

    /// As [`ContourSpec::for_spectrum`], also enclosing `±σ̃_i, i ∈ S` and
    /// excluding every other `±σ̃_j`. The required clearance is a quarter of
    /// the separation in the unperturbed spectrum.
    pub fn for_perturbation(sigma: &[f64], sigma_tilde: &[f64], s: &[usize], node_count: usize) -> Result<ContourSpec> {
        let (mut enclose, mut exclude) = split_signed(sigma, s);
        let sep = separation(&enclose, &exclude);
        let (te, tx) = split_signed(sigma_tilde, s);
        enclose.extend(te);
        exclude.extend(tx);
        ContourSpec::around(&enclose, &exclude, sep / 4.0, node_count)
    }

    /// Contour for the coefficient integrand of `indices` alone: around its
    /// poles `λ_i, i mod r ∈ S`, excluding 0 and its remaining poles. Other
    /// eigenvalues are not singular points of the integrand, so the integral
    /// equals the one over [`ContourSpec::for_spectrum`], but the circles
    /// keep away from 0 wherever the index sequence allows. Falls back to
    /// [`ContourSpec::for_spectrum`] when no pole lies inside.
    pub fn for_integrand(indices: &[usize], sigma: &[f64], s: &[usize], node_count: usize) -> Result<ContourSpec> {
        let r = sigma.len();
        let mut enclose = Vec::new();
        let mut exclude = vec![0.0];
        for &i in indices {
            let lam = signed_value(sigma, i);
            let side = if s.contains(&(i % r)) { &mut enclose } else { &mut exclude };
            if !side.contains(&lam) {
                side.push(lam);
            }
        }
        if enclose.is_empty() {
            return ContourSpec::for_spectrum(sigma, s, node_count);
        }
        let sep = separation(&enclose, &exclude);
        ContourSpec::around(&enclose, &exclude, sep / 4.0, node_count)
    }
}

fn split_signed(sigma: &[f64], s: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut enclose = Vec::new();
    let mut exclude = vec![0.0];
    for (i, &x) in sigma.iter().enumerate() {
        let side = if s.contains(&i) { &mut enclose } else { &mut exclude };
        side.push(x);
        side.push(-x);
    }
    (enclose, exclude)
}

fn separation(enclose: &[f64], exclude: &[f64]) -> f64 {
    enclose
        .iter()
        .flat_map(|a| exclude.iter().map(move |b| (a - b).abs()))
        .fold(f64::INFINITY, f64::min)
}
