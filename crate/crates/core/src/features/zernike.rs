//! Zernike moment magnitudes.
//!
//! Coordinates are taken relative to the intensity centroid and divided by the
//! radius of the disk inscribed in the image, so the unit disk has that radius
//! around the centroid. Pixels straddling the unit circle are weighted by the
//! fraction of their area inside it.

use num_complex::Complex64;

use super::Image;

/// Sub-pixel grid used to estimate the in-disk area of boundary pixels.
const EDGE_SUBSAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZernikeSpec {
    pub max_order: usize,
}

impl Default for ZernikeSpec {
    fn default() -> Self {
        Self { max_order: 10 }
    }
}

impl ZernikeSpec {
    pub fn feature_count(&self) -> usize {
        zernike_indices(self.max_order).len()
    }
}

/// `(n, m)` with `0 <= m <= n <= max_order` and `n - m` even, lexicographic.
pub fn zernike_indices(max_order: usize) -> Vec<(usize, usize)> {
    (0..=max_order)
        .flat_map(|n| {
            (0..=n)
                .filter(move |m| (n - m) % 2 == 0)
                .map(move |m| (n, m))
        })
        .collect()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Coefficients of `R_nm(rho)` as `(power, coefficient)` pairs.
fn radial_terms(n: usize, m: usize) -> Vec<(usize, f64)> {
    (0..=(n - m) / 2)
        .map(|s| {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign * factorial(n - s)
                / (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s));
            (n - 2 * s, c)
        })
        .collect()
}

/// Fraction of the unit square at `(x0, y0)` (normalized units, side `step`)
/// lying inside the unit disk.
fn disk_fraction(x0: f64, y0: f64, step: f64) -> f64 {
    let (x1, y1) = (x0 + step, y0 + step);
    let far_x = x0.abs().max(x1.abs());
    let far_y = y0.abs().max(y1.abs());
    if far_x * far_x + far_y * far_y <= 1.0 {
        return 1.0;
    }
    let near_x = if x0 <= 0.0 && x1 >= 0.0 {
        0.0
    } else {
        x0.abs().min(x1.abs())
    };
    let near_y = if y0 <= 0.0 && y1 >= 0.0 {
        0.0
    } else {
        y0.abs().min(y1.abs())
    };
    if near_x * near_x + near_y * near_y >= 1.0 {
        return 0.0;
    }
    let k = EDGE_SUBSAMPLES;
    let h = step / k as f64;
    let mut inside = 0;
    for a in 0..k {
        for b in 0..k {
            let x = x0 + (a as f64 + 0.5) * h;
            let y = y0 + (b as f64 + 0.5) * h;
            if x * x + y * y <= 1.0 {
                inside += 1;
            }
        }
    }
    inside as f64 / (k * k) as f64
}

/// `|Z_nm|` for every index of [`zernike_indices`]. An all-zero image yields
/// all-zero moments.
pub fn zernike_features(image: &Image, spec: &ZernikeSpec) -> Vec<f64> {
    let indices = zernike_indices(spec.max_order);
    let (w, h) = (image.width(), image.height());
    let px = image.pixels();

    let mass: f64 = px.iter().sum();
    if mass == 0.0 {
        return vec![0.0; indices.len()];
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = px[r * w + c];
            cx += v * (c as f64 + 0.5);
            cy += v * (r as f64 + 0.5);
        }
    }
    cx /= mass;
    cy /= mass;

    let radius = w.min(h) as f64 / 2.0;
    let step = 1.0 / radius;
    let area = step * step;
    let terms: Vec<Vec<(usize, f64)>> = indices.iter().map(|&(n, m)| radial_terms(n, m)).collect();
    let mut moments = vec![Complex64::new(0.0, 0.0); indices.len()];
    let mut powers = vec![0.0; spec.max_order + 1];
    let mut phases = vec![Complex64::new(1.0, 0.0); spec.max_order + 1];

    for r in 0..h {
        for c in 0..w {
            let v = px[r * w + c];
            if v == 0.0 {
                continue;
            }
            let x0 = (c as f64 - cx) * step;
            let y0 = (r as f64 - cy) * step;
            let weight = disk_fraction(x0, y0, step);
            if weight == 0.0 {
                continue;
            }
            let x = x0 + 0.5 * step;
            let y = y0 + 0.5 * step;
            let rho = (x * x + y * y).sqrt();
            // e^{-i theta} = (x - iy) / rho; at the origin only m = 0 survives
            let unit = if rho > 0.0 {
                Complex64::new(x / rho, -y / rho)
            } else {
                Complex64::new(0.0, 0.0)
            };
            powers[0] = 1.0;
            phases[0] = Complex64::new(1.0, 0.0);
            for k in 1..=spec.max_order {
                powers[k] = powers[k - 1] * rho;
                phases[k] = phases[k - 1] * unit;
            }
            let mass = v * weight * area;
            for ((&(_, m), t), z) in indices.iter().zip(&terms).zip(moments.iter_mut()) {
                let radial: f64 = t.iter().map(|&(p, coef)| coef * powers[p]).sum();
                *z += phases[m] * (mass * radial);
            }
        }
    }
    indices
        .iter()
        .zip(moments)
        .map(|(&(n, _), z)| (n as f64 + 1.0) / std::f64::consts::PI * z.norm())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_six_moments_at_order_ten() {
        assert_eq!(ZernikeSpec::default().feature_count(), 36);
        let idx = zernike_indices(10);
        assert_eq!(idx[0], (0, 0));
        assert_eq!(idx[1], (1, 1));
        assert_eq!(idx[2], (2, 0));
        assert_eq!(*idx.last().unwrap(), (10, 10));
    }

    #[test]
    fn radial_polynomials() {
        // R_20 = 2 rho^2 - 1, R_40 = 6 rho^4 - 6 rho^2 + 1, R_31 = 3 rho^3 - 2 rho
        assert_eq!(radial_terms(2, 0), vec![(2, 2.0), (0, -1.0)]);
        assert_eq!(radial_terms(4, 0), vec![(4, 6.0), (2, -6.0), (0, 1.0)]);
        assert_eq!(radial_terms(3, 1), vec![(3, 3.0), (1, -2.0)]);
        assert_eq!(radial_terms(5, 5), vec![(5, 1.0)]);
    }

    #[test]
    fn blank_image() {
        let im = Image::from_fn(28, 28, |_, _| 0.0);
        assert!(zernike_features(&im, &ZernikeSpec::default())
            .iter()
            .all(|&z| z == 0.0));
    }

    #[test]
    fn disk_fraction_extremes() {
        assert_eq!(disk_fraction(-0.05, -0.05, 0.1), 1.0);
        assert_eq!(disk_fraction(2.0, 2.0, 0.1), 0.0);
        let f = disk_fraction(0.95, -0.05, 0.1);
        assert!(f > 0.0 && f < 1.0);
    }
}
