//! Gabor filter bank with isotropic Gaussian envelopes.
//!
//! Each filter is `g(x, y) = e(x) e(y) exp(i 2 pi f (x cos t + y sin t))` with
//! `e(u) = exp(-u^2 / 2 s^2)`, minus `k e(x) e(y)` where `k` makes the kernel
//! sum to zero. Both terms factor into a row kernel and a column kernel, so
//! filtering runs as two 1-D passes. Borders are extended by half-sample
//! symmetric reflection, which keeps a constant image constant and therefore
//! gives exactly zero response to it.

use num_complex::Complex64;

use super::Image;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborBankSpec {
    pub scales: usize,
    pub orientations: usize,
    /// Lowest centre frequency, cycles per pixel.
    pub f_min: f64,
    /// Highest centre frequency, cycles per pixel; at most 0.5.
    pub f_max: f64,
    /// Half-magnitude frequency bandwidth in octaves.
    pub bandwidth: f64,
}

impl Default for GaborBankSpec {
    fn default() -> Self {
        Self {
            scales: 4,
            orientations: 6,
            f_min: 0.05,
            f_max: 0.4,
            bandwidth: 1.0,
        }
    }
}

impl GaborBankSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidData(format!("gabor bank: {m}")));
        if self.scales == 0 || self.orientations == 0 {
            return bad("scales and orientations must be positive");
        }
        if !(self.f_min > 0.0 && self.f_min <= self.f_max) {
            return bad("need 0 < f_min <= f_max");
        }
        if self.f_max > 0.5 {
            return bad("f_max above the Nyquist frequency 0.5");
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad("bandwidth must be positive");
        }
        Ok(())
    }

    pub fn filter_count(&self) -> usize {
        self.scales * self.orientations
    }

    /// Log-spaced centre frequencies from `f_min` to `f_max`.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.scales == 1 {
            return vec![self.f_min];
        }
        let ratio = self.f_max / self.f_min;
        (0..self.scales)
            .map(|s| self.f_min * ratio.powf(s as f64 / (self.scales - 1) as f64))
            .collect()
    }

    /// Orientations `k pi / orientations`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.orientations)
            .map(|k| k as f64 * std::f64::consts::PI / self.orientations as f64)
            .collect()
    }

    /// Envelope width for a centre frequency so the half-magnitude response
    /// spans `bandwidth` octaves.
    pub fn sigma(&self, frequency: f64) -> f64 {
        let b = 2f64.powf(self.bandwidth);
        (std::f64::consts::LN_2 / 2.0).sqrt() / (std::f64::consts::PI * frequency) * (b + 1.0)
            / (b - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaborStat {
    Mean,
    Std,
    Median,
}

/// One filter as separable factors.
#[derive(Debug, Clone)]
struct Filter {
    /// Carrier-modulated kernel along x (columns).
    along_x: Vec<Complex64>,
    /// Carrier-modulated kernel along y (rows).
    along_y: Vec<Complex64>,
    /// Weight of the envelope term removed to cancel the DC response.
    dc: Complex64,
}

#[derive(Debug, Clone)]
struct Scale {
    envelope: Vec<f64>,
    filters: Vec<Filter>,
}

/// Precomputed kernels for a [`GaborBankSpec`].
#[derive(Debug, Clone)]
pub struct GaborBank {
    spec: GaborBankSpec,
    scales: Vec<Scale>,
}

impl GaborBank {
    pub fn new(spec: GaborBankSpec) -> Result<Self> {
        spec.validate()?;
        let angles = spec.angles();
        let scales = spec
            .frequencies()
            .into_iter()
            .map(|f| {
                let sigma = spec.sigma(f);
                let radius = (3.0 * sigma).ceil() as i64;
                let taps: Vec<f64> = (-radius..=radius).map(|t| t as f64).collect();
                let envelope: Vec<f64> = taps
                    .iter()
                    .map(|t| (-t * t / (2.0 * sigma * sigma)).exp())
                    .collect();
                let env_sum: f64 = envelope.iter().sum();
                let modulate = |freq: f64| -> Vec<Complex64> {
                    taps.iter()
                        .zip(&envelope)
                        .map(|(t, e)| {
                            Complex64::from_polar(*e, 2.0 * std::f64::consts::PI * freq * t)
                        })
                        .collect()
                };
                let filters = angles
                    .iter()
                    .map(|&theta| {
                        let along_x = modulate(f * theta.cos());
                        let along_y = modulate(f * theta.sin());
                        let sx: Complex64 = along_x.iter().sum();
                        let sy: Complex64 = along_y.iter().sum();
                        Filter {
                            dc: sx * sy / (env_sum * env_sum),
                            along_x,
                            along_y,
                        }
                    })
                    .collect();
                Scale { envelope, filters }
            })
            .collect();
        Ok(Self { spec, scales })
    }

    pub fn spec(&self) -> &GaborBankSpec {
        &self.spec
    }

    /// Magnitude maps, scale-major then orientation.
    pub fn magnitudes(&self, image: &Image) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.spec.filter_count());
        for scale in &self.scales {
            let smooth = separable_real(image, &scale.envelope);
            for f in &scale.filters {
                let resp = separable_complex(image, &f.along_x, &f.along_y);
                out.push(
                    resp.iter()
                        .zip(&smooth)
                        .map(|(r, s)| (r - f.dc * s).norm())
                        .collect(),
                );
            }
        }
        out
    }

    /// One statistic of each magnitude map.
    pub fn features(&self, image: &Image, stat: GaborStat) -> Vec<f64> {
        self.magnitudes(image)
            .into_iter()
            .map(|m| reduce(m, stat))
            .collect()
    }

    /// Mean and standard deviation vectors from a single filtering pass.
    pub fn mean_and_std(&self, image: &Image) -> (Vec<f64>, Vec<f64>) {
        self.magnitudes(image)
            .into_iter()
            .map(|m| {
                (
                    reduce(m.clone(), GaborStat::Mean),
                    reduce(m, GaborStat::Std),
                )
            })
            .unzip()
    }
}

pub fn gabor_features(image: &Image, spec: &GaborBankSpec, stat: GaborStat) -> Result<Vec<f64>> {
    Ok(GaborBank::new(*spec)?.features(image, stat))
}

fn reduce(mut values: Vec<f64>, stat: GaborStat) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    match stat {
        GaborStat::Mean => mean,
        GaborStat::Std => (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt(),
        GaborStat::Median => {
            values.sort_by(f64::total_cmp);
            let k = values.len();
            if k % 2 == 1 {
                values[k / 2]
            } else {
                0.5 * (values[k / 2 - 1] + values[k / 2])
            }
        }
    }
}

/// Half-sample symmetric reflection of `i` into `0..n`.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn separable_complex(
    image: &Image,
    along_x: &[Complex64],
    along_y: &[Complex64],
) -> Vec<Complex64> {
    let (w, h) = (image.width(), image.height());
    let rx = (along_x.len() / 2) as i64;
    let ry = (along_y.len() / 2) as i64;
    let px = image.pixels();

    let mut rows = vec![Complex64::new(0.0, 0.0); w * h];
    for r in 0..h {
        let line = &px[r * w..(r + 1) * w];
        for c in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, tap) in along_x.iter().enumerate() {
                let src = reflect(c as i64 - (k as i64 - rx), w);
                acc += tap * line[src];
            }
            rows[r * w + c] = acc;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for r in 0..h {
        for (k, tap) in along_y.iter().enumerate() {
            let src = reflect(r as i64 - (k as i64 - ry), h);
            let (dst, from) = (&mut out[r * w..(r + 1) * w], &rows[src * w..(src + 1) * w]);
            for (o, v) in dst.iter_mut().zip(from) {
                *o += tap * v;
            }
        }
    }
    out
}

fn separable_real(image: &Image, kernel: &[f64]) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    let rad = (kernel.len() / 2) as i64;
    let px = image.pixels();

    let mut rows = vec![0.0; w * h];
    for r in 0..h {
        let line = &px[r * w..(r + 1) * w];
        for c in 0..w {
            rows[r * w + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, tap)| tap * line[reflect(c as i64 - (k as i64 - rad), w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for (k, tap) in kernel.iter().enumerate() {
            let src = reflect(r as i64 - (k as i64 - rad), h);
            for c in 0..w {
                out[r * w + c] += tap * rows[src * w + c];
            }
        }
    }
    out
}
