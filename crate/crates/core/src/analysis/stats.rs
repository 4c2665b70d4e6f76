//! Small statistical helpers shared by the analysis routines.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn estimate(xs: impl IntoIterator<Item = f64>) -> Estimate {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let se = if n > 1 {
        (m2 / (n - 1) as f64 / n as f64).sqrt()
    } else {
        f64::NAN
    };
    Estimate { mean, se, n }
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Running sums for a least-squares line.
#[derive(Debug, Clone, Copy, Default)]
pub struct LineSums {
    pub n: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl LineSums {
    pub fn add(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.xy += x * y;
        self.yy += y * y;
    }

    pub fn fit(&self) -> LinearFit {
        let sxx = self.xx - self.x * self.x / self.n;
        let sxy = self.xy - self.x * self.y / self.n;
        let syy = self.yy - self.y * self.y / self.n;
        let slope = sxy / sxx;
        let r_squared = if syy > 0.0 {
            (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        LinearFit {
            slope,
            intercept: (self.y - slope * self.x) / self.n,
            r_squared,
            n: self.n as usize,
        }
    }
}

pub fn linear_fit(points: impl IntoIterator<Item = (f64, f64)>) -> LinearFit {
    let mut sums = LineSums::default();
    for (x, y) in points {
        sums.add(x, y);
    }
    sums.fit()
}

/// Kolmogorov–Smirnov distance between the sample and `N(0, variance)`.
pub fn ks_normal(sample: &[f64], variance: f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Sup distance between two empirical distribution functions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Sup distance of a sample in [0, 1) from the uniform law.
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - x).max(x - i as f64 / n);
    }
    d
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(m: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = m[0][0] + m[1][1];
    let disc = ((m[0][0] - m[1][1]).powi(2) / 4.0 + m[0][1] * m[1][0]).max(0.0).sqrt();
    [tr / 2.0 - disc, tr / 2.0 + disc]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::Rng;

    #[test]
    fn estimate_and_fit() {
        let e = estimate([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        let f = linear_fit((0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)));
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..20_000)
            .map(|_| normal.inverse_cdf(rng.random::<f64>()))
            .collect();
        assert!(ks_normal(&xs, 4.0) < 0.015);
        assert!(ks_normal(&xs, 1.0) > 0.1);
        let ys: Vec<f64> = xs.iter().map(|x| x + 100.0).collect();
        assert_eq!(ks_two_sample(&xs, &ys), 1.0);
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
        let us: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_uniform(&us) - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_eigen() {
        let ev = sym2_eigenvalues([[2.0, 1.0], [1.0, 2.0]]);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        let c = correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
        assert!((c + 1.0).abs() < 1e-12);
    }
}
