//! Two-sided Gaussian bounds for the heat kernel, fitted from exact fields.
//!
//! The fit has two stages: the on-diagonal exponent α from `log p̃_n(x₀, x₀)`
//! against `log n`, then `β` from `log p̃ + (α/2) log n ≈ a − β d²/n`. The
//! band `[c, C]` encloses every fitted point after removing the slope β.
//! Points are folded into running sums and per-field hulls, so nothing
//! proportional to the field size is kept.

use serde::Serialize;

use crate::graph::UNREACHED;
use crate::walk::HeatKernelField;

use super::stats::LineSums;
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitWindow {
    pub n_min: usize,
    pub n_max: usize,
    /// Points with `p̃` at or below this are ignored.
    pub p_floor: f64,
    pub leak_budget: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            n_min: 64,
            n_max: 4096,
            p_floor: 1e-30,
            leak_budget: crate::walk::DEFAULT_LEAK_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianFitResult {
    pub alpha_hat: f64,
    /// R² of the on-diagonal regression.
    pub alpha_r_squared: f64,
    pub beta: f64,
    pub c: f64,
    pub big_c: f64,
    pub band_ratio: f64,
    /// R² of the off-diagonal regression.
    pub r_squared: f64,
    pub window: FitWindow,
    /// Range of `d²/n` over fitted points.
    pub x_range: (f64, f64),
    pub n_range: (usize, usize),
    pub diagonal_points: usize,
    pub points: usize,
    pub fields: usize,
}

/// Upper or lower convex hull of points added in increasing x.
#[derive(Debug, Clone, Default)]
struct Hull {
    pts: Vec<(f64, f64)>,
}

impl Hull {
    fn push(&mut self, p: (f64, f64), upper: bool) {
        while self.pts.len() >= 2 {
            let (a, b) = (self.pts[self.pts.len() - 2], self.pts[self.pts.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if (upper && cross >= 0.0) || (!upper && cross <= 0.0) {
                self.pts.pop();
            } else {
                break;
            }
        }
        self.pts.push(p);
    }
}

/// Points of one `(x₀, n)` field, condensed.
#[derive(Debug, Clone)]
struct FieldSummary {
    log_n: f64,
    upper: Vec<(f64, f64)>,
    lower: Vec<(f64, f64)>,
}

/// Accumulates fields (or raw points) and produces the fit.
#[derive(Debug, Clone)]
pub struct GaussianFitter {
    window: FitWindow,
    diagonal: LineSums,
    // Sums over off-diagonal points of x = d²/n, L = log p̃, ℓ = log n.
    count: f64,
    sx: f64,
    sxx: f64,
    sl: f64,
    sll: f64,
    sxl: f64,
    sg: f64,
    sgg: f64,
    sxg: f64,
    slg: f64,
    x_range: (f64, f64),
    n_range: (usize, usize),
    summaries: Vec<FieldSummary>,
}

impl GaussianFitter {
    pub fn new(window: FitWindow) -> Self {
        GaussianFitter {
            window,
            diagonal: LineSums::default(),
            count: 0.0,
            sx: 0.0,
            sxx: 0.0,
            sl: 0.0,
            sll: 0.0,
            sxl: 0.0,
            sg: 0.0,
            sgg: 0.0,
            sxg: 0.0,
            slg: 0.0,
            x_range: (f64::INFINITY, f64::NEG_INFINITY),
            n_range: (usize::MAX, 0),
            summaries: Vec::new(),
        }
    }

    fn in_window(&self, n: usize) -> bool {
        n >= self.window.n_min && n <= self.window.n_max
    }

    /// Add a field; fields outside the step window are ignored.
    pub fn add_field(&mut self, field: &HeatKernelField) -> Result<(), AnalysisError> {
        if !self.in_window(field.n) {
            return Ok(());
        }
        if field.leaked_next > self.window.leak_budget {
            return Err(AnalysisError::LeakTainted {
                origin: field.origin,
                n: field.n,
                leaked: field.leaked_next,
            });
        }
        let points = field.support().filter_map(|v| {
            let d = field.distance[v];
            (d != UNREACHED).then(|| (d as f64, field.p_tilde(v)))
        });
        self.add_points(field.n, Some(field.p_tilde(field.origin)), points);
        Ok(())
    }

    /// Add the points `(d, p̃_n)` of one field at step `n`, with the
    /// on-diagonal value if available.
    pub fn add_points(
        &mut self,
        n: usize,
        diagonal: Option<f64>,
        points: impl IntoIterator<Item = (f64, f64)>,
    ) {
        if !self.in_window(n) {
            return;
        }
        let log_n = (n as f64).ln();
        if let Some(p) = diagonal.filter(|&p| p > self.window.p_floor) {
            self.diagonal.add(log_n, p.ln());
        }
        let mut pts: Vec<(f64, f64)> = points
            .into_iter()
            .filter(|&(d, p)| d <= n as f64 && p > self.window.p_floor)
            .map(|(d, p)| (d * d / n as f64, p.ln()))
            .collect();
        if pts.is_empty() {
            return;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (mut upper, mut lower) = (Hull::default(), Hull::default());
        for &(x, l) in &pts {
            self.count += 1.0;
            self.sx += x;
            self.sxx += x * x;
            self.sl += log_n;
            self.sll += log_n * log_n;
            self.sxl += x * log_n;
            self.sg += l;
            self.sgg += l * l;
            self.sxg += x * l;
            self.slg += log_n * l;
            upper.push((x, l), true);
            lower.push((x, l), false);
        }
        self.x_range.0 = self.x_range.0.min(pts[0].0);
        self.x_range.1 = self.x_range.1.max(pts[pts.len() - 1].0);
        self.n_range.0 = self.n_range.0.min(n);
        self.n_range.1 = self.n_range.1.max(n);
        self.summaries.push(FieldSummary {
            log_n,
            upper: upper.pts,
            lower: lower.pts,
        });
    }

    pub fn finish(&self) -> Result<GaussianFitResult, AnalysisError> {
        if self.diagonal.n < 2.0 || self.count < 3.0 {
            return Err(AnalysisError::WindowEmpty {
                n_min: self.window.n_min,
                n_max: self.window.n_max,
            });
        }
        let diag = self.diagonal.fit();
        let alpha = -2.0 * diag.slope;
        let h = alpha / 2.0;

        // u = L + h ℓ, regressed on x.
        let n = self.count;
        let su = self.sg + h * self.sl;
        let sxu = self.sxg + h * self.sxl;
        let suu = self.sgg + 2.0 * h * self.slg + h * h * self.sll;
        let sxx = self.sxx - self.sx * self.sx / n;
        let sxy = sxu - self.sx * su / n;
        let syy = suu - su * su / n;
        if sxx <= 0.0 {
            return Err(AnalysisError::WindowEmpty {
                n_min: self.window.n_min,
                n_max: self.window.n_max,
            });
        }
        let slope = sxy / sxx;
        let beta = -slope;
        let r_squared = if syy > 0.0 {
            (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
        } else {
            1.0
        };

        // Band of L + h ℓ + β x over all points.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.summaries {
            for &(x, l) in &s.upper {
                hi = hi.max(l + h * s.log_n + beta * x);
            }
            for &(x, l) in &s.lower {
                lo = lo.min(l + h * s.log_n + beta * x);
            }
        }
        let (c, big_c) = (lo.exp(), hi.exp());
        Ok(GaussianFitResult {
            alpha_hat: alpha,
            alpha_r_squared: diag.r_squared,
            beta,
            c,
            big_c,
            band_ratio: big_c / c,
            r_squared,
            window: self.window,
            x_range: self.x_range,
            n_range: self.n_range,
            diagonal_points: self.diagonal.n as usize,
            points: n as usize,
            fields: self.summaries.len(),
        })
    }
}

/// Fit all fields at once.
pub fn gaussian_fit(
    fields: &[HeatKernelField],
    window: FitWindow,
) -> Result<GaussianFitResult, AnalysisError> {
    let mut fitter = GaussianFitter::new(window);
    for f in fields {
        fitter.add_field(f)?;
    }
    fitter.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::square::SquareLattice;
    use crate::walk::{heat_kernel_evolve, DEFAULT_LEAK_BUDGET};

    #[test]
    fn planted_gaussian_is_recovered() {
        let sigma2 = 0.7;
        let mut fitter = GaussianFitter::new(FitWindow {
            n_max: 1 << 14,
            ..Default::default()
        });
        for k in 6..=14 {
            let n = 1usize << k;
            let p = |d: f64| (n as f64).recip() * (-d * d / (2.0 * sigma2 * n as f64)).exp();
            // A mild deterministic wobble keeps the problem from being exact.
            let pts = (0..=n.min(400)).map(|d| {
                let d = d as f64;
                (d, p(d) * (1.0 + 0.05 * (d * 0.37).sin()))
            });
            fitter.add_points(n, Some(p(0.0)), pts);
        }
        let fit = fitter.finish().unwrap();
        assert!((fit.alpha_hat - 2.0).abs() < 0.02);
        let beta = 1.0 / (2.0 * sigma2);
        assert!((fit.beta - beta).abs() < 0.01 * beta);
        assert!(fit.c <= fit.big_c && fit.band_ratio < 1.2);
        assert!(fit.r_squared > 0.99);
    }

    #[test]
    fn band_encloses_every_point() {
        let mut fitter = GaussianFitter::new(FitWindow::default());
        let data: Vec<(usize, Vec<(f64, f64)>)> = vec![
            (64, vec![(0.0, 0.02), (3.0, 0.01), (8.0, 1e-3), (20.0, 1e-6)]),
            (128, vec![(0.0, 0.008), (5.0, 0.004), (11.0, 1e-4), (30.0, 1e-7)]),
        ];
        for (n, pts) in &data {
            fitter.add_points(*n, Some(pts[0].1), pts.iter().copied());
        }
        let fit = fitter.finish().unwrap();
        for (n, pts) in &data {
            for &(d, p) in pts {
                let v = p.ln() + fit.alpha_hat / 2.0 * (*n as f64).ln() + fit.beta * d * d / *n as f64;
                assert!(v >= fit.c.ln() - 1e-9 && v <= fit.big_c.ln() + 1e-9);
            }
        }
    }

    #[test]
    fn square_lattice_alpha() {
        let sq = SquareLattice::new(170);
        let ns = [64, 128, 256, 512, 1024];
        let fields = heat_kernel_evolve(&sq, sq.origin(), &ns, DEFAULT_LEAK_BUDGET).unwrap();
        let fit = gaussian_fit(&fields, FitWindow::default()).unwrap();
        assert!((fit.alpha_hat - 2.0).abs() <= 0.05, "alpha = {}", fit.alpha_hat);
    }

    #[test]
    fn empty_window_and_tainted_fields() {
        let fitter = GaussianFitter::new(FitWindow::default());
        assert!(matches!(fitter.finish(), Err(AnalysisError::WindowEmpty { .. })));
        let sq = SquareLattice::new(30);
        let f = heat_kernel_evolve(&sq, sq.origin(), &[64], 1.0).unwrap();
        let err = gaussian_fit(&f, FitWindow::default()).unwrap_err();
        assert!(matches!(err, AnalysisError::LeakTainted { .. }));
    }
}
