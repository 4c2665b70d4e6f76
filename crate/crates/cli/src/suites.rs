//! The checks behind each command, as plain functions over loaded data.

use quasiwalk_core::analysis::stats::sym2_eigenvalues;
use quasiwalk_core::analysis::{
    band_factor, cone_scan, drift_and_covariance, gaussian_fit, gaussianity_report, msd_curve, poincare_table,
    site_diffusion, tile_frequencies, volume_doubling, volume_growth, AnalysisError, Annulus, EigenOptions,
    FitWindow, GaussianFitter, MIN_FREQUENCY_RADIUS,
};
use quasiwalk_core::isometry::{bilipschitz_stats, diagonal_cover, epsilon_constant, max_diagonal, rough_isometry_check};
use quasiwalk_core::lattice::is_connected_within;
use quasiwalk_core::pentagrid::{check_patch, INTERIOR_MARGIN};
use quasiwalk_core::walk::{dyadic_checkpoints, heat_kernel_evolve, patch_margin};
use quasiwalk_core::{
    DisplacementEnsemble, HeatKernelField, IsometryConfig, IsometryReport, PenroseLattice, SquareLattice,
    Thresholds, TilingPatch, WalkError, WalkGraph,
};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{KernelSettings, RunConfig, VerifySettings};
use crate::error::CliError;
use crate::output::{Check, Outcome};

pub fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Lattice(_) | AnalysisError::PatchTooSmall { .. } | AnalysisError::InvalidArgument(_) => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Failed(e.to_string()),
    }
}

pub fn walk_error(e: WalkError) -> CliError {
    match e {
        WalkError::LeakBudgetExceeded { .. } | WalkError::EscapeBudgetExceeded { .. } => {
            CliError::Failed(e.to_string())
        }
        _ => CliError::Usage(e.to_string()),
    }
}

pub fn geometry(patch: &TilingPatch, lat: &PenroseLattice, t: &Thresholds, spacing: f64) -> Outcome {
    let g = check_patch(patch, spacing);
    let mut out = Outcome::default();
    out.push(Check::new(
        "edge_length",
        g.max_edge_error <= t.geometry_tolerance && g.stray_directions == 0,
        json!({ "max_error": g.max_edge_error, "stray_directions": g.stray_directions }),
        t.geometry_tolerance,
    ));
    out.push(Check::new("tile_area", g.max_area_error <= t.geometry_tolerance, g.max_area_error, t.geometry_tolerance));
    out.push(Check::new(
        "shared_edges",
        g.bad_interior_edges == 0,
        json!({ "interior_edges": g.interior_edges, "bad": g.bad_interior_edges }),
        0,
    ));
    let inner = patch.radius - INTERIOR_MARGIN;
    let (mut interior, mut bad_degree) = (0usize, 0usize);
    for (v, c) in lat.centers().iter().enumerate() {
        if c[0].hypot(c[1]) < inner {
            interior += 1;
            if lat.degree(v) != 4 {
                bad_degree += 1;
            }
        }
    }
    out.push(Check::new(
        "interior_degree",
        bad_degree == 0,
        json!({ "interior_tiles": interior, "not_degree_4": bad_degree }),
        0,
    ));
    let covered = g.coverage.covered_fraction();
    out.push(Check::new("coverage", covered >= t.min_coverage, covered, t.min_coverage));
    out.push(Check::new("connected", is_connected_within(lat, inner), is_connected_within(lat, inner), true));
    out.put("geometry", &g);
    out.put("lattice", lat.summary());
    out
}

pub fn frequencies(patch: &TilingPatch, t: &Thresholds) -> Outcome {
    let mut out = Outcome::default();
    if patch.radius < MIN_FREQUENCY_RADIUS {
        let why = format!("patch radius {} below {MIN_FREQUENCY_RADIUS}", patch.radius);
        for name in ["thick_thin_ratio", "pair_frequencies", "residual_discrepancy"] {
            out.push(Check::skip(name, &why));
        }
        return out;
    }
    let f = tile_frequencies(patch).expect("radius checked");
    let tau = quasiwalk_core::pentagrid::TAU;
    out.push(Check::new(
        "thick_thin_ratio",
        (f.thick_thin_ratio - tau).abs() <= t.thick_thin_tolerance,
        f.thick_thin_ratio,
        json!({ "target": tau, "tolerance": t.thick_thin_tolerance }),
    ));
    out.push(Check::new(
        "pair_frequencies",
        f.max_within_class_deviation <= t.pair_frequency_tolerance,
        f.max_within_class_deviation,
        t.pair_frequency_tolerance,
    ));
    out.push(Check::new(
        "residual_discrepancy",
        f.max_residual_discrepancy <= t.residual_discrepancy,
        f.max_residual_discrepancy,
        t.residual_discrepancy,
    ));
    out.put("frequencies", &f);
    out
}

pub fn isometry(
    lat: &PenroseLattice,
    s: &VerifySettings,
    seed: u64,
    t: &Thresholds,
) -> Result<(Outcome, IsometryReport), CliError> {
    let (_, eps) = epsilon_constant();
    let cfg = IsometryConfig {
        pairs: s.pairs,
        seed,
        ..Default::default()
    };
    let r = rough_isometry_check(lat, eps, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = Outcome::default();
    out.push(Check::new("psi_injective", r.injective, r.collisions.len(), 0));
    out.push(Check::new("lower_bound", r.lower_violations == 0, r.lower_violations, 0));
    out.push(Check::new(
        "upper_bound",
        r.upper_violations == 0,
        json!({ "violations": r.upper_violations, "two_l": r.two_l }),
        json!({ "violations": 0, "diagonal_cover": diagonal_cover(eps) }),
    ));
    out.push(Check::new("fullness", r.r2_m < u64::MAX, r.r2_m, "finite"));
    match bilipschitz_stats(&r.samples, s.bilipschitz_min_distance, t.bilipschitz_spread) {
        Ok(b) => {
            out.push(Check::new("bilipschitz_spread", b.pass, b.spread, t.bilipschitz_spread));
            out.put("bilipschitz", &b);
        }
        Err(e) => out.push(Check::skip("bilipschitz_spread", e)),
    }
    out.put("isometry", &r);
    Ok((out, r))
}

/// `count` interior tiles whose balls of graph radius `reach` stay inside
/// the patch, drawn without replacement.
pub fn ball_centers(lat: &PenroseLattice, count: usize, reach: u32, seed: u64) -> Result<Vec<usize>, CliError> {
    let room = lat.radius() - INTERIOR_MARGIN - max_diagonal() * reach as f64;
    let pool = if room > 0.0 { lat.interior_within(room) } else { Vec::new() };
    if pool.len() < count {
        return Err(CliError::Usage(format!(
            "patch too small: radius {} leaves {} tiles for {count} centers with balls of radius {reach}",
            lat.radius(),
            pool.len()
        )));
    }
    let mut rng = quasiwalk_core::walk::sample_rng(seed, u64::MAX);
    let mut picked: Vec<usize> = sample(&mut rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

pub fn volume_and_poincare(
    lat: &PenroseLattice,
    s: &VerifySettings,
    seed: u64,
    t: &Thresholds,
) -> Result<Outcome, CliError> {
    let r_max = s.radii.iter().copied().max().unwrap_or(1);
    let reach = (2 * r_max).max(s.growth_radii.1);
    let xs = ball_centers(lat, s.centers, reach, seed)?;
    let mut out = Outcome::default();

    let vd = volume_doubling(lat, &xs, &s.radii).map_err(analysis_error)?;
    out.push(Check::new("volume_doubling", vd.c_vd <= t.max_doubling_ratio, vd.c_vd, t.max_doubling_ratio));
    let rs: Vec<u32> = (s.growth_radii.0..=s.growth_radii.1).collect();
    let growth = volume_growth(lat, &xs, &rs).map_err(analysis_error)?;
    out.push(Check::new(
        "volume_growth",
        growth.slope >= t.alpha_range.0 && growth.slope <= t.alpha_range.1,
        growth.slope,
        t.alpha_range,
    ));

    let opts = EigenOptions::default();
    let pi_radii: Vec<u32> = s.radii.iter().copied().filter(|&r| r >= 4).collect();
    let table = poincare_table(lat, &xs, &pi_radii, &opts).map_err(analysis_error)?;
    let band = band_factor(table.iter().map(|g| g.c_pi));
    out.push(Check::new("poincare_band", band <= t.poincare_band, band, t.poincare_band));
    let sq = SquareLattice::new(r_max as usize + 6);
    let square = poincare_table(&sq, &[sq.origin()], &pi_radii, &opts).map_err(analysis_error)?;
    let mut worst = 1.0f64;
    for g in &table {
        let z = square.iter().find(|z| z.r == g.r).expect("same radii");
        let q = g.c_pi / z.c_pi;
        worst = worst.max(q.max(1.0 / q));
    }
    out.push(Check::new("poincare_vs_square", worst <= t.poincare_vs_square, worst, t.poincare_vs_square));
    out.put("centers", &xs);
    out.put("volume_doubling", &vd);
    out.put("volume_growth", growth);
    out.put("poincare", &table);
    out.put("poincare_square", &square);
    Ok(out)
}

/// μ-average of the exact one-step covariance over the interior tiles.
pub fn one_step_isotropy(lat: &PenroseLattice, t: &Thresholds) -> Outcome {
    let interior = lat.interior_vertices();
    let mut d = [[0.0; 2]; 2];
    for &x in &interior {
        let s = site_diffusion(lat, x);
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] += s[i][j];
            }
        }
    }
    let k = interior.len().max(1) as f64;
    let d = d.map(|row| row.map(|v| v / k));
    let ev = sym2_eigenvalues(d);
    let ratio = ev[0] / ev[1];
    let mut out = Outcome::default();
    out.push(Check::new(
        "one_step_isotropy",
        ratio >= 1.0 - t.isotropy_tolerance,
        ratio,
        json!({ "min_ratio": 1.0 - t.isotropy_tolerance }),
    ));
    out.put("one_step_covariance", json!({ "matrix": d, "eigenvalues": ev, "tiles": interior.len() }));
    out
}

pub fn verify(patch: &TilingPatch, lat: &PenroseLattice, cfg: &RunConfig) -> Result<(Outcome, IsometryReport), CliError> {
    let t = &cfg.thresholds;
    let mut out = geometry(patch, lat, t, cfg.verify.coverage_spacing);
    out.extend(frequencies(patch, t));
    let (iso, report) = isometry(lat, &cfg.verify, cfg.seed, t)?;
    out.extend(iso);
    out.extend(volume_and_poincare(lat, &cfg.verify, cfg.seed, t)?);
    out.extend(one_step_isotropy(lat, t));
    Ok((out, report))
}

/// Origins for the heat-kernel suite.
pub fn kernel_origins(lat: &PenroseLattice, s: &KernelSettings) -> Result<Vec<usize>, CliError> {
    let origins: Vec<usize> = lat
        .interior_within(s.origin_radius)
        .into_iter()
        .step_by(s.origin_stride.max(1))
        .take(s.origins)
        .collect();
    if origins.len() < s.origins {
        return Err(CliError::Usage(format!(
            "only {} origins within radius {} at stride {}",
            origins.len(),
            s.origin_radius,
            s.origin_stride
        )));
    }
    Ok(origins)
}

/// Dyadic steps from `n_min` to `n`.
pub fn kernel_steps(n_min: usize, n: usize) -> Vec<usize> {
    dyadic_checkpoints(n).into_iter().filter(|&m| m >= n_min).collect()
}

pub struct KernelRun {
    pub outcome: Outcome,
    /// Fields of the first origin, at every retained step.
    pub first: Vec<HeatKernelField>,
    /// `(origin, n, p̃_n(x₀, x₀))` for every origin and step.
    pub diagonal: Vec<(usize, usize, f64)>,
}

/// Heat kernels from every origin, the Gaussian fit, the ℤ² reference fit
/// and the cone scan.
pub fn kernel(lat: &PenroseLattice, s: &KernelSettings, n: usize, t: &Thresholds) -> Result<KernelRun, CliError> {
    let origins = kernel_origins(lat, s)?;
    let steps = kernel_steps(s.n_min, n);
    if steps.len() < 2 {
        return Err(CliError::Usage(format!("need at least two dyadic steps in [{}, {n}]", s.n_min)));
    }
    let cone_n = s.cone_n.min(n);
    let mut retain = steps.clone();
    if !retain.contains(&cone_n) {
        retain.push(cone_n);
        retain.sort_unstable();
    }
    let window = FitWindow {
        n_min: s.n_min,
        n_max: n,
        leak_budget: s.leak_budget,
        ..Default::default()
    };
    let annulus = Annulus {
        c1: s.annulus.0,
        c2: s.annulus.1,
    };

    let mut fitter = GaussianFitter::new(window);
    let mut first = Vec::new();
    let mut diagonal = Vec::new();
    let mut cones = Vec::new();
    // Origins run in parallel a batch at a time; fields are folded in origin
    // order so sums do not depend on the worker count.
    let batch = rayon::current_num_threads().max(1);
    for chunk in origins.chunks(batch) {
        let results: Vec<Result<Vec<HeatKernelField>, WalkError>> = chunk
            .par_iter()
            .map(|&o| heat_kernel_evolve(lat, o, &retain, s.leak_budget))
            .collect();
        for fields in results {
            let fields = fields.map_err(walk_error)?;
            for f in &fields {
                if steps.contains(&f.n) {
                    fitter.add_field(f).map_err(analysis_error)?;
                    diagonal.push((f.origin, f.n, f.p_tilde(f.origin)));
                }
            }
            let at = fields.iter().find(|f| f.n == cone_n).expect("retained");
            cones.push(cone_scan(at, lat, s.directions, s.cone_alpha, &annulus).map_err(analysis_error)?);
            if first.is_empty() {
                first = fields;
            }
        }
    }
    let fit = fitter.finish().map_err(analysis_error)?;

    let mut out = Outcome::default();
    out.push(Check::new(
        "alpha",
        fit.alpha_hat >= t.alpha_range.0 && fit.alpha_hat <= t.alpha_range.1,
        fit.alpha_hat,
        t.alpha_range,
    ));
    out.push(Check::new(
        "gaussian_r_squared",
        fit.r_squared >= t.min_gaussian_r_squared,
        fit.r_squared,
        t.min_gaussian_r_squared,
    ));
    out.push(Check::new(
        "gaussian_band",
        fit.band_ratio.is_finite() && fit.c > 0.0,
        json!({ "c": fit.c, "C": fit.big_c, "ratio": fit.band_ratio }),
        "finite",
    ));

    let sq = SquareLattice::new((6.0 * (n as f64).sqrt()).ceil() as usize + 10);
    let sq_fields = heat_kernel_evolve(&sq, sq.origin(), &steps, s.leak_budget).map_err(walk_error)?;
    let sq_fit = gaussian_fit(&sq_fields, window).map_err(analysis_error)?;
    out.push(Check::new(
        "square_alpha",
        (sq_fit.alpha_hat - 2.0).abs() <= t.square_alpha_tolerance,
        sq_fit.alpha_hat,
        json!({ "target": 2.0, "tolerance": t.square_alpha_tolerance }),
    ));

    let worst = cones.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
    let positive = cones.iter().all(|c| c.min > 0.0);
    out.push(Check::new(
        "cone",
        positive && worst >= t.min_cone_fraction,
        json!({ "min_ratio": worst, "all_positive": positive, "n": cone_n }),
        t.min_cone_fraction,
    ));
    out.put("origins", &origins);
    out.put("steps", &steps);
    out.put("gaussian_fit", &fit);
    out.put("square_fit", &sq_fit);
    out.put("cone", &cones);
    Ok(KernelRun {
        outcome: out,
        first,
        diagonal,
    })
}

/// Start pool for the walk: interior tiles within `radius`, all of which
/// must clear the escape margin for `n_max`.
pub fn start_pool(lat: &PenroseLattice, radius: f64, n_max: usize) -> Result<Vec<usize>, CliError> {
    let need = radius + patch_margin(n_max) + INTERIOR_MARGIN;
    if lat.radius() < need {
        return Err(CliError::Usage(format!(
            "patch too small: radius {} but starts within {radius} need radius {need:.1} for n = {n_max}",
            lat.radius()
        )));
    }
    Ok(lat.interior_within(radius))
}

pub fn clt<G: WalkGraph + ?Sized>(ens: &DisplacementEnsemble, graph: &G, cfg: &RunConfig) -> Outcome {
    let t = &cfg.thresholds;
    let s = &cfg.clt;
    let mut out = Outcome::default();
    let keep = cfg.report_checkpoints();
    let msd: Vec<_> = msd_curve(ens).into_iter().filter(|r| keep.contains(&r.n)).collect();
    let n = s.n;

    match drift_and_covariance(ens, graph, n, t.min_distinct_starts) {
        Ok(dc) => {
            let k = t.drift_standard_errors;
            let within = |e: &quasiwalk_core::analysis::stats::Estimate| e.mean.abs() <= k * e.se;
            out.push(Check::new(
                "drift",
                within(&dc.drift_x) && within(&dc.drift_y),
                json!({ "x": dc.drift_x, "y": dc.drift_y }),
                json!({ "standard_errors": k }),
            ));
            let l = &dc.limit;
            out.push(Check::new(
                "isotropy",
                l.isotropy_ratio >= 1.0 - t.isotropy_tolerance && l.isotropy_ratio <= 1.0 + t.isotropy_tolerance,
                l.isotropy_ratio,
                [1.0 - t.isotropy_tolerance, 1.0 + t.isotropy_tolerance],
            ));
            out.push(Check::new(
                "correlation",
                l.correlation.abs() <= t.max_correlation,
                l.correlation,
                t.max_correlation,
            ));
            let margin = l.eigenvalues[0] / l.min_eigenvalue_se;
            out.push(Check::new(
                "non_degeneracy",
                l.eigenvalues[0] > 0.0 && margin >= t.min_eigenvalue_standard_errors,
                json!({ "min_eigenvalue": l.eigenvalues[0], "standard_errors": margin }),
                t.min_eigenvalue_standard_errors,
            ));
            out.put("drift_covariance", &dc);
        }
        Err(e) => {
            for name in ["drift", "isotropy", "correlation", "non_degeneracy"] {
                out.push(Check::skip(name, &e));
            }
        }
    }

    let plateau = ens.checkpoint_index(n).zip(ens.checkpoint_index(2 * n));
    let all_msd = msd_curve(ens);
    match plateau {
        Some((a, b)) => {
            let change = all_msd[b].euclid.mean / all_msd[a].euclid.mean - 1.0;
            out.push(Check::new("msd_plateau", change.abs() <= t.msd_plateau, change, t.msd_plateau));
        }
        None => out.push(Check::skip("msd_plateau", format!("no checkpoints {n} and {}", 2 * n))),
    }

    let collapse: Vec<usize> = s
        .collapse
        .iter()
        .copied()
        .filter(|&m| ens.checkpoint_index(m).is_some())
        .collect();
    match gaussianity_report(ens, &collapse, s.min_samples) {
        Ok(g) => {
            match g.ks.iter().find(|r| r.n == n) {
                Some(r) => out.push(Check::new("ks", r.ks[0].max(r.ks[1]) <= t.max_ks, r.ks, t.max_ks)),
                None => out.push(Check::skip("ks", format!("no checkpoint {n}"))),
            }
            let judged: Vec<_> = g.increments.iter().filter(|i| i.mid >= s.min_increment_block).collect();
            if judged.is_empty() {
                out.push(Check::skip("increments", format!("no blocks of length {}", s.min_increment_block)));
            } else {
                let worst = judged
                    .iter()
                    .map(|i| i.rho[0].abs().max(i.rho[1].abs()) * (i.samples as f64).sqrt())
                    .fold(0.0, f64::max);
                out.push(Check::new(
                    "increments",
                    worst <= t.increment_correlation_scale,
                    json!({ "max_abs_rho_sqrt_n": worst }),
                    t.increment_correlation_scale,
                ));
            }
            if collapse.len() >= 2 {
                let c = g.collapse[0].max(g.collapse[1]);
                out.push(Check::new("collapse", c <= t.max_collapse, g.collapse, t.max_collapse));
            } else {
                out.push(Check::skip("collapse", "fewer than two collapse checkpoints"));
            }
            let ks: Vec<_> = g.ks.iter().filter(|r| keep.contains(&r.n)).collect();
            out.put("ks", &ks);
            out.put("increments", &g.increments);
            out.put("collapse", json!({ "ns": g.collapse_ns, "distance": g.collapse }));
        }
        Err(e) => {
            for name in ["ks", "increments", "collapse"] {
                out.push(Check::skip(name, &e));
            }
        }
    }
    out.put("msd", &msd);
    out
}
