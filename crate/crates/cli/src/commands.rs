//! One function per subcommand. Each returns the checks it ran; the caller
//! turns failures into exit code 1.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use quasiwalk_core::isometry::write_pairs_csv;
use quasiwalk_core::pentagrid::{read_patch, write_patch, PatchFormat, PatchIoError, TileKind};
use quasiwalk_core::render::{chart_svg, patch_svg, Chart, Series, SvgStyle};
use quasiwalk_core::walk::{read_ensemble, simulate_ensemble, write_ensemble, write_kernel_csv};
use quasiwalk_core::{build_dual, generate_patch, make_grid_params, EnsembleConfig, PenroseLattice, Starts, TilingPatch};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{create, read_json, write_json, Check, Csv, Outcome, Status};
use crate::suites;

/// Mean tile area `(τ sin 72° + sin 36°)/(τ + 1)`.
const MEAN_TILE_AREA: f64 = 0.812_299_240_582_266;

pub fn generate_from(cfg: &RunConfig) -> Result<TilingPatch, CliError> {
    let params = make_grid_params(cfg.offsets).map_err(|e| CliError::Usage(e.to_string()))?;
    generate_patch(cfg.radius, &params).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn load_patch(path: &Path) -> Result<TilingPatch, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_patch(BufReader::new(file))
        .map(|(p, _)| p)
        .map_err(|e| match e {
            PatchIoError::Io(source) => CliError::io(path, source),
            other => CliError::Usage(format!("{}: {other}", path.display())),
        })
}

/// The patch named on the command line, or a fresh one from the config.
pub fn patch_or_generate(path: Option<&Path>, cfg: &RunConfig) -> Result<TilingPatch, CliError> {
    match path {
        Some(p) => load_patch(p),
        None => generate_from(cfg),
    }
}

pub fn lattice(patch: &TilingPatch) -> Result<PenroseLattice, CliError> {
    build_dual(patch).map_err(|e| CliError::Usage(e.to_string()))
}

fn format_for(path: &Path) -> PatchFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => PatchFormat::Json,
        _ => PatchFormat::Binary,
    }
}

/// `patch.bin` → `patch.summary.json`.
pub fn summary_path(patch: &Path) -> PathBuf {
    let stem = patch.file_stem().and_then(|s| s.to_str()).unwrap_or("patch");
    patch.with_file_name(format!("{stem}.summary.json"))
}

pub fn generate(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let patch = generate_from(cfg)?;
    let meta = cfg.meta("generate");
    let mut w = create(out)?;
    write_patch(&patch, format_for(out), Some(&meta), &mut w).map_err(|e| match e {
        PatchIoError::Io(source) => CliError::io(out, source),
        other => CliError::Usage(other.to_string()),
    })?;

    let mut pairs = serde_json::Map::new();
    for t in &patch.tiles {
        let key = format!("{}{}", t.families.0, t.families.1);
        let n = pairs.get(&key).and_then(Value::as_u64).unwrap_or(0);
        pairs.insert(key, json!(n + 1));
    }
    let expected = std::f64::consts::PI * patch.radius * patch.radius / MEAN_TILE_AREA;
    let mut outcome = Outcome::default();
    outcome.put("radius", patch.radius);
    outcome.put("offsets", patch.params.offsets());
    outcome.put("tiles", patch.len());
    outcome.put("expected_tiles", expected);
    outcome.put("thick", patch.count_kind(TileKind::Thick));
    outcome.put("thin", patch.count_kind(TileKind::Thin));
    outcome.put("pairs", pairs);
    outcome.put("lattice", lattice(&patch)?.summary());
    write_json(&summary_path(out), &outcome.to_json(meta))?;
    Ok(outcome)
}

pub fn render_svg(cfg: &RunConfig, patch: Option<&Path>, out: &Path, clip: f64) -> Result<Outcome, CliError> {
    let patch = patch_or_generate(patch, cfg)?;
    let mut w = create(out)?;
    let meta = cfg.meta("render-svg");
    writeln!(w, "<!-- {meta} -->").map_err(|e| CliError::io(out, e))?;
    let style = SvgStyle {
        clip,
        ..Default::default()
    };
    patch_svg(&patch, &style, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(out, e))?;
    Ok(Outcome::default())
}

pub fn verify(cfg: &RunConfig, patch: Option<&Path>) -> Result<Outcome, CliError> {
    let patch = patch_or_generate(patch, cfg)?;
    let lat = lattice(&patch)?;
    let (outcome, iso) = suites::verify(&patch, &lat, cfg)?;
    let meta = cfg.meta("verify");
    let dir = &cfg.out_dir;
    write_json(&dir.join("verify.json"), &outcome.to_json(meta.clone()))?;

    let pairs_path = dir.join("pairs.csv");
    let mut w = create(&pairs_path)?;
    writeln!(w, "# {meta}")
        .and_then(|_| write_pairs_csv(&iso.samples, &mut w))
        .map_err(|e| CliError::io(&pairs_path, e))?;

    if let Some(rows) = outcome.data.get("volume_doubling").and_then(|v| v.get("rows")).and_then(Value::as_array) {
        let mut csv = Csv::create(&dir.join("volume.csv"), &meta, "x,r,v_r,v_2r,ratio")?;
        for r in rows {
            csv.row(&["x", "r", "v_r", "v_2r", "ratio"].map(|k| r[k].to_string()))?;
        }
        csv.finish()?;
    }
    if let Some(rows) = outcome.data.get("poincare").and_then(Value::as_array) {
        let mut csv = Csv::create(&dir.join("poincare.csv"), &meta, "x,r,ball_size,lambda2,c_pi")?;
        for r in rows {
            csv.row(&["x", "r", "ball_size", "lambda2", "c_pi"].map(|k| r[k].to_string()))?;
        }
        csv.finish()?;
    }
    if let Some(pairs) = outcome
        .data
        .get("frequencies")
        .and_then(|f| f.get("pairs"))
        .and_then(Value::as_array)
    {
        let mut csv = Csv::create(&dir.join("frequencies.csv"), &meta, "j,k,class,count,frequency")?;
        for p in pairs {
            csv.row(&[
                p["families"][0].to_string(),
                p["families"][1].to_string(),
                p["class"].to_string(),
                p["count"].to_string(),
                p["frequency"].to_string(),
            ])?;
        }
        csv.finish()?;
    }
    Ok(outcome)
}

pub fn walk(cfg: &RunConfig, patch: Option<&Path>, out: &Path) -> Result<Outcome, CliError> {
    let patch = patch_or_generate(patch, cfg)?;
    let lat = lattice(&patch)?;
    drop(patch);
    let pool = suites::start_pool(&lat, cfg.clt.start_radius, cfg.n_max)?;
    let pool_size = pool.len();
    let ens_cfg = EnsembleConfig {
        escape_budget: cfg.clt.escape_budget,
        ..EnsembleConfig::new(cfg.n_max, cfg.samples, cfg.seed)
    };
    let ens = simulate_ensemble(&lat, &Starts::Uniform(pool), &ens_cfg).map_err(suites::walk_error)?;
    let meta = cfg.meta("walk");
    let mut w = create(out)?;
    write_ensemble(&ens, Some(&meta), &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(out, e))?;

    let mut outcome = suites::clt(&ens, &lat, cfg);
    outcome.put("samples", ens.samples());
    outcome.put("escapes", ens.escapes());
    outcome.put("start_pool", pool_size);
    outcome.put("patch_radius", lat.radius());
    write_walk_outputs(cfg, &outcome, &meta)?;
    Ok(outcome)
}

fn write_walk_outputs(cfg: &RunConfig, outcome: &Outcome, meta: &Value) -> Result<(), CliError> {
    let dir = &cfg.out_dir;
    write_json(&dir.join("walk.json"), &outcome.to_json(meta.clone()))?;
    let mut csv = Csv::create(&dir.join("msd.csv"), meta, "n,msd_euclid,se_euclid,msd_graph,se_graph")?;
    for r in outcome.data["msd"].as_array().into_iter().flatten() {
        let g = |k: &str| r["graph"].get(k).map_or(String::new(), Value::to_string);
        csv.row(&[
            r["n"].to_string(),
            r["euclid"]["mean"].to_string(),
            r["euclid"]["se"].to_string(),
            g("mean"),
            g("se"),
        ])?;
    }
    csv.finish()?;
    if let Some(rows) = outcome.data.get("ks").and_then(Value::as_array) {
        let mut csv = Csv::create(&dir.join("ks.csv"), meta, "n,samples,sigma2_x,sigma2_y,ks_x,ks_y")?;
        for r in rows {
            csv.row(&[
                r["n"].to_string(),
                r["samples"].to_string(),
                r["sigma2"][0].to_string(),
                r["sigma2"][1].to_string(),
                r["ks"][0].to_string(),
                r["ks"][1].to_string(),
            ])?;
        }
        csv.finish()?;
    }
    Ok(())
}

/// Re-run the walk analysis on a saved ensemble.
pub fn analyze_ensemble(cfg: &RunConfig, patch: Option<&Path>, ensemble: &Path) -> Result<Outcome, CliError> {
    let file = File::open(ensemble).map_err(|e| CliError::io(ensemble, e))?;
    let (ens, _) = read_ensemble(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", ensemble.display())))?;
    let lat = lattice(&patch_or_generate(patch, cfg)?)?;
    let mut outcome = suites::clt(&ens, &lat, cfg);
    outcome.put("samples", ens.samples());
    outcome.put("escapes", ens.escapes());
    write_walk_outputs(cfg, &outcome, &cfg.meta("walk"))?;
    Ok(outcome)
}

pub fn kernel(cfg: &RunConfig, patch: Option<&Path>, n: usize) -> Result<Outcome, CliError> {
    let lat = lattice(&patch_or_generate(patch, cfg)?)?;
    let run = suites::kernel(&lat, &cfg.kernel, n, &cfg.thresholds)?;
    let meta = cfg.meta("kernel");
    let dir = &cfg.out_dir;
    write_json(&dir.join("kernel.json"), &run.outcome.to_json(meta.clone()))?;

    if let Some(field) = run.first.iter().find(|f| f.n == n) {
        let path = dir.join(format!("kernel_n{n}.csv"));
        let mut w = create(&path)?;
        writeln!(w, "# {meta}")
            .and_then(|_| write_kernel_csv(field, &lat, &mut w))
            .map_err(|e| CliError::io(&path, e))?;
    }
    let mut csv = Csv::create(&dir.join("diagonal.csv"), &meta, "origin,n,p_tilde")?;
    for (o, m, p) in &run.diagonal {
        csv.row(&[o.to_string(), m.to_string(), format!("{p:e}")])?;
    }
    csv.finish()?;
    let mut csv = Csv::create(&dir.join("cone.csv"), &meta, "origin,direction_x,direction_y,s,tiles")?;
    let origins = run.outcome.data["origins"].as_array().cloned().unwrap_or_default();
    for (o, scan) in origins.iter().zip(run.outcome.data["cone"].as_array().into_iter().flatten()) {
        for v in scan["values"].as_array().into_iter().flatten() {
            csv.row(&[
                o.to_string(),
                v["direction"][0].to_string(),
                v["direction"][1].to_string(),
                v["s"].to_string(),
                v["tiles"].to_string(),
            ])?;
        }
    }
    csv.finish()?;
    Ok(run.outcome)
}

/// Claims of the consolidated report and the module checks behind each.
pub const CLAIMS: &[(&str, &str, &[&str])] = &[
    ("tiling geometry", "verify", &["edge_length", "tile_area", "shared_edges", "interior_degree", "coverage", "connected"]),
    ("tile frequencies", "verify", &["thick_thin_ratio", "pair_frequencies", "residual_discrepancy"]),
    ("rough isometry to Z2", "verify", &["psi_injective", "lower_bound", "upper_bound", "fullness"]),
    ("volume doubling (VD)", "verify", &["volume_doubling", "volume_growth"]),
    ("Poincare inequality (PI2)", "verify", &["poincare_band", "poincare_vs_square"]),
    ("Gaussian heat kernel bounds (GE2,2)", "kernel", &["alpha", "gaussian_r_squared", "gaussian_band", "square_alpha"]),
    ("zero drift", "walk", &["drift"]),
    ("non-degenerate covariance", "walk", &["non_degeneracy"]),
    ("non-degenerate covariance", "kernel", &["cone"]),
    ("isotropy", "walk", &["isotropy", "correlation"]),
    ("isotropy", "verify", &["one_step_isotropy"]),
    ("central limit theorem", "walk", &["ks", "msd_plateau", "collapse", "increments"]),
];

pub fn report(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let mut sources = serde_json::Map::new();
    let mut missing = Vec::new();
    for name in ["verify", "kernel", "walk"] {
        let path = dir.join(format!("{name}.json"));
        if path.exists() {
            sources.insert(name.to_string(), read_json(&path)?);
        } else {
            missing.push(name);
        }
    }

    let mut claims: Vec<(String, Vec<Value>, Vec<Status>)> = Vec::new();
    for &(claim, source, names) in CLAIMS {
        let idx = match claims.iter().position(|c| c.0 == claim) {
            Some(i) => i,
            None => {
                claims.push((claim.to_string(), Vec::new(), Vec::new()));
                claims.len() - 1
            }
        };
        let Some(doc) = sources.get(source) else {
            claims[idx].1.push(json!({ "source": format!("{source}.json"), "missing": true }));
            continue;
        };
        for &name in names {
            let found = doc["checks"]
                .as_array()
                .into_iter()
                .flatten()
                .find(|c| c["name"] == name)
                .cloned();
            match found {
                Some(c) => {
                    let status: Status = serde_json::from_value(c["status"].clone()).unwrap_or(Status::Skip);
                    claims[idx].2.push(status);
                    claims[idx].1.push(json!({ "source": format!("{source}.json"), "check": c }));
                }
                None => claims[idx].1.push(json!({ "source": format!("{source}.json"), "check": name, "missing": true })),
            }
        }
    }

    let mut outcome = Outcome::default();
    let mut entries = Vec::new();
    for (claim, evidence, statuses) in claims {
        let verdict = if statuses.contains(&Status::Fail) {
            "FAIL"
        } else if statuses.contains(&Status::Pass) && !evidence.iter().any(|e| e.get("missing").is_some()) {
            "PASS"
        } else if evidence.iter().any(|e| e.get("missing").is_some()) {
            "MISSING"
        } else {
            "SKIP"
        };
        let check = Check {
            name: claim.clone(),
            status: match verdict {
                "FAIL" => Status::Fail,
                "PASS" => Status::Pass,
                _ => Status::Skip,
            },
            value: json!(verdict),
            bound: Value::Null,
        };
        outcome.push(check);
        entries.push(json!({ "claim": claim, "verdict": verdict, "evidence": evidence }));
    }
    outcome.put("claims", entries);
    outcome.put("sources", sources.iter().map(|(k, v)| (k.clone(), v["meta"].clone())).collect::<serde_json::Map<_, _>>());
    write_json(&dir.join("report.json"), &outcome.to_json(cfg.meta("report")))?;
    write_figures(cfg, dir, &sources)?;
    if !missing.is_empty() {
        return Err(CliError::Usage(format!(
            "report written, but inputs are missing: {}",
            missing.iter().map(|m| format!("{m}.json")).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(outcome)
}

fn write_svg(path: &Path, meta: &Value, chart: &Chart) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "<!-- {meta} -->")
        .and_then(|_| chart_svg(chart, &mut w))
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn write_figures(cfg: &RunConfig, dir: &Path, sources: &serde_json::Map<String, Value>) -> Result<(), CliError> {
    let meta = cfg.meta("report");
    let num = |v: &Value| v.as_f64().unwrap_or(f64::NAN);
    if let Some(walk) = sources.get("walk") {
        let rows = walk["data"]["msd"].as_array().cloned().unwrap_or_default();
        let euclid = rows.iter().map(|r| (num(&r["n"]), num(&r["euclid"]["mean"]))).collect();
        let graph = rows.iter().map(|r| (num(&r["n"]), num(&r["graph"]["mean"]))).collect();
        write_svg(
            &dir.join("msd.svg"),
            &meta,
            &Chart {
                title: "Mean square displacement / n".into(),
                x_label: "n".into(),
                y_label: "MSD / n".into(),
                log_x: true,
                log_y: false,
                series: vec![
                    Series { label: "Euclidean".into(), points: euclid },
                    Series { label: "graph distance".into(), points: graph },
                ],
            },
        )?;
        let ks = walk["data"]["ks"].as_array().cloned().unwrap_or_default();
        let axis = |a: usize| ks.iter().map(|r| (num(&r["n"]), num(&r["ks"][a]))).collect();
        write_svg(
            &dir.join("ks.svg"),
            &meta,
            &Chart {
                title: "KS distance of X_n / sqrt(n) from the fitted normal".into(),
                x_label: "n".into(),
                y_label: "KS".into(),
                log_x: true,
                log_y: true,
                series: vec![Series { label: "x".into(), points: axis(0) }, Series { label: "y".into(), points: axis(1) }],
            },
        )?;
    }
    if let Some(kernel) = sources.get("kernel") {
        let fit = &kernel["data"]["gaussian_fit"];
        let steps: Vec<f64> = kernel["data"]["steps"]
            .as_array()
            .into_iter()
            .flatten()
            .map(num)
            .collect();
        let alpha = num(&fit["alpha_hat"]);
        let diag = dir.join("diagonal.csv");
        let mut points: Vec<(f64, f64)> = Vec::new();
        if let Ok(text) = std::fs::read_to_string(&diag) {
            // Mean over origins of p̃_n(x₀, x₀) per step.
            for &n in &steps {
                let vals: Vec<f64> = text
                    .lines()
                    .skip(2)
                    .filter_map(|l| {
                        let f: Vec<&str> = l.split(',').collect();
                        (f.get(1)?.parse::<f64>().ok()? == n).then(|| f.get(2)?.parse::<f64>().ok())?
                    })
                    .collect();
                if !vals.is_empty() {
                    points.push((n, vals.iter().sum::<f64>() / vals.len() as f64));
                }
            }
        }
        let reference = steps.iter().map(|&n| (n, points.first().map_or(1.0, |p| p.1 * (p.0 / n).powf(alpha / 2.0)))).collect();
        write_svg(
            &dir.join("diagonal.svg"),
            &meta,
            &Chart {
                title: "On-diagonal heat kernel".into(),
                x_label: "n".into(),
                y_label: "p~_n(x0, x0)".into(),
                log_x: true,
                log_y: true,
                series: vec![
                    Series { label: "mean over origins".into(), points },
                    Series { label: format!("n^(-{:.3}/2)", alpha), points: reference },
                ],
            },
        )?;
    }
    Ok(())
}
