use serde_json::{json, Value};

use quadvar_core::cumulants::CumulantEngine;
use quadvar_core::rates::{classify_rate, commensurability_scan, normal_convergence_test, RegimeCase};
use quadvar_core::simulate::{build_rosenblatt, empirical_stats, sample_fn_values, sample_paths, with_workers, EmpiricalStats};
use quadvar_core::tvbound::{decay_fit, DecayModel, TvBoundEvaluator};
use quadvar_core::{AsymptoticConstants, CovarianceModel, CumulantReport, SamplerConfig, SpectralDensity, TvBoundConfig, TvTerms};

use crate::args::*;
use crate::{report, CliError, CliResult, Output};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn dispatch(cmd: &Command) -> CliResult<Output> {
    match cmd {
        Command::Cumulants(a) => cumulants(a),
        Command::Rates(a) => rates(a),
        Command::Spectral(a) => spectral(a),
        Command::Simulate(a) => simulate(a),
        Command::Rosenblatt(a) => rosenblatt(a),
        Command::Tvbound(a) => tvbound(a),
        Command::Report(a) => report::report(a),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Power-law fit of a positive series when the grid is long enough.
fn power_fit(points: &[(f64, f64)], model: DecayModel) -> Value {
    match decay_fit(points, model) {
        Ok(fit) => to_json(&fit),
        Err(_) => Value::Null,
    }
}

fn model_json(model: &CovarianceModel) -> Value {
    json!({ "id": model.id(), "kind": to_json(&model.kind()) })
}

fn cumulants(a: &CumulantsArgs) -> CliResult<Output> {
    let grid = parse_grid(&a.n_grid)?;
    let max_n = *grid.last().expect("grid is non-empty");
    let model = a.model.build(max_n)?;
    let engine = CumulantEngine::new(&model, max_n);
    let rows: Vec<CumulantReport> = engine.scan(&grid);
    let k3: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.kappa3.abs())).collect();
    let k4: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.kappa4.abs())).collect();
    let violations = rows.iter().filter(|r| !r.sandwich_holds()).count();
    let json = json!({
        "command": "cumulants",
        "version": VERSION,
        "model": model_json(&model),
        "n_grid": grid,
        "rows": to_json(&rows),
        "fits": {
            "kappa3": power_fit(&k3, DecayModel::Power),
            "kappa4": power_fit(&k4, DecayModel::Power),
        },
        "sandwich_violations": violations,
    });
    Ok(Output {
        csv: csv_table(CumulantReport::CSV_HEADER, rows.iter().map(|r| r.csv_row())),
        json,
        summary: format!(
            "cumulants: {} on {} sizes up to n = {max_n}, sandwich violations: {violations}",
            model.id(),
            grid.len()
        ),
    })
}

fn rates(a: &RatesArgs) -> CliResult<Output> {
    let grid = parse_grid(&a.n_grid)?;
    let max_n = *grid.last().expect("grid is non-empty");
    let h = a.model.hurst_exponent()?;
    let b = a.model.beta_exponent()?;
    let regime = classify_rate(h, b)?;
    let model = if a.explicit_model {
        a.model.build(max_n)?
    } else if b.value() == 0.0 && h.value() < 1.0 {
        CovarianceModel::fgn(h.value())?
    } else {
        CovarianceModel::log_power(h.value(), b.value(), false)?
    };
    let mut json = json!({
        "command": "rates",
        "version": VERSION,
        "H": h.to_string(),
        "beta": b.to_string(),
        "model": model_json(&model),
        "regime": regime.case.id(),
        "M_n": regime.formula.map(|f| f.to_string()),
        "v_n_converges": regime.v_n_converges,
        "n_grid": grid,
    });
    if grid.len() >= 4 {
        json["normal_convergence"] = to_json(&normal_convergence_test(&model, &grid)?);
        json["normal_convergence"]["label"] = json!("finite-n evidence");
    }
    let (csv, summary) = if regime.case == RegimeCase::NonNormal {
        let engine = CumulantEngine::new(&model, max_n);
        let rows: Vec<String> = grid
            .iter()
            .map(|&n| format!("{n},{},,,{}", engine.kappa3(n), regime.case.id()))
            .collect();
        json["rows"] = Value::Array(
            grid.iter()
                .map(|&n| json!({ "n": n, "kappa3": engine.kappa3(n) }))
                .collect(),
        );
        (
            csv_table(quadvar_core::rates::CommensurabilityScan::CSV_HEADER, rows),
            format!("rates: (H={h}, beta={b}) is in the non-normal regime"),
        )
    } else {
        let scan = commensurability_scan(&model, h, b, &grid)?;
        json["rows"] = to_json(&scan.rows);
        json["band_factor"] = json!(scan.band_factor);
        json["ratio_slope"] = json!(scan.slope);
        (
            csv_table(quadvar_core::rates::CommensurabilityScan::CSV_HEADER, scan.csv_rows()),
            format!(
                "rates: regime {} with M_n = {}, ratio band {:.3}, slope {:.4}",
                regime.case.id(),
                regime.formula.map(|f| f.to_string()).unwrap_or_default(),
                scan.band_factor,
                scan.slope
            ),
        )
    };
    Ok(Output { csv, json, summary })
}

fn spectral(a: &SpectralArgs) -> CliResult<Output> {
    let ks = parse_grid(&a.k_grid)?;
    let density = SpectralDensity::log_modulated(a.hurst, a.beta)?;
    let consts = AsymptoticConstants::compute(a.hurst, density.quadrature()).ok();
    let mut rows = Vec::with_capacity(ks.len());
    let mut json_rows = Vec::with_capacity(ks.len());
    for &k in &ks {
        let rho = density.rho_from_q(k as u64)?;
        let asym = consts.as_ref().map(|c| density.rho_asymptotic(c, k as u64));
        let refined = density.rho_asymptotic_refined(k as u64).ok();
        let ratio = asym.map(|s| rho / s);
        rows.push(format!("{k},{rho},{},{},{}", opt(asym), opt(refined), opt(ratio)));
        json_rows.push(json!({
            "k": k, "rho": rho, "rho_asymptotic": asym,
            "rho_asymptotic_refined": refined, "ratio": ratio,
        }));
    }
    let mut json = json!({
        "command": "spectral",
        "version": VERSION,
        "H": a.hurst,
        "beta": a.beta,
        "normalization": density.normalization(),
        "quadrature": to_json(density.quadrature()),
        "constants": consts.as_ref().map(to_json),
        "rows": json_rows,
    });
    if let Some(spec) = &a.n_grid {
        let ns = parse_grid(spec)?;
        let c = consts
            .as_ref()
            .ok_or_else(|| CliError::Domain("n v_n asymptotics need H in (3/4, 1)".into()))?;
        let max_n = *ns.last().expect("grid is non-empty");
        let model = CovarianceModel::from_spectral(&density, max_n)?;
        let engine = CumulantEngine::new(&model, max_n);
        let mut nv_rows = Vec::new();
        for &n in &ns {
            let nvn = n as f64 * engine.variance_vn(n);
            let closed = density.nvn_asymptotic(c, n as u64)?;
            let effective = density.nvn_asymptotic_effective(c, n as u64)?;
            nv_rows.push(json!({
                "n": n, "nvn": nvn, "nvn_asymptotic": closed, "ratio": nvn / closed,
                "nvn_asymptotic_effective": effective, "ratio_effective": nvn / effective,
            }));
        }
        json["nvn"] = Value::Array(nv_rows);
    }
    Ok(Output {
        csv: csv_table("k,rho,rho_asymptotic,rho_asymptotic_refined,ratio", rows),
        json,
        summary: format!(
            "spectral: H={} beta={} C={:.12}, {} lags",
            a.hurst,
            a.beta,
            density.normalization(),
            ks.len()
        ),
    })
}

const STATS_HEADER: &str = "n,paths,seed,mean,variance,kappa3,kappa4,se_mean,se_variance,se_kappa3,se_kappa4,ks_distance,kappa3_exact,kappa4_exact";

fn stats_row(n: usize, seed: u64, s: &EmpiricalStats, k3: f64, k4: f64) -> String {
    format!(
        "{n},{},{seed},{},{},{},{},{},{},{},{},{},{k3},{k4}",
        s.samples, s.mean, s.variance, s.kappa3, s.kappa4, s.se_mean, s.se_variance, s.se_kappa3, s.se_kappa4, s.ks_distance
    )
}

fn z_scores(s: &EmpiricalStats, k3: f64, k4: f64) -> Value {
    json!({
        "mean": s.mean / s.se_mean,
        "variance": (s.variance - 1.0) / s.se_variance,
        "kappa3": (s.kappa3 - k3) / s.se_kappa3,
        "kappa4": (s.kappa4 - k4) / s.se_kappa4,
    })
}

fn simulate(a: &SimulateArgs) -> CliResult<Output> {
    let model = a.model.build(a.n)?;
    let cfg = SamplerConfig::new(model.clone(), a.n, a.paths, a.seed).with_workers(a.workers.resolve());
    let values = match &a.save_paths {
        Some(path) => {
            let batch = sample_paths(&cfg)?;
            batch.save(path)?;
            let v_n = CumulantEngine::new(&model, a.n).variance_vn(a.n);
            batch
                .iter()
                .map(|p| quadvar_core::simulate::normalized_quadratic_variation(p, v_n))
                .collect()
        }
        None => sample_fn_values(&cfg)?,
    };
    let stats = empirical_stats(&values)?;
    let engine = CumulantEngine::new(&model, a.n);
    let (k3, k4) = (engine.kappa3(a.n), engine.kappa4(a.n));
    let json = json!({
        "command": "simulate",
        "version": VERSION,
        "model": model_json(&model),
        "n": a.n,
        "paths": a.paths,
        "seed": a.seed,
        "v_n": engine.variance_vn(a.n),
        "exact": { "mean": 0.0, "variance": 1.0, "kappa3": k3, "kappa4": k4 },
        "stats": to_json(&stats),
        "z_scores": z_scores(&stats, k3, k4),
    });
    Ok(Output {
        csv: csv_table(STATS_HEADER, [stats_row(a.n, a.seed, &stats, k3, k4)]),
        json,
        summary: format!(
            "simulate: {} n={} paths={} seed={}: kappa3 {:.5} (exact {:.5}), KS {:.4}",
            model.id(),
            a.n,
            a.paths,
            a.seed,
            stats.kappa3,
            k3,
            stats.ks_distance
        ),
    })
}

fn rosenblatt(a: &RosenblattArgs) -> CliResult<Output> {
    if a.paths > 0 && a.seed.is_none() {
        return Err(CliError::Domain("--seed is required when --paths > 0".into()));
    }
    let workers = a.workers.resolve();
    let consts = AsymptoticConstants::compute(a.hurst, &Default::default())?;
    let approx = with_workers(workers, || build_rosenblatt(a.hurst, a.half_size, &consts))??;
    let leading: Vec<f64> = approx.eigenvalues.iter().take(10).copied().collect();
    let mut json = json!({
        "command": "rosenblatt",
        "version": VERSION,
        "H": a.hurst,
        "M": a.half_size,
        "variance": approx.variance(),
        "kappa3": approx.kappa3(),
        "kappa4": approx.kappa4(),
        "captured_variance": approx.captured_variance,
        "gaussian_variance": approx.gaussian_variance,
        "prefactor": approx.prefactor,
        "prefactor_ratio": approx.prefactor_ratio,
        "hermitian_even": approx.hermitian_even(),
        "leading_eigenvalues": leading,
        "seed": a.seed,
    });
    let mut sample = None;
    if let Some(seed) = a.seed.filter(|_| a.paths > 0) {
        let values = with_workers(workers, || approx.sample(a.paths, seed))?;
        let stats = empirical_stats(&values)?;
        json["stats"] = to_json(&stats);
        json["z_scores"] = z_scores(&stats, approx.kappa3(), approx.kappa4());
        sample = Some(stats);
    }
    let mut exact = None;
    if let Some(n) = a.compare_n {
        let engine = CumulantEngine::new(&CovarianceModel::fgn(a.hurst)?, n);
        let (k3, k4) = (engine.kappa3(n), engine.kappa4(n));
        json["fgn_exact"] = json!({ "n": n, "kappa3": k3, "kappa4": k4,
            "kappa3_relative_gap": approx.kappa3() / k3 - 1.0 });
        exact = Some(k3);
    }
    let csv = csv_table(
        "H,M,variance,kappa3,kappa4,captured_variance,sample_kappa3,se_kappa3,fgn_kappa3",
        [format!(
            "{},{},{},{},{},{},{},{},{}",
            a.hurst,
            a.half_size,
            approx.variance(),
            approx.kappa3(),
            approx.kappa4(),
            approx.captured_variance,
            opt(sample.map(|s| s.kappa3)),
            opt(sample.map(|s| s.se_kappa3)),
            opt(exact)
        )],
    );
    Ok(Output {
        csv,
        json,
        summary: format!(
            "rosenblatt: H={} M={} kappa3 {:.6} kappa4 {:.6} captured variance {:.4}",
            a.hurst,
            a.half_size,
            approx.kappa3(),
            approx.kappa4(),
            approx.captured_variance
        ),
    })
}

fn tvbound(a: &TvboundArgs) -> CliResult<Output> {
    let grid = parse_grid(&a.n_grid)?;
    let mut cfg = TvBoundConfig::new(a.hurst, a.beta).with_alpha(a.alpha);
    cfg.c_finf = a.c_finf;
    let ev = TvBoundEvaluator::new(cfg.clone(), *grid.last().expect("grid is non-empty"))?;
    let rows: Vec<TvTerms> = ev.scan(&grid)?;
    let pts = |f: &dyn Fn(&TvTerms) -> f64| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.n as f64, f(r))).collect() };
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let b = r.bound(cfg.c_finf);
            json!({ "n": r.n, "T1": r.t1, "T2": r.t2, "T3": r.t3, "bound": b,
                "bound_sqrt_log_n": b * (r.n as f64).ln().sqrt() })
        })
        .collect();
    let json = json!({
        "command": "tvbound",
        "version": VERSION,
        "config": to_json(&cfg),
        "note": "d_TV bounds are stated up to the unknown constant c_finf",
        "rows": json_rows,
        "fits": {
            "T1_power": power_fit(&pts(&|r| r.t1), DecayModel::Power),
            "T1_expected_exponent": cfg.t1_exponent(),
            "T2_log_power": power_fit(&pts(&|r| r.t2), DecayModel::LogPower),
            "bound_log_power": power_fit(&pts(&|r| r.bound(cfg.c_finf)), DecayModel::LogPower),
        },
    });
    let last = rows.last().expect("grid is non-empty");
    Ok(Output {
        csv: csv_table(TvTerms::CSV_HEADER, rows.iter().map(|r| r.csv_row(cfg.c_finf))),
        json,
        summary: format!(
            "tvbound: H={} beta={} bound at n={} is {:.6} (up to c_finf)",
            a.hurst,
            a.beta,
            last.n,
            last.bound(cfg.c_finf)
        ),
    })
}
