//! Acceptance checks. They run one after another so each wall-clock budget
//! is measured without contention; one line is printed per check and the
//! process exits nonzero when any check fails.

use std::cell::RefCell;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use smilansky_lab::bracketing::{classify, global_lower_bound, strip_bounds, Verdict as Classified};
use smilansky_lab::eigs::{lanczos_smallest, sturm_smallest, LanczosOptions, TridiagonalSym};
use smilansky_lab::grid2d::{
    assemble_h2d, lowest_eigenvalues, transition_scan, EigenOptions, Grid2D, ScanPolicy, ScanReport, Verdict, XMesh,
};
use smilansky_lab::oned::{
    auto_truncation, critical_coupling, critical_coupling_with, ground_state, resolved_ground_state, threshold,
    tune_lambda_to_threshold, ComparisonSpec, Grid1D, ResolutionPolicy,
};
use smilansky_lab::weyl::{build_cutoff, residual_identity_check, weyl_certificate};
use smilansky_lab::{BoundaryCondition, ChannelSpec, ModelConfig, PotentialProfile, XDomain};

/// J(2⁴)·ln 2⁴ from an independent scipy evaluation of the same cutoff.
const GRADIENT_CONSTANT: f64 = 10.150689961703256;
const CUTOFF_LADDER: [i32; 4] = [4, 8, 12, 16];
/// k chosen by the certificate for ε = 0.1, 0.05, 0.02.
const CERTIFICATE_K: [i32; 3] = [23, 32, 50];
const EPSILONS: [f64; 3] = [0.1, 0.05, 0.02];
const SCAN_LADDER: [f64; 4] = [8.0, 16.0, 24.0, 32.0];

type Check = Result<(bool, String), String>;

fn cosine() -> PotentialProfile {
    PotentialProfile::cosine(1.0, 1.0).unwrap()
}

fn lambda_for(target: f64) -> Result<f64, String> {
    tune_lambda_to_threshold(1.0, &cosine(), target, 1e-10).map_err(|e| e.to_string())
}

fn cutoff_conditions() -> Check {
    let mut worst_mass: f64 = 0.0;
    let mut worst_scaled: f64 = 0.0;
    let mut decreasing = true;
    let mut prev = f64::INFINITY;
    for m in CUTOFF_LADDER {
        let k = 2f64.powi(m);
        let c = build_cutoff(k).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((c.mass().map_err(|e| e.to_string())? - 1.0).abs());
        let j = c.gradient_energy().map_err(|e| e.to_string())?;
        decreasing &= j < prev;
        prev = j;
        worst_scaled = worst_scaled.max(j * k.ln());
    }
    let bound = GRADIENT_CONSTANT * (1.0 + 1e-9);
    let ok = worst_mass <= 1e-10 && decreasing && worst_scaled <= bound;
    Ok((
        ok,
        format!(
            "max |mass - 1| = {worst_mass:.1e}, J decreasing = {decreasing}, max J ln k = {worst_scaled:.10} vs C_J = {GRADIENT_CONSTANT:.10}"
        ),
    ))
}

fn pre_normalization_mass() -> Check {
    let mut failures = Vec::new();
    let mut smallest = f64::INFINITY;
    for m in CUTOFF_LADDER.iter().chain(&CERTIFICATE_K) {
        let c = build_cutoff(2f64.powi(*m)).map_err(|e| e.to_string())?;
        let mass = c.rising_mass().map_err(|e| e.to_string())?;
        smallest = smallest.min(mass);
        if mass < 0.25 {
            failures.push(format!("k = 2^{m}: {mass:.6}"));
        }
    }
    let detail = if failures.is_empty() {
        format!("smallest rising mass {smallest:.6} >= 0.25")
    } else {
        format!("below 0.25 at {}", failures.join(", "))
    };
    Ok((failures.is_empty(), detail))
}

fn residual_identity() -> Check {
    let lambda = lambda_for(-1.0)?;
    let spec = ComparisonSpec::full_line(1.0, lambda, cosine()).map_err(|e| e.to_string())?;
    let x = auto_truncation(&spec, &ResolutionPolicy::default()).map_err(|e| e.to_string())?;
    let ts: Vec<f64> = (0..=400).map(|i| -4.0 + 0.02 * i as f64).collect();
    let mut defects = Vec::new();
    for cells in [100.0, 200.0, 400.0, 800.0] {
        let grid = Grid1D::with_spacing(-x, x, 1.0 / cells).map_err(|e| e.to_string())?;
        let gs = ground_state(&spec, &grid).map_err(|e| e.to_string())?;
        defects.push(residual_identity_check(&gs, 1.0, &ts));
    }
    let ratios: Vec<f64> = defects.windows(2).map(|w| w[0] / w[1]).collect();
    let finest = defects[defects.len() - 1];
    let ok = ratios.iter().all(|r| (r - 4.0).abs() <= 1.0) && finest <= 1e-6;
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    Ok((ok, format!("halving ratios [{}], finest defect {finest:.2e}", shown.join(", "))))
}

fn certificates(config: &ModelConfig, interval: bool) -> Check {
    let lambda = config.channels()[0].lambda;
    let spec = ComparisonSpec::full_line(1.0, lambda, cosine()).map_err(|e| e.to_string())?;
    let gs = resolved_ground_state(&spec, &ResolutionPolicy::default()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for mu in [0.0, 2.5, -0.5] {
        let cert = weyl_certificate(config, &gs, mu, &EPSILONS).map_err(|e| e.to_string())?;
        ok &= cert.passed() && cert.interval == interval;
        for r in &cert.rows {
            let eps = r.params.epsilon;
            let floor = if interval { 0.5 - 2.0 * eps.sqrt() } else { 0.5 };
            ok &= r.norm.norm >= floor && r.residual * r.residual <= 9.0 * eps * (1.0 + 1e-6);
            if !interval {
                ok &= r.norm.correction < 1.0 / 16.0;
            }
        }
        let res: Vec<String> = cert.rows.iter().map(|r| format!("{:.4}", r.normalized_residual)).collect();
        parts.push(format!("mu {mu}: [{}]", res.join(", ")));
    }
    Ok((ok, parts.join("; ")))
}

fn weyl_certificate_line() -> Check {
    let lambda = lambda_for(-1.0)?;
    let config = ModelConfig::single_channel(1.0, lambda, cosine()).map_err(|e| e.to_string())?;
    certificates(&config, false)
}

fn weyl_certificate_interval() -> Check {
    let lambda = lambda_for(-1.0)?;
    let channel = ChannelSpec::new(lambda, 0.0, cosine()).map_err(|e| e.to_string())?;
    let domain = XDomain::Interval {
        half_width: 1.0,
        bc: BoundaryCondition::Dirichlet,
    };
    let config = ModelConfig::new(1.0, vec![channel], domain).map_err(|e| e.to_string())?;
    certificates(&config, true)
}

fn critical_coupling_check() -> Check {
    let lambda = critical_coupling(1.0, &cosine(), 1e-9).map_err(|e| e.to_string())?;
    let fine = ResolutionPolicy {
        cells_per_half_width: 320,
        ..ResolutionPolicy::default()
    };
    let other = critical_coupling_with(1.0, &cosine(), 1e-9, &fine).map_err(|e| e.to_string())?;
    let doubled = critical_coupling(1.0, &cosine().with_amplitude(2.0).unwrap(), 1e-9).map_err(|e| e.to_string())?;
    let spec = ComparisonSpec::full_line(1.0, lambda, cosine()).map_err(|e| e.to_string())?;
    let residual = threshold(&spec, &ResolutionPolicy::default()).map_err(|e| e.to_string())?;
    let resolution_gap = (lambda - other).abs() / lambda;
    let doubling_gap = (2.0 * doubled - lambda).abs() / lambda;
    let ok = resolution_gap <= 1e-3 && doubling_gap <= 1e-3 && residual.abs() <= 1e-6;
    Ok((
        ok,
        format!(
            "lambda_crit {lambda:.10}, resolution gap {resolution_gap:.1e}, doubling gap {doubling_gap:.1e}, |E| {:.1e}",
            residual.abs()
        ),
    ))
}

fn spectral_transition(subcritical_scan: &RefCell<Option<(ModelConfig, ScanReport)>>) -> Check {
    let lambda_crit = critical_coupling(1.0, &cosine(), 1e-9).map_err(|e| e.to_string())?;
    let policy = ScanPolicy::default();

    let sub = ModelConfig::single_channel(1.0, 0.5 * lambda_crit, cosine()).map_err(|e| e.to_string())?;
    let low = transition_scan(&sub, &SCAN_LADDER, &policy).map_err(|e| e.to_string())?;
    let first = low.rows[0].lambda0;
    let last = low.rows[low.rows.len() - 1].lambda0;
    let drift = (last - first).abs() / last.abs();

    let sup = ModelConfig::single_channel(1.0, 1.5 * lambda_crit, cosine()).map_err(|e| e.to_string())?;
    let high = transition_scan(&sup, &SCAN_LADDER, &policy).map_err(|e| e.to_string())?;
    let spec = ComparisonSpec::full_line(1.0, 1.5 * lambda_crit, cosine()).map_err(|e| e.to_string())?;
    let e0 = threshold(&spec, &ResolutionPolicy::default()).map_err(|e| e.to_string())?;
    let fit_gap = (high.c_fit - e0.abs()).abs() / e0.abs();

    let ok = low.verdict == Verdict::Subcritical && drift <= 0.01 && high.verdict == Verdict::Supercritical && fit_gap <= 0.3;
    let detail = format!(
        "0.5x: {} with drift {drift:.2e}; 1.5x: {} with c {:.4} vs |E0| {:.4} (gap {:.1}%)",
        low.verdict.as_str(),
        high.verdict.as_str(),
        high.c_fit,
        e0.abs(),
        100.0 * fit_gap
    );
    *subcritical_scan.borrow_mut() = Some((sub, low));
    Ok((ok, detail))
}

fn multi_channel_rule() -> Check {
    let deep = ChannelSpec::new(lambda_for(-1.0)?, -3.0, cosine()).map_err(|e| e.to_string())?;
    let shallow = ChannelSpec::new(lambda_for(0.3)?, 3.0, cosine()).map_err(|e| e.to_string())?;
    let idle = ChannelSpec::new(0.0, 8.0, cosine()).map_err(|e| e.to_string())?;
    let build = |chs: Vec<ChannelSpec>| ModelConfig::new(1.0, chs, XDomain::FullLine).map_err(|e| e.to_string());
    let base = classify(&build(vec![deep.clone(), shallow.clone()])?, 1e-6).map_err(|e| e.to_string())?;
    let swapped = classify(&build(vec![shallow.clone(), deep.clone()])?, 1e-6).map_err(|e| e.to_string())?;
    let padded = classify(&build(vec![deep, shallow, idle])?, 1e-6).map_err(|e| e.to_string())?;
    let thresholds: Vec<f64> = base.per_channel.iter().map(|c| c.threshold).collect();
    let ok = base.verdict == Classified::Supercritical
        && (base.t_v + 1.0).abs() <= 1e-6
        && (thresholds[1] - 0.3).abs() <= 1e-6
        && [&swapped, &padded]
            .iter()
            .all(|c| c.verdict == base.verdict && (c.t_v - base.t_v).abs() <= 1e-6);
    Ok((
        ok,
        format!(
            "thresholds ({:.9}, {:.9}), t_V {:.9}, permuted {:.9}, padded {:.9}",
            thresholds[0], thresholds[1], base.t_v, swapped.t_v, padded.t_v
        ),
    ))
}

fn bracketing_consistency(subcritical_scan: &RefCell<Option<(ModelConfig, ScanReport)>>) -> Check {
    let mut cases: Vec<(String, ModelConfig, Vec<f64>)> = Vec::new();
    if let Some((config, report)) = subcritical_scan.borrow().as_ref() {
        cases.push(("0.5x line".into(), config.clone(), report.rows.iter().map(|r| r.lambda0).collect()));
    } else {
        return Err("the subcritical transition scan did not run".into());
    }
    let policy = ScanPolicy::default();
    let free = ModelConfig::single_channel(1.0, 0.0, cosine()).map_err(|e| e.to_string())?;
    let lambda_crit = critical_coupling(1.0, &cosine(), 1e-9).map_err(|e| e.to_string())?;
    let boxed = ModelConfig::new(
        1.0,
        vec![ChannelSpec::new(0.5 * lambda_crit, 0.0, cosine()).map_err(|e| e.to_string())?],
        XDomain::Interval {
            half_width: 1.0,
            bc: BoundaryCondition::Dirichlet,
        },
    )
    .map_err(|e| e.to_string())?;
    for (name, config) in [("free line", free), ("0.5x interval", boxed)] {
        let report = transition_scan(&config, &[4.0, 8.0, 12.0], &policy).map_err(|e| e.to_string())?;
        cases.push((name.into(), config, report.rows.iter().map(|r| r.lambda0).collect()));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, config, lambdas) in &cases {
        let bound = global_lower_bound(config)
            .map_err(|e| e.to_string())?
            .value()
            .ok_or_else(|| format!("{name}: reported unbounded"))?;
        let lowest = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
        let nets: Vec<f64> = (2..=7)
            .map(|p| {
                let n = 10u64.pow(p);
                strip_bounds(config, n..=n).map(|s| s[0].net)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let growing = nets.windows(2).all(|w| w[1] > w[0]) && nets[nets.len() - 1] > 100.0;
        ok &= bound <= lowest && growing;
        parts.push(format!(
            "{name}: bound {bound:.4} <= min lambda0 {lowest:.4}, net(1e7) {:.1}",
            nets[nets.len() - 1]
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn eigensolver_oracles() -> Check {
    let n = 50;
    let t = TridiagonalSym::new(vec![2.0; n], vec![-1.0; n - 1]).map_err(|e| e.to_string())?;
    let sturm = sturm_smallest(&t, n, 1e-14).map_err(|e| e.to_string())?;
    let tri_err = sturm
        .iter()
        .enumerate()
        .map(|(j, v)| (v - (2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos())).abs())
        .fold(0.0, f64::max);

    // 40 x 40 unknowns, no channels: H = Tx ⊗ I + I ⊗ (Ty + diag y²).
    let (x, cells, y_half, h_y) = (5.0, 41, 5.125, 0.25);
    let config = ModelConfig::new(1.0, vec![], XDomain::FullLine).map_err(|e| e.to_string())?;
    let mesh = XMesh::uniform(-x, x, cells, BoundaryCondition::Dirichlet).map_err(|e| e.to_string())?;
    let grid = Grid2D::new(mesh, y_half, h_y).map_err(|e| e.to_string())?;
    if grid.n_x() != 40 || grid.n_y() != 40 {
        return Err(format!("grid is {} x {}", grid.n_x(), grid.n_y()));
    }
    let h = assemble_h2d(&config, &grid).map_err(|e| e.to_string())?;
    let hx = 2.0 * x / cells as f64;
    let tx = DMatrix::from_fn(40, 40, |i, j| match i.abs_diff(j) {
        0 => 2.0 / (hx * hx),
        1 => -1.0 / (hx * hx),
        _ => 0.0,
    });
    let ty = DMatrix::from_fn(40, 40, |i, j| match i.abs_diff(j) {
        0 => {
            let y = -y_half + (i + 1) as f64 * h_y;
            2.0 / (h_y * h_y) + y * y
        }
        1 => -1.0 / (h_y * h_y),
        _ => 0.0,
    });
    let ex = SymmetricEigen::new(tx).eigenvalues;
    let ey = SymmetricEigen::new(ty).eigenvalues;
    let mut sums: Vec<f64> = ex.iter().flat_map(|a| ey.iter().map(move |b| a + b)).collect();
    sums.sort_by(f64::total_cmp);
    let count = 6;
    let lanczos = lowest_eigenvalues(&h, count, &EigenOptions::default()).map_err(|e| e.to_string())?;
    let kron_err = lanczos
        .iter()
        .zip(&sums)
        .map(|((v, _), s)| (v - s).abs())
        .fold(0.0, f64::max);
    let raw = lanczos_smallest(
        h.matrix(),
        count,
        &LanczosOptions {
            tol: 1e-9 * h.scale(),
            ..LanczosOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let ok = tri_err <= 1e-12 && kron_err <= 1e-8 && raw.orthogonality_loss <= 1e-10;
    Ok((
        ok,
        format!(
            "tridiagonal {tri_err:.1e}, Kronecker {kron_err:.1e}, orthogonality {:.1e}",
            raw.orthogonality_loss
        ),
    ))
}

struct Criterion<'a> {
    name: &'static str,
    budget: Duration,
    run: Box<dyn Fn() -> Check + 'a>,
}

fn main() -> ExitCode {
    let subcritical_scan = RefCell::new(None);
    let secs = Duration::from_secs;
    let criteria = vec![
        Criterion {
            name: "cutoff_conditions",
            budget: secs(10),
            run: Box::new(cutoff_conditions),
        },
        Criterion {
            name: "pre_normalization_mass",
            budget: secs(5),
            run: Box::new(pre_normalization_mass),
        },
        Criterion {
            name: "residual_identity",
            budget: secs(30),
            run: Box::new(residual_identity),
        },
        Criterion {
            name: "weyl_certificate_line",
            budget: secs(300),
            run: Box::new(weyl_certificate_line),
        },
        Criterion {
            name: "weyl_certificate_interval",
            budget: secs(300),
            run: Box::new(weyl_certificate_interval),
        },
        Criterion {
            name: "critical_coupling",
            budget: secs(20),
            run: Box::new(critical_coupling_check),
        },
        Criterion {
            name: "spectral_transition",
            budget: secs(900),
            run: Box::new(|| spectral_transition(&subcritical_scan)),
        },
        Criterion {
            name: "multi_channel_rule",
            budget: secs(60),
            run: Box::new(multi_channel_rule),
        },
        Criterion {
            name: "bracketing_consistency",
            budget: secs(120),
            run: Box::new(|| bracketing_consistency(&subcritical_scan)),
        },
        Criterion {
            name: "eigensolver_oracles",
            budget: secs(30),
            run: Box::new(eigensolver_oracles),
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:<26} {:>7.1}s / {:>3}s  {}{}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail,
            if in_budget { "" } else { " (over budget)" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
