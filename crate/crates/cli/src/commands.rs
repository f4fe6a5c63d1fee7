use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use lowrank_dmd::bench::RNG_DESCRIPTION;
use lowrank_dmd::io::{fmt_f64, read_vector_csv, write_matrix_csv};
use lowrank_dmd::{
    amplitudes, build_data_matrices, compute_modes, fit_exact_dmd, fit_optimal_lowrank_dmd, fit_projected_dmd,
    fit_truncated_exact_dmd, generate_snapshots, generate_toy_operator, load_snapshots, reconstruct_from_modes,
    residual_norm, run_benchmark, save_snapshots, simulate_reduced, validate_rank_assumptions, verify_eigenpairs,
    BenchConfig, DataMatrices, DmdOperator, Error, FitOptions, ModeVariant, Setting, SnapshotSet,
};
use nalgebra::DVector;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::{
    BenchArgs, FitArgs, GenerateArgs, Global, MethodArg, ModesArgs, PathArg, SettingArg, SimulateArgs, ValidateArgs,
    VariantArg,
};

fn fit_options(g: &Global) -> FitOptions {
    FitOptions {
        svd_tol: g.svd_tol,
        strict_rank: g.strict_rank,
        clamp_rank: false,
    }
}

fn load(path: &Path) -> CliResult<(SnapshotSet, DataMatrices)> {
    let s = load_snapshots(path)?;
    let d = build_data_matrices(&s);
    info!(
        "loaded {} trajectories of length {} in R^{}",
        s.num_trajectories(),
        s.horizon(),
        s.dim()
    );
    Ok((s, d))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<PathBuf> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    body(&mut w).and_then(|_| w.flush()).map_err(err)?;
    Ok(path.to_path_buf())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn theta(arg: &str, s: &SnapshotSet) -> CliResult<DVector<f64>> {
    if arg == "first" {
        return Ok(s.first_state().clone());
    }
    let v = read_vector_csv(arg)?;
    if v.len() != s.dim() {
        return Err(CliError::Usage(format!(
            "initial condition in {arg} has dimension {}, data have {}",
            v.len(),
            s.dim()
        )));
    }
    Ok(v)
}

fn variant(v: VariantArg) -> ModeVariant {
    match v {
        VariantArg::AsStated => ModeVariant::AsStated,
        VariantArg::Exact => ModeVariant::ExactReconstruction,
    }
}

/// `‖left·right‖_F` without forming the product.
fn operator_norm(op: &DmdOperator) -> f64 {
    let lt_l = op.left.transpose() * &op.left;
    let r_rt = &op.right * op.right.transpose();
    lt_l.component_mul(&r_rt).sum().max(0.0).sqrt()
}

pub fn fit(g: &Global, a: &FitArgs) -> CliResult<()> {
    let (_, d) = load(&a.input)?;
    let opts = fit_options(g);
    let need_rank = || {
        a.rank
            .ok_or_else(|| CliError::Usage(format!("--rank is required for method {:?}", a.method).to_lowercase()))
    };
    let op = match a.method {
        MethodArg::Optimal => fit_optimal_lowrank_dmd(&d, need_rank()?, &opts)?.0,
        MethodArg::Truncated => fit_truncated_exact_dmd(&d, need_rank()?, &opts)?,
        MethodArg::Projected => fit_projected_dmd(&d, need_rank()?, &opts)?,
        MethodArg::Exact => fit_exact_dmd(&d, &opts)?,
    };
    let residual = residual_norm(&op, &d)?;
    let y_norm = d.y.norm();
    let ranks = validate_rank_assumptions(&d, g.svd_tol)?;

    create_dir(&a.out)?;
    let mut manifest = RunManifest::new("fit", g.seed);
    manifest.inputs.push(a.input.clone());
    manifest
        .param("method", op.method.name())
        .param("rank", a.rank)
        .param("svd_tol", g.svd_tol)
        .param("strict_rank", g.strict_rank);
    manifest
        .outputs
        .push(write_file(&a.out.join("left.csv"), |w| write_matrix_csv(&op.left, w))?);
    manifest.outputs.push(write_file(&a.out.join("right.csv"), |w| {
        write_matrix_csv(&op.right, w)
    })?);
    manifest.outputs.push(write_file(&a.out.join("residual.csv"), |w| {
        writeln!(w, "residual,y_norm,relative_residual")?;
        let rel = if y_norm > 0.0 { residual / y_norm } else { 0.0 };
        writeln!(w, "{},{},{}", fmt_f64(residual), fmt_f64(y_norm), fmt_f64(rel))
    })?);
    manifest.outputs.push(write_file(&a.out.join("rank.csv"), |w| {
        writeln!(w, "n,m,rank_x,rank_y,x_full_rank,requested_rank,declared_rank")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            ranks.n,
            ranks.m,
            ranks.rank_x,
            ranks.rank_y,
            ranks.rank_x == ranks.m,
            a.rank.map(|k| k.to_string()).unwrap_or_default(),
            op.declared_rank
        )
    })?);
    let manifest_path = a.out.join("manifest.json");
    manifest.outputs.push(manifest_path.clone());
    manifest.write(&manifest_path)?;

    println!(
        "{} rank {}: residual {:.6e} (relative {:.6e})",
        op.method,
        op.declared_rank,
        residual,
        if y_norm > 0.0 { residual / y_norm } else { 0.0 }
    );
    Ok(())
}

pub fn modes(g: &Global, a: &ModesArgs) -> CliResult<()> {
    let (s, d) = load(&a.input)?;
    let (op, factors) = fit_optimal_lowrank_dmd(&d, a.rank, &fit_options(g))?;
    let modes = compute_modes(&factors, variant(a.variant), g.svd_tol)?;
    let theta = theta(&a.theta, &s)?;
    let amps = amplitudes(&modes, &theta, a.horizon)?;
    let a_norm = operator_norm(&op);
    let report = verify_eigenpairs(&modes, &op, 1e-8 * a_norm)?;

    create_dir(&a.out)?;
    let mut manifest = RunManifest::new("modes", g.seed);
    manifest.inputs.push(a.input.clone());
    manifest
        .param("rank", a.rank)
        .param("variant", modes.variant.to_string())
        .param("theta", &a.theta)
        .param("horizon", a.horizon)
        .param("svd_tol", g.svd_tol)
        .param("strict_rank", g.strict_rank);
    let k = modes.len();
    manifest.outputs.push(write_file(&a.out.join("eigenvalues.csv"), |w| {
        writeln!(w, "lambda_re,lambda_im")?;
        for l in &modes.eigenvalues {
            writeln!(w, "{},{}", fmt_f64(l.re), fmt_f64(l.im))?;
        }
        Ok(())
    })?);
    manifest.outputs.push(write_file(&a.out.join("modes.csv"), |w| {
        let header: Vec<String> = (0..k).map(|i| format!("phi{i}_re,phi{i}_im")).collect();
        writeln!(w, "{}", header.join(","))?;
        for r in 0..modes.modes.nrows() {
            let row: Vec<String> = modes
                .modes
                .row(r)
                .iter()
                .map(|v| format!("{},{}", fmt_f64(v.re), fmt_f64(v.im)))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?);
    manifest.outputs.push(write_file(&a.out.join("amplitudes.csv"), |w| {
        let header: Vec<String> = (0..k).map(|i| format!("nu{i}_re,nu{i}_im")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for t in 0..amps.horizon() {
            let row: Vec<String> = amps
                .values
                .row(t)
                .iter()
                .map(|v| format!("{},{}", fmt_f64(v.re), fmt_f64(v.im)))
                .collect();
            writeln!(w, "{},{}", t + 1, row.join(","))?;
        }
        Ok(())
    })?);
    manifest.outputs.push(write_file(&a.out.join("eigenpairs.csv"), |w| {
        writeln!(w, "mode,residual,tolerance,passed")?;
        for (i, (r, ok)) in report.residuals.iter().zip(report.passed()).enumerate() {
            writeln!(w, "{i},{},{},{ok}", fmt_f64(*r), fmt_f64(report.tolerance))?;
        }
        Ok(())
    })?);
    let manifest_path = a.out.join("manifest.json");
    manifest.outputs.push(manifest_path.clone());
    manifest.write(&manifest_path)?;

    println!(
        "{k} modes ({} variant); max eigenpair residual {:.3e} (tolerance {:.3e}): {}",
        modes.variant,
        report.max_residual(),
        report.tolerance,
        if report.all_passed() { "pass" } else { "fail" }
    );
    Ok(())
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> CliResult<()> {
    let (s, d) = load(&a.input)?;
    let (_, factors) = fit_optimal_lowrank_dmd(&d, a.rank, &fit_options(g))?;
    let theta = theta(&a.theta, &s)?;
    let trajectory = match a.path {
        PathArg::Reduced => simulate_reduced(&factors, &theta, a.horizon)?,
        PathArg::Modal => {
            let modes = compute_modes(&factors, variant(a.variant), g.svd_tol)?;
            let rec = reconstruct_from_modes(&modes, &amplitudes(&modes, &theta, a.horizon)?)?;
            if let Some(t) = rec
                .trajectory
                .states
                .iter()
                .position(|x| !x.iter().all(|v| v.is_finite()))
            {
                return Err(Error::Diverged {
                    t: t + 1,
                    norm: f64::INFINITY,
                }
                .into());
            }
            rec.trajectory
        }
    };

    create_dir(&a.out)?;
    let mut manifest = RunManifest::new("simulate", g.seed);
    manifest.inputs.push(a.input.clone());
    manifest
        .param("rank", a.rank)
        .param("horizon", a.horizon)
        .param("path", format!("{:?}", a.path).to_lowercase())
        .param("variant", variant(a.variant).to_string())
        .param("theta", &a.theta)
        .param("stride", a.stride)
        .param("svd_tol", g.svd_tol)
        .param("strict_rank", g.strict_rank);
    let out = trajectory.subsample(a.stride);
    manifest
        .outputs
        .push(write_file(&a.out.join("trajectory.csv"), |w| out.write_csv(w))?);
    let manifest_path = a.out.join("manifest.json");
    manifest.outputs.push(manifest_path.clone());
    manifest.write(&manifest_path)?;

    let last = out.states.last().map_or(0.0, |x| x.norm());
    println!("{} states written; final state norm {last:.6e}", out.len());
    Ok(())
}

pub fn bench(g: &Global, a: &BenchArgs) -> CliResult<()> {
    let mut text = String::new();
    if let Some(path) = &a.config {
        text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        text.push('\n');
    } else if g.seed.is_none() {
        return Err(CliError::Usage(
            "bench needs --seed (or a --config file with a seed)".into(),
        ));
    }
    // flags override the file: later keys win
    let overrides = [
        ("n", a.n.map(|v| v.to_string())),
        ("r", a.r.map(|v| v.to_string())),
        ("m", a.m.map(|v| v.to_string())),
        ("settings", a.settings.clone()),
        ("methods", a.methods.clone()),
        ("k_values", a.k_values.clone()),
        ("seed", g.seed.map(|v| v.to_string())),
        ("timing", a.timing.then(|| "true".to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            text.push_str(&format!("{key} = {v}\n"));
        }
    }
    let cfg = BenchConfig::parse(&text)?;
    let csv_path = a
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("bench.csv"));
    if let Some(dir) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }

    let result = run_benchmark(&cfg)?;

    let mut manifest = RunManifest::new("bench", Some(cfg.seed));
    if let Some(c) = &a.config {
        manifest.inputs.push(c.clone());
    }
    manifest
        .param("config", cfg.to_kv_string())
        .param("rng", RNG_DESCRIPTION);
    manifest.outputs.push(write_file(&csv_path, |w| result.write_csv(w))?);
    manifest
        .outputs
        .push(write_file(&sibling(&csv_path, "summary.csv"), |w| {
            writeln!(w, "setting,y_norm,rank_x,rank_y,companion_residual")?;
            for s in &result.summaries {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s.setting,
                    fmt_f64(s.y_norm),
                    s.rank_x,
                    s.rank_y,
                    fmt_f64(s.companion_residual)
                )?;
            }
            Ok(())
        })?);
    let manifest_path = sibling(&csv_path, "manifest.json");
    manifest.outputs.push(manifest_path.clone());
    manifest.write(&manifest_path)?;

    let failed: Vec<_> = result.rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        warn!(
            "{}/{} k = {}: {}",
            r.setting,
            r.method,
            r.k,
            r.error.as_deref().unwrap_or("")
        );
    }
    for s in &result.summaries {
        println!(
            "setting {}: ||Y|| = {:.4e}, rank X = {}, rank Y = {}, companion residual = {:.3e}",
            s.setting, s.y_norm, s.rank_x, s.rank_y, s.companion_residual
        );
    }
    println!(
        "{} rows written to {} ({} failed fits)",
        result.rows.len(),
        csv_path.display(),
        failed.len()
    );
    Ok(())
}

pub fn generate(g: &Global, a: &GenerateArgs) -> CliResult<()> {
    let seed = g.seed.unwrap_or(BenchConfig::default().seed);
    let setting = match a.setting {
        SettingArg::I => Setting::I,
        SettingArg::Ii => Setting::II,
        SettingArg::Iii => Setting::III,
    };
    let model = generate_toy_operator(a.n, a.r, seed)?;
    let snapshots = generate_snapshots(&model, setting, a.m, seed)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_snapshots(&snapshots, &a.out)?;

    let mut manifest = RunManifest::new("generate", Some(seed));
    manifest
        .param("setting", setting.name())
        .param("n", a.n)
        .param("r", a.r)
        .param("m", a.m)
        .param("rng", RNG_DESCRIPTION);
    let manifest_path = sibling(&a.out, "manifest.json");
    manifest.outputs.push(a.out.clone());
    manifest.outputs.push(manifest_path.clone());
    manifest.write(&manifest_path)?;
    println!(
        "setting {setting}: {} trajectories of length {} in R^{} written to {}",
        snapshots.num_trajectories(),
        snapshots.horizon(),
        snapshots.dim(),
        a.out.display()
    );
    Ok(())
}

pub fn validate(g: &Global, a: &ValidateArgs) -> CliResult<()> {
    let (s, d) = load(&a.input)?;
    let report = validate_rank_assumptions(&d, g.svd_tol)?;
    println!("trajectories: {}", s.num_trajectories());
    println!("horizon: {}", s.horizon());
    println!("n: {}", report.n);
    println!("m: {}", report.m);
    println!("rank X: {}", report.rank_x);
    println!("rank Y: {}", report.rank_y);
    println!("m <= n: {}", report.m_le_n());
    println!("X full column rank: {}", report.rank_x == report.m);
    println!("Y full column rank: {}", report.rank_y == report.m);
    println!("assumptions hold: {}", report.assumptions_hold());
    if g.strict_rank && !report.assumptions_hold() {
        return Err(Error::RankDeficient {
            what: "X",
            rank: report.rank_x,
            expected: report.m,
        }
        .into());
    }
    Ok(())
}
