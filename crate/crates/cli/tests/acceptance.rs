//! Acceptance checks, one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Failing criteria are reported but do not fail the run; set
//! `LTV_ACCEPTANCE_STRICT=1` to exit nonzero when any criterion fails.

use ltv_cli::config::TfaConfig;
use ltv_cli::pipeline::{compare_signal, predict_level, spwvd_options};
use ltv_core::channel::{sample_multipath, ChannelModel, DelayProfile, DiscreteKernel, ExperimentConfig};
use ltv_core::discretize::{build_channel_matrix, time_band_limiter, ChannelMatrix};
use ltv_core::linksim::{noise_statistics, project_noise, qpsk_ber, run_link, Constellation, LinkConfig};
use ltv_core::manifest::RunManifest;
use ltv_core::rng::{complex_gaussian, seeded};
use ltv_core::spectral::{prolate_svd, svd, verify_singular_triple, SvdResult};
use ltv_core::tfa::{compare_ridge_to_bubble, ridge_extract, rspwvd};
use ltv_core::wkb::{
    energetic_deviation, magnitude_grid_with, quantized_levels_with, theorem1_sigmas, theorem1_solution,
    wigner_symbol, AreaFunction, Bubble, PowerGradient, TFGrid, DEFAULT_OVERSAMPLE,
};
use ltv_core::Complex64;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

const N: usize = 256;
const SEEDS: u64 = 20;
const INDICES: [usize; 3] = [25, 40, 72];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, secs: f64, o: Outcome) -> bool {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id}. {name}: {} ({secs:.1} s)", o.detail);
    o.pass
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Everything the standard-configuration criteria need for one seed.
struct Paper {
    model: ChannelModel,
    h: ChannelMatrix,
    svd: SvdResult,
    grid: TFGrid,
}

fn paper(seed: u64) -> Paper {
    let model = sample_multipath(&ExperimentConfig::paper(seed)).unwrap();
    let h = build_channel_matrix(&model, N).unwrap();
    let svd = svd(&h).unwrap();
    let grid = magnitude_grid_with(&model, N, 1.0, DEFAULT_OVERSAMPLE).unwrap();
    Paper { model, h, svd, grid }
}

fn two_path(n: usize) -> ChannelModel {
    let one = Complex64::new(1.0, 0.0);
    ChannelModel::LineSpread {
        g: DelayProfile::from_masses(0.0, 1.0, &[(0.0, one), (2.0, one)]).unwrap(),
        mu: 1.0 / n as f64,
        f0: 0.0,
    }
}

fn criterion1() -> Outcome {
    let model = two_path(N);
    let h = build_channel_matrix(&model, N).unwrap();
    let numeric = svd(&h).unwrap().sigmas;
    let mut closed = theorem1_sigmas(&model, N).unwrap();
    closed.sort_by(|a, b| b.total_cmp(a));
    let rel: Vec<f64> = closed
        .iter()
        .zip(&numeric)
        .map(|(c, s)| (c - s).abs() / s.max(f64::MIN_POSITIVE))
        .collect();
    let mean_rel = mean(&rel);

    // Largest triple residual over all closed-form frequencies, per N.
    let mut worst = Vec::new();
    for n in [64usize, 128, 256] {
        let model = two_path(n);
        let h = build_channel_matrix(&model, n).unwrap();
        let mut r = 0.0f64;
        let mut s1 = 0.0f64;
        for i in 0..n {
            let tr = theorem1_solution(&model, i as f64 / n as f64, n).unwrap();
            let (a, b) = verify_singular_triple(&h, &tr.u, &tr.v, tr.sigma).unwrap();
            r = r.max(a).max(b);
            s1 = s1.max(tr.sigma);
        }
        worst.push((n, r, r / s1));
    }
    let decreasing = worst.windows(2).all(|w| w[1].1 < w[0].1);
    let rel_256 = worst[2].2;
    Outcome {
        pass: mean_rel <= 0.05 && rel_256 <= 1e-2 && decreasing,
        detail: format!(
            "mean rel. sigma error {mean_rel:.4} (<= 0.05); residual/sigma_1 at N=64,128,256: {:.4}, {:.4}, {:.4} (<= 0.01, decreasing: {decreasing})",
            worst[0].2, worst[1].2, worst[2].2
        ),
    }
}

struct Criterion2 {
    quartile_dev: [Vec<f64>; 3],
    quartile_area: [Vec<f64>; 3],
    level_dev: Vec<f64>,
    level_median: Vec<f64>,
}

fn criterion2_seed(p: &Paper, acc: &mut Criterion2) {
    let area = AreaFunction::new(&p.grid);
    let sigmas = &p.svd.sigmas;
    // Quartiles of the numeric spectrum (descending order).
    for (q, frac) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let lambda = sigmas[(frac * (N - 1) as f64).round() as usize];
        let count = sigmas.iter().filter(|&&s| s >= lambda).count() as f64;
        let a = area.eval(lambda);
        acc.quartile_dev[q].push((count - a).abs());
        acc.quartile_area[q].push(a);
    }
    let levels = quantized_levels_with(&area, p.grid.max()).unwrap();
    let dev: Vec<f64> = levels
        .iter()
        .filter(|l| l.n < N)
        .map(|l| (l.sigma - sigmas[l.n]).abs() / sigmas[l.n])
        .collect();
    acc.level_dev.push(mean(&dev));
    acc.level_median.push(median(&dev));
}

fn criterion2_outcome(acc: &Criterion2) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (q, name) in ["25%", "50%", "75%"].iter().enumerate() {
        let dev = mean(&acc.quartile_dev[q]);
        let a = mean(&acc.quartile_area[q]);
        let tol = (0.1 * a).max(2.0);
        pass &= dev <= tol;
        parts.push(format!("{name}: |#-A| {dev:.2} vs {tol:.2}"));
    }
    let lvl = mean(&acc.level_dev);
    pass &= lvl <= 0.10;
    Outcome {
        pass,
        detail: format!(
            "{}; area-rule levels mean rel. deviation {lvl:.3e} (<= 0.10), median per level {:.4}",
            parts.join(", "),
            mean(&acc.level_median)
        ),
    }
}

/// Ridge distance per index and the envelope correlation at index 40.
fn criteria34_seed(p: &Paper) -> ([f64; 3], f64) {
    let grad = PowerGradient::new(&p.grid);
    let cfg = TfaConfig::default();
    let mut dist = [f64::INFINITY; 3];
    let mut r40 = f64::NAN;
    for (k, &i) in INDICES.iter().enumerate() {
        let pred = predict_level(&p.grid, &grad, p.svd.sigmas[i - 1]).unwrap();
        let c = compare_signal(&p.svd.left(i - 1), 1.0, &pred, None, &cfg).unwrap();
        if let Some(r) = c.metrics.ridge {
            dist[k] = r.mean_distance;
        }
        if i == 40 {
            r40 = c.metrics.amplitude.map_or(f64::NAN, |a| a.pearson);
        }
    }
    (dist, r40)
}

fn criterion5_seed(p: &Paper) -> f64 {
    let k = wigner_symbol(&p.h).unwrap();
    let h2 = magnitude_grid_with(&p.model, N, 1.0, 1).unwrap().map(|v| v * v);
    assert!(k.same_axes(&h2));
    energetic_deviation(&k, &h2, 0.9).unwrap()
}

fn criterion6() -> Outcome {
    let w = 1.0 / 16.0;
    let h = time_band_limiter(N, w).unwrap();
    let count = svd(&h).unwrap().sigmas.iter().filter(|&&s| s > 0.5).count();
    let s = prolate_svd(N, w).unwrap();
    // The support of the limiter's symbol: all of time, |f| < w. Only the
    // sides at the block ends lie on the window edge.
    let ts: Vec<f64> = (0..=N).map(|k| k as f64 - 0.5).collect();
    let mut polyline: Vec<(f64, f64)> = ts.iter().map(|&t| (t, -w)).collect();
    polyline.extend(ts.iter().rev().map(|&t| (t, w)));
    let on_edge = polyline.iter().map(|p| p.0 == ts[0] || p.0 == ts[N]).collect();
    let bubble = Bubble {
        polyline,
        on_edge,
        level: 0.5,
        area: 2.0 * w * N as f64,
        hole: false,
        clipped: true,
        turning_points: Vec::new(),
    };
    let cfg = TfaConfig::default();
    let mut areas = Vec::new();
    for i in [1usize, 8, 16] {
        let d = rspwvd(&s.right(i - 1), &spwvd_options(&cfg, N, 1.0)).unwrap();
        let ridge = ridge_extract(&d, cfg.ridge_threshold).unwrap();
        areas.push(compare_ridge_to_bubble(&ridge, &bubble).unwrap().ridge_area);
    }
    let nested = areas.windows(2).all(|a| a[1] > a[0]);
    let count_ok = count.abs_diff(32) <= 1;
    Outcome {
        pass: nested && count_ok,
        detail: format!(
            "#{{sigma > 0.5}} = {count} (32 +- 1); ridge areas of v1, v8, v16: {:.2}, {:.2}, {:.2} (increasing: {nested})",
            areas[0], areas[1], areas[2]
        ),
    }
}

fn criterion7() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    // Noiseless transmission over a paper channel and the identity.
    let channel = sample_multipath(&ExperimentConfig::paper(0)).unwrap();
    for (name, model, k) in [("paper", &channel, 64usize), ("identity", &ChannelModel::identity(), 256)] {
        for c in [Constellation::Qpsk, Constellation::Qam16] {
            let cfg = LinkConfig::new(N, k, c, 0.0, 4);
            let r = run_link(model, &cfg).unwrap();
            pass &= r.bit_errors == 0;
            if r.bit_errors != 0 {
                parts.push(format!("noiseless {name} {c:?}: {} bit errors", r.bit_errors));
            }
        }
    }
    parts.push("noiseless BER 0".into());

    // QPSK over the identity channel against Q(sqrt(Es/N0)).
    for db in [0.0, 6.0, 10.0] {
        let mut cfg = LinkConfig::new(64, 64, Constellation::Qpsk, 10f64.powf(-db / 10.0), 1600);
        cfg.seeds.noise = 1000 + db as u64;
        let r = run_link(&ChannelModel::identity(), &cfg).unwrap();
        let p = qpsk_ber(10f64.powf(db / 10.0));
        let band = 3.0 * (p * (1.0 - p) / r.bits as f64).sqrt();
        let ok = (r.ber - p).abs() <= band && r.symbols >= 100_000;
        pass &= ok;
        parts.push(format!("{db} dB: {:.3e} vs {p:.3e} +- {band:.1e}", r.ber));
    }

    // Noise after projection onto the left singular vectors.
    let s = svd(&build_channel_matrix(&channel, N).unwrap()).unwrap();
    let n0 = 0.5;
    let (corr, var) = noise_statistics(&project_noise(&s, 16, n0, 20_000, 7));
    let mut worst_corr = 0.0f64;
    for a in 0..16 {
        for b in 0..16 {
            if a != b {
                worst_corr = worst_corr.max(corr[(a, b)]);
            }
        }
    }
    let worst_var = var.iter().map(|v| (v / n0 - 1.0).abs()).fold(0.0, f64::max);
    pass &= worst_corr < 0.05 && worst_var <= 0.05;
    parts.push(format!("noise |corr| max {worst_corr:.3} (< 0.05), variance off by {worst_var:.3} (<= 0.05)"));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn adjoint_error(apply: impl Fn(&[Complex64]) -> Vec<Complex64>, adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>, n: usize, m: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let x: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let y: Vec<Complex64> = (0..m).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let hx = apply(&x);
    let hy = adjoint(&y);
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(p, q)| p * q.conj()).sum::<Complex64>();
    let norm = |a: &[Complex64]| a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (dot(&hx, &y) - dot(&x, &hy)).norm() / (norm(&hx) * norm(&y)).max(norm(&x) * norm(&hy))
}

fn run_ltv(args: &[&str], out: &Path) -> RunManifest {
    let st = Command::new(env!("CARGO_BIN_EXE_ltv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(st.status.success(), "ltv {args:?}: {}", String::from_utf8_lossy(&st.stderr));
    let path = String::from_utf8(st.stdout).unwrap();
    RunManifest::load(Path::new(path.trim())).unwrap()
}

/// Runs the whole pipeline into `root` and returns every manifest.
fn pipeline(root: &Path) -> Vec<(String, Vec<u8>, RunManifest)> {
    let p = |s: &str| root.join(s);
    let link_cfg = p("link.json");
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(
        &link_cfg,
        r#"{"n": 256, "k": 96, "constellation": "qpsk", "n0": 0.1, "seeds": {"symbols": 3, "noise": 4}, "num_blocks": 8}"#,
    )
    .unwrap();
    let s = |q: &Path| q.to_str().unwrap().to_string();
    let model = s(&p("synth/model.json"));
    let svd_file = s(&p("svd/svd.ltvm"));
    let steps: Vec<(&str, Vec<String>)> = vec![
        ("synth", vec!["synth".into(), "--seed".into(), "3".into()]),
        ("svd", vec!["svd".into(), "--model".into(), model.clone()]),
        (
            "predict",
            vec![
                "predict".into(),
                "--model".into(),
                model.clone(),
                "--indices".into(),
                "25,40,72".into(),
                "--source".into(),
                "svd".into(),
                "--svd".into(),
                svd_file.clone(),
            ],
        ),
        (
            "compare",
            vec!["compare".into(), "--svd".into(), svd_file.clone(), "--predictions".into(), s(&p("predict"))],
        ),
        ("tfa", vec!["tfa".into(), "--svd".into(), svd_file.clone(), "--index".into(), "40".into()]),
        (
            "link",
            vec!["link".into(), "--model".into(), model.clone(), "--config".into(), s(&link_cfg), "--sweep".into(), "0,6".into()],
        ),
        ("area-rule", vec!["area-rule".into(), "--model".into(), model, "--svd".into(), svd_file]),
    ];
    steps
        .into_iter()
        .map(|(dir, args)| {
            let out = p(dir);
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let m = run_ltv(&refs, &out);
            let bytes = std::fs::read(out.join(m.file_name())).unwrap();
            (dir.to_string(), bytes, m)
        })
        .collect()
}

fn criterion8(papers: &[Paper]) -> Outcome {
    let mut recon = 0.0f64;
    let mut adj = 0.0f64;
    for (seed, p) in papers.iter().enumerate() {
        let fro = p.h.frobenius_norm();
        let r = (p.svd.reconstruct() - &p.h.entries).norm() / fro;
        recon = recon.max(r);
        adj = adj.max(adjoint_error(|x| p.h.apply(x), |y| p.h.apply_adjoint(y), N, N, seed as u64));
        let k = DiscreteKernel::new(&p.model, 64, 0.0);
        adj = adj.max(adjoint_error(|x| k.apply(x), |y| k.apply_adjoint(y), 3 * N, 3 * N, 100 + seed as u64));
    }

    let base = std::env::temp_dir().join(format!("ltv-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let first = pipeline(&base.join("a"));
    let second = pipeline(&base.join("b"));
    let mut mismatched = Vec::new();
    let mut artifacts = 0;
    for ((dir, bytes_a, ma), (_, bytes_b, mb)) in first.iter().zip(&second) {
        artifacts += ma.artifacts.len();
        if bytes_a != bytes_b || ma.artifacts != mb.artifacts {
            mismatched.push(dir.clone());
        }
        if !ma.verify(&base.join("a").join(dir)).unwrap().is_empty() {
            mismatched.push(format!("{dir} (stale)"));
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    let deterministic = mismatched.is_empty();
    Outcome {
        pass: recon <= 1e-8 && adj <= 1e-10 && deterministic,
        detail: format!(
            "SVD reconstruction {recon:.2e} ||H||_F (<= 1e-8); adjoint identity {adj:.2e} (<= 1e-10); {} manifests, {artifacts} artifacts identical on rerun: {deterministic}{}",
            first.len(),
            if deterministic { String::new() } else { format!(" (differs: {})", mismatched.join(", ")) }
        ),
    }
}

fn main() {
    let mut all = true;

    let t = Instant::now();
    let o = criterion1();
    all &= report(1, "Theorem-1 exactness", t.elapsed().as_secs_f64(), o);

    let t = Instant::now();
    let papers: Vec<Paper> = (0..SEEDS).map(paper).collect();
    let setup = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut c2 = Criterion2 {
        quartile_dev: Default::default(),
        quartile_area: Default::default(),
        level_dev: Vec::new(),
        level_median: Vec::new(),
    };
    for p in &papers {
        criterion2_seed(p, &mut c2);
    }
    let mut o = criterion2_outcome(&c2);
    o.detail += &format!("; {SEEDS} seeds, setup {setup:.1} s");
    all &= report(2, "EBK area rule", t.elapsed().as_secs_f64(), o);

    let t = Instant::now();
    let per_seed: Vec<([f64; 3], f64)> = papers.iter().map(criteria34_seed).collect();
    let t34 = t.elapsed().as_secs_f64();
    let passing = per_seed.iter().filter(|(d, _)| d.iter().all(|&x| x <= 2.0)).count();
    let per_index: Vec<String> = (0..3)
        .map(|k| {
            let d: Vec<f64> = per_seed.iter().map(|s| s.0[k]).collect();
            let ok = d.iter().filter(|&&x| x <= 2.0).count();
            format!("u{}: median {:.2}, {ok}/{SEEDS} within 2", INDICES[k], median(&d))
        })
        .collect();
    all &= report(
        3,
        "Contour tracking",
        t34,
        Outcome {
            pass: passing as f64 >= 0.8 * SEEDS as f64,
            detail: format!("{passing}/{SEEDS} seeds with all three indices within 2 cells (need 80%); {}", per_index.join("; ")),
        },
    );

    let r: Vec<f64> = per_seed.iter().map(|s| if s.1.is_nan() { 0.0 } else { s.1 }).collect();
    let missing = per_seed.iter().filter(|s| s.1.is_nan()).count();
    let med = median(&r);
    all &= report(
        4,
        "Amplitude model",
        t34,
        Outcome {
            pass: med >= 0.85,
            detail: format!(
                "u40 envelope Pearson r median {med:.3} (>= 0.85), min {:.3}, max {:.3}, {} of {SEEDS} seeds >= 0.85, {missing} without a model",
                r.iter().copied().fold(f64::INFINITY, f64::min),
                r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                r.iter().filter(|&&x| x >= 0.85).count()
            ),
        },
    );

    let t = Instant::now();
    let dev: Vec<f64> = papers.iter().map(criterion5_seed).collect();
    let worst = dev.iter().copied().fold(0.0, f64::max);
    all &= report(
        5,
        "Stationary-phase check",
        t.elapsed().as_secs_f64(),
        Outcome {
            pass: worst <= 0.15,
            detail: format!(
                "Wigner symbol vs |H|^2 relative L2 on 90% energy: max {worst:.4}, median {:.4} over {SEEDS} seeds (<= 0.15)",
                median(&dev)
            ),
        },
    );

    let t = Instant::now();
    let o = criterion6();
    all &= report(6, "Prolate nesting", t.elapsed().as_secs_f64(), o);

    let t = Instant::now();
    let o = criterion7();
    all &= report(7, "Link simulation", t.elapsed().as_secs_f64(), o);

    let t = Instant::now();
    let o = criterion8(&papers);
    all &= report(8, "Infrastructure", t.elapsed().as_secs_f64(), o);

    println!("acceptance: {}", if all { "all criteria pass" } else { "some criteria fail" });
    if !all && std::env::var_os("LTV_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
