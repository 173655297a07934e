//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line to the real stdout (not the captured test output) before asserting.
//!
//! The desk-scale pipeline is shared by criteria 5, 7 and 8 and the
//! self-consistency heal by criteria 4, 8 and 9; whichever test gets there
//! first runs it. Artifacts stay under the cargo target tmp dir.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use coacs_cli::config::{PipelineConfig, Scale};
use coacs_cli::manifest::{RunManifest, MANIFEST_FILE};
use coacs_cli::pipeline::{replay, run_pipeline, HealJob, PipelineSummary};
use coacs_cli::report::{first_signal_minimum, VariantScores, HEALED_DIRECT, HEALED_PHASED, RAW_PHASED};
use coacs_core::coacs::{data_objective, support_penalty, HealProblem, Objective, SmoothObjective, Terms};
use coacs_core::io::{read_real, write_real};
use coacs_core::simulate::{simulate_truth, ParticleConfig};
use coacs_core::{apply_beamstop, autocorr_support, HealConfig, HealOutput, RealGrid, SimConfig, SupportMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and budgets.
const GRADIENT_REL_TOL: f64 = 1e-6;
const GRADIENT_INSTANCES: usize = 120;
const CONVEXITY_SLACK: f64 = 1e-9;
const CONVEXITY_PAIRS: usize = 1000;
const ORACLE_MASKS: usize = 50;
const SELF_CONSISTENCY_TOL: f64 = 1e-3;
const SELF_CONSISTENCY_BUDGET: Duration = Duration::from_secs(300);
const PROPERTY_BUDGET: Duration = Duration::from_secs(60);
const DESK_BUDGET: Duration = Duration::from_secs(2 * 3600);
const DESK_DIRECT_OVER_RAW: f64 = 0.5;
const PEAK_OVER_MEDIAN: f64 = 2.0;
const PEAK_NEIGHBOURS: usize = 5;
const PEAK_SEARCH: usize = 2;
const FULL_SCALE_TARGETS: [(&str, f64); 3] = [(RAW_PHASED, 0.416), (HEALED_PHASED, 0.158), (HEALED_DIRECT, 0.098)];
const FULL_SCALE_TOL: f64 = 0.05;
const PLATEAU: f64 = 5e7;

fn verdict(criterion: u32, pass: bool, detail: &str) {
    let line = format!("criterion {criterion}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn artifacts(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn random_problem(rng: &mut ChaCha8Rng, l: f64) -> HealProblem {
    let n = 16;
    let density = rng.random_range(0.1..0.8);
    let scale = rng.random_range(1.0..20.0);
    let counts = RealGrid::from_fn(n, |_, _| {
        if rng.random_bool(density) {
            (rng.random::<f64>() * scale).floor()
        } else {
            0.0
        }
    });
    let side = rng.random_range(0..6usize);
    let (counts, beamstop) = if side == 0 {
        (counts, SupportMask::empty(n))
    } else {
        apply_beamstop(&counts, side).unwrap()
    };
    let s = rng.random_range(2..6usize);
    let acs = autocorr_support(&SupportMask::centered_square(n, s).unwrap()).unwrap();
    let r = if rng.random_bool(0.5) { 1.0 } else { 0.7 };
    HealProblem::new(counts, beamstop, acs, r, rng.random_range(1..4usize), l).unwrap()
}

fn random_step(rng: &mut ChaCha8Rng, p: &HealProblem) -> RealGrid {
    RealGrid::from_fn(p.n(), |i, j| p.y0[(i, j)] * rng.random_range(-1.5..1.5))
}

/// Richardson-extrapolated central differences (steps `1e-5` and half that,
/// relative to the local scale), taken on the problem translated to `y`.
/// Returns `max |fd - g| / max |g|`.
fn fd_error(f: impl Fn(&RealGrid, &HealProblem) -> (f64, RealGrid), y: &RealGrid, p: &HealProblem) -> f64 {
    let (_, g) = f(y, p);
    let mut moved = p.clone();
    moved.y0 = p.y0.zip_map(y, |a, b| a + b);
    let gmax = g.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for idx in 0..y.len() {
        let h = 1e-5 * moved.y0.as_slice()[idx].abs().max(p.y0.as_slice()[idx]);
        let central = |h: f64| {
            let mut plus = RealGrid::zeros(p.n());
            plus.as_mut_slice()[idx] = h;
            let minus = plus.map(|v| -v);
            (f(&plus, &moved).0 - f(&minus, &moved).0) / (2.0 * h)
        };
        let fd = (4.0 * central(0.5 * h) - central(h)) / 3.0;
        worst = worst.max((fd - g.as_slice()[idx]).abs());
    }
    if gmax > 0.0 {
        worst / gmax
    } else {
        worst
    }
}

#[test]
fn criterion_1_gradients() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for instance in 0..GRADIENT_INSTANCES {
        let l = [4.0, 1.0, 2f64.powi(-10)][instance % 3];
        let p = random_problem(&mut rng, l);
        let y = random_step(&mut rng, &p);
        worst = worst.max(fd_error(|y, q| data_objective(y, q, l).unwrap(), &y, &p));
        worst = worst.max(fd_error(|y, q| support_penalty(y, q, l, PLATEAU).unwrap(), &y, &p));
    }
    let took = start.elapsed();
    let pass = worst <= GRADIENT_REL_TOL && took < PROPERTY_BUDGET;
    verdict(1, pass, &format!("{GRADIENT_INSTANCES} instances, worst rel error {worst:.2e}, {took:.1?}"));
    assert!(pass);
}

#[test]
fn criterion_2_convexity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut pairs, mut failures, mut worst) = (0, 0, f64::NEG_INFINITY);
    while pairs < CONVEXITY_PAIRS {
        let l = [4.0, 1.0, 2f64.powi(-10)][pairs % 3];
        let p = random_problem(&mut rng, l);
        let mut obj = Objective::new(&p, l, PLATEAU, p.y0.as_slice().to_vec(), Terms::Both).unwrap();
        for _ in 0..25 {
            let a = random_step(&mut rng, &p);
            let b = random_step(&mut rng, &p);
            let mid = a.zip_map(&b, |x, y| 0.5 * (x + y));
            let fa = obj.evaluate(a.into_vec()).unwrap().value;
            let fb = obj.evaluate(b.into_vec()).unwrap().value;
            let fm = obj.evaluate(mid.into_vec()).unwrap().value;
            let excess = (fm - 0.5 * (fa + fb)) / (1.0 + fa.abs() + fb.abs());
            worst = worst.max(excess);
            if excess > CONVEXITY_SLACK {
                failures += 1;
            }
            pairs += 1;
        }
    }
    let took = start.elapsed();
    let pass = failures == 0 && took < PROPERTY_BUDGET;
    verdict(2, pass, &format!("{pairs} pairs, {failures} violations, worst relative excess {worst:.2e}, {took:.1?}"));
    assert!(pass);
}

#[test]
fn criterion_3_autocorrelation_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..ORACLE_MASKS {
        let n = rng.random_range(2..=32usize);
        let density = rng.random_range(0.01..0.3);
        let mask = SupportMask::from_fn(n, |_, _| rng.random_bool(density));
        let c = (n / 2) as isize;
        let pixels: Vec<(isize, isize)> = mask.indices().map(|(i, j)| (i as isize, j as isize)).collect();
        let mut oracle = SupportMask::empty(n);
        let mut fits = true;
        for &(ai, aj) in &pixels {
            for &(bi, bj) in &pixels {
                let (di, dj) = (ai - bi + c, aj - bj + c);
                if di < 0 || dj < 0 || di >= n as isize || dj >= n as isize {
                    fits = false;
                    continue;
                }
                oracle[(di as usize, dj as usize)] = true;
            }
        }
        match autocorr_support(&mask) {
            Ok(got) if fits && !pixels.is_empty() => mismatches += usize::from(got != oracle),
            Err(_) if !fits || pixels.is_empty() => {}
            _ => mismatches += 1,
        }
    }
    let took = start.elapsed();
    let pass = mismatches == 0;
    verdict(3, pass, &format!("{ORACLE_MASKS} masks, {mismatches} mismatches, {took:.1?}"));
    assert!(pass);
}

struct SelfConsistency {
    dir: PathBuf,
    input: RealGrid,
    output: Result<HealOutput, String>,
    took: Duration,
}

/// Noise-free, beamstop-free 64² pattern at 10⁶ photons, healed through the
/// `heal` job so that its manifest can be replayed.
fn self_consistency() -> &'static SelfConsistency {
    static RUN: OnceLock<SelfConsistency> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = artifacts("self_consistency");
        std::fs::create_dir_all(&dir).unwrap();
        let sim = SimConfig {
            n: 64,
            photon_budget: 1e6,
            beamstop_side: 0,
            patterns: 1,
            particle: ParticleConfig {
                circumdiameter: 10.0,
                sphere_diameter: 4.0,
                density_ratio: 50.0,
            },
            ..SimConfig::default()
        };
        let truth = simulate_truth(&sim).unwrap();
        let pattern = dir.join("pattern.grid");
        write_real(&pattern, &truth.intensity).unwrap();
        let job = HealJob {
            pattern,
            beamstop: None,
            support_side: 16,
            heal: HealConfig::default(),
        };
        let start = Instant::now();
        let output = job.run(&dir.join("heal"), true).map_err(|e| format!("{e:#}"));
        SelfConsistency {
            dir,
            input: truth.intensity,
            output,
            took: start.elapsed(),
        }
    })
}

#[test]
fn criterion_4_self_consistency() {
    let run = self_consistency();
    let (pass, detail) = match &run.output {
        Ok(out) => {
            let num: f64 = out.unwindowed.as_slice().iter().zip(run.input.as_slice()).map(|(a, b)| (a - b).abs()).sum();
            let rel = num / run.input.as_slice().iter().map(|v| v.abs()).sum::<f64>();
            (
                rel <= SELF_CONSISTENCY_TOL && run.took < SELF_CONSISTENCY_BUDGET,
                format!("relative L1 {rel:.3e} (tol {SELF_CONSISTENCY_TOL:e}), {:.1?}", run.took),
            )
        }
        Err(e) => (false, format!("heal failed: {e}")),
    };
    verdict(4, pass, &detail);
    assert!(pass);
}

struct DeskRun {
    summary: Result<PipelineSummary, String>,
    took: Duration,
}

fn desk() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = PipelineConfig::preset(Scale::Desk);
        let start = Instant::now();
        let summary = run_pipeline(&cfg, &artifacts("desk"), true).map_err(|e| format!("{e:#}"));
        DeskRun {
            summary,
            took: start.elapsed(),
        }
    })
}

fn score<'a>(scores: &'a [VariantScores], variant: &str) -> &'a VariantScores {
    scores.iter().find(|s| s.variant == variant).expect("variant scored")
}

#[test]
fn criterion_5_desk_ordering() {
    let run = desk();
    let (pass, detail) = match &run.summary {
        Ok(s) => {
            let raw = score(&s.scores, RAW_PHASED).mean;
            let phased = score(&s.scores, HEALED_PHASED).mean;
            let direct = score(&s.scores, HEALED_DIRECT).mean;
            (
                direct < phased && phased < raw && direct <= DESK_DIRECT_OVER_RAW * raw && run.took < DESK_BUDGET,
                format!("R raw-phased {raw:.3}, healed-phased {phased:.3}, healed-direct {direct:.3}, {:.1?}", run.took),
            )
        }
        Err(e) => (false, format!("pipeline failed: {e}")),
    };
    verdict(5, pass, &detail);
    assert!(pass);
}

#[test]
#[ignore = "full-scale reproduction, tens of hours"]
fn criterion_6_full_scale() {
    let cfg = PipelineConfig::preset(Scale::Full);
    let start = Instant::now();
    let summary = run_pipeline(&cfg, &artifacts("full"), true);
    let took = start.elapsed();
    let (pass, detail) = match &summary {
        Ok(s) => {
            let mut ok = true;
            let mut parts = Vec::new();
            for (variant, target) in FULL_SCALE_TARGETS {
                let r = score(&s.scores, variant).mean;
                ok &= (r - target).abs() <= FULL_SCALE_TOL;
                parts.push(format!("{variant} {r:.3} (target {target})"));
            }
            let per_pattern = took.as_secs_f64() / cfg.simulate.patterns as f64 / 60.0;
            parts.push(format!("{per_pattern:.1} min per pattern wall clock"));
            (ok, parts.join(", "))
        }
        Err(e) => (false, format!("pipeline failed: {e:#}")),
    };
    verdict(6, pass, &detail);
    assert!(pass);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

#[test]
fn criterion_7_radial_peak() {
    let run = desk();
    let cfg = PipelineConfig::preset(Scale::Desk);
    let n = cfg.simulate.n;
    let (pass, detail) = match &run.summary {
        Ok(s) => {
            let direct = score(&s.scores, HEALED_DIRECT);
            // start past the beamstop, where the true signal is known to fall
            let from = cfg.simulate.beamstop_side / 2 + 1;
            match first_signal_minimum(&direct.mean_truth, from, n) {
                None => (false, "no true-signal minimum found".to_string()),
                Some(minimum) => {
                    let r = |k: usize| direct.shell_mean.get(k).copied().flatten().unwrap_or(f64::NAN);
                    let lo = minimum.saturating_sub(PEAK_SEARCH);
                    let peak = (lo..=minimum + PEAK_SEARCH).max_by(|&a, &b| r(a).total_cmp(&r(b))).unwrap();
                    let local_max = r(peak) >= r(peak - 1) && r(peak) >= r(peak + 1);
                    let neighbours: Vec<f64> = (peak - PEAK_NEIGHBOURS..=peak + PEAK_NEIGHBOURS)
                        .filter(|&k| k != peak)
                        .map(r)
                        .collect();
                    let med = median(neighbours);
                    (
                        local_max && r(peak) >= PEAK_OVER_MEDIAN * med,
                        format!(
                            "true minimum at shell {minimum}, R peak at shell {peak} = {:.3}, neighbour median {med:.3}, ratio {:.2} (need {PEAK_OVER_MEDIAN})",
                            r(peak),
                            r(peak) / med
                        ),
                    )
                }
            }
        }
        Err(e) => (false, format!("pipeline failed: {e}")),
    };
    verdict(7, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_8_solver_robustness() {
    let sc = self_consistency();
    let dk = desk();
    let mut failures = Vec::new();
    let mut increases = 0;
    let mut steps = 0;
    match &sc.output {
        Ok(out) => {
            increases += out.endpoint_increases();
            steps += out.log.len();
        }
        Err(e) => failures.push(e.clone()),
    }
    match &dk.summary {
        Ok(s) => {
            increases += s.endpoint_increases;
            steps += s.heal_logs.iter().map(Vec::len).sum::<usize>();
        }
        Err(e) => failures.push(e.clone()),
    }
    let pass = increases == 0 && failures.is_empty();
    verdict(
        8,
        pass,
        &format!("{steps} continuation steps, {increases} endpoint increases, {} failed runs", failures.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let run = self_consistency();
    let (pass, detail) = match &run.output {
        Err(e) => (false, format!("original heal failed: {e}")),
        Ok(_) => {
            let first = run.dir.join("heal");
            let second = run.dir.join("replay");
            let replayed = RunManifest::read(&first.join(MANIFEST_FILE)).and_then(|m| replay(&m, &second, true));
            match replayed {
                Err(e) => (false, format!("replay failed: {e:#}")),
                Ok(()) => {
                    let mut differing = Vec::new();
                    for name in ["healed.grid", "healed_windowed.grid"] {
                        for file in [name.to_string(), format!("{name}.bin")] {
                            let a = std::fs::read(first.join(&file)).unwrap();
                            let b = std::fs::read(second.join(&file)).unwrap();
                            if a != b {
                                differing.push(file);
                            }
                        }
                    }
                    // the grids also decode to identical values
                    let same = read_real(&first.join("healed.grid")).unwrap() == read_real(&second.join("healed.grid")).unwrap();
                    (
                        differing.is_empty() && same,
                        format!("replayed from manifest, {} differing files", differing.len()),
                    )
                }
            }
        }
    };
    verdict(9, pass, &detail);
    assert!(pass);
}
