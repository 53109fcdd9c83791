//! Cross-module invariant checks at small sizes, runnable from the CLI.

use std::fmt;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::realize_channel;
use crate::config::ScenarioConfig;
use crate::harness::run_realization;
use crate::metrics::{s_over_i, waterfill, BinResponses};
use crate::oracle;
use crate::selection::{max_nonconsecutive, random_nonconsecutive, SelectionMethod, SelectionSet};
use crate::synthesis::{composite_response, passivity_margin, synthesize_weights, RisProgram, SpectralBasis};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

pub fn run_selftest(seed: u64) -> SelftestReport {
    run_selftest_with(seed, SpectralBasis::new)
}

/// Runs every check with DFT plans from `make_basis`.
pub fn run_selftest_with(seed: u64, make_basis: fn(usize) -> SpectralBasis) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        dft_oracle(&mut rng, make_basis),
        selectivity(&mut rng, make_basis),
        passivity(&mut rng, make_basis),
        parseval(&mut rng, make_basis),
        composite_oracle(&mut rng, make_basis),
        channel_oracle(&mut rng),
        waterfill_kkt(&mut rng),
        determinism(seed),
    ];
    SelftestReport { checks }
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn random_selection<R: Rng>(rng: &mut R, k: usize) -> SelectionSet {
    let size = rng.random_range(1..=max_nonconsecutive(k));
    random_nonconsecutive(rng, size, k).expect("size within bounds")
}

fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn small_cfg(k: usize, n_row: usize, n_col: usize) -> ScenarioConfig {
    ScenarioConfig {
        num_subcarriers: k,
        n_row,
        n_col,
        ..ScenarioConfig::reference_scenario()
    }
}

fn verdict(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} (tol {tol:.0e})"),
    }
}

fn dft_oracle<R: Rng>(rng: &mut R, make_basis: fn(usize) -> SpectralBasis) -> CheckResult {
    let mut worst: f64 = 0.0;
    for k in [2, 7, 16, 64] {
        let basis = make_basis(k);
        let sel = random_selection(rng, k);
        let b: Vec<Complex64> = (0..k).map(|i| Complex64::new(if sel.contains(i) { 1.0 } else { 0.0 }, 0.0)).collect();
        let w = synthesize_weights(&sel, &basis).unwrap_or_default();
        worst = worst.max(rel_err(&w, &oracle::naive_dft(&b, -1.0)));
        let x: Vec<Complex64> = (0..k).map(|_| random_complex(rng)).collect();
        let spec = basis.adjoint(&x).unwrap_or_default();
        worst = worst.max(rel_err(&spec, &oracle::naive_dft(&x, 1.0)));
    }
    verdict("dft_oracle", worst, 1e-12)
}

fn selectivity<R: Rng>(rng: &mut R, make_basis: fn(usize) -> SpectralBasis) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut unbounded = true;
    for k in [16, 64] {
        let cfg = small_cfg(k, 1, k);
        let basis = make_basis(k);
        for _ in 0..10 {
            let Ok(channel) = realize_channel(rng, &cfg) else {
                return CheckResult { name: "selectivity", passed: false, detail: "channel draw failed".into() };
            };
            let sel = random_selection(rng, k);
            let program = RisProgram::new(&sel, k, &basis).expect("valid selection");
            let h_c = composite_response(&channel.composite, &program).expect("matching dimensions");
            let bins = basis.adjoint(&h_c).unwrap_or_default();
            let peak = sel.indices().iter().map(|&i| bins[i].norm()).fold(0.0, f64::max);
            let leak = (0..k).filter(|&i| !sel.contains(i)).map(|i| bins[i].norm()).fold(0.0, f64::max);
            let spread = sel.indices().iter().map(|&i| (bins[i] - bins[sel.indices()[0]]).norm()).fold(0.0, f64::max);
            worst = worst.max(leak / peak).max(spread / peak);
            let resp = BinResponses::new(&basis, &channel.direct, &h_c, &sel);
            unbounded &= resp.ok().and_then(|r| s_over_i(&r, &sel).ok()).is_some_and(|s| s.is_unbounded());
        }
    }
    let mut res = verdict("selectivity", worst, 1e-9);
    res.passed &= unbounded;
    if !unbounded {
        res.detail.push_str("; finite S/I at N >= K");
    }
    res
}

fn passivity<R: Rng>(rng: &mut R, make_basis: fn(usize) -> SpectralBasis) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut dc_err: f64 = 0.0;
    for _ in 0..500 {
        let k = rng.random_range(2..=64);
        let n = rng.random_range(1..=80);
        let sel = random_selection(rng, k);
        let program = RisProgram::new(&sel, n, &make_basis(k)).expect("valid selection");
        worst = worst.max(passivity_margin(&program));
        dc_err = dc_err.max((program.coefficient(0).norm() - 1.0).abs());
    }
    CheckResult {
        name: "passivity",
        passed: worst <= 1.0 + 1e-12 && dc_err <= 1e-12,
        detail: format!("max margin {worst:.15}, DC deviation {dc_err:.1e}"),
    }
}

fn parseval<R: Rng>(rng: &mut R, make_basis: fn(usize) -> SpectralBasis) -> CheckResult {
    let mut worst: f64 = 0.0;
    for k in [3, 16, 33, 64] {
        let x: Vec<Complex64> = (0..k).map(|_| random_complex(rng)).collect();
        let spec = make_basis(k).adjoint(&x).unwrap_or_default();
        let lhs: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let rhs = k as f64 * x.iter().map(|v| v.norm_sqr()).sum::<f64>();
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    verdict("parseval", worst, 1e-9)
}

fn composite_oracle<R: Rng>(rng: &mut R, make_basis: fn(usize) -> SpectralBasis) -> CheckResult {
    let mut worst: f64 = 0.0;
    for (k, n) in [(8, 3), (16, 16), (32, 20)] {
        let sel = random_selection(rng, k);
        let program = RisProgram::new(&sel, n, &make_basis(k)).expect("valid selection");
        let v = Array2::from_shape_fn((n, k), |_| random_complex(rng));
        let fast = composite_response(&v, &program).expect("matching dimensions");
        worst = worst.max(rel_err(&fast, &oracle::dense_composite(&v, program.weights(), sel.len())));
    }
    verdict("composite_oracle", worst, 1e-12)
}

fn channel_oracle<R: Rng>(rng: &mut R) -> CheckResult {
    let mut worst: f64 = 0.0;
    let cfg = ScenarioConfig {
        paths_ap_ris: 3,
        paths_ris_ue: 3,
        paths_direct: 3,
        ..small_cfg(16, 1, 2)
    };
    for _ in 0..10 {
        let Ok(ch) = realize_channel(rng, &cfg) else {
            return CheckResult { name: "channel_oracle", passed: false, detail: "channel draw failed".into() };
        };
        let v = oracle::pair_sum_composite(&ch.ap_ris_paths, &ch.ris_ue_paths, ch.tau_ref, &cfg);
        let fast: Vec<Complex64> = ch.composite.iter().copied().collect();
        let slow: Vec<Complex64> = v.iter().copied().collect();
        worst = worst.max(rel_err(&fast, &slow));
    }
    verdict("channel_oracle", worst, 1e-12)
}

fn waterfill_kkt<R: Rng>(rng: &mut R) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(1..=8);
        let mut g: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..10.0)).collect();
        if rng.random_bool(0.3) {
            g[0] = 0.0;
        }
        if g.iter().all(|&x| x == 0.0) {
            g[k - 1] = 1.0;
        }
        let p = rng.random_range(0.01..5.0);
        let Ok(alloc) = waterfill(&g, p) else {
            return CheckResult { name: "waterfill_kkt", passed: false, detail: "allocation failed".into() };
        };
        for (i, &pi) in alloc.power.iter().enumerate() {
            if pi > 0.0 {
                worst = worst.max(((pi + 1.0 / g[i]) - alloc.water_level).abs() / alloc.water_level);
            }
        }
        worst = worst.max((alloc.mean_power() - p).abs() / p);
        let reference = oracle::waterfill_by_enumeration(&g, p);
        for (a, b) in alloc.power.iter().zip(&reference) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    verdict("waterfill_kkt", worst, 1e-9)
}

fn determinism(seed: u64) -> CheckResult {
    let cfg = ScenarioConfig { seed, ..small_cfg(32, 4, 4) };
    let a = run_realization(&cfg, SelectionMethod::Adjacent, 5, 3);
    let b = run_realization(&cfg, SelectionMethod::Adjacent, 5, 3);
    let same = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
    CheckResult {
        name: "determinism",
        passed: same,
        detail: if same { "identical metrics on repeat".into() } else { "metrics differ on repeat".into() },
    }
}
