//! The acceptance suite: fifteen numbered checks, each with its own
//! tolerance and oracle. Shared by the `selftest` CLI command and the
//! `acceptance` test target.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fourier::{convolve, convolve_direct, convolve_fft, forward_dft, inverse_dft, torus_lp_norm, TorusGrid};
use crate::lattice::{lp_norm, translate, Exponent, GridFunction, LatticeBox, C64};
use crate::multiplier::{
    apply_multiplier_with, apply_sequence, l2_output_energy, rescale_interval_symbol, subdivision_partition,
    synthesize_kernel_with, KernelTable, Quadrature,
};
use crate::regularity::{
    decay_constants, hormander_scan, mikhlin_constant, mikhlin_path_discrepancy, norm_lower_bound_on,
    operator_norm_l2, trial_rng, weak_lorentz_refined, DerivativeMethod, NormSearch, TruncatedOperator,
};
use crate::symbol::{parse_symbol, Symbol};
use crate::wave::{buffer_margin, energy, leapfrog_evolve, rk4_evolve, solve_wave, strichartz_ratio, strichartz_study};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {}: {} ({:.1} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.seconds
        )
    }
}

pub const TITLES: [&str; 15] = [
    "transform round trip",
    "Plancherel and convolution theorem",
    "Hausdorff-Young and Young inequalities",
    "Riesz kernel and kernel/operator identity",
    "Riesz energy identity",
    "Mikhlin certificates for Riesz symbols",
    "Hormander constants",
    "kernel decay constants",
    "weak-Lorentz constant of |xi|^-1",
    "l2 operator norms by power iteration",
    "l4/3 -> l4 stability for |xi|^-1",
    "wave solver",
    "Strichartz harness",
    "imaginary powers",
    "interval rescaling and subdivision",
];

pub const DEFAULT_SEED: u64 = 20_241_018;

/// Runs check `id` (1-based).
pub fn run_criterion(id: usize, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let out = match id {
        1 => c01_round_trip(seed),
        2 => c02_plancherel(seed),
        3 => c03_inequalities(seed),
        4 => c04_kernels(),
        5 => c05_riesz_energy(seed),
        6 => c06_mikhlin(),
        7 => c07_hormander(),
        8 => c08_decay(),
        9 => c09_weak_lorentz(),
        10 => c10_l2_norms(seed),
        11 => c11_hls_line(seed),
        12 => c12_wave(seed),
        13 => c13_strichartz(seed),
        14 => c14_imaginary_powers(seed),
        15 => c15_interval_machinery(seed),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (passed, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        title: TITLES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown").to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    (1..=TITLES.len()).map(|id| run_criterion(id, seed)).collect()
}

type Check = Result<(bool, String)>;

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random function of one of four flavours on a random box.
fn random_function(rng: &mut impl Rng, d: usize, max_radius: usize) -> GridFunction {
    let lo: Vec<i64> = (0..d).map(|_| rng.gen_range(-6..=6)).collect();
    let hi: Vec<i64> = lo.iter().map(|l| l + rng.gen_range(0..=2 * max_radius as i64)).collect();
    let bx = LatticeBox::new(lo, hi).expect("valid box");
    let flavour = rng.gen_range(0..4);
    let values = (0..bx.len())
        .map(|_| match flavour {
            0 => gaussian(rng),
            1 => C64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0),
            2 => {
                if rng.gen::<f64>() < 0.2 {
                    gaussian(rng)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            _ => C64::new(rng.gen::<f64>(), 0.0),
        })
        .collect();
    GridFunction::new(bx, values).expect("finite values")
}

fn centered_gaussian(seed: u64, stream: u64, d: usize, r: usize) -> GridFunction {
    let mut rng = trial_rng(seed, stream);
    GridFunction::from_fn(LatticeBox::cube(d, r).expect("valid"), |_| gaussian(&mut rng)).expect("finite")
}

fn extents(f: &GridFunction) -> Vec<usize> {
    (0..f.dim()).map(|a| f.bounding_box().extent(a)).collect()
}

fn c01_round_trip(seed: u64) -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..500u64 {
        let mut rng = trial_rng(seed, 1000 + i);
        let d = 1 + (i % 3) as usize;
        let f = random_function(&mut rng, d, 8);
        let grid = TorusGrid::new(&extents(&f))?;
        let back = inverse_dft(&forward_dft(&f, &grid)?, f.bounding_box())?;
        worst = worst.max(back.max_abs_diff(&f)?);
    }
    Ok((worst <= 1e-12, format!("500 functions, max |F^-1 F f - f| = {worst:.2e} (tol 1e-12)")))
}

fn c02_plancherel(seed: u64) -> Check {
    let (mut plan, mut conv, mut paths): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..500u64 {
        let mut rng = trial_rng(seed, 2000 + i);
        let d = 1 + (i % 3) as usize;
        let r = if d == 3 { 3 } else { 8 };
        let f = random_function(&mut rng, d, r);
        let g = random_function(&mut rng, d, r);
        let grid = TorusGrid::new(&extents(&f))?;
        let ff = forward_dft(&f, &grid)?;
        let two = Exponent::Finite(2.0);
        plan = plan.max(rel(torus_lp_norm(&ff, two), lp_norm(&f, two)));

        let h = convolve(&f, &g)?;
        let grid = TorusGrid::new(&extents(&h))?;
        let (fh, ff, fg) = (forward_dft(&h, &grid)?, forward_dft(&f, &grid)?, forward_dft(&g, &grid)?);
        let scale = (lp_norm(&f, Exponent::Finite(1.0)) * lp_norm(&g, Exponent::Finite(1.0))).max(f64::MIN_POSITIVE);
        for ((a, b), c) in fh.values().iter().zip(ff.values()).zip(fg.values()) {
            conv = conv.max((a - b * c).norm() / scale);
        }
        let direct = convolve_direct(&f, &g)?;
        let fast = convolve_fft(&f, &g)?;
        paths = paths.max(direct.max_abs_diff(&fast)? / scale);
    }
    let ok = plan <= 1e-10 && conv <= 1e-10 && paths <= 1e-10;
    Ok((
        ok,
        format!(
            "500 pairs, Plancherel rel err {plan:.2e}, |F(f*g) - Ff Fg|/(|f|_1|g|_1) {conv:.2e}, direct vs FFT {paths:.2e} (tol 1e-10)"
        ),
    ))
}

fn c03_inequalities(seed: u64) -> Check {
    let slack = 1e-12;
    let mut hy_viol = 0;
    let mut hy_worst = 0.0f64;
    let p43 = Exponent::Finite(4.0 / 3.0);
    for i in 0..1000u64 {
        let mut rng = trial_rng(seed, 3000 + i);
        let d = 1 + (i % 3) as usize;
        let f = random_function(&mut rng, d, if d == 3 { 2 } else { 6 });
        // |F f|^4 has per-axis degree below 4 * extent, so this grid is exact.
        let sizes: Vec<usize> = extents(&f).iter().map(|e| 4 * e).collect();
        let lhs = torus_lp_norm(&forward_dft(&f, &TorusGrid::new(&sizes)?)?, Exponent::Finite(4.0));
        let rhs = lp_norm(&f, p43);
        hy_worst = hy_worst.max(lhs / rhs);
        if lhs > rhs * (1.0 + slack) {
            hy_viol += 1;
        }
    }
    let triples = [(1.0, 1.0, 1.0), (2.0, 1.0, 2.0), (4.0 / 3.0, 4.0 / 3.0, 2.0)];
    let mut young = Vec::new();
    for (t, &(p, q, r)) in triples.iter().enumerate() {
        let (mut viol, mut worst) = (0, 0.0f64);
        for i in 0..1000u64 {
            let mut rng = trial_rng(seed, 4000 + 1000 * t as u64 + i);
            let d = 1 + (i % 3) as usize;
            let radius = if d == 3 { 2 } else { 6 };
            let f = random_function(&mut rng, d, radius);
            let g = random_function(&mut rng, d, radius);
            let lhs = lp_norm(&convolve(&f, &g)?, Exponent::Finite(r));
            let rhs = lp_norm(&f, Exponent::Finite(p)) * lp_norm(&g, Exponent::Finite(q));
            if rhs > 0.0 {
                worst = worst.max(lhs / rhs);
            }
            if lhs > rhs * (1.0 + slack) {
                viol += 1;
            }
        }
        young.push((p, q, r, viol, worst));
    }
    let ok = hy_viol == 0 && young.iter().all(|y| y.3 == 0);
    let mut detail = format!("Hausdorff-Young p=4/3: {hy_viol} violations in 1000, max ratio {hy_worst:.4}");
    for (p, q, r, v, w) in young {
        detail += &format!("; Young ({p:.3},{q:.3},{r}): {v} violations, max ratio {w:.4}");
    }
    Ok((ok, detail))
}

fn c04_kernels() -> Check {
    let riesz = Symbol::riesz(1, 1)?;
    let k = synthesize_kernel_with(&riesz, &LatticeBox::cube(1, 64)?, &Quadrature::new(1e-9))?;
    let oracle = (-64..=64i64)
        .map(|n| (k.get(&[n]) - C64::new(0.0, -1.0 / (PI * (2 * n + 1) as f64))).norm())
        .fold(0.0, f64::max);
    let mut ok = oracle <= 1e-9;
    let mut detail = format!("1D Riesz vs -i/(pi(2n+1)): {oracle:.2e} (tol 1e-9)");

    // Non-smooth symbols converge slowly under grid doubling, so each gets a
    // tolerance its quadrature can reach within the grid caps.
    let cases: [(&str, usize, f64); 17] = [
        ("const:c=1.5,im=-0.5", 2, 1e-12),
        ("exp:k=3", 1, 1e-12),
        ("exp:k=2/-1", 2, 1e-12),
        ("riesz:j=1", 1, 1e-9),
        ("riesz:j=2", 2, 1e-6),
        ("laplacian", 3, 1e-12),
        ("imagpow:t=0.7", 2, 1e-6),
        ("wavecos:t=1.5", 2, 1e-12),
        ("wavesinc:t=1.5", 2, 1e-12),
        ("wavevel:t=1.5", 1, 1e-12),
        ("negpower:r=0.5", 2, 2e-5),
        ("interval:a=0.2,b=0.7", 1, 1e-5),
        ("rescale:a=0.125,b=0.875(riesz:j=1)", 1, 1e-5),
        ("notch:c=0.3,eps=0.05", 1, 1e-10),
        ("sum(exp:k=1;const:c=0.5)", 1, 1e-12),
        ("product(riesz:j=1;wavecos:t=1)", 2, 1e-6),
        ("table", 1, 1e-5),
    ];
    let mut worst_ratio = 0.0f64;
    let mut worst_tag = String::new();
    for (spec, d, tol) in cases {
        let m = if spec == "table" {
            let grid = TorusGrid::uniform(1, 64)?;
            let values = (0..64).map(|k| C64::new((2.0 * PI * k as f64 / 64.0).cos(), 0.25)).collect();
            Symbol::table(&grid, values, Vec::new())?
        } else {
            parse_symbol(spec, d)?
        };
        let bx = LatticeBox::cube(d, 8)?;
        let q = Quadrature::new(tol);
        let kt = synthesize_kernel_with(&m, &bx, &q)?;
        // The operator side runs on a different grid sequence (multiples of
        // 3 rather than powers of two) and on a translated delta, so the two
        // sides share no samples. That sequence stops below the power-of-two
        // cap, so its last grid is accepted and judged by the comparison.
        // Small odd multiples of 32 reproduce a 64-point table exactly under
        // one doubling and stop too early, so d = 1 starts higher.
        let shift = vec![3i64; d];
        let start = if d == 1 { 384 } else { 96 };
        let q3 = Quadrature::new(tol / 10.0).with_start(start).accepting_unconverged();
        let applied = apply_multiplier_with(&m, &GridFunction::delta(&shift)?, &bx.shifted(&shift), &q3)?;
        let back = translate(&applied.output, &shift)?;
        let diff = back.max_abs_diff(&kt.kernel)?;
        let ratio = diff / (2.0 * tol);
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_tag = m.tag();
        }
        if diff > 2.0 * tol || !kt.converged {
            ok = false;
            detail += &format!("; {} failed: diff {diff:.2e}, tol {tol:.0e}", m.tag());
        }
    }
    if worst_tag.is_empty() {
        worst_tag = "all symbols".into();
    }
    detail += &format!(
        "; T_m(delta_0) = K for {} symbols, worst |diff|/(2 tol) = {worst_ratio:.2e} ({worst_tag})",
        cases.len()
    );
    Ok((ok, detail))
}

fn c05_riesz_energy(seed: u64) -> Check {
    let mut worst = 0.0f64;
    for d in 1..=2usize {
        let symbols: Vec<Symbol> = (1..=d).map(|j| Symbol::riesz(d, j)).collect::<Result<_>>()?;
        for i in 0..100u64 {
            let f = centered_gaussian(seed, 5000 + 100 * d as u64 + i, d, 8);
            let mut total = 0.0;
            for m in &symbols {
                total += l2_output_energy(m, &f)?.value;
            }
            let want = 0.25 * lp_norm(&f, Exponent::Finite(2.0)).powi(2);
            worst = worst.max((total - want).abs() / want);
        }
    }
    Ok((
        worst <= 1e-8,
        format!("d=1,2 with 100 functions each: max relative error {worst:.2e} (tol 1e-8)"),
    ))
}

/// Drift is measured on `N -> 2N` grids fine enough that the approach of the
/// grid to the edge `xi_j = 1/2` moves the suprema by well under 2%; the
/// path gap is a local property and uses coarser grids.
fn c06_mikhlin() -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for (d, n_gap, n_drift) in [(1usize, 512usize, Some(512usize)), (2, 64, Some(256)), (3, 16, None)] {
        for j in 1..=d {
            let m = Symbol::riesz(d, j)?;
            let gap = mikhlin_path_discrepancy(&m, d + 1, n_gap)?
                .into_iter()
                .fold(0.0, f64::max);
            ok &= gap <= 1e-6;
            let mut line = format!("psi_{j} d={d}: path gap {gap:.1e} (N={n_gap})");
            if let Some(n) = n_drift {
                let a = mikhlin_constant(&m, d + 1, n, DerivativeMethod::Analytic)?;
                let b = mikhlin_constant(&m, d + 1, 2 * n, DerivativeMethod::Analytic)?;
                let drift = a
                    .constants()
                    .iter()
                    .zip(b.constants())
                    .map(|(x, y)| rel(*x, y))
                    .fold(0.0, f64::max);
                ok &= drift <= 0.02;
                let cs: Vec<String> = b.constants().iter().map(|c| format!("{c:.4}")).collect();
                line += &format!(", N={n}->{} drift {:.2}%, c_k = [{}]", 2 * n, 100.0 * drift, cs.join(", "));
            }
            detail.push(line);
        }
    }
    Ok((ok, detail.join("; ")))
}

fn c07_hormander() -> Check {
    let k1 = synthesize_kernel_with(&Symbol::riesz(1, 1)?, &LatticeBox::cube(1, 520)?, &Quadrature::new(1e-9))?;
    let a = hormander_scan(&k1, 8.0, 256)?.constant;
    let b = hormander_scan(&k1, 8.0, 512)?.constant;
    let k2 = synthesize_kernel_with(&Symbol::riesz(2, 1)?, &LatticeBox::cube(2, 134)?, &Quadrature::new(1e-6))?;
    let c = hormander_scan(&k2, 4.0, 64)?.constant;
    let e = hormander_scan(&k2, 4.0, 128)?.constant;
    let (r1, r2) = (rel(a, b), rel(c, e));
    Ok((
        r1 < 0.05 && r2 < 0.10,
        format!(
            "d=1 S=8: {a:.5} (R=256) vs {b:.5} (R=512), change {:.2}% (< 5%); d=2 S=4: {c:.5} (R=64) vs {e:.5} (R=128), change {:.2}% (< 10%)",
            100.0 * r1,
            100.0 * r2
        ),
    ))
}

fn restricted(k: &KernelTable, r: usize) -> Result<KernelTable> {
    let bx = LatticeBox::cube(k.dim(), r)?;
    Ok(KernelTable::from_values(&k.symbol, k.kernel.restrict_to(&bx)?))
}

fn c08_decay() -> Check {
    let k = synthesize_kernel_with(&Symbol::riesz(2, 1)?, &LatticeBox::cube(2, 128)?, &Quadrature::new(1e-7))?;
    let small = decay_constants(&restricted(&k, 64)?);
    let large = decay_constants(&k);
    let (r0, r1) = (rel(small.c0, large.c0), rel(small.c1, large.c1));
    let finite = large.c0.is_finite() && large.c1.is_finite();
    Ok((
        finite && r0 < 0.05 && r1 < 0.05,
        format!(
            "c0 {:.5} -> {:.5} ({:.2}%), c1 {:.5} -> {:.5} ({:.2}%) for box 64 -> 128 (< 5%)",
            small.c0,
            large.c0,
            100.0 * r0,
            small.c1,
            large.c1,
            100.0 * r1
        ),
    ))
}

fn c09_weak_lorentz() -> Check {
    let m = Symbol::negative_power(2, 1.0)?;
    let (coarse, fine, r) = weak_lorentz_refined(&m, 2.0, 512)?;
    let e0 = rel(coarse.constant, PI);
    let e1 = rel(fine.constant, PI);
    Ok((
        e0 < 0.05 && e1 < 0.05,
        format!(
            "N=512: {:.5} ({:.2}% from pi), N=1024: {:.5} ({:.2}% from pi), refinement change {:.2}%",
            coarse.constant,
            100.0 * e0,
            fine.constant,
            100.0 * e1,
            100.0 * r.relative_delta()
        ),
    ))
}

fn c10_l2_norms(seed: u64) -> Check {
    let two = Exponent::Finite(2.0);
    let search = NormSearch {
        trials: 16,
        seed,
        ..Default::default()
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for (m, target, q) in [
        (Symbol::riesz(1, 1)?, 0.5, Quadrature::new(1e-8)),
        (Symbol::interval(0.2, 0.7)?, 1.0, Quadrature::new(1e-6).accepting_unconverged()),
    ] {
        let op = TruncatedOperator::new(&m, 256, &q)?;
        let est = norm_lower_bound_on(&op, two, two, &search)?;
        let sup = operator_norm_l2(&m, 4096)?.ess_sup;
        let err = (est.lower_bound - target).abs() / target;
        let sound = est.lower_bound <= sup * (1.0 + 1e-6);
        ok &= err < 0.01 && sound;
        detail.push(format!(
            "{}: {:.6} via {:?} (target {target}, grid sup {sup:.6}, gap {:.3}%)",
            m.tag(),
            est.lower_bound,
            est.method,
            100.0 * err
        ));
    }
    Ok((ok, detail.join("; ")))
}

/// The kernel of `|xi|^-1` converges like `1/N`; the remaining error is a
/// nearly constant offset of size about `4/N`, far below the kernel values
/// that drive the ratios.
fn hls_quadrature() -> Quadrature {
    Quadrature::new(1e-4).accepting_unconverged().with_cap(2048)
}

pub fn hls_study(radius: usize, trials: usize, seed: u64) -> Result<crate::regularity::NormEstimate> {
    let m = Symbol::negative_power(2, 1.0)?;
    let op = TruncatedOperator::new(&m, radius, &hls_quadrature())?;
    let search = NormSearch {
        trials,
        seed,
        power_iterations: 60,
        ascent_max_dim: 0,
    };
    norm_lower_bound_on(&op, Exponent::Finite(4.0 / 3.0), Exponent::Finite(4.0), &search)
}

fn c11_hls_line(seed: u64) -> Check {
    let small = hls_study(16, 200, seed)?;
    let large = hls_study(64, 200, seed)?;
    let change = rel(small.lower_bound, large.lower_bound);
    let best_trial = |e: &crate::regularity::NormEstimate| e.trial_ratios.iter().copied().fold(0.0, f64::max);
    Ok((
        change < 0.10,
        format!(
            "max ratio {:.5} (R=16, {:?}) vs {:.5} (R=64, {:?}), change {:.2}% (< 10%); best raw trial {:.4} / {:.4}",
            small.lower_bound,
            small.method,
            large.lower_bound,
            large.method,
            100.0 * change,
            best_trial(&small),
            best_trial(&large)
        ),
    ))
}

fn c12_wave(seed: u64) -> Check {
    let tol = 1e-12;
    let mut ok = true;
    let mut detail = Vec::new();

    let f = centered_gaussian(seed, 12_000, 2, 4);
    let g = centered_gaussian(seed, 12_001, 2, 4);
    let s0 = solve_wave(&f, &g, 0.0, &LatticeBox::cube(2, 6)?, tol)?;
    let id_err = s0.u.max_abs_diff(&f)?.max(s0.v.max_abs_diff(&g)?);
    ok &= id_err <= tol;
    detail.push(format!("t=0 identity {id_err:.1e}"));

    let mut drift = 0.0f64;
    for d in 1..=2usize {
        let f = centered_gaussian(seed, 12_010 + d as u64, d, 4);
        let g = centered_gaussian(seed, 12_020 + d as u64, d, 4);
        let origin = solve_wave(&f, &g, 0.0, &LatticeBox::cube(d, 4)?, tol)?;
        let e0 = energy(&origin)?;
        for t in [0.5, 1.0, 2.0, 5.0, 10.0] {
            let w = LatticeBox::cube(d, 4 + buffer_margin(t))?;
            let s = solve_wave(&f, &g, t, &w, tol)?;
            drift = drift.max((energy(&s)? - e0).abs() / e0);
        }
    }
    ok &= drift <= 1e-8;
    detail.push(format!("energy drift {drift:.1e} for t <= 10"));

    let zero = GridFunction::zeros(LatticeBox::cube(1, 0)?);
    let delta = GridFunction::delta(&[0])?;
    let w = LatticeBox::cube(1, 32)?;
    let spectral = solve_wave(&zero, &delta, 1.0, &w, tol)?;
    let rk = rk4_evolve(&zero, &delta, 1.0, 1e-3, &LatticeBox::cube(1, 128)?)?.restrict_to(&w)?;
    let ode = spectral.max_abs_diff(&rk)?;
    ok &= ode <= 1e-6;
    detail.push(format!("RK4 oracle gap {ode:.1e}"));

    let f = centered_gaussian(seed, 12_030, 1, 4);
    let g = centered_gaussian(seed, 12_031, 1, 4);
    let w = LatticeBox::cube(1, 12)?;
    let b = LatticeBox::cube(1, 64)?;
    let exact = solve_wave(&f, &g, 1.0, &w, tol)?;
    let err = |dt: f64| -> Result<f64> {
        leapfrog_evolve(&f, &g, 1.0, dt, &b)?.u.restrict_to(&w)?.max_abs_diff(&exact.u)
    };
    let ratio = err(0.02)? / err(0.01)?;
    ok &= (ratio - 4.0).abs() <= 0.8;
    detail.push(format!("leapfrog error ratio {ratio:.3} (order 2 expects 4)"));
    Ok((ok, detail.join("; ")))
}

fn c13_strichartz(seed: u64) -> Check {
    let tol = 1e-10;
    let mut ok = true;
    let mut detail = Vec::new();
    let f = centered_gaussian(seed, 13_000, 1, 6);
    let g = centered_gaussian(seed, 13_001, 1, 6);
    let w = LatticeBox::cube(1, 6 + buffer_margin(1.0))?;
    let base = strichartz_ratio(&f, &g, 1.0, 4.0 / 3.0, 4.0, &w, tol)?;
    let mut hom = 0.0f64;
    for l in [C64::new(3.0, 0.0), C64::new(-0.25, 2.0), C64::new(1e-3, -1e-3)] {
        let r = strichartz_ratio(&f.scale(l), &g.scale(l), 1.0, 4.0 / 3.0, 4.0, &w, tol)?;
        hom = hom.max(rel(r, base));
    }
    let shift = [7i64];
    let moved_window = w.shifted(&[-7]);
    let tr = strichartz_ratio(&translate(&f, &shift)?, &translate(&g, &shift)?, 1.0, 4.0 / 3.0, 4.0, &moved_window, tol)?;
    let trans = rel(tr, base);
    ok &= hom <= 1e-12 && trans <= tol;
    detail.push(format!("homogeneity {hom:.1e}, translation {trans:.1e}"));
    for (p, q) in [(2.0, 2.0), (4.0 / 3.0, 4.0), (1.5, 3.0)] {
        let a = strichartz_study(1, 1.0, p, q, 8, 100, seed, tol)?;
        let b = strichartz_study(1, 1.0, p, q, 32, 100, seed, tol)?;
        let c = rel(a.max_ratio, b.max_ratio);
        ok &= c < 0.10;
        detail.push(format!(
            "(p,q)=({p:.3},{q}): {:.4} ({}) -> {:.4} ({}), change {:.2}%",
            a.max_ratio,
            a.argmax,
            b.max_ratio,
            b.argmax,
            100.0 * c
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn c14_imaginary_powers(seed: u64) -> Check {
    let tol = 1e-6;
    let q = Quadrature::new(tol);
    let mut unit = 0.0f64;
    let f = centered_gaussian(seed, 14_000, 2, 6);
    let norm2 = lp_norm(&f, Exponent::Finite(2.0)).powi(2);
    for t in [0.5, 1.5, -2.0] {
        let e = l2_output_energy(&Symbol::imaginary_power(2, t)?, &f)?;
        unit = unit.max((e.fine - norm2).abs() / norm2).max((e.value - norm2).abs() / norm2);
    }
    let w = LatticeBox::cube(2, 10)?;
    let (t, s) = (0.8, -0.3);
    let composed = apply_sequence(&[Symbol::imaginary_power(2, t)?, Symbol::imaginary_power(2, s)?], &f, &w, &q)?;
    let direct = apply_multiplier_with(&Symbol::imaginary_power(2, t + s)?, &f, &w, &q)?;
    let group = composed.output.max_abs_diff(&direct.output)?;
    let pair = apply_sequence(&[Symbol::imaginary_power(2, 1.5)?, Symbol::imaginary_power(2, -1.5)?], &f, &w, &q)?;
    let inverse = pair.output.max_abs_diff(&f)?;
    let ok = unit <= 1e-10 && group <= 2.0 * tol && inverse <= 2.0 * tol;
    Ok((
        ok,
        format!(
            "unitarity {unit:.1e} (tol 1e-10); group law {group:.1e}, inverse pair {inverse:.1e} (tol 2*{tol:.0e})"
        ),
    ))
}

fn c15_interval_machinery(seed: u64) -> Check {
    let q = Quadrature::new(1e-12);
    let base = parse_symbol("product(sum(exp:k=1;const:c=0.5);notch:c=0.3,eps=0.05)", 1)?;
    let w = LatticeBox::cube(1, 20)?;
    let mut worst = 0.0f64;
    for (i, a) in [0.375, 0.125, 0.3].into_iter().enumerate() {
        let f = centered_gaussian(seed, 15_000 + i as u64, 1, 6);
        let lhs = apply_multiplier_with(&base, &f, &w, &q)?.output;
        let shifted = f.modulate(|n| C64::from_polar(1.0, 2.0 * PI * a * n[0] as f64));
        let moved = apply_multiplier_with(&rescale_interval_symbol(&base, a, a + 1.0)?, &shifted, &w, &q)?.output;
        let rhs = moved.modulate(|n| C64::from_polar(1.0, -2.0 * PI * a * n[0] as f64));
        worst = worst.max(lhs.max_abs_diff(&rhs)?);
    }
    let pieces = subdivision_partition(&[0.0, 0.25, 0.5, 0.8, 1.0], 0.02)?;
    let mut sum_err = 0.0f64;
    for k in 0..10_000 {
        let xi = [(k as f64 + 0.5) / 10_000.0];
        let s: C64 = pieces.iter().map(|p| p.eval(&xi)).sum();
        sum_err = sum_err.max((s - 1.0).norm());
    }
    Ok((
        worst <= 1e-10 && sum_err <= 1e-12,
        format!("modulation identity {worst:.1e} (tol 1e-10); partition of unity {sum_err:.1e} at 10^4 points (tol 1e-12)"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_criterion_fails_cleanly() {
        let r = run_criterion(99, 1);
        assert!(!r.passed);
        assert!(r.to_string().contains("FAIL"));
    }

    #[test]
    fn cheap_criteria_pass() {
        for id in [1, 15] {
            let r = run_criterion(id, 3);
            assert!(r.passed, "{r}");
        }
    }
}
