//! Acceptance suite. Runs without the libtest harness and prints one
//! `criterion k: PASS|FAIL` line per criterion. Criterion 7 is a soft check
//! and never fails the run.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use srgc::bivar::*;
use srgc::gc::{gc_band, gc_spectral, gc_time_sr, partial_sigma_yy, reduced_dare, FrequencyBand};
use srgc::inference::{
    error_rate_experiment, CellReport, ExperimentConfig, ModeSpec, ModelDesign, OrderPolicy, Statistic, TestMethod,
};
use srgc::linalg::{dlyap_residual, inf_norm, solve_dare, solve_dlyap, spectral_radius, Mat};
use srgc::null_dist::{gamma_approx, genchi2_cdf, genchi2_quantile, null_weights_band, null_weights_time, GenChi2};
use srgc::rng::Seed;
use srgc::sampling::{default_burn_in, fit_var_ols, simulate};
use srgc::stats::{binomial_acceptance, ks_distance, ks_pvalue, mean, variance};
use srgc::var_model::{random_var, spectral_point, GenMode, Partition, VarParams};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = srgc::Result<(bool, String)>;

const N_FIG: usize = 1 << 14;

fn fig1_model() -> srgc::Result<(VarParams, Partition)> {
    let part = Partition::new(3, 5)?;
    let m = random_var(7, &part, 0.9, 1.0, GenMode::Null, &mut Seed(20_240_001).rng())?;
    Ok((m, part))
}

fn c1(model: &VarParams, part: &Partition, law: &GenChi2) -> Outcome {
    let burn = default_burn_in(model.p(), model.spectral_radius());
    let seed = Seed(20_240_002);
    let mut stats = Vec::with_capacity(2000);
    for i in 0..2000 {
        let data = simulate(model, N_FIG, burn, &mut seed.child(i).rng())?;
        let fit = fit_var_ols(&data, 7)?;
        stats.push(N_FIG as f64 * gc_time_sr(&fit, part)?.value);
    }
    let d = ks_distance(&stats, |x| genchi2_cdf(law, x))?;
    let (mu, _) = srgc::null_dist::genchi2_moments(law);
    Ok((d < 0.04, format!("KS = {d:.4} (bound 0.04), mean N·F = {:.3} vs law {mu:.3}", mean(&stats))))
}

fn c2(law: &GenChi2) -> Outcome {
    let g = gamma_approx(law)?;
    let top = genchi2_quantile(law, 1.0 - 1e-6)?;
    let mut sup = 0.0f64;
    for k in 1..=1000 {
        let x = top * k as f64 / 1000.0;
        sup = sup.max((g.cdf(x) - genchi2_cdf(law, x)?).abs());
    }
    Ok((sup <= 0.02, format!("sup |Γ − genχ²| = {sup:.2e} (bound 0.02)")))
}

/// `2·mean ln|det H̃_xx|` over the circle, `H̃_xx = Ψ_xx + Ψ_xy Σyx Σxx⁻¹`.
/// By Jensen this is `Σ 2 ln(1/|z|)` over the zeros of `det H̃_xx` inside
/// the unit disc, and it is exactly the shortfall of the full-band GC.
fn jensen_term(m: &VarParams, part: &Partition) -> srgc::Result<f64> {
    let s = m.sigma();
    let sxx_inv = srgc::linalg::inverse_pd(&s.view((0, 0), (part.nx, part.nx)).into_owned())?;
    let mix = (s.view((part.nx, 0), (part.ny, part.nx)) * sxx_inv).map(|v| Complex64::new(v, 0.0));
    let k = 8192;
    let mut acc = 0.0;
    for j in 0..k {
        let sp = spectral_point(m, 2.0 * PI * j as f64 / k as f64)?;
        let psi = &sp.psi;
        let h = psi.view((0, 0), (part.nx, part.nx)) + psi.view((0, part.nx), (part.nx, part.ny)) * &mix;
        acc += h.determinant().norm().ln();
    }
    Ok(2.0 * acc / k as f64)
}

fn c3() -> Outcome {
    let mut rng = Seed(20_240_003).rng();
    let (mut w_err, mut g_err) = (0.0f64, 0.0f64);
    // Diagnostics: how many draws have zeros inside, whether the Jensen
    // term explains every gap, and the worst gap on the rest.
    let (mut inside, mut explained, mut min_phase_err) = (0, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let (m, part) = common::random_model(&mut rng, true);
        let t = null_weights_time(&m, &part)?;
        let b = null_weights_band(&m, &part, &FrequencyBand::full())?;
        for (x, y) in t.weights().iter().zip(b.weights()) {
            w_err = w_err.max((x - y).abs());
        }
        let (m, part) = common::random_model(&mut rng, false);
        let gap = gc_time_sr(&m, &part)?.value - gc_band(&m, &part, &FrequencyBand::full())?.value;
        g_err = g_err.max(gap.abs());
        let jensen = jensen_term(&m, &part)?;
        explained = explained.max((gap - jensen).abs());
        if jensen > 1e-6 {
            inside += 1;
        } else {
            min_phase_err = min_phase_err.max(gap.abs());
        }
    }
    Ok((
        w_err <= 1e-8 && g_err <= 1e-6,
        format!(
            "max weight diff {w_err:.1e} (1e-8), max GC diff {g_err:.1e} (1e-6); \
             {inside}/100 GC draws have x-transfer zeros inside the disc, \
             gap minus Jensen term {explained:.1e}, max GC diff on the rest {min_phase_err:.1e}"
        ),
    ))
}

fn c4() -> Outcome {
    let mut rng = Seed(20_240_004).rng();
    let mut worst = [0.0f64; 5];
    let mut gamma_err = 0.0f64;
    for i in 0..1000 {
        let b = common::random_bivar(&mut rng, i % 2 == 0);
        let (m, part) = b.to_model()?;
        let w = rng.random_range(0.0..2.0 * PI);
        let band = common::random_band(&mut rng);
        let pairs = [
            (gc_time_sr(&m, &part)?.value, bivar_gc_time(&b)),
            (gc_spectral(&m, &part, w)?.value, bivar_gc_spectral(&b, w)),
            (gc_band(&m, &part, &band)?.value, bivar_gc_band(&b, &band)),
        ];
        for (k, (x, y)) in pairs.iter().enumerate() {
            worst[k] = worst[k].max((x - y).abs());
        }
        if b.is_null() {
            let law = null_weights_time(&m, &part)?;
            worst[3] = worst[3].max((law.weights()[0] - bivar_null_lambda(&b)?).abs());
            let lb = null_weights_band(&m, &part, &band)?;
            worst[4] = worst[4].max((lb.weights()[0] - bivar_null_lambda_band(&b, &band)?).abs());
            if i % 50 == 0 {
                let lam = law.weights()[0];
                let g = gamma_approx(&law)?;
                gamma_err = gamma_err.max((g.alpha - 0.5).abs()).max((g.beta - 2.0 * lam).abs());
                for k in 1..=10 {
                    let x = lam * k as f64 * 0.8;
                    gamma_err = gamma_err.max((g.cdf(x) - genchi2_cdf(&law, x)?).abs());
                }
            }
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    Ok((
        max <= 1e-8 && gamma_err <= 1e-8,
        format!(
            "pair diffs time {:.1e}, spectral {:.1e}, band {:.1e}, λ {:.1e}, λ band {:.1e}; Γ(½, 2λ) diff {gamma_err:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    ))
}

fn c56() -> srgc::Result<(Outcome, Outcome)> {
    let cfg = ExperimentConfig {
        design: ModelDesign::RandomVar { nx: 3, ny: 5, p: 7, rho: 0.9, gamma: 1.0, mode: ModeSpec::Null },
        n_list: vec![N_FIG],
        models: 50,
        trials_per_model: 200,
        alpha: 0.05,
        tests: vec![TestMethod::Projection, TestMethod::Lr],
        order_policy: OrderPolicy::Fixed(7),
        statistic: Statistic::Time,
        burn_in: None,
        keep_statistics: true,
    };
    let rep = error_rate_experiment(&cfg, Seed(20_240_005), 1)?;
    let cell = |t: TestMethod| -> &CellReport { rep.cells.iter().find(|c| c.test == t).expect("cell") };

    let proj = cell(TestMethod::Projection);
    let k: usize = proj.per_model.iter().map(|m| m.rejections).sum();
    let n = proj.valid_trials as u64;
    let (lo, hi) = binomial_acceptance(n, 0.05, 0.95);
    let c5 = Ok((
        n == 10_000 && (lo..=hi).contains(&(k as u64)),
        format!(
            "{k}/{n} rejections, rate {:.4}, acceptance region [{lo}, {hi}], {} excluded",
            k as f64 / n as f64,
            proj.excluded_trials
        ),
    ));

    let lr: Vec<f64> = cell(TestMethod::Lr)
        .per_model
        .iter()
        .flat_map(|m| m.statistics.clone().unwrap_or_default())
        .collect();
    let dof = 105.0;
    let (mu, se) = (mean(&lr), (variance(&lr) / lr.len() as f64).sqrt());
    let chi = ChiSquared::new(dof).expect("dof");
    let d = ks_distance(&lr, |x| Ok(chi.cdf(x)))?;
    let pv = ks_pvalue(d, lr.len());
    let c6 = Ok((
        (mu - dof).abs() <= 3.0 * se && pv >= 0.01,
        format!("{} stats, mean {mu:.3} ± {se:.3} vs 105, KS {d:.4} p = {pv:.3}", lr.len()),
    ));
    Ok((c5, c6))
}

fn c7() -> Outcome {
    let mut rng = Seed(20_240_007).rng();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (ci, rho) in [0.5, 0.9, 0.99].into_iter().enumerate() {
        for (gi, gamma) in [0.0, 1.0, 2.0].into_iter().enumerate() {
            let cell = ci * 3 + gi;
            let quota = 1000 / 9 + usize::from(cell < 1000 % 9);
            for _ in 0..quota {
                let part = Partition::new(rng.random_range(1..=3), rng.random_range(1..=3))?;
                let p = rng.random_range(1..=4);
                let m = random_var(p, &part, rho, gamma, GenMode::Null, &mut rng)?;
                worst = worst.max(null_weights_time(&m, &part)?.max_weight());
                count += 1;
            }
        }
    }
    Ok((worst <= 1.0 + 1e-8, format!("{count} models, max weight {worst:.10}")))
}

fn random_stable(m: usize, rng: &mut impl Rng) -> srgc::Result<Mat> {
    let a = Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let r = spectral_radius(&a)?;
    Ok(a * (rng.random_range(0.05..0.98) / r))
}

fn random_pd(m: usize, rng: &mut impl Rng) -> Mat {
    let b = Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + Mat::identity(m, m) * 0.1
}

fn c8() -> Outcome {
    let mut rng = Seed(20_240_008).rng();
    let mut lyap = 0.0f64;
    for _ in 0..500 {
        let m = rng.random_range(1..=30);
        let a = random_stable(m, &mut rng)?;
        let q = random_pd(m, &mut rng);
        let p = solve_dlyap(&a, &q)?;
        lyap = lyap.max(dlyap_residual(&a, &q, &p) / inf_norm(&p));
    }
    let mut dare = 0.0f64;
    for _ in 0..500 {
        let (m, nx) = (rng.random_range(1..=20), rng.random_range(1..=4));
        let ayy = random_stable(m, &mut rng)?;
        let axy = Mat::from_fn(nx, m, |_, _| rng.random_range(-1.0..1.0));
        let s = random_pd(m + nx, &mut rng);
        let syy = s.view((0, 0), (m, m)).into_owned();
        let syx = s.view((0, m), (m, nx)).into_owned();
        let sxx = s.view((m, m), (nx, nx)).into_owned();
        dare = dare.max(solve_dare(&ayy, &axy, &syy, &syx, &sxx)?.residual(&ayy, &syy));
    }
    let mut null = 0.0f64;
    for _ in 0..500 {
        let (m, part) = common::random_model(&mut rng, true);
        let sol = reduced_dare(&m, &part)?;
        let (ayy, q) = common::reduced_null_lyapunov(&m, &part, &partial_sigma_yy(&m, &part)?);
        let p = solve_dlyap(&ayy, &q)?;
        null = null.max(inf_norm(&(&sol.p - &p)) / inf_norm(&p));
    }
    Ok((
        lyap <= 1e-10 && dare <= 1e-10 && null <= 1e-10,
        format!("DLYAP {lyap:.1e}, DARE {dare:.1e}, DARE at null vs DLYAP {null:.1e} (all relative, bound 1e-10)"),
    ))
}

fn c9() -> Outcome {
    let a_values: Vec<f64> = (0..9).map(|i| -0.8 + 0.2 * i as f64).collect();
    let cfg = ExperimentConfig {
        design: ModelDesign::BivarGrid { kappa: 0.9, target_gc: 1e-4, a_values: a_values.clone() },
        n_list: vec![10_000],
        models: 0,
        trials_per_model: 1000,
        alpha: 0.05,
        tests: vec![TestMethod::Projection],
        order_policy: OrderPolicy::Fixed(1),
        statistic: Statistic::Time,
        burn_in: None,
        keep_statistics: false,
    };
    let rep = error_rate_experiment(&cfg, Seed(20_240_009), 1)?;
    let cell = &rep.cells[0];
    let n = a_values.len();
    let rate = |i: usize, j: usize| &cell.per_model[i * n + j];
    let mut worst = (0.0f64, 0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let (u, v) = (rate(i, j), rate(j, i));
            let (nu, nv) = (u.trials - u.unstable - u.failed, v.trials - v.unstable - v.failed);
            let pooled = (u.rejections + v.rejections) as f64 / (nu + nv) as f64;
            let se = (pooled * (1.0 - pooled) * (1.0 / nu as f64 + 1.0 / nv as f64)).sqrt();
            let z = if se > 0.0 { (u.rate - v.rate).abs() / se } else { 0.0 };
            if z > worst.0 {
                worst = (z, i, j);
            }
        }
    }
    let (lo, hi) = cell
        .per_model
        .iter()
        .fold((1.0f64, 0.0f64), |(lo, hi), m| (lo.min(m.rate), hi.max(m.rate)));
    Ok((
        worst.0 < 3.0,
        format!(
            "max swap-pair gap {:.2} pooled SE at (a_xx, a_yy) = ({:.1}, {:.1}); power range [{lo:.3}, {hi:.3}]",
            worst.0, a_values[worst.1], a_values[worst.2]
        ),
    ))
}

fn report(k: usize, outcome: Outcome, soft: bool, t0: Instant) -> bool {
    let secs = t0.elapsed().as_secs_f64();
    match outcome {
        Ok((true, msg)) => {
            println!("criterion {k}: PASS ({msg}) [{secs:.1}s]");
            true
        }
        Ok((false, msg)) => {
            let tag = if soft { "FAIL (soft)" } else { "FAIL" };
            println!("criterion {k}: {tag} ({msg}) [{secs:.1}s]");
            soft
        }
        Err(e) => {
            println!("criterion {k}: FAIL (error: {e}) [{secs:.1}s]");
            soft
        }
    }
}

/// `SRGC_ACCEPTANCE=3,9` runs a subset; by default every criterion runs.
fn selected() -> impl Fn(usize) -> bool {
    let only: Option<Vec<usize>> = std::env::var("SRGC_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|k| k.trim().parse().ok()).collect());
    move |k| only.as_ref().is_none_or(|o| o.contains(&k))
}

fn main() -> ExitCode {
    let want = selected();
    let mut ok = true;
    if want(1) || want(2) {
        let t = Instant::now();
        match fig1_model().and_then(|(m, part)| {
            let law = null_weights_time(&m, &part)?;
            Ok((m, part, law))
        }) {
            Ok((m, part, law)) => {
                if want(1) {
                    ok &= report(1, c1(&m, &part, &law), false, t);
                }
                let t = Instant::now();
                if want(2) {
                    ok &= report(2, c2(&law), false, t);
                }
            }
            Err(e) => {
                let msg = format!("error: {e}");
                ok &= report(1, Ok((false, msg.clone())), false, t);
                ok &= report(2, Ok((false, msg)), false, t);
            }
        }
    }
    if want(3) {
        let t = Instant::now();
        ok &= report(3, c3(), false, t);
    }
    if want(4) {
        let t = Instant::now();
        ok &= report(4, c4(), false, t);
    }
    if want(5) || want(6) {
        let t = Instant::now();
        match c56() {
            Ok((c5, c6)) => {
                ok &= report(5, c5, false, t);
                ok &= report(6, c6, false, t);
            }
            Err(e) => {
                let msg = format!("error: {e}");
                ok &= report(5, Ok((false, msg.clone())), false, t);
                ok &= report(6, Ok((false, msg)), false, t);
            }
        }
    }
    if want(7) {
        let t = Instant::now();
        report(7, c7(), true, t);
    }
    if want(8) {
        let t = Instant::now();
        ok &= report(8, c8(), false, t);
    }
    if want(9) {
        let t = Instant::now();
        ok &= report(9, c9(), false, t);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
